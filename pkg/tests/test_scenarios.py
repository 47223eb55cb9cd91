import numpy as np
import pytest

from lure_smo.errors import ConfigError, DimensionError
from lure_smo.scenarios import BUILTINS, ScenarioConfig, builtin, load_scenario, normalize


def test_builtin_names():
    assert set(BUILTINS) == {"example1", "example2-xi1", "example2-xi2"}


def test_example1_values():
    cfg = load_scenario("example1")
    d = cfg.data
    assert d["system"]["A"][0] == [-6.0, 4.0, 0.0]
    assert [r[0] for r in d["system"]["B"]] == [4.0, 6.0, -3.0]
    assert d["system"]["F"] == [[1.0, 0.0, 0.0]]
    assert d["observer"]["K"] == [[4.0]] and d["observer"]["eps"] == 2.0
    sc = cfg.build()
    assert sc.eps_star == pytest.approx(2.0) and sc.eps_used == pytest.approx(2.0)


def test_example2_xi2_uncertainty():
    sc = load_scenario("example2-xi2").build()
    xi = sc.system.xi
    assert np.allclose(xi.const, [16.0552, -23.4092, -29.5495])
    t = 0.7
    assert np.allclose(
        xi(t) - xi.const, [np.exp(-t), np.exp(-2 * t), np.exp(-1.5 * t)], atol=1e-15
    )


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_round_trip(name, tmp_path):
    cfg = builtin(name)
    path = tmp_path / "s.toml"
    path.write_text(cfg.dumps())
    again = load_scenario(path)
    assert again == cfg
    assert again.dumps() == cfg.dumps()


def _raw():
    import tomli

    return tomli.loads(builtin("example1").dumps())


def test_unknown_key_rejected():
    raw = _raw()
    raw["system"]["Amat"] = raw["system"]["A"]
    with pytest.raises(ConfigError, match="Amat"):
        normalize(raw)


def test_unknown_top_level_table():
    raw = _raw()
    raw["solver"] = {"dt": 1}
    with pytest.raises(ConfigError, match="solver"):
        normalize(raw)


def test_missing_key():
    raw = _raw()
    del raw["observer"]["P"]
    with pytest.raises(ConfigError, match="'P'"):
        normalize(raw)


def test_bad_number():
    raw = _raw()
    raw["observer"]["eps"] = "two"
    with pytest.raises(ConfigError, match="observer.eps"):
        normalize(raw)


def test_dimension_error_names_B():
    raw = _raw()
    raw["system"]["B"] = [[4.0], [6.0]]
    with pytest.raises(DimensionError, match="B"):
        ScenarioConfig(normalize(raw)).build()


def test_parse_error_has_location(tmp_path):
    path = tmp_path / "broken.toml"
    path.write_text('name = "x"\n[system]\nA = = [[1, 2]]\n')
    with pytest.raises(ConfigError, match=r"broken\.toml.*line"):
        load_scenario(path)


def test_missing_file():
    with pytest.raises(ConfigError, match="builtin"):
        load_scenario("no-such-scenario")


def test_operator_type():
    raw = _raw()
    raw["system"]["operators"][0]["type"] = "coulomb"
    with pytest.raises(ConfigError, match="type"):
        normalize(raw)


def test_kappa_scalar_shorthand():
    raw = _raw()
    raw["observer"]["kappa1"] = 2.5
    cfg = ScenarioConfig(normalize(raw))
    assert cfg.data["observer"]["kappa1"] == {"c": 2.5, "d": 0.0, "r": 0.0}


def test_overrides():
    cfg = builtin("example1").with_overrides(dt=1e-3, t_end=2.0)
    sc = cfg.build()
    assert sc.scheme.dt == 1e-3 and sc.scheme.t_end == 2.0
    assert builtin("example1").data["scheme"]["dt"] == 1e-4


def test_kappa3_rule_uses_admissible_eps():
    sc = builtin("example2-xi1").build()
    k3 = sc.observer.kappa3
    assert k3.eps == pytest.approx(sc.eps_star)
