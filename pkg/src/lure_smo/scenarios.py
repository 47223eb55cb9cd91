"""Scenario files: strict TOML schema, builtin examples, model assembly.

A scenario file has the tables ``[system]`` (with sub-tables ``input``,
``nonlinearity``, ``uncertainty`` and an array ``operators``),
``[observer]``, ``[scheme]``, ``[initial]`` and ``[checks]``.  Unknown keys
are rejected so that a misspelled matrix name fails loudly.  The README
lists every key.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .assumptions import max_admissible_eps
from .errors import ConfigError, DimensionError
from .model import (
    InputSignal,
    Kappa,
    LureSystem,
    Nonlinearity,
    ObserverConfig,
    Uncertainty,
    kappa3_rule,
)
from .monotone import DiagonalOperator, loop_transform, relay_affine, rotor_friction
from .sim import RK4, SchemeConfig

__all__ = [
    "BUILTINS",
    "ScenarioConfig",
    "Scenario",
    "load_scenario",
    "builtin",
    "dumps",
]

REQUIRED = object()
OPTIONAL = object()

_KAPPA = {"c": REQUIRED, "d": 0.0, "r": 0.0}

SCHEMA = {
    "name": REQUIRED,
    "description": "",
    "system": {
        "A": REQUIRED,
        "B": REQUIRED,
        "C": REQUIRED,
        "F": REQUIRED,
        "L_f": 0.0,
        "input": {"offset": REQUIRED, "amplitude": OPTIONAL, "freq": OPTIONAL, "phase": OPTIONAL},
        "nonlinearity": {"G": REQUIRED, "S": OPTIONAL, "Cc": OPTIONAL},
        "operators": REQUIRED,
        "uncertainty": {
            "const": REQUIRED,
            "amp": OPTIONAL,
            "freq": OPTIONAL,
            "phase": OPTIONAL,
            "S": OPTIONAL,
            "Cc": OPTIONAL,
            "exp_amp": OPTIONAL,
            "exp_rate": OPTIONAL,
            "decay": 0.0,
        },
    },
    "observer": {
        "P": REQUIRED,
        "L": REQUIRED,
        "K": REQUIRED,
        "eps": REQUIRED,
        "delta": 1e-3,
        "sigma_obs": 1e-3,
        "kappa1": REQUIRED,
        "kappa2": REQUIRED,
        "kappa3": REQUIRED,
        "k_prime": OPTIONAL,
    },
    "scheme": {"method": RK4, "dt": 1e-4, "t_end": 20.0, "sigma_plant": 1e-3},
    "initial": {"x0": REQUIRED, "xhat0": REQUIRED},
    "checks": {
        "assumptions": True,
        "range_tol": 1e-9,
        "envelope_rel": 0.05,
        "envelope_abs": OPTIONAL,
        "attractive_radius": OPTIONAL,
        "attractive_margin_abs": 0.0,
        "attractive_margin_rel": 0.0,
        "final_error_max": OPTIONAL,
        "ey_after": OPTIONAL,
        "ey_max": OPTIONAL,
        "t_observer": True,
    },
}

_OPERATOR_KEYS = {
    "relay_affine": {"a": REQUIRED, "b": REQUIRED},
    "rotor_friction": {
        "Tsl": REQUIRED,
        "T1": REQUIRED,
        "T2": REQUIRED,
        "w1": REQUIRED,
        "w2": REQUIRED,
        "bl": REQUIRED,
    },
}


def _num(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {v!r}")
    return float(v)


def _numeric_tree(v, where):
    if isinstance(v, list):
        return [_numeric_tree(x, f"{where}[{i}]") for i, x in enumerate(v)]
    return _num(v, where)


def _normalize_kappa(v, where):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = {"c": v}
    if not isinstance(v, dict):
        raise ConfigError(f"{where}: expected a table")
    if "rule" in v:
        extra = set(v) - {"rule", "rho"}
        if extra:
            raise ConfigError(f"{where}: unknown key(s) {sorted(extra)}")
        if v["rule"] != "absorb":
            raise ConfigError(f"{where}.rule: only 'absorb' is supported, got {v['rule']!r}")
        return {"rule": "absorb", "rho": _num(v.get("rho", 1.0), f"{where}.rho")}
    return _normalize_table(v, _KAPPA, where)


def _normalize_operator(v, where):
    if not isinstance(v, dict):
        raise ConfigError(f"{where}: expected a table")
    kind = v.get("type")
    if kind not in _OPERATOR_KEYS:
        raise ConfigError(f"{where}.type: expected one of {sorted(_OPERATOR_KEYS)}, got {kind!r}")
    spec = dict(_OPERATOR_KEYS[kind], type=REQUIRED, loop_m=0.0)
    out = _normalize_table(v, spec, where)
    out["type"] = kind
    return out


def _normalize_table(data, spec, where):
    if not isinstance(data, dict):
        raise ConfigError(f"[{where}]: expected a table")
    unknown = set(data) - set(spec)
    if unknown:
        raise ConfigError(f"[{where}]: unknown key(s) {sorted(unknown)}")
    out = {}
    for key, default in spec.items():
        path = f"{where}.{key}" if where else key
        if key not in data:
            if default is REQUIRED:
                raise ConfigError(f"[{where or 'top'}]: missing required key {key!r}")
            if default is OPTIONAL:
                continue
            out[key] = default
            continue
        val = data[key]
        if isinstance(default, dict):
            out[key] = _normalize_table(val, default, path)
        elif key in ("name", "description", "method", "type"):
            if not isinstance(val, str):
                raise ConfigError(f"{path}: expected a string")
            out[key] = val
        elif isinstance(default, bool):
            if not isinstance(val, bool):
                raise ConfigError(f"{path}: expected true/false")
            out[key] = val
        elif key in ("kappa1", "kappa2", "kappa3"):
            out[key] = _normalize_kappa(val, path)
        elif key == "operators":
            if not isinstance(val, list) or not val:
                raise ConfigError(f"{path}: expected a non-empty array of tables")
            out[key] = [_normalize_operator(o, f"{path}[{i}]") for i, o in enumerate(val)]
        elif key == "attractive_radius" and val == "omega":
            out[key] = "omega"
        else:
            out[key] = _numeric_tree(val, path)
    return out


def normalize(data):
    """Validate a raw mapping against the schema and fill defaults."""
    return _normalize_table(data, SCHEMA, "")


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario description (plain nested data)."""

    data: dict

    @property
    def name(self):
        return self.data["name"]

    def __eq__(self, other):
        return isinstance(other, ScenarioConfig) and self.data == other.data

    def dumps(self):
        return tomli_w.dumps(self.data)

    def with_overrides(self, **scheme):
        d = _deepcopy(self.data)
        for k, v in scheme.items():
            if v is not None:
                d["scheme"][k] = v
        return ScenarioConfig(normalize(d))

    def build(self):
        return _build(self)


def _deepcopy(d):
    if isinstance(d, dict):
        return {k: _deepcopy(v) for k, v in d.items()}
    if isinstance(d, list):
        return [_deepcopy(v) for v in d]
    return d


def dumps(config):
    return config.dumps()


@dataclass(eq=False)
class Scenario:
    """A scenario assembled into model objects."""

    config: ScenarioConfig
    system: LureSystem
    observer: ObserverConfig
    scheme: SchemeConfig
    x0: np.ndarray
    xhat0: np.ndarray
    eps_printed: float
    eps_star: float
    checks: dict = field(default_factory=dict)

    @property
    def name(self):
        return self.config.name

    @property
    def eps_used(self):
        return min(self.eps_printed, self.eps_star)


def _mat(v):
    return np.array(v, dtype=np.float64)


def _make_operator(o):
    if o["type"] == "relay_affine":
        op = relay_affine(o["a"], o["b"])
    else:
        op = rotor_friction(o["Tsl"], o["T1"], o["T2"], o["w1"], o["w2"], o["bl"])
    return loop_transform(op, o["loop_m"])


def _kappa(v):
    return Kappa(v["c"], v["d"], v["r"])


def _build(cfg):
    d = cfg.data
    s = d["system"]
    try:
        u = s["input"]
        inp = InputSignal(u["offset"], u.get("amplitude"), u.get("freq"), u.get("phase"))
        nl = s["nonlinearity"]
        f = Nonlinearity(_mat(nl["G"]), nl.get("S"), nl.get("Cc"))
    except ValueError as exc:
        raise DimensionError(f"[system.input/nonlinearity] {exc}") from exc
    try:
        xi = Uncertainty(**{k: v for k, v in s["uncertainty"].items()})
    except ValueError as exc:
        raise DimensionError(f"[system.uncertainty] {exc}") from exc
    op = DiagonalOperator(tuple(_make_operator(o) for o in s["operators"]))
    try:
        system = LureSystem(
            _mat(s["A"]), _mat(s["B"]), _mat(s["C"]), _mat(s["F"]), f, op, xi, inp, s["L_f"]
        )
    except ValueError as exc:
        raise DimensionError(f"[system] {exc}") from exc
    o = d["observer"]
    P, L, K = _mat(o["P"]), _mat(o["L"]), _mat(o["K"])
    try:
        eps_star = max_admissible_eps(system.A, system.F, P, L, system.L_f)
    except ValueError as exc:
        raise DimensionError(f"[observer] {exc}") from exc
    eps = o["eps"]
    k2 = _kappa(o["kappa2"])
    k3 = o["kappa3"]
    if "rule" in k3:
        eps_rule = min(eps, eps_star) if eps_star > 0 else eps
        kappa3 = kappa3_rule(k3["rho"], eps_rule, P, k2)
    else:
        kappa3 = _kappa(k3)
    try:
        obs = ObserverConfig(
            P, L, K, eps, _kappa(o["kappa1"]), k2, kappa3, o["delta"], o["sigma_obs"]
        )
        obs.check_dims(system)
    except ValueError as exc:
        raise DimensionError(f"[observer] {exc}") from exc
    sc = d["scheme"]
    scheme = SchemeConfig(sc["method"], sc["dt"], sc["t_end"], sc["sigma_plant"])
    ini = d["initial"]
    x0 = np.array(ini["x0"], dtype=np.float64)
    xh0 = np.array(ini["xhat0"], dtype=np.float64)
    if x0.shape != (system.n,) or xh0.shape != (system.n,):
        raise DimensionError(f"[initial] x0 and xhat0 must have length {system.n}")
    checks = dict(d["checks"])
    if "k_prime" in o:
        checks["k_prime"] = o["k_prime"]
    return Scenario(cfg, system, obs, scheme, x0, xh0, float(eps), float(eps_star), checks)


def _parse_text(text, source):
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    try:
        return ScenarioConfig(normalize(raw))
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_scenario(path_or_name):
    """Load a builtin by name or a TOML file by path."""
    key = str(path_or_name)
    if key in BUILTINS:
        return builtin(key)
    path = Path(key)
    if not path.exists():
        raise ConfigError(
            f"{key!r} is neither a file nor a builtin scenario ({', '.join(sorted(BUILTINS))})"
        )
    return _parse_text(path.read_text(encoding="utf-8"), str(path))


# -- builtins ---------------------------------------------------------------
#
# Matrices are the published example data.  Initial states, horizons and the
# tuning left open (kappa bounds, delta, rho) are local choices; the kappa
# bounds are sup-bounds over the box sin, cos in [-1, 1] rounded up.

_X0 = [1.0, -1.0, 2.0]
_XH0 = [-3.0, 4.0, 0.0]

_EX1 = {
    "name": "example1",
    "description": "Three-state Lur'e plant with affine relay feedback and state-dependent uncertainty",
    "system": {
        "A": [[-6, 4, 0], [7, -8, 0], [0, 0, -7]],
        "B": [[4], [6], [-3]],
        "C": [[8, 6, -3]],
        "F": [[1, 0, 0]],
        "L_f": 4,
        "input": {"offset": [0], "amplitude": [5], "freq": [1], "phase": [0]},
        "nonlinearity": {
            "G": [[1], [2], [-1]],
            "S": [[0, 2, 0], [0, 0, 0], [0, 0, 4]],
            "Cc": [[0, 0, 0], [3, 0, 0], [0, 0, 0]],
        },
        "operators": [{"type": "relay_affine", "a": 3, "b": 6}],
        "uncertainty": {
            "const": [2, 0, 0],
            "amp": [0, 0, 4],
            "freq": [0, 0, 1],
            "Cc": [[0, 0, 0], [5, 0, 0], [0, 0, 0]],
        },
    },
    "observer": {
        "P": [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
        "L": [[0], [11], [0]],
        "K": [[4]],
        "eps": 2,
        "kappa1": {"c": 2},
        "kappa2": {"c": math.sqrt(41)},
        "kappa3": {"rule": "absorb", "rho": 1.0},
    },
    "scheme": {"dt": 1e-4, "t_end": 20},
    "initial": {"x0": _X0, "xhat0": _XH0},
    "checks": {
        "attractive_radius": "omega",
        "attractive_margin_abs": 0.5,
        "ey_after": 2.0,
        "ey_max": 0.05,
    },
}

_P2 = [[0.2958, 0.0417, 0.0600], [0.0417, 0.0286, 0.0], [0.0600, 0.0, 0.0326]]

_EX2_SYSTEM = {
    # loop-transformed rotor: A_bar = A - m B C, friction + 0.021 x3
    "A": [[0, 1, -1], [-0.1526, -4.6688, 0], [2.2301, 0, 0.6442]],
    "B": [[0], [0], [30.6748]],
    "C": [[0, 0, 1]],
    "F": [[1, 0, 0]],
    "L_f": 0,
    "input": {"offset": [2]},
    "nonlinearity": {"G": [[0], [8.3841], [0]]},
    "operators": [
        {
            "type": "rotor_friction",
            "Tsl": 0.1642,
            "T1": 0.0603,
            "T2": -0.2267,
            "w1": 5.7468,
            "w2": 0.2941,
            "bl": 0.0109,
            "loop_m": -0.021,
        }
    ],
}

_EX2_OBSERVER = {
    "P": _P2,
    "L": [[3.3069], [-1.2140], [-12.2290]],
    "K": [[-1.8392]],
    "eps": 0.0714,
    "delta": 0.02,
    "kappa3": {"rule": "absorb", "rho": 0.1},
}

_EX2_CHECKS = {"range_tol": 1e-2, "ey_after": 2.0, "ey_max": 0.05}


def _ex2(name, description, uncertainty, kappa1, kappa2, checks, **observer):
    sys_d = _deepcopy(_EX2_SYSTEM)
    sys_d["uncertainty"] = uncertainty
    obs = _deepcopy(_EX2_OBSERVER)
    obs.update(kappa1=kappa1, kappa2=kappa2, **observer)
    return {
        "name": name,
        "description": description,
        "system": sys_d,
        "observer": obs,
        "scheme": {"dt": 1e-4, "t_end": 20},
        "initial": {"x0": _X0, "xhat0": _XH0},
        "checks": dict(_EX2_CHECKS, **checks),
    }


_EX2_XI1 = _ex2(
    "example2-xi1",
    "Rotor with friction, persistent uncertainty (1, 4 sin x2, cos t)",
    {
        "const": [1, 0, 0],
        "amp": [0, 0, 1],
        "freq": [0, 0, 1],
        "phase": [0, 0, math.pi / 2],
        "S": [[0, 0, 0], [0, 4, 0], [0, 0, 0]],
    },
    {"c": 0.17},
    {"c": 4.08},
    {"attractive_radius": 7.75, "attractive_margin_rel": 0.15},
    k_prime=0.676,
)

_EX2_XI2 = _ex2(
    "example2-xi2",
    "Rotor with friction, constant uncertainty in the observation subspace plus a decaying part",
    {
        "const": [16.0552, -23.4092, -29.5495],
        "exp_amp": [1, 1, 1],
        "exp_rate": [1, 2, 1.5],
    },
    {"c": 2.00001, "d": 0.0823, "r": 1.0},
    {"c": 3e-5, "d": 1.7321, "r": 1.0},
    {"final_error_max": 0.1},
)

BUILTINS = {d["name"]: d for d in (_EX1, _EX2_XI1, _EX2_XI2)}


def builtin(name):
    try:
        raw = BUILTINS[name]
    except KeyError:
        raise ConfigError(f"unknown builtin {name!r}; choose from {sorted(BUILTINS)}") from None
    return ScenarioConfig(normalize(_deepcopy(raw)))
