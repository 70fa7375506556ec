"""Experiment configuration: INI-style sections with typed keys and grids.

A config file has five sections: [objective], [oracle], [algorithm],
[schedule], [run]. Values are plain key = value pairs; algorithm parameters
may be comma-separated lists, which expand into a cartesian grid of config
points. Every diagnostic names the offending section.key so a bad file is
fixable without reading source.

The fingerprint hashes the fully resolved configuration (defaults filled,
grids normalized), so it changes exactly when some effective field changes.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
import os
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import ConfigurationError
from .numerics import RngStream
from .objectives import (
    make_least_squares,
    make_nonconvex_radial,
    make_quadratic,
    make_star_convex_1d,
)
from .oracles import (
    additive_noise_oracle,
    deterministic_oracle,
    finite_sum_oracle,
    strong_growth_oracle,
)
from .compressors import Identity, RandCoordinate, RandDrop, TopK
from .engine import ALGORITHM_KINDS, AlgorithmSpec
from .schedules import (
    PRESETS,
    constant_stepsize,
    exponential_weights,
    inverse_time_stepsize,
    linear_weights,
    make_preset_schedules,
    theorem_kappa,
    uniform_weights,
)

__all__ = [
    "ExperimentConfig",
    "ResolvedPoint",
    "parse_config",
    "build_objective",
    "build_oracle",
    "expand_points",
    "resolve_point",
    "OUTPUT_ROOT_ENV",
]

OUTPUT_ROOT_ENV = "ECSGD_OUTPUT_ROOT"

_SECTIONS = ("objective", "oracle", "algorithm", "schedule", "run")

# section -> key -> (kind, default); grids only in [algorithm]
_OBJECTIVE_KEYS = {
    "quadratic": {"d": ("int", 20), "mu": ("float", 0.1), "L": ("float", 1.0)},
    "star-convex-1d": {},
    "least-squares": {
        "n": ("int", 32),
        "d": ("int", 8),
        "noise_level": ("float", 0.5),
        "design_seed": ("int", 0),
    },
    "nonconvex-radial": {"d": ("int", 20), "mu": ("float", 0.0)},
}
_ORACLE_KEYS = {
    "deterministic": {},
    "additive": {"sigma2": ("float", 1.0)},
    "finite-sum": {},
    "strong-growth": {"M": ("float", 2.0)},
}
_ALGORITHM_KEYS = {
    "plain-sgd": {},
    "d-sgd": {"tau": ("int-grid", (1,)), "delay_model": ("str", "fixed")},
    "ec-sgd": {
        "compressor": ("str", None),
        "drop_tau": ("int-grid", None),
        "keep_prob": ("float-grid", None),
        "k": ("int-grid", None),
    },
    "minibatch": {"tau": ("int-grid", (1,))},
    "local-sgd": {"tau": ("int-grid", (1,)), "workers": ("int-grid", (1,))},
}
_SCHEDULE_KEYS = {
    "preset": ("str", None),
    "kind": ("str", None),
    "gamma": ("float", None),
    "kappa": ("float", None),
    "weights": ("str", None),
}
_RUN_KEYS = {
    "T": ("int", 1000),
    "seeds": ("seeds", (0, 1, 2, 3, 4, 5, 6, 7, 8, 9)),
    "record_stride": ("int", 1),
    "output": ("str", None),
    "x0_scale": ("float", 1.0),
}

_PRESET_FAMILIES = {
    "plain": "plain-sgd",
    "dsgd": "d-sgd",
    "ecsgd": "ec-sgd",
    "minibatch": "minibatch",
    "local": "local-sgd",
}


def _fail(fieldname: str, message: str) -> None:
    raise ConfigurationError(f"{fieldname}: {message}")


def _as_int(fieldname: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        _fail(fieldname, f"expected an integer, got {raw!r}")


def _as_float(fieldname: str, raw: str) -> float:
    try:
        v = float(raw)
    except ValueError:
        _fail(fieldname, f"expected a number, got {raw!r}")
    if not math.isfinite(v):
        _fail(fieldname, f"expected a finite number, got {raw!r}")
    return v


def _as_grid(fieldname: str, raw: str, cast) -> tuple:
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if not parts:
        _fail(fieldname, "expected one or more comma-separated values")
    return tuple(cast(fieldname, p) for p in parts)


def _parse_seeds(fieldname: str, raw: str) -> tuple:
    """`N` means seeds 0..N-1; `a:b` means range(a, b); a comma list is taken
    verbatim."""
    raw = raw.strip()
    if ":" in raw:
        lo, _, hi = raw.partition(":")
        a, b = _as_int(fieldname, lo), _as_int(fieldname, hi)
        if b <= a:
            _fail(fieldname, f"empty seed range {raw!r}")
        return tuple(range(a, b))
    if "," in raw:
        seeds = _as_grid(fieldname, raw, _as_int)
        if len(set(seeds)) != len(seeds):
            _fail(fieldname, "duplicate seeds")
        return seeds
    n = _as_int(fieldname, raw)
    if n < 1:
        _fail(fieldname, f"seed count must be >= 1, got {n}")
    return tuple(range(n))


def _coerce(fieldname: str, raw: str, kind: str):
    if kind == "int":
        return _as_int(fieldname, raw)
    if kind == "float":
        return _as_float(fieldname, raw)
    if kind == "str":
        return raw.strip()
    if kind == "int-grid":
        return _as_grid(fieldname, raw, _as_int)
    if kind == "float-grid":
        return _as_grid(fieldname, raw, _as_float)
    if kind == "seeds":
        return _parse_seeds(fieldname, raw)
    raise AssertionError(kind)


def _read_section(parser, section: str, kind_key: str | None, schemas, fixed_schema=None) -> dict:
    """Coerce one section against its (possibly kind-dependent) schema.
    Unknown keys and missing required kinds are field-named errors."""
    raw = dict(parser[section]) if parser.has_section(section) else {}
    if fixed_schema is not None:
        schema = fixed_schema
        out = {}
    else:
        if kind_key not in raw:
            _fail(f"{section}.{kind_key}", "required")
        kind = raw.pop(kind_key).strip()
        if kind not in schemas:
            _fail(f"{section}.{kind_key}", f"unknown {section} kind {kind!r} (choose from {sorted(schemas)})")
        schema = schemas[kind]
        out = {kind_key: kind}
    for key, value in raw.items():
        if key not in schema:
            _fail(f"{section}.{key}", f"unknown key (valid here: {sorted(schema) or 'none'})")
        out[key] = _coerce(f"{section}.{key}", value, schema[key][0])
    for key, (k, default) in schema.items():
        out.setdefault(key, default)
    return out


@dataclass
class ExperimentConfig:
    """Parsed and validated experiment description, grids unexpanded."""

    objective: dict
    oracle: dict
    algorithm: dict
    schedule: dict
    run: dict
    source: str = ""

    def resolved(self) -> dict:
        """Every effective field, defaults filled, as plain JSON-able data."""
        def clean(d):
            return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items() if v is not None}
        return {
            "objective": clean(self.objective),
            "oracle": clean(self.oracle),
            "algorithm": clean(self.algorithm),
            "schedule": clean(self.schedule),
            "run": clean(self.run),
        }

    def fingerprint(self) -> str:
        text = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def output_dir(self) -> str:
        out = self.run["output"]
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root and not os.path.isabs(out):
            return os.path.join(root, out)
        return out


def parse_config(path: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case-sensitive (T vs t, L)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path!r}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigurationError(f"config parse error in {path!r}: {exc}") from exc

    for section in parser.sections():
        if section not in _SECTIONS:
            _fail(section, f"unknown section (valid: {list(_SECTIONS)})")
    for section in ("objective", "oracle", "algorithm"):
        if not parser.has_section(section):
            _fail(section, "section required")

    objective = _read_section(parser, "objective", "kind", _OBJECTIVE_KEYS)
    oracle = _read_section(parser, "oracle", "kind", _ORACLE_KEYS)
    algorithm = _read_section(parser, "algorithm", "kind", _ALGORITHM_KEYS)
    schedule = _read_section(parser, "schedule", None, None, fixed_schema=_SCHEDULE_KEYS)
    run = _read_section(parser, "run", None, None, fixed_schema=_RUN_KEYS)

    if run["output"] is None:
        stem = os.path.splitext(os.path.basename(path))[0] or "experiment"
        run["output"] = os.path.join("runs", stem)
    if run["T"] < 1:
        _fail("run.T", f"must be >= 1, got {run['T']}")
    if run["record_stride"] < 1:
        _fail("run.record_stride", f"must be >= 1, got {run['record_stride']}")

    config = ExperimentConfig(objective, oracle, algorithm, schedule, run, source=path)
    _validate(config)
    return config


def _validate(config: ExperimentConfig) -> None:
    algo = config.algorithm
    kind = algo["kind"]
    assert kind in ALGORITHM_KINDS  # schema enforced membership already

    if kind == "ec-sgd":
        comp = algo.get("compressor")
        if comp is None:
            _fail("algorithm.compressor", "required for ec-sgd")
        if comp not in ("identity", "rand-drop", "rand-coordinate", "top-k"):
            _fail("algorithm.compressor", f"unknown compressor {comp!r}")
        needed = {"rand-drop": "drop_tau", "rand-coordinate": "keep_prob", "top-k": "k"}.get(comp)
        for key in ("drop_tau", "keep_prob", "k"):
            if key == needed:
                if algo.get(key) is None:
                    _fail(f"algorithm.{key}", f"required for compressor {comp!r}")
            elif algo.get(key) is not None:
                _fail(f"algorithm.{key}", f"not a parameter of compressor {comp!r}")
    if kind == "d-sgd" and algo["delay_model"] not in ("fixed", "iid-bounded"):
        _fail("algorithm.delay_model", f"must be 'fixed' or 'iid-bounded', got {algo['delay_model']!r}")
    for key in ("tau", "workers", "drop_tau", "k"):
        vals = algo.get(key)
        if vals is not None and any(v < 1 for v in vals):
            _fail(f"algorithm.{key}", "values must be >= 1")
    if algo.get("keep_prob") is not None and any(not 0 < p <= 1 for p in algo["keep_prob"]):
        _fail("algorithm.keep_prob", "values must be in (0, 1]")

    sched = config.schedule
    if sched["preset"] is not None and sched["kind"] is not None:
        _fail("schedule.preset", "give either a preset or an explicit kind, not both")
    if sched["preset"] is None and sched["kind"] is None:
        _fail("schedule.kind", "required (or set schedule.preset)")
    if sched["preset"] is not None:
        _preset_base(sched["preset"], kind)  # raises on bad name / family mismatch
    else:
        if sched["kind"] not in ("constant", "inverse-time"):
            _fail("schedule.kind", f"must be 'constant' or 'inverse-time', got {sched['kind']!r}")
        if sched["kind"] == "constant" and sched["gamma"] is None:
            _fail("schedule.gamma", "required for a constant schedule")
        if sched["weights"] is not None and sched["weights"] not in ("uniform", "linear", "exponential"):
            _fail("schedule.weights", f"unknown weights {sched['weights']!r}")

    if config.oracle["kind"] == "finite-sum" and config.objective["kind"] != "least-squares":
        _fail("oracle.kind", "finite-sum oracle needs the least-squares objective")


def _preset_base(name: str, algo_kind: str) -> str:
    """Presets may carry a mnemonic family prefix (dsgd-, ecsgd-, local-,
    minibatch-, plain-) that must agree with algorithm.kind."""
    if name in PRESETS:
        return name
    prefix, _, base = name.partition("-")
    family = _PRESET_FAMILIES.get(prefix)
    if family is not None and base in PRESETS:
        if family != algo_kind:
            _fail("schedule.preset", f"preset {name!r} is for {family}, but algorithm.kind is {algo_kind!r}")
        return base
    _fail("schedule.preset", f"unknown preset {name!r} (bases: {list(PRESETS)})")


def build_objective(config: ExperimentConfig):
    obj = config.objective
    kind = obj["kind"]
    if kind == "quadratic":
        return make_quadratic(obj["d"], obj["mu"], obj["L"])
    if kind == "star-convex-1d":
        return make_star_convex_1d()
    if kind == "least-squares":
        rng = RngStream(obj["design_seed"], 0, 4).generator()
        return make_least_squares(obj["n"], obj["d"], rng, noise_level=obj["noise_level"])
    return make_nonconvex_radial(obj["d"], obj["mu"])


def build_oracle(config: ExperimentConfig, objective):
    orc = config.oracle
    kind = orc["kind"]
    if kind == "deterministic":
        return deterministic_oracle(objective)
    if kind == "additive":
        return additive_noise_oracle(objective, orc["sigma2"])
    if kind == "finite-sum":
        return finite_sum_oracle(objective)
    return strong_growth_oracle(objective, orc["M"])


_GRID_KEYS = ("tau", "workers", "drop_tau", "keep_prob", "k")


def expand_points(config: ExperimentConfig) -> list:
    """Cartesian product over multi-valued algorithm keys, in sorted key
    order. Returns (name, params) pairs; a gridless config yields one point
    named 'point'."""
    algo = config.algorithm
    gridded = [k for k in sorted(algo) if k in _GRID_KEYS and algo[k] is not None and len(algo[k]) > 1]
    base = dict(algo)
    for k in _GRID_KEYS:
        if isinstance(base.get(k), tuple):
            base[k] = base[k][0]
    if not gridded:
        return [("point", base)]
    points = []
    for combo in product(*(algo[k] for k in gridded)):
        params = dict(base)
        overrides = dict(zip(gridded, combo))
        params.update(overrides)
        name = "_".join(f"{k}-{v}" for k, v in overrides.items())
        points.append((name, params))
    return points


def _build_compressor(params: dict):
    comp = params.get("compressor")
    if comp is None:
        return None
    if comp == "identity":
        return Identity()
    if comp == "rand-drop":
        return RandDrop(params["drop_tau"])
    if comp == "rand-coordinate":
        return RandCoordinate(params["keep_prob"])
    return TopK(params["k"])


@dataclass
class ResolvedPoint:
    """One grid point, ready to run: the spec plus the manifest facts."""

    name: str
    params: dict
    spec: AlgorithmSpec
    tau_eff: float
    kappa: float | None
    gamma0: float

    def manifest_entry(self) -> dict:
        entry = {
            "name": self.name,
            "algorithm": {k: v for k, v in self.params.items() if v is not None},
            "tau_eff": self.tau_eff,
            "kappa": self.kappa,
            "gamma0": self.gamma0,
        }
        return entry


def resolve_point(config: ExperimentConfig, objective, oracle, name: str, params: dict) -> ResolvedPoint:
    """Materialize the algorithm spec and schedules for one config point."""
    compressor = _build_compressor(params)
    kind = params["kind"]
    kwargs = {"kind": kind, "oracle": oracle, "compressor": compressor}
    if params.get("tau") is not None:
        kwargs["tau"] = params["tau"]
    if params.get("workers") is not None:
        kwargs["workers"] = params["workers"]
    if params.get("delay_model") is not None:
        kwargs["delay_model"] = params["delay_model"]

    probe = AlgorithmSpec(stepsize=constant_stepsize(1.0), **kwargs)
    tau_eff = probe.tau_eff(objective.d)
    T = config.run["T"]
    sched = config.schedule
    L = oracle.contract_L if oracle.kind == "finite-sum" else objective.L
    kappa = None

    if sched["preset"] is not None:
        base = _preset_base(sched["preset"], kind)
        x0 = np.full(objective.d, config.run["x0_scale"])
        dx = x0 - objective.x_star
        r0 = float(dx @ dx)
        f0_gap = float(objective.value(x0)) - objective.f_star
        stepsize, weights = make_preset_schedules(
            base, L=L, mu=objective.mu, M=oracle.M, sigma2=oracle.sigma2,
            tau_eff=tau_eff, T=T, r0=r0, f0_gap=f0_gap,
        )
        if base == "strongly-convex-decreasing":
            kappa = theorem_kappa(L, objective.mu, tau_eff, oracle.M)
    else:
        weights_kind = sched["weights"]
        if sched["kind"] == "constant":
            gamma = sched["gamma"]
            stepsize = constant_stepsize(gamma)
            if weights_kind in (None, "uniform"):
                weights = uniform_weights()
            elif weights_kind == "exponential":
                if objective.mu <= 0:
                    _fail("schedule.weights", "exponential weights need mu > 0")
                weights = exponential_weights(1.0 - objective.mu * gamma / 2.0)
            else:
                _fail("schedule.weights", "linear weights need an inverse-time schedule")
        else:
            if objective.mu <= 0:
                _fail("schedule.kind", "inverse-time schedule needs mu > 0")
            kappa = sched["kappa"]
            if kappa is None:
                kappa = theorem_kappa(L, objective.mu, tau_eff, oracle.M)
            stepsize = inverse_time_stepsize(objective.mu, kappa)
            if weights_kind in (None, "linear"):
                weights = linear_weights(kappa)
            elif weights_kind == "uniform":
                weights = uniform_weights()
            else:
                _fail("schedule.weights", "exponential weights need a constant schedule")

    spec = AlgorithmSpec(stepsize=stepsize, weights=weights, **kwargs)
    return ResolvedPoint(
        name=name,
        params=params,
        spec=spec,
        tau_eff=tau_eff,
        kappa=kappa,
        gamma0=stepsize.value(0),
    )
