"""Monte-Carlo audits of the proven per-step inequalities and operator contracts.

Each lemma audit runs an ensemble of short seeded trajectories, evaluates
both sides of a proven inequality on every seed and iteration, and checks
that the across-seed mean slack stays above -3 standard errors everywhere.
The inequalities hold for the true expectations whenever their stepsize
conditions hold, so a violation beyond Monte-Carlo noise means the engine,
the schedule guard, or the constants are wrong.

Out-of-cap configurations are rejected before any stepping: auditing an
inequality outside its validity region would be meaningless.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .errors import ConfigurationError, InvalidParameterError
from .numerics import RngStream
from .objectives import make_least_squares, make_quadratic
from .oracles import (
    additive_noise_oracle,
    audit_noise,
    deterministic_oracle,
    finite_sum_oracle,
    strong_growth_oracle,
)
from .compressors import (
    Identity,
    RandCoordinate,
    RandDrop,
    TopK,
    declared_delta,
    estimate_delta,
    probe_vectors,
    relative_errors,
)
from .schedules import constant_stepsize, is_tau_slow_decreasing
from .engine import AlgorithmSpec, initial_state, make_run_rngs, step

__all__ = [
    "LemmaAuditResult",
    "audit_descent_quasiconvex",
    "audit_descent_nonconvex",
    "audit_dsgd_error_bound",
    "audit_ecsgd_error_bound",
    "audit_local_dispersion_bound",
    "CompressorAuditResult",
    "audit_compressor_contract",
    "AUDIT_SUITES",
    "run_audit_suite",
]


@dataclass
class LemmaAuditResult:
    """Verdict of one inequality audit. `margin` rows are mean slack + 3 SE;
    all must be nonnegative (up to float headroom) for a pass."""

    name: str
    passed: bool
    seeds: int
    T: int
    worst_iteration: int
    worst_mean_slack: float
    worst_se: float
    min_margin: float

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "seeds": self.seeds,
            "T": self.T,
            "worst_iteration": self.worst_iteration,
            "worst_mean_slack": self.worst_mean_slack,
            "worst_se": self.worst_se,
            "min_margin": self.min_margin,
        }


def _finish(name: str, slack: np.ndarray, scale: np.ndarray) -> LemmaAuditResult:
    """slack: (seeds, T) per-seed inequality slack; scale: (T,) magnitude of the
    bound for float headroom."""
    seeds, T = slack.shape
    mean = slack.mean(axis=0)
    se = slack.std(axis=0, ddof=1) / math.sqrt(seeds) if seeds > 1 else np.zeros(T)
    margin = mean + 3.0 * se + 1e-9 * (1.0 + np.abs(scale))
    worst = int(np.argmin(margin))
    return LemmaAuditResult(
        name=name,
        passed=bool(np.all(margin >= 0.0)),
        seeds=seeds,
        T=T,
        worst_iteration=worst,
        worst_mean_slack=float(mean[worst]),
        worst_se=float(se[worst]),
        min_margin=float(margin[worst]),
    )


def _require_cap(spec: AlgorithmSpec, cap: float, what: str) -> None:
    gamma0 = spec.stepsize.value(0)
    if gamma0 > cap * (1 + 1e-12):
        raise ConfigurationError(
            f"configuration rejected: {what} requires gamma <= {cap:.6g}, got {gamma0:.6g}"
        )


def audit_descent_quasiconvex(
    spec: AlgorithmSpec, objective, T: int, seeds: int, x0=None
) -> LemmaAuditResult:
    """One-step contraction of the virtual iterate under quasi-convexity:

    E||xt+1 - x*||^2 <= (1 - mu g/2) E||xt - x*||^2 - (g/2) E(f(x_t) - f*)
                        + g^2 sigma2 + 3 L g E||x_t - xt||^2

    (xt denotes the virtual iterate). Valid for gamma <= 1/(4 L (1 + M)).
    """
    if spec.kind == "local-sgd":
        raise InvalidParameterError("descent audit covers single-sequence algorithms")
    if objective.convexity_class == "non-convex":
        raise InvalidParameterError("quasi-convex descent needs a quasi-convex objective")
    L, mu = objective.L, objective.mu
    M, sigma2 = spec.oracle.M, spec.oracle.sigma2
    _require_cap(spec, 1.0 / (4.0 * L * (1.0 + M)), "quasi-convex descent")
    x_star, f_star = objective.x_star, objective.f_star

    slack = np.empty((seeds, T))
    scale = np.zeros(T)
    for s in range(seeds):
        state = initial_state(spec, objective, x0)
        rngs = make_run_rngs(s, spec.workers)
        for t in range(T):
            gamma = spec.stepsize.value(t)
            dv = state.virtual - x_star
            r_t = float(dv @ dv)
            fgap = float(objective.value(state.x)) - f_star
            de = state.x - state.virtual
            drift = float(de @ de)
            step(state, spec, rngs)
            dv = state.virtual - x_star
            r_next = float(dv @ dv)
            rhs = (1.0 - mu * gamma / 2.0) * r_t - (gamma / 2.0) * fgap \
                + gamma * gamma * sigma2 + 3.0 * L * gamma * drift
            slack[s, t] = rhs - r_next
            scale[t] = max(scale[t], abs(rhs))
    return _finish("descent-quasiconvex", slack, scale)


def audit_descent_nonconvex(
    spec: AlgorithmSpec, objective, T: int, seeds: int, x0=None
) -> LemmaAuditResult:
    """One-step value descent of the virtual iterate, no convexity used:

    E f(xt+1) <= E f(xt) - (g/4) E||grad f(x_t)||^2 + g^2 L sigma2 / 2
                 + (g L^2 / 2) E||x_t - xt||^2

    Valid for gamma <= 1/(2 L (1 + M)).
    """
    if spec.kind == "local-sgd":
        raise InvalidParameterError("descent audit covers single-sequence algorithms")
    L = objective.L
    M, sigma2 = spec.oracle.M, spec.oracle.sigma2
    _require_cap(spec, 1.0 / (2.0 * L * (1.0 + M)), "non-convex descent")

    slack = np.empty((seeds, T))
    scale = np.zeros(T)
    for s in range(seeds):
        state = initial_state(spec, objective, x0)
        rngs = make_run_rngs(s, spec.workers)
        for t in range(T):
            gamma = spec.stepsize.value(t)
            f_t = float(objective.value(state.virtual))
            g = objective.grad(state.x)
            grad_sq = float(g @ g)
            de = state.x - state.virtual
            drift = float(de @ de)
            step(state, spec, rngs)
            f_next = float(objective.value(state.virtual))
            rhs = f_t - (gamma / 4.0) * grad_sq + gamma * gamma * L * sigma2 / 2.0 \
                + (gamma * L * L / 2.0) * drift
            slack[s, t] = rhs - f_next
            scale[t] = max(scale[t], abs(rhs))
    return _finish("descent-nonconvex", slack, scale)


def audit_dsgd_error_bound(
    spec: AlgorithmSpec, objective, T: int, seeds: int, x0=None
) -> LemmaAuditResult:
    """Delay error mass against recent gradient norms, for fixed-delay d-sgd:

    3 L E||e_t||^2 <= (1/(16 L tau)) sum_{i=1..tau} E||grad f(x_{t-i})||^2
                      + gamma_t sigma2

    Valid for gamma <= 1/(10 L (tau + M)) with {gamma_t^2} tau-slow decreasing.
    Warm-up iterations use the gradients that exist.
    """
    if spec.kind != "d-sgd" or spec.delay_model != "fixed":
        raise InvalidParameterError("this bound is about fixed-delay d-sgd")
    L = objective.L
    M, sigma2 = spec.oracle.M, spec.oracle.sigma2
    tau = spec.tau
    _require_cap(spec, 1.0 / (10.0 * L * (tau + M)), "d-sgd error bound")
    gammas = spec.stepsize.values(T)
    if not is_tau_slow_decreasing(gammas * gammas, tau):
        raise ConfigurationError("configuration rejected: gamma_t^2 must be tau-slow decreasing")

    slack = np.empty((seeds, T))
    scale = np.zeros(T)
    for s in range(seeds):
        state = initial_state(spec, objective, x0)
        rngs = make_run_rngs(s, spec.workers)
        history = []  # ||grad f(x_i)||^2, i = 0..t-1
        for t in range(T):
            err_sq = float(state.err @ state.err)
            recent = history[-tau:]
            rhs = sum(recent) / (16.0 * L * tau) + gammas[t] * sigma2
            slack[s, t] = rhs - 3.0 * L * err_sq
            scale[t] = max(scale[t], abs(rhs))
            g = objective.grad(state.x)
            history.append(float(g @ g))
            step(state, spec, rngs)
    return _finish("dsgd-error-bound", slack, scale)


def audit_ecsgd_error_bound(
    spec: AlgorithmSpec, objective, T: int, seeds: int, x0=None
) -> LemmaAuditResult:
    """Compression error mass against a geometrically discounted gradient sum:

    3 L E||e_{t+1}||^2 <= (delta/(64 L)) sum_{i=0..t} (1 - delta/4)^{t-i}
                          E||grad f(x_i)||^2 + gamma_t sigma2

    Valid for gamma <= 1/(10 L (2/delta + M)) with {gamma_t^2}
    (2/delta)-slow decreasing.
    """
    if spec.kind != "ec-sgd":
        raise InvalidParameterError("this bound is about ec-sgd")
    L = objective.L
    M, sigma2 = spec.oracle.M, spec.oracle.sigma2
    delta = declared_delta(spec.compressor, objective.d)
    _require_cap(spec, 1.0 / (10.0 * L * (2.0 / delta + M)), "ec-sgd error bound")
    gammas = spec.stepsize.values(T)
    tau_slow = max(1, math.ceil(2.0 / delta))
    if not is_tau_slow_decreasing(gammas * gammas, tau_slow):
        raise ConfigurationError("configuration rejected: gamma_t^2 must be (2/delta)-slow decreasing")

    decay = 1.0 - delta / 4.0
    slack = np.empty((seeds, T))
    scale = np.zeros(T)
    for s in range(seeds):
        state = initial_state(spec, objective, x0)
        rngs = make_run_rngs(s, spec.workers)
        discounted = 0.0
        for t in range(T):
            g = objective.grad(state.x)
            discounted = decay * discounted + float(g @ g)
            step(state, spec, rngs)
            err_sq = float(state.err @ state.err)
            rhs = (delta / (64.0 * L)) * discounted + gammas[t] * sigma2
            slack[s, t] = rhs - 3.0 * L * err_sq
            scale[t] = max(scale[t], abs(rhs))
    return _finish("ecsgd-error-bound", slack, scale)


def audit_local_dispersion_bound(
    spec: AlgorithmSpec, objective, T: int, seeds: int, x0=None
) -> LemmaAuditResult:
    """Worker spread around the virtual mean against recent worker gradients:

    (3 L / K) sum_k E||x_t^k - xt||^2
        <= (1/(16 L tau K)) sum_k sum_{i=0..tau-1} E||grad f(x_{t-i}^k)||^2
           + gamma_t sigma2 / K

    Valid for gamma <= 1/(10 L (tau K + M)).
    """
    if spec.kind != "local-sgd":
        raise InvalidParameterError("this bound is about local-sgd")
    L = objective.L
    M, sigma2 = spec.oracle.M, spec.oracle.sigma2
    tau, K = spec.tau, spec.workers
    _require_cap(spec, 1.0 / (10.0 * L * (tau * K + M)), "local dispersion bound")
    gammas = spec.stepsize.values(T)

    slack = np.empty((seeds, T))
    scale = np.zeros(T)
    for s in range(seeds):
        state = initial_state(spec, objective, x0)
        rngs = make_run_rngs(s, spec.workers)
        history = []  # sum_k ||grad f(x_t^k)||^2 per iteration
        for t in range(T):
            G = objective.grad(state.workers)
            history.append(float(np.sum(G * G)))
            diff = state.workers - state.virtual
            lhs = 3.0 * L * float(np.sum(diff * diff)) / K
            recent = history[-tau:] if t + 1 >= tau else history
            rhs = sum(recent) / (16.0 * L * tau * K) + gammas[t] * sigma2 / K
            slack[s, t] = rhs - lhs
            scale[t] = max(scale[t], abs(rhs))
            step(state, spec, rngs)
    return _finish("local-dispersion-bound", slack, scale)


@dataclass
class CompressorAuditResult:
    """Contract check on the probe set plus the empirical delta estimate."""

    name: str
    declared_delta: float
    estimated_delta: float
    estimate_tolerance: float
    probe_rows: list
    passed: bool

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "declared_delta": self.declared_delta,
            "estimated_delta": self.estimated_delta,
            "estimate_tolerance": self.estimate_tolerance,
            "probe_rows": self.probe_rows,
            "passed": self.passed,
        }


def audit_compressor_contract(compressor, d: int, trials: int, seed: int = 0) -> CompressorAuditResult:
    """Check E||x - C(x)||^2 <= (1 - delta) ||x||^2 on every probe at 3 SE,
    and that the empirical delta estimate lands near the declared value."""
    delta = declared_delta(compressor, d)
    bound = 1.0 - delta
    rng = RngStream(seed, 0, 5).generator()
    rows = []
    ok = True
    for i, x in enumerate(probe_vectors(d, rng)):
        errs = relative_errors(compressor, x, trials, rng)
        mean = float(errs.mean())
        se = float(errs.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
        violated = mean > bound + 3.0 * se + 1e-9
        ok = ok and not violated
        rows.append({"probe": i, "mean": mean, "se": se, "bound": bound, "violated": violated})
    est = estimate_delta(compressor, d, trials, seed=seed)
    tol = max(0.02, 5.0 / math.sqrt(trials))
    est_ok = abs(est - delta) <= tol
    return CompressorAuditResult(
        name=compressor.name,
        declared_delta=delta,
        estimated_delta=est,
        estimate_tolerance=tol,
        probe_rows=rows,
        passed=bool(ok and est_ok),
    )


AUDIT_SUITES = ("compressor", "noise", "lemma-dsgd", "lemma-ecsgd", "lemma-local", "descent")

_AUDIT_D = 20
_AUDIT_MU = 0.1
_AUDIT_L = 1.0
_AUDIT_SIGMA2 = 1.0
_AUDIT_T = 200


def _audit_quadratic():
    return make_quadratic(_AUDIT_D, _AUDIT_MU, _AUDIT_L)


def run_audit_suite(suite: str, budget: int | None = None, seed: int = 0) -> dict:
    """Run one named audit suite at desk scale; returns a JSON-ready dict.

    `budget` is the Monte-Carlo knob: trials per probe/point for the
    compressor and noise suites (default 10000), seeds for the lemma suites
    (default 100).
    """
    if suite not in AUDIT_SUITES:
        raise InvalidParameterError(f"unknown audit suite {suite!r}; choose from {AUDIT_SUITES}")

    if suite == "compressor":
        trials = budget or 10000
        results = [
            audit_compressor_contract(c, _AUDIT_D, trials, seed=seed)
            for c in (Identity(), RandDrop(2), RandDrop(4), RandDrop(8),
                      RandCoordinate(0.25), RandCoordinate(0.5), TopK(1), TopK(10))
        ]
        return {
            "suite": suite,
            "passed": all(r.passed for r in results),
            "results": [r.to_dict() for r in results],
        }

    if suite == "noise":
        trials = budget or 10000
        quad = _audit_quadratic()
        rng = RngStream(seed, 0, 6).generator()
        points = quad.x_star + rng.normal(size=(100, _AUDIT_D))
        ls = make_least_squares(32, 8, RngStream(seed, 0, 7).generator(), noise_level=0.5)
        ls_points = ls.x_star + rng.normal(size=(100, 8))
        reports = [
            ("deterministic", audit_noise(deterministic_oracle(quad), points, trials, seed=seed)),
            ("additive", audit_noise(additive_noise_oracle(quad, _AUDIT_SIGMA2), points, trials, seed=seed)),
            ("strong-growth", audit_noise(strong_growth_oracle(quad, 2.0), points, trials, seed=seed)),
            ("finite-sum", audit_noise(finite_sum_oracle(ls), ls_points, trials, seed=seed)),
        ]
        return {
            "suite": suite,
            "passed": all(r.passed for _, r in reports),
            "results": [{"oracle": name, **r.to_dict()} for name, r in reports],
        }

    seeds = budget or 100
    quad = _audit_quadratic()
    oracle = additive_noise_oracle(quad, _AUDIT_SIGMA2)

    if suite == "lemma-dsgd":
        tau = 4
        spec = AlgorithmSpec(
            kind="d-sgd", oracle=oracle, tau=tau,
            stepsize=constant_stepsize(1.0 / (10.0 * quad.L * tau)),
        )
        results = [audit_dsgd_error_bound(spec, quad, _AUDIT_T, seeds)]
    elif suite == "lemma-ecsgd":
        comp = RandDrop(8)
        spec = AlgorithmSpec(
            kind="ec-sgd", oracle=oracle, compressor=comp,
            stepsize=constant_stepsize(1.0 / (10.0 * quad.L * (2.0 / comp.delta))),
        )
        results = [audit_ecsgd_error_bound(spec, quad, _AUDIT_T, seeds)]
    elif suite == "lemma-local":
        tau, K = 4, 4
        spec = AlgorithmSpec(
            kind="local-sgd", oracle=oracle, tau=tau, workers=K,
            stepsize=constant_stepsize(1.0 / (10.0 * quad.L * tau * K)),
        )
        results = [audit_local_dispersion_bound(spec, quad, _AUDIT_T, seeds)]
    else:  # descent
        tau = 4
        spec = AlgorithmSpec(
            kind="d-sgd", oracle=oracle, tau=tau,
            stepsize=constant_stepsize(1.0 / (10.0 * quad.L * tau)),
        )
        results = [
            audit_descent_quasiconvex(spec, quad, _AUDIT_T, seeds),
            audit_descent_nonconvex(spec, quad, _AUDIT_T, seeds),
        ]
    return {
        "suite": suite,
        "passed": all(r.passed for r in results),
        "results": [r.to_dict() for r in results],
    }
