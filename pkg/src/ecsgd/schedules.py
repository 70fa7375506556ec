"""Stepsize and weight schedules, slow-sequence validators, and tuners.

The convergence guarantees in this family all rest on "tau-slow" sequences:
a positive sequence is tau-slow decreasing when it decreases but loses at
most a (1 + 1/(2 tau)) factor per step, and tau-slow increasing when its
reciprocals are tau-slow decreasing. The preset schedules below are built to
satisfy these validators by construction; `is_tau_slow_*` exist so that a
config can be checked rather than trusted.

Presets, given smoothness L, modulus mu, relative noise M, noise level
sigma2 and the effective delay tau_eff of the algorithm:

  strongly-convex-decreasing   gamma_t = 4 / (mu (kappa + t)), w_t = kappa + t,
                               kappa = 40 L (tau_eff + M) / mu
  strongly-convex-constant     tuned constant gamma <= 1/(10 L (tau_eff + M)),
                               w_t = (1 - mu gamma / 2)^{-(t+1)}
  weakly-convex-constant       tuned constant, uniform weights
  nonconvex-constant           tuned constant, uniform weights; r0 is
                               5 (f(x0) - f*) instead of a distance
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .errors import ConfigurationError, InvalidParameterError

__all__ = [
    "StepsizeSchedule",
    "constant_stepsize",
    "inverse_time_stepsize",
    "WeightSchedule",
    "uniform_weights",
    "linear_weights",
    "exponential_weights",
    "is_tau_slow_decreasing",
    "is_tau_slow_increasing",
    "theorem_kappa",
    "tune_constant_stepsize",
    "tune_constant_stepsize_strongly_convex",
    "WeightedAverage",
    "weighted_average",
    "PRESETS",
    "make_preset_schedules",
]

_REL_TOL = 1e-12  # absorbs float rounding in the validators


@dataclass(frozen=True)
class StepsizeSchedule:
    """Positive, nonincreasing stepsizes; optionally guarded by a cap.

    kind "constant": gamma_t = gamma. kind "inverse-time":
    gamma_t = 4 / (mu (kappa + t)). A cap is the theorem-specific bound the
    schedule must stay under; presets always carry one, hand-built schedules
    may omit it and run unguarded. Violating a declared cap is a
    configuration error, raised here so bad runs never start.
    """

    kind: str
    gamma: float = 0.0
    mu: float = 0.0
    kappa: float = 0.0
    cap: float | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "inverse-time"):
            raise InvalidParameterError(f"unknown stepsize kind {self.kind!r}")
        if self.cap is not None and self.cap <= 0:
            raise InvalidParameterError(f"cap must be positive, got {self.cap}")
        if self.kind == "constant":
            if self.gamma <= 0:
                raise InvalidParameterError(f"gamma must be positive, got {self.gamma}")
        else:
            if self.mu <= 0:
                raise InvalidParameterError("inverse-time stepsizes require mu > 0")
            if self.kappa < 1:
                raise InvalidParameterError(f"kappa must be >= 1, got {self.kappa}")
        first = self.value(0)
        if self.cap is not None and first > self.cap * (1 + _REL_TOL):
            raise ConfigurationError(
                f"configuration rejected: stepsize {first:.6g} exceeds cap {self.cap:.6g}"
            )

    def value(self, t: int) -> float:
        if self.kind == "constant":
            return self.gamma
        return 4.0 / (self.mu * (self.kappa + t))

    def values(self, T: int) -> np.ndarray:
        """gamma_0 .. gamma_{T-1} as an array (the engine precomputes these)."""
        if self.kind == "constant":
            return np.full(T, self.gamma)
        return 4.0 / (self.mu * (self.kappa + np.arange(T)))


def constant_stepsize(gamma: float, cap: float | None = None) -> StepsizeSchedule:
    return StepsizeSchedule(kind="constant", gamma=float(gamma), cap=cap)


def inverse_time_stepsize(mu: float, kappa: float, cap: float | None = None) -> StepsizeSchedule:
    return StepsizeSchedule(kind="inverse-time", mu=float(mu), kappa=float(kappa), cap=cap)


@dataclass(frozen=True)
class WeightSchedule:
    """Averaging weights. kind "uniform": w_t = 1; "linear": w_t = kappa + t;
    "exponential": w_t = rho^{-(t+1)}.

    Exponential weights overflow floats for long horizons, so consumers
    should use `ratio` (w_{t-1}/w_t), which is what the stable averaging
    recurrence needs; `weight` is for small-t inspection only.
    """

    kind: str
    kappa: float = 0.0
    rho: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "linear", "exponential"):
            raise InvalidParameterError(f"unknown weight kind {self.kind!r}")
        if self.kind == "linear" and self.kappa <= 0:
            raise InvalidParameterError(f"linear weights need kappa > 0, got {self.kappa}")
        if self.kind == "exponential" and not (0 < self.rho <= 1):
            raise InvalidParameterError(f"exponential weights need rho in (0, 1], got {self.rho}")

    def weight(self, t: int) -> float:
        if self.kind == "uniform":
            return 1.0
        if self.kind == "linear":
            return self.kappa + t
        return self.rho ** -(t + 1)

    def ratio(self, t: int) -> float:
        """w_{t-1} / w_t, for t >= 1; always in (0, 1]."""
        if self.kind == "uniform":
            return 1.0
        if self.kind == "linear":
            return (self.kappa + t - 1) / (self.kappa + t)
        return self.rho


def uniform_weights() -> WeightSchedule:
    return WeightSchedule(kind="uniform")


def linear_weights(kappa: float) -> WeightSchedule:
    return WeightSchedule(kind="linear", kappa=float(kappa))


def exponential_weights(rho: float) -> WeightSchedule:
    return WeightSchedule(kind="exponential", rho=float(rho))


def _as_positive_sequence(seq) -> np.ndarray:
    a = np.asarray(list(seq), dtype=np.float64)
    if a.size == 0:
        raise InvalidParameterError("sequence is empty")
    if not np.all(np.isfinite(a)) or np.any(a <= 0):
        raise InvalidParameterError("sequence entries must be positive and finite")
    return a


def _check_tau(tau: int) -> int:
    if tau < 1 or int(tau) != tau:
        raise InvalidParameterError(f"tau must be a positive integer, got {tau}")
    return int(tau)


def is_tau_slow_decreasing(seq, tau: int) -> bool:
    """True iff a_{t+1} <= a_t and a_{t+1} (1 + 1/(2 tau)) >= a_t for all t."""
    a = _as_positive_sequence(seq)
    tau = _check_tau(tau)
    if a.size == 1:
        return True
    ratio = a[1:] / a[:-1]
    lo = 1.0 / (1.0 + 1.0 / (2.0 * tau))
    return bool(np.all(ratio <= 1 + _REL_TOL) and np.all(ratio >= lo * (1 - _REL_TOL)))


def is_tau_slow_increasing(seq, tau: int) -> bool:
    """True iff the reciprocal sequence is tau-slow decreasing."""
    a = _as_positive_sequence(seq)
    tau = _check_tau(tau)
    return is_tau_slow_decreasing(1.0 / a, tau)


def theorem_kappa(L: float, mu: float, tau_eff: float, M: float) -> float:
    """The horizon offset 40 L (tau_eff + M) / mu used by the decreasing preset."""
    if mu <= 0:
        raise InvalidParameterError("theorem_kappa requires strong quasi-convexity (mu > 0)")
    if L < mu:
        raise InvalidParameterError(f"need L >= mu, got L={L}, mu={mu}")
    if tau_eff < 1:
        raise InvalidParameterError(f"tau_eff must be >= 1, got {tau_eff}")
    if M < 0:
        raise InvalidParameterError(f"M must be nonnegative, got {M}")
    return 40.0 * L * (tau_eff + M) / mu


def tune_constant_stepsize(r0: float, c: float, d_cap: float, T: int) -> float:
    """min(1/d_cap, sqrt(r0 / (c (T+1)))): the sublinear-regime constant stepsize.

    r0 is the initial residual the bound is stated in (a squared distance,
    or 5x an initial value gap for the non-convex preset), c the noise scale
    multiplying gamma in the bound, d_cap the cap denominator
    (10 L (tau_eff + M) for this family). c = 0 is noiseless: take the cap.
    """
    if r0 <= 0:
        raise InvalidParameterError(f"r0 must be positive, got {r0}")
    if c < 0:
        raise InvalidParameterError(f"c must be nonnegative, got {c}")
    if d_cap <= 0:
        raise InvalidParameterError(f"d_cap must be positive, got {d_cap}")
    if T < 0:
        raise InvalidParameterError(f"T must be nonnegative, got {T}")
    if c == 0:
        return 1.0 / d_cap
    return min(1.0 / d_cap, math.sqrt(r0 / (c * (T + 1))))


def tune_constant_stepsize_strongly_convex(
    r0: float, a: float, c: float, d_cap: float, T: int
) -> float:
    """min(1/d_cap, ln(max(e, a^2 r0 T^2 / c)) / (a T)): the linear-plus-noise tuner.

    Balances r0 exp(-a gamma T) / gamma against c gamma for a = mu/2. c = 0
    falls back to the cap, as does T = 0.
    """
    if r0 <= 0:
        raise InvalidParameterError(f"r0 must be positive, got {r0}")
    if a <= 0:
        raise InvalidParameterError(f"a must be positive, got {a}")
    if c < 0:
        raise InvalidParameterError(f"c must be nonnegative, got {c}")
    if d_cap <= 0:
        raise InvalidParameterError(f"d_cap must be positive, got {d_cap}")
    if T < 0:
        raise InvalidParameterError(f"T must be nonnegative, got {T}")
    if c == 0 or T == 0:
        return 1.0 / d_cap
    return min(1.0 / d_cap, math.log(max(math.e, a * a * r0 * T * T / c)) / (a * T))


class WeightedAverage:
    """Streaming weighted average using the normalized recurrence.

    Tracks c_t = W_t / w_t instead of the raw weight sum, so exponential
    weights never overflow: c_t = c_{t-1} (w_{t-1}/w_t) + 1 and
    avg_t = avg_{t-1} + (x_t - avg_{t-1}) / c_t.
    """

    def __init__(self, weights: WeightSchedule):
        self.weights = weights
        self._t = -1
        self._c = 0.0
        self._avg = None

    def push(self, x) -> None:
        self._t += 1
        if self._t == 0:
            self._c = 1.0
            self._avg = np.array(x, dtype=np.float64)
            return
        self._c = self._c * self.weights.ratio(self._t) + 1.0
        self._avg += (np.asarray(x, dtype=np.float64) - self._avg) / self._c

    @property
    def count(self) -> int:
        return self._t + 1

    @property
    def mean(self) -> np.ndarray:
        if self._avg is None:
            raise InvalidParameterError("no points pushed")
        return self._avg


def weighted_average(points, weights: WeightSchedule) -> np.ndarray:
    """Weighted average of points under the schedule, in push order."""
    acc = WeightedAverage(weights)
    for x in points:
        acc.push(x)
    return acc.mean


PRESETS = (
    "strongly-convex-decreasing",
    "strongly-convex-constant",
    "weakly-convex-constant",
    "nonconvex-constant",
)


def make_preset_schedules(
    preset: str,
    L: float,
    mu: float,
    M: float,
    sigma2: float,
    tau_eff: float,
    T: int,
    r0: float | None = None,
    f0_gap: float | None = None,
) -> tuple[StepsizeSchedule, WeightSchedule]:
    """Schedules matching the convergence theorems, with their caps attached.

    r0 = ||x0 - x*||^2 is required by the constant-stepsize presets;
    f0_gap = f(x0) - f* is required by the non-convex preset. Every preset
    enforces gamma <= 1/(10 L (tau_eff + M)).
    """
    if preset not in PRESETS:
        raise InvalidParameterError(f"unknown preset {preset!r}; choose from {PRESETS}")
    if L <= 0:
        raise InvalidParameterError(f"L must be positive, got {L}")
    if sigma2 < 0:
        raise InvalidParameterError(f"sigma2 must be nonnegative, got {sigma2}")
    if T < 1:
        raise InvalidParameterError(f"T must be >= 1, got {T}")
    d_cap = 10.0 * L * (tau_eff + M)
    cap = 1.0 / d_cap

    if preset == "strongly-convex-decreasing":
        kappa = theorem_kappa(L, mu, tau_eff, M)
        return inverse_time_stepsize(mu, kappa, cap=cap), linear_weights(kappa)

    if preset == "strongly-convex-constant":
        if mu <= 0:
            raise InvalidParameterError("strongly-convex presets require mu > 0")
        if r0 is None:
            raise InvalidParameterError("constant presets need r0 = ||x0 - x*||^2")
        gamma = tune_constant_stepsize_strongly_convex(r0, mu / 2.0, 2.0 * sigma2, d_cap, T)
        return constant_stepsize(gamma, cap=cap), exponential_weights(1.0 - mu * gamma / 2.0)

    if preset == "weakly-convex-constant":
        if r0 is None:
            raise InvalidParameterError("constant presets need r0 = ||x0 - x*||^2")
        gamma = tune_constant_stepsize(r0, 2.0 * sigma2, d_cap, T)
        return constant_stepsize(gamma, cap=cap), uniform_weights()

    if f0_gap is None:
        raise InvalidParameterError("nonconvex preset needs f0_gap = f(x0) - f*")
    if f0_gap <= 0:
        f0_gap = 1e-12  # already at the optimum; any admissible stepsize works
    gamma = tune_constant_stepsize(5.0 * f0_gap, 4.0 * L * sigma2, d_cap, T)
    return constant_stepsize(gamma, cap=cap), uniform_weights()
