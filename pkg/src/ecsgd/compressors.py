"""Contractive compression operators and an empirical contract estimator.

Every compressor C declares a factor delta in (0, 1] and promises

    E_C ||x - C(x)||^2 <= (1 - delta) ||x||^2   for all x.

None of the shipped operators rescale their output; the error-feedback loop
in the engine is what repairs the bias.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .numerics import RngStream

__all__ = [
    "Identity",
    "RandDrop",
    "RandCoordinate",
    "TopK",
    "compress",
    "declared_delta",
    "relative_errors",
    "probe_vectors",
    "estimate_delta",
]


@dataclass(frozen=True)
class Identity:
    """C(x) = x; delta = 1. The degenerate member that recovers plain SGD."""

    name = "identity"

    @property
    def delta(self) -> float:
        return 1.0

    def compress(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return x


@dataclass(frozen=True)
class RandDrop:
    """Keep the whole vector with probability 1/tau, else drop it entirely.

    delta = 1/tau: E||x - C(x)||^2 = (1 - 1/tau) ||x||^2 exactly, the
    standard coupling that makes compressed runs comparable to delay tau.
    """

    tau: float

    name = "rand-drop"

    def __post_init__(self):
        if self.tau < 1:
            raise InvalidParameterError(f"tau must be >= 1, got {self.tau}")

    @property
    def delta(self) -> float:
        return 1.0 / self.tau

    def compress(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if rng.random() < 1.0 / self.tau:
            return x
        return np.zeros_like(x)


@dataclass(frozen=True)
class RandCoordinate:
    """Keep each coordinate independently with probability delta (no rescaling).

    E||x - C(x)||^2 = (1 - delta) ||x||^2 exactly, coordinatewise.
    """

    keep_prob: float

    name = "rand-coordinate"

    def __post_init__(self):
        if not (0 < self.keep_prob <= 1):
            raise InvalidParameterError(f"keep probability must be in (0, 1], got {self.keep_prob}")

    @property
    def delta(self) -> float:
        return self.keep_prob

    def compress(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return x * (rng.random(x.size) < self.keep_prob)


@dataclass(frozen=True)
class TopK:
    """Keep the k entries of largest magnitude, ties broken by lowest index.

    Deterministic; delta = k/d with the worst case attained by
    equal-magnitude vectors, where ||x - C(x)||^2 = (1 - k/d) ||x||^2.
    """

    k: int

    name = "top-k"

    def __post_init__(self):
        if self.k < 1 or int(self.k) != self.k:
            raise InvalidParameterError(f"k must be a positive integer, got {self.k}")

    def delta_for(self, d: int) -> float:
        if self.k > d:
            raise InvalidParameterError(f"k = {self.k} exceeds dimension {d}")
        return self.k / d

    def compress(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if self.k > x.size:
            raise InvalidParameterError(f"k = {self.k} exceeds dimension {x.size}")
        # stable sort on -|x| keeps the lowest index first among ties
        order = np.argsort(-np.abs(x), kind="stable")
        out = np.zeros_like(x)
        keep = order[: self.k]
        out[keep] = x[keep]
        return out


def compress(compressor, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return compressor.compress(np.asarray(x, dtype=np.float64), rng)


def declared_delta(compressor, d: int) -> float:
    """The delta the compressor promises at dimension d."""
    if isinstance(compressor, TopK):
        return compressor.delta_for(d)
    return compressor.delta


def relative_errors(compressor, x: np.ndarray, trials: int, rng: np.random.Generator) -> np.ndarray:
    """||x - C(x)||^2 / ||x||^2 for `trials` applications, as a (trials,) array.

    The shipped random compressors draw one uniform per application
    (rand-drop) or d uniforms per application (rand-coordinate), so batching
    the draws consumes the generator exactly like sequential compress calls
    and yields bit-identical outcomes; deterministic compressors are
    evaluated once and broadcast. Unknown compressors fall back to a loop.
    """
    x = np.asarray(x, dtype=np.float64)
    norm_sq = float(x @ x)
    if norm_sq == 0.0:
        return np.zeros(trials)
    if isinstance(compressor, (Identity, TopK)):
        diff = x - compressor.compress(x, rng)
        return np.full(trials, float(diff @ diff) / norm_sq)
    if isinstance(compressor, RandDrop):
        kept = rng.random(trials) < 1.0 / compressor.tau
        return 1.0 - kept.astype(np.float64)
    if isinstance(compressor, RandCoordinate):
        out = np.empty(trials)
        xsq = x * x
        chunk = max(1, min(trials, 20000))
        for lo in range(0, trials, chunk):
            m = min(chunk, trials - lo)
            dropped = rng.random((m, x.size)) >= compressor.keep_prob
            out[lo : lo + m] = dropped @ xsq / norm_sq
        return out
    out = np.empty(trials)
    for i in range(trials):
        diff = x - compressor.compress(x, rng)
        out[i] = float(diff @ diff) / norm_sq
    return out


def probe_vectors(d: int, rng: np.random.Generator) -> list:
    """The contract probe set: canonical basis, all-ones, Gaussian, single-spike."""
    probes = [np.eye(d)[i] for i in range(d)]
    probes.append(np.ones(d))
    probes.extend(rng.normal(size=(5, d)))
    spike = np.full(d, 1e-3)
    spike[0] = 1e3
    probes.append(spike)
    return probes


def estimate_delta(compressor, d: int, trials: int, seed: int = 0) -> float:
    """Empirical delta: 1 - max over probe vectors of the mean relative error.

    Probes: every canonical basis vector, the all-ones vector, a handful of
    Gaussian vectors, and a single-spike vector (one dominant coordinate).
    Each probe is compressed `trials` times; the worst mean of
    ||x - C(x)||^2 / ||x||^2 across probes gives the estimate. For
    deterministic compressors this is exact on the probe set: identity
    returns exactly 1.0, top-k at k = d returns exactly 1.0.
    """
    if d < 1:
        raise InvalidParameterError(f"dimension must be >= 1, got {d}")
    if trials < 1:
        raise InvalidParameterError(f"trials must be >= 1, got {trials}")
    rng = RngStream(seed, 0, 4).generator()
    worst = 0.0
    for x in probe_vectors(d, rng):
        worst = max(worst, float(relative_errors(compressor, x, trials, rng).mean()))
    return 1.0 - worst
