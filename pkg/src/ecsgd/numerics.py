"""Deterministic numeric primitives: vectors, RNG streams, running statistics.

Vectors are plain float64 numpy arrays; `vector` is the validating
constructor and the only place non-finite entries can be caught early.
Randomness goes through counter-based Philox streams keyed by
(seed, *stream ids), so any draw is reproducible from its key alone and
independent runs can be fanned out across processes without coordination.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import InvalidParameterError

__all__ = ["vector", "RngStream", "RunningStats", "gaussian_vector"]


def vector(entries, d: int | None = None) -> np.ndarray:
    """Validated float64 1-d array: finite entries, dimension >= 1.

    If `d` is given the length must match. Returns a fresh array, so callers
    can mutate the result without aliasing the input.
    """
    x = np.array(entries, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise InvalidParameterError(f"vector must be 1-d with at least one entry, got shape {x.shape}")
    if d is not None and x.size != d:
        raise InvalidParameterError(f"vector has dimension {x.size}, expected {d}")
    if not np.all(np.isfinite(x)):
        raise InvalidParameterError("vector entries must be finite")
    return x


@dataclass(frozen=True)
class RngStream:
    """A named, replayable random stream.

    The stream is keyed by (seed, *ids); the same key always yields the same
    draw sequence, on any platform, because Philox is counter-based and
    numpy's SeedSequence hashing is platform-stable. Conventionally the ids
    are (worker, purpose); the PURPOSE_* constants below keep the engine's
    streams from colliding.

    Each `generator()` call returns a fresh generator positioned at the start
    of the stream. A generator is owned by exactly one logical consumer;
    never share one across threads.
    """

    seed: int
    ids: tuple[int, ...] = ()

    def __init__(self, seed: int, *ids: int):
        object.__setattr__(self, "seed", int(seed))
        object.__setattr__(self, "ids", tuple(int(i) for i in ids))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.ids)
        return np.random.Generator(np.random.Philox(ss))

    def child(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, *self.ids, *ids)


# purpose ids used by the engine; any fixed distinct ints work
PURPOSE_NOISE = 0
PURPOSE_COMPRESSOR = 1
PURPOSE_DELAY = 2


@dataclass
class RunningStats:
    """Streaming mean/variance (Welford). Matches two-pass formulas to 1e-10 relative."""

    count: int = 0
    _mean: float = 0.0
    _m2: float = 0.0

    def push(self, value: float) -> None:
        value = float(value)
        if not math.isfinite(value):
            raise InvalidParameterError("RunningStats only accepts finite values")
        self.count += 1
        delta = value - self._mean
        self._mean += delta / self.count
        self._m2 += delta * (value - self._mean)

    def push_many(self, values) -> None:
        for v in np.asarray(values, dtype=np.float64).ravel():
            self.push(float(v))

    @property
    def mean(self) -> float:
        if self.count == 0:
            raise InvalidParameterError("no values pushed")
        return self._mean

    @property
    def variance(self) -> float:
        """Unbiased sample variance; 0.0 for a single value."""
        if self.count == 0:
            raise InvalidParameterError("no values pushed")
        if self.count == 1:
            return 0.0
        return self._m2 / (self.count - 1)

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    @property
    def std_error(self) -> float:
        """Standard error of the mean."""
        return self.std / math.sqrt(self.count)


def gaussian_vector(rng: np.random.Generator, d: int, sigma: float) -> np.ndarray:
    """Isotropic Gaussian noise with E||xi||^2 = sigma^2.

    Each coordinate is N(0, sigma^2/d), so the total second moment is
    dimension-free. sigma = 0 returns exact zeros.
    """
    if d < 1 or int(d) != d:
        raise InvalidParameterError(f"dimension must be a positive integer, got {d}")
    if sigma < 0:
        raise InvalidParameterError(f"sigma must be nonnegative, got {sigma}")
    if sigma == 0:
        return np.zeros(int(d))
    return rng.normal(0.0, sigma / math.sqrt(d), size=int(d))
