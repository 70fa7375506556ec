"""The unified error-feedback state machine behind every SGD variant here.

All variants advance three coupled sequences:

    x_{t+1}      = x_t - v_t                      (what the algorithm applies)
    e_{t+1}      = e_t + gamma_t g_t - v_t        (what it still owes)
    xtilde_{t+1} = xtilde_t - gamma_t g_t         (the virtual iterate)

so xtilde_t = x_t - e_t always, and the variants differ only in how v_t is
formed from sampled gradients:

    plain-sgd   v_t = gamma_t g_t
    d-sgd       v_t = sum of delayed increments due at t (fixed delay tau, or
                i.i.d. uniform delays on {0..tau})
    ec-sgd      v_t = C(e_t + gamma_t g_t) for a contractive compressor C
    minibatch   v_t = e_t + gamma_t g_t flushed when tau divides t+1, else 0,
                which zeroes e exactly at every sync index
    local-sgd   K workers step independently and average every tau steps; the
                tracked x_t is the worker mean, e_t stays 0, and xtilde_t
                follows the mean gradient, so the consistency residual
                measures pure floating-point drift

The virtual iterate is maintained independently, never recomputed as x - e;
`consistency_residual` is therefore a genuine numerical check, not a
tautology. A run is strictly sequential; parallelism belongs one level up,
across seeds, which is safe because every stream is derived from
(seed, worker, purpose).
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ConfigurationError, DivergenceError, InvalidParameterError
from .numerics import PURPOSE_COMPRESSOR, PURPOSE_DELAY, PURPOSE_NOISE, RngStream
from .oracles import GradientOracle
from .schedules import StepsizeSchedule, WeightSchedule, WeightedAverage, uniform_weights
from .analysis import Trajectory

__all__ = [
    "ALGORITHM_KINDS",
    "DIVERGENCE_THRESHOLD",
    "AlgorithmSpec",
    "RunState",
    "RunRngs",
    "make_run_rngs",
    "initial_state",
    "step",
    "step_local",
    "run",
    "direct_minibatch_reference",
]

ALGORITHM_KINDS = ("plain-sgd", "d-sgd", "ec-sgd", "minibatch", "local-sgd")
DELAY_MODELS = ("fixed", "iid-bounded")
DIVERGENCE_THRESHOLD = 1e12
RECORD_METRICS = (
    "subopt",
    "grad_norm_sq",
    "err_norm_sq",
    "consistency_residual",
    "worker_dispersion",
)


@dataclass(frozen=True, eq=False)
class AlgorithmSpec:
    """One algorithm configuration: the update rule plus its schedules and oracle."""

    kind: str
    oracle: GradientOracle
    stepsize: StepsizeSchedule
    weights: WeightSchedule = field(default_factory=uniform_weights)
    tau: int = 1
    workers: int = 1
    delay_model: str = "fixed"
    compressor: object = None

    def __post_init__(self):
        if self.kind not in ALGORITHM_KINDS:
            raise ConfigurationError(f"unknown algorithm kind {self.kind!r}")
        if self.tau < 1 or int(self.tau) != self.tau:
            raise ConfigurationError(f"tau must be a positive integer, got {self.tau}")
        if self.workers < 1 or int(self.workers) != self.workers:
            raise ConfigurationError(f"workers must be a positive integer, got {self.workers}")
        if self.workers > 1 and self.kind != "local-sgd":
            raise ConfigurationError(f"{self.kind} runs a single worker")
        if self.kind == "d-sgd" and self.delay_model not in DELAY_MODELS:
            raise ConfigurationError(f"unknown delay model {self.delay_model!r}")
        if self.kind == "ec-sgd" and self.compressor is None:
            raise ConfigurationError("ec-sgd needs a compressor")
        if self.kind != "ec-sgd" and self.compressor is not None:
            raise ConfigurationError(f"{self.kind} does not take a compressor")

    def tau_eff(self, d: int) -> float:
        """The effective delay the theorems charge this algorithm with."""
        if self.kind == "plain-sgd":
            return 1.0
        if self.kind in ("d-sgd", "minibatch"):
            return float(self.tau)
        if self.kind == "ec-sgd":
            from .compressors import declared_delta

            return 2.0 / declared_delta(self.compressor, d)
        return float(self.tau * self.workers)


@dataclass
class RunState:
    """Engine state after t steps. `pending` holds in-flight delayed increments
    as a dict {due step -> list of gamma_i g_i}; `workers` is the (K, d) block
    of local-sgd iterates (None otherwise)."""

    t: int
    x: np.ndarray
    err: np.ndarray
    virtual: np.ndarray
    pending: dict | None = None
    workers: np.ndarray | None = None

    def consistency_residual(self) -> float:
        """||xtilde - (x - e)|| / (1 + ||x||); should sit at rounding level."""
        gap = self.virtual - (self.x - self.err)
        return float(np.linalg.norm(gap)) / (1.0 + float(np.linalg.norm(self.x)))


@dataclass
class RunRngs:
    """The independent streams one run owns: per-worker gradient noise, plus
    dedicated streams for compressor coins and delay draws."""

    noise: list
    compressor: np.random.Generator
    delay: np.random.Generator


def make_run_rngs(seed: int, workers: int = 1) -> RunRngs:
    return RunRngs(
        noise=[RngStream(seed, k, PURPOSE_NOISE).generator() for k in range(workers)],
        compressor=RngStream(seed, 0, PURPOSE_COMPRESSOR).generator(),
        delay=RngStream(seed, 0, PURPOSE_DELAY).generator(),
    )


def initial_state(spec: AlgorithmSpec, objective, x0=None) -> RunState:
    if x0 is None:
        x0 = np.ones(objective.d)
    x0 = np.array(x0, dtype=np.float64)
    if x0.shape != (objective.d,):
        raise ConfigurationError(f"x0 must have shape ({objective.d},), got {x0.shape}")
    if not np.all(np.isfinite(x0)):
        raise ConfigurationError("x0 must be finite")
    state = RunState(
        t=0,
        x=x0.copy(),
        err=np.zeros(objective.d),
        virtual=x0.copy(),
        pending={} if spec.kind == "d-sgd" else None,
        workers=np.tile(x0, (spec.workers, 1)) if spec.kind == "local-sgd" else None,
    )
    return state


def step(state: RunState, spec: AlgorithmSpec, rngs: RunRngs) -> RunState:
    """Advance one framework step in place and return the state."""
    if spec.kind == "local-sgd":
        return step_local(state, spec, rngs)

    t = state.t
    gamma = spec.stepsize.value(t)
    g = spec.oracle.sample(state.x, rngs.noise[0])
    inc = gamma * g
    state.virtual -= inc

    if spec.kind == "plain-sgd":
        state.x = state.x - inc
        # err stays exactly 0: e + inc - inc
    elif spec.kind == "d-sgd":
        if spec.delay_model == "fixed":
            due = t + spec.tau
        else:
            due = t + int(rngs.delay.integers(spec.tau + 1))
        state.pending.setdefault(due, []).append(inc)
        state.err = state.err + inc
        ready = state.pending.pop(t, None)
        if ready is not None:
            v = ready[0]
            for item in ready[1:]:
                v = v + item
            state.x = state.x - v
            state.err = state.err - v
    elif spec.kind == "ec-sgd":
        u = state.err + inc
        v = spec.compressor.compress(u, rngs.compressor)
        state.x = state.x - v
        state.err = u - v
    elif spec.kind == "minibatch":
        u = state.err + inc
        if (t + 1) % spec.tau == 0:
            state.x = state.x - u
            state.err = np.zeros_like(u)  # flushed exactly
        else:
            state.err = u
    else:
        raise ConfigurationError(f"unknown algorithm kind {spec.kind!r}")

    state.t = t + 1
    return state


def step_local(state: RunState, spec: AlgorithmSpec, rngs: RunRngs) -> RunState:
    """One local-sgd step: independent worker updates, averaging at sync indices."""
    t = state.t
    gamma = spec.stepsize.value(t)
    W = state.workers
    K = W.shape[0]
    G = np.empty_like(W)
    for k in range(K):
        G[k] = spec.oracle.sample(W[k], rngs.noise[k])
    state.virtual -= gamma * G.mean(axis=0)
    W -= gamma * G
    if (t + 1) % spec.tau == 0:
        W[:] = W.mean(axis=0)
    state.x = W.mean(axis=0)
    state.t = t + 1
    return state


def _metrics(state: RunState, objective) -> tuple:
    subopt = float(objective.value(state.x)) - objective.f_star
    if state.workers is not None:
        G = objective.grad(state.workers)
        grad_sq = float(np.mean(np.sum(G * G, axis=1)))
        disp = float(np.max(np.linalg.norm(state.workers - state.virtual, axis=1)))
    else:
        g = objective.grad(state.x)
        grad_sq = float(g @ g)
        disp = 0.0
    err_sq = float(state.err @ state.err)
    return subopt, grad_sq, err_sq, state.consistency_residual(), disp


def run(
    spec: AlgorithmSpec,
    objective,
    T: int,
    seed: int,
    record=RECORD_METRICS,
    x0=None,
    record_stride: int = 1,
    track_mean_grad_sq: bool = False,
    run_id: str | None = None,
) -> Trajectory:
    """Execute T steps and return the recorded trajectory.

    Metrics are recorded at every `record_stride`-th iteration plus the
    final one, all referring to the pre-step state x_t. The weighted-average
    output over t = 0..T under `spec.weights` is always accumulated (for
    local-sgd it averages over workers too). `track_mean_grad_sq` adds the
    running mean of ||grad f(x_t)||^2 over every iteration, which costs one
    extra gradient per step.

    Raises DivergenceError as soon as the suboptimality passes
    DIVERGENCE_THRESHOLD or stops being finite.
    """
    if T < 1 or int(T) != T:
        raise ConfigurationError(f"T must be a positive integer, got {T}")
    if record_stride < 1:
        raise ConfigurationError(f"record_stride must be >= 1, got {record_stride}")
    unknown = set(record) - set(RECORD_METRICS)
    if unknown:
        raise ConfigurationError(f"unknown record metrics: {sorted(unknown)}")
    if spec.oracle.objective is not objective:
        raise ConfigurationError("spec.oracle must wrap the objective being run")

    state = initial_state(spec, objective, x0)
    rngs = make_run_rngs(seed, spec.workers)
    averager = WeightedAverage(spec.weights)

    n_rec = len(range(0, T, record_stride)) + 1
    steps_out = np.empty(n_rec, dtype=np.int64)
    metrics_out = np.empty((5, n_rec))
    grad_sq_sum = 0.0
    f_star = objective.f_star
    idx = 0

    for t in range(T + 1):
        recording = (t % record_stride == 0) or t == T
        if recording:
            m = _metrics(state, objective)
            steps_out[idx] = t
            metrics_out[:, idx] = m
            idx += 1
            subopt = m[0]
        elif t % 64 == 0:
            subopt = float(objective.value(state.x)) - f_star
        else:
            subopt = None
        if subopt is not None and not (subopt < DIVERGENCE_THRESHOLD):
            raise DivergenceError(
                f"divergence at iteration {t}: f - f* = {subopt!r}", iteration=t, run_id=run_id
            )
        if track_mean_grad_sq:
            if state.workers is not None:
                G = objective.grad(state.workers)
                grad_sq_sum += float(np.mean(np.sum(G * G, axis=1)))
            else:
                g = objective.grad(state.x)
                grad_sq_sum += float(g @ g)
        averager.push(state.x)
        if t < T:
            step(state, spec, rngs)

    avg_point = averager.mean
    return Trajectory(
        seed=seed,
        algorithm=spec.kind,
        T=T,
        steps=steps_out,
        subopt=metrics_out[0],
        grad_norm_sq=metrics_out[1],
        err_norm_sq=metrics_out[2],
        consistency_residual=metrics_out[3],
        worker_dispersion=metrics_out[4],
        avg_point=avg_point,
        avg_subopt=float(objective.value(avg_point)) - f_star,
        mean_grad_sq=grad_sq_sum / (T + 1) if track_mean_grad_sq else None,
    )


def direct_minibatch_reference(
    objective, oracle: GradientOracle, stepsize: StepsizeSchedule, tau: int, T: int, seed: int, x0=None
) -> list:
    """Textbook mini-batch SGD: hold x fixed, accumulate tau scaled gradients,
    apply their sum every tau-th step. Returns [x_0, x_1, ..., x_T].

    Draws noise from the same (seed, worker 0) stream in the same order as
    the engine, so trajectories must match the engine's minibatch kind
    bit for bit.
    """
    if x0 is None:
        x0 = np.ones(objective.d)
    x = np.array(x0, dtype=np.float64)
    rng = RngStream(seed, 0, PURPOSE_NOISE).generator()
    batch = np.zeros_like(x)
    out = [x.copy()]
    for t in range(T):
        batch = batch + stepsize.value(t) * oracle.sample(x, rng)
        if (t + 1) % tau == 0:
            x = x - batch
            batch = np.zeros_like(x)
        out.append(x.copy())
    return out
