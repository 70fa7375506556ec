"""Trajectory records, ensemble summaries, rate fits, and comparison reports.

A Trajectory is one seeded run; an EnsembleSummary is the per-iteration mean
and standard error across seeds of trajectories that share a configuration.
The reports compare ensembles that differ in exactly one knob (delay tau, or
worker count K) and refuse comparisons whose configurations differ anywhere
else.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidComparisonError, InvalidParameterError, RateFitError

__all__ = [
    "Trajectory",
    "EnsembleSummary",
    "summarize",
    "fit_loglog_slope",
    "fit_rate_slope",
    "DelayRobustnessReport",
    "delay_robustness_report",
    "VarianceReductionReport",
    "variance_reduction_report",
]


@dataclass(eq=False)
class Trajectory:
    """Recorded metrics of a single run, all referring to pre-step states x_t.

    `avg_point` is the weighted-average output over t = 0..T and
    `avg_subopt` its suboptimality; `mean_grad_sq` is the uniform average of
    ||grad f(x_t)||^2 over every iteration when the run tracked it.
    """

    seed: int
    algorithm: str
    T: int
    steps: np.ndarray
    subopt: np.ndarray
    grad_norm_sq: np.ndarray
    err_norm_sq: np.ndarray
    consistency_residual: np.ndarray
    worker_dispersion: np.ndarray
    avg_point: np.ndarray
    avg_subopt: float
    mean_grad_sq: float | None = None
    config: dict | None = None

    def __post_init__(self):
        if np.any(np.diff(self.steps) <= 0):
            raise InvalidParameterError("trajectory steps must be strictly increasing")
        for name in ("subopt", "grad_norm_sq", "err_norm_sq", "consistency_residual", "worker_dispersion"):
            a = getattr(self, name)
            if a.shape != self.steps.shape:
                raise InvalidParameterError(f"{name} length does not match steps")
            if not np.all(np.isfinite(a)):
                raise InvalidParameterError(f"{name} contains non-finite entries")


@dataclass(eq=False)
class EnsembleSummary:
    """Across-seed statistics of trajectories sharing one configuration."""

    algorithm: str
    T: int
    seeds: tuple
    steps: np.ndarray
    mean_subopt: np.ndarray
    sem_subopt: np.ndarray
    mean_grad_norm_sq: np.ndarray
    sem_grad_norm_sq: np.ndarray
    mean_err_norm_sq: np.ndarray
    sem_err_norm_sq: np.ndarray
    max_consistency_residual: float
    max_worker_dispersion: float
    final_avg_subopt_mean: float
    final_avg_subopt_sem: float
    mean_grad_sq_mean: float | None = None
    config: dict | None = None

    @property
    def n_seeds(self) -> int:
        return len(self.seeds)

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "T": self.T,
            "seeds": list(self.seeds),
            "steps": self.steps.tolist(),
            "mean_subopt": self.mean_subopt.tolist(),
            "sem_subopt": self.sem_subopt.tolist(),
            "mean_grad_norm_sq": self.mean_grad_norm_sq.tolist(),
            "sem_grad_norm_sq": self.sem_grad_norm_sq.tolist(),
            "mean_err_norm_sq": self.mean_err_norm_sq.tolist(),
            "sem_err_norm_sq": self.sem_err_norm_sq.tolist(),
            "max_consistency_residual": self.max_consistency_residual,
            "max_worker_dispersion": self.max_worker_dispersion,
            "final_avg_subopt_mean": self.final_avg_subopt_mean,
            "final_avg_subopt_sem": self.final_avg_subopt_sem,
            "mean_grad_sq_mean": self.mean_grad_sq_mean,
            "config": self.config,
        }


def _mean_sem(block: np.ndarray) -> tuple:
    mean = block.mean(axis=0)
    if block.shape[0] < 2:
        return mean, np.zeros_like(mean)
    return mean, block.std(axis=0, ddof=1) / np.sqrt(block.shape[0])


def summarize(trajectories, config: dict | None = None) -> EnsembleSummary:
    """Aggregate same-config trajectories into per-iteration statistics."""
    trajs = list(trajectories)
    if not trajs:
        raise InvalidParameterError("no trajectories to summarize")
    first = trajs[0]
    seeds = tuple(t.seed for t in trajs)
    if len(set(seeds)) != len(seeds):
        raise InvalidParameterError("duplicate seeds in ensemble")
    for t in trajs[1:]:
        if t.algorithm != first.algorithm or t.T != first.T or not np.array_equal(t.steps, first.steps):
            raise InvalidComparisonError("trajectories disagree on algorithm, horizon, or grid")

    sub = np.stack([t.subopt for t in trajs])
    grad = np.stack([t.grad_norm_sq for t in trajs])
    err = np.stack([t.err_norm_sq for t in trajs])
    finals = np.array([t.avg_subopt for t in trajs])
    mean_sub, sem_sub = _mean_sem(sub)
    mean_grad, sem_grad = _mean_sem(grad)
    mean_err, sem_err = _mean_sem(err)
    fin_mean, fin_sem = _mean_sem(finals[:, None])
    tracked = [t.mean_grad_sq for t in trajs if t.mean_grad_sq is not None]
    return EnsembleSummary(
        algorithm=first.algorithm,
        T=first.T,
        seeds=seeds,
        steps=first.steps.copy(),
        mean_subopt=mean_sub,
        sem_subopt=sem_sub,
        mean_grad_norm_sq=mean_grad,
        sem_grad_norm_sq=sem_grad,
        mean_err_norm_sq=mean_err,
        sem_err_norm_sq=sem_err,
        max_consistency_residual=float(max(t.consistency_residual.max() for t in trajs)),
        max_worker_dispersion=float(max(t.worker_dispersion.max() for t in trajs)),
        final_avg_subopt_mean=float(fin_mean[0]),
        final_avg_subopt_sem=float(fin_sem[0]),
        mean_grad_sq_mean=float(np.mean(tracked)) if len(tracked) == len(trajs) else None,
        config=config,
    )


def fit_loglog_slope(t_values, y_values) -> float:
    """Least-squares slope of log y against log t. Needs positive data."""
    t = np.asarray(t_values, dtype=np.float64)
    y = np.asarray(y_values, dtype=np.float64)
    if t.size != y.size or t.size < 2:
        raise InvalidParameterError("need at least two matching points")
    if np.any(t <= 0):
        raise InvalidParameterError("iteration values must be positive for a log fit")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise RateFitError("cannot fit a rate through non-positive means")
    slope, _ = np.polyfit(np.log(t), np.log(y), 1)
    return float(slope)


def fit_rate_slope(summary: EnsembleSummary, window: tuple, metric: str = "subopt") -> float:
    """Slope of log(mean metric) vs log t over iterations in [window[0], window[1]].

    Requires at least 10 recorded points inside the window, which keeps
    accidental two-point "fits" from being mistaken for rates.
    """
    lo, hi = window
    if lo <= 0 or hi <= lo:
        raise InvalidParameterError(f"window must satisfy 0 < lo < hi, got ({lo}, {hi})")
    means = {"subopt": summary.mean_subopt, "grad_norm_sq": summary.mean_grad_norm_sq}.get(metric)
    if means is None:
        raise InvalidParameterError(f"unknown metric {metric!r}")
    mask = (summary.steps >= lo) & (summary.steps <= hi)
    if int(mask.sum()) < 10:
        raise InvalidParameterError(
            f"window [{lo}, {hi}] covers {int(mask.sum())} recorded points; need at least 10"
        )
    return fit_loglog_slope(summary.steps[mask], means[mask])


def _require_matching(configs: dict, varied: tuple) -> None:
    """All configs must agree outside the varied keys. Skipped when any is None."""
    items = list(configs.items())
    if any(cfg is None for _, cfg in items):
        return
    base_key, base = items[0]
    for key, cfg in items[1:]:
        if set(cfg) != set(base):
            raise InvalidComparisonError(f"config fields differ between {base_key} and {key}")
        for name in base:
            if name in varied:
                continue
            if cfg[name] != base[name]:
                raise InvalidComparisonError(
                    f"configs differ on {name!r} ({base[name]!r} vs {cfg[name]!r}); "
                    f"only {varied} may vary"
                )


@dataclass
class DelayRobustnessReport:
    """Final suboptimality as a function of the delay tau, with the worst
    pairwise ratio against the declared robustness threshold."""

    rows: list
    threshold: float
    max_ratio: float
    within_threshold: bool

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "threshold": self.threshold,
            "max_ratio": self.max_ratio,
            "within_threshold": self.within_threshold,
        }


def delay_robustness_report(summaries: dict, threshold: float = 2.0) -> DelayRobustnessReport:
    """Compare ensembles keyed by tau; configs must match everywhere else."""
    if len(summaries) < 1:
        raise InvalidParameterError("no summaries given")
    _require_matching(
        {tau: s.config for tau, s in summaries.items()},
        varied=("algorithm.tau", "run.output"),
    )
    rows = []
    for tau in sorted(summaries):
        s = summaries[tau]
        rows.append(
            {
                "tau": tau,
                "final_mean_subopt": s.final_avg_subopt_mean,
                "final_sem_subopt": s.final_avg_subopt_sem,
                "n_seeds": s.n_seeds,
            }
        )
    finals = [r["final_mean_subopt"] for r in rows]
    if any(f <= 0 for f in finals):
        max_ratio = float("inf") if len(finals) > 1 and max(finals) > 0 else 1.0
    else:
        max_ratio = max(finals) / min(finals) if len(finals) > 1 else 1.0
    return DelayRobustnessReport(
        rows=rows,
        threshold=threshold,
        max_ratio=float(max_ratio),
        within_threshold=bool(max_ratio <= threshold),
    )


@dataclass
class VarianceReductionReport:
    """Final suboptimality as a function of the worker count K, with the
    fitted log-log exponent. Meaningless without gradient noise, in which
    case `applicable` is False and the exponent is omitted."""

    rows: list
    exponent: float | None
    applicable: bool
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "exponent": self.exponent,
            "applicable": self.applicable,
            "reason": self.reason,
        }


def variance_reduction_report(summaries: dict) -> VarianceReductionReport:
    """Compare local-sgd ensembles keyed by K; fit final subopt ~ K^exponent."""
    if len(summaries) < 1:
        raise InvalidParameterError("no summaries given")
    configs = {k: s.config for k, s in summaries.items()}
    _require_matching(configs, varied=("algorithm.workers", "run.output"))
    rows = []
    for k in sorted(summaries):
        s = summaries[k]
        rows.append(
            {
                "workers": k,
                "final_mean_subopt": s.final_avg_subopt_mean,
                "final_sem_subopt": s.final_avg_subopt_sem,
                "n_seeds": s.n_seeds,
            }
        )
    noiseless = any(
        cfg is not None and float(cfg.get("oracle.sigma2", 0.0)) == 0.0 for cfg in configs.values()
    )
    if noiseless:
        return VarianceReductionReport(
            rows=rows,
            exponent=None,
            applicable=False,
            reason="optimization-dominated (sigma2 = 0); 1/K check not applicable",
        )
    if len(rows) < 2:
        return VarianceReductionReport(
            rows=rows, exponent=None, applicable=False, reason="need at least two K values"
        )
    ks = np.array([r["workers"] for r in rows], dtype=np.float64)
    finals = np.array([r["final_mean_subopt"] for r in rows])
    if np.any(finals <= 0):
        raise RateFitError("cannot fit an exponent through non-positive means")
    exponent = float(np.polyfit(np.log(ks), np.log(finals), 1)[0])
    return VarianceReductionReport(rows=rows, exponent=exponent, applicable=True)
