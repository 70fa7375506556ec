"""Experiment harness: expand a config into a run matrix, execute it with
seed parallelism, and write the artifact tree.

Layout under the output directory:

    manifest.json                 seeds, fingerprint, tool version, points
    <point>/seed-<s>.csv          per-iteration metrics, one file per seed
    <point>/summary.json          across-seed statistics and slope fit
    delay_robustness.json         when the grid varies tau
    variance_reduction.json       when the grid varies workers

Determinism: every run is seeded independently of the execution order, all
results are gathered before anything is written, and files are emitted in
sorted key order with shortest-roundtrip float formatting. Rerunning the
same config yields byte-identical CSVs regardless of the parallelism degree.

On divergence nothing useful can be salvaged: the output directory is
removed and the error names the offending run.
"""

from __future__ import annotations

import json
import os
import shutil
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .analysis import (
    delay_robustness_report,
    fit_rate_slope,
    summarize,
    variance_reduction_report,
)
from .config import (
    ExperimentConfig,
    build_objective,
    build_oracle,
    expand_points,
    parse_config,
    resolve_point,
)
from .engine import run
from .errors import (
    ConfigurationError,
    DivergenceError,
    InvalidParameterError,
    RateFitError,
)

__all__ = ["run_experiment", "CSV_COLUMNS"]

CSV_COLUMNS = (
    "t",
    "seed",
    "subopt",
    "grad_norm_sq",
    "err_norm_sq",
    "consistency_residual",
    "worker_dispersion",
)


def _fmt(v: float) -> str:
    return repr(float(v))


def _write_trajectory_csv(path: str, traj) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for i, t in enumerate(traj.steps):
            fh.write(
                f"{int(t)},{traj.seed},{_fmt(traj.subopt[i])},{_fmt(traj.grad_norm_sq[i])},"
                f"{_fmt(traj.err_norm_sq[i])},{_fmt(traj.consistency_residual[i])},"
                f"{_fmt(traj.worker_dispersion[i])}\n"
            )


def _flat_config(config: ExperimentConfig, point_params: dict) -> dict:
    """Dotted-key view of the resolved config with this point's algorithm
    parameters substituted for the grid lists; feeds report comparators."""
    resolved = config.resolved()
    resolved["algorithm"] = {k: v for k, v in point_params.items() if v is not None}
    flat = {}
    for section, keys in resolved.items():
        for key, value in keys.items():
            flat[f"{section}.{key}"] = list(value) if isinstance(value, tuple) else value
    return flat


def _run_task(args):
    """One (point, seed) run; returns ('ok', key, traj) or ('diverged', ...).
    Top-level so process pools can pickle it."""
    point_name, seed, spec, objective, T, x0, stride, track_mean = args
    run_id = f"{point_name}/seed-{seed}"
    try:
        traj = run(
            spec,
            objective,
            T,
            seed,
            x0=x0,
            record_stride=stride,
            track_mean_grad_sq=track_mean,
            run_id=run_id,
        )
    except DivergenceError as exc:
        return ("diverged", run_id, exc.iteration, str(exc))
    return ("ok", (point_name, seed), traj)


def run_experiment(config, jobs: int | None = None) -> dict:
    """Run the full matrix described by a config (path or parsed object) and
    write the artifact tree. Returns the manifest dict."""
    if not isinstance(config, ExperimentConfig):
        config = parse_config(config)

    objective = build_objective(config)
    oracle = build_oracle(config, objective)
    point_list = expand_points(config)
    points = [resolve_point(config, objective, oracle, name, params) for name, params in point_list]

    outdir = config.output_dir()
    if os.path.exists(outdir):
        if os.listdir(outdir) and not os.path.exists(os.path.join(outdir, "manifest.json")):
            raise ConfigurationError(
                f"run.output: {outdir!r} exists and is not an experiment directory; refusing to overwrite"
            )
        shutil.rmtree(outdir)

    T = config.run["T"]
    seeds = config.run["seeds"]
    stride = config.run["record_stride"]
    x0 = np.full(objective.d, config.run["x0_scale"])
    track_mean = objective.convexity_class == "non-convex"

    tasks = [
        (p.name, seed, p.spec, objective, T, x0, stride, track_mean)
        for p in points
        for seed in seeds
    ]
    if jobs is None:
        jobs = min(len(tasks), os.cpu_count() or 1)
    jobs = max(1, jobs)

    results = {}
    if jobs == 1 or len(tasks) == 1:
        outcomes = map(_run_task, tasks)
    else:
        pool = ProcessPoolExecutor(max_workers=jobs)
        try:
            outcomes = list(pool.map(_run_task, tasks))
        finally:
            pool.shutdown()
    for outcome in outcomes:
        if outcome[0] == "diverged":
            _, run_id, iteration, message = outcome
            if os.path.exists(outdir):
                shutil.rmtree(outdir)
            raise DivergenceError(message, iteration=iteration, run_id=run_id)
        _, key, traj = outcome
        results[key] = traj

    os.makedirs(outdir, exist_ok=True)
    gridded = [
        k
        for k in sorted(config.algorithm)
        if isinstance(config.algorithm[k], tuple) and len(config.algorithm[k]) > 1
    ]

    summaries = {}
    for p in points:
        point_dir = os.path.join(outdir, p.name)
        os.makedirs(point_dir, exist_ok=True)
        trajs = [results[(p.name, seed)] for seed in sorted(seeds)]
        for traj in trajs:
            _write_trajectory_csv(os.path.join(point_dir, f"seed-{traj.seed:05d}.csv"), traj)
        summary = summarize(trajs, config=_flat_config(config, p.params))
        summaries[p.name] = summary
        payload = {"point": p.name, **summary.to_dict()}
        try:
            window = (max(1.0, T / 10.0), float(T))
            payload["slope_last_decade"] = fit_rate_slope(summary, window=window)
        except (RateFitError, InvalidParameterError) as exc:
            payload["slope_last_decade"] = None
            payload["slope_error"] = str(exc)
        with open(os.path.join(point_dir, "summary.json"), "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")

    reports = {}
    if gridded == ["tau"] and len(points) > 1:
        by_tau = {p.params["tau"]: summaries[p.name] for p in points}
        report = delay_robustness_report(by_tau)
        reports["delay_robustness"] = report.to_dict()
        with open(os.path.join(outdir, "delay_robustness.json"), "w") as fh:
            json.dump(report.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")
    if gridded == ["workers"] and len(points) > 1:
        by_k = {p.params["workers"]: summaries[p.name] for p in points}
        report = variance_reduction_report(by_k)
        reports["variance_reduction"] = report.to_dict()
        with open(os.path.join(outdir, "variance_reduction.json"), "w") as fh:
            json.dump(report.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    manifest = {
        "tool": "ecsgd",
        "version": __version__,
        "fingerprint": config.fingerprint(),
        "config": config.resolved(),
        "seeds": list(seeds),
        "T": T,
        "grid_keys": gridded,
        "points": [p.manifest_entry() for p in points],
        "reports": reports,
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return manifest
