"""Render a finished experiment directory into flat tables and figures.

`write_report` consumes the manifest and per-point summaries that the
harness wrote, and produces report.csv (one row per config point),
report.json (the same rows plus the cross-point verdicts), and a figures/
directory with convergence curves and, when the grid calls for them, the
delay-robustness and variance-reduction plots. The trajectory CSVs stay the
machine contract; everything here is derived and re-renderable.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import ConfigurationError

__all__ = ["load_experiment", "write_report", "REPORT_COLUMNS"]

REPORT_COLUMNS = (
    "point",
    "algorithm",
    "tau",
    "workers",
    "tau_eff",
    "kappa",
    "gamma0",
    "n_seeds",
    "final_avg_subopt_mean",
    "final_avg_subopt_sem",
    "slope_last_decade",
    "max_consistency_residual",
    "max_worker_dispersion",
)


def load_experiment(outdir: str) -> tuple:
    """Read manifest.json and every point's summary.json."""
    manifest_path = os.path.join(outdir, "manifest.json")
    if not os.path.isfile(manifest_path):
        raise ConfigurationError(f"{outdir!r} has no manifest.json; not an experiment directory")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    summaries = {}
    for entry in manifest["points"]:
        path = os.path.join(outdir, entry["name"], "summary.json")
        if not os.path.isfile(path):
            raise ConfigurationError(f"missing summary for point {entry['name']!r} in {outdir!r}")
        with open(path) as fh:
            summaries[entry["name"]] = json.load(fh)
    return manifest, summaries


def _num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    return format(float(v), ".10g")


def _report_rows(manifest: dict, summaries: dict) -> list:
    rows = []
    for entry in manifest["points"]:
        name = entry["name"]
        summary = summaries[name]
        algo = entry["algorithm"]
        rows.append(
            {
                "point": name,
                "algorithm": algo.get("kind"),
                "tau": algo.get("tau"),
                "workers": algo.get("workers"),
                "tau_eff": entry.get("tau_eff"),
                "kappa": entry.get("kappa"),
                "gamma0": entry.get("gamma0"),
                "n_seeds": len(summary["seeds"]),
                "final_avg_subopt_mean": summary["final_avg_subopt_mean"],
                "final_avg_subopt_sem": summary["final_avg_subopt_sem"],
                "slope_last_decade": summary.get("slope_last_decade"),
                "max_consistency_residual": summary["max_consistency_residual"],
                "max_worker_dispersion": summary["max_worker_dispersion"],
            }
        )
    return rows


def _positive_mask(steps, values):
    steps = np.asarray(steps, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    mask = (steps > 0) & (values > 0)
    return steps[mask], values[mask], np.asarray(mask)


def _render_figures(outdir: str, manifest: dict, summaries: dict) -> list:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    figdir = os.path.join(outdir, "figures")
    os.makedirs(figdir, exist_ok=True)
    written = []

    fig, ax = plt.subplots(figsize=(7.0, 4.6))
    plotted = False
    for name in sorted(summaries):
        summary = summaries[name]
        t, y, mask = _positive_mask(summary["steps"], summary["mean_subopt"])
        if t.size < 2:
            continue
        sem = np.asarray(summary["sem_subopt"], dtype=np.float64)[mask]
        ax.loglog(t, y, label=name, linewidth=1.4)
        lo = np.maximum(y - sem, np.finfo(np.float64).tiny)
        ax.fill_between(t, lo, y + sem, alpha=0.2, linewidth=0)
        plotted = True
    if plotted:
        cfg = manifest.get("config", {})
        ax.set_xlabel("iteration t")
        ax.set_ylabel("mean f(x_t) - f*")
        ax.set_title(
            f"{cfg.get('algorithm', {}).get('kind', '?')} on {cfg.get('objective', {}).get('kind', '?')}, "
            f"{len(manifest.get('seeds', []))} seeds"
        )
        ax.legend(fontsize=8)
        ax.grid(True, which="both", alpha=0.3)
        path = os.path.join(figdir, "convergence.png")
        fig.savefig(path, dpi=130, bbox_inches="tight")
        written.append(path)
    plt.close(fig)

    robustness = manifest.get("reports", {}).get("delay_robustness")
    if robustness and robustness["rows"]:
        fig, ax = plt.subplots(figsize=(5.4, 4.0))
        taus = [r["tau"] for r in robustness["rows"]]
        means = [r["final_mean_subopt"] for r in robustness["rows"]]
        sems = [r["final_sem_subopt"] for r in robustness["rows"]]
        ax.errorbar(taus, means, yerr=sems, marker="o", capsize=3)
        ax.set_xscale("log", base=2)
        ax.set_xlabel("delay tau")
        ax.set_ylabel("final mean f - f*")
        verdict = "within" if robustness["within_threshold"] else "EXCEEDS"
        ax.set_title(
            f"max ratio {robustness['max_ratio']:.3g} {verdict} threshold {robustness['threshold']:.3g}"
        )
        ax.grid(True, alpha=0.3)
        path = os.path.join(figdir, "delay_robustness.png")
        fig.savefig(path, dpi=130, bbox_inches="tight")
        written.append(path)
        plt.close(fig)

    variance = manifest.get("reports", {}).get("variance_reduction")
    if variance and variance["rows"]:
        fig, ax = plt.subplots(figsize=(5.4, 4.0))
        ks = np.array([r["workers"] for r in variance["rows"]], dtype=np.float64)
        means = np.array([r["final_mean_subopt"] for r in variance["rows"]])
        sems = np.array([r["final_sem_subopt"] for r in variance["rows"]])
        ax.errorbar(ks, means, yerr=sems, marker="o", capsize=3, label="measured")
        if variance.get("applicable") and variance.get("exponent") is not None and np.all(means > 0):
            expo = variance["exponent"]
            ref = means[0] * (ks / ks[0]) ** expo
            ax.plot(ks, ref, "--", label=f"K^{expo:.2f} fit")
        ax.set_xscale("log", base=2)
        ax.set_yscale("log")
        ax.set_xlabel("workers K")
        ax.set_ylabel("final mean f - f*")
        title = "1/K variance reduction" if variance.get("applicable") else variance.get("reason", "")
        ax.set_title(title, fontsize=9)
        ax.legend(fontsize=8)
        ax.grid(True, which="both", alpha=0.3)
        path = os.path.join(figdir, "variance_reduction.png")
        fig.savefig(path, dpi=130, bbox_inches="tight")
        written.append(path)
        plt.close(fig)

    return written


def write_report(outdir: str) -> dict:
    """Build report.csv, report.json, and figures for a run directory."""
    manifest, summaries = load_experiment(outdir)
    rows = _report_rows(manifest, summaries)

    csv_path = os.path.join(outdir, "report.csv")
    with open(csv_path, "w", newline="\n") as fh:
        fh.write(",".join(REPORT_COLUMNS) + "\n")
        for row in rows:
            cells = [v if isinstance(v, str) else _num(v) for v in (row[c] for c in REPORT_COLUMNS)]
            fh.write(",".join(cells) + "\n")

    report = {
        "tool": manifest["tool"],
        "version": manifest["version"],
        "fingerprint": manifest["fingerprint"],
        "points": rows,
        "reports": manifest.get("reports", {}),
    }
    json_path = os.path.join(outdir, "report.json")
    with open(json_path, "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")

    figures = _render_figures(outdir, manifest, summaries)
    report["files"] = [csv_path, json_path, *figures]
    return report
