"""Deterministic CSV/JSON emission and figure rendering for experiment results.

File contents are a pure function of the result: floats are written with
shortest round-trip formatting, JSON keys are sorted, rows are ordered by
(replicate, t), and nothing volatile (timestamps, hostnames) is embedded, so
reruns with the same seed produce byte-identical outputs regardless of the
worker count.  Wall-clock time is reported on the console only.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import List

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .runner import ExperimentResult

_PNG_METADATA = {"Software": "cbolab"}


def _fmt(x) -> str:
    return repr(float(x))


def write_series_csv(path: Path, series_list) -> None:
    with path.open("w", newline="\n") as fh:
        fh.write("replicate,t,value\n")
        for series in sorted(series_list, key=lambda s: s.replicate):
            for t, v in zip(series.times, series.values):
                fh.write(f"{series.replicate},{_fmt(t)},{_fmt(v)}\n")


def write_aggregate_csv(path: Path, agg) -> None:
    with path.open("w", newline="\n") as fh:
        fh.write("t,mean,stderr,n\n")
        for t, m, s in zip(agg.times, agg.mean, agg.stderr):
            fh.write(f"{_fmt(t)},{_fmt(m)},{_fmt(s)},{agg.n}\n")


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


def write_result(result: ExperimentResult, out_dir) -> List[Path]:
    """Write every output file for a result; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []

    for label in sorted(result.series):
        path = out / f"{label}.csv"
        write_series_csv(path, result.series[label])
        written.append(path)
    for label in sorted(result.aggregates):
        path = out / f"{label}_aggregate.csv"
        write_aggregate_csv(path, result.aggregates[label])
        written.append(path)

    summary = {
        "kind": result.kind,
        "version": result.version,
        "seed": result.seed,
        "config": _jsonable(result.config_echo),
        "fits": _jsonable(result.fits),
        "checks": _jsonable(result.checks),
        "notes": list(result.notes),
        "constants": result.constants.to_dict() if result.constants else None,
    }
    path = out / "summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    written.append(path)

    if result.constants is not None:
        path = out / "constants.json"
        path.write_text(result.constants.to_json() + "\n")
        written.append(path)

    written.extend(render_figures(result, out))
    return written


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=130, metadata=_PNG_METADATA)
    plt.close(fig)
    return path


def _ladder_labels(result: ExperimentResult, prefix: str) -> List[str]:
    return sorted(label for label in result.aggregates if label.startswith(prefix))


def _series_figure(result, prefix: str, path: Path, ylabel: str) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label in _ladder_labels(result, prefix):
        agg = result.aggregates[label]
        positive = agg.mean > 0
        short = label.replace(prefix, "").lstrip("_-") or label
        ax.semilogy(agg.times[positive], agg.mean[positive], label=short)
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    if len(result.aggregates) > 1:
        ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def _scaling_figure(sizes, values, fit, path: Path, ylabel: str, bound=None) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(sizes, values, "o-", label="measured")
    if fit is not None:
        grid = np.asarray(sizes, dtype=float)
        ax.loglog(
            grid,
            np.exp(fit["intercept"]) * grid ** fit["estimate"],
            "--",
            label=f"slope {fit['estimate']:.3f}",
        )
    if bound is not None:
        ax.loglog(sizes, bound, ":", label="theory ceiling")
    ax.set_xlabel("J")
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def render_figures(result: ExperimentResult, out: Path) -> List[Path]:
    written: List[Path] = []
    kind = result.kind
    if kind in ("moments", "simulate"):
        written.append(
            _series_figure(result, "centered", out / f"{kind}.png", "centered moment")
        )
    elif kind == "mfl":
        written.append(
            _series_figure(result, "mfl-error", out / "mfl-error_series.png", "mean E_t")
        )
        sups = result.checks.get("sup_mean_error", {})
        if sups:
            sizes = sorted(int(j) for j in sups)
            values = [sups[str(j)] for j in sizes]
            written.append(
                _scaling_figure(
                    sizes,
                    values,
                    result.fits.get("mfl-scaling"),
                    out / "mfl-error_scaling.png",
                    "sup_t mean E_t",
                )
            )
    elif kind == "stability":
        written.append(
            _series_figure(
                result, "stability-gap", out / "stability-gap_series.png", "mean G_t"
            )
        )
    elif kind == "concentration":
        probs = result.checks.get("probabilities", {})
        if probs:
            sizes = sorted(int(j) for j in probs)
            p = np.array([probs[str(j)] for j in sizes])
            lo = np.array([result.checks["wilson_low"][str(j)] for j in sizes])
            hi = np.array([result.checks["wilson_high"][str(j)] for j in sizes])
            fig, ax = plt.subplots(figsize=(6, 4.5))
            ax.errorbar(sizes, p, yerr=[p - lo, hi - p], fmt="o-", capsize=3)
            ax.set_xscale("log")
            ax.set_xlabel("J")
            ax.set_ylabel("excursion probability")
            ax.grid(True, which="both", alpha=0.3)
            fig.tight_layout()
            written.append(_save(fig, out / "concentration.png"))
    elif kind == "wm-mc":
        errors = result.checks.get("errors", {})
        if errors:
            sizes = sorted(int(j) for j in errors)
            values = [errors[str(j)] for j in sizes]
            bound = [
                result.checks["wm_constant"] * result.checks["m2_law"] / j for j in sizes
            ]
            written.append(
                _scaling_figure(
                    sizes,
                    values,
                    result.fits.get("wm-mc-scaling"),
                    out / "wm-mc_scaling.png",
                    "E |consensus error|^2",
                    bound=bound,
                )
            )
    elif kind == "optimize":
        fig, ax = plt.subplots(figsize=(7, 4.5))
        agg = result.aggregates["objective-at-consensus"]
        ax.plot(agg.times, agg.mean, label="cost at consensus")
        if "consensus-gap" in result.aggregates:
            gap = result.aggregates["consensus-gap"]
            ax.plot(gap.times, gap.mean, label="distance to minimizer")
        ax.set_xlabel("t")
        ax.set_yscale("log")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        written.append(_save(fig, out / "optimize.png"))
    return written
