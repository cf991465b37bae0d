"""Figure emission: aggregate metrics across seeds and render plots to files.

Each emitter writes a plot-ready delimited file (mean +/- std across seeds)
next to an SVG rendering.  Inputs are the metrics/sweep CSVs produced by the
harness; malformed rows raise FileFormatError with the offending line number.
"""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .errors import ContractError, FileFormatError


def _read_csv(path: str) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
    except OSError as exc:
        raise FileFormatError(f"{path}: {exc.strerror}") from exc
    if not rows:
        raise FileFormatError(f"{path}: empty file")
    return rows[0], rows[1:]


def _float(path: str, lineno: int, value: str) -> float:
    try:
        return float(value)
    except ValueError as exc:
        raise FileFormatError(f"{path}:{lineno}: bad numeric value '{value}'") from exc


def _save(fig, out_prefix: str) -> list[str]:
    svg = out_prefix + ".svg"
    fig.savefig(svg)
    plt.close(fig)
    return [svg]


def rolling_mean(x: np.ndarray, window: int) -> np.ndarray:
    if window <= 1:
        return x.astype(np.float64)
    kernel = np.ones(window) / window
    return np.convolve(x, kernel, mode="valid")


def emit_timeseries(metrics_paths: list[str], out_prefix: str,
                    smooth: int = 200) -> list[str]:
    """Fig. analogue of throughput over time per update scheme.

    metrics_paths: one metrics CSV per (scheme, seed).  Aggregates across
    seeds within each scheme.
    """
    if not metrics_paths:
        raise ContractError("no metrics files given")
    by_scheme: dict[str, list[np.ndarray]] = {}
    for path in metrics_paths:
        header, rows = _read_csv(path)
        col_t = header.index("throughput")
        col_s = header.index("scheme")
        tput = np.array([_float(path, i + 2, r[col_t]) for i, r in enumerate(rows)])
        scheme = rows[0][col_s] if rows else "unknown"
        by_scheme.setdefault(scheme, []).append(tput)

    out_csv = out_prefix + ".csv"
    os.makedirs(os.path.dirname(out_csv) or ".", exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    with open(out_csv, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["scheme", "slot", "mean_throughput", "std_throughput"])
        for scheme, series in sorted(by_scheme.items()):
            n = min(len(s) for s in series)
            stack = np.stack([rolling_mean(s[:n], smooth) for s in series])
            mean, std = stack.mean(axis=0), stack.std(axis=0)
            slots = np.arange(len(mean))
            for s, m, sd in zip(slots, mean, std):
                w.writerow([scheme, s, f"{m:.10g}", f"{sd:.10g}"])
            ax.plot(slots, mean, label=scheme)
            ax.fill_between(slots, mean - std, mean + std, alpha=0.2)
    ax.set_xlabel("slot")
    ax.set_ylabel(f"throughput (bits/symbol/subcarrier, window {smooth})")
    ax.legend()
    fig.tight_layout()
    return [out_csv] + _save(fig, out_prefix)


def emit_lambda_tradeoff(sweep_csv: str, out_prefix: str) -> list[str]:
    """Expert-2 fraction and mean throughput versus lambda."""
    header, rows = _read_csv(sweep_csv)
    idx = {name: header.index(name) for name in
           ("lambda", "seed", "expert2_fraction", "mean_throughput")}
    per_lambda: dict[float, list[tuple[float, float]]] = {}
    for i, r in enumerate(rows):
        if r[idx["seed"]] == "all":
            continue
        lam = _float(sweep_csv, i + 2, r[idx["lambda"]])
        per_lambda.setdefault(lam, []).append(
            (_float(sweep_csv, i + 2, r[idx["expert2_fraction"]]),
             _float(sweep_csv, i + 2, r[idx["mean_throughput"]])))
    if not per_lambda:
        raise ContractError("sweep file has no per-seed rows")

    lams = sorted(per_lambda)
    frac = np.array([[v[0] for v in per_lambda[l]] for l in lams])
    tput = np.array([[v[1] for v in per_lambda[l]] for l in lams])

    out_csv = out_prefix + ".csv"
    with open(out_csv, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["lambda", "expert2_mean", "expert2_std",
                    "throughput_mean", "throughput_std"])
        for l, fr, tp in zip(lams, frac, tput):
            w.writerow([f"{l:.10g}", f"{fr.mean():.10g}", f"{fr.std():.10g}",
                        f"{tp.mean():.10g}", f"{tp.std():.10g}"])

    fig, ax1 = plt.subplots(figsize=(6, 4))
    ax1.errorbar(lams, frac.mean(axis=1), yerr=frac.std(axis=1),
                 marker="o", color="tab:blue", label="expert-2 fraction")
    ax1.set_xlabel("lambda")
    ax1.set_ylabel("expert-2 fraction", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.errorbar(lams, tput.mean(axis=1), yerr=tput.std(axis=1),
                 marker="s", color="tab:red", label="throughput")
    ax2.set_ylabel("mean throughput", color="tab:red")
    fig.tight_layout()
    return [out_csv] + _save(fig, out_prefix)


def emit_bar_comparison(summary_csv: str, out_prefix: str,
                        label_col: str, value_col: str) -> list[str]:
    """Generic grouped bar chart (used for tier and density comparisons)."""
    header, rows = _read_csv(summary_csv)
    if label_col not in header or value_col not in header:
        raise FileFormatError(f"{summary_csv}: missing '{label_col}'/'{value_col}'")
    li, vi = header.index(label_col), header.index(value_col)
    groups: dict[str, list[float]] = {}
    for i, r in enumerate(rows):
        groups.setdefault(r[li], []).append(_float(summary_csv, i + 2, r[vi]))
    if not groups:
        raise ContractError(f"{summary_csv}: no data rows")

    labels = sorted(groups)
    means = [float(np.mean(groups[k])) for k in labels]
    stds = [float(np.std(groups[k])) for k in labels]

    out_csv = out_prefix + ".csv"
    with open(out_csv, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow([label_col, f"{value_col}_mean", f"{value_col}_std"])
        for k, m, s in zip(labels, means, stds):
            w.writerow([k, f"{m:.10g}", f"{s:.10g}"])

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(labels, means, yerr=stds, capsize=4)
    ax.set_ylabel(value_col)
    fig.tight_layout()
    return [out_csv] + _save(fig, out_prefix)
