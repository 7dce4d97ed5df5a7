"""Figure rendering for benchmark output directories.

Reads the CSV data files written by bench.run_benchmark and drops PNG
figures next to them: a cactus plot, mean anytime-error curves and a
scaling plot of median time against ensemble size and depth.
"""

import csv
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _read_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def render_cactus(out_dir, fname="cactus.png"):
    rows = _read_csv(os.path.join(out_dir, "cactus.csv"))
    if not rows:
        return None
    fig, ax = plt.subplots(figsize=(6, 4))
    series = defaultdict(list)
    for r in rows:
        key = "%s %s" % (r["method"], r["dataset"])
        series[key].append((float(r["total_time_s"]), float(r["solved_frac"])))
    for key, pts in sorted(series.items()):
        pts.sort()
        ax.step([t for t, _ in pts], [f for _, f in pts], where="post",
                label=key)
    ax.set_xlabel("time budget [s]")
    ax.set_ylabel("fraction solved to optimality")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=7)
    ax.set_xscale("log")
    fig.tight_layout()
    path = os.path.join(out_dir, fname)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_anytime(out_dir, fname="anytime.png", grid=50):
    rows = _read_csv(os.path.join(out_dir, "anytime.csv"))
    if not rows:
        return None
    curves = defaultdict(list)
    for r in rows:
        k = (r["method"], r["dataset"], r["seed"], r["norm"], r["query_id"])
        curves[k].append((float(r["t_s"]), float(r["normalized_error"])))
    per_method = defaultdict(list)
    t_max = max(t for pts in curves.values() for t, _ in pts)
    ts = [t_max * (i + 1) / grid for i in range(grid)]
    for (method, *_), pts in curves.items():
        pts.sort()
        sampled = []
        for t in ts:
            e = 1.0
            for pt, pe in pts:
                if pt <= t:
                    e = pe
                else:
                    break
            sampled.append(e)
        per_method[method].append(sampled)
    fig, ax = plt.subplots(figsize=(6, 4))
    for method, rows_ in sorted(per_method.items()):
        mean = [sum(col) / len(col) for col in zip(*rows_)]
        ax.plot(ts, mean, label=method)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("mean normalized error")
    ax.set_ylim(-0.05, 1.05)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = os.path.join(out_dir, fname)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_scaling(out_dir, fname="scaling.png"):
    rows = _read_csv(os.path.join(out_dir, "summary.csv"))
    if not rows:
        return None
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    by_est = defaultdict(list)
    by_depth = defaultdict(list)
    for r in rows:
        by_est[r["method"]].append((int(r["n_estimators"]),
                                    float(r["median_total_s"])))
        by_depth[r["method"]].append((int(r["max_depth"]),
                                      float(r["median_total_s"])))
    for ax, series, label in ((axes[0], by_est, "estimators"),
                              (axes[1], by_depth, "max depth")):
        for method, pts in sorted(series.items()):
            agg = defaultdict(list)
            for x, y in pts:
                agg[x].append(y)
            xs = sorted(agg)
            ax.plot(xs, [sorted(agg[x])[len(agg[x]) // 2] for x in xs],
                    marker="o", label=method)
        ax.set_xlabel(label)
        ax.set_ylabel("median total time [s]")
        ax.legend(fontsize=8)
    fig.tight_layout()
    path = os.path.join(out_dir, fname)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_all(out_dir):
    """Render every available figure; returns the list of written paths."""
    written = []
    for fn in (render_cactus, render_anytime, render_scaling):
        try:
            p = fn(out_dir)
        except FileNotFoundError:
            p = None
        if p:
            written.append(p)
    return written
