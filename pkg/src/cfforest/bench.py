"""Desk-scale benchmark harness.

Samples query points, runs each configured method on each query, and writes
four CSV data files into the output directory: per-run records, grouped
summary statistics, cactus-plot data (fraction solved vs. time) and
normalized anytime-error curves.  Figure rendering lives in report.py.
"""

import csv
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import ensemble as ec
from . import plausibility as pl
from . import synth
from .cpmodel import DEFAULT_EPS_C, build_model
from .errors import InputError
from .oracle import brute_force_optimum
from .solver import INFEASIBLE, OPTIMAL, TIMEOUT, Solution, solve
from .wcnf import decode_model, encode_wcnf, exhaustive_min

METHODS = ("cp", "oracle", "wcnf")

RECORD_COLUMNS = ["dataset", "seed", "method", "n_estimators", "max_depth",
                  "voting", "norm", "plausibility", "query_id", "status",
                  "objective", "build_time_s", "solve_time_s", "total_time_s",
                  "plausible"]


@dataclass
class BenchRecord:
    dataset: str
    seed: int
    method: str
    n_estimators: int
    max_depth: int
    voting: str
    norm: int
    plausibility: bool
    query_id: int
    status: str
    objective: float | None
    build_time_s: float
    solve_time_s: float
    total_time_s: float
    plausible: bool | None
    trace: list = None  # incumbent trace, kept out of the CSV row

    def row(self):
        return [getattr(self, c) for c in RECORD_COLUMNS]


def sample_queries(X, ens, n, seed):
    """n distinct dataset rows with target classes: the opposite label for
    binary tasks, a uniformly random other class otherwise."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] < n:
        raise InputError("dataset has %d rows, need %d" % (X.shape[0], n))
    rng = np.random.default_rng(seed)
    rows = rng.choice(X.shape[0], size=n, replace=False)
    _, labels = ec.predict_scores_batch(ens, X[rows])
    out = []
    for i, r in enumerate(rows):
        lab = int(labels[i])
        if ens.n_classes == 2:
            target = 1 - lab
        else:
            others = [c for c in range(ens.n_classes) if c != lab]
            target = int(rng.choice(others))
        out.append((int(r), X[r], target))
    return out


def normalized_anytime_error(trace, cost_star, cost_max):
    """(t, (cost_t - cost*)/(cost_max - cost*)) per incumbent; None when the
    normalization is degenerate (cost_max <= cost*)."""
    if not (cost_max > cost_star):
        return None
    span = cost_max - cost_star
    return [(t, (c - cost_star) / span) for t, c in trace]


def run_one(method, ens, point, target, *, norm=1, eps_c=DEFAULT_EPS_C,
            time_limit=60.0, isolation=None, seed=0, workers=1):
    """Run a single method on a single query; returns a solver Solution."""
    if method == "cp":
        model = build_model(ens, point, target, norm=norm, eps_c=eps_c,
                            isolation=isolation)
        return solve(model, budget=time_limit, seed=seed, workers=workers)
    if method == "oracle":
        return brute_force_optimum(ens, point, target, norm=norm, eps_c=eps_c,
                                   isolation=isolation)
    if method == "wcnf":
        if isolation is not None:
            raise InputError("wcnf method does not take a plausibility model")
        if norm != 1:
            raise InputError("wcnf method only supports the L1 norm")
        t0 = time.perf_counter()
        inst = encode_wcnf(ens, point, target, eps_c=eps_c)
        build = time.perf_counter() - t0
        if inst.n_vars > 5000:
            raise InputError(
                "wcnf instance has %d variables; the built-in exhaustive "
                "check only handles small encodings" % inst.n_vars)
        t1 = time.perf_counter()
        best = exhaustive_min(inst)
        sol = Solution(status=INFEASIBLE, build_time=build,
                       solve_time=time.perf_counter() - t1)
        if best is not None:
            decoded = decode_model(inst, best[0])
            sol.status = OPTIMAL
            sol.objective = decoded["objective"]
            sol.best_bound = decoded["objective"]
            sol.point = decoded["point"]
            sol.trace = [(sol.solve_time, decoded["objective"])]
        return sol
    raise InputError("unknown method %r (have %s)" % (method, ", ".join(METHODS)))


def _record(method, ens, dataset, seed, cfg, norm, isolation, qid, sol,
            time_limit):
    total = sol.build_time + sol.solve_time
    status = sol.status
    if status == TIMEOUT or total > time_limit:
        # censoring rule: timed-out runs are booked at the limit
        total = time_limit
    plausible = None
    if sol.point is not None and isolation is not None:
        x = ec.point_from_query(ens.feature_space, sol.point)
        plausible = bool(pl.decision_function(isolation, x,
                                              ens.split_semantics) >= 0.0)
    return BenchRecord(dataset=dataset, seed=seed, method=method,
                       n_estimators=cfg[0], max_depth=cfg[1],
                       voting=ens.voting, norm=norm,
                       plausibility=isolation is not None, query_id=qid,
                       status=status, objective=sol.objective,
                       build_time_s=round(sol.build_time, 6),
                       solve_time_s=round(sol.solve_time, 6),
                       total_time_s=round(total, 6), plausible=plausible,
                       trace=list(sol.trace))


def _models(config, seed):
    """Yield (ensemble, dataset_tag, (n_estimators, max_depth), X) tuples for
    the base config and any depth/estimator sweep variants."""
    if "model_path" in config:
        ens = ec.load_ensemble_file(config["model_path"])
        tag = os.path.splitext(os.path.basename(config["model_path"]))[0]
        queries = config["queries"]
        if isinstance(queries, str):
            with open(queries, "r", encoding="utf-8") as fh:
                X = np.asarray(json.load(fh), dtype=float)
        else:
            raise InputError("model_path configs need a queries file")
        depth = max(max(t.leaf_depths()) for t in ens.trees)
        yield ens, tag, (len(ens.trees), depth), X
        return

    syn = dict(config.get("synthetic", {}))
    n_num = syn.pop("n_numerical", 8)
    base_trees = syn.pop("n_estimators", 50)
    base_depth = syn.pop("max_depth", 5)
    voting = syn.pop("voting", ec.SOFT)
    thr = syn.pop("thresholds_per_feature", 16)
    n_queries = config.get("queries", 10)
    sweeps = config.get("sweeps", {})
    configs = [(base_trees, base_depth)]
    for d in sweeps.get("max_depth", []):
        if (base_trees, d) not in configs:
            configs.append((base_trees, d))
    for n in sweeps.get("n_estimators", []):
        if (n, base_depth) not in configs:
            configs.append((n, base_depth))
    for n_trees, depth in configs:
        space = synth.make_feature_space(n_numerical=n_num, **syn)
        ens = synth.make_ensemble(n_trees, depth, space, voting=voting,
                                  seed=seed, thresholds_per_feature=thr)
        X = synth.make_points(space, max(n_queries * 3, 30), seed=seed + 1)
        yield ens, "synthetic-%dx%d" % (n_trees, depth), (n_trees, depth), X


def run_benchmark(config, workers=1):
    """Run the protocol described by a config document and write the four
    CSV outputs; returns the record list.

    Config keys: model_path + queries file, or synthetic + queries count;
    methods[], norms[], seeds[], sweeps {max_depth, n_estimators},
    time_limit_s, plausibility flag, output_dir.
    """
    out_dir = config["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    limit = float(config.get("time_limit_s", 60.0))
    methods = config.get("methods", ["cp"])
    for m in methods:
        if m not in METHODS:
            raise InputError("unknown method %r" % m)
    norms = config.get("norms", [1])
    seeds = config.get("seeds", [0])
    n_queries = int(config.get("queries", 10)) if "model_path" not in config \
        else None
    want_iso = bool(config.get("plausibility", False))

    jobs = []
    for seed in seeds:
        for ens, tag, cfg, X in _models(config, seed):
            iso = None
            if want_iso:
                iso = ens.isolation_forest or synth.make_isolation(
                    ens.feature_space, seed=seed)
            n = n_queries if n_queries is not None else min(10, X.shape[0])
            sampled = sample_queries(X, ens, n, seed)
            for norm in norms:
                for method in methods:
                    for qid, (_, q, target) in enumerate(sampled):
                        jobs.append((method, ens, tag, seed, cfg, norm, iso,
                                     qid, q, target))

    def work(job):
        method, ens, tag, seed, cfg, norm, iso, qid, q, target = job
        try:
            sol = run_one(method, ens, q, target, norm=norm,
                          time_limit=limit, isolation=iso, seed=seed)
        except InputError:
            raise
        return _record(method, ens, tag, seed, cfg, norm, iso, qid, sol, limit)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(work, jobs))
    else:
        records = [work(j) for j in jobs]

    write_records(records, os.path.join(out_dir, "records.csv"))
    write_summary(records, os.path.join(out_dir, "summary.csv"))
    write_cactus(records, os.path.join(out_dir, "cactus.csv"))
    write_anytime(records, os.path.join(out_dir, "anytime.csv"))
    return records


def write_records(records, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow(r.row())


def _groups(records):
    keys = {}
    for r in records:
        k = (r.dataset, r.method, r.n_estimators, r.max_depth, r.voting,
             r.norm, r.plausibility)
        keys.setdefault(k, []).append(r)
    return keys


def write_summary(records, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["dataset", "method", "n_estimators", "max_depth",
                    "voting", "norm", "plausibility", "n", "solved_frac",
                    "median_total_s", "q1_total_s", "q3_total_s",
                    "plausible_frac"])
        for k, rs in sorted(_groups(records).items()):
            times = np.asarray([r.total_time_s for r in rs])
            solved = sum(1 for r in rs if r.status == OPTIMAL)
            q1, med, q3 = np.percentile(times, [25, 50, 75])
            flags = [r.plausible for r in rs if r.plausible is not None]
            pfrac = round(sum(flags) / len(flags), 4) if flags else ""
            w.writerow(list(k) + [len(rs), round(solved / len(rs), 4),
                                  round(med, 6), round(q1, 6), round(q3, 6),
                                  pfrac])


def write_cactus(records, path):
    """Sorted proven-optimal total times per group: fraction of the group's
    queries solved within each time budget."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["dataset", "method", "n_estimators", "max_depth",
                    "voting", "norm", "plausibility", "rank", "solved_frac",
                    "total_time_s"])
        for k, rs in sorted(_groups(records).items()):
            times = sorted(r.total_time_s for r in rs if r.status == OPTIMAL)
            for i, t in enumerate(times):
                w.writerow(list(k) + [i + 1, round((i + 1) / len(rs), 4),
                                      round(t, 6)])


def write_anytime(records, path):
    """Normalized anytime-error curves, restricted to queries every compared
    method solved to optimality and with a non-degenerate normalizer."""
    by_query = {}
    for r in records:
        k = (r.dataset, r.seed, r.n_estimators, r.max_depth, r.norm,
             r.plausibility, r.query_id)
        by_query.setdefault(k, []).append(r)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["dataset", "seed", "method", "norm", "query_id", "t_s",
                    "normalized_error"])
        for k, rs in sorted(by_query.items()):
            if any(r.status != OPTIMAL or not r.trace for r in rs):
                continue
            cost_star = min(r.objective for r in rs)
            cost_max = max(c for r in rs for _, c in r.trace)
            for r in rs:
                curve = normalized_anytime_error(r.trace, cost_star, cost_max)
                if curve is None:
                    continue
                for t, e in curve:
                    w.writerow([r.dataset, r.seed, r.method, r.norm,
                                r.query_id, round(t, 6), round(e, 6)])
