"""Command-line interface.

Subcommands: explain, encode-wcnf, decode-wcnf, oracle, bench, validate.
Exit codes: 0 success/OPTIMAL, 2 timeout with an incumbent, 3 infeasible,
4 input or schema error.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import bench as bench_mod
from . import ensemble as ec
from . import plausibility as pl
from . import report
from .cpmodel import DEFAULT_EPS_C, build_model
from .errors import CfForestError, InputError
from .oracle import brute_force_optimum
from .solver import INFEASIBLE, OPTIMAL, TIMEOUT, solve
from .wcnf import decode_model, encode_wcnf, parse_vline

NORMS = {"l0": 0, "l1": 1, "l2": 2}

EXIT_OK = 0
EXIT_TIMEOUT = 2
EXIT_INFEASIBLE = 3
EXIT_INPUT = 4


def _default_threads():
    env = os.environ.get("CFFOREST_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 8


def _add_common(p):
    p.add_argument("--model", required=True, help="interchange document path")
    p.add_argument("--query", help="inline JSON object {feature: value}")
    p.add_argument("--query-file", help="JSON file with the query object")
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--norm", choices=sorted(NORMS), default="l1")
    p.add_argument("--epsilon-c", type=float, default=DEFAULT_EPS_C)
    p.add_argument("--immutable", action="append", default=[],
                   metavar="FEATURE")
    p.add_argument("--increase-only", action="append", default=[],
                   metavar="FEATURE")
    p.add_argument("--decrease-only", action="append", default=[],
                   metavar="FEATURE")
    p.add_argument("--output", "-o", help="result document path")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="cfforest",
        description="exact counterfactual explanations for tree ensembles")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("explain", help="branch-and-bound counterfactual")
    _add_common(p)
    p.add_argument("--time-limit", type=float, default=900.0)
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--plausibility", help="isolation-forest document path "
                   "(defaults to the one embedded in the model, if any)")
    p.add_argument("--no-plausibility", action="store_true",
                   help="ignore any embedded isolation forest")

    p = sub.add_parser("oracle", help="exhaustive ground-truth search")
    _add_common(p)
    p.add_argument("--plausibility")
    p.add_argument("--no-plausibility", action="store_true")
    p.add_argument("--cap", type=int, default=10 ** 7,
                   help="maximum number of grid cells")

    p = sub.add_parser("encode-wcnf", help="emit a DIMACS WCNF encoding")
    _add_common(p)

    p = sub.add_parser("decode-wcnf", help="decode a MaxSAT solver valuation")
    _add_common(p)
    p.add_argument("--solution", required=True,
                   help="solver output containing v-lines, or - for stdin")

    p = sub.add_parser("validate", help="re-check a result document")
    p.add_argument("--model", required=True)
    p.add_argument("--result", required=True)
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--epsilon-c", type=float, default=DEFAULT_EPS_C)

    p = sub.add_parser("bench", help="run a benchmark config")
    p.add_argument("--config", required=True)
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--no-figures", action="store_true",
                   help="write only the CSV data files")
    return ap


def _load_query(args, space):
    if (args.query is None) == (getattr(args, "query_file", None) is None):
        raise InputError("give exactly one of --query / --query-file")
    if args.query is not None:
        raw = json.loads(args.query)
    else:
        with open(args.query_file, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    return ec.point_from_query(space, raw)


def _actionability(args):
    over = {}
    for name in args.immutable:
        over[name] = "immutable"
    for name in args.increase_only:
        over[name] = "increase_only"
    for name in args.decrease_only:
        over[name] = "decrease_only"
    return over or None


def _isolation(args, ens):
    if getattr(args, "no_plausibility", False):
        return None
    if getattr(args, "plausibility", None):
        with open(args.plausibility, "r", encoding="utf-8") as fh:
            return pl.load_isolation(json.load(fh), ens.feature_space)
    return ens.isolation_forest


def _emit(sol, args):
    doc = sol.to_doc()
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    print("status:    %s" % sol.status)
    if sol.objective is not None:
        print("objective: %.6f" % sol.objective)
    if sol.best_bound is not None:
        print("bound:     %.6f" % sol.best_bound)
    if sol.point is not None:
        print("changed:   %s" % (", ".join(sol.changed_features) or "(none)"))
    print("times:     build %.3fs solve %.3fs"
          % (sol.build_time, sol.solve_time))
    if sol.status == OPTIMAL:
        return EXIT_OK
    if sol.status == TIMEOUT:
        return EXIT_TIMEOUT
    return EXIT_INFEASIBLE


def cmd_explain(args):
    ens = ec.load_ensemble_file(args.model)
    point = _load_query(args, ens.feature_space)
    model = build_model(ens, point, args.target, norm=NORMS[args.norm],
                        eps_c=args.epsilon_c,
                        actionability=_actionability(args),
                        isolation=_isolation(args, ens))
    sol = solve(model, budget=args.time_limit, seed=args.seed,
                workers=args.threads)
    return _emit(sol, args)


def cmd_oracle(args):
    ens = ec.load_ensemble_file(args.model)
    point = _load_query(args, ens.feature_space)
    sol = brute_force_optimum(ens, point, args.target, norm=NORMS[args.norm],
                              eps_c=args.epsilon_c,
                              actionability=_actionability(args),
                              isolation=_isolation(args, ens), cap=args.cap)
    return _emit(sol, args)


def cmd_encode_wcnf(args):
    if args.norm == "l2":
        raise InputError("L2 unsupported by WCNF encoder")
    if args.norm == "l0":
        raise InputError("L0 unsupported by WCNF encoder (use explain)")
    ens = ec.load_ensemble_file(args.model)
    point = _load_query(args, ens.feature_space)
    inst = encode_wcnf(ens, point, args.target, eps_c=args.epsilon_c)
    text = inst.to_dimacs()
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print("c %d variables, %d hard, %d soft"
          % (inst.n_vars, len(inst.hard), len(inst.soft)), file=sys.stderr)
    return EXIT_OK


def cmd_decode_wcnf(args):
    if args.norm != "l1":
        raise InputError("WCNF decoding is defined for the L1 norm only")
    ens = ec.load_ensemble_file(args.model)
    point = _load_query(args, ens.feature_space)
    inst = encode_wcnf(ens, point, args.target, eps_c=args.epsilon_c)
    if args.solution == "-":
        text = sys.stdin.read()
    else:
        with open(args.solution, "r", encoding="utf-8") as fh:
            text = fh.read()
    decoded = decode_model(inst, parse_vline(text))
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump(decoded, fh, indent=2)
            fh.write("\n")
    print("objective: %.6f" % decoded["objective"])
    print("valid:     %s" % decoded["valid"])
    return EXIT_OK if decoded["valid"] else EXIT_INFEASIBLE


def cmd_validate(args):
    ens = ec.load_ensemble_file(args.model)
    with open(args.result, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("point") is None:
        print("result has no counterfactual point")
        return EXIT_INFEASIBLE
    point = ec.point_from_query(ens.feature_space, doc["point"])
    s, label = ec.predict_scores(ens, point)
    margins = [float(s[args.target] - s[y]) for y in range(ens.n_classes)
               if y != args.target]
    ok = label == args.target and all(m >= args.epsilon_c for m in margins)
    if ens.isolation_forest is not None:
        d = pl.decision_function(ens.isolation_forest, point,
                                 ens.split_semantics)
        print("plausibility decision: %.6f" % d)
        ok = ok and d >= 0.0
    print("predicted class: %d (target %d)" % (label, args.target))
    print("min margin:      %.3g" % min(margins))
    print("valid:           %s" % ok)
    return EXIT_OK if ok else EXIT_INFEASIBLE


def cmd_bench(args):
    with open(args.config, "r", encoding="utf-8") as fh:
        config = json.load(fh)
    records = bench_mod.run_benchmark(config, workers=args.threads)
    out_dir = config["output_dir"]
    print("wrote %d records to %s" % (len(records), out_dir))
    if not args.no_figures:
        for path in report.render_all(out_dir):
            print("rendered %s" % path)
    return EXIT_OK


COMMANDS = {
    "explain": cmd_explain,
    "oracle": cmd_oracle,
    "encode-wcnf": cmd_encode_wcnf,
    "decode-wcnf": cmd_decode_wcnf,
    "validate": cmd_validate,
    "bench": cmd_bench,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.cmd](args)
    except (CfForestError, OSError, json.JSONDecodeError) as e:
        print("error: %s" % e, file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
