"""cfexport command line: dump trained models to the interchange format.

    cfexport forest    --in model.pkl  --manifest m.json --out model.cf.json
    cfexport isolation --in model.pkl  --manifest m.json --out iso.cf.json
    cfexport boosted   --in dump.json  --manifest m.json --out model.cf.json

forest/isolation load a pickled fitted sklearn model; boosted accepts a
pickled booster handle or a JSON array of per-tree dumps.
"""

import argparse
import json
import pickle
import sys

from .boosted import export_boosted
from .manifest import ExportError, load_manifest
from .sklearn_export import export_forest, export_isolation


def _load_pickle(path):
    with open(path, "rb") as fh:
        return pickle.load(fh)


def _load_boosted_input(path):
    if path.endswith(".json"):
        with open(path) as fh:
            return json.load(fh)
    return _load_pickle(path)


def build_parser():
    ap = argparse.ArgumentParser(prog="cfexport", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("forest", "boosted", "isolation"):
        p = sub.add_parser(name)
        p.add_argument("--in", dest="infile", required=True)
        p.add_argument("--manifest", required=True)
        p.add_argument("--out", required=True)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        manifest = load_manifest(args.manifest)
        if args.command == "forest":
            doc = export_forest(_load_pickle(args.infile), manifest)
        elif args.command == "isolation":
            doc = export_isolation(_load_pickle(args.infile), manifest)
        else:
            doc = export_boosted(_load_boosted_input(args.infile), manifest)
    except (ExportError, OSError, pickle.UnpicklingError,
            json.JSONDecodeError) as e:
        print("cfexport: error: %s" % e, file=sys.stderr)
        return 1
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2)
    n_trees = len(doc["trees"])
    print("wrote %s (%d trees, %d features)"
          % (args.out, n_trees, len(doc["features"])))
    return 0


if __name__ == "__main__":
    sys.exit(main())
