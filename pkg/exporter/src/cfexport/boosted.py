"""Interchange documents from XGBoost tree-booster dumps.

Works from the JSON dump format (booster.get_dump(dump_format="json")),
so a live xgboost installation is optional: a fitted booster handle, a
list of per-tree dump strings/dicts, or a JSON array string all work.
Booster splits test x < tau, hence right_open semantics; leaf values are
raw margin contributions, kept as per-class score channels with w_t = 1.
"""

import json
import re

from .manifest import ExportError, check_manifest

VERSION = "cfforest/1"

_FN_PATTERN = re.compile(r"f(\d+)$")


def export_boosted(model, manifest):
    check_manifest(manifest)
    dumps = _tree_dumps(model)
    names = [f["name"] for f in manifest["features"]]
    n_classes = int(manifest.get("n_classes", 2))
    if n_classes < 2:
        raise ExportError("n_classes must be at least 2")
    if n_classes > 2 and len(dumps) % n_classes:
        raise ExportError("%d trees do not split into %d class channels"
                          % (len(dumps), n_classes))

    base = manifest.get("base_margin", 0.0)
    if isinstance(base, (list, tuple)):
        if len(base) != n_classes:
            raise ExportError("base_margin length mismatch")
        base_scores = [float(b) for b in base]
    elif n_classes == 2:
        # binary margin lives on the class-1 channel
        base_scores = [0.0, float(base)]
    else:
        base_scores = [float(base)] * n_classes

    trees = []
    for i, dump in enumerate(dumps):
        chan = 1 if n_classes == 2 else i % n_classes
        trees.append(_tree_from_dump(dump, names, chan, n_classes))

    return {
        "version": VERSION,
        "voting": "soft",
        "split_semantics": "right_open",
        "n_classes": n_classes,
        "base_scores": base_scores,
        "tree_weights": [1.0] * len(trees),
        "features": [dict(f) for f in manifest["features"]],
        "trees": trees,
    }


def _tree_dumps(model):
    if hasattr(model, "get_dump"):
        raw = model.get_dump(dump_format="json")
    elif isinstance(model, str):
        raw = json.loads(model)
        if not isinstance(raw, list):
            raise ExportError("booster dump string must be a JSON array")
    elif isinstance(model, (list, tuple)):
        raw = list(model)
    else:
        raise ExportError("need a booster handle or a list of tree dumps")

    parsed = []
    for item in raw:
        if isinstance(item, str):
            try:
                item = json.loads(item)
            except json.JSONDecodeError:
                raise ExportError(
                    "dump entry is not tree JSON; only tree boosters "
                    "(gbtree/dart) are supported")
        if not isinstance(item, dict) or ("children" not in item
                                          and "leaf" not in item):
            raise ExportError("dump entry lacks tree structure")
        parsed.append(item)
    if not parsed:
        raise ExportError("booster dump contains no trees")
    return parsed


def _feature_index(split, names):
    split = str(split)
    if split in names:
        return names.index(split)
    m = _FN_PATTERN.fullmatch(split)
    if m and int(m.group(1)) < len(names):
        return int(m.group(1))
    raise ExportError("split feature %r not in manifest" % split)


def _tree_from_dump(dump, names, chan, n_classes):
    nodes = []
    leaves = []

    def visit(nd):
        if "leaf" in nd:
            scores = [0.0] * n_classes
            scores[chan] = float(nd["leaf"])
            leaves.append({"scores": scores,
                           "n_samples": int(float(nd.get("cover", 0)))})
            return -len(leaves)
        try:
            kids = {c["nodeid"]: c for c in nd["children"]}
            f = _feature_index(nd["split"], names)
            tau = float(nd["split_condition"])
            yes, no = nd["yes"], nd["no"]
        except KeyError as e:
            raise ExportError("malformed dump node (missing %s)" % e)
        idx = len(nodes)
        nodes.append({"f": f, "tau": tau, "left": 0, "right": 0})
        nodes[idx]["left"] = visit(kids[yes])    # x < tau branch
        nodes[idx]["right"] = visit(kids[no])
        return idx

    root = visit(dump)
    return {"nodes": nodes, "leaves": leaves, "root": root}
