"""Export manifests: feature metadata inferred from training data.

A manifest is a plain dict with a "features" list in the interchange
feature schema plus export options (voting, n_classes, base_margin).
Bounds default to the per-column data min/max; one-hot groups are
discovered from column-name prefixes and can be overridden explicitly.
"""

import json
from collections import defaultdict

import numpy as np


class ExportError(ValueError):
    pass


def manifest_from_data(X, names=None, *, voting="soft", groups=None,
                       alphas=None):
    """Feature manifest from a training matrix.

    groups: optional explicit {column name: group id} mapping; passing a
    dict (even empty) disables prefix-based discovery.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ExportError("need a non-empty 2d data matrix")
    n = X.shape[1]
    if names is None:
        names = ["f%d" % j for j in range(n)]
    names = [str(s) for s in names]
    if len(names) != n or len(set(names)) != n:
        raise ExportError("need %d distinct column names" % n)

    binary = [bool(np.isin(np.unique(X[:, j]), (0.0, 1.0)).all())
              for j in range(n)]
    if groups is None:
        group_of = _discover_groups(names, binary)
    else:
        group_of = {str(k): str(v) for k, v in groups.items()}

    features = []
    for j, name in enumerate(names):
        if name in group_of:
            feat = {"name": name, "kind": "categorical", "lb": 0.0,
                    "ub": 1.0, "group": group_of[name]}
        elif binary[j]:
            feat = {"name": name, "kind": "binary", "lb": 0.0, "ub": 1.0}
        else:
            lo = float(X[:, j].min())
            hi = float(X[:, j].max())
            if hi <= lo:
                hi = lo + 1.0
            feat = {"name": name, "kind": "numerical", "lb": lo, "ub": hi}
        if alphas and name in alphas:
            feat["alpha"] = float(alphas[name])
        features.append(feat)
    return {"voting": voting, "features": features}


def _discover_groups(names, binary):
    """One-hot groups from shared "prefix=value" / "prefix_value" names."""
    prefixes = defaultdict(list)
    for j, name in enumerate(names):
        if not binary[j]:
            continue
        if "=" in name:
            prefixes[name.split("=", 1)[0]].append(name)
        elif "_" in name:
            prefixes[name.rsplit("_", 1)[0]].append(name)
    group_of = {}
    for prefix, members in prefixes.items():
        if len(members) >= 2:
            for name in members:
                group_of[name] = prefix
    return group_of


def load_manifest(path):
    with open(path) as fh:
        doc = json.load(fh)
    check_manifest(doc)
    return doc


def check_manifest(doc):
    if not isinstance(doc, dict) or "features" not in doc:
        raise ExportError("manifest must be a dict with a features list")
    for feat in doc["features"]:
        for key in ("name", "kind", "lb", "ub"):
            if key not in feat:
                raise ExportError("manifest feature missing %r" % key)
    return doc
