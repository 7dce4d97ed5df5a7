import json
import pickle

import numpy as np
import pytest

sklearn = pytest.importorskip("sklearn")
from sklearn.datasets import make_classification
from sklearn.ensemble import IsolationForest, RandomForestClassifier

import cfforest as cf
from cfexport import cli, manifest_from_data

from test_export_boosted import TREE_1, TREE_2


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("models")
    X, y = make_classification(n_samples=300, n_features=5, random_state=1)
    forest = RandomForestClassifier(n_estimators=5, max_depth=3,
                                    random_state=1).fit(X, y)
    iso = IsolationForest(n_estimators=10, random_state=1).fit(X)
    paths = {}
    for name, model in (("forest", forest), ("iso", iso)):
        p = root / (name + ".pkl")
        p.write_bytes(pickle.dumps(model))
        paths[name] = str(p)
    man = root / "manifest.json"
    man.write_text(json.dumps(manifest_from_data(X)))
    paths["manifest"] = str(man)
    return paths, X


def test_forest_subcommand(trained, tmp_path, capsys):
    paths, X = trained
    out = str(tmp_path / "model.cf.json")
    rc = cli.main(["forest", "--in", paths["forest"],
                   "--manifest", paths["manifest"], "--out", out])
    assert rc == 0
    assert "wrote" in capsys.readouterr().out
    ens = cf.load_ensemble(open(out).read())
    assert len(ens.trees) == 5


def test_isolation_subcommand(trained, tmp_path):
    paths, _ = trained
    out = str(tmp_path / "iso.cf.json")
    rc = cli.main(["isolation", "--in", paths["iso"],
                   "--manifest", paths["manifest"], "--out", out])
    assert rc == 0
    block = json.load(open(out))
    assert block["offset"] < 0
    assert len(block["trees"]) == 10


def test_boosted_subcommand(tmp_path):
    X = np.array([[0.0, 0.0], [3.0, 1.0]])
    man = tmp_path / "m.json"
    man.write_text(json.dumps(manifest_from_data(X)))
    dump = tmp_path / "dump.json"
    dump.write_text(json.dumps([TREE_1, TREE_2]))
    out = str(tmp_path / "b.cf.json")
    rc = cli.main(["boosted", "--in", str(dump), "--manifest", str(man),
                   "--out", out])
    assert rc == 0
    ens = cf.load_ensemble(open(out).read())
    assert ens.split_semantics == "right_open"


def test_error_paths(trained, tmp_path, capsys):
    paths, _ = trained
    bad_man = tmp_path / "bad.json"
    bad_man.write_text(json.dumps({"voting": "soft"}))
    rc = cli.main(["forest", "--in", paths["forest"],
                   "--manifest", str(bad_man),
                   "--out", str(tmp_path / "x.json")])
    assert rc == 1
    assert "error" in capsys.readouterr().err
    rc = cli.main(["forest", "--in", str(tmp_path / "missing.pkl"),
                   "--manifest", paths["manifest"],
                   "--out", str(tmp_path / "x.json")])
    assert rc == 1
