import json
import os

import pytest

from cfforest import ensemble as ec

DATA = os.path.join(os.path.dirname(__file__), "data")


def toy_path(name):
    return os.path.join(DATA, name)


def load_toy(name):
    return ec.load_ensemble_file(toy_path(name))


def toy_doc(name):
    with open(toy_path(name), "r", encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture
def toy_a():
    return load_toy("toy_a.cf.json")


@pytest.fixture
def toy_b():
    return load_toy("toy_b.cf.json")
