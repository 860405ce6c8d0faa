"""Shared fixtures: one small synthetic corpus reused across suites."""

import numpy as np
import pytest

from roadfeel.corpus.build import build_corpus, load_pairs
from roadfeel.corpus.formats import DatasetManifest
from roadfeel.corpus.profiles import CLASS_INDEX, RoadClass


@pytest.fixture(scope="session")
def corpus48(tmp_path_factory):
    """Six pairs per (class, light) cell -> 48 train / 12 val / 12 test."""
    root = tmp_path_factory.mktemp("corpus48")
    build_corpus(root, counts=6, seed=3)
    return DatasetManifest.load(root / "manifest.json")


@pytest.fixture(scope="session")
def train48(corpus48):
    return load_pairs(corpus48, "train")


@pytest.fixture(scope="session")
def train48_labels(train48):
    return np.array([CLASS_INDEX[RoadClass.from_label(p.road_class)] for p in train48])
