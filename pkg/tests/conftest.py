from dataclasses import replace

import numpy as np
import pytest

from smotecls.core.config import Settings
from smotecls.models.dataset import LabeledDataset
from smotecls.services.preprocess import standardize
from smotecls.services.simgen import SimSpec, generate


def make_blobs(n_major=200, n_minor=30, gap=4.0, seed=7) -> LabeledDataset:
    rng = np.random.default_rng(seed)
    x = np.vstack([rng.normal(0.0, 1.0, (n_major, 2)), rng.normal(gap, 0.5, (n_minor, 2))])
    y = np.r_[np.zeros(n_major), np.ones(n_minor)]
    return LabeledDataset(features=x, labels=y)


@pytest.fixture
def blobs() -> LabeledDataset:
    return make_blobs()


@pytest.fixture
def fast_settings() -> Settings:
    return replace(Settings(), epochs=5, batch=32, f_eta_trees=10, eval_trees=10, repeats=2)


@pytest.fixture
def small_sim():
    data, provenance = generate(SimSpec(n_g1=40, n_g2=10, n_major=300, n_noise=10), 3)
    data, _ = standardize(data)
    return data, provenance
