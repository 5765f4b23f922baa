# smotecls/services/preprocess.py
from __future__ import annotations

import logging
import math
from typing import Tuple

import numpy as np

from smotecls.core.errors import ConfigError, DataError
from smotecls.core.rng import RngLike, as_generator
from smotecls.models.dataset import MAJOR, MINOR, LabeledDataset, Standardizer

logger = logging.getLogger("smotecls.preprocess")


def standardize(data: LabeledDataset) -> Tuple[LabeledDataset, Standardizer]:
    """Zero-mean / unit-deviation columns; constant columns map to zeros."""
    if data.n_rows < 2:
        raise DataError("standardize needs at least 2 rows")
    scaler = Standardizer.fit(data.features)
    return data.with_features(scaler.transform(data.features)), scaler


def inverse_standardize(data: LabeledDataset, scaler: Standardizer) -> LabeledDataset:
    return data.with_features(scaler.inverse_transform(data.features))


def split_indices(
    labels: np.ndarray, test_fraction: float, rng: RngLike
) -> Tuple[np.ndarray, np.ndarray]:
    if not (0 < test_fraction < 1):
        raise ConfigError("test_fraction must be in (0, 1)")
    gen = as_generator(rng)
    train, test = [], []
    for cls in (MAJOR, MINOR):
        idx = np.flatnonzero(labels == cls)
        if len(idx) < 2:
            raise DataError(f"class {'m' if cls == MINOR else 'M'} has fewer than 2 rows ({len(idx)})")
        n_test = int(math.floor(len(idx) * test_fraction + 0.5))
        n_test = min(max(n_test, 1), len(idx) - 1)
        perm = gen.permutation(idx)
        test.append(perm[:n_test])
        train.append(perm[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def stratified_split(
    data: LabeledDataset, test_fraction: float, rng: RngLike
) -> Tuple[LabeledDataset, LabeledDataset]:
    train_idx, test_idx = split_indices(data.labels, test_fraction, rng)
    logger.debug("SPLIT train=%d test=%d", len(train_idx), len(test_idx))
    return data.subset(train_idx), data.subset(test_idx)
