# smotecls/models/dataset.py
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from smotecls.core.errors import DataError

# Binary class codes
MAJOR = 0
MINOR = 1
CLASS_NAMES = ("M", "m")

# Pseudo-label codes: class + classification difficulty
PSEUDO_M = 0
PSEUDO_M_HARD = 1
PSEUDO_m = 2
PSEUDO_m_HARD = 3
PSEUDO_NAMES = ("M", "M*", "m", "m*")

STD_FLOOR = 1e-12


def _as_matrix(values) -> np.ndarray:
    x = np.array(values, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise DataError(f"feature matrix must be 2D with >= 1 row and column, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("feature matrix contains non-finite values")
    return x


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """
    n x d float64 features with binary labels (0 = major M, 1 = minor m).

    `tokens` keeps the original label token of every row so exports can
    write labels back as they were read; `positive_token` is what synthetic
    minority rows are written as.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: Tuple[str, ...] = ()
    tokens: Optional[Tuple[str, ...]] = None
    positive_token: str = "m"
    negative_token: str = "M"

    def __post_init__(self):
        x = _as_matrix(self.features)
        y = np.asarray(self.labels).astype(np.int8).ravel()
        if y.shape[0] != x.shape[0]:
            raise DataError(f"label count {y.shape[0]} != row count {x.shape[0]}")
        if np.any((y != MAJOR) & (y != MINOR)):
            raise DataError("labels must be 0 (major) or 1 (minor)")
        names = tuple(self.feature_names) or tuple(f"x{j + 1}" for j in range(x.shape[1]))
        if len(names) != x.shape[1]:
            raise DataError("feature_names length must match column count")
        if self.tokens is not None and len(self.tokens) != x.shape[0]:
            raise DataError("tokens length must match row count")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n_rows(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_cols(self) -> int:
        return int(self.features.shape[1])

    @property
    def minor_idx(self) -> np.ndarray:
        return np.flatnonzero(self.labels == MINOR)

    @property
    def major_idx(self) -> np.ndarray:
        return np.flatnonzero(self.labels == MAJOR)

    @property
    def n_minor(self) -> int:
        return int(np.sum(self.labels == MINOR))

    @property
    def n_major(self) -> int:
        return int(np.sum(self.labels == MAJOR))

    @property
    def imbalance_ratio(self) -> float:
        """Minor count over major count."""
        return self.n_minor / self.n_major if self.n_major else float("inf")

    def require_both_classes(self) -> None:
        if self.n_minor == 0 or self.n_major == 0:
            raise DataError("single-class dataset")

    def token_of(self, i: int) -> str:
        if self.tokens is not None:
            return self.tokens[i]
        return self.positive_token if self.labels[i] == MINOR else self.negative_token

    def subset(self, idx: Sequence[int]) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(
            features=self.features[idx],
            labels=self.labels[idx],
            feature_names=self.feature_names,
            tokens=None if self.tokens is None else tuple(self.tokens[i] for i in idx),
            positive_token=self.positive_token,
            negative_token=self.negative_token,
        )

    def with_features(self, features: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(
            features=features,
            labels=self.labels,
            feature_names=self.feature_names,
            tokens=self.tokens,
            positive_token=self.positive_token,
            negative_token=self.negative_token,
        )

    def append_minor(self, synthetic: np.ndarray) -> "LabeledDataset":
        """Return a copy with synthetic rows appended, all labeled minor."""
        synthetic = np.asarray(synthetic, dtype=np.float64).reshape(-1, self.n_cols)
        if synthetic.shape[0] == 0:
            return self
        tokens = None
        if self.tokens is not None:
            tokens = self.tokens + (self.positive_token,) * synthetic.shape[0]
        return LabeledDataset(
            features=np.vstack([self.features, synthetic]),
            labels=np.concatenate([self.labels, np.full(synthetic.shape[0], MINOR, dtype=np.int8)]),
            feature_names=self.feature_names,
            tokens=tokens,
            positive_token=self.positive_token,
            negative_token=self.negative_token,
        )


@dataclass(frozen=True, eq=False)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        x = np.asarray(x, dtype=np.float64)
        mean = x.mean(axis=0)
        std = np.maximum(x.std(axis=0), STD_FLOOR)
        return cls(mean=mean, std=std)

    def transform(self, x: np.ndarray) -> np.ndarray:
        z = (np.asarray(x, dtype=np.float64) - self.mean) / self.std
        # constant columns: floor deviation turns float residue into exact zeros
        z[:, self.std <= STD_FLOOR] = 0.0
        return z

    def inverse_transform(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.std + self.mean


@dataclass(frozen=True, eq=False)
class PseudoLabeledDataset:
    """A dataset plus the 4-way difficulty labels from the relabeling map."""

    base: LabeledDataset
    pseudo_labels: np.ndarray
    k: int = 5
    groups: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        pl = np.asarray(self.pseudo_labels).astype(np.int8).ravel()
        if pl.shape[0] != self.base.n_rows:
            raise DataError("pseudo label count must match row count")
        minor_side = (pl == PSEUDO_m) | (pl == PSEUDO_m_HARD)
        if np.any(minor_side != (self.base.labels == 1)):
            raise DataError("pseudo labels disagree with class labels")
        pl.setflags(write=False)
        object.__setattr__(self, "pseudo_labels", pl)
        object.__setattr__(
            self,
            "groups",
            {name: np.flatnonzero(pl == code) for code, name in enumerate(PSEUDO_NAMES)},
        )

    @property
    def D_M(self) -> np.ndarray:
        return self.groups["M"]

    @property
    def D_M_hard(self) -> np.ndarray:
        return self.groups["M*"]

    @property
    def D_m(self) -> np.ndarray:
        return self.groups["m"]

    @property
    def D_m_hard(self) -> np.ndarray:
        return self.groups["m*"]

    def counts(self) -> dict:
        return {name: int(len(idx)) for name, idx in self.groups.items()}
