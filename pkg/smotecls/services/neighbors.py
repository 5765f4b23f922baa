# smotecls/services/neighbors.py
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.spatial.distance import cdist

from smotecls.core.errors import ConfigError, DataError
from smotecls.core.rng import RngLike, as_generator
from smotecls.models.dataset import (
    MAJOR,
    MINOR,
    PSEUDO_M,
    PSEUDO_M_HARD,
    PSEUDO_m,
    PSEUDO_m_HARD,
    LabeledDataset,
    PseudoLabeledDataset,
)

logger = logging.getLogger("smotecls.neighbors")

_CHUNK = 512
KMEANS_MAX_ITER = 300


@dataclass(frozen=True, eq=False)
class NeighborIndex:
    """Brute-force Euclidean index over reference rows (labels optional)."""

    points: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise DataError("reference points must be a 2D matrix")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_dataset(cls, data: LabeledDataset) -> "NeighborIndex":
        return cls(points=data.features, labels=data.labels)

    @property
    def size(self) -> int:
        return int(self.points.shape[0])


def knn_query(
    index: NeighborIndex,
    query: Union[np.ndarray, List[float]],
    k: int,
    exclude_self: bool = False,
) -> List[Tuple[int, float]]:
    """
    k nearest reference rows as (row, distance), nearest first, ties by lower row.

    With exclude_self the lowest-index reference row coinciding exactly with
    the query is treated as the query itself and skipped.
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    q = np.asarray(query, dtype=np.float64).reshape(1, -1)
    if q.shape[1] != index.points.shape[1]:
        raise DataError("query dimension does not match index")
    d = cdist(q, index.points)[0]
    available = index.size
    if exclude_self:
        same = np.flatnonzero(d == 0.0)
        if len(same):
            d[same[0]] = np.inf
            available -= 1
    if k > available:
        raise ConfigError(f"k={k} exceeds available reference count {available}")
    order = np.argsort(d, kind="stable")[:k]
    return [(int(i), float(d[i])) for i in order]


def knn_table(
    points: np.ndarray,
    k: int,
    exclude_self: bool = True,
    reference: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Neighbor rows and distances for every row of `points`, shape (n, k).

    Rows of `points` are matched against `reference` (defaults to `points`);
    with exclude_self row i never lists itself.
    """
    pts = np.asarray(points, dtype=np.float64)
    ref = pts if reference is None else np.asarray(reference, dtype=np.float64)
    n_ref = ref.shape[0] - (1 if exclude_self else 0)
    if k < 1:
        raise ConfigError("k must be >= 1")
    if k > n_ref:
        raise ConfigError(f"k={k} exceeds available reference count {n_ref}")
    n = pts.shape[0]
    idx = np.empty((n, k), dtype=np.int64)
    dist = np.empty((n, k), dtype=np.float64)
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        d = cdist(pts[start:stop], ref)
        if exclude_self:
            rows = np.arange(stop - start)
            d[rows, rows + start] = np.inf
        order = np.argsort(d, axis=1, kind="stable")[:, :k]
        idx[start:stop] = order
        dist[start:stop] = np.take_along_axis(d, order, axis=1)
    return idx, dist


def _vote(neighbor_labels: np.ndarray, k: int) -> np.ndarray:
    # minor wins only on a strict majority; ties go to the major class
    minor_votes = (neighbor_labels == MINOR).sum(axis=-1)
    return np.where(2 * minor_votes > k, MINOR, MAJOR).astype(np.int8)


def knn_predict(index: NeighborIndex, query, k: int) -> int:
    if index.labels is None or index.size == 0:
        raise DataError("knn_predict needs a non-empty labeled reference set")
    nbrs = knn_query(index, query, k)
    labels = np.array([index.labels[i] for i, _ in nbrs])
    return int(_vote(labels, k))


def loo_predictions(data: LabeledDataset, k: int) -> np.ndarray:
    """Leave-one-out k-NN vote for every row (the f_K classifier on training rows)."""
    if data.n_rows <= k:
        raise DataError(f"need more than k={k} rows for leave-one-out neighborhoods, got {data.n_rows}")
    idx, _ = knn_table(data.features, k, exclude_self=True)
    return _vote(data.labels[idx], k)


def relabel(data: LabeledDataset, k: int = 5) -> PseudoLabeledDataset:
    """
    Pseudo labels from the relabeling map: a row is hard (starred) when the
    leave-one-out k-NN vote disagrees with its class label.
    """
    data.require_both_classes()
    pred = loo_predictions(data, k)
    y = data.labels
    pseudo = np.where(
        y == MAJOR,
        np.where(pred == y, PSEUDO_M, PSEUDO_M_HARD),
        np.where(pred == y, PSEUDO_m, PSEUDO_m_HARD),
    )
    out = PseudoLabeledDataset(base=data, pseudo_labels=pseudo, k=k)
    logger.info("RELABEL k=%d counts=%s", k, out.counts())
    return out


def enn_edit(data: LabeledDataset, k: int = 3) -> np.ndarray:
    """Rows whose leave-one-out k-NN vote agrees with their own label."""
    if k < 1:
        raise ConfigError("k must be >= 1")
    pred = loo_predictions(data, k)
    keep = np.flatnonzero(pred == data.labels)
    logger.debug("ENN k=%d kept=%d/%d", k, len(keep), data.n_rows)
    return keep


def _kmeanspp(x: np.ndarray, k: int, gen: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    chosen = [int(gen.integers(n))]
    d2 = ((x - x[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(gen.choice(n, p=d2 / total))
        else:
            free = np.setdiff1d(np.arange(n), chosen)
            nxt = int(gen.choice(free))
        chosen.append(nxt)
        d2 = np.minimum(d2, ((x - x[nxt]) ** 2).sum(axis=1))
    return x[chosen].copy()


def kmeans_cluster(
    points: np.ndarray, k: int, rng: RngLike
) -> Tuple[np.ndarray, np.ndarray]:
    """Lloyd's k-means with k-means++ seeding. Returns (assignment, centroids)."""
    x = np.asarray(points, dtype=np.float64)
    n = x.shape[0]
    if k < 1:
        raise ConfigError("k must be >= 1")
    if k > n:
        raise ConfigError(f"k={k} exceeds row count {n}")
    gen = as_generator(rng)
    centroids = _kmeanspp(x, k, gen)
    assign = np.full(n, -1, dtype=np.int64)

    for it in range(KMEANS_MAX_ITER):
        d = cdist(x, centroids, "sqeuclidean")
        new_assign = np.argmin(d, axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            members = assign == c
            if members.any():
                centroids[c] = x[members].mean(axis=0)
            else:
                # reseed an empty cluster at the point farthest from its centroid
                own = d[np.arange(n), assign]
                far = int(np.argmax(own))
                centroids[c] = x[far]
                assign[far] = c
    logger.debug("KMEANS k=%d iterations=%d", k, it + 1)
    return assign, centroids
