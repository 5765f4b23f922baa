# smotecls/services/sampler.py
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from smotecls.core.errors import (
    ConfigError,
    DataError,
    InsufficientSupportError,
    NoEligibleClusterError,
)
from smotecls.core.rng import RngLike, as_generator
from smotecls.models.dataset import MAJOR, MINOR, PSEUDO_m, PSEUDO_m_HARD, LabeledDataset
from smotecls.models.kde import KdeModel, retain_above, retain_by_quantile
from smotecls.services.neighbors import enn_edit, kmeans_cluster, knn_table

logger = logging.getLogger("smotecls.sampler")


# -----------------------------
# CONFIG / REPORT TYPES
# -----------------------------
@dataclass(frozen=True)
class FilterConfig:
    """
    Retain fractions for the easy-minor (q_easy -> tau1) and hard-minor
    (q_hard -> tau2) groups plus the three ablation switches.

    With `adaptive` off a single KDE over all minors keeps `naive_fraction`.
    Raw thresholds (tau_easy / tau_hard) override the fractions when set.
    """

    q_easy: float = 0.9
    q_hard: float = 0.6
    tau_easy: Optional[float] = None
    tau_hard: Optional[float] = None
    disentangle: bool = True
    segment: bool = True
    adaptive: bool = True
    naive_fraction: float = 0.6

    def __post_init__(self):
        for name in ("q_easy", "q_hard", "naive_fraction"):
            q = getattr(self, name)
            if not (0 < q <= 1):
                raise ConfigError(f"{name} must be in (0, 1]")


@dataclass(eq=False)
class FilterReport:
    """One entry per minor point: dataset row, group, density, kept flag."""

    rows: np.ndarray
    groups: List[str]
    density: np.ndarray
    kept: np.ndarray
    thresholds: Dict[str, float] = field(default_factory=dict)

    @property
    def retained(self) -> np.ndarray:
        return self.rows[self.kept]

    def counts(self) -> Dict[str, Dict[str, int]]:
        out: Dict[str, Dict[str, int]] = {}
        for g in sorted(set(self.groups)):
            mask = np.array([x == g for x in self.groups], dtype=bool)
            out[g] = {"total": int(mask.sum()), "kept": int(self.kept[mask].sum())}
        return out


@dataclass(frozen=True)
class OversampleConfig:
    rho: float = 1.0
    k_smote: int = 5
    strategy: str = "smote"
    k_enn: int = 3
    km_clusters: int = 8
    km_threshold: float = 0.5
    ddhs_fraction: float = 0.75

    def __post_init__(self):
        if self.rho <= 0:
            raise ConfigError("rho must be > 0")
        if self.k_smote < 1:
            raise ConfigError("k_smote must be >= 1")


@dataclass(eq=False)
class SyntheticBatch:
    """Synthetic points with the candidate pair and gap that produced each one."""

    points: np.ndarray
    base: np.ndarray
    neighbor: np.ndarray
    gap: np.ndarray

    def __len__(self) -> int:
        return int(self.points.shape[0])


def target_synthetic(n_major: int, n_minor_base: int, rho: float) -> int:
    """Synthetic count that lifts `n_minor_base` to ceil(rho * n_major)."""
    goal = int(math.ceil(rho * n_major - 1e-9))
    return max(0, goal - n_minor_base)


# -----------------------------
# SMOTE CORE
# -----------------------------
def smote_interpolate(x_i: np.ndarray, x_nn: np.ndarray, u: float) -> np.ndarray:
    a = np.asarray(x_i, dtype=np.float64)
    b = np.asarray(x_nn, dtype=np.float64)
    if a.shape != b.shape:
        raise DataError("points must have the same dimension")
    return a + u * (b - a)


def smote(
    candidates: np.ndarray,
    target_count: int,
    k_s: int = 5,
    rng: RngLike = 0,
    base_indices: Optional[Sequence[int]] = None,
) -> SyntheticBatch:
    """
    Classic SMOTE over `candidates`: pick a base (uniform over
    `base_indices`, default all), one of its k_eff nearest other candidates,
    and interpolate with a uniform gap. Neighbor lists are computed once on
    the original candidates.
    """
    x = np.asarray(candidates, dtype=np.float64)
    if x.ndim != 2:
        raise DataError("candidates must be a 2D matrix")
    if target_count <= 0:
        empty = np.empty(0, dtype=np.int64)
        return SyntheticBatch(np.empty((0, x.shape[1])), empty, empty, np.empty(0))
    if x.shape[0] < 2:
        raise InsufficientSupportError("insufficient minority support: SMOTE needs at least 2 candidates")
    gen = as_generator(rng)
    k_eff = min(k_s, x.shape[0] - 1)
    nn_idx, _ = knn_table(x, k_eff, exclude_self=True)
    bases_pool = np.arange(x.shape[0]) if base_indices is None else np.asarray(base_indices, dtype=np.int64)
    if len(bases_pool) == 0:
        raise InsufficientSupportError("insufficient minority support: no base points")

    base = bases_pool[gen.integers(0, len(bases_pool), size=target_count)]
    pick = gen.integers(0, k_eff, size=target_count)
    neighbor = nn_idx[base, pick]
    gap = gen.random(target_count)
    points = x[base] + gap[:, None] * (x[neighbor] - x[base])
    logger.debug("SMOTE candidates=%d k_eff=%d generated=%d", x.shape[0], k_eff, target_count)
    return SyntheticBatch(points, base, neighbor, gap)


# -----------------------------
# LATENT FILTERS
# -----------------------------
def _quantile_or_raw(
    z: np.ndarray, q: float, tau: Optional[float]
) -> Tuple[np.ndarray, float, np.ndarray]:
    if z.shape[0] == 1:
        # a single point cannot carry a bandwidth estimate; keep it
        return np.array([0]), float("-inf"), np.array([np.nan])
    kde = KdeModel.fit(z)
    if tau is not None:
        return retain_above(kde, z, tau)
    return retain_by_quantile(kde, z, q)


def group_adaptive_filter(
    z_minor: np.ndarray,
    pseudo_minor: np.ndarray,
    config: FilterConfig,
    rows: Optional[np.ndarray] = None,
) -> FilterReport:
    """
    Density filter on minor latent points.

    Adaptive: separate KDEs for easy (m) and hard (m*) minors, each keeping
    its own retain fraction; an empty group is skipped. Non-adaptive: one
    KDE over all minors keeping `naive_fraction`.
    """
    z = np.asarray(z_minor, dtype=np.float64)
    pl = np.asarray(pseudo_minor, dtype=np.int64)
    n = z.shape[0]
    if n == 0:
        raise InsufficientSupportError("no minority points to filter")
    rows = np.arange(n) if rows is None else np.asarray(rows, dtype=np.int64)
    groups = ["m" if p == PSEUDO_m else "m*" for p in pl]
    density = np.full(n, np.nan)
    kept = np.zeros(n, dtype=bool)
    thresholds: Dict[str, float] = {}

    if config.adaptive:
        plan = [
            ("m", np.flatnonzero(pl == PSEUDO_m), config.q_easy, config.tau_easy),
            ("m*", np.flatnonzero(pl == PSEUDO_m_HARD), config.q_hard, config.tau_hard),
        ]
    else:
        plan = [("all", np.arange(n), config.naive_fraction, None)]

    for name, members, q, tau in plan:
        if len(members) == 0:
            logger.warning("FILTER group %s is empty; skipped", name)
            continue
        keep, thr, dens = _quantile_or_raw(z[members], q, tau)
        density[members] = dens
        kept[members[keep]] = True
        thresholds[name] = thr
        logger.info("FILTER group=%s size=%d kept=%d tau=%.6g", name, len(members), len(keep), thr)

    return FilterReport(rows=rows, groups=groups, density=density, kept=kept, thresholds=thresholds)


def dfbs_filter(z_all: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Minor rows closer to the minor latent centroid than to the major one."""
    z = np.asarray(z_all, dtype=np.float64)
    y = np.asarray(labels)
    if not np.any(y == MINOR) or not np.any(y == MAJOR):
        raise DataError("dfbs_filter needs both classes embedded")
    c_major = z[y == MAJOR].mean(axis=0)
    c_minor = z[y == MINOR].mean(axis=0)
    minor = np.flatnonzero(y == MINOR)
    d_major = np.linalg.norm(z[minor] - c_major, axis=1)
    d_minor = np.linalg.norm(z[minor] - c_minor, axis=1)
    return minor[d_major > d_minor]


def ddhs_filter(z_minor: np.ndarray, retain_fraction: float = 0.75) -> np.ndarray:
    """Pooled minor KDE keeping the densest `retain_fraction`."""
    z = np.asarray(z_minor, dtype=np.float64)
    if z.shape[0] < 2:
        raise InsufficientSupportError("ddhs_filter needs at least 2 minority points")
    keep, _, _ = retain_by_quantile(KdeModel.fit(z), z, retain_fraction)
    return keep


# -----------------------------
# BASELINE OVERSAMPLERS
# -----------------------------
def borderline_select(data: LabeledDataset, k: int = 5) -> np.ndarray:
    """
    Borderline-1 DANGER minors: among the k leave-one-out neighbors (both
    classes) m' are major with k/2 <= m' < k.
    """
    data.require_both_classes()
    if data.n_rows <= k:
        raise DataError(f"need more than k={k} rows")
    minor = data.minor_idx
    idx, _ = knn_table(data.features, k, exclude_self=True)
    n_major = (data.labels[idx[minor]] == MAJOR).sum(axis=1)
    danger = (2 * n_major >= k) & (n_major < k)
    return minor[danger]


def bsmote(data: LabeledDataset, rho: float, k_s: int, rng: RngLike) -> SyntheticBatch:
    """Borderline-SMOTE1: bases from the DANGER set, neighbors among all minors."""
    minor = data.minor_idx
    target = target_synthetic(data.n_major, data.n_minor, rho)
    danger = borderline_select(data, k_s)
    pos = np.searchsorted(minor, danger)
    if len(pos) == 0:
        logger.warning("BSMOTE empty danger set; falling back to all minority bases")
        pos = None
    return smote(data.features[minor], target, k_s, rng, base_indices=pos)


@dataclass(eq=False)
class KmSmoteResult:
    batch: SyntheticBatch
    source_cluster: np.ndarray
    assignment: np.ndarray
    eligible: List[int]


def kmsmote(
    data: LabeledDataset,
    k_clusters: int,
    minority_ratio_threshold: float,
    target_count: int,
    k_s: int = 5,
    rng: RngLike = 0,
) -> KmSmoteResult:
    """
    K-means over both classes; clusters whose minority fraction exceeds the
    threshold (and hold >= 2 minors) share the synthetic budget in proportion
    to their minority counts; SMOTE runs inside each cluster's minors.
    """
    gen = as_generator(rng)
    k_clusters = min(k_clusters, data.n_rows)
    assign, _ = kmeans_cluster(data.features, k_clusters, gen)
    eligible: List[int] = []
    minor_counts: List[int] = []
    for c in range(k_clusters):
        members = assign == c
        n_min = int(np.sum(data.labels[members] == MINOR))
        frac = n_min / max(1, int(members.sum()))
        if frac > minority_ratio_threshold and n_min >= 2:
            eligible.append(c)
            minor_counts.append(n_min)
    if not eligible:
        raise NoEligibleClusterError("no eligible cluster")

    # largest-remainder allocation of the budget
    share = np.asarray(minor_counts, dtype=np.float64) / sum(minor_counts) * target_count
    alloc = np.floor(share).astype(np.int64)
    rest = target_count - int(alloc.sum())
    for j in np.argsort(-(share - alloc), kind="stable")[:rest]:
        alloc[j] += 1

    pts, bases, nbrs, gaps, src = [], [], [], [], []
    for c, n_new in zip(eligible, alloc):
        rows = np.flatnonzero((assign == c) & (data.labels == MINOR))
        batch = smote(data.features[rows], int(n_new), k_s, gen)
        pts.append(batch.points)
        bases.append(rows[batch.base])
        nbrs.append(rows[batch.neighbor])
        gaps.append(batch.gap)
        src.append(np.full(len(batch), c))
    logger.info("KMSMOTE clusters=%d eligible=%s alloc=%s", k_clusters, eligible, alloc.tolist())
    merged = SyntheticBatch(
        points=np.vstack(pts) if pts else np.empty((0, data.n_cols)),
        base=np.concatenate(bases),
        neighbor=np.concatenate(nbrs),
        gap=np.concatenate(gaps),
    )
    return KmSmoteResult(merged, np.concatenate(src), assign, eligible)


def smote_enn(
    data: LabeledDataset, rho: float, k_s: int, k_enn: int, rng: RngLike
) -> Tuple[LabeledDataset, np.ndarray, Dict[str, int]]:
    """
    SMOTE to ratio rho, then ENN over the combined set (both classes edited).
    Returns the edited dataset, its synthetic-row mask and the counts.
    """
    minor = data.minor_idx
    target = target_synthetic(data.n_major, data.n_minor, rho)
    batch = smote(data.features[minor], target, k_s, rng)
    combined = data.append_minor(batch.points)
    keep = enn_edit(combined, k_enn)
    out = combined.subset(keep)
    counts = {
        "synthetic": len(batch),
        "removed": combined.n_rows - len(keep),
        "minor_after": out.n_minor,
        "major_after": out.n_major,
    }
    logger.info("SMOTE_ENN %s", counts)
    return out, keep >= data.n_rows, counts
