# smotecls/models/kde.py
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import logsumexp

from smotecls.core.errors import ConfigError, DataError

BANDWIDTH_FLOOR = 1e-6
_CHUNK = 256


def scott_bandwidth(points: np.ndarray) -> np.ndarray:
    """Per-dimension Scott's rule: sample std * m^(-1/(h+4)), floored."""
    z = np.asarray(points, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] < 2:
        raise DataError("Scott's rule needs at least 2 points")
    m, h = z.shape
    factor = m ** (-1.0 / (h + 4))
    return np.maximum(z.std(axis=0, ddof=1) * factor, BANDWIDTH_FLOOR)


@dataclass(frozen=True, eq=False)
class KdeModel:
    """Gaussian product-kernel density with a diagonal bandwidth."""

    support: np.ndarray
    bandwidth: np.ndarray

    @classmethod
    def fit(cls, points: np.ndarray) -> "KdeModel":
        z = np.asarray(points, dtype=np.float64)
        return cls(support=z.copy(), bandwidth=scott_bandwidth(z))

    def __post_init__(self):
        if self.support.ndim != 2 or self.support.shape[0] < 1:
            raise DataError("KDE support must be a non-empty matrix")
        if self.bandwidth.shape != (self.support.shape[1],):
            raise DataError("bandwidth must have one entry per dimension")
        if np.any(self.bandwidth < BANDWIDTH_FLOOR):
            raise DataError("bandwidth below floor")

    def log_density(self, queries: np.ndarray) -> np.ndarray:
        q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        b = self.bandwidth
        log_norm = -np.sum(np.log(b)) - 0.5 * len(b) * math.log(2.0 * math.pi)
        out = np.empty(q.shape[0])
        m = self.support.shape[0]
        for start in range(0, q.shape[0], _CHUNK):
            diff = (q[start : start + _CHUNK, None, :] - self.support[None, :, :]) / b
            expo = -0.5 * np.sum(diff * diff, axis=2)
            out[start : start + _CHUNK] = logsumexp(expo, axis=1) - math.log(m) + log_norm
        return out

    def densities(self, queries: np.ndarray) -> np.ndarray:
        return np.maximum(np.exp(self.log_density(queries)), np.finfo(np.float64).tiny)


def density_at(model: KdeModel, z) -> float:
    return float(model.densities(np.asarray(z, dtype=np.float64).reshape(1, -1))[0])


def retain_by_quantile(
    model: KdeModel, points: np.ndarray, retain_fraction: float
) -> Tuple[np.ndarray, float, np.ndarray]:
    """
    Keep the ceil(q * m) densest points. Ranking uses a stable sort, so among
    equal densities the lower index is kept. Returns (retained indices in
    ascending order, tau, densities); tau is the highest dropped density, so
    with distinct densities the kept points are exactly those above tau.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise DataError("retain_by_quantile needs a non-empty point set")
    if not (0 < retain_fraction <= 1):
        raise ConfigError("retain fraction must be in (0, 1]")
    dens = model.densities(pts)
    m = pts.shape[0]
    n_keep = min(m, max(1, math.ceil(retain_fraction * m - 1e-9)))
    if retain_fraction >= 1.0 or n_keep == m:
        return np.arange(m), float("-inf"), dens
    order = np.argsort(-dens, kind="stable")
    tau = float(dens[order[n_keep:]].max())
    return np.sort(order[:n_keep]), tau, dens


def retain_above(
    model: KdeModel, points: np.ndarray, tau: float
) -> Tuple[np.ndarray, float, np.ndarray]:
    """Raw-density threshold variant of retain_by_quantile."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise DataError("retain_above needs a non-empty point set")
    dens = model.densities(pts)
    return np.flatnonzero(dens > tau), float(tau), dens
