# smotecls/services/simgen.py
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from smotecls.core.errors import ConfigError, DataError
from smotecls.core.rng import RngLike, as_generator
from smotecls.models.dataset import MAJOR, MINOR, LabeledDataset
from smotecls.services.sampler import FilterReport

logger = logging.getLogger("smotecls.simgen")

PROVENANCE_COLUMN = "provenance"
PROVENANCE_TAGS = ("G1", "G2", "major", "noise")
NOISE_MODES = ("remove", "fresh")


@dataclass(frozen=True)
class SimSpec:
    """
    Two Gaussian minority clusters (a large one and a small disjunct) on a
    uniform majority square, plus majority rows relabeled minor as noise.

    noise_mode "remove" takes the noise rows out of the majority draws;
    "fresh" draws them as extra uniform points.
    """

    n_g1: int = 80
    n_g2: int = 20
    n_major: int = 1500
    n_noise: int = 50
    g1_mean: Tuple[float, float] = (-0.3, 0.0)
    g2_mean: Tuple[float, float] = (0.3, 0.0)
    variance: float = 0.01
    low: float = -1.0
    high: float = 1.0
    noise_mode: str = "remove"

    def __post_init__(self):
        for name in ("n_g1", "n_g2", "n_major", "n_noise"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.noise_mode not in NOISE_MODES:
            raise ConfigError(f"noise_mode must be one of {', '.join(NOISE_MODES)}")
        if self.noise_mode == "remove" and self.n_noise > self.n_major:
            raise ConfigError(f"n_noise ({self.n_noise}) cannot exceed n_major ({self.n_major})")
        if self.variance <= 0:
            raise ConfigError("variance must be > 0")
        if not self.low < self.high:
            raise ConfigError("low must be < high")

    def to_dict(self) -> Dict:
        return asdict(self)


def generate(spec: SimSpec, rng: RngLike) -> Tuple[LabeledDataset, Tuple[str, ...]]:
    """Rows ordered G1, G2, noise, major. Returns the dataset and per-row provenance tags."""
    gen = as_generator(rng)
    sd = float(np.sqrt(spec.variance))
    g1 = gen.normal(spec.g1_mean, sd, size=(spec.n_g1, 2))
    g2 = gen.normal(spec.g2_mean, sd, size=(spec.n_g2, 2))
    major = gen.uniform(spec.low, spec.high, size=(spec.n_major, 2))
    if spec.noise_mode == "remove":
        pick = gen.choice(spec.n_major, size=spec.n_noise, replace=False)
        noise = major[np.sort(pick)]
        major = np.delete(major, pick, axis=0)
    else:
        noise = gen.uniform(spec.low, spec.high, size=(spec.n_noise, 2))

    parts = [(g1, "G1", MINOR), (g2, "G2", MINOR), (noise, "noise", MINOR), (major, "major", MAJOR)]
    x = np.vstack([p for p, _, _ in parts])
    labels = np.concatenate([np.full(len(p), lab, dtype=np.int8) for p, _, lab in parts])
    provenance = tuple(tag for p, tag, _ in parts for _ in range(len(p)))
    if x.shape[0] == 0:
        raise DataError("simulation spec produces no rows")
    data = LabeledDataset(features=x, labels=labels, feature_names=("x1", "x2"))
    logger.info(
        "SIM G1=%d G2=%d noise=%d major=%d mode=%s",
        len(g1),
        len(g2),
        len(noise),
        len(major),
        spec.noise_mode,
    )
    return data, provenance


def evaluate_filter(report: FilterReport, provenance: Sequence[str]) -> Dict[str, float]:
    """
    Noise-exclusion rate and per-cluster retention of a minority filter,
    scored against ground-truth provenance of the filtered dataset's rows.
    """
    tags = np.asarray([provenance[i] for i in report.rows])
    out: Dict[str, float] = {}
    noise = tags == "noise"
    out["noise_total"] = float(noise.sum())
    out["noise_exclusion"] = float(np.mean(~report.kept[noise])) if noise.any() else float("nan")
    for cluster in ("G1", "G2"):
        sel = tags == cluster
        out[f"{cluster}_retention"] = float(np.mean(report.kept[sel])) if sel.any() else float("nan")
    return out
