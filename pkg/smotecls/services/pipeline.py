# smotecls/services/pipeline.py
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from smotecls.core.config import ABLATIONS, STRATEGIES, Settings
from smotecls.core.errors import ConfigError, InsufficientSupportError
from smotecls.core.rng import RngStream
from smotecls.models.cvae import (
    CvaeModel,
    TrainConfig,
    build_cvae,
    decode,
    embed,
    fit_classifier,
    generate,
    make_prior,
    train,
)
from smotecls.models.dataset import PSEUDO_NAMES, LabeledDataset, PseudoLabeledDataset
from smotecls.services.neighbors import relabel
from smotecls.services.sampler import (
    FilterConfig,
    FilterReport,
    bsmote,
    ddhs_filter,
    dfbs_filter,
    group_adaptive_filter,
    kmsmote,
    smote,
    smote_enn,
    target_synthetic,
)

logger = logging.getLogger("smotecls.pipeline")

# sub-stream tags inside one oversampling call
_TAG_F_ETA, _TAG_INIT, _TAG_TRAIN, _TAG_SMOTE = 1, 2, 3, 4

# (disentangle, segment, adaptive) per ablation row
ABLATION_SWITCHES: Dict[str, tuple] = {
    "wo_dis": (False, False, False),
    "wo_seg": (True, False, False),
    "wo_af": (True, True, False),
    "smote_cls": (True, True, True),
}


@dataclass(frozen=True)
class SmoteClsConfig:
    """Everything one latent-model run needs, resolved from Settings."""

    k_knn: int = 5
    k_smote: int = 5
    rho: float = 1.0
    filter: FilterConfig = field(default_factory=FilterConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    latent_dim: Optional[int] = None
    f_eta: str = "forest"
    f_eta_trees: int = 200
    prior_preset: str = "default"
    prior_variance: float = 0.1
    ddhs_fraction: float = 0.75

    @classmethod
    def from_settings(cls, settings: Settings, ablation: str = "smote_cls") -> "SmoteClsConfig":
        if ablation not in ABLATION_SWITCHES:
            raise ConfigError(f"unknown ablation {ablation!r}; choose from {', '.join(ABLATIONS)}")
        dis, seg, adaptive = ABLATION_SWITCHES[ablation]
        return cls(
            k_knn=settings.k_knn,
            k_smote=settings.k_smote,
            rho=settings.rho,
            filter=FilterConfig(
                q_easy=settings.q_easy,
                q_hard=settings.q_hard,
                tau_easy=settings.tau_easy,
                tau_hard=settings.tau_hard,
                disentangle=dis,
                segment=seg,
                adaptive=adaptive,
                naive_fraction=settings.naive_fraction,
            ),
            train=TrainConfig(
                beta=settings.beta,
                lr=settings.lr,
                epochs=settings.epochs,
                batch=settings.batch,
                optimizer=settings.optimizer,
                reduction=settings.loss_reduction,
            ),
            latent_dim=settings.latent_dim,
            f_eta=settings.f_eta,
            f_eta_trees=settings.f_eta_trees,
            prior_preset=settings.prior_preset,
            prior_variance=settings.prior_variance,
            ddhs_fraction=settings.ddhs_fraction,
        )

    def resolved_latent_dim(self, n_features: int) -> int:
        if self.latent_dim is not None:
            return int(self.latent_dim)
        return 4 if n_features > 90 else 2

    @property
    def prior_kind(self) -> str:
        f = self.filter
        if not f.disentangle:
            return "plain"
        return self.prior_preset if f.segment else "two_class"


@dataclass(eq=False)
class LatentFit:
    model: CvaeModel
    pseudo: PseudoLabeledDataset
    z: np.ndarray  # embedding of every row
    components: np.ndarray  # argmax component per row
    trace: List[float]


def fit_latent_model(data: LabeledDataset, config: SmoteClsConfig, rng: RngStream) -> LatentFit:
    """
    Relabel, fit the frozen pseudo-label classifier, build the mixture prior,
    train the VAE and embed every row.
    """
    pseudo = relabel(data, config.k_knn)
    f = config.filter
    # without segmentation the model only sees the class labels
    component_labels = pseudo.pseudo_labels if f.segment else data.labels
    h = config.resolved_latent_dim(data.n_cols)
    prior = make_prior(
        config.prior_kind, h, component_labels, variance=config.prior_variance, segmented=f.segment
    )
    clf = fit_classifier(
        data.features, component_labels, kind=config.f_eta, n_trees=config.f_eta_trees, rng=rng.spawn(_TAG_F_ETA)
    )
    model = build_cvae(data.n_cols, prior, clf, rng.spawn(_TAG_INIT))
    logger.info(
        "CVAE prior=%s components=%d h=%d d=%d f_eta=%s",
        config.prior_kind,
        prior.n_components,
        h,
        data.n_cols,
        config.f_eta,
    )
    model, trace = train(model, data.features, config.train, rng.spawn(_TAG_TRAIN))
    z, comps = embed(model, data.features)
    return LatentFit(model=model, pseudo=pseudo, z=z, components=comps, trace=trace)


def latent_frame(data: LabeledDataset, fit: LatentFit, report: Optional[FilterReport]) -> pd.DataFrame:
    """Per-row latent export: z_1..z_h, y, pseudo label, density, kept (blank for majors)."""
    h = fit.z.shape[1]
    df = pd.DataFrame(fit.z, columns=[f"z_{j + 1}" for j in range(h)])
    df["y"] = [data.token_of(i) for i in range(data.n_rows)]
    df["pseudo"] = [PSEUDO_NAMES[p] for p in fit.pseudo.pseudo_labels]
    density = pd.Series(np.nan, index=df.index, dtype="float64")
    kept = pd.Series(pd.NA, index=df.index, dtype="object")
    if report is not None:
        density.iloc[report.rows] = report.density
        kept.iloc[report.rows] = [int(k) for k in report.kept]
    df["density"] = density
    df["kept"] = kept
    return df


@dataclass(eq=False)
class OversampleResult:
    """Augmented data (originals first), its synthetic-row mask and diagnostics."""

    strategy: str
    augmented: LabeledDataset
    synthetic: np.ndarray  # bool per augmented row
    counts: Dict[str, int] = field(default_factory=dict)
    report: Optional[FilterReport] = None
    latent: Optional[pd.DataFrame] = None
    model: Optional[CvaeModel] = None
    trace: List[float] = field(default_factory=list)

    @property
    def n_synthetic(self) -> int:
        return int(self.synthetic.sum())


def _merge(strategy: str, data: LabeledDataset, points: np.ndarray, **extra) -> OversampleResult:
    augmented = data.append_minor(points)
    mask = np.zeros(augmented.n_rows, dtype=bool)
    mask[data.n_rows :] = True
    counts = {
        "synthetic": int(mask.sum()),
        "minor_after": augmented.n_minor,
        "major_after": augmented.n_major,
    }
    return OversampleResult(strategy, augmented, mask, counts, **extra)


def smote_cls_pipeline(
    data: LabeledDataset, config: SmoteClsConfig, rng: RngStream, strategy: str = "smote_cls"
) -> OversampleResult:
    """
    Relabel -> f_eta -> VAE -> embed -> group filter -> data-space SMOTE on
    the retained minors. Synthetic rows are appended to the original data and
    labeled minor; the minority is topped up to ceil(rho * n_major).
    """
    data.require_both_classes()
    fit = fit_latent_model(data, config, rng)
    minor = data.minor_idx
    report = group_adaptive_filter(
        fit.z[minor], fit.pseudo.pseudo_labels[minor], config.filter, rows=minor
    )
    retained = report.retained
    if len(retained) < 2:
        raise InsufficientSupportError("filtering removed too much; lower q or disable filtering")
    target = target_synthetic(data.n_major, data.n_minor, config.rho)
    batch = smote(data.features[retained], target, config.k_smote, rng.spawn(_TAG_SMOTE))
    logger.info(
        "SMOTE strategy=%s retained=%d/%d synthetic=%d", strategy, len(retained), len(minor), len(batch)
    )
    return _merge(
        strategy,
        data,
        batch.points,
        report=report,
        latent=latent_frame(data, fit, report),
        model=fit.model,
        trace=fit.trace,
    )


def _latent_baseline(
    strategy: str, data: LabeledDataset, config: SmoteClsConfig, rng: RngStream
) -> OversampleResult:
    data.require_both_classes()
    fit = fit_latent_model(data, config, rng)
    minor = data.minor_idx
    target = target_synthetic(data.n_major, data.n_minor, config.rho)
    sub = rng.spawn(_TAG_SMOTE)

    if strategy == "dfbs_filter_smote":
        keep = dfbs_filter(fit.z, data.labels)
        if len(keep) < 2:
            raise InsufficientSupportError("insufficient minority support after centroid filtering")
        points = smote(data.features[keep], target, config.k_smote, sub).points
    elif strategy == "ddhs_filter_smote":
        pos = ddhs_filter(fit.z[minor], config.ddhs_fraction)
        keep = minor[pos]
        if len(keep) < 2:
            raise InsufficientSupportError("insufficient minority support after density filtering")
        points = smote(data.features[keep], target, config.k_smote, sub).points
    elif strategy == "latent_smote_decode":
        z_new = smote(fit.z[minor], target, config.k_smote, sub).points
        points = decode(fit.model, z_new) if len(z_new) else np.empty((0, data.n_cols))
    elif strategy == "cvae_generate":
        names = fit.model.prior.names
        comps = [i for i, n in enumerate(names) if n in ("m", "m*")]
        points = generate(fit.model, target, comps, sub)
    else:
        raise ConfigError(f"unknown latent strategy {strategy!r}")
    logger.info("SMOTE strategy=%s synthetic=%d", strategy, len(points))
    return _merge(strategy, data, points, latent=latent_frame(data, fit, None), model=fit.model, trace=fit.trace)


def oversample(
    data: LabeledDataset, strategy: str, settings: Settings, rng: RngStream
) -> OversampleResult:
    """Run one strategy (or ablation row) on a training set."""
    if strategy not in STRATEGIES and strategy not in ABLATIONS:
        raise ConfigError(
            f"unknown strategy {strategy!r}; valid: {', '.join(STRATEGIES + ABLATIONS[:-1])}"
        )
    data.require_both_classes()
    rho, k_s = settings.rho, settings.k_smote
    target = target_synthetic(data.n_major, data.n_minor, rho)
    minor = data.minor_idx

    if strategy == "base":
        return _merge(strategy, data, np.empty((0, data.n_cols)))
    if strategy == "smote":
        return _merge(strategy, data, smote(data.features[minor], target, k_s, rng.spawn(_TAG_SMOTE)).points)
    if strategy == "bsmote":
        return _merge(strategy, data, bsmote(data, rho, k_s, rng.spawn(_TAG_SMOTE)).points)
    if strategy == "kmsmote":
        res = kmsmote(data, settings.km_clusters, settings.km_threshold, target, k_s, rng.spawn(_TAG_SMOTE))
        return _merge(strategy, data, res.batch.points)
    if strategy == "smote_enn":
        out, mask, counts = smote_enn(data, rho, k_s, settings.k_enn, rng.spawn(_TAG_SMOTE))
        return OversampleResult(strategy, out, mask, counts)
    if strategy in ABLATION_SWITCHES:
        return smote_cls_pipeline(data, SmoteClsConfig.from_settings(settings, strategy), rng, strategy)

    return _latent_baseline(strategy, data, SmoteClsConfig.from_settings(settings), rng)
