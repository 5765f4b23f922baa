# smotecls/models/cvae.py
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import xlogy

from smotecls.core.config import resolve_prior_preset
from smotecls.core.errors import ConfigError, DataError, DegenerateInputError, TrainingDivergedError
from smotecls.core.rng import RngLike, as_generator
from smotecls.models.dataset import PSEUDO_NAMES
from smotecls.models.nn import (
    DenseNet,
    MlpClassifier,
    OptimizerState,
    backward,
    fit_mlp_classifier,
    forward,
    init_dense,
    step,
)
from smotecls.models.tree import ForestModel, TreeSpec, fit_forest

logger = logging.getLogger("smotecls.cvae")

Classifier = Union[ForestModel, MlpClassifier]

# Prior locations in 2D, keyed by component name; tiled for larger latent dims.
PRIOR_LOCATIONS: Dict[str, Dict[str, Tuple[float, float]]] = {
    "default": {"M": (-1, 1), "M*": (1, 1), "m": (1, -1), "m*": (-1, -1)},
    # classes close together, difficulty levels far apart
    "spread": {"M": (-2, 0.5), "M*": (2, 0.5), "m": (-2, -0.5), "m*": (2, -0.5)},
    # x axis = difficulty, y axis = class
    "axis": {"M": (-1, 1), "M*": (1, 1), "m": (-1, -1), "m*": (1, -1)},
    # easy and hard share one location per class
    "merged": {"M": (-1, 1), "M*": (-1, 1), "m": (1, -1), "m*": (1, -1)},
}


@dataclass(frozen=True, eq=False)
class GmmPrior:
    """One isotropic Gaussian per component: N(means[c], variances[c] * I)."""

    names: Tuple[str, ...]
    means: np.ndarray  # (C, h)
    variances: np.ndarray  # (C,)
    weights: np.ndarray  # (C,)

    def __post_init__(self):
        C = len(self.names)
        if self.means.shape[0] != C or self.variances.shape != (C,) or self.weights.shape != (C,):
            raise DataError("prior arrays must have one entry per component")
        if np.any(self.variances <= 0):
            raise DataError("prior variances must be positive")
        if abs(float(self.weights.sum()) - 1.0) > 1e-9 or np.any(self.weights < 0):
            raise DataError("prior weights must form a simplex")

    @property
    def n_components(self) -> int:
        return len(self.names)

    @property
    def latent_dim(self) -> int:
        return int(self.means.shape[1])


def _tile(loc: Sequence[float], h: int) -> np.ndarray:
    return np.resize(np.asarray(loc, dtype=np.float64), h)


def empirical_weights(component_labels: np.ndarray, n_components: int) -> np.ndarray:
    counts = np.bincount(np.asarray(component_labels, dtype=np.int64), minlength=n_components)
    return counts / counts.sum()


def make_prior(
    kind: str,
    h: int,
    component_labels: np.ndarray,
    variance: float = 0.1,
    segmented: bool = False,
) -> GmmPrior:
    """
    Prior for a model configuration.

    kind: a PRIOR_LOCATIONS preset or its numbered alias (4 components over pseudo labels),
    "two_class" (M at (1,1), m at (-1,-1)) or "plain" (components at the origin
    with unit variance, i.e. no disentanglement; four of them when `segmented`).
    """
    kind = resolve_prior_preset(kind)
    if kind == "plain":
        names = PSEUDO_NAMES if segmented else ("M", "m")
        means = np.zeros((len(names), h))
        variances = np.ones(len(names))
    elif kind == "two_class":
        names = ("M", "m")
        means = np.stack([_tile((1, 1), h), _tile((-1, -1), h)])
        variances = np.full(2, variance)
    elif kind in PRIOR_LOCATIONS:
        names = PSEUDO_NAMES
        locs = PRIOR_LOCATIONS[kind]
        means = np.stack([_tile(locs[n], h) for n in names])
        variances = np.full(4, variance)
    else:
        raise ConfigError(f"unknown prior kind {kind!r}")
    weights = empirical_weights(component_labels, len(names))
    return GmmPrior(names=names, means=means, variances=variances, weights=weights)


REDUCTIONS = ("sum", "mean")


@dataclass(frozen=True)
class TrainConfig:
    beta: float = 1.0
    lr: float = 1e-3
    epochs: int = 300
    batch: int = 64
    optimizer: str = "adam"
    reduction: str = "sum"  # reconstruction summed over the batch, KL averaged

    def __post_init__(self):
        if self.reduction not in REDUCTIONS:
            raise ConfigError(f"reduction must be one of {', '.join(REDUCTIONS)}")
        if self.beta < 0:
            raise ConfigError("beta must be >= 0")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.batch < 1:
            raise ConfigError("batch must be >= 1")


@dataclass(frozen=True, eq=False)
class CvaeModel:
    """
    Encoder trunk (d -> 8h -> 4h -> 2h, relu) with one linear layer holding
    every component's (mean, log-variance) head, a decoder (h -> 2h -> 4h ->
    8h -> d), the frozen pseudo-label classifier and the mixture prior.
    """

    trunk: DenseNet
    heads: DenseNet
    decoder: DenseNet
    classifier: Classifier
    prior: GmmPrior

    @property
    def latent_dim(self) -> int:
        return self.prior.latent_dim

    @property
    def n_components(self) -> int:
        return self.prior.n_components

    @property
    def data_dim(self) -> int:
        return self.trunk.in_dim


def build_cvae(d: int, prior: GmmPrior, classifier: Classifier, rng: RngLike) -> CvaeModel:
    h = prior.latent_dim
    C = prior.n_components
    gen = as_generator(rng)
    trunk = init_dense([d, 8 * h, 4 * h, 2 * h], ["relu"] * 3, gen)
    heads = init_dense([2 * h, 2 * C * h], ["linear"], gen)
    # log-variance heads start at the prior variance of their component
    w, b = heads.params()
    b = b.copy()
    b[C * h :] = np.repeat(np.log(prior.variances), h)
    heads = heads.with_params([w, b])
    decoder = init_dense([h, 2 * h, 4 * h, 8 * h, d], ["relu"] * 3 + ["linear"], gen)
    return CvaeModel(trunk, heads, decoder, classifier, prior)


def fit_classifier(
    x: np.ndarray,
    component_labels: np.ndarray,
    kind: str = "forest",
    n_trees: int = 200,
    rng: RngLike = 0,
) -> Classifier:
    """Pseudo-label classifier; trained once and then frozen during VAE training."""
    if kind == "forest":
        d = np.asarray(x).shape[1]
        spec = TreeSpec(max_depth=None, min_leaf=1, max_features=int(np.ceil(np.sqrt(d))))
        return fit_forest(x, component_labels, n_trees=n_trees, spec=spec, rng=rng)
    if kind == "mlp":
        return fit_mlp_classifier(x, component_labels, rng=rng)
    raise ConfigError(f"unknown classifier kind {kind!r}")


def classifier_weights(model: CvaeModel, x: np.ndarray) -> np.ndarray:
    """f_eta(c | x) over all prior components (zero for classes absent in training)."""
    clf = model.classifier
    p = clf.predict_proba(np.asarray(x, dtype=np.float64))
    out = np.zeros((p.shape[0], model.n_components))
    out[:, list(clf.classes)] = p
    return out


# --------------------------------------------------------------
# KL terms
# --------------------------------------------------------------
def kl_diag_gaussians(mu_q, var_q, mu_p, var_p) -> float:
    """KL(N(mu_q, diag var_q) || N(mu_p, diag var_p)), summed over the last axis."""
    mu_q, var_q = np.asarray(mu_q, dtype=np.float64), np.asarray(var_q, dtype=np.float64)
    mu_p, var_p = np.asarray(mu_p, dtype=np.float64), np.asarray(var_p, dtype=np.float64)
    if np.any(var_q <= 0) or np.any(var_p <= 0):
        raise DataError("variances must be positive")
    terms = var_q / var_p + (mu_p - mu_q) ** 2 / var_p - 1.0 + np.log(var_p / var_q)
    return 0.5 * np.sum(terms, axis=-1)


def categorical_kl(w: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """KL(w || pi) per row with 0 * ln(0/q) = 0."""
    w = np.atleast_2d(np.asarray(w, dtype=np.float64))
    pi = np.asarray(pi, dtype=np.float64)
    if np.any((w > 0) & (pi[None, :] <= 0)):
        raise DegenerateInputError("classifier puts weight on a component with zero prior weight")
    safe_pi = np.where(pi > 0, pi, 1.0)
    return np.sum(xlogy(w, w) - xlogy(w, safe_pi[None, :]), axis=1)


def kl_upper_bound(
    mu: np.ndarray, logvar: np.ndarray, prior: GmmPrior, weights: np.ndarray
) -> float:
    """
    sum_c f(c|x) KL(q(z|x,c) || p(z|c)) + KL(f(.|x) || p(c)) for one row.

    mu, logvar: (C, h) encoder heads; weights: (C,) classifier simplex.
    """
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-9:
        raise DataError("weights must form a simplex")
    var_p = np.repeat(prior.variances[:, None], prior.latent_dim, axis=1)
    comp = kl_diag_gaussians(mu, np.exp(logvar), prior.means, var_p)
    return float(np.dot(w, comp) + categorical_kl(w, prior.weights)[0])


# --------------------------------------------------------------
# Encoder / decoder passes
# --------------------------------------------------------------
@dataclass(eq=False)
class EncoderPass:
    mu: np.ndarray  # (B, C, h)
    logvar: np.ndarray  # (B, C, h)
    trunk_cache: object
    heads_cache: object


def encode(model: CvaeModel, x: np.ndarray) -> EncoderPass:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.data_dim:
        raise DataError(f"expected {model.data_dim} columns")
    tc = forward(model.trunk, x)
    hc = forward(model.heads, tc.output)
    B, C, h = x.shape[0], model.n_components, model.latent_dim
    out = hc.output
    return EncoderPass(
        mu=out[:, : C * h].reshape(B, C, h),
        logvar=out[:, C * h :].reshape(B, C, h),
        trunk_cache=tc,
        heads_cache=hc,
    )


def draw_components(weights: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """Ancestral draw of one component per row from a (B, C) simplex."""
    cum = np.cumsum(weights, axis=1)
    u = gen.random(weights.shape[0]) * cum[:, -1]
    comps = (u[:, None] >= cum).sum(axis=1)
    return np.minimum(comps, weights.shape[1] - 1)


def sample_posterior(
    model: CvaeModel,
    x: np.ndarray,
    rng: RngLike,
    weights: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """z = mu_c(x) + sigma_c(x) * eps with c ~ f_eta(.|x). Returns (z, components)."""
    gen = as_generator(rng)
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    w = classifier_weights(model, x) if weights is None else np.atleast_2d(weights)
    enc = encode(model, x)
    comps = draw_components(w, gen)
    eps = gen.standard_normal((x.shape[0], model.latent_dim))
    rows = np.arange(x.shape[0])
    z = enc.mu[rows, comps] + np.exp(0.5 * enc.logvar[rows, comps]) * eps
    return z, comps


def embed(model: CvaeModel, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Deterministic embedding: z = mu_c(x) with c = argmax_k f_eta(k | x)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    comps = np.argmax(classifier_weights(model, x), axis=1)
    enc = encode(model, x)
    return enc.mu[np.arange(x.shape[0]), comps], comps


def decode(model: CvaeModel, z: np.ndarray) -> np.ndarray:
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if z.shape[1] != model.latent_dim:
        raise DataError(f"latent vectors must have length {model.latent_dim}")
    return forward(model.decoder, z).output


def generate(
    model: CvaeModel, n: int, components: Sequence[int], rng: RngLike
) -> np.ndarray:
    """Decode draws from the prior restricted to `components` (weighted by prior weight)."""
    gen = as_generator(rng)
    comps = np.asarray(list(components), dtype=np.int64)
    w = model.prior.weights[comps]
    w = np.ones(len(comps)) / len(comps) if w.sum() <= 0 else w / w.sum()
    pick = comps[gen.choice(len(comps), size=n, p=w)]
    sd = np.sqrt(model.prior.variances[pick])[:, None]
    z = model.prior.means[pick] + sd * gen.standard_normal((n, model.latent_dim))
    return decode(model, z) if n else np.empty((0, model.data_dim))


# --------------------------------------------------------------
# Loss and gradients
# --------------------------------------------------------------
@dataclass(eq=False)
class LossResult:
    loss: float
    reconstruction: float
    kl_components: float
    kl_categorical: float
    beta: float
    grads: Dict[str, List[np.ndarray]]

    @property
    def per_row(self) -> float:
        """Mean per-row objective, independent of the batch reduction."""
        return self.reconstruction + self.beta * (self.kl_components + self.kl_categorical)


def loss_with_noise(
    model: CvaeModel,
    x: np.ndarray,
    weights: np.ndarray,
    beta: float,
    components: np.ndarray,
    eps: np.ndarray,
    reduction: str = "mean",
) -> LossResult:
    """
    L1 reconstruction + beta * KL upper bound, for fixed component draws and
    reparameterization noise, with exact gradients for the trunk, heads and
    decoder. The categorical KL is reported but carries no gradient (the
    classifier is frozen).

    reduction="mean" averages both terms over the batch; "sum" sums the
    reconstruction over the batch and adds the batch-mean KL once.
    """
    if reduction not in REDUCTIONS:
        raise ConfigError(f"unknown reduction {reduction!r}")
    x = np.asarray(x, dtype=np.float64)
    B = x.shape[0]
    if B == 0:
        raise DataError("empty batch")
    prior = model.prior
    rows = np.arange(B)
    enc = encode(model, x)
    mu, lv = enc.mu, enc.logvar
    sigma = np.exp(0.5 * lv[rows, components])
    z = mu[rows, components] + sigma * eps

    dc = forward(model.decoder, z)
    resid = x - dc.output
    rec = np.abs(resid).sum(axis=1)

    var_p = prior.variances[None, :, None]
    var_q = np.exp(lv)
    comp_kl = 0.5 * np.sum(
        var_q / var_p + (prior.means[None] - mu) ** 2 / var_p - 1.0 + np.log(var_p) - lv, axis=2
    )  # (B, C)
    kl_w = np.sum(weights * comp_kl, axis=1)
    kl_cat = categorical_kl(weights, prior.weights)
    kl_mean = float(np.mean(kl_w + kl_cat))
    rec_scale = 1.0 if reduction == "sum" else 1.0 / B
    total = float(rec.sum() * rec_scale + beta * kl_mean)
    if not np.isfinite(total):
        raise TrainingDivergedError("non-finite loss", diagnostics={"batch": B})

    # decoder
    g_out = -np.sign(resid) * rec_scale
    dec_grads, gz = backward(model.decoder, dc, g_out)

    # heads: reparameterization path of the sampled component + KL of every component
    scale = beta / B
    gmu = scale * weights[:, :, None] * (mu - prior.means[None]) / var_p
    glv = scale * weights[:, :, None] * 0.5 * (var_q / var_p - 1.0)
    gmu[rows, components] += gz
    glv[rows, components] += gz * eps * 0.5 * sigma
    g_heads = np.concatenate([gmu.reshape(B, -1), glv.reshape(B, -1)], axis=1)
    head_grads, g_trunk = backward(model.heads, enc.heads_cache, g_heads)
    trunk_grads, _ = backward(model.trunk, enc.trunk_cache, g_trunk)

    return LossResult(
        loss=total,
        reconstruction=float(rec.mean()),
        kl_components=float(kl_w.mean()),
        kl_categorical=float(kl_cat.mean()),
        beta=float(beta),
        grads={"trunk": trunk_grads, "heads": head_grads, "decoder": dec_grads},
    )


def loss(
    model: CvaeModel,
    batch: np.ndarray,
    beta: float,
    rng: RngLike,
    weights: Optional[np.ndarray] = None,
    reduction: str = "mean",
) -> LossResult:
    gen = as_generator(rng)
    x = np.asarray(batch, dtype=np.float64)
    w = classifier_weights(model, x) if weights is None else weights
    comps = draw_components(w, gen)
    eps = gen.standard_normal((x.shape[0], model.latent_dim))
    return loss_with_noise(model, x, w, beta, comps, eps, reduction=reduction)


def train(
    model: CvaeModel,
    x: np.ndarray,
    config: TrainConfig,
    rng: RngLike,
) -> Tuple[CvaeModel, List[float]]:
    """
    Minibatch training with the classifier frozen. Returns the trained model
    and the per-epoch mean per-row objective.
    """
    x = np.asarray(x, dtype=np.float64)
    if config.epochs == 0:
        return model, []
    gen = as_generator(rng)
    weights = classifier_weights(model, x)
    states = {name: OptimizerState(config.optimizer, config.lr) for name in ("trunk", "heads", "decoder")}
    n = x.shape[0]
    trace: List[float] = []
    for epoch in range(config.epochs):
        order = gen.permutation(n)
        acc = 0.0
        for start in range(0, n, config.batch):
            b = order[start : start + config.batch]
            try:
                res = loss(model, x[b], config.beta, gen, weights=weights[b], reduction=config.reduction)
                model = replace(
                    model,
                    trunk=step(states["trunk"], model.trunk, res.grads["trunk"]),
                    heads=step(states["heads"], model.heads, res.grads["heads"]),
                    decoder=step(states["decoder"], model.decoder, res.grads["decoder"]),
                )
            except TrainingDivergedError as e:
                raise TrainingDivergedError("CVAE training diverged", epoch=epoch, diagnostics=e.diagnostics)
            acc += res.per_row * len(b)
        trace.append(acc / n)
        if not np.isfinite(trace[-1]):
            raise TrainingDivergedError("CVAE training diverged", epoch=epoch)
        if epoch == 0 or (epoch + 1) % 50 == 0 or epoch + 1 == config.epochs:
            logger.info("CVAE epoch=%d loss=%.5f", epoch + 1, trace[-1])
    return model, trace
