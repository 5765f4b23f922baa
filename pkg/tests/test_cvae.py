import numpy as np
import pytest
from scipy.stats import norm, qmc

from smotecls.core.errors import ConfigError, DataError, DegenerateInputError
from smotecls.core.rng import RngStream
from smotecls.models.cvae import (
    TrainConfig,
    build_cvae,
    categorical_kl,
    decode,
    embed,
    encode,
    fit_classifier,
    generate,
    kl_diag_gaussians,
    kl_upper_bound,
    loss_with_noise,
    make_prior,
    sample_posterior,
    train,
)
from smotecls.models.tree import fit_forest
from smotecls.services.neighbors import relabel
from smotecls.services.preprocess import standardize

FOUR = np.repeat(np.arange(4), 5)


def _model(d, h, seed=0, classifier=None):
    prior = make_prior("default", h, FOUR, variance=0.1)
    return build_cvae(d, prior, classifier, RngStream(seed))


def _replace_params(net, fill):
    return net.with_params([fill(i, p) for i, p in enumerate(net.params())])


# ---------- KL terms ----------


def test_kl_identical_gaussians_is_zero():
    assert kl_diag_gaussians([0.3, -1.0], [0.5, 2.0], [0.3, -1.0], [0.5, 2.0]) == pytest.approx(0.0)


def test_kl_unit_shift_is_half():
    assert kl_diag_gaussians([1.0], [1.0], [0.0], [1.0]) == pytest.approx(0.5)


@pytest.mark.parametrize("seed", range(50))
def test_kl_matches_monte_carlo(seed):
    rng = np.random.default_rng(seed)
    mu_q, mu_p = rng.normal(size=2), rng.normal(size=2)
    var_q, var_p = rng.uniform(0.3, 2.0, 2), rng.uniform(0.3, 2.0, 2)
    # 2**17 scrambled Sobol normals; their error sits well inside the iid standard error
    u = qmc.Sobol(d=2, scramble=True, seed=seed).random_base2(m=17)
    z = mu_q + np.sqrt(var_q) * norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))

    def log_normal(z, m, v):
        return -0.5 * np.sum((z - m) ** 2 / v + np.log(2 * np.pi * v), axis=1)

    diff = log_normal(z, mu_q, var_q) - log_normal(z, mu_p, var_p)
    se = diff.std() / np.sqrt(len(diff))
    assert abs(diff.mean() - kl_diag_gaussians(mu_q, var_q, mu_p, var_p)) < 3 * se + 1e-9


def test_kl_rejects_nonpositive_variance():
    with pytest.raises(DataError):
        kl_diag_gaussians([0.0], [-1.0], [0.0], [1.0])


def test_upper_bound_is_zero_when_posterior_matches_prior():
    prior = make_prior("default", 2, FOUR)
    logvar = np.log(np.repeat(prior.variances[:, None], 2, axis=1))
    assert kl_upper_bound(prior.means, logvar, prior, prior.weights) == pytest.approx(0.0, abs=1e-12)


def test_upper_bound_with_one_hot_weights():
    prior = make_prior("default", 2, FOUR)
    rng = np.random.default_rng(1)
    mu, logvar = rng.normal(size=(4, 2)), rng.normal(scale=0.3, size=(4, 2))
    w = np.eye(4)[2]
    expect = kl_diag_gaussians(mu[2], np.exp(logvar[2]), prior.means[2], np.full(2, prior.variances[2]))
    expect += np.log(1.0 / prior.weights[2])
    assert kl_upper_bound(mu, logvar, prior, w) == pytest.approx(expect)


def test_categorical_kl_degenerate_prior():
    with pytest.raises(DegenerateInputError):
        categorical_kl(np.array([[0.5, 0.5]]), np.array([1.0, 0.0]))
    np.testing.assert_allclose(categorical_kl(np.array([[1.0, 0.0]]), np.array([1.0, 0.0])), [0.0])


# ---------- prior ----------


def test_prior_layouts():
    p = make_prior("default", 2, FOUR)
    assert p.names == ("M", "M*", "m", "m*")
    np.testing.assert_allclose(p.means, [[-1, 1], [1, 1], [1, -1], [-1, -1]])
    np.testing.assert_allclose(p.weights, 0.25)

    tiled = make_prior("default", 4, FOUR)
    np.testing.assert_allclose(tiled.means[0], [-1, 1, -1, 1])

    two = make_prior("two_class", 2, np.array([0, 0, 0, 1]))
    np.testing.assert_allclose(two.means, [[1, 1], [-1, -1]])
    np.testing.assert_allclose(two.weights, [0.75, 0.25])

    plain = make_prior("plain", 3, FOUR, segmented=True)
    assert plain.n_components == 4
    np.testing.assert_array_equal(plain.means, 0.0)
    np.testing.assert_array_equal(plain.variances, 1.0)

    with pytest.raises(ConfigError):
        make_prior("circle", 2, FOUR)


def test_prior_presets():
    merged = make_prior("merged", 2, FOUR)
    np.testing.assert_array_equal(merged.means[0], merged.means[1])
    np.testing.assert_array_equal(merged.means[2], merged.means[3])

    axis = make_prior("axis", 2, FOUR)
    # easy components share x, classes share y
    assert axis.means[0][0] == axis.means[2][0] and axis.means[1][0] == axis.means[3][0]
    assert axis.means[0][1] == axis.means[1][1] and axis.means[2][1] == axis.means[3][1]

    spread = make_prior("spread", 2, FOUR)
    d = lambda a, b: np.linalg.norm(spread.means[a] - spread.means[b])  # noqa: E731
    assert d(0, 2) < d(0, 1)


# ---------- loss and gradients ----------


def test_loss_is_zero_for_perfect_reconstruction_on_the_prior():
    d, h = 3, 2
    model = _model(d, h)
    x = np.array([[0.5, -1.0, 2.0]] * 4)
    prior = model.prior
    head_bias = np.concatenate([prior.means.ravel(), np.repeat(np.log(prior.variances), h)])
    last = len(model.decoder.params()) - 1
    heads = _replace_params(model.heads, lambda i, p: head_bias if i == 1 else np.zeros_like(p))
    decoder = _replace_params(model.decoder, lambda i, p: x[0].copy() if i == last else np.zeros_like(p))
    model = type(model)(model.trunk, heads, decoder, model.classifier, prior)

    w = np.tile(prior.weights, (4, 1))
    res = loss_with_noise(model, x, w, 1.0, np.array([0, 1, 2, 3]), np.random.default_rng(0).normal(size=(4, h)))
    assert res.loss == pytest.approx(0.0, abs=1e-10)


def test_beta_zero_is_reconstruction_only():
    model = _model(4, 2)
    rng = np.random.default_rng(2)
    x = rng.normal(size=(6, 4))
    w = rng.dirichlet(np.ones(4), size=6)
    res = loss_with_noise(model, x, w, 0.0, rng.integers(0, 4, 6), rng.normal(size=(6, 2)))
    assert res.loss == pytest.approx(res.reconstruction)


@pytest.mark.parametrize("seed", range(20))
def test_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    d, h = int(rng.integers(2, 21)), int(rng.choice([2, 4]))
    beta = float(rng.choice([0.0, 0.5, 1.0, 2.0]))
    model = _model(d, h, seed=d)
    B = 5
    x = rng.normal(size=(B, d))
    w = rng.dirichlet(np.ones(4), size=B)
    comps = rng.integers(0, 4, B)
    eps = rng.normal(size=(B, h))
    res = loss_with_noise(model, x, w, beta, comps, eps)

    step = 1e-6
    for part in ("trunk", "heads", "decoder"):
        net = getattr(model, part)
        params = net.params()
        for j, p in enumerate(params):
            flat = rng.choice(p.size, size=min(p.size, 12), replace=False)
            for f in flat:
                ix = np.unravel_index(f, p.shape)
                vals = []
                for sign in (1.0, -1.0):
                    moved = [q.copy() for q in params]
                    moved[j][ix] += sign * step
                    other = type(model)(
                        **{
                            "trunk": model.trunk,
                            "heads": model.heads,
                            "decoder": model.decoder,
                            "classifier": model.classifier,
                            "prior": model.prior,
                            part: net.with_params(moved),
                        }
                    )
                    vals.append(loss_with_noise(other, x, w, beta, comps, eps).loss)
                fd = (vals[0] - vals[1]) / (2 * step)
                np.testing.assert_allclose(res.grads[part][j][ix], fd, rtol=1e-4, atol=1e-6)


def test_sum_reduction_sums_reconstruction_and_averages_kl():
    model = _model(3, 2)
    rng = np.random.default_rng(7)
    B = 8
    x = rng.normal(size=(B, 3))
    w = rng.dirichlet(np.ones(4), size=B)
    comps, eps = rng.integers(0, 4, B), rng.normal(size=(B, 2))
    mean = loss_with_noise(model, x, w, 0.5, comps, eps, reduction="mean")
    summed = loss_with_noise(model, x, w, 0.5, comps, eps, reduction="sum")
    kl = mean.kl_components + mean.kl_categorical
    assert summed.loss == pytest.approx(B * mean.reconstruction + 0.5 * kl)
    assert summed.per_row == pytest.approx(mean.loss)
    for g_sum, g_mean in zip(summed.grads["decoder"], mean.grads["decoder"]):
        np.testing.assert_allclose(g_sum, B * g_mean)
    with pytest.raises(ConfigError):
        loss_with_noise(model, x, w, 0.5, comps, eps, reduction="max")


@pytest.mark.parametrize("seed", range(4))
def test_sum_reduction_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(100 + seed)
    d, h, B = 5, 2, 6
    model = _model(d, h, seed=seed)
    x = rng.normal(size=(B, d))
    w = rng.dirichlet(np.ones(4), size=B)
    comps, eps = rng.integers(0, 4, B), rng.normal(size=(B, h))
    res = loss_with_noise(model, x, w, 1.0, comps, eps, reduction="sum")
    step = 1e-6
    for part in ("trunk", "heads", "decoder"):
        net = getattr(model, part)
        params = net.params()
        for j, p in enumerate(params):
            for f in rng.choice(p.size, size=min(p.size, 6), replace=False):
                ix = np.unravel_index(f, p.shape)
                vals = []
                for sign in (1.0, -1.0):
                    moved = [q.copy() for q in params]
                    moved[j][ix] += sign * step
                    parts = {"trunk": model.trunk, "heads": model.heads, "decoder": model.decoder}
                    parts[part] = net.with_params(moved)
                    other = type(model)(classifier=model.classifier, prior=model.prior, **parts)
                    vals.append(loss_with_noise(other, x, w, 1.0, comps, eps, reduction="sum").loss)
                fd = (vals[0] - vals[1]) / (2 * step)
                np.testing.assert_allclose(res.grads[part][j][ix], fd, rtol=1e-4, atol=1e-5)


def test_log_variance_heads_start_at_prior_variance():
    model = _model(3, 2)
    bias = model.heads.params()[1]
    C, h = model.n_components, model.latent_dim
    np.testing.assert_array_equal(bias[: C * h], 0.0)
    np.testing.assert_allclose(bias[C * h :], np.log(0.1))


# ---------- sampling, embedding, decoding ----------


def _collapsed(model, logvar=-80.0):
    h, C = model.latent_dim, model.n_components
    bias = np.concatenate([model.prior.means.ravel(), np.full(C * h, logvar)])
    heads = _replace_params(model.heads, lambda i, p: bias if i == 1 else np.zeros_like(p))
    return type(model)(model.trunk, heads, model.decoder, model.classifier, model.prior)


def test_sample_posterior_collapses_to_mean():
    model = _collapsed(_model(3, 2))
    x = np.random.default_rng(0).normal(size=(10, 3))
    z, comps = sample_posterior(model, x, RngStream(1), weights=np.tile(model.prior.weights, (10, 1)))
    np.testing.assert_array_equal(z, model.prior.means[comps])


def test_sample_posterior_component_frequencies():
    model = _model(2, 2)
    n = 20_000
    w = np.tile([0.1, 0.2, 0.3, 0.4], (n, 1))
    _, comps = sample_posterior(model, np.zeros((n, 2)), RngStream(3), weights=w)
    np.testing.assert_allclose(np.bincount(comps, minlength=4) / n, [0.1, 0.2, 0.3, 0.4], atol=0.02)


def test_embed_uses_argmax_component_and_is_deterministic():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(12, 3))
    clf = fit_forest(x, np.full(12, 3), n_trees=3, rng=RngStream(0))
    model = _model(3, 2, classifier=clf)
    z1, c1 = embed(model, x)
    z2, _ = embed(model, x)
    np.testing.assert_array_equal(c1, 3)
    np.testing.assert_array_equal(z1, z2)
    np.testing.assert_allclose(z1, encode(model, x).mu[:, 3])


def test_decode_with_zero_weights_returns_bias_and_generate_shapes():
    model = _model(3, 2)
    last = len(model.decoder.params()) - 1
    bias = np.array([1.0, -2.0, 0.5])
    decoder = _replace_params(model.decoder, lambda i, p: bias if i == last else np.zeros_like(p))
    model = type(model)(model.trunk, model.heads, decoder, model.classifier, model.prior)
    np.testing.assert_allclose(decode(model, np.random.default_rng(0).normal(size=(5, 2))), np.tile(bias, (5, 1)))
    assert generate(model, 7, [2, 3], RngStream(0)).shape == (7, 3)
    assert generate(model, 0, [2, 3], RngStream(0)).shape == (0, 3)
    with pytest.raises(DataError):
        decode(model, np.zeros((2, 3)))


# ---------- training ----------


def _trainable(blobs, seed=0):
    data, _ = standardize(blobs)
    pseudo = relabel(data, 5)
    prior = make_prior("default", 2, pseudo.pseudo_labels)
    clf = fit_classifier(data.features, pseudo.pseudo_labels, "forest", n_trees=10, rng=RngStream(seed))
    return data.features, build_cvae(data.n_cols, prior, clf, RngStream(seed))


def test_zero_epochs_returns_initial_model(blobs):
    x, model = _trainable(blobs)
    trained, trace = train(model, x, TrainConfig(epochs=0), RngStream(0))
    assert trained is model and trace == []


def test_training_is_deterministic_and_lowers_loss(blobs):
    x, model = _trainable(blobs)
    cfg = TrainConfig(epochs=40, batch=32, lr=1e-2)
    a, trace_a = train(model, x, cfg, RngStream(5))
    b, trace_b = train(model, x, cfg, RngStream(5))
    assert trace_a == trace_b
    for pa, pb in zip(a.decoder.params(), b.decoder.params()):
        np.testing.assert_array_equal(pa, pb)
    assert trace_a[-1] < trace_a[0]


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(beta=-1.0)
    with pytest.raises(ConfigError):
        TrainConfig(batch=0)
    with pytest.raises(ConfigError):
        TrainConfig(reduction="median")
    assert TrainConfig().reduction == "sum"
