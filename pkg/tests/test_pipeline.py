from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from smotecls.core.config import STRATEGIES
from smotecls.core.errors import ConfigError, InsufficientSupportError
from smotecls.core.rng import RngStream
from smotecls.models.dataset import MINOR
from smotecls.services.pipeline import (
    SmoteClsConfig,
    fit_latent_model,
    oversample,
    smote_cls_pipeline,
)


@pytest.mark.parametrize(
    "ablation, switches, prior_kind",
    [
        ("wo_dis", (False, False, False), "plain"),
        ("wo_seg", (True, False, False), "two_class"),
        ("wo_af", (True, True, False), "default"),
        ("smote_cls", (True, True, True), "default"),
    ],
)
def test_ablation_switches(fast_settings, ablation, switches, prior_kind):
    cfg = SmoteClsConfig.from_settings(fast_settings, ablation)
    f = cfg.filter
    assert (f.disentangle, f.segment, f.adaptive) == switches
    assert cfg.prior_kind == prior_kind
    assert cfg.train.epochs == fast_settings.epochs


def test_unknown_ablation_and_strategy(fast_settings, blobs):
    with pytest.raises(ConfigError):
        SmoteClsConfig.from_settings(fast_settings, "wo_everything")
    with pytest.raises(ConfigError, match="unknown strategy"):
        oversample(blobs, "adasyn", fast_settings, RngStream(0))


def test_latent_fit_embeds_every_row(fast_settings, small_sim):
    data, _ = small_sim
    fit = fit_latent_model(data, SmoteClsConfig.from_settings(fast_settings), RngStream(0))
    assert fit.z.shape == (data.n_rows, 2)
    assert len(fit.trace) == fast_settings.epochs
    assert fit.model.prior.n_components == 4
    assert sum(fit.pseudo.counts().values()) == data.n_rows


def test_smote_cls_balances_and_keeps_originals(fast_settings, small_sim):
    data, _ = small_sim
    res = smote_cls_pipeline(data, SmoteClsConfig.from_settings(fast_settings), RngStream(1))
    out = res.augmented
    np.testing.assert_array_equal(out.features[: data.n_rows], data.features)
    assert out.n_minor == data.n_major
    assert res.n_synthetic == data.n_major - data.n_minor
    assert np.all(out.labels[res.synthetic] == MINOR)

    retained = res.report.retained
    assert set(retained.tolist()) <= set(data.minor_idx.tolist())
    # synthetic rows stay inside the box spanned by the retained minors
    lo, hi = data.features[retained].min(axis=0), data.features[retained].max(axis=0)
    synth = out.features[res.synthetic]
    assert np.all(synth >= lo - 1e-9) and np.all(synth <= hi + 1e-9)


def test_latent_export_frame(fast_settings, small_sim):
    data, _ = small_sim
    res = oversample(data, "smote_cls", fast_settings, RngStream(2))
    df = res.latent
    assert list(df.columns) == ["z_1", "z_2", "y", "pseudo", "density", "kept"]
    assert len(df) == data.n_rows
    majors = data.major_idx
    assert df["density"].iloc[majors].isna().all()
    assert df["kept"].iloc[majors].isna().all()
    minors = df.iloc[data.minor_idx]
    assert set(minors["pseudo"]) <= {"m", "m*"}
    assert int(pd.to_numeric(minors["kept"]).sum()) == len(res.report.retained)


def test_small_rho_adds_nothing(fast_settings, blobs):
    settings = replace(fast_settings, rho=0.01)
    res = oversample(blobs, "smote_cls", settings, RngStream(0))
    assert res.n_synthetic == 0
    assert res.augmented.n_rows == blobs.n_rows


def test_over_filtering_raises(fast_settings, blobs):
    settings = replace(fast_settings, tau_easy=1e300, tau_hard=1e300)
    with pytest.raises(InsufficientSupportError, match="filtering removed too much"):
        oversample(blobs, "smote_cls", settings, RngStream(0))


def test_same_stream_same_output(fast_settings, blobs):
    a = oversample(blobs, "smote_cls", fast_settings, RngStream(3))
    b = oversample(blobs, "smote_cls", fast_settings, RngStream(3))
    np.testing.assert_array_equal(a.augmented.features, b.augmented.features)


@pytest.mark.parametrize("strategy", [s for s in STRATEGIES if s not in ("base", "smote_enn")])
def test_every_strategy_balances_the_training_set(fast_settings, blobs, strategy):
    res = oversample(blobs, strategy, fast_settings, RngStream(4))
    out = res.augmented
    assert out.n_minor == blobs.n_major
    assert out.n_major == blobs.n_major
    np.testing.assert_array_equal(out.features[: blobs.n_rows], blobs.features)
    assert np.all(np.isfinite(out.features))


def test_base_and_smote_enn(fast_settings, blobs):
    base = oversample(blobs, "base", fast_settings, RngStream(0))
    assert base.n_synthetic == 0 and base.augmented is blobs
    enn = oversample(blobs, "smote_enn", fast_settings, RngStream(0))
    assert enn.counts["synthetic"] == blobs.n_major - blobs.n_minor
    assert enn.augmented.n_rows == blobs.n_rows + enn.counts["synthetic"] - enn.counts["removed"]


@pytest.mark.parametrize("ablation", ["wo_dis", "wo_seg", "wo_af"])
def test_ablations_run(fast_settings, small_sim, ablation):
    data, _ = small_sim
    res = oversample(data, ablation, fast_settings, RngStream(5))
    assert res.strategy == ablation
    assert res.augmented.n_minor == data.n_major
    assert list(res.report.thresholds) == ["all"]


def test_mlp_classifier_option(fast_settings, blobs):
    res = oversample(blobs, "smote_cls", replace(fast_settings, f_eta="mlp"), RngStream(6))
    assert res.augmented.n_minor == blobs.n_major
