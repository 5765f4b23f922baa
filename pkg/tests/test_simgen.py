import numpy as np
import pytest

from smotecls.core.errors import ConfigError
from smotecls.core.rng import RngStream
from smotecls.models.dataset import MAJOR, MINOR
from smotecls.services.sampler import FilterReport
from smotecls.services.simgen import SimSpec, evaluate_filter, generate


def test_default_counts_and_provenance():
    data, prov = generate(SimSpec(), RngStream(0))
    assert data.n_rows == 1600
    assert (data.n_minor, data.n_major) == (150, 1450)
    tags = np.asarray(prov)
    assert {t: int((tags == t).sum()) for t in ("G1", "G2", "noise", "major")} == {
        "G1": 80,
        "G2": 20,
        "noise": 50,
        "major": 1450,
    }
    np.testing.assert_array_equal(data.labels[tags == "major"], MAJOR)
    np.testing.assert_array_equal(data.labels[tags != "major"], MINOR)
    assert data.feature_names == ("x1", "x2")


def test_no_noise_means_minors_are_clusters():
    data, prov = generate(SimSpec(n_noise=0), RngStream(1))
    assert {prov[i] for i in data.minor_idx} == {"G1", "G2"}
    assert data.n_minor == 100 and data.n_major == 1500


def test_cluster_moments():
    n = 10_000
    data, _ = generate(SimSpec(n_g1=n, n_g2=0, n_major=0, n_noise=0), RngStream(2))
    x = data.features
    np.testing.assert_allclose(x.mean(axis=0), [-0.3, 0.0], atol=4 * 0.1 / np.sqrt(n))
    np.testing.assert_allclose(x.var(axis=0), 0.01, rtol=0.05)


def test_majors_and_noise_lie_in_the_square():
    data, prov = generate(SimSpec(noise_mode="fresh"), RngStream(3))
    tags = np.asarray(prov)
    assert data.n_rows == 1650
    outside = tags != "G1"
    outside &= tags != "G2"
    assert np.all(np.abs(data.features[outside]) <= 1.0)


def test_too_much_noise_is_rejected():
    with pytest.raises(ConfigError):
        SimSpec(n_major=10, n_noise=20)
    with pytest.raises(ConfigError):
        SimSpec(noise_mode="swap")


def test_generation_is_deterministic():
    a, _ = generate(SimSpec(), RngStream(4))
    b, _ = generate(SimSpec(), RngStream(4))
    np.testing.assert_array_equal(a.features, b.features)


def test_evaluate_filter():
    prov = ["G1", "G1", "G2", "noise", "noise", "major"]
    report = FilterReport(
        rows=np.array([0, 1, 2, 3, 4]),
        groups=["m", "m", "m", "m*", "m*"],
        density=np.ones(5),
        kept=np.array([True, False, True, False, True]),
    )
    out = evaluate_filter(report, prov)
    assert out == {"noise_total": 2.0, "noise_exclusion": 0.5, "G1_retention": 0.5, "G2_retention": 1.0}

    no_noise = FilterReport(rows=np.array([0, 1]), groups=["m", "m"], density=np.ones(2), kept=np.array([True, True]))
    out = evaluate_filter(no_noise, prov)
    assert np.isnan(out["noise_exclusion"]) and np.isnan(out["G2_retention"])
