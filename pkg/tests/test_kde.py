import math

import numpy as np
import pytest

from smotecls.core.errors import ConfigError, DataError
from smotecls.models.kde import (
    BANDWIDTH_FLOOR,
    KdeModel,
    density_at,
    retain_above,
    retain_by_quantile,
    scott_bandwidth,
)

LINE = np.array([0.0, 0.1, 0.3, 0.6, 1.0, 1.5, 2.1, 2.8, 3.6, 4.5]).reshape(-1, 1)


def _unit_std(m, h, seed):
    z = np.random.default_rng(seed).normal(size=(m, h))
    return (z - z.mean(axis=0)) / z.std(axis=0, ddof=1)


def test_scott_factor_for_unit_std():
    np.testing.assert_allclose(scott_bandwidth(_unit_std(100, 2, 0)), 100 ** (-1 / 6), rtol=1e-9)


def test_scott_exponent_doubling():
    b10 = scott_bandwidth(_unit_std(10, 3, 1))
    b20 = scott_bandwidth(_unit_std(20, 3, 2))
    np.testing.assert_allclose(b20 / b10, 2 ** (-1 / 7), rtol=1e-9)


def test_scott_constant_dimension_is_floored():
    z = np.column_stack([np.arange(5.0), np.full(5, 2.0)])
    b = scott_bandwidth(z)
    assert b[1] == BANDWIDTH_FLOOR
    with pytest.raises(DataError):
        scott_bandwidth(np.zeros((1, 2)))


def test_scott_matches_recomputation():
    z = np.random.default_rng(3).normal(size=(50, 4)) * [1, 2, 3, 4]
    np.testing.assert_allclose(scott_bandwidth(z), z.std(axis=0, ddof=1) * 50 ** (-1 / 8))


def test_single_kernel_peak():
    model = KdeModel(support=np.array([[0.0]]), bandwidth=np.array([1.0]))
    assert density_at(model, [0.0]) == pytest.approx(1 / math.sqrt(2 * math.pi))


def test_far_query_underflows_to_positive_tiny():
    model = KdeModel(support=np.array([[0.0]]), bandwidth=np.array([0.1]))
    d = density_at(model, [100.0])
    assert 0.0 < d < 1e-30


def test_density_matches_naive_sum():
    rng = np.random.default_rng(4)
    model = KdeModel.fit(rng.normal(size=(30, 2)))
    queries = rng.normal(size=(7, 2))
    b = model.bandwidth
    for q in queries:
        total = 0.0
        for s in model.support:
            u = (q - s) / b
            total += np.prod(np.exp(-0.5 * u * u) / (math.sqrt(2 * math.pi) * b))
        assert density_at(model, q) == pytest.approx(total / 30, rel=1e-10)


def test_retain_all_when_q_is_one():
    model = KdeModel.fit(LINE)
    kept, tau, _ = retain_by_quantile(model, LINE, 1.0)
    np.testing.assert_array_equal(kept, np.arange(10))
    assert tau == float("-inf")


def test_retain_drops_lowest_density_point():
    model = KdeModel.fit(LINE)
    kept, tau, dens = retain_by_quantile(model, LINE, 0.9)
    assert len(np.unique(dens)) == 10
    assert len(kept) == 9
    assert int(np.argmin(dens)) not in kept
    assert tau == dens.min()


@pytest.mark.parametrize("q, expected", [(0.6, 6), (0.3, 3), (0.05, 1)])
def test_retained_count_follows_lower_quantile(q, expected):
    model = KdeModel.fit(LINE)
    kept, _, _ = retain_by_quantile(model, LINE, q)
    assert len(kept) == expected


def test_retention_is_monotone_in_q():
    z = np.random.default_rng(5).normal(size=(40, 2))
    model = KdeModel.fit(z)
    prev = set()
    for q in (0.1, 0.3, 0.5, 0.7, 0.9, 1.0):
        kept = set(retain_by_quantile(model, z, q)[0].tolist())
        assert prev <= kept
        prev = kept


def test_retention_is_permutation_invariant():
    z = np.random.default_rng(6).normal(size=(25, 2))
    perm = np.random.default_rng(7).permutation(25)
    a = retain_by_quantile(KdeModel.fit(z), z, 0.6)[0]
    b = retain_by_quantile(KdeModel.fit(z[perm]), z[perm], 0.6)[0]
    assert set(a.tolist()) == set(perm[b].tolist())


def test_raw_threshold_and_bad_fraction():
    model = KdeModel.fit(LINE)
    dens = model.densities(LINE)
    kept, tau, _ = retain_above(model, LINE, float(np.median(dens)))
    np.testing.assert_array_equal(kept, np.flatnonzero(dens > np.median(dens)))
    assert retain_above(model, LINE, 1e9)[0].size == 0
    with pytest.raises(ConfigError):
        retain_by_quantile(model, LINE, 0.0)


def test_equal_densities_keep_lowest_indices():
    # a collapsed embedding: every point identical, every density tied
    z = np.zeros((150, 2))
    model = KdeModel.fit(z)
    kept, tau, dens = retain_by_quantile(model, z, 0.6)
    assert len(np.unique(dens)) == 1
    np.testing.assert_array_equal(kept, np.arange(90))
    assert tau == dens[0]


def test_partial_ties_break_by_index():
    z = np.array([[0.0], [0.0], [0.0], [5.0], [10.0]])
    model = KdeModel(support=z, bandwidth=np.array([0.5]))
    kept, _, _ = retain_by_quantile(model, z, 0.4)
    np.testing.assert_array_equal(kept, [0, 1])


@pytest.mark.parametrize("m", [1, 2, 7, 91, 150])
@pytest.mark.parametrize("q", [0.05, 0.3, 0.6, 0.9])
def test_retained_count_is_ceiling(m, q):
    z = np.random.default_rng(m).normal(size=(m, 2))
    model = KdeModel(support=z, bandwidth=np.array([0.3, 0.3]))
    kept, _, _ = retain_by_quantile(model, z, q)
    assert len(kept) == min(m, max(1, math.ceil(q * m - 1e-9)))
