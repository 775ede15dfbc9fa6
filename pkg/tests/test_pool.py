import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdmonitor import (
    CusumFamily,
    CusumParams,
    NonparametricFamily,
    NpParams,
    PoolConfig,
    SteadyStatePool,
    draw_initial_state,
    empirical_cdf,
    expected_quantiles,
    generate_pool,
    load_pool,
    quantile_positions,
    save_pool,
    substream,
)
from hdmonitor.pool import (
    _POOL_STREAM,
    PoolChecksumError,
    PoolFormatError,
    PoolKindMismatchError,
    PoolTruncatedError,
    PoolVersionError,
    draw_indices,
)

CUSUM = CusumFamily(CusumParams(0.5))


def pool_of(values):
    v = np.asarray(values, dtype=float)
    return SteadyStatePool(PoolConfig(CUSUM, v.size, 1, 0), v[:, None], np.sort(v))


def test_two_element_pool_with_low_draws_is_all_zero():
    seed = next(s for s in range(1000)
                if all(substream(s, k, _POOL_STREAM).standard_normal() < 0.25 for k in range(2)))
    pool = generate_pool(PoolConfig(CUSUM, pool_size=2, burn_in=1, seed=seed))
    np.testing.assert_array_equal(pool.sorted_values, [0.0, 0.0])
    np.testing.assert_array_equal(pool.snapshots, [[0.0], [0.0]])


def test_one_step_pool_matches_direct_formula():
    pool = generate_pool(PoolConfig(CUSUM, pool_size=50, burn_in=1, seed=4))
    x = np.array([substream(4, k, _POOL_STREAM).standard_normal() for k in range(50)])
    np.testing.assert_array_equal(pool.snapshots[:, 0], np.maximum(0, 0.5 * (x - 0.25)))


def test_cusum_pools_agree_across_seeds():
    a = generate_pool(PoolConfig(CUSUM, pool_size=10_000, burn_in=2000, seed=1)).sorted_values
    b = generate_pool(PoolConfig(CUSUM, pool_size=10_000, burn_in=2000, seed=2)).sorted_values
    assert np.mean(a == 0) > 0
    se = math.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)
    assert abs(a.mean() - b.mean()) < 3 * se


def test_pool_generation_deterministic_and_worker_independent():
    cfg = PoolConfig(CUSUM, pool_size=4500, burn_in=50, seed=9)
    assert generate_pool(cfg) == generate_pool(cfg, workers=2)


def test_nonparametric_pool_counts_consistent():
    fam = NonparametricFamily(NpParams(d=4, n=8))
    pool = generate_pool(PoolConfig(fam, pool_size=200, burn_in=100, seed=0))
    d = 4
    ncount = pool.snapshots[:, 4:8]
    ncell = pool.snapshots[:, 8 : 8 + 4 * d].reshape(-1, 4, d)
    np.testing.assert_array_equal(ncell.sum(axis=2), ncount)
    yprev = pool.snapshots[:, 8 + 4 * d :].reshape(-1, 2, d)
    np.testing.assert_array_equal(yprev.sum(axis=2), np.ones((200, 2)))


def test_single_snapshot_pool_always_drawn():
    pool = pool_of([3.5])
    rng = np.random.default_rng(0)
    for _ in range(5):
        assert float(draw_initial_state(pool, rng).s_plus) == 3.5


def test_draw_frequencies_are_uniform():
    pool = pool_of(np.arange(100.0))
    counts = np.bincount(draw_indices(pool, np.random.default_rng(1), 10**5), minlength=100)
    sigma = math.sqrt(10**5 * 0.01 * 0.99)
    assert np.all(np.abs(counts - 1000) < 3.5 * sigma)  # 3 sigma per cell, small slack for 100 cells
    assert np.mean(np.abs(counts - 1000) < 3 * sigma) > 0.97


def test_equal_seeds_draw_equally():
    pool = pool_of(np.arange(10.0))
    a = draw_indices(pool, np.random.default_rng(5), 50)
    np.testing.assert_array_equal(a, draw_indices(pool, np.random.default_rng(5), 50))


def test_quantile_positions_examples():
    np.testing.assert_allclose(quantile_positions(2), [1 / 6, 5 / 6], rtol=1e-15)
    np.testing.assert_array_equal(quantile_positions(1), [0.5])
    assert quantile_positions(100)[0] == pytest.approx(0.0025125628, abs=1e-10)


def test_expected_quantiles_examples():
    assert np.all(expected_quantiles(pool_of(np.zeros(7)), 5).expected_q == 0)
    assert expected_quantiles(pool_of([0.0, 1.0]), 1).expected_q[0] == 0.5


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 50, allow_nan=False), min_size=2, max_size=60), st.integers(1, 40))
def test_expected_quantiles_match_numpy_linear_rule(values, m):
    table = expected_quantiles(pool_of(values), m)
    want = np.quantile(np.array(values), quantile_positions(m), method="linear")
    np.testing.assert_allclose(table.expected_q, want, rtol=1e-12, atol=1e-12)
    assert table.expected_q[0] >= min(values) and table.expected_q[-1] <= max(values)


def test_empirical_cdf_examples():
    pool = pool_of([1.0, 2.0, 3.0, 4.0])
    assert empirical_cdf(pool, 2.0) == 0.375
    assert empirical_cdf(pool, -5.0) == 1 / 8
    assert empirical_cdf(pool, 9.0) == 1 - 1 / 8


def test_empirical_cdf_midranks_ties():
    pool = pool_of([0.0, 0.0, 0.0, 1.0])
    # three ties: (0 + 3/2) / 4
    assert empirical_cdf(pool, 0.0) == 0.375


@pytest.mark.parametrize("family", [CUSUM, NonparametricFamily(NpParams(d=3, n=6))])
def test_save_load_round_trip(tmp_path, family):
    pool = generate_pool(PoolConfig(family, pool_size=30, burn_in=20, seed=2))
    save_pool(pool, tmp_path / "p.bin")
    assert load_pool(tmp_path / "p.bin") == pool


@pytest.fixture
def saved(tmp_path):
    path = tmp_path / "p.bin"
    save_pool(generate_pool(PoolConfig(CUSUM, pool_size=20, burn_in=5, seed=1)), path)
    return path


def test_bad_magic(saved):
    raw = bytearray(saved.read_bytes())
    raw[0] ^= 0xFF
    saved.write_bytes(bytes(raw))
    with pytest.raises(PoolFormatError):
        load_pool(saved)


def test_kind_mismatch(saved):
    with pytest.raises(PoolKindMismatchError):
        load_pool(saved, expected_kind="nonparametric")


def test_version_mismatch(saved):
    raw = bytearray(saved.read_bytes())
    raw[6] = 99
    saved.write_bytes(bytes(raw))
    with pytest.raises(PoolVersionError):
        load_pool(saved)


def test_truncated(saved):
    saved.write_bytes(saved.read_bytes()[:-20])
    with pytest.raises(PoolTruncatedError):
        load_pool(saved)


def test_checksum(saved):
    raw = bytearray(saved.read_bytes())
    raw[-30] ^= 0x01
    saved.write_bytes(bytes(raw))
    with pytest.raises(PoolChecksumError):
        load_pool(saved)
