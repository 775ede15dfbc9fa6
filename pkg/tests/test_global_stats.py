import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hdmonitor import g_max, g_sum, gl_soft, gt, gtz, logistic_quantile_transform, logistic_table, quantile_positions

vectors = arrays(np.float64, st.integers(1, 30), elements=st.floats(0, 20, allow_nan=False))


def test_gt_zero_when_values_equal_quantiles():
    q = np.array([0.1, 0.5, 2.0])
    assert gt(q, q) == 0


def test_gt_hand_example():
    assert gt([0.0, 1.0, 3.0], [0.5, 1.0, 2.0]) == 1.0


def test_gt_rejects_length_mismatch():
    with pytest.raises(ValueError):
        gt([1.0, 2.0], [0.0])


@settings(max_examples=200, deadline=None)
@given(vectors, st.randoms(use_true_random=False))
def test_gt_permutation_invariant(w, rnd):
    q = np.sort(np.linspace(0, 5, w.size))
    perm = list(range(w.size))
    rnd.shuffle(perm)
    assert gt(w[perm], q) == gt(w, q)


@settings(max_examples=200, deadline=None)
@given(vectors, st.floats(0, 3))
def test_gt_nondecreasing_in_values(w, bump):
    q = np.linspace(0, 5, w.size)
    assert gt(w + bump, q) >= gt(w, q)


def test_gtz_zero_at_positions():
    assert gtz(quantile_positions(7)) == 0


def test_gtz_single_value():
    assert gtz([0.9]) == pytest.approx(math.log(1 / 9) ** 2, abs=1e-12)
    assert gtz([0.9]) == pytest.approx(4.8278, abs=1e-4)


def test_gtz_rejects_boundary():
    with pytest.raises(ValueError):
        gtz([0.0, 0.5])


@pytest.mark.parametrize("m", [1, 2, 10, 100])
def test_gtz_equals_gt_on_logistic_scale(m):
    u = np.random.default_rng(m).uniform(1e-6, 1 - 1e-6, size=(500, m))
    np.testing.assert_allclose(gtz(u), gt(logistic_quantile_transform(u), logistic_table(m)), rtol=0, atol=1e-10)


def test_logistic_transform_examples():
    assert logistic_quantile_transform(0.5) == 0
    assert logistic_quantile_transform(0.9) == pytest.approx(math.log(9), abs=1e-12)
    assert logistic_quantile_transform(0.9) == pytest.approx(2.1972246, abs=1e-7)


@given(st.integers(1, 2**20 - 1))
def test_logistic_transform_odd(k):
    p = k / 2**20  # 1 - p is exact on this grid
    assert logistic_quantile_transform(p) == pytest.approx(-logistic_quantile_transform(1 - p), abs=1e-12)


def test_soft_threshold_examples():
    assert gl_soft([0.1, 0.2], 0.5) == 0
    assert gl_soft([0.3, 2.5, 5.0], math.log(10)) == pytest.approx(2.8948, abs=1e-4)
    v = np.array([1.0, 2.0, 3.0])
    assert gl_soft(v, -1e6) == pytest.approx(v.sum() + 3e6)


def test_max_and_sum_examples():
    assert g_max([0.0, 0.0, 0.0]) == 0 and g_sum([0.0, 0.0, 0.0]) == 0
    assert g_max([1.0, 4.0, 2.0]) == 4 and g_sum([1.0, 4.0, 2.0]) == 7


@given(vectors)
def test_sum_equals_soft_threshold_at_zero(w):
    assert g_sum(w) == pytest.approx(gl_soft(w, 0.0))


def test_statistics_reduce_last_axis():
    w = np.random.default_rng(0).uniform(0, 3, size=(4, 5))
    q = np.linspace(0, 2, 5)
    np.testing.assert_allclose(gt(w, q), [gt(row, q) for row in w])
    np.testing.assert_allclose(gl_soft(w, 1.0), [gl_soft(row, 1.0) for row in w])


def gtz_reference(u):
    m = len(u)
    total = 0.0
    for i, ui in enumerate(sorted(u), 1):
        p = (i - 0.75) / (m - 0.5)
        if ui > p:
            total += math.log((1 / ui - 1) / (1 / p - 1)) ** 2
    return total


def test_gtz_matches_ratio_form_reference():
    rng = np.random.default_rng(8)
    for m in (1, 3, 17, 60):
        for u in rng.uniform(0.001, 0.999, size=(50, m)):
            assert gtz(u) == pytest.approx(gtz_reference(list(u)), rel=1e-9, abs=1e-12)
