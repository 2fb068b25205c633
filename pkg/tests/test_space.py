from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from heatlab.errors import CapacityError, DimensionError, FitError, UndefinedSeminormError
from heatlab.space import (
    INF,
    NormSpec,
    SampledSpace,
    disjoint_union,
    estimate_exponent,
    euclidean_space,
    hoelder_seminorm,
    norm_distance,
    product_sum_metric,
)


def grid(n=500):
    x = np.linspace(0, 1, n)
    return x, euclidean_space(x, np.full(n, 1 / n))


def test_union_of_points():
    a = SampledSpace(["p"], np.zeros((1, 1)), np.ones(1))
    b = SampledSpace(["q"], np.zeros((1, 1)), np.ones(1))
    u = disjoint_union(a, b)
    assert u.size == 2 and u.dist[0, 1] == INF and u.dist[1, 0] == INF


def test_union_with_empty():
    a = SampledSpace(["p", "q"], np.array([[0.0, 1.0], [1.0, 0.0]]), np.ones(2))
    e = SampledSpace([], np.zeros((0, 0)), np.zeros(0))
    assert disjoint_union(a, e) is a
    assert disjoint_union(e, a) is a


def test_union_preserves_within_copy():
    x, s = grid(11)
    u = disjoint_union(s, s)
    assert np.array_equal(u.dist[:11, :11], s.dist)
    assert np.array_equal(u.dist[11:, 11:], s.dist)
    assert np.all(np.isinf(u.dist[:11, 11:]))


def test_union_seminorm_is_max_of_copies():
    x, s = grid(21)
    u = disjoint_union(s, s)
    f, g = x**2, 3 * np.sin(x)
    both = hoelder_seminorm(u, np.concatenate([f, g]), 1.0)
    assert both == max(hoelder_seminorm(s, f, 1.0), hoelder_seminorm(s, g, 1.0))


def test_product_examples():
    one = SampledSpace(["a"], np.zeros((1, 1)), np.ones(1))
    p = product_sum_metric(one)
    assert p.size == 1 and p.dist[0, 0] == 0
    two = SampledSpace(["0", "1"], np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([0.5, 0.5]))
    p = product_sum_metric(two)
    assert p.size == 4
    assert p.dist[p.index("(0,0)"), p.index("(1,1)")] == 2
    assert np.allclose(p.weights, 0.25)


def test_product_slice_isometry_and_triangle():
    x, s = grid(9)
    p = product_sum_metric(s)
    n = s.size
    for y in range(n):
        idx = [i * n + y for i in range(n)]
        assert np.array_equal(p.dist[np.ix_(idx, idx)], s.dist)
    d = p.dist
    viol = d[:, None, :] - (d[:, :, None] + d[None, :, :])
    assert viol.max() <= 1e-12


def test_product_capacity():
    x, s = grid(70)
    with pytest.raises(CapacityError):
        product_sum_metric(s)


def test_seminorm_examples():
    x, s = grid(101)
    assert hoelder_seminorm(s, np.ones(101), 1.0) == 0
    assert math.isclose(hoelder_seminorm(s, x, 1.0), 1.0, rel_tol=1e-12)
    assert math.isclose(hoelder_seminorm(s, np.sqrt(x), 0.5), 1.0, rel_tol=1e-12)


def test_seminorm_empty_pairs():
    one = SampledSpace(["a"], np.zeros((1, 1)), np.ones(1))
    with pytest.raises(UndefinedSeminormError):
        hoelder_seminorm(one, [1.0], 1.0)


def test_zero_distance_pairs_excluded(caplog):
    s = SampledSpace(["a", "b", "c"], np.array([[0, 0, 1.0], [0, 0, 1.0], [1.0, 1.0, 0]]), np.ones(3))
    assert hoelder_seminorm(s, [0.0, 5.0, 1.0], 1.0) == 4.0
    assert "distance 0" in caplog.text


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, 30, elements=st.floats(-5, 5)), st.integers(0, 2**31 - 1))
def test_seminorm_monotone_under_refinement(f, seed):
    x, s = grid(30)
    idx = np.sort(np.random.default_rng(seed).choice(30, 10, replace=False))
    sub = s.subspace(idx)
    assert hoelder_seminorm(sub, f[idx], 0.7) <= hoelder_seminorm(s, f, 0.7)


def test_exponent_linear_and_sqrt():
    x, s = grid(500)
    e1 = estimate_exponent(s, x)
    assert 0.98 <= e1.fitted_exponent <= 1.02
    e2 = estimate_exponent(s, np.sqrt(x))
    assert 0.48 <= e2.fitted_exponent <= 0.52
    assert e1.bins_used >= 3


def test_exponent_constant_is_degenerate():
    x, s = grid(100)
    e = estimate_exponent(s, np.ones(100))
    assert e.seminorm_at_alpha == 0 and math.isnan(e.fitted_exponent) and not e.defined


def test_exponent_too_few_bins():
    x, s = grid(5)
    with pytest.raises(FitError, match="bins"):
        estimate_exponent(s, x, cutoff=0.26)


def test_norm_examples():
    n = 7
    s = euclidean_space(np.arange(n), np.full(n, 1 / n))
    f = np.arange(n, dtype=float)
    assert norm_distance(s, NormSpec(), f, f) == 0
    assert math.isclose(norm_distance(s, NormSpec("lr", 2), f + 1, f), 1.0)
    assert norm_distance(s, NormSpec("sup"), f + 2, f) == 2
    zero = NormSpec("graph", 2, np.zeros((n, n)))
    assert math.isclose(norm_distance(s, zero, f + 1, f), 1.0)
    ident = NormSpec("graph", 2, np.eye(n))
    assert math.isclose(norm_distance(s, ident, f + 1, f), 2.0)


def test_norm_dimension_error():
    s = euclidean_space(np.arange(3), np.ones(3))
    with pytest.raises(DimensionError):
        norm_distance(s, NormSpec(), np.ones(3), np.ones(4))


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, 8, elements=st.floats(-10, 10)), arrays(np.float64, 8, elements=st.floats(-10, 10)))
def test_parallelogram(f, g):
    s = euclidean_space(np.arange(8), np.linspace(0.5, 1.5, 8))
    z = np.zeros(8)
    spec = NormSpec()
    lhs = norm_distance(s, spec, f + g, z) ** 2 + norm_distance(s, spec, f - g, z) ** 2
    rhs = 2 * norm_distance(s, spec, f, z) ** 2 + 2 * norm_distance(s, spec, g, z) ** 2
    assert abs(lhs - rhs) <= 1e-10 * max(rhs, 1e-300)


def test_json_round_trip_bit_exact():
    x, s = grid(7)
    u = disjoint_union(s, s)
    back = SampledSpace.from_json(u.to_json())
    assert back.point_ids == u.point_ids
    assert np.array_equal(back.dist, u.dist)
    assert np.array_equal(back.weights, u.weights)
    doc = u.to_json_dict()
    assert "inf" in doc["dist"]


def test_check_metric_detects_violation():
    from heatlab.errors import ValidationError

    d = np.array([[0, 1, 5.0], [1, 0, 1.0], [5.0, 1.0, 0]])
    with pytest.raises(ValidationError):
        SampledSpace(["a", "b", "c"], d, np.ones(3)).check_metric()
