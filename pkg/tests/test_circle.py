"""Circle arithmetic: points, arcs, distances, covering maps."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rdscircle.circle import (Arc, CirclePoint, boundary_points, dist, dplus,
                              frac, mfold, mth_root, sector)

unit = st.floats(min_value=0.0, max_value=1.0, exclude_max=True,
                 allow_nan=False, allow_infinity=False)


def test_dplus_examples():
    assert dplus(CirclePoint(0.25), CirclePoint(0.75)) == 0.5
    assert abs(dplus(CirclePoint(0.9), CirclePoint(0.2)) - 0.3) < 1e-15
    x = CirclePoint(0.123)
    assert dplus(x, x) == 0.0


def test_dist_examples():
    assert abs(dist(CirclePoint(0.9), CirclePoint(0.2)) - 0.3) < 1e-15
    assert dist(CirclePoint(0.25), CirclePoint(0.75)) == 0.5
    assert dist(CirclePoint(0.4), CirclePoint(0.4)) == 0.0


def test_mfold_examples():
    assert mfold(CirclePoint(0.3), 2).value == 0.6
    assert abs(mfold(CirclePoint(0.7), 2).value - 0.4) < 1e-15
    x = CirclePoint(0.987)
    assert mfold(x, 1) == x


def test_mth_root_examples():
    assert abs(mth_root(CirclePoint(0.6), 2).value - 0.3) < 1e-16
    assert abs(mth_root(CirclePoint(0.6), 3).value - 0.2) < 1e-16
    x = CirclePoint(0.52)
    assert mth_root(x, 1) == x


def test_sector_examples():
    assert sector(CirclePoint(0.6), 2) == 1
    assert sector(CirclePoint(0.1), 4) == 0
    assert sector(CirclePoint(0.99), 3) == 2


def test_boundary_points():
    a = Arc.of(0.2, 0.4)
    s, e = boundary_points(a)
    assert (s.value, e.value) == (0.2, 0.4)
    wrap = Arc.of(0.9, 0.1)
    s, e = boundary_points(wrap)
    assert (s.value, e.value) == (0.9, 0.1)
    with pytest.raises(ValueError):
        boundary_points(Arc.whole_circle())


def test_arc_measure_and_membership():
    a = Arc.of(0.9, 0.1)
    assert abs(a.length() - 0.2) < 1e-15
    assert a.contains(CirclePoint(0.95))
    assert a.contains(CirclePoint(0.9)) and a.contains(CirclePoint(0.1))
    assert not a.contains(CirclePoint(0.5))
    assert not a.contains(CirclePoint(0.9), include_start=False)
    assert not a.contains(CirclePoint(0.1), include_end=False)
    assert Arc.whole_circle().contains(CirclePoint(0.123))
    assert abs(a.midpoint().value - 0.0) < 1e-15


def test_point_group_law():
    a, b = CirclePoint(0.7), CirclePoint(0.6)
    assert abs((a + b).value - 0.3) < 1e-15
    assert abs((-a).value - 0.3) < 1e-15
    assert abs((a - b).value - 0.1) < 1e-15
    assert 0.0 <= (a + b).value < 1.0


def test_normalization_is_total():
    # a tiny negative must not normalize onto 1.0
    assert CirclePoint(-1e-18).value == 0.0
    assert frac(np.array([-1e-18]))[0] == 0.0
    assert CirclePoint(3.75).value == 0.75


@given(unit, unit)
def test_dplus_complement(x, y):
    if x != y:
        assert abs(dplus(CirclePoint(x), CirclePoint(y))
                   + dplus(CirclePoint(y), CirclePoint(x)) - 1.0) < 1e-15


@given(unit, unit)
def test_dist_symmetric(x, y):
    assert dist(CirclePoint(x), CirclePoint(y)) == dist(CirclePoint(y), CirclePoint(x))


def test_dist_metric_on_random_triples():
    rng = np.random.default_rng(0)
    xs, ys, zs = rng.uniform(size=(3, 100000))
    from rdscircle.circle import circ_dist
    dxz = circ_dist(xs, zs)
    dxy = circ_dist(xs, ys)
    dyz = circ_dist(ys, zs)
    assert np.all(dxz <= dxy + dyz + 1e-15)
    assert np.all(circ_dist(xs, ys) == circ_dist(ys, xs))


@pytest.mark.parametrize("m", [1, 2, 3, 4, 5, 8, 12])
def test_mfold_mth_root_roundtrip(m):
    rng = np.random.default_rng(m)
    exact = 0
    for x in rng.uniform(size=2000):
        p = CirclePoint(x)
        y = mth_root(p, m)
        assert 0.0 <= y.value < 1.0 / m + 1e-15
        back = mfold(y, m)
        if back == p:
            exact += 1
        else:
            # IEEE754 leaves some representatives without an exact m-th
            # root for m that is not a power of two; stay within an ulp
            assert dist(back, p) < 4e-16
    if m in (1, 2, 4, 8):
        assert exact == 2000


@pytest.mark.parametrize("m", [2, 3, 4, 7])
def test_sector_of_shifted_roots(m):
    rng = np.random.default_rng(100 + m)
    for x in rng.uniform(size=2000):
        y = mth_root(CirclePoint(x), m)
        for j in range(m):
            assert sector(y + CirclePoint(j / m), m) == j


def test_approx_eq_has_explicit_tolerance():
    a, b = CirclePoint(0.5), CirclePoint(0.5 + 1e-9)
    assert a != b
    assert a.approx_eq(b, 1e-8)
    assert not a.approx_eq(b, 1e-10)
