"""Family evaluation, built-ins, combinators, validation."""

import math

import numpy as np
import pytest

from rdscircle.circle import CirclePoint, circ_dist, dist, frac
from rdscircle.errors import DomainError, FactorCommutationError, UsageError
from rdscircle.family import (NoiseModel, build_family, canonical, example1,
                              example2, example3, factor, mirror,
                              random_rotation_constant, random_rotation_linear,
                              rotate_conjugate, validate_family)

TWO_PI = 2 * math.pi


def sample_pairs(fam, n, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        yield fam.noise.sample(rng), rng.uniform()


def families_equal(f, g, n=1000, tol=1e-13, seed=0):
    worst = 0.0
    for alpha, x in sample_pairs(f, n, seed):
        worst = max(worst, circ_dist(f.eval_float(alpha, x), g.eval_float(alpha, x)))
    return worst < tol, worst


def test_canonical_eval_examples():
    g10 = canonical(1, 0)
    a = np.zeros(1)
    assert g10.eval(a, CirclePoint(0.0)).value == 0.0
    assert g10.eval(a, CirclePoint(0.5)).value == 0.5
    g21 = canonical(2, 1)
    assert g21.eval(a, CirclePoint(0.25)).value == 0.75


def test_canonical_rotation_on_invariant_sets():
    for k, l in [(2, 1), (3, 2), (4, 1)]:
        g = canonical(k, l)
        a = np.zeros(1)
        for i in range(k):
            img = g.eval_float(a, i / k)
            assert circ_dist(img, ((i + l) % k) / k) < 1e-15
            att = (2 * i + 1) / (2 * k)
            assert circ_dist(g.eval_float(a, att), frac(att + l / k)) < 1e-15


def test_canonical_g10_fixed_points():
    g = canonical(1, 0)
    a = np.zeros(1)
    xs = np.linspace(0, 1, 1001)[:-1]
    fixed = xs[circ_dist(g.eval_many(a, xs), xs) < 1e-12]
    assert set(np.round(fixed, 6)) == {0.0, 0.5}


def test_canonical_g20_fixed_point_quarter():
    g = canonical(2, 0)
    assert g.eval(np.zeros(1), CirclePoint(0.25)).value == 0.25


def test_eval_inverse_examples():
    g10 = canonical(1, 0)
    a = np.zeros(1)
    assert g10.eval_inverse(a, CirclePoint(0.0)).value == 0.0
    g21 = canonical(2, 1)
    assert circ_dist(g21.eval_inverse(a, CirclePoint(0.75)).value, 0.25) < 1e-12


def test_inverse_roundtrip_example3():
    fam = example3(1 / TWO_PI, 0.0)
    alpha = np.array([0.25])
    xs = np.arange(1000) / 1000.0
    ys = fam.eval_many(alpha, xs)
    back = fam.eval_inverse_many(alpha, ys)
    # x-side round trip away from the critical point of the map, where the
    # inversion is well conditioned
    mask = circ_dist(xs, 0.25) > 1e-3
    assert float(np.max(circ_dist(back[mask], xs[mask]))) < 1e-12
    # functional (y-side) round trip everywhere
    assert float(np.max(circ_dist(fam.eval_many(alpha, back), ys))) < 1e-12


def test_alpha_outside_box_is_domain_error():
    fam = example3(1 / TWO_PI, 0.1)
    with pytest.raises(DomainError):
        fam.eval(np.array([1.5]), CirclePoint(0.1))


def test_example1_noise_free_coordinate():
    fam = example1(2, 1, 0.05)
    assert fam.eval(np.array([0.0, 0.7]), CirclePoint(0.25)).value == 0.75


def test_example3_at_zero():
    fam = example3(1 / TWO_PI, 0.0)
    assert fam.eval(np.array([0.0]), CirclePoint(0.0)).value == 0.0


def test_example2_sign_is_mirror_conjugate():
    plus = example2(2, 1, 0.2, +1)
    minus = example2(2, 1, 0.2, -1)
    ok, worst = families_equal(mirror(plus), minus, n=1000, tol=1e-13)
    assert ok, worst


def test_parameter_range_errors():
    with pytest.raises(UsageError):
        example1(2, 2, 0.1)
    with pytest.raises(UsageError):
        example1(2, 1, 0.0)
    with pytest.raises(UsageError):
        example3(0.9, 0.0)  # eps > 1/(2*pi)
    with pytest.raises(UsageError):
        canonical(2, -1)


def test_random_rotation_identity_and_translation():
    ident = random_rotation_constant(0.0)
    rng = np.random.default_rng(1)
    for _ in range(100):
        a, x = ident.noise.sample(rng), rng.uniform()
        assert ident.eval_float(a, x) == x
    lin = random_rotation_linear(0.3)
    for alpha, x in sample_pairs(lin, 200, seed=2):
        shift = circ_dist(lin.eval_float(alpha, x), x)
        expected = frac(0.3 * alpha[0])
        assert circ_dist(frac(lin.eval_float(alpha, x) - x), expected) < 1e-15


def test_random_rotation_is_isometry():
    lin = random_rotation_linear(0.7)
    rng = np.random.default_rng(3)
    for _ in range(100):
        alpha = lin.noise.sample(rng)
        x, y = rng.uniform(size=2)
        d0 = circ_dist(x, y)
        d1 = circ_dist(lin.eval_float(alpha, x), lin.eval_float(alpha, y))
        assert abs(d0 - d1) < 1e-15


def test_mirror_is_involution():
    fam = example3(1 / TWO_PI, 0.2)
    ok, worst = families_equal(mirror(mirror(fam)), fam, n=1000, tol=1e-13)
    assert ok, worst


def test_mirror_of_rotation_negates_shift():
    rot = random_rotation_linear(0.4)
    m = mirror(rot)
    for alpha, x in sample_pairs(rot, 300, seed=4):
        got = frac(m.eval_float(alpha, x) - x)
        expected = frac(-frac(0.4 * alpha[0]))
        assert circ_dist(got, expected) < 1e-14


def test_mirror_of_canonical_10():
    # -g(-x) = g(x) for the (1, 0) target: the mirror agrees on the nose
    ok, worst = families_equal(mirror(canonical(1, 0)), canonical(1, 0),
                               n=500, tol=1e-13)
    assert ok, worst


def test_factor_of_canonical_collapses_k():
    for k in (2, 3, 4):
        zk = factor(canonical(k, k - 1), k)
        g10 = canonical(1, 0)
        ys = np.arange(10000) / 10000.0
        a = np.zeros(1)
        err = circ_dist(zk.eval_many(a, ys), g10.eval_many(a, ys))
        assert float(err.max()) < 1e-12


def test_factor_identity_and_rotation():
    fam = example3(1 / TWO_PI, 0.1)
    assert factor(fam, 1) is fam
    rot = random_rotation_linear(0.25)
    z3 = factor(rot, 3)
    for alpha, x in sample_pairs(rot, 200, seed=5):
        got = frac(z3.eval_float(alpha, x) - x)
        expected = frac(3 * frac(0.25 * alpha[0]))
        assert circ_dist(got, expected) < 1e-13


def test_factor_requires_commutation():
    with pytest.raises(FactorCommutationError):
        factor(example3(1 / TWO_PI, 0.1), 2)


def test_factor_respects_composition():
    fam = example1(2, 1, 0.1)
    z2 = factor(fam, 2)
    rng = np.random.default_rng(6)
    xs = rng.uniform(size=64)
    for _ in range(20):
        a1, a2 = fam.noise.sample(rng), fam.noise.sample(rng)
        composed = z2.eval_many(a2, z2.eval_many(a1, xs))
        direct = fam.eval_many(a2, fam.eval_many(a1, xs))
        assert float(np.max(circ_dist(composed, frac(2 * direct)))) < 1e-12


def test_rotate_conjugate():
    fam = example1(2, 1, 0.1)
    ok, worst = families_equal(rotate_conjugate(fam, 0.0), fam, n=300)
    assert ok, worst
    rc = rotate_conjugate(canonical(1, 0), 0.5)
    a = np.zeros(1)
    assert circ_dist(rc.eval_float(a, 0.5), 0.5) < 1e-15
    assert circ_dist(rc.eval_float(a, 0.0), 0.0) < 1e-15


def test_rotate_conjugate_preserves_symmetry_order():
    from rdscircle.structure import detect_rotational_symmetry
    fam = example1(3, 1, 0.1)
    rc = rotate_conjugate(fam, 0.2345)
    assert detect_rotational_symmetry(rc, m_max=8) == 3


def test_validate_family_pass_and_warn():
    rep = validate_family(example1(2, 1, 0.05))
    assert rep.passed and not rep.warnings

    rep = validate_family(canonical(2, 1))
    assert rep.passed
    assert any("noise-independent" in w for w in rep.warnings)


def test_validate_family_fails_decreasing_lift():
    from rdscircle.family import RandomHomeoFamily
    bad = RandomHomeoFamily(NoiseModel.symmetric(1), lambda a, t: -np.asarray(t))
    rep = validate_family(bad)
    assert not rep.passed
    assert any("orientation" in f for f in rep.failures)


def test_descriptor_roundtrip():
    fam = example1(2, 1, 0.05, coord=1)
    rebuilt = build_family(fam.descriptor)
    ok, worst = families_equal(fam, rebuilt, n=200)
    assert ok, worst
    nested = mirror(factor(example1(2, 0, 0.1), 2))
    rebuilt = build_family(nested.descriptor)
    ok, worst = families_equal(nested, rebuilt, n=200)
    assert ok, worst


def test_orientation_preserved_on_cyclic_triples():
    fam = example2(3, 2, 0.15, +1)
    rng = np.random.default_rng(7)
    for _ in range(200):
        alpha = fam.noise.sample(rng)
        x = np.sort(rng.uniform(size=3))
        fx = fam.eval_many(alpha, x)
        # cyclic order preserved: the images wind once in the same order
        g1 = frac(fx[1] - fx[0])
        g2 = frac(fx[2] - fx[1])
        g3 = frac(fx[0] - fx[2])
        assert abs(g1 + g2 + g3 - 1.0) < 1e-12


def test_noise_model_box_checks():
    with pytest.raises(UsageError):
        NoiseModel(((0.0, 0.0),))
    box = NoiseModel.symmetric(2)
    assert box.contains(np.array([0.5, -0.5]))
    assert not box.contains(np.array([1.5, 0.0]))
