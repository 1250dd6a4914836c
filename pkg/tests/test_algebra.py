import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from henondim.algebra import (
    ComplexPolynomial,
    HenonFactor,
    MapError,
    RangeSignal,
    evaluate,
    evaluate_inverse,
    factor_escape_radius,
    henon,
    inverse_map,
    iterate,
    iterate_with_jacobian,
    jacobian,
    make_map,
    spectral_norm,
    swap,
)

from conftest import H1_FIXED_W

small = st.floats(-1.5, 1.5, allow_nan=False)
complexes = st.builds(complex, small, small)
twists = st.builds(complex, st.floats(0.05, 1.0), st.floats(-0.5, 0.5))


@st.composite
def maps(draw, max_factors=3):
    m = draw(st.integers(1, max_factors))
    factors = []
    for _ in range(m):
        deg = draw(st.integers(2, 3))
        coeffs = [draw(complexes) for _ in range(deg)] + [complex(1.0, draw(st.floats(-0.3, 0.3)))]
        factors.append((coeffs, draw(twists)))
    return make_map(factors)


def test_make_map_degree_and_det():
    g = henon([-6, 0, 1], 0.3)
    assert g.degree == 2
    assert g.det_product == pytest.approx(0.3)
    assert g.det_signed == pytest.approx(-0.3)
    assert not g.volume_increasing


def test_two_factors_multiply_degrees():
    g = make_map([([0, 0, 1], 0.5), ([1, 0, 0, 1], 0.2)])
    assert g.degree == 6
    # two sign flips cancel
    assert g.det_signed == pytest.approx(0.5 * 0.2)


def test_zero_twist_names_factor():
    with pytest.raises(MapError, match="factor 1"):
        make_map([([0, 0, 1], 0.5), ([0, 0, 1], 0.0)])


def test_low_degree_rejected():
    with pytest.raises(MapError):
        ComplexPolynomial((1.0, 2.0))
    with pytest.raises(MapError):
        ComplexPolynomial((1.0, 2.0, 0.0))


def test_volume_increasing_flag():
    assert henon([0, 0, 1], 2.0).volume_increasing


def test_evaluate_example(h1):
    assert evaluate(h1, (1, 2)) == pytest.approx((2, -1.7))
    assert evaluate_inverse(h1, (2, -1.7)) == pytest.approx((1, 2))


def test_inverse_round_trip_example(h1):
    q = evaluate_inverse(h1, evaluate(h1, (0.1, -0.2)))
    assert abs(q[0] - 0.1) < 1e-12 and abs(q[1] + 0.2) < 1e-12


@pytest.mark.parametrize("w", H1_FIXED_W)
def test_fixed_points_are_fixed(h1, w):
    q = evaluate(h1, (w, w))
    assert abs(q[0] - w) < 1e-12 and abs(q[1] - w) < 1e-12


def test_jacobian_example(h1):
    np.testing.assert_allclose(jacobian(h1, (5.0, 2.0)), [[0, 1], [0.3, 4]])


def test_iterate_zero_is_identity(h1):
    q, jac = iterate_with_jacobian(h1, (0.3, 0.4), 0)
    assert q == (0.3, 0.4)
    np.testing.assert_array_equal(jac, np.eye(2))


def test_range_signal_carries_factor():
    g = make_map([([0, 0, 1], 0.5), ([0, 0, 1], 0.5)])
    with pytest.raises(RangeSignal) as info:
        iterate(g, (0, 1e100), 3)
    assert info.value.factor_index in (0, 1)
    assert info.value.step == 0


def test_escape_radius_examples(h1):
    assert 3.0 <= h1.escape_radius <= 4.5
    for a in (0.01, 0.3, 1.0):
        assert henon([0, 0, 1], a).escape_radius <= 3.1


def _radius_oracle(coeffs, a):
    # largest positive root of |lead| r^d - sum |c_k| r^k - k r, where the
    # margin k covers the forward sector (2 + |a|) and its mirror (1 + 2|a|)
    c = [abs(x) for x in coeffs]
    poly = [c[-1]] + [-x for x in reversed(c[:-1])]
    poly[-2] -= max(2 + abs(a), 1 + 2 * abs(a))
    roots = np.roots(poly)
    real = [r.real for r in roots if abs(r.imag) < 1e-9 and r.real > 0]
    return max([1.0] + real)


@settings(max_examples=60, deadline=None)
@given(st.lists(complexes, min_size=2, max_size=4), twists)
def test_escape_radius_matches_root_oracle(low, a):
    coeffs = low + [1.0]
    r = factor_escape_radius(HenonFactor(ComplexPolynomial(tuple(coeffs)), a))
    assert r == pytest.approx(_radius_oracle(coeffs, a), rel=2e-6)


def test_escape_sector_doubles(h1, rng):
    r = h1.escape_radius
    for _ in range(300):
        w = cmath.rect(r * rng.uniform(1.0, 5.0), rng.uniform(0, 2 * math.pi))
        z = w * rng.uniform(0, 1) * cmath.exp(1j * rng.uniform(0, 2 * math.pi))
        assert abs(evaluate(h1, (z, w))[1]) >= 2 * abs(w)


@settings(max_examples=60, deadline=None)
@given(maps(), complexes, complexes)
def test_round_trip(g, z, w):
    p = (z, w)
    scale = max(1.0, abs(z), abs(w))
    for q, jac in (
        (evaluate_inverse(g, evaluate(g, p)), jacobian(g, p)),
        (evaluate(g, evaluate_inverse(g, p)), jacobian(g, evaluate_inverse(g, p))),
    ):
        # rounding in the outer map is amplified by at most cond(Dg)
        tol = 1e-12 * scale * max(1.0, np.linalg.cond(jac))
        assert abs(q[0] - z) <= tol and abs(q[1] - w) <= tol


@settings(max_examples=60, deadline=None)
@given(maps(), complexes, complexes)
def test_determinant_constant(g, z, w):
    jac = jacobian(g, (z, w))
    # a 2x2 determinant from rounded entries is only good to eps * |J|^2
    cond = max(1.0, float(np.sum(np.abs(jac) ** 2)))
    assert abs(np.linalg.det(jac) - g.det_signed) <= 1e-12 * cond


@settings(max_examples=40, deadline=None)
@given(maps(max_factors=2), complexes, complexes, st.integers(1, 4), st.integers(1, 3))
def test_cocycle(g, z, w, n, k):
    p = (0.2 * z, 0.2 * w)
    try:
        q, a = iterate_with_jacobian(g, p, n)
        r, b = iterate_with_jacobian(g, q, k)
        _, ab = iterate_with_jacobian(g, p, n + k)
    except RangeSignal:
        return
    np.testing.assert_allclose(b @ a, ab, rtol=1e-10, atol=1e-10 * np.abs(ab).max())
    cond = max(1.0, float(np.sum(np.abs(ab) ** 2)))
    assert abs(np.linalg.det(ab) - g.det_signed ** (n + k)) <= 1e-10 * cond


def test_iterate_composes(h1, rng):
    for _ in range(20):
        p = tuple(rng.uniform(-1, 1, 2) + 1j * rng.uniform(-1, 1, 2))
        a = iterate(h1, p, 3)
        b = evaluate(h1, evaluate(h1, evaluate(h1, p)))
        assert abs(a[0] - b[0]) < 1e-12 * max(1, abs(b[0])) and abs(a[1] - b[1]) < 1e-12 * max(1, abs(b[1]))


def test_negative_iterate_uses_inverse(h1):
    p = (0.25 + 0.1j, -0.5)
    q, jac = iterate_with_jacobian(h1, p, -2)
    back, jac2 = iterate_with_jacobian(h1, q, 2)
    assert abs(back[0] - p[0]) < 1e-12 and abs(back[1] - p[1]) < 1e-12
    np.testing.assert_allclose(jac2 @ jac, np.eye(2), atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(maps(), complexes, complexes)
def test_inverse_map_conjugates(g, z, w):
    # s o g^-1 o s, evaluated forward, equals g^-1 read through the swap
    h = inverse_map(g)
    assert h.degree == g.degree
    assert abs(h.abs_det * g.abs_det - 1) < 1e-12
    a = evaluate(h, swap((z, w)))
    b = swap(evaluate_inverse(g, (z, w)))
    scale = max(1.0, abs(b[0]), abs(b[1]))
    assert abs(a[0] - b[0]) <= 1e-11 * scale and abs(a[1] - b[1]) <= 1e-11 * scale


@settings(max_examples=50, deadline=None)
@given(st.lists(complexes, min_size=4, max_size=4))
def test_spectral_norm_matches_svd(entries):
    mat = np.array(entries).reshape(2, 2)
    assert spectral_norm(mat) == pytest.approx(np.linalg.svd(mat, compute_uv=False)[0], rel=1e-9, abs=1e-12)


def test_describe_round_trips(h1):
    again = make_map(h1.describe()["factors"])
    assert again == h1
