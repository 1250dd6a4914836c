import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from henondim.algebra import evaluate, evaluate_inverse, inverse_map, swap
from henondim.classify import (
    BoxR4,
    BoxStatus,
    Status,
    box_evidence,
    box_status,
    classify_backward,
    classify_forward,
    escape_times,
    green,
    probe_offsets,
)

from conftest import H1_FIXED_W


def _probes(g, rng, count):
    r = g.escape_radius
    return rng.uniform(-r, r, (count, 2)) + 1j * rng.uniform(-r, r, (count, 2))


@pytest.mark.parametrize("w", H1_FIXED_W)
def test_fixed_points_bounded(h1, w):
    assert classify_forward(h1, (w, w)).status is Status.BOUNDED
    assert classify_backward(h1, (w, w)).status is Status.BOUNDED


def test_large_w_escapes_fast(h1):
    res = classify_forward(h1, (0, 10))
    assert res.escaped and res.steps <= 3


def test_n_max_validated(h1):
    with pytest.raises(ValueError):
        classify_forward(h1, (0, 0), n_max=0)


def test_vectorised_matches_scalar(h1, rng):
    pts = _probes(h1, rng, 200)
    times = escape_times(h1, pts[:, 0], pts[:, 1])
    for p, t in zip(pts, times):
        res = classify_forward(h1, p)
        assert (t < 0) == (not res.escaped)
        if res.escaped:
            assert t == res.steps


def test_forward_matches_backward_of_inverse(fixtures, rng):
    for g in fixtures.values():
        h = inverse_map(g)
        radius = max(g.escape_radius, h.escape_radius)
        pts = _probes(g, rng, 300)
        fwd = escape_times(g, pts[:, 0], pts[:, 1], radius=radius)
        bwd = escape_times(h, pts[:, 1], pts[:, 0], forward=False, radius=radius)
        np.testing.assert_array_equal(fwd < 0, bwd < 0)


def test_doubling_radius_keeps_status(fixtures, rng):
    for g in fixtures.values():
        pts = _probes(g, rng, 1000)
        for forward in (True, False):
            a = escape_times(g, pts[:, 0], pts[:, 1], forward=forward)
            b = escape_times(g, pts[:, 0], pts[:, 1], forward=forward, radius=2 * g.escape_radius)
            np.testing.assert_array_equal(a < 0, b < 0)


def test_n_max_monotone(h3, rng):
    pts = _probes(h3, rng, 500)
    short = escape_times(h3, pts[:, 0], pts[:, 1], n_max=5)
    long = escape_times(h3, pts[:, 0], pts[:, 1], n_max=200)
    escaped = short >= 0
    np.testing.assert_array_equal(short[escaped], long[escaped])


def test_green_zero_on_fixed_points(h1):
    for w in H1_FIXED_W:
        for sign in (1, -1):
            val = green(h1, (w, w), sign)
            assert val.value == 0.0 and not val.converged


def test_green_asymptotics(h1):
    val = green(h1, (0, 1e10))
    assert val.converged
    assert val.value / math.log(1e10) == pytest.approx(1.0, abs=0.01)


def test_green_functional_equation(fixtures, rng):
    tol = 1e-9
    for g in fixtures.values():
        for p in _probes(g, rng, 60):
            gp = green(g, p, 1, tol=tol)
            if gp.value > 0:
                img = green(g, evaluate(g, p), 1, tol=tol)
                assert abs(img.value - g.degree * gp.value) <= 10 * tol
            gm = green(g, p, -1, tol=tol)
            if gm.value > 0:
                img = green(g, evaluate_inverse(g, p), -1, tol=tol)
                assert abs(img.value - g.degree * gm.value) <= 10 * tol


def test_green_zero_when_bounded(h3, rng):
    pts = _probes(h3, rng, 300)
    bounded = escape_times(h3, pts[:, 0], pts[:, 1]) < 0
    assert bounded.any()
    for p in pts[bounded]:
        assert green(h3, p, 1).value == 0.0


@settings(max_examples=40, deadline=None)
@given(st.floats(-4, 4), st.floats(-4, 4), st.floats(-4, 4), st.floats(-4, 4))
def test_green_nonnegative(a, b, c, d):
    from henondim.io import load_fixture

    g = load_fixture("H1")
    assert green(g, (complex(a, b), complex(c, d))).value >= 0.0


def test_green_rejects_bad_arguments(h1):
    with pytest.raises(ValueError):
        green(h1, (0, 0), tol=0)
    with pytest.raises(ValueError):
        green(h1, (0, 0), sign=2)


def test_box_far_outside(h1):
    box = BoxR4((40.0, 0.0, 40.0, 0.0), 0.5)
    assert box_status(h1, box) == (BoxStatus.ALL_ESCAPE, BoxStatus.ALL_ESCAPE)


@pytest.mark.parametrize("w", H1_FIXED_W)
def test_box_at_saddle_is_mixed(h1, w):
    box = BoxR4((w, 0.0, w, 0.0), 1e-3)
    assert box_status(h1, box) == (BoxStatus.MIXED, BoxStatus.MIXED)


def test_probe_offsets_include_corners():
    offs = probe_offsets(16)
    assert offs.shape == (16, 4)
    assert set(map(tuple, np.abs(offs))) == {(1.0, 1.0, 1.0, 1.0)}
    with pytest.raises(ValueError):
        probe_offsets(15)


def test_more_probes_keep_mixed(h1, rng):
    centers = rng.uniform(-3, 3, (300, 4))
    hw = 0.2
    for forward in (True, False):
        b16, n16 = box_evidence(h1, centers, hw, 200, 16, forward)
        b256, n256 = box_evidence(h1, centers, hw, 200, 256, forward)
        mixed16 = (n16 > 0) & (b16 < 16)
        mixed256 = (n256 > 0) & (b256 < 256)
        assert np.all(mixed256[mixed16])
