"""Compositions of generalized Hénon maps of C^2.

A factor acts as ``(z, w) -> (w, P(w) + a*z)``.  A map is the composition
``g = g_1 o ... o g_m``; the factor list is stored in that written order, so
evaluation applies the *last* factor first.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

MAGNITUDE_CAP = 1e150


class MapError(ValueError):
    """Invalid polynomial, factor or map description."""


class RangeSignal(ArithmeticError):
    """An intermediate magnitude exceeded the cap.

    ``factor_index`` is the index (in written order) of the factor whose
    output overflowed; ``step`` is the map iterate reached, when known.
    """

    def __init__(self, factor_index: int, step: int | None = None, magnitude: float = math.inf):
        self.factor_index = factor_index
        self.step = step
        self.magnitude = magnitude
        where = f"factor {factor_index}" if step is None else f"step {step}, factor {factor_index}"
        super().__init__(f"magnitude {magnitude:.3g} exceeded cap at {where}")


class PointC2(NamedTuple):
    z: complex
    w: complex


def _as_complex(x) -> complex:
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise MapError(f"complex pair must have 2 entries, got {x!r}")
        return complex(float(x[0]), float(x[1]))
    return complex(x)


@dataclass(frozen=True)
class ComplexPolynomial:
    """Polynomial with coefficients in ascending power order."""

    coefficients: tuple[complex, ...]

    def __post_init__(self):
        coeffs = tuple(_as_complex(c) for c in self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)
        if not all(cmath.isfinite(c) for c in coeffs):
            raise MapError("polynomial coefficients must be finite")
        if len(coeffs) < 3:
            raise MapError(f"polynomial degree must be >= 2, got {len(coeffs) - 1}")
        if coeffs[-1] == 0:
            raise MapError("leading coefficient must be nonzero")

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def leading(self) -> complex:
        return self.coefficients[-1]

    def __call__(self, w):
        acc = self.coefficients[-1]
        for c in reversed(self.coefficients[:-1]):
            acc = acc * w + c
        return acc

    def derivative(self, w):
        d = self.degree
        acc = d * self.coefficients[-1]
        for k in range(d - 1, 0, -1):
            acc = acc * w + k * self.coefficients[k]
        return acc

    def scaled(self, factor: complex) -> "ComplexPolynomial":
        return ComplexPolynomial(tuple(factor * c for c in self.coefficients))


@dataclass(frozen=True)
class HenonFactor:
    poly: ComplexPolynomial
    twist: complex

    def __post_init__(self):
        if not isinstance(self.poly, ComplexPolynomial):
            object.__setattr__(self, "poly", ComplexPolynomial(tuple(self.poly)))
        twist = _as_complex(self.twist)
        object.__setattr__(self, "twist", twist)
        if twist == 0 or not cmath.isfinite(twist):
            raise MapError("twist a_i must be a nonzero finite complex number")

    @property
    def degree(self) -> int:
        return self.poly.degree


def factor_escape_radius(factor: HenonFactor, rtol: float = 1e-6) -> float:
    """Smallest r >= 1 past which one factor at least doubles |w| in the sector.

    The forward inequality is ``|lead| r^d - sum_{k<d} |c_k| r^k >= (2 + |a|) r``.
    The mirrored backward sector needs ``(1 + 2|a|) r`` on the right, which
    only matters when |a| > 1.  The left side minus the right has exactly one
    sign change in its coefficients, so the root found is the unique one.
    """
    c = [abs(x) for x in factor.poly.coefficients]
    d = len(c) - 1
    slack = max(2.0 + abs(factor.twist), 1.0 + 2.0 * abs(factor.twist))

    def margin(r: float) -> float:
        lower = sum(c[k] * r**k for k in range(d))
        return c[d] * r**d - lower - slack * r

    if margin(1.0) >= 0:
        return 1.0
    lo, hi = 1.0, 2.0
    while margin(hi) < 0:
        lo, hi = hi, 2.0 * hi
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if margin(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class HenonMap:
    factors: tuple[HenonFactor, ...]
    degree: int = field(init=False)
    det_product: complex = field(init=False)
    det_signed: complex = field(init=False)
    escape_radius: float = field(init=False)
    volume_increasing: bool = field(init=False)

    def __post_init__(self):
        factors = tuple(self.factors)
        if not factors:
            raise MapError("a map needs at least one factor")
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "degree", math.prod(f.degree for f in factors))
        det = complex(1.0)
        for f in factors:
            det *= f.twist
        object.__setattr__(self, "det_product", det)
        object.__setattr__(self, "det_signed", det * (-1) ** len(factors))
        object.__setattr__(self, "escape_radius", max(factor_escape_radius(f) for f in factors))
        object.__setattr__(self, "volume_increasing", abs(det) > 1.0)

    @property
    def m(self) -> int:
        return len(self.factors)

    @property
    def abs_det(self) -> float:
        return abs(self.det_product)

    def describe(self) -> dict:
        return {
            "factors": [
                {
                    "coeffs": [[c.real, c.imag] for c in f.poly.coefficients],
                    "a": [f.twist.real, f.twist.imag],
                }
                for f in self.factors
            ]
        }


def make_map(factors: Iterable) -> HenonMap:
    """Build a map from factors (``HenonFactor`` or ``(coeffs, a)`` pairs).

    Errors name the offending factor by its position in written order.
    """
    built = []
    for i, f in enumerate(factors):
        try:
            if isinstance(f, HenonFactor):
                built.append(f)
            elif isinstance(f, dict):
                built.append(HenonFactor(ComplexPolynomial(tuple(f["coeffs"])), f["a"]))
            else:
                coeffs, a = f
                built.append(HenonFactor(ComplexPolynomial(tuple(coeffs)), a))
        except (MapError, KeyError, TypeError, ValueError) as exc:
            raise MapError(f"factor {i}: {exc}") from exc
    if not built:
        raise MapError("a map needs at least one factor")
    return HenonMap(tuple(built))


def henon(coeffs: Sequence, a) -> HenonMap:
    """Single-factor shorthand: ``henon([-6, 0, 1], 0.3)`` is (w, w^2 - 6 + 0.3 z)."""
    return make_map([(coeffs, a)])


def inverse_map(g: HenonMap) -> HenonMap:
    """The map ``s o g^{-1} o s`` with ``s(z, w) = (w, z)``.

    Each conjugated inverse factor is again of Hénon form, with polynomial
    ``-P/a`` and twist ``1/a``; the order of factors reverses.
    """
    return HenonMap(
        tuple(HenonFactor(f.poly.scaled(-1.0 / f.twist), 1.0 / f.twist) for f in reversed(g.factors))
    )


def swap(p: PointC2) -> PointC2:
    return PointC2(p[1], p[0])


def _check(value: complex, idx: int, cap: float) -> None:
    mag = abs(value)
    if not mag <= cap:
        raise RangeSignal(idx, magnitude=mag)


def evaluate(g: HenonMap, p, cap: float = MAGNITUDE_CAP) -> PointC2:
    z, w = complex(p[0]), complex(p[1])
    for idx in range(g.m - 1, -1, -1):
        f = g.factors[idx]
        z, w = w, f.poly(w) + f.twist * z
        _check(w, idx, cap)
    return PointC2(z, w)


def evaluate_inverse(g: HenonMap, p, cap: float = MAGNITUDE_CAP) -> PointC2:
    z, w = complex(p[0]), complex(p[1])
    for idx, f in enumerate(g.factors):
        z, w = (w - f.poly(z)) / f.twist, z
        _check(z, idx, cap)
    return PointC2(z, w)


def factor_jacobian(f: HenonFactor, p) -> np.ndarray:
    return np.array([[0.0, 1.0], [f.twist, f.poly.derivative(p[1])]], dtype=complex)


def inverse_factor_jacobian(f: HenonFactor, p) -> np.ndarray:
    a = f.twist
    return np.array([[-f.poly.derivative(p[0]) / a, 1.0 / a], [1.0, 0.0]], dtype=complex)


def _step_with_jacobian(g: HenonMap, p, jac: np.ndarray, inverse: bool, cap: float):
    z, w = complex(p[0]), complex(p[1])
    if not inverse:
        for idx in range(g.m - 1, -1, -1):
            f = g.factors[idx]
            jac = factor_jacobian(f, (z, w)) @ jac
            z, w = w, f.poly(w) + f.twist * z
            _check(w, idx, cap)
    else:
        for idx, f in enumerate(g.factors):
            jac = inverse_factor_jacobian(f, (z, w)) @ jac
            z, w = (w - f.poly(z)) / f.twist, z
            _check(z, idx, cap)
    if not np.all(np.isfinite(jac)) or np.max(np.abs(jac)) > cap:
        raise RangeSignal(0 if not inverse else g.m - 1, magnitude=float(np.max(np.abs(jac))))
    return PointC2(z, w), jac


def jacobian(g: HenonMap, p, cap: float = MAGNITUDE_CAP) -> np.ndarray:
    """Dg(p) by the chain rule over the factors."""
    return _step_with_jacobian(g, p, np.eye(2, dtype=complex), False, cap)[1]


def iterate(g: HenonMap, p, n: int, cap: float = MAGNITUDE_CAP) -> PointC2:
    step = evaluate if n >= 0 else evaluate_inverse
    q = PointC2(complex(p[0]), complex(p[1]))
    for k in range(abs(n)):
        try:
            q = step(g, q, cap)
        except RangeSignal as sig:
            sig.step = k
            raise
    return q


def iterate_with_jacobian(g: HenonMap, p, n: int, cap: float = MAGNITUDE_CAP) -> tuple[PointC2, np.ndarray]:
    """``(g^n(p), Dg^n(p))``; negative ``n`` walks the inverse map."""
    q = PointC2(complex(p[0]), complex(p[1]))
    jac = np.eye(2, dtype=complex)
    for k in range(abs(n)):
        try:
            q, jac = _step_with_jacobian(g, q, jac, n < 0, cap)
        except RangeSignal as sig:
            sig.step = k
            raise
    return q, jac


def escape_radius(g: HenonMap) -> float:
    return g.escape_radius


# -- vectorised helpers used by the samplers ---------------------------------


def forward_arrays(g: HenonMap, z: np.ndarray, w: np.ndarray):
    for idx in range(g.m - 1, -1, -1):
        f = g.factors[idx]
        z, w = w, f.poly(w) + f.twist * z
    return z, w


def inverse_arrays(g: HenonMap, z: np.ndarray, w: np.ndarray):
    for f in g.factors:
        z, w = (w - f.poly(z)) / f.twist, z
    return z, w


def spectral_norm(mats: np.ndarray) -> np.ndarray:
    """Largest singular value of 2x2 complex matrices, shape (..., 2, 2)."""
    a = np.abs(mats) ** 2
    fro2 = a.sum(axis=(-1, -2))
    det = np.abs(mats[..., 0, 0] * mats[..., 1, 1] - mats[..., 0, 1] * mats[..., 1, 0])
    disc = np.sqrt(np.maximum(fro2 * fro2 - 4.0 * det * det, 0.0))
    return np.sqrt(0.5 * (fro2 + disc))
