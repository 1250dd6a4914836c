"""Derivative growth rates: s-bar/s-under from periodic data, s+- from norms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .algebra import HenonMap, spectral_norm
from .julia import (
    JuliaSample,
    OrbitSegments,
    PeriodicSearch,
    SaddleOrbit,
    Target,
    factor_of_step,
    julia_points,
    periodic_segments,
)


class RateError(ValueError):
    pass


@dataclass
class GrowthRates:
    """Extremes of ``(1/n) log|lambda_u|`` over Fix(g^n).

    ``per_n`` rows are ``(n, max, min)``; the point estimates come from the
    largest ``n`` and ``trend_gap`` compares it with the previous one.
    """

    s_bar: float
    s_under: float
    per_n: list[tuple[int, float, float]]
    source: str = "periodic orbits"

    @property
    def trend_gap(self) -> tuple[float, float]:
        if len(self.per_n) < 2:
            return (math.nan, math.nan)
        (_, a1, b1), (_, a0, b0) = self.per_n[-1], self.per_n[-2]
        return (abs(a1 - a0), abs(b1 - b0))

    def at(self, n: int) -> tuple[float, float]:
        for k, hi, lo in self.per_n:
            if k == n:
                return hi, lo
        raise KeyError(n)


def _orbit_list(item) -> list[SaddleOrbit]:
    if isinstance(item, PeriodicSearch):
        return item.orbits
    return list(item)


def growth_rates_periodic(orbits_by_n: Mapping[int, Sequence[SaddleOrbit] | PeriodicSearch]) -> GrowthRates:
    rows = []
    for n in sorted(orbits_by_n):
        orbits = _orbit_list(orbits_by_n[n])
        if not orbits:
            raise RateError(f"no saddle orbits for n={n}")
        vals = [math.log(abs(o.lambda_u)) / n for o in orbits]
        rows.append((n, max(vals), min(vals)))
    if not rows:
        raise RateError("no orbit lists given")
    return GrowthRates(rows[-1][1], rows[-1][2], rows)


@dataclass
class NormRates:
    """``(1/n) log max ||Dg^{+-n}||`` over probe points of J+- in V."""

    sign: int
    value: float
    per_n: list[tuple[int, float]]
    radius_used: float
    probes_used: int
    probes_dropped: dict[int, int] = field(default_factory=dict)

    @property
    def s_plus(self) -> float:
        return self.value if self.sign > 0 else math.nan

    @property
    def s_minus(self) -> float:
        return self.value if self.sign < 0 else math.nan


def _segment_norms(g: HenonMap, seg: OrbitSegments, n: int, sign: int, radius: float):
    """Spectral norms of Dg^{sign n} at each base point; NaN if the orbit leaves V."""
    m = g.m
    count = len(seg)
    mats = np.tile(np.eye(2, dtype=complex), (count, 1, 1))
    inside = np.ones(count, dtype=bool)
    # walk factor by factor along the stored sequence
    for step in range(n * m):
        if sign > 0:
            j = step  # factor step j maps (u[j-1], u[j]) -> (u[j], u[j+1])
            pos = j - seg.j0
            zc, wc = seg.u[:, pos - 1], seg.u[:, pos]
            f = g.factors[int(factor_of_step(g, j))]
            jac = np.zeros((count, 2, 2), dtype=complex)
            jac[:, 0, 1] = 1.0
            jac[:, 1, 0] = f.twist
            jac[:, 1, 1] = f.poly.derivative(wc)
            nxt = seg.u[:, pos + 1]
            inside &= np.maximum(np.abs(wc), np.abs(nxt)) <= radius * (1 + 1e-12)
        else:
            j = -step  # inverse of factor step j-1: (u[j-1], u[j]) -> (u[j-2], u[j-1])
            pos = j - seg.j0
            zc, wc = seg.u[:, pos - 1], seg.u[:, pos]
            f = g.factors[int(factor_of_step(g, j - 1))]
            jac = np.zeros((count, 2, 2), dtype=complex)
            jac[:, 0, 0] = -f.poly.derivative(zc) / f.twist
            jac[:, 0, 1] = 1.0 / f.twist
            jac[:, 1, 0] = 1.0
            prev = seg.u[:, pos - 2]
            inside &= np.maximum(np.abs(zc), np.abs(prev)) <= radius * (1 + 1e-12)
        mats = jac @ mats
    norms = spectral_norm(mats)
    return np.where(inside, norms, np.nan)


def norm_rates(
    g: HenonMap,
    sample: JuliaSample | OrbitSegments,
    n_list: Sequence[int],
    sign: int,
    probes: int = 2000,
    seed: int = 0,
    radius: float | None = None,
    orbits: Sequence[SaddleOrbit] = (),
) -> NormRates:
    """Estimate s+ (``sign=+1``) or s- (``sign=-1``).

    Probe points come from exact orbit segments anchored on the sample (see
    ``julia_points``), long enough to supply ``max(n_list)`` iterates in the
    relevant direction.  Saddle cycles passed as ``orbits`` join the probe
    set as exact periodic segments; they lie on J, hence on both J+ and J-,
    and they carry the largest growth that short random segments tend to
    miss.  Probes whose orbit leaves V early are dropped.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    n_list = sorted(int(n) for n in n_list)
    if not n_list or n_list[0] < 1:
        raise ValueError("n_list must hold positive integers")
    if isinstance(sample, JuliaSample):
        allowed = {1: (Target.JPLUS, Target.J), -1: (Target.JMINUS, Target.KMINUS, Target.J)}[sign]
        if sample.target not in allowed:
            raise RateError(f"sample target {sample.target.value} does not match sign {sign:+d}")
        radius = sample.radius if radius is None else radius
        kind = Target.JPLUS if sign > 0 else Target.JMINUS
        n_top = n_list[-1]
        seg = julia_points(
            g, sample, kind, probes, past=n_top + 4, future=n_top + 4, seed=seed, radius=radius
        )
    else:
        seg = sample
        radius = g.escape_radius if radius is None else radius
    if len(orbits):
        kind = Target.JPLUS if sign > 0 else Target.JMINUS
        extra = periodic_segments(g, orbits, kind, past=seg.past, future=seg.future)
        if extra.j0 != seg.j0 or extra.u.shape[1] != seg.u.shape[1]:
            raise RateError("probe segments and periodic segments have different layouts")
        seg = OrbitSegments(np.concatenate([seg.u, extra.u]), seg.j0, seg.m, seg.past, seg.future)
    if len(seg) == 0:
        raise RateError("no probe points on J+-")
    rows, dropped = [], {}
    for n in n_list:
        if (sign > 0 and n > seg.future) or (sign < 0 and n > seg.past):
            raise RateError(f"segments too short for n={n}")
        norms = _segment_norms(g, seg, n, sign, radius)
        ok = np.isfinite(norms)
        dropped[n] = int((~ok).sum())
        if not ok.any():
            raise RateError(f"all probes left V before {n} steps")
        rows.append((n, float(np.log(norms[ok].max()) / n)))
    return NormRates(sign, rows[-1][1], rows, float(radius), len(seg), dropped)


def holder_bound(g: HenonMap, value: float) -> tuple[float, float]:
    """(Hölder exponent log d / s, Hausdorff lower bound 2 + log d / s)."""
    if isinstance(value, NormRates):
        value = value.value
    if not value > 0 or not math.isfinite(value):
        raise RateError(f"growth rate must be positive and finite, got {value}")
    expo = math.log(g.degree) / value
    return expo, 2.0 + expo
