"""Pressure functions, Bowen-Ruelle roots and box counting."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .algebra import HenonMap, PointC2
from .julia import (
    GENERIC_VECTOR,
    JuliaSample,
    OrbitSegments,
    PeriodicSearch,
    SaddleOrbit,
    Target,
    factor_of_step,
    julia_points,
)

log = logging.getLogger(__name__)


class PressureError(ValueError):
    pass


class Side(str, enum.Enum):
    UNSTABLE = "unstable"
    STABLE = "stable"


@dataclass(frozen=True)
class PressureCurve:
    side: Side
    n: int
    points: tuple[tuple[float, float], ...]
    estimator: str = "periodic"

    @property
    def t(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def values(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    def is_strictly_decreasing(self) -> bool:
        v = self.values
        return bool(np.all(np.diff(v) < 0))


def _orbits(item) -> tuple[list[SaddleOrbit], int]:
    orbits = item.orbits if isinstance(item, PeriodicSearch) else list(item)
    if not orbits:
        raise PressureError("pressure needs at least one periodic orbit")
    periods = {o.period for o in orbits}
    if len(periods) != 1:
        raise PressureError(f"orbits mix periods {sorted(periods)}")
    return orbits, periods.pop()


def log_sum_exp_sorted(exponents: Iterable[float], weights: Iterable[float] | None = None) -> float:
    """``log sum w_k exp(x_k)``, shifting by the max and summing in ascending order."""
    x = np.asarray(list(exponents), dtype=float)
    w = np.ones_like(x) if weights is None else np.asarray(list(weights), dtype=float)
    top = float(x.max())
    terms = sorted((w * np.exp(x - top)).tolist())
    return top + math.log(math.fsum(terms))


def pressure_periodic(orbits, t: float, side: Side | str = Side.UNSTABLE) -> float:
    """Periodic-orbit pressure ``(1/n) log sum_{p in Fix(g^n)} |lambda(p)|^{-+t}``.

    Each orbit stands for its ``primitive_period`` points, all sharing the
    same multipliers.
    """
    side = Side(side)
    if t < 0:
        raise PressureError("t must be non-negative")
    orbits, n = _orbits(orbits)
    if side is Side.UNSTABLE:
        x = [-t * math.log(abs(o.lambda_u)) for o in orbits]
    else:
        x = [t * math.log(abs(o.lambda_s)) for o in orbits]
    return log_sum_exp_sorted(x, [o.primitive_period for o in orbits]) / n


def pressure_curve(orbits, t_grid: Sequence[float], side: Side | str = Side.UNSTABLE) -> PressureCurve:
    orbits, n = _orbits(orbits)
    pts = tuple((float(t), pressure_periodic(orbits, float(t), side)) for t in t_grid)
    return PressureCurve(Side(side), n, pts, "periodic")


def bowen_ruelle_root(
    fn: Callable[[float], float],
    bracket: tuple[float, float] = (0.0, 2.0),
    tol: float = 1e-9,
    expand_to: float = 4.0,
) -> float:
    """Zero of a decreasing function by bisection, stopping at width < ``tol``."""
    lo, hi = float(bracket[0]), float(bracket[1])
    f_lo = fn(lo)
    if not f_lo > 0:
        raise PressureError(f"pressure at t={lo} is {f_lo:.6g}, not positive")
    f_hi = fn(hi)
    while not f_hi < 0 and hi < expand_to:
        hi = min(2.0 * hi, expand_to)
        log.warning("expanding Bowen-Ruelle bracket to t=%g", hi)
        f_hi = fn(hi)
    if not f_hi < 0:
        raise PressureError(f"no sign change of pressure on [{lo}, {hi}]")
    while hi - lo >= tol:
        mid = 0.5 * (lo + hi)
        if fn(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def root_periodic(orbits, side: Side | str = Side.UNSTABLE, **kw) -> float:
    orbits, _ = _orbits(orbits)
    return bowen_ruelle_root(lambda t: pressure_periodic(orbits, t, side), **kw)


# -- separated sets -------------------------------------------------------------


@dataclass(frozen=True)
class SeparatedSet:
    """A maximal (n, epsilon)-separated subset of probe orbits.

    ``orbits`` has shape (size, n, 2): the first ``n`` iterates of each point.
    """

    points: tuple[PointC2, ...]
    n: int
    epsilon: float
    orbits: np.ndarray
    weights_u: np.ndarray
    weights_s: np.ndarray

    def __len__(self) -> int:
        return len(self.points)


def bowen_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Max over iterates of the Euclidean distance; ``a`` (..., n, 2), ``b`` (n, 2)."""
    return np.sqrt((np.abs(a - b) ** 2).sum(axis=-1)).max(axis=-1)


def greedy_separated(orbits: np.ndarray, epsilon: float) -> np.ndarray:
    """Indices of a maximal epsilon-separated subset, scanning in the given order."""
    chosen: list[int] = []
    for i in range(len(orbits)):
        if not chosen or bowen_distance(orbits[chosen], orbits[i]).min() >= epsilon:
            chosen.append(i)
    return np.array(chosen, dtype=int)


def _jacobians(g: HenonMap, seg: OrbitSegments, j: int, inverse: bool) -> np.ndarray:
    """Batched factor Jacobians at factor step ``j`` (or its inverse)."""
    pos = j - seg.j0
    count = len(seg)
    jac = np.zeros((count, 2, 2), dtype=complex)
    if not inverse:
        f = g.factors[int(factor_of_step(g, j))]
        jac[:, 0, 1] = 1.0
        jac[:, 1, 0] = f.twist
        jac[:, 1, 1] = f.poly.derivative(seg.u[:, pos])
    else:
        # inverse of the step that produced (u[j], u[j+1]) from (u[j-1], u[j])
        f = g.factors[int(factor_of_step(g, j))]
        jac[:, 0, 0] = -f.poly.derivative(seg.u[:, pos]) / f.twist
        jac[:, 0, 1] = 1.0 / f.twist
        jac[:, 1, 0] = 1.0
    return jac


def _push(mats: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    v = np.einsum("kij,kj->ki", mats, v)
    norm = np.linalg.norm(v, axis=1)
    return v / norm[:, None], np.log(norm)


def birkhoff_weights(g: HenonMap, seg: OrbitSegments, n: int, m_dir: int) -> tuple[np.ndarray, np.ndarray]:
    """Birkhoff sums over ``n`` steps of log|Dg| along E^u and E^s.

    E^u at each base point is the pushforward of a generic vector over
    ``m_dir`` past steps; E^s at the base point is the pullback from
    ``n + m_dir`` steps ahead.  Needs ``seg.past >= m_dir`` and
    ``seg.future >= n + m_dir``.
    """
    m = g.m
    if seg.past < m_dir or seg.future < n + m_dir:
        raise PressureError("orbit segments too short for the requested weights")
    count = len(seg)
    v = np.tile(GENERIC_VECTOR, (count, 1))
    su = np.zeros(count)
    for j in range(-m_dir * m, n * m):
        v, growth = _push(_jacobians(g, seg, j, False), v)
        if j >= 0:
            su += growth
    # pull a generic vector back from step (n + m_dir) m to 0; the forward
    # growth over the first n steps along E^s equals minus the backward
    # growth over the same steps.
    v = np.tile(GENERIC_VECTOR, (count, 1))
    ss = np.zeros(count)
    for j in range((n + m_dir) * m - 1, -1, -1):
        v, growth = _push(_jacobians(g, seg, j, True), v)
        if j < n * m:
            ss -= growth
    return su, ss


def separated_set(
    g: HenonMap,
    sample: JuliaSample,
    n: int,
    epsilon: float,
    m_dir: int = 12,
    probes: int = 4000,
    seed: int = 0,
) -> SeparatedSet:
    """Greedy maximal (n, epsilon)-separated set of exact orbit segments near J.

    Probe orbits are two-sided segments from ``julia_points``; they are
    scanned in lexicographic order of their base point coordinates.
    """
    if sample.target is not Target.J:
        raise PressureError(f"separated sets need a J sample, got {sample.target.value}")
    if m_dir < 10:
        raise PressureError("m_dir must be at least 10")
    if n < 1 or not epsilon > 0:
        raise PressureError("need n >= 1 and epsilon > 0")
    seg = julia_points(g, sample, Target.J, probes, past=m_dir, future=n + m_dir, seed=seed)
    if len(seg) == 0:
        raise PressureError("no probe orbits found near J")
    orbits = np.stack([seg.orbit_point(k) for k in range(n)], axis=1)
    base = orbits[:, 0, :]
    order = np.lexsort((base[:, 1].imag, base[:, 1].real, base[:, 0].imag, base[:, 0].real))
    keep = order[greedy_separated(orbits[order], epsilon)]
    if len(keep) < 2:
        raise PressureError(
            f"(n={n}, eps={epsilon}) separated set has {len(keep)} point(s); refine the sample or lower eps"
        )
    sub = OrbitSegments(seg.u[keep], seg.j0, seg.m, seg.past, seg.future)
    su, ss = birkhoff_weights(g, sub, n, m_dir)
    pts = tuple(PointC2(complex(p[0]), complex(p[1])) for p in base[keep])
    return SeparatedSet(pts, n, float(epsilon), orbits[keep], su, ss)


def pressure_from_set(fset: SeparatedSet, t: float, side: Side | str = Side.UNSTABLE) -> float:
    side = Side(side)
    x = -t * fset.weights_u if side is Side.UNSTABLE else t * fset.weights_s
    return log_sum_exp_sorted(x) / fset.n


def pressure_separated(
    g: HenonMap,
    sample: JuliaSample,
    n: int,
    epsilon: float,
    t: float,
    side: Side | str = Side.UNSTABLE,
    m_dir: int = 12,
    probes: int = 4000,
    seed: int = 0,
    estimator: str = "ratio",
) -> float:
    """Separated-set pressure with weights ``exp(-+t S_n phi)``.

    ``estimator="mean"`` returns ``(1/n) log Z_n``.  The base point already
    fixes one symbol of the past through its z-coordinate, so ``|F_n|`` is a
    bounded multiple of ``exp(n h)`` rather than ``exp(n h)`` itself, and the
    mean carries a ``log(C)/n`` bias.  ``estimator="ratio"`` (the default)
    returns ``log Z_n - log Z_{n-1}`` at the same epsilon, which cancels the
    constant.
    """
    if estimator not in ("ratio", "mean"):
        raise PressureError(f"unknown estimator {estimator!r}")
    fset = separated_set(g, sample, n, epsilon, m_dir, probes, seed)
    value = pressure_from_set(fset, t, side)
    if estimator == "mean":
        return value
    if n < 2:
        raise PressureError("the ratio estimator needs n >= 2")
    prev = separated_set(g, sample, n - 1, epsilon, m_dir, probes, seed)
    return n * value - (n - 1) * pressure_from_set(prev, t, side)


def default_epsilon(fixed_points: Sequence) -> float:
    """A separation scale of 0.3 times the smallest gap between fixed points."""
    pts = [np.array([complex(p[0]), complex(p[1])]) for p in fixed_points]
    gaps = [np.linalg.norm(a - b) for i, a in enumerate(pts) for b in pts[i + 1 :]]
    if not gaps:
        raise PressureError("need two fixed points to pick a default epsilon")
    return 0.3 * float(min(gaps))


# -- box counting -----------------------------------------------------------------


@dataclass(frozen=True)
class BoxFit:
    estimate: float
    intercept: float
    residual: float
    fit_points: tuple[tuple[float, int], ...]

    @property
    def octaves(self) -> float:
        eps = [e for e, _ in self.fit_points]
        return math.log2(max(eps) / min(eps))


def box_dimension_counts(scales: Sequence[float], counts: Sequence[int]) -> BoxFit:
    """Least-squares slope of log N(eps) against log(1/eps)."""
    eps = np.asarray(scales, dtype=float)
    num = np.asarray(counts, dtype=float)
    if len(eps) != len(num) or len(eps) < 2:
        raise PressureError("need matching scales and counts, at least two of each")
    if np.any(eps <= 0) or np.any(num < 1):
        raise PressureError("scales must be positive and counts at least 1")
    x, y = np.log(1.0 / eps), np.log(num)
    if np.ptp(x) == 0:
        raise PressureError("degenerate fit: all scales equal")
    slope, icpt = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + icpt)) ** 2)))
    return BoxFit(float(slope), float(icpt), resid, tuple((float(e), int(c)) for e, c in zip(eps, num)))


def box_dimension(sample: JuliaSample, levels: Sequence[int] | None = None, min_scales: int = 4) -> BoxFit:
    """Box-counting slope from the ancestors of the sample's leaves.

    At level ``k`` the boxes have side ``eps = 2 R / 2^k``.  The default
    uses the deepest ``min(depth, 5)`` levels, skipping the coarsest ones.
    """
    if levels is None:
        top = sample.depth
        levels = list(range(max(1, top - 4), top + 1))
    levels = sorted(set(int(k) for k in levels))
    if len(levels) < min_scales:
        raise PressureError(f"need at least {min_scales} scales, got {len(levels)}")
    if levels[-1] - levels[0] < 2:
        raise PressureError("scales must span at least two octaves")
    scales = [2.0 * sample.radius / 2**k for k in levels]
    counts = [sample.counts_at(k) for k in levels]
    return box_dimension_counts(scales, counts)
