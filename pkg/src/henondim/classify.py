"""Escape-time classification into K+/K-, Green functions and box status.

Forward escape is certified by the sector ``{|w| > R, |w| >= |z|}``, backward
escape by its mirror ``{|z| > R, |z| >= |w|}``.  Once an orbit enters its
sector every further factor at least doubles the dominant coordinate.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .algebra import HenonMap, PointC2, forward_arrays, inverse_arrays

DEFAULT_NMAX = 200
DEFAULT_GREEN_TOL = 1e-9
# above this modulus the lower-order terms are below double precision
_LOG_SWITCH = 1e20
# an orbit returning this close (relative) to its start is taken as periodic
RETURN_TOL = 1e-9


class Status(str, enum.Enum):
    ESCAPED = "escaped"
    BOUNDED = "bounded"


@dataclass(frozen=True)
class EscapeResult:
    status: Status
    steps: int
    last_point: PointC2

    @property
    def escaped(self) -> bool:
        return self.status is Status.ESCAPED


@dataclass(frozen=True)
class GreenValue:
    value: float
    iterations_used: int
    converged: bool


class BoxStatus(str, enum.Enum):
    ALL_ESCAPE = "AllEscape"
    ALL_BOUNDED = "AllBounded"
    MIXED = "Mixed"


@dataclass(frozen=True)
class BoxR4:
    """Axis-aligned cube in R^4 = C^2 with coordinates (Re z, Im z, Re w, Im w)."""

    center: tuple[float, float, float, float]
    half_width: float

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def point(self) -> PointC2:
        c = self.center
        return PointC2(complex(c[0], c[1]), complex(c[2], c[3]))

    def contains(self, p, slack: float = 0.0) -> bool:
        coords = (p[0].real, p[0].imag, p[1].real, p[1].imag)
        return all(abs(x - c) <= self.half_width * (1 + slack) for x, c in zip(coords, self.center))


def _in_sector(z, w, radius, forward: bool):
    az, aw = np.abs(z), np.abs(w)
    if forward:
        return (aw > radius) & (aw >= az)
    return (az > radius) & (az >= aw)


def escape_times(
    g: HenonMap,
    z,
    w,
    n_max: int = DEFAULT_NMAX,
    forward: bool = True,
    radius: float | None = None,
) -> np.ndarray:
    """Vectorised escape step per point, ``-1`` for still bounded at ``n_max``."""
    radius = g.escape_radius if radius is None else radius
    z = np.array(z, dtype=complex).ravel()
    w = np.array(w, dtype=complex).ravel()
    out = np.full(z.shape, -1, dtype=np.int64)
    active = np.arange(z.size)
    z0, w0 = z.copy(), w.copy()
    scale = RETURN_TOL * np.maximum(1.0, np.maximum(np.abs(z0), np.abs(w0)))
    step = forward_arrays if forward else inverse_arrays
    with np.errstate(all="ignore"):
        for n in range(n_max + 1):
            hit = _in_sector(z, w, radius, forward)
            # non-finite values only arise after leaving V, treat as escaped
            hit |= ~(np.isfinite(z) & np.isfinite(w))
            out[active[hit]] = n
            keep = ~hit
            if n > 0:
                # numerically periodic: stays bounded
                keep &= np.maximum(np.abs(z - z0[active]), np.abs(w - w0[active])) > scale[active]
            active, z, w = active[keep], z[keep], w[keep]
            if active.size == 0 or n == n_max:
                break
            z, w = step(g, z, w)
    return out


def _classify(g: HenonMap, p, n_max: int, forward: bool, radius: float | None) -> EscapeResult:
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    radius = g.escape_radius if radius is None else radius
    z, w = np.array([complex(p[0])]), np.array([complex(p[1])])
    z0, w0 = z[0], w[0]
    scale = RETURN_TOL * max(1.0, abs(z0), abs(w0))
    step = forward_arrays if forward else inverse_arrays
    with np.errstate(all="ignore"):
        for n in range(n_max + 1):
            if _in_sector(z, w, radius, forward)[0] or not (np.isfinite(z[0]) and np.isfinite(w[0])):
                return EscapeResult(Status.ESCAPED, n, PointC2(complex(z[0]), complex(w[0])))
            if n > 0 and max(abs(z[0] - z0), abs(w[0] - w0)) <= scale:
                return EscapeResult(Status.BOUNDED, n_max, PointC2(complex(z[0]), complex(w[0])))
            if n < n_max:
                z, w = step(g, z, w)
    return EscapeResult(Status.BOUNDED, n_max, PointC2(complex(z[0]), complex(w[0])))


def classify_forward(g: HenonMap, p, n_max: int = DEFAULT_NMAX, radius: float | None = None) -> EscapeResult:
    return _classify(g, p, n_max, True, radius)


def classify_backward(g: HenonMap, p, n_max: int = DEFAULT_NMAX, radius: float | None = None) -> EscapeResult:
    return _classify(g, p, n_max, False, radius)


def green(
    g: HenonMap,
    p,
    sign: int = 1,
    tol: float = DEFAULT_GREEN_TOL,
    n_max: int = DEFAULT_NMAX,
    max_extra: int = 400,
) -> GreenValue:
    """Escape-rate potential ``lim d^-n log+ |g^{+-n}(p)|`` (sup norm).

    Orbits are iterated directly until they sit in the escape sector with a
    dominant coordinate above 1e20; from there the log-modulus obeys
    ``L -> d_i L + log|lead_i|`` (forward) or ``d_i L + log|lead_i / a_i|``
    (backward) to full double precision, which sidesteps overflow.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    forward = sign > 0
    m, d, radius = g.m, g.degree, g.escape_radius
    if forward:
        order = list(range(m - 1, -1, -1))
    else:
        order = list(range(m))
    z, w = complex(p[0]), complex(p[1])
    start, scale = (z, w), RETURN_TOL * max(1.0, abs(z), abs(w))
    log_mod: float | None = None  # log of dominant coordinate once in log phase
    escaped_at: int | None = None
    prev = None
    n = 0
    while True:
        if log_mod is None:
            dom = max(abs(z), abs(w))
            current = math.log(dom) if dom > 1.0 else 0.0
        else:
            current = max(log_mod, 0.0)
        value = current / float(d) ** n
        if escaped_at is None:
            if (abs(w) > radius and abs(w) >= abs(z)) if forward else (abs(z) > radius and abs(z) >= abs(w)):
                escaped_at = n
            elif n >= n_max or (n > 0 and max(abs(z - start[0]), abs(w - start[1])) <= scale):
                return GreenValue(0.0, n, False)
        if escaped_at is not None and prev is not None and abs(value - prev) < tol:
            return GreenValue(value, n, True)
        if escaped_at is not None and n - escaped_at > max_extra:
            return GreenValue(value, n, False)
        prev = value if escaped_at is not None else None
        for idx in order:
            f = g.factors[idx]
            if log_mod is None:
                if forward:
                    z, w = w, f.poly(w) + f.twist * z
                    dom_now, in_sec = abs(w), abs(w) > radius and abs(w) >= abs(z)
                else:
                    z, w = (w - f.poly(z)) / f.twist, z
                    dom_now, in_sec = abs(z), abs(z) > radius and abs(z) >= abs(w)
                if in_sec and dom_now > _LOG_SWITCH:
                    log_mod = math.log(dom_now)
            else:
                lead = abs(f.poly.leading) if forward else abs(f.poly.leading / f.twist)
                log_mod = f.degree * log_mod + math.log(lead)
        n += 1


def probe_offsets(probes: int) -> np.ndarray:
    """Regular ``k^4`` grid on [-1, 1]^4; k = 2 gives the 16 corners.

    Grids with k >= 2 always contain the corners, so evidence only grows
    with the probe count.
    """
    k = round(probes ** 0.25)
    if k**4 != probes or k < 2:
        raise ValueError("probes must be k**4 with k >= 2 (16, 81, 256, ...)")
    axis = np.linspace(-1.0, 1.0, k)
    grid = np.stack(np.meshgrid(axis, axis, axis, axis, indexing="ij"), axis=-1)
    return grid.reshape(-1, 4)


def probe_points(centers: np.ndarray, half_width: float, probes: int):
    """Probe coordinates for many boxes at once: arrays (n_boxes, probes) of z, w."""
    off = probe_offsets(probes) * half_width
    pts = centers[:, None, :] + off[None, :, :]
    z = pts[..., 0] + 1j * pts[..., 1]
    w = pts[..., 2] + 1j * pts[..., 3]
    return z, w


def escape_distance(
    g: HenonMap,
    z,
    w,
    n_max: int = DEFAULT_NMAX,
    forward: bool = True,
    radius: float | None = None,
    big: float = 1e6,
) -> tuple[np.ndarray, np.ndarray]:
    """Escape step and estimated distance to K+ (forward) or K- (backward).

    For escaping points the estimate is ``G / |grad G|`` evaluated as
    ``|u_n| log|u_n| / |d u_n|`` once the dominant coordinate ``u_n`` of the
    orbit exceeds ``big``; the derivative row is carried with a running log
    scale.  Bounded points get distance 0 and step -1.
    """
    radius = g.escape_radius if radius is None else radius
    z = np.array(z, dtype=complex).ravel()
    w = np.array(w, dtype=complex).ravel()
    npts = z.size
    times = np.full(npts, -1, dtype=np.int64)
    dist = np.zeros(npts)
    z0, w0 = z.copy(), w.copy()
    ret = RETURN_TOL * np.maximum(1.0, np.maximum(np.abs(z0), np.abs(w0)))
    active = np.arange(npts)
    # derivative matrix rows (r0 = d z_n, r1 = d w_n), each a 2-vector
    r0 = np.tile(np.array([1.0 + 0j, 0.0]), (npts, 1))
    r1 = np.tile(np.array([0.0 + 0j, 1.0]), (npts, 1))
    logscale = np.zeros(npts)
    order = range(g.m - 1, -1, -1) if forward else range(g.m)
    with np.errstate(all="ignore"):
        for n in range(n_max + 1):
            dom = np.abs(w) if forward else np.abs(z)
            sector = _in_sector(z, w, radius, forward)
            fresh = sector & (times[active] < 0)
            times[active[fresh]] = n
            bad = ~(np.isfinite(z) & np.isfinite(w))
            done = sector & (dom > big)
            row = r1 if forward else r0
            rn = np.linalg.norm(row[done], axis=1)
            dist[active[done]] = np.exp(np.log(np.log(dom[done])) + np.log(dom[done]) - logscale[done] - np.log(rn))
            times[active[bad & (times[active] < 0)]] = n
            dist[active[bad]] = np.inf
            keep = ~(done | bad)
            if n > 0:
                back = np.maximum(np.abs(z - z0[active]), np.abs(w - w0[active])) <= ret[active]
                keep &= ~(back & (times[active] < 0))
            if n == n_max:
                # still escaping slowly: no estimate, treat as far
                esc = keep & (times[active] >= 0)
                dist[active[esc]] = np.inf
                break
            active, z, w = active[keep], z[keep], w[keep]
            r0, r1, logscale = r0[keep], r1[keep], logscale[keep]
            if active.size == 0:
                break
            for idx in order:
                f = g.factors[idx]
                if forward:
                    dp = f.poly.derivative(w)
                    r0, r1 = r1, f.twist * r0 + dp[:, None] * r1
                    z, w = w, f.poly(w) + f.twist * z
                else:
                    dp = f.poly.derivative(z)
                    r0, r1 = (r1 - dp[:, None] * r0) / f.twist, r0
                    z, w = (w - f.poly(z)) / f.twist, z
                scale = np.maximum(np.abs(r0).max(axis=1), np.abs(r1).max(axis=1))
                scale = np.where(scale > 0, scale, 1.0)
                r0, r1 = r0 / scale[:, None], r1 / scale[:, None]
                logscale = logscale + np.log(scale)
    return times, dist


# a box is taken to touch K+- when a probe lies within this many half-widths
TOUCH_FACTOR = 4.0


def box_evidence(
    g: HenonMap,
    centers: np.ndarray,
    half_width: float,
    n_max: int,
    probes: int,
    forward: bool,
    radius: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Per box: (probes bounded at ``n_max``, probes bounded or estimated near K)."""
    z, w = probe_points(np.asarray(centers, dtype=float).reshape(-1, 4), half_width, probes)
    times, dist = escape_distance(g, z.ravel(), w.ravel(), n_max, forward, radius)
    times, dist = times.reshape(z.shape), dist.reshape(z.shape)
    bounded = (times < 0).sum(axis=1)
    near = ((times < 0) | (dist <= TOUCH_FACTOR * half_width)).sum(axis=1)
    return bounded, near


def status_from_evidence(bounded: np.ndarray, near: np.ndarray, total: int) -> list[BoxStatus]:
    def one(b: int, n: int) -> BoxStatus:
        if b == total:
            return BoxStatus.ALL_BOUNDED
        return BoxStatus.ALL_ESCAPE if n == 0 else BoxStatus.MIXED

    return [one(int(b), int(n)) for b, n in zip(np.ravel(bounded), np.ravel(near))]


def box_status(
    g: HenonMap,
    box: BoxR4,
    n_max: int = DEFAULT_NMAX,
    probes: int = 16,
    radius: float | None = None,
) -> tuple[BoxStatus, BoxStatus]:
    """(forward, backward) status of one box.

    ``Mixed`` means the box meets the numerical boundary of K+- : some probe
    escapes while some probe is bounded or, by the distance estimate, lies
    within ``TOUCH_FACTOR`` half-widths of K+-.
    """
    centers = np.array([box.center])
    out = []
    for forward in (True, False):
        b, near = box_evidence(g, centers, box.half_width, n_max, probes, forward, radius)
        out.append(status_from_evidence(b, near, probes)[0])
    return out[0], out[1]
