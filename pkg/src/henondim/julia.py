"""Box coverings of J, J+, J-, K- and saddle periodic orbits.

Orbits are handled through the w-sequence: every factor step sends
``(u[j-1], u[j])`` to ``(u[j], u[j+1])`` with ``u[j+1] = P(u[j]) + a u[j-1]``.
Periodic orbits and long bounded orbit segments are found with Newton's
method on that recurrence (multiple shooting), whose basins do not shrink
with the period the way those of ``g^n - id`` do.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .algebra import HenonMap, PointC2, evaluate, evaluate_inverse, jacobian
from .classify import DEFAULT_NMAX, BoxR4, box_evidence

GENERIC_VECTOR = np.array([0.6 + 0.2j, 0.5 - 0.7j]) / math.sqrt(0.4 + 0.74)


class Target(str, enum.Enum):
    J = "J"
    JPLUS = "Jplus"
    JMINUS = "Jminus"
    KMINUS = "Kminus"


class SampleError(RuntimeError):
    pass


class BackwardEscapeError(RuntimeError):
    def __init__(self, step: int):
        self.step = step
        super().__init__(f"backward orbit left V at step {step}")


# -- box subdivision ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class JuliaSample:
    """Leaves of a dyadic subdivision of the cube [-R, R]^4.

    ``indices`` holds integer lattice coordinates at level ``depth``; the
    leaf centred at index ``i`` sits at ``-R + (2 i + 1) * resolution``.
    """

    indices: np.ndarray
    depth: int
    radius: float
    target: Target
    n_max: int
    probes: int = 16

    @property
    def resolution(self) -> float:
        return self.radius / 2**self.depth

    @cached_property
    def centers(self) -> np.ndarray:
        return -self.radius + (2 * self.indices + 1) * self.resolution

    @property
    def boxes(self) -> list[BoxR4]:
        return [BoxR4(tuple(c), self.resolution) for c in self.centers]

    def __len__(self) -> int:
        return len(self.indices)

    def coordinate_pool(self) -> np.ndarray:
        """All z and w values of the leaf centres, as complex numbers."""
        c = self.centers
        return np.concatenate([c[:, 0] + 1j * c[:, 1], c[:, 2] + 1j * c[:, 3]])

    def counts_at(self, level: int) -> int:
        """Number of distinct level-``level`` ancestors of the leaves."""
        if not 0 <= level <= self.depth:
            raise ValueError("level outside 0..depth")
        anc = self.indices >> (self.depth - level)
        return len(np.unique(anc, axis=0))

    def contains(self, p) -> bool:
        c = self.centers
        q = np.array([p[0].real, p[0].imag, p[1].real, p[1].imag])
        return bool(np.any(np.all(np.abs(c - q) <= self.resolution * (1 + 1e-12), axis=1)))


_CHILD_OFFSETS = np.array(np.meshgrid(*[[0, 1]] * 4, indexing="ij")).reshape(4, -1).T


def _meets_bidisk(centers: np.ndarray, hw: float, radius: float) -> np.ndarray:
    """Whether each cube meets {|z| <= R, |w| <= R}."""
    near_z = np.hypot(np.maximum(np.abs(centers[:, 0]) - hw, 0), np.maximum(np.abs(centers[:, 1]) - hw, 0))
    near_w = np.hypot(np.maximum(np.abs(centers[:, 2]) - hw, 0), np.maximum(np.abs(centers[:, 3]) - hw, 0))
    return (near_z <= radius) & (near_w <= radius)


def _retain(g, centers, hw, n_max, probes, target, radius):
    keep = np.ones(len(centers), dtype=bool)
    if target in (Target.J, Target.JPLUS):
        b, near = box_evidence(g, centers, hw, n_max, probes, True, radius)
        keep &= (near > 0) & (b < probes)
    if target in (Target.J, Target.JMINUS, Target.KMINUS):
        sub = np.flatnonzero(keep)
        b, near = box_evidence(g, centers[sub], hw, n_max, probes, False, radius)
        ok = near > 0 if target is Target.KMINUS else (near > 0) & (b < probes)
        keep[sub] = ok
    return keep


def sample(
    g: HenonMap,
    target: Target | str,
    depth: int,
    n_max: int = DEFAULT_NMAX,
    probes: int = 16,
    radius: float | None = None,
    chunk: int = 8192,
) -> JuliaSample:
    """Refine the cube over V by 16-way bisection, keeping boxes of ``target``.

    A box is kept for J+ when its forward status is Mixed, for J- when the
    backward status is, for J when both are, and for K- when the backward
    status is anything but AllEscape (see ``classify.box_status``).
    """
    target = Target(target)
    if depth < 1:
        raise ValueError("depth must be >= 1")
    radius = g.escape_radius if radius is None else float(radius)
    idx = np.zeros((1, 4), dtype=np.int64)
    for level in range(1, depth + 1):
        children = (2 * idx[:, None, :] + _CHILD_OFFSETS[None, :, :]).reshape(-1, 4)
        hw = radius / 2**level
        centers = -radius + (2 * children + 1) * hw
        inside = _meets_bidisk(centers, hw, radius)
        children, centers = children[inside], centers[inside]
        keep = np.zeros(len(children), dtype=bool)
        for s in range(0, len(children), chunk):
            keep[s : s + chunk] = _retain(g, centers[s : s + chunk], hw, n_max, probes, target, radius)
        idx = children[keep]
        if len(idx) == 0:
            raise SampleError(
                f"no {target.value} boxes survive at level {level}; increase n_max or depth"
            )
    return JuliaSample(idx, depth, radius, target, n_max, probes)


def solid_sample(depth: int, radius: float = 1.0) -> JuliaSample:
    """Every leaf of the cube; a full-dimensional fixture for box counting."""
    k = np.arange(2**depth)
    idx = np.stack(np.meshgrid(k, k, k, k, indexing="ij"), axis=-1).reshape(-1, 4)
    return JuliaSample(idx, depth, radius, Target.KMINUS, 0)


# -- orbit sequences ----------------------------------------------------------


def factor_of_step(g: HenonMap, j) -> np.ndarray:
    """Index (written order) of the factor applied at factor-step ``j``."""
    return g.m - 1 - np.mod(j, g.m)


def _residual_and_jacobian(g, u, j0, cyclic, want_jac=True):
    s, n = u.shape
    ks = np.arange(n) if cyclic else np.arange(1, n - 1)
    kp, km = (ks + 1) % n, (ks - 1) % n
    fidx = factor_of_step(g, j0 + ks)
    res = np.empty((s, len(ks)), dtype=complex)
    dpoly = np.empty((s, len(ks)), dtype=complex)
    twist = np.empty(len(ks), dtype=complex)
    for i, f in enumerate(g.factors):
        sel = np.flatnonzero(fidx == i)
        if sel.size == 0:
            continue
        uk = u[:, ks[sel]]
        res[:, sel] = u[:, kp[sel]] - f.poly(uk) - f.twist * u[:, km[sel]]
        dpoly[:, sel] = f.poly.derivative(uk)
        twist[sel] = f.twist
    if not want_jac:
        return res, None
    jac = np.zeros((s, len(ks), n), dtype=complex)
    for r in range(len(ks)):
        jac[:, r, kp[r]] += 1.0
        jac[:, r, ks[r]] -= dpoly[:, r]
        jac[:, r, km[r]] -= twist[r]
    if not cyclic:
        jac = jac[:, :, 1 : n - 1]
    return res, jac


def _solve_batch(jac, rhs):
    """Batched solve; singular systems give NaN rows and a False flag."""
    try:
        return np.linalg.solve(jac, rhs[..., None])[..., 0], np.ones(len(jac), dtype=bool)
    except np.linalg.LinAlgError:
        out = np.full(rhs.shape, np.nan, dtype=complex)
        ok = np.zeros(len(jac), dtype=bool)
        for i in range(len(jac)):
            try:
                out[i] = np.linalg.solve(jac[i], rhs[i])
                ok[i] = True
            except np.linalg.LinAlgError:
                pass
        return out, ok


@dataclass
class NewtonOutcome:
    u: np.ndarray
    converged: np.ndarray
    singular: np.ndarray
    residual: np.ndarray


def newton_sequences(
    g: HenonMap,
    u: np.ndarray,
    j0: int,
    cyclic: bool,
    max_steps: int = 60,
    tol: float = 1e-12,
    blowup: float = 1e6,
) -> NewtonOutcome:
    """Damped Newton on the w-recurrence for a batch of sequences.

    Cyclic sequences are periodic orbits; otherwise the first and last
    entries are pinned and the interior solved.  A step that increases the
    residual is halved, up to 6 times.
    """
    u = np.array(u, dtype=complex, copy=True)
    s = len(u)
    inner = slice(None) if cyclic else slice(1, u.shape[1] - 1)
    converged = np.zeros(s, dtype=bool)
    singular = np.zeros(s, dtype=bool)
    dead = np.zeros(s, dtype=bool)
    with np.errstate(all="ignore"):
        res, _ = _residual_and_jacobian(g, u, j0, cyclic, want_jac=False)
        rnorm = np.max(np.abs(res), axis=1)
        for _ in range(max_steps):
            active = np.flatnonzero(~(converged | dead))
            if active.size == 0:
                break
            ua = u[active]
            res_a, jac_a = _residual_and_jacobian(g, ua, j0, cyclic)
            delta, ok = _solve_batch(jac_a, -res_a)
            singular[active[~ok]] = True
            dead[active[~ok]] = True
            step = np.zeros_like(ua)
            step[:, inner] = np.where(ok[:, None], delta, 0)
            r0 = rnorm[active]
            scale = np.ones(len(active))
            trial = ua + step
            r1 = np.max(np.abs(_residual_and_jacobian(g, trial, j0, cyclic, False)[0]), axis=1)
            for _ in range(6):
                worse = ~(r1 <= r0) & ok
                if not worse.any():
                    break
                scale[worse] *= 0.5
                trial[worse] = ua[worse] + scale[worse, None] * step[worse]
                r1[worse] = np.max(
                    np.abs(_residual_and_jacobian(g, trial[worse], j0, cyclic, False)[0]), axis=1
                )
            u[active] = trial
            rnorm[active] = r1
            big = ~np.isfinite(r1) | (np.max(np.abs(trial), axis=1) > blowup)
            dead[active[big]] = True
            stepsize = np.max(np.abs(step), axis=1) * scale
            mag = np.maximum(1.0, np.max(np.abs(trial), axis=1))
            done = ok & ~big & (r1 < tol * mag**2) & (stepsize < 1e-9 * mag)
            converged[active[done]] = True
    return NewtonOutcome(u, converged, singular, rnorm)


# -- periodic orbits -------------------------------------------------------------


@dataclass(frozen=True)
class SaddleOrbit:
    """A point of Fix(g^n) with the multipliers of Dg^n.

    ``orbit`` lists the ``primitive_period`` distinct points starting at the
    representative ``point``.
    """

    point: PointC2
    period: int
    primitive_period: int
    lambda_u: complex
    lambda_s: complex
    newton_residual: float
    orbit: tuple[PointC2, ...] = field(repr=False, default=())

    @property
    def is_saddle(self) -> bool:
        return abs(self.lambda_u) > 1 + SADDLE_MARGIN and abs(self.lambda_s) < 1 - SADDLE_MARGIN


SADDLE_MARGIN = 1e-6


@dataclass
class PeriodicSearch:
    period: int
    orbits: list[SaddleOrbit]
    non_saddles: list[SaddleOrbit]
    seeds_tried: int = 0
    singular_seeds: int = 0
    failed_seeds: int = 0
    rounds: int = 0

    @property
    def fixed_point_count(self) -> int:
        """Points of Fix(g^n), saddles and non-saddles together."""
        return sum(o.primitive_period for o in self.orbits + self.non_saddles)

    @property
    def saddle_point_count(self) -> int:
        return sum(o.primitive_period for o in self.orbits)

    @property
    def hyperbolicity_warning(self) -> bool:
        return bool(self.non_saddles)


def multipliers(g: HenonMap, orbit_points, power: int = 1) -> tuple[complex, complex, np.ndarray]:
    """Eigenvalues of the cycle matrix along ``orbit_points``, raised to ``power``.

    The determinant of a product of Jacobians is known exactly, so the small
    eigenvalue is taken as det / lambda_u rather than from the quadratic
    formula, which would cancel catastrophically for long orbits.
    """
    mat = np.eye(2, dtype=complex)
    for p in orbit_points:
        mat = jacobian(g, p) @ mat
    det = g.det_signed ** len(orbit_points)
    tr = mat[0, 0] + mat[1, 1]
    disc = np.sqrt(complex(tr * tr - 4 * det))
    big = tr + disc if abs(tr + disc) >= abs(tr - disc) else tr - disc
    lam_u = big / 2
    lam_s = det / lam_u if lam_u != 0 else 0j
    return lam_u**power, lam_s**power, mat


def _orbit_points(g: HenonMap, u: np.ndarray, n: int) -> list[PointC2]:
    m = g.m
    total = len(u)
    return [PointC2(complex(u[(k * m - 1) % total]), complex(u[(k * m) % total])) for k in range(n)]


def _lex_key(p: PointC2):
    return (round(p.z.real, 9), round(p.z.imag, 9), round(p.w.real, 9), round(p.w.imag, 9))


def _dist(p: PointC2, q: PointC2) -> float:
    return max(abs(p.z - q.z), abs(p.w - q.w))


def _build_orbit(g: HenonMap, u: np.ndarray, n: int) -> SaddleOrbit:
    pts = _orbit_points(g, u, n)
    scale = max(1.0, max(max(abs(p.z), abs(p.w)) for p in pts))
    q = n
    for cand in range(1, n):
        if n % cand == 0 and _dist(pts[cand], pts[0]) < 1e-7 * scale:
            q = cand
            break
    cycle = pts[:q]
    start = min(range(q), key=lambda k: _lex_key(cycle[k]))
    cycle = cycle[start:] + cycle[:start]
    lam_u, lam_s, _ = multipliers(g, cycle, power=n // q)
    resid = max(_dist(evaluate(g, cycle[k]), cycle[(k + 1) % q]) for k in range(q))
    return SaddleOrbit(cycle[0], n, q, lam_u, lam_s, resid, tuple(cycle))


def find_periodic(
    g: HenonMap,
    n: int,
    sample: JuliaSample | None = None,
    seeds_per_box: int = 3,
    tol: float = 1e-10,
    seed: int = 0,
    max_rounds: int = 12,
    max_seeds: int = 6000,
    pool: np.ndarray | None = None,
    dedup: float = 1e-6,
) -> PeriodicSearch:
    """All points of Fix(g^n) reachable from seeds drawn from a Julia sample.

    Each Newton seed is a cyclic w-sequence of length ``n * m``.  In round 1
    the point of each seed is a box centre (first seed) or a jittered copy;
    the rest of the sequence is drawn from the sample's coordinate pool.
    Rounds repeat with fresh draws until ``d^n`` points are found (the
    Bezout count) or two rounds add nothing.  Orbits whose multipliers do
    not straddle the unit circle are reported in ``non_saddles``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if tol > 1e-10:
        raise ValueError("tol must be <= 1e-10")
    rng = np.random.default_rng([seed, n])
    if pool is None:
        if sample is None:
            raise ValueError("need a sample or a coordinate pool")
        pool = sample.coordinate_pool()
    pool = np.asarray(pool, dtype=complex)
    jitter = sample.resolution if sample is not None else 0.05 * max(1.0, float(np.max(np.abs(pool))))
    if sample is not None:
        centers = sample.centers
        anchor_z = centers[:, 0] + 1j * centers[:, 1]
        anchor_w = centers[:, 2] + 1j * centers[:, 3]
    else:
        anchor_z = anchor_w = pool
    length = n * g.m
    expected = g.degree**n
    found: list[SaddleOrbit] = []
    result = PeriodicSearch(n, [], [])
    stale = 0
    for rnd in range(max_rounds):
        n_anchor = len(anchor_z)
        per = max(1, seeds_per_box)
        if n_anchor * per > max_seeds:
            pick = rng.choice(n_anchor, size=max_seeds // per, replace=False)
        else:
            pick = np.arange(n_anchor)
        pick = np.repeat(pick, per)
        total = len(pick)
        u = pool[rng.integers(0, len(pool), size=(total, length))]
        u = u + jitter * (rng.standard_normal(u.shape) + 1j * rng.standard_normal(u.shape))
        u[:, -1] = anchor_z[pick]
        u[:, 0] = anchor_w[pick]
        if rnd == 0:
            jit = np.arange(total) % per != 0
        else:
            jit = np.ones(total, dtype=bool)
        noise = jitter * (rng.uniform(-1, 1, (total, 2)) + 1j * rng.uniform(-1, 1, (total, 2)))
        u[jit, -1] += noise[jit, 0]
        u[jit, 0] += noise[jit, 1]
        out = newton_sequences(g, u, 0, cyclic=True, tol=tol * 1e-2)
        result.seeds_tried += total
        result.singular_seeds += int(out.singular.sum())
        result.failed_seeds += int((~out.converged & ~out.singular).sum())
        before = len(found)
        for row in out.u[out.converged]:
            orb = _build_orbit(g, row, n)
            if orb.newton_residual > tol * max(1.0, abs(orb.point.z), abs(orb.point.w)):
                result.failed_seeds += 1
                continue
            if not any(
                o.primitive_period == orb.primitive_period
                and min(_dist(orb.point, q) for q in o.orbit) < dedup
                for o in found
            ):
                found.append(orb)
        result.rounds = rnd + 1
        count = sum(o.primitive_period for o in found)
        if count >= expected:
            break
        stale = stale + 1 if len(found) == before else 0
        if stale >= 2:
            break
    found.sort(key=lambda o: _lex_key(o.point))
    result.orbits = [o for o in found if o.is_saddle]
    result.non_saddles = [o for o in found if not o.is_saddle]
    return result


# -- points on J, J+ and J- via bounded orbit segments ----------------------------


@dataclass(frozen=True, eq=False)
class OrbitSegments:
    """Exact orbit segments of ``g`` stored as w-sequences.

    Row ``i`` holds ``u[j]`` for factor steps ``j = j0 .. j0 + N - 1``.  The
    base point is ``(u[-1], u[0])``; ``past`` and ``future`` count the full
    map steps available on either side of it.
    """

    u: np.ndarray
    j0: int
    m: int
    past: int
    future: int

    def __len__(self) -> int:
        return len(self.u)

    def orbit_point(self, k: int) -> np.ndarray:
        """Complex array (count, 2) of ``g^k`` of every base point."""
        if not -self.past <= k <= self.future:
            raise IndexError(f"iterate {k} outside segment [-{self.past}, {self.future}]")
        pos = k * self.m - self.j0
        return np.stack([self.u[:, pos - 1], self.u[:, pos]], axis=1)

    @property
    def points(self) -> np.ndarray:
        return self.orbit_point(0)


def _segment_lengths(kind: Target, past: int, future: int) -> tuple[int, int]:
    if kind is Target.JMINUS:
        return max(past, 1), 0
    if kind is Target.JPLUS:
        return 0, max(future, 1)
    if kind is not Target.J:
        raise ValueError("kind must be J, Jplus or Jminus")
    return past, future


def _segment_bounds(kind: Target, past: int, future: int, m: int) -> tuple[int, int]:
    """First and last factor-step index stored for a segment of this kind."""
    lo = -1 if kind is Target.JPLUS else -past * m - (1 if kind is Target.JMINUS else 2)
    hi = 0 if kind is Target.JMINUS else future * m + 1
    return lo, hi


def periodic_segments(
    g: HenonMap, orbits, kind: Target | str = Target.J, past: int = 0, future: int = 0
) -> OrbitSegments:
    """Orbit segments through every point of the given saddle cycles.

    One period of factor steps is computed from the representative and then
    repeated, so the segments stay exactly periodic however long they are.
    """
    kind = Target(kind)
    m = g.m
    past, future = _segment_lengths(kind, past, future)
    lo, hi = _segment_bounds(kind, past, future, m)
    rows = []
    for o in orbits:
        period = o.period * m
        z, w = complex(o.point[0]), complex(o.point[1])
        cyc = [w]
        for j in range(period - 1):
            f = g.factors[int(factor_of_step(g, j))]
            z, w = w, f.poly(w) + f.twist * z
            cyc.append(w)
        cyc = np.array(cyc)
        for shift in range(o.primitive_period):
            j = np.arange(lo, hi + 1) + shift * m
            rows.append(cyc[np.mod(j, period)])
    u = np.array(rows, dtype=complex).reshape(len(rows), hi - lo + 1)
    return OrbitSegments(u, lo, m, past, future)


def julia_points(
    g: HenonMap,
    sample: JuliaSample,
    kind: Target | str,
    count: int,
    past: int = 0,
    future: int = 0,
    seed: int = 0,
    radius: float | None = None,
    pool: np.ndarray | None = None,
) -> OrbitSegments:
    """Points whose orbits stay in V for ``past`` backward and ``future`` forward steps.

    Each point comes from an exact orbit segment found by Newton with both
    ends pinned, so its distance to J- (resp. J+) shrinks geometrically in
    ``past`` (resp. ``future``).  For J- the w-coordinate of the base point is
    pinned to a leaf centre of ``sample``; for J+ the z-coordinate is.
    """
    kind = Target(kind)
    radius = sample.radius if radius is None else radius
    m = g.m
    past, future = _segment_lengths(kind, past, future)
    rng = np.random.default_rng([seed, 7])
    pool = sample.coordinate_pool() if pool is None else np.asarray(pool, dtype=complex)
    centers = sample.centers
    lo, hi = _segment_bounds(kind, past, future, m)
    length = hi - lo + 1
    pieces = []
    tries = 0
    need = count
    while need > 0 and tries < 8:
        batch = max(64, int(need * 1.5))
        rows = rng.integers(0, len(centers), size=batch)
        u = pool[rng.integers(0, len(pool), size=(batch, length))]
        u = u + sample.resolution * (rng.standard_normal(u.shape) + 1j * rng.standard_normal(u.shape))
        c = centers[rows]
        off = rng.uniform(-1, 1, (batch, 4)) * sample.resolution
        c = c + off
        if kind is Target.JMINUS:
            u[:, -1] = c[:, 2] + 1j * c[:, 3]
        elif kind is Target.JPLUS:
            u[:, 0] = c[:, 0] + 1j * c[:, 1]
        out = newton_sequences(g, u, lo, cyclic=False)
        good = out.converged & (np.max(np.abs(out.u), axis=1) <= radius * (1 + 1e-12))
        pieces.append(out.u[good])
        need -= int(good.sum())
        tries += 1
    u = np.concatenate(pieces)[:count] if pieces else np.zeros((0, length), dtype=complex)
    return OrbitSegments(u, lo, m, past, future)


# -- tangent directions ------------------------------------------------------------


def _normalise(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k])


def pushforward_direction(g: HenonMap, history, v0: np.ndarray = GENERIC_VECTOR) -> np.ndarray:
    """Push ``v0`` along ``history[0] -> ... -> history[-1]``; unit vector at the last point."""
    v = np.asarray(v0, dtype=complex)
    for q in history[:-1]:
        v = jacobian(g, q) @ v
        v = v / np.linalg.norm(v)
    return _normalise(v)


def _inside(p, radius: float) -> bool:
    return max(abs(p[0]), abs(p[1])) <= radius * (1 + 1e-12)


def unstable_direction(
    g: HenonMap,
    p,
    m: int,
    v0: np.ndarray = GENERIC_VECTOR,
    shadow_tol: float = 1e-8,
) -> np.ndarray:
    """Unit tangent vector ``Dg^m(g^-m p) v0 / |.|`` approximating E^u at ``p``.

    When the computed backward orbit leaves V, which rounding alone causes
    after a dozen steps at a saddle, the backward orbit is replaced by the
    exact bounded orbit through the point of J- with the same w-coordinate,
    provided that point lies within ``shadow_tol`` of ``p``.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    radius = g.escape_radius
    p = PointC2(complex(p[0]), complex(p[1]))
    history = [p]
    escaped_at = None
    for k in range(m):
        try:
            q = evaluate_inverse(g, history[-1])
        except ArithmeticError:
            escaped_at = k
            break
        if not _inside(q, radius):
            escaped_at = k
            break
        history.append(q)
    if escaped_at is None:
        return pushforward_direction(g, history[::-1], v0)
    seq = _shadow_backward(g, p, history, m, shadow_tol)
    if seq is None:
        raise BackwardEscapeError(escaped_at)
    return pushforward_direction(g, seq, v0)


def _shadow_backward(g: HenonMap, p: PointC2, history, m: int, shadow_tol: float):
    mm = g.m
    lo = -m * mm - 1
    length = -lo + 1
    guess = np.empty(length, dtype=complex)
    # u[j] for j = lo..0; history[k] = g^-k p = (u[-k*mm-1], u[-k*mm])
    vals = {}
    for k, q in enumerate(history):
        vals[-k * mm] = q.w
        vals[-k * mm - 1] = q.z
    last = history[-1].z
    for pos in range(length - 1, -1, -1):
        j = lo + pos
        if j in vals:
            last = vals[j]
        guess[pos] = vals.get(j, last)
    out = newton_sequences(g, guess[None, :], lo, cyclic=False)
    if not out.converged[0]:
        return None
    seg = OrbitSegments(out.u, lo, mm, m, 0)
    if np.max(np.abs(out.u[0])) > g.escape_radius * (1 + 1e-12):
        return None
    z_new = complex(out.u[0, -2])
    if abs(z_new - p.z) > shadow_tol * max(1.0, abs(p.z), abs(p.w)):
        return None
    return [PointC2(*seg.orbit_point(-k)[0]) for k in range(m, -1, -1)]
