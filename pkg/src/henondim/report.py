"""The full dimension pipeline: sample, orbits, rates, pressure, roots, boxes."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence


from .algebra import HenonFactor, HenonMap, inverse_map
from .classify import DEFAULT_NMAX
from .julia import PeriodicSearch, SADDLE_MARGIN, Target, find_periodic, sample
from .pressure import (
    BoxFit,
    PressureCurve,
    Side,
    box_dimension,
    default_epsilon,
    pressure_curve,
    pressure_periodic,
    pressure_separated,
    root_periodic,
)
from .rates import GrowthRates, NormRates, growth_rates_periodic, holder_bound, norm_rates

GREEN_SLACK = 0.05


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage}: {cause}")


@dataclass(frozen=True)
class ReportConfig:
    depth: int = 4
    periods: tuple[int, ...] = tuple(range(1, 9))
    t_grid: tuple[float, ...] = tuple(round(0.1 * k, 10) for k in range(21))
    rate_n: tuple[int, ...] = (2, 4, 8, 12, 16)
    rate_probes: int = 1000
    kminus_depth: int = 6
    box_levels: tuple[int, ...] | None = None
    separated_n: int = 6
    epsilon: float | None = None
    separated_probes: int = 4000
    n_max: int = DEFAULT_NMAX
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        periods = tuple(int(n) for n in self.periods)
        if not periods or any(n < 1 for n in periods) or list(periods) != sorted(set(periods)):
            raise ValueError("periods must be distinct, positive and ascending")
        object.__setattr__(self, "periods", periods)
        object.__setattr__(self, "t_grid", tuple(float(t) for t in self.t_grid))
        object.__setattr__(self, "rate_n", tuple(sorted(int(n) for n in self.rate_n)))
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.depth < 1 or self.kminus_depth < 4:
            raise ValueError("depth must be >= 1 and kminus_depth >= 4")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Check:
    """One evaluated inequality: ``lhs <= rhs`` passes when ``slack >= 0``."""

    name: str
    lhs: float
    rhs: float
    passed: bool
    slack: float
    advisory: bool = False


def _le(name: str, lhs: float, rhs: float, advisory: bool, tol: float = 0.0) -> Check:
    slack = rhs - lhs + tol
    return Check(name, float(lhs), float(rhs), bool(slack >= 0), float(slack), advisory)


ANNOTATIONS = (
    "dim_top J is one of 0, 1, 2 for hyperbolic maps (not computed)",
    "dim_top J = dim_top J+ + dim_top J- - 4 for hyperbolic maps (not computed)",
    "dim_top J < dim_H J for hyperbolic maps (not computed)",
)


@dataclass
class DimensionReport:
    t_u: float
    t_s: float
    dim_J: float
    dim_Jplus: float
    dim_Jminus: float
    promo_lower: float
    promo_upper: float
    corneu_bound: float
    cantor_flag: bool
    box_dim_Kminus: float
    box_bound: float
    green_lower_plus: float
    green_lower_minus: float
    abs_det: float
    degree: int
    inverted: bool
    hyperbolicity_doubtful: bool
    checks: list[Check]
    diagnostics: dict
    roots_by_n: list[tuple[int, float, float]]
    growth: GrowthRates
    s_plus: NormRates
    s_minus: NormRates
    curves: list[PressureCurve]
    box_fit: BoxFit
    annotations: tuple[str, ...] = ANNOTATIONS

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def violations(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def summary(self) -> dict:
        keys = (
            "t_u t_s dim_J dim_Jplus dim_Jminus promo_lower promo_upper corneu_bound cantor_flag "
            "box_dim_Kminus box_bound green_lower_plus green_lower_minus abs_det degree inverted "
            "hyperbolicity_doubtful"
        ).split()
        return {k: getattr(self, k) for k in keys}


def _stage(name: str, fn: Callable, *args, **kw):
    try:
        return fn(*args, **kw)
    except StageError:
        raise
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        raise StageError(name, exc) from exc


def _searches(g: HenonMap, config: ReportConfig, jsample) -> dict[int, PeriodicSearch]:
    def run(n):
        return n, find_periodic(g, n, jsample, seed=config.seed)

    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            pairs = list(pool.map(run, config.periods))
    else:
        pairs = [run(n) for n in config.periods]
    return dict(pairs)


def _neutral(search: PeriodicSearch) -> bool:
    """A cycle with a multiplier modulus within the margin of 1."""
    for o in search.orbits + search.non_saddles:
        for lam in (o.lambda_u, o.lambda_s):
            if abs(abs(lam) - 1.0) <= SADDLE_MARGIN:
                return True
    return False


def _swap_sides(rep: DimensionReport) -> DimensionReport:
    """Relabel a report computed for the inverse map."""
    return replace(
        rep,
        t_u=rep.t_s,
        t_s=rep.t_u,
        dim_Jplus=rep.dim_Jminus,
        dim_Jminus=rep.dim_Jplus,
        green_lower_plus=rep.green_lower_minus,
        green_lower_minus=rep.green_lower_plus,
        s_plus=rep.s_minus,
        s_minus=rep.s_plus,
        roots_by_n=[(n, ts, tu) for n, tu, ts in rep.roots_by_n],
        inverted=True,
    )


def dimension_report(g: HenonMap, config: ReportConfig = ReportConfig()) -> DimensionReport:
    """Run every stage and evaluate every inequality.

    Maps with |det| > 1 are replaced by the conjugated inverse, and the
    unstable/stable and plus/minus labels are swapped back at the end; the
    box count then describes K- of the inverse map.
    """
    if g.volume_increasing:
        return _swap_sides(dimension_report(inverse_map(g), config))

    d = g.degree
    log_d = math.log(d)
    abs_a = g.abs_det
    log_a = math.log(abs_a)

    jsample = _stage("sample", sample, g, Target.J, config.depth, n_max=config.n_max)
    searches = _stage("periodic-orbits", _searches, g, config, jsample)
    growth = _stage("rates", growth_rates_periodic, searches)

    roots, skipped = [], []
    for n, srch in searches.items():
        if srch.saddle_point_count < 2:
            # a single saddle point gives zero pressure at t = 0: no root
            skipped.append(n)
            continue
        tu = _stage("pressure", root_periodic, srch, Side.UNSTABLE)
        ts = _stage("pressure", root_periodic, srch, Side.STABLE)
        roots.append((n, tu, ts))
    if not roots:
        raise StageError("pressure", ValueError("no period has two or more saddle points"))
    n_top, t_u, t_s = roots[-1]
    top = searches[n_top]
    curves = [
        _stage("pressure", pressure_curve, top, config.t_grid, side) for side in (Side.UNSTABLE, Side.STABLE)
    ]

    all_orbits = [o for s in searches.values() for o in s.orbits]
    rate_samples = {}
    for sign, tgt in ((1, Target.JPLUS), (-1, Target.JMINUS)):
        rate_samples[sign] = _stage("sample", sample, g, tgt, config.depth, n_max=config.n_max)
    s_plus = _stage(
        "rates", norm_rates, g, rate_samples[1], config.rate_n, 1,
        probes=config.rate_probes, seed=config.seed, orbits=all_orbits,
    )
    s_minus = _stage(
        "rates", norm_rates, g, rate_samples[-1], config.rate_n, -1,
        probes=config.rate_probes, seed=config.seed, orbits=all_orbits,
    )
    _, green_lower_plus = _stage("rates", holder_bound, g, s_plus.value)
    _, green_lower_minus = _stage("rates", holder_bound, g, s_minus.value)

    ksample = _stage("box-dim", sample, g, Target.KMINUS, config.kminus_depth, n_max=config.n_max)
    box_fit = _stage("box-dim", box_dimension, ksample, config.box_levels)
    box_bound = 4.0 - 2.0 * math.log(1.0 / abs_a) / s_minus.value

    s_bar, s_under = growth.s_bar, growth.s_under
    promo_lower = (1.0 / s_bar + 1.0 / (s_bar - log_a)) * log_d
    promo_upper = (1.0 / s_under + 1.0 / (s_under - log_a)) * log_d
    corneu_bound = t_u * log_d / (log_d - t_u * log_a)
    cantor_flag = abs_a <= d ** -0.5
    dim_J = t_u + t_s

    doubtful = any(_neutral(s) for s in searches.values())
    adv = doubtful
    count = top.saddle_point_count
    d_hat = math.log(count) / n_top
    checks = [
        _le("promo_lower", promo_lower, dim_J, adv),
        _le("promo_upper", dim_J, promo_upper, adv),
        _le("corneu", t_s, corneu_bound, adv, tol=1e-9),
        _le("sandwich_lower_u", d_hat / growth.at(n_top)[0], t_u, adv, tol=1e-9),
        _le("sandwich_upper_u", t_u, d_hat / growth.at(n_top)[1], adv, tol=1e-9),
        _le("green_plus", green_lower_plus, 2.0 + t_u, adv, tol=GREEN_SLACK),
        _le("green_minus", green_lower_minus, 2.0 + t_s, adv, tol=GREEN_SLACK),
        _le("box_bound", box_fit.estimate, box_bound, adv, tol=0.3),
        _le("t_u_below_2", t_u, 2.0, adv),
    ]
    if abs_a < 1:
        checks.append(_le("corneu_strict", t_s, t_u - 1e-12, adv))
    else:
        checks.append(_le("corneu_equal", abs(t_u - t_s), 0.0, adv, tol=1e-9))

    diagnostics = {
        "roots_skipped_periods": skipped,
        "root_gaps_u": [abs(b[1] - a[1]) for a, b in zip(roots, roots[1:])],
        "root_gaps_s": [abs(b[2] - a[2]) for a, b in zip(roots, roots[1:])],
        "growth_trend_gap": list(growth.trend_gap),
        "s_plus_per_n": s_plus.per_n,
        "s_minus_per_n": s_minus.per_n,
        "probes_dropped_plus": s_plus.probes_dropped,
        "probes_dropped_minus": s_minus.probes_dropped,
        "fixed_point_counts": {n: s.fixed_point_count for n, s in searches.items()},
        "saddle_point_counts": {n: s.saddle_point_count for n, s in searches.items()},
        "attracting_cycles": sum(len(s.non_saddles) for s in searches.values()),
        "box_fit_residual": box_fit.residual,
        "box_fit_octaves": box_fit.octaves,
        "sample_boxes": len(jsample),
    }
    sep_n = config.separated_n
    if sep_n in searches and sep_n >= 2:
        fixed = searches.get(1)
        try:
            eps = config.epsilon
            if eps is None:
                eps = default_epsilon([o.point for o in fixed.orbits + fixed.non_saddles]) if fixed else None
            if eps is not None:
                gaps = {}
                for t in (0.0, 1.0):
                    sep = pressure_separated(
                        g, jsample, sep_n, eps, t, probes=config.separated_probes, seed=config.seed
                    )
                    gaps[t] = sep - pressure_periodic(searches[sep_n], t)
                diagnostics["separated_epsilon"] = eps
                diagnostics["separated_minus_periodic"] = gaps
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            diagnostics["separated_error"] = str(exc)

    return DimensionReport(
        t_u=t_u,
        t_s=t_s,
        dim_J=dim_J,
        dim_Jplus=t_u + 2.0,
        dim_Jminus=t_s + 2.0,
        promo_lower=promo_lower,
        promo_upper=promo_upper,
        corneu_bound=corneu_bound,
        cantor_flag=bool(cantor_flag),
        box_dim_Kminus=box_fit.estimate,
        box_bound=box_bound,
        green_lower_plus=green_lower_plus,
        green_lower_minus=green_lower_minus,
        abs_det=abs_a,
        degree=d,
        inverted=False,
        hyperbolicity_doubtful=doubtful,
        checks=checks,
        diagnostics=diagnostics,
        roots_by_n=roots,
        growth=growth,
        s_plus=s_plus,
        s_minus=s_minus,
        curves=curves,
        box_fit=box_fit,
    )


def with_modulus(g: HenonMap, modulus: float) -> HenonMap:
    """Rescale the first twist so that |det| equals ``modulus``, keeping phases."""
    if not modulus > 0:
        raise ValueError("modulus must be positive")
    f0 = g.factors[0]
    scale = modulus / g.abs_det
    return HenonMap((HenonFactor(f0.poly, f0.twist * scale),) + g.factors[1:])


@dataclass
class SweepResult:
    moduli: list[float]
    reports: list[DimensionReport | None]
    failures: dict[float, str] = field(default_factory=dict)

    def trend(self) -> list[tuple[float, float, float]]:
        """Rows ``(|a|, dim_Jminus, box_bound)`` for the members that ran."""
        return [(m, r.dim_Jminus, r.box_bound) for m, r in zip(self.moduli, self.reports) if r is not None]

    def box_bound_decreasing(self) -> bool:
        b = [row[2] for row in self.trend()]
        return len(b) == len(self.moduli) and all(y < x for x, y in zip(b, b[1:]))


def sweep(g: HenonMap, moduli: Sequence[float], config: ReportConfig = ReportConfig()) -> SweepResult:
    moduli = [float(m) for m in moduli]
    if any(not 0 < m <= 1 for m in moduli):
        raise ValueError("moduli must lie in (0, 1]")
    if any(b >= a for a, b in zip(moduli, moduli[1:])):
        raise ValueError("moduli must be strictly descending")
    reports: list[DimensionReport | None] = []
    failures = {}
    for m in moduli:
        try:
            reports.append(dimension_report(with_modulus(g, m), config))
        except StageError as exc:
            reports.append(None)
            failures[m] = str(exc)
    return SweepResult(moduli, reports, failures)
