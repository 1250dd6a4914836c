"""Command-line entry point.

Every subcommand reads a map (a JSON file or a bundled fixture name), runs
one stage of the pipeline and writes JSON and CSV files into the output
directory.  Exit status is 0 on success, 1 when a computation fails and 2 on
bad usage.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from . import io as hio
from .algebra import HenonMap, MapError, evaluate, evaluate_inverse, jacobian
from .classify import DEFAULT_NMAX, escape_times, green
from .julia import Target, find_periodic, sample
from .pressure import Side, box_dimension, pressure_curve, pressure_periodic, root_periodic
from .rates import growth_rates_periodic, holder_bound, norm_rates
from .report import ReportConfig, StageError, dimension_report, sweep

OUT_ENV = "HENONDIM_OUT"


class UsageError(Exception):
    pass


# -- argument parsing -------------------------------------------------------------


def parse_periods(text: str) -> tuple[int, ...]:
    """``"1..8"`` or ``"2,4,8"``."""
    try:
        if ".." in text:
            lo, hi = (int(x) for x in text.split(".."))
            out = tuple(range(lo, hi + 1))
        else:
            out = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad period list {text!r}") from None
    if not out or min(out) < 1 or list(out) != sorted(set(out)):
        raise argparse.ArgumentTypeError("periods must be positive and ascending")
    return out


def parse_tgrid(text: str) -> tuple[float, ...]:
    """``"start:stop:step"`` inclusive of ``stop``."""
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad t-grid {text!r}; use start:stop:step") from None
    if not step > 0 or stop < start or start < 0:
        raise argparse.ArgumentTypeError("t-grid needs 0 <= start <= stop and step > 0")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + k * step, 12) for k in range(count))


def parse_threads(text: str) -> int:
    if text == "auto":
        return os.cpu_count() or 1
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("threads must be a positive integer or 'auto'") from None
    if k < 1:
        raise argparse.ArgumentTypeError("threads must be positive")
    return k


def parse_moduli(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad moduli list {text!r}") from None


def _positive_float(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not x > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return x


def _positive_int(text: str) -> int:
    try:
        x = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if x < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return x


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--map", default="H1", help="map JSON file or fixture name H1/H2/H3 (default H1)")
    common.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or .)")
    common.add_argument("--depth", type=_positive_int, default=None, help="subdivision depth")
    common.add_argument("--nmax", type=_positive_int, default=DEFAULT_NMAX, help="escape iteration cap")
    common.add_argument("--periods", type=parse_periods, default=tuple(range(1, 9)), help="e.g. 1..8 or 2,4,8")
    common.add_argument("--tgrid", type=parse_tgrid, default=parse_tgrid("0:2:0.1"), help="start:stop:step")
    common.add_argument("--eps", type=_positive_float, default=None, help="separation scale epsilon")
    common.add_argument("--seed", type=int, default=0, help="seed for Newton jitter")
    common.add_argument("--threads", type=parse_threads, default=1, help="worker threads or 'auto'")

    parser = argparse.ArgumentParser(prog="henondim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("classify", parents=[common], help="escape classification on a real slice grid")
    p.add_argument("--grid", type=_positive_int, default=41)
    p = sub.add_parser("green", parents=[common], help="Green functions on a real slice grid")
    p.add_argument("--grid", type=_positive_int, default=41)
    p = sub.add_parser("sample", parents=[common], help="box cover of J, J+, J- or K-")
    p.add_argument("--target", choices=[t.value for t in Target], default="J")
    sub.add_parser("periodic-orbits", parents=[common], help="saddle cycles of every period")
    sub.add_parser("rates", parents=[common], help="growth rates s-bar, s-under and s+-")
    sub.add_parser("pressure-curve", parents=[common], help="periodic pressure curves and roots")
    p = sub.add_parser("dimension-report", parents=[common], help="full dimension report")
    p.add_argument("--kdepth", type=_positive_int, default=6, help="depth of the K- cover")
    sub.add_parser("box-dim", parents=[common], help="box-counting slope of K-")
    p = sub.add_parser("sweep", parents=[common], help="reports over a family of twist moduli")
    p.add_argument("--moduli", type=parse_moduli, default=(0.3, 0.1, 0.03))
    p.add_argument("--kdepth", type=_positive_int, default=6)
    sub.add_parser("selftest", parents=[common], help="exact identities on the bundled fixtures")
    return parser


# -- subcommands --------------------------------------------------------------------


def _config(args, **extra) -> dict:
    """The parameters that affect results; the thread count is left out."""
    keys = ("command", "depth", "nmax", "periods", "tgrid", "eps", "seed")
    cfg = {k: getattr(args, k) for k in keys}
    cfg.update(extra)
    return cfg


def _grid(g: HenonMap, k: int):
    r = g.escape_radius
    xs = np.linspace(-r, r, k)
    zz, ww = np.meshgrid(xs, xs, indexing="ij")
    return zz.ravel().astype(complex), ww.ravel().astype(complex)


def cmd_classify(g, args, out, head):
    z, w = _grid(g, args.grid)
    fwd = escape_times(g, z, w, args.nmax, forward=True)
    bwd = escape_times(g, z, w, args.nmax, forward=False)
    rows = [
        (z[i].real, z[i].imag, w[i].real, w[i].imag,
         "bounded" if fwd[i] < 0 else "escaped", int(fwd[i]),
         "bounded" if bwd[i] < 0 else "escaped", int(bwd[i]))
        for i in range(len(z))
    ]
    cols = ["z_re", "z_im", "w_re", "w_im", "forward", "forward_steps", "backward", "backward_steps"]
    hio.write_csv(out / "classify.csv", head, cols, rows)
    summary = {"probes": len(z), "bounded_forward": int((fwd < 0).sum()), "bounded_backward": int((bwd < 0).sum())}
    hio.write_json(out / "classify.json", head, summary)
    return f"classify: {summary['bounded_forward']} of {len(z)} probes bounded forward"


def cmd_green(g, args, out, head):
    z, w = _grid(g, args.grid)
    rows = []
    for zi, wi in zip(z, w):
        gp = green(g, (zi, wi), 1, n_max=args.nmax)
        gm = green(g, (zi, wi), -1, n_max=args.nmax)
        rows.append((zi.real, zi.imag, wi.real, wi.imag, gp.value, gm.value, gp.converged, gm.converged))
    cols = ["z_re", "z_im", "w_re", "w_im", "green_plus", "green_minus", "plus_converged", "minus_converged"]
    hio.write_csv(out / "green.csv", head, cols, rows)
    vals = np.array([r[4] for r in rows])
    summary = {"probes": len(rows), "max_green_plus": float(vals.max()), "zero_green_plus": int((vals == 0).sum())}
    hio.write_json(out / "green.json", head, summary)
    return f"green: {len(rows)} probes, max G+ = {summary['max_green_plus']:.6g}"


def cmd_sample(g, args, out, head):
    depth = args.depth or 4
    s = sample(g, Target(args.target), depth, n_max=args.nmax)
    rows = [tuple(c) + (s.resolution,) for c in s.centers]
    hio.write_csv(out / f"sample_{s.target.value}.csv", head, ["c0", "c1", "c2", "c3", "half_width"], rows)
    summary = {
        "target": s.target.value,
        "depth": depth,
        "radius": s.radius,
        "boxes": len(s),
        "counts_by_level": [s.counts_at(k) for k in range(depth + 1)],
    }
    hio.write_json(out / f"sample_{s.target.value}.json", head, summary)
    return f"sample: {len(s)} boxes cover {s.target.value} at depth {depth}"


def _searches(g, args):
    js = sample(g, Target.J, args.depth or 4, n_max=args.nmax)
    return js, {n: find_periodic(g, n, js, seed=args.seed) for n in args.periods}


def _orbit_rows(searches):
    for n, srch in searches.items():
        for kind, orbits in (("saddle", srch.orbits), ("other", srch.non_saddles)):
            for o in orbits:
                p = o.point
                yield (n, kind, p[0].real, p[0].imag, p[1].real, p[1].imag, o.primitive_period,
                       abs(o.lambda_u), abs(o.lambda_s), o.newton_residual)


def cmd_periodic(g, args, out, head):
    _, searches = _searches(g, args)
    cols = ["n", "kind", "z_re", "z_im", "w_re", "w_im", "primitive_period", "abs_lambda_u", "abs_lambda_s",
            "residual"]
    hio.write_csv(out / "periodic_orbits.csv", head, cols, _orbit_rows(searches))
    summary = {
        "fix_counts": {n: s.fixed_point_count for n, s in searches.items()},
        "saddle_counts": {n: s.saddle_point_count for n, s in searches.items()},
        "hyperbolicity_warning": any(s.hyperbolicity_warning for s in searches.values()),
    }
    hio.write_json(out / "periodic_orbits.json", head, summary)
    counts = ", ".join(f"{n}:{c}" for n, c in summary["fix_counts"].items())
    return f"periodic-orbits: |Fix(g^n)| = {counts}"


def cmd_rates(g, args, out, head):
    _, searches = _searches(g, args)
    growth = growth_rates_periodic(searches)
    orbits = [o for s in searches.values() for o in s.orbits]
    depth = args.depth or 4
    norms = {}
    for sign, tgt in ((1, Target.JPLUS), (-1, Target.JMINUS)):
        smp = sample(g, tgt, depth, n_max=args.nmax)
        norms[sign] = norm_rates(g, smp, (2, 4, 8, 12, 16), sign, seed=args.seed, orbits=orbits)
    rows = [("periodic", n, hi, lo) for n, hi, lo in growth.per_n]
    rows += [("s_plus", n, v, v) for n, v in norms[1].per_n]
    rows += [("s_minus", n, v, v) for n, v in norms[-1].per_n]
    hio.write_csv(out / "rates.csv", head, ["table", "n", "max_value", "min_value"], rows)
    summary = {
        "s_bar": growth.s_bar,
        "s_under": growth.s_under,
        "trend_gap": growth.trend_gap,
        "s_plus": norms[1].value,
        "s_minus": norms[-1].value,
        "holder_plus": holder_bound(g, norms[1].value),
        "holder_minus": holder_bound(g, norms[-1].value),
        "probes_dropped_plus": norms[1].probes_dropped,
        "probes_dropped_minus": norms[-1].probes_dropped,
    }
    hio.write_json(out / "rates.json", head, summary)
    return f"rates: s_bar={growth.s_bar:.6f} s_under={growth.s_under:.6f} s+={norms[1].value:.6f} s-={norms[-1].value:.6f}"


def cmd_pressure(g, args, out, head):
    _, searches = _searches(g, args)
    rows, roots = [], {}
    for n, srch in searches.items():
        for side in (Side.UNSTABLE, Side.STABLE):
            curve = pressure_curve(srch, args.tgrid, side)
            rows += [(n, side.value, t, v) for t, v in curve.points]
        if srch.saddle_point_count >= 2:
            roots[n] = {"t_u": root_periodic(srch, Side.UNSTABLE), "t_s": root_periodic(srch, Side.STABLE)}
    hio.write_csv(out / "pressure_curves.csv", head, ["n", "side", "t", "pressure"], rows)
    hio.write_json(out / "pressure_curves.json", head, {"roots": roots})
    n_top = max(roots) if roots else None
    if n_top is None:
        return "pressure-curve: no period with two or more saddle points"
    r = roots[n_top]
    return f"pressure-curve: n={n_top} t_u={r['t_u']:.9f} t_s={r['t_s']:.9f}"


def _report_body(rep) -> dict:
    body = {"report": rep.summary()}
    body["checks"] = [hio.to_jsonable(c) for c in rep.checks]
    body["violations"] = rep.violations
    body["diagnostics"] = rep.diagnostics
    body["annotations"] = list(rep.annotations)
    body["roots_by_n"] = [{"n": n, "t_u": tu, "t_s": ts} for n, tu, ts in rep.roots_by_n]
    return body


def _report_config(args) -> ReportConfig:
    return ReportConfig(
        depth=args.depth or 4,
        periods=args.periods,
        t_grid=args.tgrid,
        kminus_depth=args.kdepth,
        epsilon=args.eps,
        n_max=args.nmax,
        seed=args.seed,
        threads=args.threads,
    )


def cmd_report(g, args, out, head):
    rep = dimension_report(g, _report_config(args))
    hio.write_json(out / "dimension_report.json", head, _report_body(rep))
    rows = [(c.side.value, c.n, t, v) for c in rep.curves for t, v in c.points]
    hio.write_csv(out / "report_pressure.csv", head, ["side", "n", "t", "pressure"], rows)
    hio.write_csv(out / "report_boxfit.csv", head, ["epsilon", "count"], rep.box_fit.fit_points)
    rows = [("periodic", n, hi, lo) for n, hi, lo in rep.growth.per_n]
    rows += [("s_plus", n, v, v) for n, v in rep.s_plus.per_n]
    rows += [("s_minus", n, v, v) for n, v in rep.s_minus.per_n]
    hio.write_csv(out / "report_rates.csv", head, ["table", "n", "max_value", "min_value"], rows)
    verdict = "all checks pass" if not rep.violations else "violations: " + ", ".join(rep.violations)
    return f"dimension-report: dim_H J = {rep.dim_J:.6f} (t_u={rep.t_u:.6f}, t_s={rep.t_s:.6f}); {verdict}"


def cmd_boxdim(g, args, out, head):
    depth = args.depth or 6
    s = sample(g, Target.KMINUS, depth, n_max=args.nmax)
    fit = box_dimension(s)
    hio.write_csv(out / "box_dim.csv", head, ["epsilon", "count"], fit.fit_points)
    body = {"estimate": fit.estimate, "intercept": fit.intercept, "residual": fit.residual, "octaves": fit.octaves}
    hio.write_json(out / "box_dim.json", head, body)
    return f"box-dim: slope {fit.estimate:.4f} over {fit.octaves:.0f} octaves (residual {fit.residual:.2g})"


def cmd_sweep(g, args, out, head):
    res = sweep(g, args.moduli, _report_config(args))
    hio.write_csv(out / "sweep.csv", head, ["abs_a", "dim_Jminus", "box_bound"], res.trend())
    body = {
        "moduli": res.moduli,
        "reports": [None if r is None else _report_body(r) for r in res.reports],
        "failures": res.failures,
        "box_bound_decreasing": res.box_bound_decreasing(),
    }
    hio.write_json(out / "sweep.json", head, body)
    return f"sweep: {len(res.moduli) - len(res.failures)} of {len(res.moduli)} members ran; " \
           f"box_bound decreasing: {res.box_bound_decreasing()}"


def selftest_results(seed: int = 0) -> list[tuple[str, bool, float]]:
    """(name, passed, worst error) for the exact identities on each fixture."""
    rng = np.random.default_rng(seed)
    results = []
    for name in hio.FIXTURES:
        g = hio.load_fixture(name)
        r = g.escape_radius
        pts = rng.uniform(-r, r, (200, 2)) + 1j * rng.uniform(-r, r, (200, 2))
        err = 0.0
        det_err = 0.0
        for p in pts:
            q = evaluate_inverse(g, evaluate(g, p))
            scale = max(1.0, abs(p[0]), abs(p[1]))
            err = max(err, abs(q[0] - p[0]) / scale, abs(q[1] - p[1]) / scale)
            det_err = max(det_err, abs(np.linalg.det(jacobian(g, p)) - g.det_signed))
        results.append((f"{name} round trip", err < 1e-12, err))
        results.append((f"{name} determinant", det_err < 1e-12 * max(1.0, r * r), det_err))
        js = sample(g, Target.J, 3)
        worst = 0.0
        for n in (1, 2, 3, 4):
            srch = find_periodic(g, n, js, seed=seed)
            for t in (0.0, 0.5, 1.0, 1.5, 2.0):
                diff = pressure_periodic(srch, t, "stable") - pressure_periodic(srch, t, "unstable")
                worst = max(worst, abs(diff - t * math.log(g.abs_det)))
        results.append((f"{name} pressure identity", worst < 1e-10, worst))
    return results


def cmd_selftest(g, args, out, head):
    results = selftest_results(args.seed)
    for name, ok, err in results:
        print(f"{'PASS' if ok else 'FAIL'} {name} (error {err:.3g})")
    failed = [n for n, ok, _ in results if not ok]
    if failed:
        raise StageError("selftest", ArithmeticError("failed: " + ", ".join(failed)))
    return f"selftest: {len(results)} identities pass"


COMMANDS = {
    "classify": cmd_classify,
    "green": cmd_green,
    "sample": cmd_sample,
    "periodic-orbits": cmd_periodic,
    "rates": cmd_rates,
    "pressure-curve": cmd_pressure,
    "dimension-report": cmd_report,
    "box-dim": cmd_boxdim,
    "sweep": cmd_sweep,
    "selftest": cmd_selftest,
}

STAGE_OF = {
    "classify": "classify",
    "green": "green",
    "sample": "sample",
    "periodic-orbits": "periodic-orbits",
    "rates": "rates",
    "pressure-curve": "pressure",
    "box-dim": "box-dim",
}


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    out = Path(args.out or os.environ.get(OUT_ENV) or ".")
    try:
        g = hio.resolve_map(args.map)
    except MapError as exc:
        print(f"henondim: error: map: {exc}", file=sys.stderr)
        return 2
    extra = {"kdepth": args.kdepth} if hasattr(args, "kdepth") else {}
    for key in ("grid", "target", "moduli"):
        if hasattr(args, key):
            extra[key] = getattr(args, key)
    head = hio.header(g, _config(args, **extra), args.seed)
    try:
        line = COMMANDS[args.command](g, args, out, head)
    except StageError as exc:
        print(f"henondim: stage {exc.stage} failed: {exc.cause}", file=sys.stderr)
        return 1
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        stage = STAGE_OF.get(args.command, args.command)
        print(f"henondim: stage {stage} failed: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"henondim: cannot write output: {exc}", file=sys.stderr)
        return 1
    print(line)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
