import math

import pytest

from henondim.algebra import henon, inverse_map
from henondim.report import (
    ReportConfig,
    StageError,
    dimension_report,
    sweep,
    with_modulus,
)

FAST = ReportConfig(periods=tuple(range(1, 7)), kminus_depth=5, rate_probes=300, separated_probes=2000)


def test_h1_report_values(report_for):
    rep = report_for("H1")
    assert rep.violations == []
    assert rep.cantor_flag
    assert not rep.hyperbolicity_doubtful and not rep.inverted
    assert rep.dim_J == pytest.approx(rep.t_u + rep.t_s)
    assert rep.dim_Jplus == pytest.approx(rep.t_u + 2)
    assert rep.dim_Jminus == pytest.approx(rep.t_s + 2)
    assert 0 < rep.t_s < rep.t_u < 2
    assert rep.degree == 2 and rep.abs_det == pytest.approx(0.3)


def test_h1_closed_form_bounds(report_for):
    rep = report_for("H1")
    d, a = 2, 0.3
    # chord of the convex stable pressure between t = 0 and t = t_u
    tu = rep.t_u
    assert rep.corneu_bound == pytest.approx(tu * math.log(d) / (math.log(d) - tu * math.log(a)), rel=1e-12)
    assert rep.t_s <= rep.corneu_bound + 1e-9
    assert rep.promo_lower <= rep.dim_J <= rep.promo_upper
    assert rep.dim_J >= rep.corneu_bound - 1e-9


def test_h1_checks_are_reported(report_for):
    rep = report_for("H1")
    for name in ("promo_lower", "promo_upper", "corneu", "green_plus", "green_minus", "box_bound", "t_u_below_2"):
        chk = rep.check(name)
        assert chk.passed and chk.slack >= 0
    with pytest.raises(KeyError):
        rep.check("nonexistent")


def test_h1_roots_and_diagnostics(report_for):
    rep = report_for("H1")
    ns = [n for n, _, _ in rep.roots_by_n]
    assert ns == list(range(1, 9))
    assert abs(rep.roots_by_n[-1][1] - rep.roots_by_n[-2][1]) < 0.05
    assert rep.t_u == rep.roots_by_n[-1][1]
    assert "separated_minus_periodic" in rep.diagnostics
    assert len(rep.annotations) == 3


def test_summary_keys(report_for):
    s = report_for("H1").summary()
    assert s["cantor_flag"] is True
    assert set(s) >= {"t_u", "t_s", "dim_J", "dim_Jplus", "dim_Jminus", "box_bound"}


def test_volume_preserving_report(report_for):
    rep = report_for("H2")
    assert rep.t_u == pytest.approx(rep.t_s, abs=1e-9)
    assert rep.box_bound == pytest.approx(4.0)
    assert rep.violations == []


def test_sink_does_not_flag_hyperbolicity(report_for):
    rep = report_for("H3")
    assert rep.diagnostics["attracting_cycles"] > 0
    assert not rep.hyperbolicity_doubtful
    assert rep.t_u < 2 + 1e-9


def test_volume_increasing_map_uses_inverse():
    g = henon([-6, 0, 1], 3.0)
    rep = dimension_report(g, FAST)
    inv = dimension_report(inverse_map(g), FAST)
    assert rep.inverted and not inv.inverted
    assert rep.t_u == pytest.approx(inv.t_s, abs=1e-9)
    assert rep.t_s == pytest.approx(inv.t_u, abs=1e-9)
    assert rep.dim_Jplus == pytest.approx(inv.dim_Jminus)


def test_sweep_trend(h1):
    res = sweep(h1, [0.3, 0.1, 0.03], FAST)
    assert not res.failures
    assert res.box_bound_decreasing()
    for m, dim_minus, bound in res.trend():
        assert 2 < dim_minus < 4
        assert bound <= 4
    moduli = [r.abs_det for r in res.reports]
    assert moduli == pytest.approx([0.3, 0.1, 0.03])


def test_sweep_validates(h1):
    with pytest.raises(ValueError):
        sweep(h1, [0.1, 0.3], FAST)
    with pytest.raises(ValueError):
        sweep(h1, [1.5], FAST)


def test_with_modulus_keeps_phase():
    g = henon([0, 0, 1], 0.3j)
    h = with_modulus(g, 0.1)
    assert h.factors[0].twist == pytest.approx(0.1j)
    with pytest.raises(ValueError):
        with_modulus(g, 0.0)


def test_config_validation():
    with pytest.raises(ValueError):
        ReportConfig(periods=(2, 1))
    with pytest.raises(ValueError):
        ReportConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        ReportConfig(kminus_depth=3)
    with pytest.raises(ValueError):
        ReportConfig(threads=0)


def test_stage_failure_names_stage(h1, monkeypatch):
    import henondim.report as rp

    def boom(*a, **k):
        raise ValueError("no sign change")

    monkeypatch.setattr(rp, "root_periodic", boom)
    with pytest.raises(StageError) as info:
        dimension_report(h1, FAST)
    assert info.value.stage == "pressure"
    assert "no sign change" in str(info.value)
