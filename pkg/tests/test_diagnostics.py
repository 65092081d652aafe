import math

import numpy as np
import pytest

from rayleigh_watch import ChannelGrid, FlowState, RunSettings, run
from rayleigh_watch.diagnostics import (
    FLAG_NAMES, DiagnosticRecord, Monitor, BoundConstants, RayleighCollapseError, StationarityProbe,
    central_rates, certification_summary, columns, dissipations, e1, e2, holds, identity_suite,
    log_rayleigh, lower_bounds, stationarity_probe,
)

from conftest import E1_EXACT, E2_ORACLE, KINETIC_ORACLE, tilted


def mirrored(X, Y):
    return tilted(-X, Y)


@pytest.fixture(scope="module")
def fine():
    g = ChannelGrid(128, 513)
    return FlowState(g, g.sample(tilted)), FlowState(g, g.sample(mirrored))


def test_e1_closed_form_value(fine):
    s, _ = fine
    assert abs(e1(s.grid, s.omega) / E1_EXACT - 1) < 1e-4


def test_e1_odd_under_reflection(fine):
    s, m = fine
    assert e1(m.grid, m.omega) == pytest.approx(-E1_EXACT, rel=1e-4)


def test_e1_x_independent(grid):
    assert abs(e1(grid, grid.sample(lambda X, Y: np.exp(Y) + 0 * X))) <= 1e-12


def test_e1_gap_is_small(fine):
    s, _ = fine
    _, gap = e1(s.grid, s.omega, return_gap=True)
    assert abs(gap) < 1e-12


def test_e2_matches_oracle(fine):
    s, m = fine
    assert abs(e2(s.grid, s.omega, s.u, s.px) / E2_ORACLE - 1) < 1e-4
    assert abs(e2(m.grid, m.omega, m.u, m.px) / -E2_ORACLE - 1) < 1e-4
    assert s.grid.integrate_full(s.u ** 2) == pytest.approx(KINETIC_ORACLE, rel=1e-5)


def test_e2_gap_against_pressure_form(fine):
    s, _ = fine
    _, gap = e2(s.grid, s.omega, s.u, s.px, return_gap=True)
    assert abs(gap) < 1e-6


def test_collapse_raises(grid):
    w = grid.sample(lambda X, Y: np.sin(2 * np.pi * X) + (Y - 0.5) ** 2)
    with pytest.raises(RayleighCollapseError) as info:
        e1(grid, w)
    assert info.value.min_wy <= 0


def test_dissipations(grid, tilted_state):
    s = FlowState(grid, grid.sample(lambda X, Y: 2 * Y + 3 + 0 * X))
    d1, d2 = dissipations(s)
    assert abs(d1) <= 1e-20 and abs(d2) <= 1e-20
    s = tilted_state
    d1, d2 = dissipations(s)
    E1 = e1(s.grid, s.omega)
    E2 = e2(s.grid, s.omega, s.u, s.px)
    assert d1 >= E1 ** 2
    assert d2 * s.grid.integrate_full(s.u ** 2) >= E2 ** 2


def test_log_rayleigh(grid):
    w0 = grid.sample(tilted)
    assert log_rayleigh(grid, w0, w0) == 0.0
    assert log_rayleigh(grid, 2 * w0, w0) == pytest.approx(-math.log(2), abs=1e-14)


def test_lower_bounds():
    b = lower_bounds(0.5, 1.0, 1.0, 1.0)
    assert b.lb_e1 == pytest.approx(2.0) and b.log_lb_e1 == pytest.approx(math.log(2))
    b = lower_bounds(0.0, E1_EXACT, -1.0, 1.0)
    assert b.lb_e1 == pytest.approx(E1_EXACT) and b.log_lb_e1 == 0.0
    assert b.pole_e1 == pytest.approx(1.0288, abs=1e-4)
    assert math.isnan(b.lb_e2)
    b = lower_bounds(2.0, 1.0, 1.0, 1.0)
    assert b.pole_reached_e1 and b.lb_e1 == math.inf


def test_lower_bound_e2_scale():
    b = lower_bounds(0.1, 1.0, 0.5, 0.25)
    assert b.pole_e2 == pytest.approx(0.5)
    assert b.lb_e2 == pytest.approx(0.25 / 0.4)


def test_holds_slack():
    assert holds(1.0 + 5e-7, 1.0)
    assert not holds(1.0 + 5e-6, 1.0)
    assert holds(1e-10, 0.0)


def test_constants_of_tilted(tilted_state):
    c = BoundConstants.from_state(tilted_state)
    assert c.omega0_inf == pytest.approx(3.0, abs=1e-3)
    assert c.C3 == pytest.approx(2 * c.omega0_inf ** 2 + 2 / math.pi ** 2)
    # omega0 vanishes at the bottom wall, so the M(t) bounds do not apply
    assert not c.continuation_applicable
    assert math.isnan(c.C)


def test_shear_monitor_is_trivial():
    g = ChannelGrid(32, 65)
    traj = run(FlowState(g, g.sample(lambda X, Y: 2 * Y + 3 + 0 * X)), RunSettings(t_end=0.05))
    c = traj.monitor.constants
    assert c.continuation_applicable and c.C == pytest.approx(3 + 2 * 5 / 3)
    for r in traj.records:
        assert r.M == 0.0 and r.cumD1 == 0.0 and r.cumD2 == 0.0 and r.cumGrowth == 0.0
        assert r.invWyInf == pytest.approx(c.inv_wy0_inf, abs=1e-10)
        assert r.wyInf == pytest.approx(c.wy0_inf, abs=1e-10)
        assert all(v is not False for v in r.flags.values())
    assert traj.monitor.probe.verdict()["status"] == "pass"
    assert traj.monitor.probe.verdict()["triggered"]


def test_record_row_matches_columns():
    rec = DiagnosticRecord(t=0.0)
    assert len(rec.row()) == len(columns())
    assert columns()[:3] == ("t", "E1", "E2")
    assert columns()[-len(FLAG_NAMES):] == tuple("ok_" + n for n in FLAG_NAMES)


def test_certification_summary():
    recs = [DiagnosticRecord(t=t, flags={"lb_e1": ok}) for t, ok in ((0, True), (1, False), (2, None))]
    s = certification_summary(recs, ("lb_e1", "lb_e2"))
    assert s["lb_e1"] == {"status": "fail", "samples_checked": 2, "violations": 1, "first_violation_t": 1}
    assert s["lb_e2"]["status"] == "not-applicable"


def test_central_rates_exact_on_quadratics():
    t = np.array([0.0, 0.1, 0.25, 0.3, 0.5])
    f = 3 * t ** 2 - t + 2
    np.testing.assert_allclose(central_rates(t, f), 6 * t[1:-1] - 1, atol=1e-12)


def test_identity_suite_on_synthetic_series():
    recs = [DiagnosticRecord(t=x, E1=1 + x, D1=1.0, E2=x * x, D2=2 * x, logRayleigh=x + x * x / 2)
            for x in np.linspace(0, 1, 21)]
    out = identity_suite(recs)
    assert out["status"] == "pass"
    assert max(out["dE1_vs_D1"], out["dE2_vs_D2"], out["dlogRayleigh_vs_E1"]) < 1e-12
    recs[10].E1 += 0.01
    assert identity_suite(recs)["status"] == "fail"
    assert identity_suite(recs[:2])["status"] == "not-applicable"


def test_stationarity_probe():
    frozen = np.ones((4, 4))
    assert stationarity_probe([(t, 0.0, frozen, 0 * frozen) for t in range(3)])["status"] == "pass"
    p = StationarityProbe()
    p.update(0.0, 1.0, frozen)
    assert not p.verdict()["triggered"]
    p.update(1.0, 0.0, frozen)
    p.update(2.0, 0.0, frozen + 1e-6)
    v = p.verdict()
    assert v["triggered"] and v["status"] == "fail" and v["first_failure"][0] == 2.0


def test_tilted_run_certifies_until_collapse():
    g = ChannelGrid(64, 129)
    traj = run(FlowState(g, g.sample(tilted)), RunSettings(t_end=2.0))
    summ = certification_summary(traj.records)
    assert all(v["status"] != "fail" for v in summ.values())
    for name in ("lb_e1", "log_e1", "lb_e2", "log_e2", "cs_e1", "cs_e2", "mono_e1", "u_bound", "pxl2"):
        assert summ[name]["status"] == "pass", name
    assert summ["cc1"]["status"] == "not-applicable"
    assert traj.monitor.probe.verdict()["triggered"] is False


def test_monitor_suspends_after_collapse(grid):
    w = grid.sample(lambda X, Y: np.sin(2 * np.pi * X) + (Y - 0.5) ** 2)
    s = FlowState(grid, grid.sample(tilted))
    mon = Monitor(s)
    rec = mon.sample(FlowState(grid, w))
    assert rec.collapsed and math.isnan(rec.E1)
    assert set(k for k, v in rec.flags.items() if v is not None) == {"u_bound"}
    assert mon.sample(s).collapsed


def test_sampled_zero_of_omega0_counts_as_zero():
    # cos(2 pi x) vanishes at x = 1/4 but samples to ~1e-17 there
    g = ChannelGrid(32, 65)
    w = g.sample(lambda X, Y: 2 * Y + 0.1 * np.cos(2 * np.pi * X) * np.sin(np.pi * Y + 0.3))
    c = BoundConstants.from_state(FlowState(g, w))
    assert c.min_abs_omega0 == 0.0 and not c.continuation_applicable
