import numpy as np
import pytest

from rayleigh_watch import ChannelGrid, FlowState, RunSettings, StopReason, run, step_rk4
from rayleigh_watch.grid import NonFiniteFieldError
from rayleigh_watch.hydrostatic import (
    CFLError, pressure_gradient, rhs, stream_function, velocity_u, velocity_v,
)

from conftest import tilted


def const(g, c):
    return np.full(g.shape, float(c))


def test_stream_of_zero_and_constant(grid):
    assert np.all(stream_function(grid, grid.zeros()) == 0.0)
    Y = grid.mesh()[1]
    np.testing.assert_allclose(stream_function(grid, const(grid, 2.0)), Y * (1 - Y), atol=1e-4)


def test_stream_inverts_second_derivative():
    errs = []
    for ny in (33, 65, 129):
        g = ChannelGrid(8, ny)
        w = g.sample(lambda X, Y: np.sin(np.pi * Y) + 0 * X)
        A = stream_function(g, w)
        errs.append(np.max(np.abs(-g.ddy(g.ddy(A)) - w)[:, 4:-4]))
    assert np.log2(errs[0] / errs[1]) > 1.8 and np.log2(errs[1] / errs[2]) > 1.8


def test_u_of_constant(grid):
    Y = grid.mesh()[1]
    np.testing.assert_allclose(velocity_u(grid, const(grid, 1.5)), 1.5 * (Y - 0.5), atol=1e-13)


def test_u_of_linear():
    g = ChannelGrid(8, 257)
    Y = g.mesh()[1]
    u = velocity_u(g, 2 * Y)
    assert np.max(np.abs(u - (Y ** 2 - 1 / 3))) < 2 * g.hy ** 2


def test_u_column_mean_is_zero(tilted_state):
    s = tilted_state
    assert np.max(np.abs(s.grid.integrate_y(s.u))) <= 1e-12 * np.max(np.abs(s.u))


def test_u_y_reproduces_omega():
    errs = []
    for ny in (65, 129, 257):
        g = ChannelGrid(32, ny)
        s = FlowState(g, g.sample(tilted))
        errs.append(np.max(np.abs(g.ddy(s.u) - s.omega)))
    assert np.log2(errs[0] / errs[1]) > 1.8 and np.log2(errs[1] / errs[2]) > 1.8


def test_v_vanishes_for_shear_and_on_walls(grid, tilted_state):
    w = grid.sample(lambda X, Y: 2 * Y + 3 + 0 * X)
    assert np.max(np.abs(velocity_v(grid, w))) <= 1e-12
    v = tilted_state.v
    assert np.all(v[:, 0] == 0.0) and np.all(v[:, -1] == 0.0)


def test_v_of_sine():
    g = ChannelGrid(32, 257)
    X, Y = g.mesh()
    v = velocity_v(g, np.sin(2 * np.pi * X))
    ref = 2 * np.pi * np.cos(2 * np.pi * X) * Y * (1 - Y) / 2
    assert np.max(np.abs(v - ref)) < 1e-4


def test_incompressibility_residual_decays():
    errs = []
    for ny in (65, 129, 257):
        g = ChannelGrid(32, ny)
        s = FlowState(g, g.sample(tilted))
        errs.append(np.max(np.abs(s.u_x + g.ddy(s.v))))
    assert np.log2(errs[0] / errs[1]) > 1.8 and np.log2(errs[1] / errs[2]) > 1.8


def test_pressure_gradient_single_mode():
    g = ChannelGrid(32, 257)
    X, Y = g.mesh()
    gy = np.cos(np.pi * Y)
    G = g.integrate_y(gy * gy)[0]
    px = pressure_gradient(g, np.sin(2 * np.pi * X) * gy)
    np.testing.assert_allclose(px, -2 * np.pi * G * np.sin(4 * np.pi * g.x), atol=1e-12)
    assert abs(g.integrate_x(px)) < 1e-14


def test_pressure_gradient_of_x_independent_u(grid):
    Y = grid.mesh()[1]
    assert np.max(np.abs(pressure_gradient(grid, Y ** 2))) <= 1e-13


def test_rhs_vanishes_for_stationary_data(grid):
    assert np.max(np.abs(rhs(grid, grid.sample(lambda X, Y: np.exp(Y) + 0 * X)))) <= 1e-12
    assert np.max(np.abs(rhs(grid, const(grid, 4.0)))) <= 1e-12


def test_rhs_matches_fine_resolution():
    coarse, fine = ChannelGrid(64, 129), ChannelGrid(128, 513)
    rc = rhs(coarse, coarse.sample(tilted))
    rf = rhs(fine, fine.sample(tilted))[::2, ::4]
    assert np.max(np.abs(rc - rf)) / np.max(np.abs(rf)) < 1e-4


def test_stationary_step(grid):
    s = FlowState(grid, grid.sample(lambda X, Y: 2 * Y + 3 + 0 * X))
    s1 = step_rk4(s, 1e-3)
    assert np.max(np.abs(s1.omega - s.omega)) <= 1e-12
    assert s1.t == pytest.approx(1e-3)


def test_time_order():
    g = ChannelGrid(32, 65)
    s0 = FlowState(g, g.sample(tilted))
    T = 0.05

    def advance(n):
        s = s0
        for _ in range(n):
            s = step_rk4(s, T / n)
        return s.omega

    w1, w2, w4 = advance(10), advance(20), advance(40)
    e1 = np.sqrt(g.integrate_full((w1 - w2) ** 2))
    e2 = np.sqrt(g.integrate_full((w2 - w4) ** 2))
    assert np.log2(e1 / e2) >= 3.8


def test_cfl_violation_reports_admissible_dt(tilted_state):
    with pytest.raises(CFLError) as info:
        step_rk4(tilted_state, 1.0)
    assert info.value.admissible_dt == pytest.approx(tilted_state.admissible_dt())
    step_rk4(tilted_state, 0.99 * info.value.admissible_dt)


def test_step_rejects_nonpositive_dt(tilted_state):
    with pytest.raises(ValueError):
        step_rk4(tilted_state, 0.0)


def test_shape_mismatch(grid):
    with pytest.raises(ValueError):
        FlowState(grid, np.zeros((3, 3)))


def test_zero_duration_run(grid):
    traj = run(FlowState(grid, grid.sample(tilted)), RunSettings(t_end=0.0))
    assert len(traj.records) == 1 and traj.records[0].t == 0.0
    assert traj.stop_reason is StopReason.REACHED_T_END and traj.steps == 0


def test_shear_run_stays_put():
    g = ChannelGrid(32, 65)
    s0 = FlowState(g, g.sample(lambda X, Y: 2 * Y + 3 + 0 * X))
    traj = run(s0, RunSettings(t_end=1.0, diag_every=100))
    assert traj.stop_reason is StopReason.REACHED_T_END
    assert traj.final_state.t == 1.0
    assert np.max(np.abs(traj.final_state.omega - s0.omega)) < 1e-8


def test_tilted_run_collapses_before_pole():
    g = ChannelGrid(64, 129)
    traj = run(FlowState(g, g.sample(tilted)), RunSettings(t_end=2.0))
    assert traj.stop_reason in (StopReason.RAYLEIGH_COLLAPSE, StopReason.RESOLUTION_LOSS)
    assert traj.final_state.t < 1.0
    assert not traj.records[-1].resolved
    assert all(r.resolved for r in traj.records[:-1])


def test_nonfinite_initial_data_is_rejected(grid):
    w = grid.sample(tilted)
    w[0, 0] = np.inf
    with pytest.raises(NonFiniteFieldError):
        run(FlowState(grid, w), RunSettings(t_end=1.0))


def test_snapshots_and_cadence(grid):
    seen = []
    traj = run(FlowState(grid, grid.sample(lambda X, Y: 2 * Y + 3 + 0 * X)),
               RunSettings(t_end=0.01, dt=1e-3, diag_every=4, snapshot_every=5),
               on_snapshot=lambda i, s: seen.append((i, s.t)))
    assert [r.t for r in traj.records] == pytest.approx([0.0, 0.004, 0.008, 0.01])
    assert [i for i, _ in seen] == [0, 1, 2]
