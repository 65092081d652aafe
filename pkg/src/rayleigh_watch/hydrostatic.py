"""Vorticity form of the hydrostatic Euler equations on T x (0, 1).

    omega_t + u omega_x + v omega_y = 0

with the velocity rebuilt from omega at every stage through the closed-form
column integrals (no elliptic solve). The time integrator is classical RK4
under a CFL restriction; the trajectory driver lives in :func:`run`.
"""

import enum
import logging
import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .grid import ChannelGrid, NonFiniteFieldError, check_finite

log = logging.getLogger(__name__)

DEFAULT_CFL_MAX = 0.5


class StopReason(str, enum.Enum):
    REACHED_T_END = "reached-t-end"
    RAYLEIGH_COLLAPSE = "rayleigh-collapse"
    RESOLUTION_LOSS = "resolution-loss"
    NAN_DETECTED = "nan-detected"
    # semi-Lagrangian runs only
    HA_COLLAPSE = "ha-collapse"
    CURL_DRIFT = "curl-drift"


class CFLError(ValueError):
    """Time step too large; ``admissible_dt`` is the largest allowed step."""

    def __init__(self, dt, admissible_dt, cfl):
        self.dt = dt
        self.admissible_dt = admissible_dt
        self.cfl = cfl
        super().__init__(f"CFL number {cfl:.4g} exceeds limit at dt={dt:.4g}; "
                         f"admissible dt <= {admissible_dt:.6g}")


# ---------------------------------------------------------------------------
# closed-form velocity reconstruction
# ---------------------------------------------------------------------------

def stream_function(grid: ChannelGrid, omega):
    """A(omega) = (1-y) int_0^y z omega dz + y int_y^1 (1-z) omega dz."""
    y = grid.y
    lower = grid.cumint_y(omega, "z", "from-0")
    upper = grid.cumint_y(omega, "1-z", "to-1")
    return (1.0 - y) * lower + y * upper


def velocity_u(grid: ChannelGrid, omega):
    """u = int_0^1 z omega dz - int_y^1 omega dz.

    The first term is evaluated as int_0^1 (int_y^1 omega dz) dy, equal in
    the continuum, so the discrete column mean of u is zero to rounding.
    """
    tail = grid.cumint_y(omega, 1, "to-1")
    return grid.integrate_y(tail)[:, None] - tail


def velocity_v(grid: ChannelGrid, omega, omega_x=None):
    """v = (1-y) int_0^y z omega_x dz + y int_y^1 (1-z) omega_x dz.

    Zero on both walls by construction.
    """
    if omega_x is None:
        omega_x = grid.ddx(omega)
    return stream_function(grid, omega_x)


def pressure_gradient(grid: ChannelGrid, u, u_x=None):
    """P_x = -d/dx int_0^1 u^2 dy, returned per x-node.

    Computed as -2 int_0^1 u u_x dy so no aliased product is differentiated.
    """
    if u_x is None:
        u_x = grid.ddx(u)
    return -2.0 * grid.integrate_y(u * u_x)


def rhs(grid: ChannelGrid, omega, u=None, v=None):
    """-(u omega_x + v omega_y), dealiased in x under the spectral scheme."""
    omega_x = grid.ddx(omega)
    if u is None:
        u = velocity_u(grid, omega)
    if v is None:
        v = velocity_v(grid, omega, omega_x)
    return -grid.dealias(u * omega_x + v * grid.ddy(omega))


# ---------------------------------------------------------------------------
# state and stepping
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class FlowState:
    """Vorticity at time ``t`` plus lazily derived fields.

    Cached quantities are computed on first access and never invalidated;
    steppers always build a fresh state.
    """

    grid: ChannelGrid
    omega: np.ndarray
    t: float = 0.0
    _extra: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.omega = np.ascontiguousarray(self.omega, dtype=np.float64)
        if self.omega.shape != self.grid.shape:
            raise ValueError(f"omega shape {self.omega.shape} != grid {self.grid.shape}")

    @property
    def valid(self):
        return bool(np.all(np.isfinite(self.omega)))

    @cached_property
    def omega_x(self):
        return self.grid.ddx(self.omega)

    @cached_property
    def omega_y(self):
        return self.grid.ddy(self.omega)

    @cached_property
    def stream(self):
        return stream_function(self.grid, self.omega)

    @cached_property
    def u(self):
        return velocity_u(self.grid, self.omega)

    @cached_property
    def v(self):
        return velocity_v(self.grid, self.omega, self.omega_x)

    @cached_property
    def u_x(self):
        return self.grid.ddx(self.u)

    @cached_property
    def px(self):
        return pressure_gradient(self.grid, self.u, self.u_x)

    @cached_property
    def omega_t(self):
        g = self.grid
        return -g.dealias(self.u * self.omega_x + self.v * self.omega_y)

    def admissible_dt(self, cfl_max=DEFAULT_CFL_MAX):
        speed = (np.max(np.abs(self.u)) * self.grid.nx
                 + np.max(np.abs(self.v)) * (self.grid.ny - 1))
        return np.inf if speed == 0.0 else cfl_max / speed

    def cfl_number(self, dt):
        return dt * (np.max(np.abs(self.u)) * self.grid.nx
                     + np.max(np.abs(self.v)) * (self.grid.ny - 1))


def step_rk4(state: FlowState, dt, cfl_max=DEFAULT_CFL_MAX):
    """Advance one classical RK4 step; raises :class:`CFLError` if dt is too large."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    cfl = state.cfl_number(dt)
    if cfl > cfl_max:
        raise CFLError(dt, state.admissible_dt(cfl_max), cfl)
    g = state.grid
    w0 = state.omega
    k1 = state.omega_t
    k2 = rhs(g, w0 + 0.5 * dt * k1)
    k3 = rhs(g, w0 + 0.5 * dt * k2)
    k4 = rhs(g, w0 + dt * k3)
    w1 = w0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return FlowState(g, w1, state.t + dt)


# ---------------------------------------------------------------------------
# trajectory driver
# ---------------------------------------------------------------------------

@dataclass
class RunSettings:
    """Numerical knobs for :func:`run` (a subset of the scenario config)."""

    t_end: float
    dt: float = 1e-3
    cfl_max: float = DEFAULT_CFL_MAX
    diag_every: int = 1
    snapshot_every: int = 0
    eps_ray_factor: float = 1e-3
    tau_tail: float = 1e-4
    max_steps: int = 10_000_000


@dataclass
class Trajectory:
    records: list
    stop_reason: StopReason
    final_state: FlowState
    steps: int
    wall_seconds: float
    snapshots: list = field(default_factory=list)
    monitor: object = None


def check_stop(state, eps_ray, tau_tail):
    """Stop reason triggered by ``state`` or None."""
    if not state.valid:
        return StopReason.NAN_DETECTED
    if np.min(state.omega_y) < eps_ray:
        return StopReason.RAYLEIGH_COLLAPSE
    if state.grid.tail_fraction(state.omega) > tau_tail:
        return StopReason.RESOLUTION_LOSS
    return None


def run(state0: FlowState, settings: RunSettings, on_record=None, on_snapshot=None):
    """Integrate until ``t_end`` or a stop condition.

    ``on_record(record)`` is called for every diagnostic sample (use it to
    stream CSV rows); ``on_snapshot(index, state)`` for every snapshot.
    The step size is ``settings.dt`` capped by the CFL limit and trimmed to
    land on ``t_end``.
    """
    from .diagnostics import Monitor

    t_start = time.perf_counter()
    check_finite(state0.omega, "initial vorticity")
    min_wy0 = float(np.min(state0.omega_y))
    eps_ray = settings.eps_ray_factor * min_wy0 if min_wy0 > 0 else 0.0
    monitor = Monitor(state0)
    records = []
    snap_index = 0

    def emit(state, resolved=True):
        rec = monitor.sample(state, resolved=resolved)
        records.append(rec)
        if on_record is not None:
            on_record(rec)

    def snap(state):
        nonlocal snap_index
        if on_snapshot is not None:
            on_snapshot(snap_index, state)
        snap_index += 1

    state = state0
    reason = check_stop(state, eps_ray, settings.tau_tail)
    emit(state, resolved=reason is None)
    if settings.snapshot_every:
        snap(state)
    steps = 0
    while reason is None:
        remaining = settings.t_end - state.t
        if remaining <= 1e-12 * max(1.0, abs(settings.t_end)):
            reason = StopReason.REACHED_T_END
            break
        if steps >= settings.max_steps:
            raise RuntimeError(f"max_steps={settings.max_steps} reached at t={state.t}")
        try:
            dt = min(settings.dt, remaining, state.admissible_dt(settings.cfl_max))
            nxt = step_rk4(state, dt, settings.cfl_max)
            if not nxt.valid:
                raise NonFiniteFieldError("omega")
        except (NonFiniteFieldError, FloatingPointError):
            reason = StopReason.NAN_DETECTED
            break
        if abs(settings.t_end - nxt.t) <= 1e-12 * max(1.0, abs(settings.t_end)):
            nxt.t = settings.t_end
        state = nxt
        steps += 1
        reason = check_stop(state, eps_ray, settings.tau_tail)
        last = reason is not None or state.t >= settings.t_end
        if steps % settings.diag_every == 0 or last:
            if state.valid:
                # the sample that triggered a stop is reported but not certified
                emit(state, resolved=reason is None)
        if settings.snapshot_every and (steps % settings.snapshot_every == 0 or last):
            if state.valid:
                snap(state)
    if reason is None:
        reason = StopReason.REACHED_T_END
    log.info("hydrostatic run stopped at t=%.6g after %d steps: %s", state.t, steps, reason.value)
    return Trajectory(records, reason, state, steps, time.perf_counter() - t_start,
                      monitor=monitor)
