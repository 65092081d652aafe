"""Blow-up functionals, exact identities and certified inequalities.

Per-sample quantities come from :class:`Monitor`, which owns the running
time integrals (trapezoid over the diagnostic cadence) and stamps each
:class:`DiagnosticRecord` with pass/fail flags. Run-level reports are pure
functions of the record stream.

Notation used in names: ``r = omega omega_x / omega_y`` and
``q = r - u_x``; E1 = int r, D1 = int q^2, D2 = int (P_x - u q)^2.
"""

import math
from dataclasses import dataclass, field, fields

import numpy as np

SLACK_ABS = 1e-9
SLACK_REL = 1e-6
MONOTONE_TOL = 1e-8
# |omega0| below this multiple of eps * |omega0|_inf is a sampled zero
ZERO_ULPS = 64


class RayleighCollapseError(ArithmeticError):
    """omega_y is not strictly positive on the grid."""

    def __init__(self, min_wy):
        self.min_wy = float(min_wy)
        super().__init__(f"local Rayleigh condition violated: min omega_y = {self.min_wy:.6g}")


def holds(lhs, rhs):
    """lhs <= rhs up to the certification slack."""
    scale = max(abs(lhs), abs(rhs))
    return lhs <= rhs + SLACK_ABS + SLACK_REL * scale


# ---------------------------------------------------------------------------
# instantaneous functionals
# ---------------------------------------------------------------------------

def _ratio(omega, omega_x, omega_y):
    m = float(np.min(omega_y))
    if not m > 0.0:
        raise RayleighCollapseError(m)
    return omega * omega_x / omega_y


def e1(grid, omega, u=None, return_gap=False):
    """E1 = int omega omega_x / omega_y.

    With ``return_gap`` also returns int (r - u_x) - E1, which vanishes for
    exact solutions because int u_x = 0.
    """
    r = _ratio(omega, grid.ddx(omega), grid.ddy(omega))
    val = grid.integrate_full(r)
    if not return_gap:
        return val
    from .hydrostatic import velocity_u

    if u is None:
        u = velocity_u(grid, omega)
    return val, grid.integrate_full(r - grid.ddx(u)) - val


def e2(grid, omega, u, px, return_gap=False):
    """E2 = int u^2 omega omega_x / omega_y (gap against the P_x form optional)."""
    r = _ratio(omega, grid.ddx(omega), grid.ddy(omega))
    val = grid.integrate_full(u * u * r)
    if not return_gap:
        return val
    q = r - grid.ddx(u)
    alt = grid.integrate_full(u * u * q - u * px[:, None])
    return val, alt - val


def dissipation_density(state):
    """q = omega omega_x / omega_y - u_x for a FlowState."""
    return _ratio(state.omega, state.omega_x, state.omega_y) - state.u_x


def dissipations(state):
    """(D1, D2): the time derivatives of E1 and E2."""
    g = state.grid
    q = dissipation_density(state)
    d1 = g.integrate_full(q * q)
    w = state.px[:, None] - state.u * q
    d2 = g.integrate_full(w * w)
    return d1, d2


def log_rayleigh(grid, omega, omega0=None, omega_y0=None):
    """int log(d_y omega0 / omega_y); zero at t = 0."""
    wy = grid.ddy(omega)
    if omega_y0 is None:
        omega_y0 = grid.ddy(omega0)
    m = min(float(np.min(wy)), float(np.min(omega_y0)))
    if not m > 0.0:
        raise RayleighCollapseError(m)
    return grid.integrate_full(np.log(omega_y0 / wy))


@dataclass(frozen=True)
class Bounds:
    lb_e1: float
    lb_e2: float
    log_lb_e1: float
    log_lb_e2: float
    pole_e1: float
    pole_e2: float
    pole_reached_e1: bool = False
    pole_reached_e2: bool = False


def lower_bounds(t, e1_0, e2_0, u_l2sq):
    """Reciprocal lower bounds and their log forms.

    LB_E1 = 1/(1/E1(0) - t), LB_E2 = |u|^2/(|u|^2/E2(0) - t); the log forms
    are log(1/(1 - t E(0)/scale)). Bounds are NaN when E(0) <= 0 and +inf
    once t has reached the pole.
    """
    nan = float("nan")

    def one(e0, scale):
        if not e0 > 0.0:
            return nan, nan, nan, False
        pole = scale / e0
        if t >= pole:
            return math.inf, math.inf, pole, True
        lb = scale / (pole - t)
        return lb, -math.log1p(-t / pole), pole, False

    lb1, log1, pole1, hit1 = one(e1_0, 1.0)
    lb2, log2, pole2, hit2 = one(e2_0, u_l2sq)
    return Bounds(lb1, lb2, log1, log2, pole1, pole2, hit1, hit2)


# ---------------------------------------------------------------------------
# constants frozen from the initial datum
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundConstants:
    omega0_inf: float
    u_l2sq: float
    e1_0: float
    e2_0: float
    min_abs_omega0: float
    inv_wy0_inf: float
    wy0_inf: float
    wx_weighted0: float
    log_budget: float
    C1: float
    C2: float
    C3: float
    C4: float
    C: float
    C_tilde: float

    @classmethod
    def from_state(cls, state):
        g = state.grid
        w0, wx, wy = state.omega, state.omega_x, state.omega_y
        winf = float(np.max(np.abs(w0)))
        kin = g.integrate_full(state.u ** 2)
        E1 = e1(g, w0)
        E2 = e2(g, w0, state.u, state.px)
        min_abs = float(np.min(np.abs(w0)))
        if min_abs <= ZERO_ULPS * np.finfo(float).eps * winf:
            min_abs = 0.0
        c2 = (1.5 * winf) ** 4 / kin ** 2 if kin > 0 else math.inf
        c1 = c2 * abs(E1) + (E2 / kin if kin > 0 else math.inf)
        c3 = 2.0 * winf ** 2 + 2.0 / math.pi ** 2
        c4 = 2.0 * (3.0 / math.pi * winf) ** 2 + 2.0 * (1.5 * winf) ** 2 * c3
        if min_abs > 0.0:
            C = 3.0 + 2.0 * winf / min_abs
            Ct = 0.5 + 0.5 * C
        else:
            C = Ct = float("nan")
        return cls(
            omega0_inf=winf, u_l2sq=kin, e1_0=E1, e2_0=E2, min_abs_omega0=min_abs,
            inv_wy0_inf=float(np.max(1.0 / wy)), wy0_inf=float(np.max(np.abs(wy))),
            wx_weighted0=math.sqrt(g.integrate_full(wx * wx / wy)),
            log_budget=g.integrate_full(np.log(2.0 * winf / wy)),
            C1=c1, C2=c2, C3=c3, C4=c4, C=C, C_tilde=Ct,
        )

    @property
    def continuation_applicable(self):
        return self.min_abs_omega0 > 0.0

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------

NAN = float("nan")

# Leading CSV columns, in this order.
CORE_COLUMNS = (
    "t", "E1", "E2", "D1", "D2", "minRayleigh", "logRayleigh", "kinetic", "uInf",
    "pxL2", "M", "cumD1", "cumD2", "cumPx2", "cumAbsE1", "LB_E1", "LB_E2",
    "logLB_E1", "logLB_E2",
)
EXTRA_COLUMNS = (
    "resolved", "collapsed", "E1gap", "E2gap", "omegaInf", "momentum", "qInf",
    "uxInf", "invWyInf", "wyInf", "wxWeightedL2", "growth", "cumGrowth", "tail",
)
FLAG_NAMES = (
    "lb_e1", "log_e1", "lb_e2", "log_e2", "growth_e1", "growth_e2", "cs_e1", "cs_e2",
    "mono_e1", "mono_e2", "u_bound", "pxl2", "properties4", "ux_bound",
    "cc1", "cc2", "cc3", "cc4", "cc5",
)


@dataclass
class DiagnosticRecord:
    t: float
    E1: float = NAN
    E2: float = NAN
    D1: float = NAN
    D2: float = NAN
    minRayleigh: float = NAN
    logRayleigh: float = NAN
    kinetic: float = NAN
    uInf: float = NAN
    pxL2: float = NAN
    M: float = NAN
    cumD1: float = NAN
    cumD2: float = NAN
    cumPx2: float = NAN
    cumAbsE1: float = NAN
    LB_E1: float = NAN
    LB_E2: float = NAN
    logLB_E1: float = NAN
    logLB_E2: float = NAN
    resolved: bool = True
    collapsed: bool = False
    E1gap: float = NAN
    E2gap: float = NAN
    omegaInf: float = NAN
    momentum: float = NAN
    qInf: float = NAN
    uxInf: float = NAN
    invWyInf: float = NAN
    wyInf: float = NAN
    wxWeightedL2: float = NAN
    growth: float = NAN
    cumGrowth: float = NAN
    tail: float = NAN
    flags: dict = field(default_factory=dict)

    def row(self):
        vals = [getattr(self, c) for c in CORE_COLUMNS + EXTRA_COLUMNS]
        vals += [self.flags.get(n) for n in FLAG_NAMES]
        return vals


def columns():
    return CORE_COLUMNS + EXTRA_COLUMNS + tuple("ok_" + n for n in FLAG_NAMES)


def _trap(acc, dt, a, b):
    return acc + 0.5 * dt * (a + b)


class Monitor:
    """Evaluates records for one trajectory and owns its accumulators."""

    def __init__(self, state0):
        self.grid = state0.grid
        self.omega_y0 = state0.omega_y.copy()
        self.constants = BoundConstants.from_state(state0)
        self.prev = None
        self.e1_negative_so_far = True
        self.suspended = False
        self.probe = StationarityProbe()

    def sample(self, state, resolved=True):
        g, c = self.grid, self.constants
        rec = DiagnosticRecord(t=float(state.t), resolved=bool(resolved))
        wx, wy, w, u, ux = state.omega_x, state.omega_y, state.omega, state.u, state.u_x
        rec.minRayleigh = float(np.min(wy))
        rec.kinetic = g.integrate_full(u * u)
        rec.uInf = float(np.max(np.abs(u)))
        rec.omegaInf = float(np.max(np.abs(w)))
        rec.momentum = float(np.max(np.abs(g.integrate_y(u))))
        rec.uxInf = float(np.max(np.abs(ux)))
        rec.tail = g.tail_fraction(w)
        px = state.px
        rec.pxL2 = g.integrate_x(px * px)
        b = lower_bounds(rec.t, c.e1_0, c.e2_0, c.u_l2sq)
        rec.LB_E1, rec.LB_E2, rec.logLB_E1, rec.logLB_E2 = b.lb_e1, b.lb_e2, b.log_lb_e1, b.log_lb_e2

        if rec.minRayleigh <= 0.0 or self.suspended:
            # functionals with 1/omega_y are undefined from here on
            rec.collapsed = True
            self.suspended = True
            rec.flags = {n: None for n in FLAG_NAMES}
            rec.flags["u_bound"] = _flag(rec.resolved, holds(rec.uInf, 1.5 * c.omega0_inf + 1e-8))
            self.prev = None
            return rec

        r = w * wx / wy
        q = r - ux
        u2 = u * u
        rec.E1 = g.integrate_full(r)
        rec.E1gap = g.integrate_full(q) - rec.E1
        rec.E2 = g.integrate_full(u2 * r)
        rec.E2gap = g.integrate_full(u2 * q - u * px[:, None]) - rec.E2
        rec.D1 = g.integrate_full(q * q)
        s = px[:, None] - u * q
        rec.D2 = g.integrate_full(s * s)
        rec.logRayleigh = g.integrate_full(np.log(self.omega_y0 / wy))
        rec.qInf = float(np.max(np.abs(q)))
        rec.invWyInf = float(np.max(1.0 / wy))
        rec.wyInf = float(np.max(np.abs(wy)))
        rec.wxWeightedL2 = math.sqrt(g.integrate_full(wx * wx / wy))
        rec.growth = g.integrate_full(wx * wx * (1.0 + 1.0 / (wy * wy)))

        p = self.prev
        if p is None:
            rec.M = rec.cumD1 = rec.cumD2 = rec.cumPx2 = rec.cumGrowth = 0.0
            rec.cumAbsE1 = 0.0
        else:
            dt = rec.t - p.t
            rec.M = _trap(p.M, dt, p.qInf, rec.qInf)
            rec.cumD1 = _trap(p.cumD1, dt, p.D1, rec.D1)
            rec.cumD2 = _trap(p.cumD2, dt, p.D2, rec.D2)
            rec.cumPx2 = _trap(p.cumPx2, dt, p.pxL2, rec.pxL2)
            rec.cumAbsE1 = _trap(p.cumAbsE1, dt, abs(p.E1), abs(rec.E1))
            rec.cumGrowth = _trap(p.cumGrowth, dt, p.growth, rec.growth)
        self.probe.update(rec.t, rec.D1, w, wx)
        self.e1_negative_so_far = self.e1_negative_so_far and rec.E1 < 0.0
        rec.flags = evaluate_flags(rec, p, c, b, self.e1_negative_so_far)
        self.prev = rec
        return rec


def _exp(x):
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def _flag(resolved, ok):
    return None if not resolved else bool(ok)


def evaluate_flags(rec, prev, c, b, e1_negative_so_far):
    """Per-sample certification flags: True pass, False fail, None n/a."""
    f = {n: None for n in FLAG_NAMES}
    if not rec.resolved:
        return f
    if c.e1_0 > 0.0:
        f["lb_e1"] = (not b.pole_reached_e1) and holds(rec.LB_E1, rec.E1)
        f["log_e1"] = (not b.pole_reached_e1) and holds(rec.logLB_E1, rec.logRayleigh)
    if c.e2_0 > 0.0:
        f["lb_e2"] = (not b.pole_reached_e2) and holds(rec.LB_E2, rec.E2)
        f["log_e2"] = (not b.pole_reached_e2) and holds(
            rec.logLB_E2, rec.t * c.C1 + c.C2 * rec.logRayleigh)
    f["growth_e1"] = holds(rec.E1 - c.e1_0, c.C3 * rec.cumGrowth)
    f["growth_e2"] = holds(rec.E2 - c.e2_0, c.C4 * rec.cumGrowth)
    f["cs_e1"] = holds(rec.E1 ** 2, rec.D1)
    f["cs_e2"] = holds(rec.E2 ** 2, rec.kinetic * rec.D2)
    if prev is not None:
        f["mono_e1"] = rec.E1 >= prev.E1 - MONOTONE_TOL * max(1.0, abs(prev.E1))
        f["mono_e2"] = rec.E2 >= prev.E2 - MONOTONE_TOL * max(1.0, abs(prev.E2))
    f["u_bound"] = holds(rec.uInf, 1.5 * c.omega0_inf + 1e-8)
    f["pxl2"] = holds(rec.cumPx2, 2.0 * (rec.E2 - c.e2_0)
                      + 4.5 * c.omega0_inf ** 2 * (rec.E1 - c.e1_0))
    if e1_negative_so_far:
        f["properties4"] = holds(rec.cumAbsE1, c.log_budget)
    if c.continuation_applicable:
        M = rec.M
        f["ux_bound"] = holds(rec.uxInf, (c.omega0_inf / c.min_abs_omega0 + 1.0) * rec.qInf)
        f["cc1"] = holds(rec.invWyInf, c.inv_wy0_inf * _exp(M))
        f["cc2"] = holds(rec.wyInf, c.wy0_inf * _exp(M))
        f["cc3"] = holds(rec.wxWeightedL2, c.wx_weighted0 * _exp(0.5 * c.C * M))
        # proven form: the Hoelder step carries |1/d_y omega0|_inf to the power 1/2
        base = c.wx_weighted0 * math.sqrt(c.inv_wy0_inf) * _exp(c.C_tilde * M)
        f["cc4"] = holds(rec.E1, base * c.omega0_inf)
        f["cc5"] = holds(rec.E2, 2.25 * base * c.omega0_inf ** 3)
    return f


# ---------------------------------------------------------------------------
# run-level reports
# ---------------------------------------------------------------------------

def certification_summary(records, names=FLAG_NAMES):
    """Status per inequality: pass / fail / not-applicable, first violation time."""
    out = {}
    for n in names:
        checked = [(r.t, r.flags.get(n)) for r in records if r.flags.get(n) is not None]
        bad = [t for t, ok in checked if not ok]
        if not checked:
            status = "not-applicable"
        else:
            status = "fail" if bad else "pass"
        out[n] = {
            "status": status,
            "samples_checked": len(checked),
            "violations": len(bad),
            "first_violation_t": bad[0] if bad else None,
        }
    return out


def _finite(records):
    return [r for r in records if r.resolved and not r.collapsed]


def central_rates(t, f):
    """Second-order d/dt of a sampled series at interior samples (nonuniform ok)."""
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    h0 = t[1:-1] - t[:-2]
    h1 = t[2:] - t[1:-1]
    return (h0 ** 2 * f[2:] - h1 ** 2 * f[:-2] - (h0 ** 2 - h1 ** 2) * f[1:-1]) / (h0 * h1 * (h0 + h1))


def _rel_mismatch(num, ref, floor_frac=1e-2):
    ref = np.asarray(ref, dtype=float)
    if ref.size == 0:
        return 0.0
    scale = float(np.max(np.abs(ref)))
    if scale == 0.0:
        return float(np.max(np.abs(num))) if np.size(num) else 0.0
    den = np.maximum(np.abs(ref), floor_frac * scale)
    return float(np.max(np.abs(num - ref) / den))


def identity_suite(records, tol=1e-3):
    """dE1/dt vs D1, dE2/dt vs D2, d/dt logRayleigh vs E1 by central differences.

    Only resolved, non-collapsed samples are used. The mismatch is
    ``|rate - ref| / max(|ref|, 0.01 max|ref|)``, maximised over interior samples.
    """
    recs = _finite(records)
    if len(recs) < 3:
        return {"status": "not-applicable", "samples": len(recs)}
    t = [r.t for r in recs]
    res = {"samples": len(recs), "tolerance": tol}
    pairs = {"dE1_vs_D1": ("E1", "D1"), "dE2_vs_D2": ("E2", "D2"),
             "dlogRayleigh_vs_E1": ("logRayleigh", "E1")}
    ok = True
    for name, (fcol, rcol) in pairs.items():
        rate = central_rates(t, [getattr(r, fcol) for r in recs])
        ref = np.array([getattr(r, rcol) for r in recs[1:-1]])
        err = _rel_mismatch(rate, ref)
        res[name] = err
        ok &= err <= tol
    res["status"] = "pass" if ok else "fail"
    return res


def necessary_conditions(records, constants, tol=1e-3):
    """Finite-horizon checks tied to global solvability.

    Reports the exact identities cum int D1 = E1(t) - E1(0) and
    cum int D2 = E2(t) - E2(0) (relative mismatch), the P_x budget and the
    |E1| budget at every horizon. The asymptotic (t -> infinity) statements
    are never claimed; ``horizon`` is the last time checked.
    """
    c = constants
    recs = _finite(records)
    regime = c.e1_0 < 0.0 and c.e2_0 < 0.0
    rep = {
        "applicable": regime,
        "regime": "global-solvability" if regime else "collapse (E1(0) >= 0 or E2(0) >= 0)",
        "horizon": recs[-1].t if recs else 0.0,
    }
    if not recs:
        return rep
    d1 = np.array([r.cumD1 for r in recs])
    de1 = np.array([r.E1 - c.e1_0 for r in recs])
    d2 = np.array([r.cumD2 for r in recs])
    de2 = np.array([r.E2 - c.e2_0 for r in recs])
    rep["identity_D1"] = _rel_mismatch(d1, de1)
    rep["identity_D2"] = _rel_mismatch(d2, de2)
    rep["identity_status"] = "pass" if max(rep["identity_D1"], rep["identity_D2"]) <= tol else "fail"
    summ = certification_summary(recs, ("pxl2", "properties4"))
    rep["pxl2"] = summ["pxl2"]
    rep["properties4"] = summ["properties4"]
    rep["cum_px2"] = recs[-1].cumPx2
    rep["cum_abs_e1"] = recs[-1].cumAbsE1
    rep["log_budget"] = c.log_budget
    return rep


def continuation_bounds(records, constants):
    """Summary of the M(t)-controlled bounds (n/a when omega0 vanishes somewhere)."""
    c = constants
    if not c.continuation_applicable:
        return {"applicable": False, "reason": "min |omega0| = 0 on the grid"}
    recs = _finite(records)
    rep = {"applicable": True, "C": c.C, "C_tilde": c.C_tilde,
           "M_final": recs[-1].M if recs else 0.0}
    rep.update(certification_summary(recs, ("ux_bound", "cc1", "cc2", "cc3", "cc4", "cc5")))
    return rep


def conservation_summary(records, constants):
    recs = [r for r in records if r.resolved]
    if not recs:
        return {}
    k0 = constants.u_l2sq
    kin = np.array([r.kinetic for r in recs])
    mom = np.array([r.momentum for r in recs])
    uinf = np.array([r.uInf for r in recs])
    winf = np.array([r.omegaInf for r in recs])
    return {
        "kinetic_rel_drift": float(np.max(np.abs(kin - k0)) / k0) if k0 > 0 else 0.0,
        "momentum_rel": float(np.max(mom) / max(np.max(uinf), 1e-300)),
        "max_principle_overshoot": float(max(0.0, (np.max(winf) - constants.omega0_inf)
                                            / constants.omega0_inf)) if constants.omega0_inf else 0.0,
        "u_inf_max": float(np.max(uinf)),
        "u_inf_bound": 1.5 * constants.omega0_inf,
    }


# ---------------------------------------------------------------------------
# stationarity
# ---------------------------------------------------------------------------

class StationarityProbe:
    """Watches D1; once it drops below ``tol`` the flow must freeze.

    After the trigger sample, every later sample must satisfy
    ``|omega - omega_trigger|_inf < tol_drift`` and ``|omega_x|_inf < tol_x``.
    """

    def __init__(self, tol=1e-12, tol_drift=1e-8, tol_x=1e-6):
        self.tol, self.tol_drift, self.tol_x = tol, tol_drift, tol_x
        self.trigger_t = None
        self._ref = None
        self.failures = []

    def update(self, t, d1, omega, omega_x=None):
        if self._ref is None:
            if d1 is not None and np.isfinite(d1) and d1 < self.tol:
                self.trigger_t = t
                self._ref = np.array(omega, copy=True)
            else:
                return
        drift = float(np.max(np.abs(omega - self._ref)))
        wx = 0.0 if omega_x is None else float(np.max(np.abs(omega_x)))
        if drift >= self.tol_drift or wx >= self.tol_x:
            self.failures.append((t, drift, wx))

    def verdict(self):
        return {
            "triggered": self.trigger_t is not None,
            "trigger_t": self.trigger_t,
            "status": "fail" if self.failures else "pass",
            "first_failure": self.failures[0] if self.failures else None,
        }


def stationarity_probe(samples, **tols):
    """Run the probe over ``(t, D1, omega[, omega_x])`` tuples."""
    probe = StationarityProbe(**tols)
    for s in samples:
        probe.update(*s)
    return probe.verdict()
