"""Acceptance criteria, one test each, at their stated tolerances.

Every test prints a single ``[PASS]``/``[FAIL]`` line (visible even under
output capture). Run just this file with

    pytest tests/test_acceptance.py -v

or ``python3 tests/test_acceptance.py`` for the summary lines alone.
"""

import math
import os
import subprocess
import sys

import numpy as np
import pytest

from rayleigh_watch import ChannelGrid, FlowState, TorusGrid, step_rk4
from rayleigh_watch.diagnostics import e1
from rayleigh_watch.logmean import limit_study
from rayleigh_watch.scenario import (
    ScenarioConfig, dictionary_study, exp_trapezoid_samples, preset, run_scenario,
)
from rayleigh_watch.semilagrangian import (
    SLSettings, compressive_state, hsle_run, hsle_step, sl_from_vorticity, sl_identity_suite,
    sl_invariants,
)

E1_EXACT = 2 * math.pi * (2 / math.sqrt(3) - 1)


def report(capsys, label, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)
    return ok


def scenario(tmp, **kw):
    data = {"schema_version": 1, "out": str(tmp)}
    data.update(kw)
    return run_scenario(ScenarioConfig.from_dict(data))


# -- 1 ----------------------------------------------------------------------

def criterion_1(tmp):
    errs = {}
    for nx, ny, tol in ((128, 513, 1e-4), (256, 2049, 1e-6)):
        g = ChannelGrid(nx, ny)
        errs[(nx, ny)] = (abs(e1(g, preset("paper-remark", g)) / E1_EXACT - 1), tol)
    ok = all(err <= tol for err, tol in errs.values())
    detail = ", ".join(f"{nx}x{ny} rel err {err:.2e} (tol {tol:g})" for (nx, ny), (err, tol) in errs.items())
    return ok, "E1(0) = 2 pi (2/sqrt3 - 1); " + detail


# -- 2 ----------------------------------------------------------------------

def criterion_2(tmp):
    rep = scenario(tmp, preset="paper-remark", nx=128, ny=257, dt=1e-3, t_end=0.3)
    ids = rep["identity_suite"]
    keys = ("dE1_vs_D1", "dE2_vs_D2", "dlogRayleigh_vs_E1")
    ok = ids["status"] == "pass" and all(ids[k] <= 1e-3 for k in keys)
    detail = ", ".join(f"{k} {ids[k]:.2e}" for k in keys)
    return ok, (f"identity suite over [0, {rep['final_t']:.3f}] (stop: {rep['stop_reason']}), "
                f"tol 1e-3: {detail}")


# -- 3 ----------------------------------------------------------------------

def criterion_3(tmp):
    rep = scenario(tmp, preset="paper-remark", nx=128, ny=1025, dt=2e-4, t_end=0.3)
    c = rep["conservation"]
    ub = rep["certification"]["u_bound"]
    ok = (c["kinetic_rel_drift"] <= 1e-6 and c["momentum_rel"] <= 1e-10
          and ub["status"] == "pass" and c["u_inf_max"] <= c["u_inf_bound"] + 1e-8)
    return ok, (f"kinetic drift {c['kinetic_rel_drift']:.2e} (<= 1e-6), momentum {c['momentum_rel']:.1e} "
                f"(<= 1e-10), |u|inf {c['u_inf_max']:.3f} <= {c['u_inf_bound']:.3f} "
                f"at {ub['samples_checked']} samples")


# -- 4 ----------------------------------------------------------------------

def criterion_4(tmp):
    rep = scenario(tmp / "a", preset="paper-remark", t_end=2.0)
    cert = rep["certification"]
    pole = rep["pole_E1"]
    ok_a = (cert["lb_e1"]["status"] == "pass" and cert["log_e1"]["status"] == "pass"
            and abs(pole - 1 / E1_EXACT) < 1e-4 and rep["stop_reason"] != "reached-t-end")
    mir = scenario(tmp / "b", preset="paper-remark-mirrored", t_end=2.0)
    nc = mir["necessary_conditions"]
    ok_b = (mir["constants"]["e1_0"] < 0 and nc["pxl2"]["status"] == "pass"
            and nc["properties4"]["status"] == "pass" and nc["properties4"]["samples_checked"] > 0)
    return ok_a and ok_b, (
        f"E1 bounds {cert['lb_e1']['samples_checked']} samples until {rep['stop_reason']} at "
        f"t={rep['final_t']:.3f}, pole {pole:.5f}; mirrored: pxl2 {nc['pxl2']['samples_checked']} and "
        f"properties4 {nc['properties4']['samples_checked']} horizons pass")


# -- 5 ----------------------------------------------------------------------

def criterion_5(tmp):
    g = ChannelGrid(128, 257)
    s0 = FlowState(g, preset("shear", g))
    rep = scenario(tmp, preset="shear", t_end=1.0)
    from rayleigh_watch.io import read_csv

    header, rows = read_csv(os.path.join(tmp, "series.csv"))
    d1_max = max(float(r[header.index("D1")]) for r in rows)
    s = s0
    drift = 0.0
    while s.t < 1.0 - 1e-12:
        s = step_rk4(s, min(1e-3, 1.0 - s.t))
        drift = max(drift, float(np.max(np.abs(s.omega - s0.omega))))
    ok = rep["stop_reason"] == "reached-t-end" and drift <= 1e-8 and d1_max <= 1e-12
    return ok, f"|omega(t) - omega0|inf max {drift:.1e} (<= 1e-8), D1 max {d1_max:.1e} (<= 1e-12)"


# -- 6 ----------------------------------------------------------------------

def criterion_6(tmp):
    cfg = ScenarioConfig.from_dict({"schema_version": 1, "preset": "sl-pinned", "out": str(tmp)})
    study = dictionary_study(cfg, min_order=1.9)
    worst = {k: min(v) for k, v in study["observed_orders"].items()}
    ok = study["status"] == "pass" and len(worst) == 9
    detail = ", ".join(f"{k} {v:.2f}" for k, v in worst.items())
    return ok, f"nine residual orders (>= 1.9): {detail}"


# -- 7 ----------------------------------------------------------------------

def cross_solver_errors(levels=((32, 65), (64, 129), (128, 257)), T=0.1, dt=2e-3):
    errs = []
    for nx, ny in levels:
        g = ChannelGrid(nx, ny)
        s = FlowState(g, preset("sl-pinned", g))
        _, sl = sl_from_vorticity(s, 0.0)
        for _ in range(int(round(T / dt))):
            s = step_rk4(s, dt)
            sl = hsle_step(sl, dt)
        _, ref = sl_from_vorticity(s, 0.0)
        errs.append(max(float(np.max(np.abs(sl.v - ref.v))), float(np.max(np.abs(sl.ha - ref.ha)))))
    return errs


def criterion_7(tmp):
    errs = cross_solver_errors()
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    ok = all(o >= 1.5 for o in orders)
    return ok, ("sup error " + ", ".join(f"{e:.1e}" for e in errs)
                + "; orders " + ", ".join(f"{o:.2f}" for o in orders) + " (>= 1.5)")


# -- 8 ----------------------------------------------------------------------

def _sl_case(d, n, na, dt, t_end):
    st = compressive_state(TorusGrid(d, n, na))
    traj = hsle_run(st, SLSettings(t_end=t_end, dt=dt))
    inv = sl_invariants(traj.records)
    ids = sl_identity_suite(traj.records)
    resolved = [r for r in traj.records if r.resolved]
    flags_ok = all(v is not False for r in resolved for v in r.flags.values())
    bounds_ok = all(r.flags["lb_e1"] and r.flags["log_ha"] for r in resolved)
    cs_ok = all(r.flags["cs_e1"] and r.flags["cs_e2"] for r in resolved)
    ok = (inv["bcc_lhs_rel_drift"] <= 1e-6 and inv["bcc_rhs_rel_drift"] <= 1e-6
          and inv["kinetic_rel_drift"] <= 1e-6 and ids["dE1_vs_D1"] <= 1e-3 and ids["dE2_vs_D2"] <= 1e-3
          and ids["dEntropy_vs_E1"] <= 1e-3 and flags_ok and bounds_ok and cs_ok and resolved[0].E1 > 0)
    detail = (f"d={d}: {len(resolved)} samples to t={resolved[-1].t:.3f} ({traj.stop_reason.value}), "
              f"BCC drift {max(inv['bcc_lhs_rel_drift'], inv['bcc_rhs_rel_drift']):.1e}, "
              f"kinetic {inv['kinetic_rel_drift']:.1e}, identities "
              f"{max(ids['dE1_vs_D1'], ids['dE2_vs_D2'], ids['dEntropy_vs_E1']):.1e}, "
              f"curl {inv['curl_max']:.1e}")
    return ok, detail, inv


def criterion_8(tmp):
    ok1, d1, _ = _sl_case(1, 128, 65, 1e-3, 1.0)
    ok2, d2, inv2 = _sl_case(2, 32, 17, 2e-3, 0.1)
    ok = ok1 and ok2 and inv2["curl_max"] <= 1e-8
    return ok, d1 + "; " + d2


# -- 9 ----------------------------------------------------------------------

def criterion_9(tmp):
    study = limit_study(exp_trapezoid_samples(10_000), [1.0, 0.5, 0.1, 0.01, 0.001])
    rel = abs(study["p_norm"][-1] / math.exp(0.5) - 1)
    ok = rel <= 3e-4 and study["nonincreasing"] and study["jensen"]
    return ok, f"relative gap at p=1e-3 {rel:.2e} (<= 3e-4), nonincreasing, Jensen at every p"


# -- 10 ---------------------------------------------------------------------

def criterion_10(tmp):
    blobs = {}
    for threads in ("1", "8"):
        out = tmp / f"threads{threads}"
        env = dict(os.environ, RAYLEIGH_WATCH_THREADS=threads, NUMBA_NUM_THREADS="8")
        res = subprocess.run([sys.executable, "-m", "rayleigh_watch", "run", "--preset", "paper-remark",
                              "--out", str(out)], env=env, capture_output=True, text=True)
        if res.returncode != 0:
            return False, f"run with {threads} thread(s) exited {res.returncode}: {res.stderr.strip()}"
        with open(out / "series.csv", "rb") as fh:
            blobs[threads] = fh.read()
    ok = blobs["1"] == blobs["8"]
    return ok, f"series.csv byte-identical for 1 and 8 threads ({len(blobs['1'])} bytes)"


CRITERIA = [
    ("1 closed-form E1(0)", criterion_1),
    ("2 hydrostatic identity suite", criterion_2),
    ("3 conservation suite", criterion_3),
    ("4 bound certification", criterion_4),
    ("5 stationary shear", criterion_5),
    ("6 level-set dictionary", criterion_6),
    ("7 cross-solver agreement", criterion_7),
    ("8 semi-Lagrangian suite", criterion_8),
    ("9 geometric-mean limit", criterion_9),
    ("10 thread-count determinism", criterion_10),
]


@pytest.mark.parametrize("label,fn", CRITERIA, ids=[f"criterion_{c[0].split()[0]}" for c in CRITERIA])
def test_criterion(label, fn, tmp_path, capsys):
    ok, detail = fn(tmp_path)
    report(capsys, label, ok, detail)
    assert ok, detail


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    results = []
    for label, fn in CRITERIA:
        with tempfile.TemporaryDirectory() as d:
            ok, detail = fn(Path(d))
        results.append(report(None, label, ok, detail))
    sys.exit(0 if all(results) else 1)
