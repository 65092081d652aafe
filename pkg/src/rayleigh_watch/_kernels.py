"""Column kernels: numba versions plus numpy fallbacks.

Every kernel works on a 2D array laid out as ``(ncol, n)`` where the last
axis is the wall-bounded direction (y for the channel, a for the level
coordinate). Columns are independent, so the numba versions ``prange`` over
them and write disjoint output rows; there are no cross-thread reductions.

The public names at the bottom dispatch on :data:`_backend.USE_NUMBA`.
Both ``_np_*`` and ``_nb_*`` variants stay importable so tests and the
benchmark can compare them directly.
"""

import numpy as np

from . import _backend

# One-sided 4th-order first-derivative stencils (times 1/(12 h)).
_D_LEFT0 = (-25.0, 48.0, -36.0, 16.0, -3.0)
_D_LEFT1 = (-3.0, -10.0, 18.0, -6.0, 1.0)

NEWTON_MAXIT = 30
ROOT_TOL = 1e-12


# ---------------------------------------------------------------------------
# numpy path
# ---------------------------------------------------------------------------

def _np_cumtrapz(g, h, reverse):
    inc = 0.5 * h * (g[:, :-1] + g[:, 1:])
    out = np.zeros_like(g)
    if reverse:
        out[:, :-1] = np.cumsum(inc[:, ::-1], axis=1)[:, ::-1]
    else:
        out[:, 1:] = np.cumsum(inc, axis=1)
    return out


def _np_ddy_fd4(f, h):
    n = f.shape[1]
    out = np.empty_like(f)
    c = 1.0 / (12.0 * h)
    out[:, 2:n - 2] = (f[:, :n - 4] - 8.0 * f[:, 1:n - 3] + 8.0 * f[:, 3:n - 1] - f[:, 4:]) * c
    a0, a1, a2, a3, a4 = _D_LEFT0
    b0, b1, b2, b3, b4 = _D_LEFT1
    out[:, 0] = (a0 * f[:, 0] + a1 * f[:, 1] + a2 * f[:, 2] + a3 * f[:, 3] + a4 * f[:, 4]) * c
    out[:, 1] = (b0 * f[:, 0] + b1 * f[:, 1] + b2 * f[:, 2] + b3 * f[:, 3] + b4 * f[:, 4]) * c
    out[:, -1] = -(a0 * f[:, -1] + a1 * f[:, -2] + a2 * f[:, -3] + a3 * f[:, -4] + a4 * f[:, -5]) * c
    out[:, -2] = -(b0 * f[:, -1] + b1 * f[:, -2] + b2 * f[:, -3] + b3 * f[:, -4] + b4 * f[:, -5]) * c
    return out


def _limited_slopes(f0, f1, m0, m1, dy):
    """Fritsch-Carlson limiting of a cell's endpoint slopes (vectorised)."""
    sec = (f1 - f0) / dy
    m0 = np.maximum(m0, 0.0)
    m1 = np.maximum(m1, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        al = np.where(sec > 0, m0 / sec, 0.0)
        be = np.where(sec > 0, m1 / sec, 0.0)
    r2 = al * al + be * be
    tau = np.where(r2 > 9.0, 3.0 / np.sqrt(np.where(r2 > 0, r2, 1.0)), 1.0)
    return tau * m0, tau * m1


def _hermite(t, f0, f1, m0, m1, dy):
    t2 = t * t
    t3 = t2 * t
    val = ((2 * t3 - 3 * t2 + 1) * f0 + (t3 - 2 * t2 + t) * dy * m0
           + (-2 * t3 + 3 * t2) * f1 + (t3 - t2) * dy * m1)
    der = ((6 * t2 - 6 * t) * (f0 - f1) / dy + (3 * t2 - 4 * t + 1) * m0
           + (3 * t2 - 2 * t) * m1)
    return val, der


def _np_hermite_invert(F, dF, levels, dy):
    ncol, n = F.shape
    m = levels.shape[0]
    out = np.empty((ncol, m))
    ok = np.ones(ncol, dtype=np.bool_)
    for i in range(ncol):
        col = F[i]
        if np.any(np.diff(col) <= 0.0) or levels[0] < col[0] or levels[-1] > col[-1]:
            ok[i] = False
            out[i] = np.nan
            continue
        k = np.clip(np.searchsorted(col, levels, side="right") - 1, 0, n - 2)
        f0, f1 = col[k], col[k + 1]
        m0, m1 = _limited_slopes(f0, f1, dF[i, k], dF[i, k + 1], dy)
        lo = np.zeros(m)
        hi = np.ones(m)
        t = np.clip((levels - f0) / (f1 - f0), 0.0, 1.0)
        for _ in range(NEWTON_MAXIT):
            g, dg = _hermite(t, f0, f1, m0, m1, dy)
            g = g - levels
            lo = np.where(g <= 0.0, t, lo)
            hi = np.where(g >= 0.0, t, hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                tn = t - g / (dg * dy)
            bad = ~np.isfinite(tn) | (tn <= lo) | (tn >= hi)
            tn = np.where(bad, 0.5 * (lo + hi), tn)
            step = np.abs(tn - t) * dy
            t = tn
            if np.all((step < ROOT_TOL) | (g == 0.0)):
                break
        out[i] = k * dy + t * dy
    return out, ok


def _np_hermite_eval(F, dF, pts, dy):
    ncol, n = F.shape
    k = np.clip(np.floor(pts / dy).astype(np.int64), 0, n - 2)
    t = pts / dy - k
    rows = np.arange(ncol)[:, None]
    f0, f1 = F[rows, k], F[rows, k + 1]
    return _hermite(t, f0, f1, dF[rows, k], dF[rows, k + 1], dy)


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------

if _backend.HAVE_NUMBA:
    from numba import njit, prange

    @njit(parallel=True, cache=True)
    def _nb_cumtrapz(g, h, reverse):
        ncol, n = g.shape
        out = np.zeros_like(g)
        for i in prange(ncol):
            if reverse:
                acc = 0.0
                for j in range(n - 2, -1, -1):
                    acc = acc + 0.5 * h * (g[i, j] + g[i, j + 1])
                    out[i, j] = acc
            else:
                acc = 0.0
                for j in range(1, n):
                    acc = acc + 0.5 * h * (g[i, j - 1] + g[i, j])
                    out[i, j] = acc
        return out

    @njit(parallel=True, cache=True)
    def _nb_ddy_fd4(f, h):
        ncol, n = f.shape
        out = np.empty_like(f)
        c = 1.0 / (12.0 * h)
        for i in prange(ncol):
            for j in range(2, n - 2):
                out[i, j] = (f[i, j - 2] - 8.0 * f[i, j - 1] + 8.0 * f[i, j + 1] - f[i, j + 2]) * c
            out[i, 0] = (-25.0 * f[i, 0] + 48.0 * f[i, 1] - 36.0 * f[i, 2]
                         + 16.0 * f[i, 3] - 3.0 * f[i, 4]) * c
            out[i, 1] = (-3.0 * f[i, 0] - 10.0 * f[i, 1] + 18.0 * f[i, 2]
                         - 6.0 * f[i, 3] + 1.0 * f[i, 4]) * c
            out[i, n - 1] = -(-25.0 * f[i, n - 1] + 48.0 * f[i, n - 2] - 36.0 * f[i, n - 3]
                              + 16.0 * f[i, n - 4] - 3.0 * f[i, n - 5]) * c
            out[i, n - 2] = -(-3.0 * f[i, n - 1] - 10.0 * f[i, n - 2] + 18.0 * f[i, n - 3]
                              - 6.0 * f[i, n - 4] + 1.0 * f[i, n - 5]) * c
        return out

    @njit(cache=True)
    def _nb_hermite1(t, f0, f1, m0, m1, dy):
        t2 = t * t
        t3 = t2 * t
        val = ((2 * t3 - 3 * t2 + 1) * f0 + (t3 - 2 * t2 + t) * dy * m0
               + (-2 * t3 + 3 * t2) * f1 + (t3 - t2) * dy * m1)
        der = ((6 * t2 - 6 * t) * (f0 - f1) / dy + (3 * t2 - 4 * t + 1) * m0
               + (3 * t2 - 2 * t) * m1)
        return val, der

    @njit(cache=True)
    def _nb_limit(f0, f1, m0, m1, dy):
        sec = (f1 - f0) / dy
        if m0 < 0.0:
            m0 = 0.0
        if m1 < 0.0:
            m1 = 0.0
        if sec > 0.0:
            al = m0 / sec
            be = m1 / sec
            r2 = al * al + be * be
            if r2 > 9.0:
                tau = 3.0 / np.sqrt(r2)
                m0 = tau * m0
                m1 = tau * m1
        return m0, m1

    @njit(parallel=True, cache=True)
    def _nb_hermite_invert(F, dF, levels, dy):
        ncol, n = F.shape
        m = levels.shape[0]
        out = np.empty((ncol, m))
        ok = np.ones(ncol, dtype=np.bool_)
        for i in prange(ncol):
            mono = levels[0] >= F[i, 0] and levels[m - 1] <= F[i, n - 1]
            for j in range(n - 1):
                if F[i, j + 1] <= F[i, j]:
                    mono = False
            if not mono:
                ok[i] = False
                for q in range(m):
                    out[i, q] = np.nan
                continue
            k = 0
            for q in range(m):
                c = levels[q]
                while k < n - 2 and F[i, k + 1] <= c:
                    k += 1
                f0 = F[i, k]
                f1 = F[i, k + 1]
                m0, m1 = _nb_limit(f0, f1, dF[i, k], dF[i, k + 1], dy)
                lo = 0.0
                hi = 1.0
                t = (c - f0) / (f1 - f0)
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
                for _ in range(NEWTON_MAXIT):
                    g, dg = _nb_hermite1(t, f0, f1, m0, m1, dy)
                    g = g - c
                    if g <= 0.0:
                        lo = t
                    if g >= 0.0:
                        hi = t
                    if dg > 0.0:
                        tn = t - g / (dg * dy)
                    else:
                        tn = -1.0
                    if not (tn > lo and tn < hi):
                        tn = 0.5 * (lo + hi)
                    step = abs(tn - t) * dy
                    t = tn
                    if step < ROOT_TOL or g == 0.0:
                        break
                out[i, q] = k * dy + t * dy
        return out, ok

    @njit(parallel=True, cache=True)
    def _nb_hermite_eval(F, dF, pts, dy):
        ncol, n = F.shape
        m = pts.shape[1]
        val = np.empty((ncol, m))
        der = np.empty((ncol, m))
        for i in prange(ncol):
            for q in range(m):
                s = pts[i, q] / dy
                k = int(np.floor(s))
                if k < 0:
                    k = 0
                elif k > n - 2:
                    k = n - 2
                v, d = _nb_hermite1(s - k, F[i, k], F[i, k + 1], dF[i, k], dF[i, k + 1], dy)
                val[i, q] = v
                der[i, q] = d
        return val, der
else:  # pragma: no cover
    _nb_cumtrapz = _nb_ddy_fd4 = _nb_hermite_invert = _nb_hermite_eval = None


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def cumtrapz(g, h, reverse=False):
    """Cumulative trapezoid along the last axis, zero at the start (or end)."""
    if _backend.USE_NUMBA:
        return _nb_cumtrapz(_c(g), float(h), bool(reverse))
    return _np_cumtrapz(_c(g), float(h), bool(reverse))


def ddy_fd4(f, h):
    """4th-order first derivative along the last axis (one-sided at ends)."""
    if f.shape[-1] < 5:
        raise ValueError("fd4 stencil needs at least 5 points")
    if _backend.USE_NUMBA:
        return _nb_ddy_fd4(_c(f), float(h))
    return _np_ddy_fd4(_c(f), float(h))


def hermite_invert(F, dF, levels, dy):
    """Solve p_i(y) = level for every column i and every level.

    ``p_i`` is the cubic Hermite interpolant of ``F[i]`` with slopes
    ``dF[i]`` (Fritsch-Carlson limited per cell) on the uniform grid of
    spacing ``dy`` starting at 0. Levels must be nondecreasing. Returns the
    roots and a per-column flag that is False when the column is not
    strictly increasing or does not bracket the levels.
    """
    if _backend.USE_NUMBA:
        return _nb_hermite_invert(_c(F), _c(dF), _c(levels), float(dy))
    return _np_hermite_invert(_c(F), _c(dF), _c(levels), float(dy))


def hermite_eval(F, dF, pts, dy):
    """Value and derivative of the per-column Hermite interpolant at ``pts``."""
    if _backend.USE_NUMBA:
        return _nb_hermite_eval(_c(F), _c(dF), _c(pts), float(dy))
    return _np_hermite_eval(_c(F), _c(dF), _c(pts), float(dy))
