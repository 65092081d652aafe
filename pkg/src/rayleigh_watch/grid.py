"""Discrete geometry on the channel T x (0, 1) and on T^d x [0, 1]_a.

Fields are plain float64 arrays. On the channel a field has shape
``(nx, ny)`` with x along axis 0 (periodic, period 1, nodes ``i/nx``) and y
along axis 1 (nodes ``j/(ny-1)``, walls included). On the torus a scalar
field has shape ``(n,)*d + (na,)`` with the level coordinate ``a`` last.

All reductions run in a fixed order: trapezoid sums are sequential along
the wall-bounded axis and the outer sum uses numpy's pairwise summation of
a contiguous vector. Nothing here depends on the thread count.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels

SPECTRAL = "spectral-x"
FD4 = "fd4-x"


class NonFiniteFieldError(ValueError):
    """Raised when a field contains NaN or Inf."""

    def __init__(self, what="field"):
        super().__init__(f"non-finite field ({what})")


class UnsupportedDimensionError(ValueError):
    pass


def check_finite(f, what="field"):
    if not np.all(np.isfinite(f)):
        raise NonFiniteFieldError(what)
    return f


def _weight(name, y):
    if name in (None, 1, "1", "one"):
        return None
    if name == "z":
        return y
    if name in ("1-z", "one_minus_z"):
        return 1.0 - y
    raise ValueError(f"unknown y-weight {name!r}; expected one of 1, 'z', '1-z'")


def _fourier_wavenumbers(n):
    """Angular wavenumbers 2*pi*k for an rfft of length n (period 1)."""
    return 2.0 * np.pi * np.fft.rfftfreq(n, d=1.0 / n)


@dataclass(frozen=True)
class ChannelGrid:
    """Uniform grid on T x (0, 1).

    ``nx`` periodic nodes at ``x_i = i/nx`` and ``ny`` wall-inclusive nodes at
    ``y_j = j/(ny-1)``. ``scheme`` selects spectral or 4th-order periodic
    finite differences for d/dx.
    """

    nx: int
    ny: int
    scheme: str = SPECTRAL
    x: np.ndarray = field(init=False, repr=False, compare=False)
    y: np.ndarray = field(init=False, repr=False, compare=False)
    wy: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.nx) != self.nx or self.nx < 8:
            raise ValueError(f"nx must be an integer >= 8, got {self.nx}")
        if int(self.ny) != self.ny or self.ny < 9:
            raise ValueError(f"ny must be an integer >= 9, got {self.ny}")
        if self.scheme not in (SPECTRAL, FD4):
            raise ValueError(f"unknown x-derivative scheme {self.scheme!r}")
        x = np.arange(self.nx) / self.nx
        y = np.linspace(0.0, 1.0, self.ny)
        y[0], y[-1] = 0.0, 1.0
        wy = np.full(self.ny, self.hy)
        wy[0] = wy[-1] = 0.5 * self.hy
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "wy", wy)

    @property
    def hx(self):
        return 1.0 / self.nx

    @property
    def hy(self):
        return 1.0 / (self.ny - 1)

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def kx(self):
        return _fourier_wavenumbers(self.nx)

    @property
    def kmax_dealias(self):
        """Largest integer wavenumber kept by the 2/3 rule."""
        return self.nx // 3

    def mesh(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    def sample(self, func):
        X, Y = self.mesh()
        out = np.asarray(func(X, Y), dtype=np.float64)
        return np.broadcast_to(out, self.shape).copy()

    def zeros(self):
        return np.zeros(self.shape)

    def _check(self, f):
        if f.shape != self.shape:
            raise ValueError(f"field shape {f.shape} does not match grid {self.shape}")
        return check_finite(f)

    # -- quadrature --------------------------------------------------------

    def cumint_y(self, f, weight=1, direction="from-0"):
        """Cumulative trapezoid of ``w(z) f`` along y.

        ``from-0`` gives int_0^y and is 0 on the bottom wall; ``to-1`` gives
        int_y^1 and is 0 on the top wall.
        """
        self._check(f)
        w = _weight(weight, self.y)
        g = f if w is None else f * w
        if direction == "from-0":
            return _kernels.cumtrapz(g, self.hy, reverse=False)
        if direction == "to-1":
            return _kernels.cumtrapz(g, self.hy, reverse=True)
        raise ValueError(f"direction must be 'from-0' or 'to-1', got {direction!r}")

    def integrate_y(self, f, weight=1):
        """Per-column trapezoid of ``w(z) f`` over (0, 1).

        Defined as the last entry of :meth:`cumint_y` so the two agree
        bit for bit.
        """
        return self.cumint_y(f, weight, "from-0")[:, -1].copy()

    def integrate_x(self, g):
        """Rectangle rule over one period of a per-x array."""
        g = np.ascontiguousarray(g, dtype=np.float64)
        check_finite(g)
        return float(np.sum(g)) / self.nx

    def integrate_full(self, f):
        """Integral over T x (0, 1)."""
        return self.integrate_x(self.integrate_y(f))

    # -- differentiation ---------------------------------------------------

    def ddx(self, f, scheme=None):
        if f.ndim == 2:
            self._check(f)
        else:
            check_finite(f)
        scheme = scheme or self.scheme
        if scheme == SPECTRAL:
            return spectral_ddx(f, axis=0)
        return fd4_periodic_ddx(f, self.hx, axis=0)

    def ddy(self, f):
        self._check(f)
        return _kernels.ddy_fd4(f, self.hy)

    def dealias(self, f):
        """2/3-rule truncation in x (identity for the fd4 scheme)."""
        if self.scheme != SPECTRAL:
            return f
        return truncate_modes(f, self.kmax_dealias, axis=0)

    def tail_fraction(self, f):
        """Energy fraction of the top third of the retained x-band.

        The x-mean (k = 0) is excluded from the total. Returns 0 for a field
        with no x-variation.
        """
        F = np.fft.rfft(f, axis=0)
        e = (np.abs(F) ** 2).sum(axis=1)
        K = self.kmax_dealias
        k = np.arange(e.shape[0])
        total = e[(k >= 1) & (k <= K)].sum()
        if total <= 0.0:
            return 0.0
        tail = e[(k > (2 * K) // 3) & (k <= K)].sum()
        return float(tail / total)


def spectral_ddx(f, axis=0, order=1):
    """Fourier derivative along a periodic axis of period 1.

    The Nyquist coefficient is dropped for odd-order derivatives.
    """
    n = f.shape[axis]
    F = np.fft.rfft(f, axis=axis)
    k = _fourier_wavenumbers(n)
    mult = (1j * k) ** order
    if order % 2 == 1 and n % 2 == 0:
        mult[-1] = 0.0
    shape = [1] * f.ndim
    shape[axis] = -1
    return np.fft.irfft(F * mult.reshape(shape), n=n, axis=axis)


def fd4_periodic_ddx(f, h, axis=0):
    return (np.roll(f, 2, axis) - 8.0 * np.roll(f, 1, axis)
            + 8.0 * np.roll(f, -1, axis) - np.roll(f, -2, axis)) / (12.0 * h)


def truncate_modes(f, kmax, axis=0):
    n = f.shape[axis]
    F = np.fft.rfft(f, axis=axis)
    sl = [slice(None)] * f.ndim
    sl[axis] = slice(kmax + 1, None)
    F[tuple(sl)] = 0.0
    return np.fft.irfft(F, n=n, axis=axis)


# ---------------------------------------------------------------------------
# Torus T^d x [0, 1]_a
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid on T^d x [0, 1]_a with ``n`` nodes per periodic axis."""

    d: int
    n: int
    na: int
    a: np.ndarray = field(init=False, repr=False, compare=False)
    x: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.d not in (1, 2):
            raise UnsupportedDimensionError(f"unsupported dimension d={self.d}; only 1 and 2")
        if self.n < 8:
            raise ValueError(f"n must be >= 8, got {self.n}")
        if self.na < 9:
            raise ValueError(f"na must be >= 9, got {self.na}")
        a = np.linspace(0.0, 1.0, self.na)
        a[0], a[-1] = 0.0, 1.0
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "x", np.arange(self.n) / self.n)

    @property
    def ha(self):
        return 1.0 / (self.na - 1)

    @property
    def space_shape(self):
        return (self.n,) * self.d

    @property
    def shape(self):
        return self.space_shape + (self.na,)

    @property
    def kmax_dealias(self):
        return self.n // 3

    def mesh(self):
        """Coordinate arrays (x1[, x2], a), each of shape :attr:`shape`."""
        axes = [self.x] * self.d + [self.a]
        return np.meshgrid(*axes, indexing="ij")

    def _cols(self, f):
        return np.ascontiguousarray(f.reshape(-1, self.na))

    def integrate_a(self, f, weight=None):
        check_finite(f)
        g = f if weight is None else f * weight
        cols = _kernels.cumtrapz(self._cols(g), self.ha, reverse=False)
        return cols[:, -1].reshape(f.shape[:-1])

    def cumint_a(self, f, direction="from-0"):
        check_finite(f)
        cols = _kernels.cumtrapz(self._cols(f), self.ha, reverse=(direction == "to-1"))
        return cols.reshape(f.shape)

    def dda(self, f):
        check_finite(f)
        return _kernels.ddy_fd4(self._cols(f), self.ha).reshape(f.shape)

    def mean_x(self, g):
        """Rectangle rule over T^d of an array whose leading d axes are space."""
        g = np.asarray(g, dtype=np.float64)
        check_finite(g)
        return g.reshape((-1,) + g.shape[self.d:]).sum(axis=0) / self.n ** self.d

    def integrate_full(self, f):
        """Integral over T^d x [0, 1]."""
        return float(self.mean_x(self.integrate_a(f)))

    def grad(self, f):
        """Spectral gradient over the leading d axes; returns shape (d,) + f.shape."""
        check_finite(f)
        return np.stack([spectral_ddx(f, axis=i) for i in range(self.d)])

    def div(self, v):
        return sum(spectral_ddx(v[i], axis=i) for i in range(self.d))

    def dealias(self, f):
        for i in range(self.d):
            f = truncate_modes(f, self.kmax_dealias, axis=i)
        return f


def _torus_k2(shape):
    ks = [2.0 * np.pi * np.fft.fftfreq(n, d=1.0 / n) for n in shape[:-1]]
    ks.append(2.0 * np.pi * np.fft.rfftfreq(shape[-1], d=1.0 / shape[-1]))
    grids = np.meshgrid(*ks, indexing="ij")
    return sum(k * k for k in grids)


def poisson_inverse_torus(g, d=None, return_mean=False):
    """Zero-mean solution P of -Laplace(P) = g on the unit torus T^d.

    A nonzero mean in ``g`` is projected out; its magnitude is returned as
    the second value when ``return_mean`` is set.
    """
    g = np.asarray(g, dtype=np.float64)
    if d is None:
        d = g.ndim
    if d not in (1, 2):
        raise UnsupportedDimensionError(f"unsupported dimension d={d}; only 1 and 2")
    if g.ndim != d:
        raise ValueError(f"expected a {d}-dimensional field, got shape {g.shape}")
    check_finite(g)
    G = np.fft.rfftn(g)
    mean = float(G.flat[0].real) / g.size
    k2 = _torus_k2(g.shape)
    k2.flat[0] = 1.0
    P = G / k2
    P.flat[0] = 0.0
    out = np.fft.irfftn(P, s=g.shape, axes=tuple(range(g.ndim)))
    return (out, mean) if return_mean else out


def neg_laplacian_torus(P):
    """Spectral -Laplace on the unit torus (same mode conventions as the inverse)."""
    G = np.fft.rfftn(P) * _torus_k2(P.shape)
    return np.fft.irfftn(G, s=P.shape, axes=tuple(range(P.ndim)))
