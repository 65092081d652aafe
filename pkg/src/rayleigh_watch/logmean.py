"""Geometric means and the p -> 0 limit of p-norms on a probability measure.

    exp(int log f dmu) = lim_{p -> 0} (int f^p dmu)^{1/p}

and the left side never exceeds any p-norm (Jensen).
"""

import math
from dataclasses import dataclass

import numpy as np

LOG_SPACE_BELOW = 0.01
NORMALIZATION_TOL = 1e-12


class LogMeanDomainError(ValueError):
    pass


@dataclass(frozen=True)
class WeightedSamples:
    """Positive values with nonnegative weights summing to one."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.values, dtype=np.float64).ravel()
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        if f.shape != w.shape:
            raise ValueError(f"{f.size} values but {w.size} weights")
        if f.size == 0:
            raise ValueError("empty sample")
        if not np.all(np.isfinite(f)) or not np.all(np.isfinite(w)):
            raise LogMeanDomainError("non-finite value or weight")
        if np.any(f <= 0.0):
            raise LogMeanDomainError("values must be strictly positive")
        if np.any(w < 0.0):
            raise LogMeanDomainError("weights must be nonnegative")
        if abs(math.fsum(w) - 1.0) > NORMALIZATION_TOL:
            raise LogMeanDomainError(f"weights sum to {math.fsum(w)!r}, not 1")
        object.__setattr__(self, "values", f)
        object.__setattr__(self, "weights", w)

    @classmethod
    def normalized(cls, values, weights):
        w = np.asarray(weights, dtype=np.float64).ravel()
        total = math.fsum(w)
        if not total > 0:
            raise LogMeanDomainError("weights must have positive total")
        return cls(values, w / total)

    @classmethod
    def uniform(cls, values):
        f = np.asarray(values, dtype=np.float64).ravel()
        return cls.normalized(f, np.ones_like(f))

    @classmethod
    def trapezoid(cls, values, lo=0.0, hi=1.0):
        """Trapezoid weights on a uniform grid over [lo, hi], normalized."""
        f = np.asarray(values, dtype=np.float64).ravel()
        w = np.ones_like(f)
        w[0] = w[-1] = 0.5
        return cls.normalized(f, w)


def _mean_log(s):
    return float(np.dot(s.weights, np.log(s.values)))


def geometric_mean(s: WeightedSamples):
    return math.exp(_mean_log(s))


def p_norm(s: WeightedSamples, p):
    """(sum mu f^p)^(1/p); log-space evaluation below p = 0.01."""
    if not p > 0:
        raise LogMeanDomainError(f"p must be positive, got {p}")
    if p >= LOG_SPACE_BELOW:
        return float(np.dot(s.weights, s.values ** p)) ** (1.0 / p)
    # factor out the geometric mean so the remaining sum is 1 + O(p)
    L = np.log(s.values)
    m = float(np.dot(s.weights, L))
    inner = float(np.dot(s.weights, np.expm1(p * (L - m))))
    return math.exp(m + math.log1p(inner) / p)


def limit_study(s: WeightedSamples, p_seq):
    """p-norms along a strictly decreasing sequence and their approach to the geometric mean."""
    ps = [float(p) for p in p_seq]
    if not ps:
        raise ValueError("empty p sequence")
    if any(p <= 0 for p in ps):
        raise LogMeanDomainError("p values must be positive")
    if any(b >= a for a, b in zip(ps, ps[1:])):
        raise ValueError("p sequence must be strictly decreasing")
    norms = [p_norm(s, p) for p in ps]
    diffs = [b - a for a, b in zip(norms, norms[1:])]
    gm = geometric_mean(s)
    return {
        "p": ps,
        "p_norm": norms,
        "differences": diffs,
        "nonincreasing": all(d <= 1e-12 * max(1.0, abs(gm)) for d in diffs),
        "geometric_mean": gm,
        "gap": norms[-1] - gm,
        "relative_gap": (norms[-1] - gm) / gm,
        "jensen": all(gm <= n * (1 + 1e-15) for n in norms),
    }
