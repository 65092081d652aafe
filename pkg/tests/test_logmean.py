import math

import numpy as np
import pytest

from rayleigh_watch.logmean import LogMeanDomainError, WeightedSamples, geometric_mean, limit_study, p_norm


def two_point():
    return WeightedSamples([1.0, 4.0], [0.5, 0.5])


def exp_samples(n=10_000):
    return WeightedSamples.trapezoid(np.exp(np.linspace(0, 1, n)))


def test_constant():
    s = WeightedSamples.uniform(np.full(7, 3.0))
    assert geometric_mean(s) == pytest.approx(3.0, rel=1e-15)
    for p in (1, 0.3, 0.005, 1e-6):
        assert p_norm(s, p) == pytest.approx(3.0, rel=1e-14)


def test_two_point():
    assert geometric_mean(two_point()) == pytest.approx(2.0, rel=1e-15)
    assert p_norm(two_point(), 1.0) == pytest.approx(2.5, rel=1e-15)


def test_exponential_samples():
    s = exp_samples()
    assert geometric_mean(s) == pytest.approx(math.exp(0.5), rel=1e-8)
    assert p_norm(s, 1.0) == pytest.approx(math.e - 1, rel=1e-8)
    for p in (0.5, 0.1, 0.01, 0.001):
        exact = ((math.exp(p) - 1) / p) ** (1 / p)
        assert p_norm(s, p) == pytest.approx(exact, rel=1e-8)


def test_log_space_branch_is_continuous():
    s = exp_samples(101)
    below, above = p_norm(s, 0.01 - 1e-12), p_norm(s, 0.01)
    assert below == pytest.approx(above, rel=1e-10)


def test_limit_study():
    out = limit_study(exp_samples(), [1, 0.1, 0.01, 0.001])
    assert out["nonincreasing"] and out["jensen"]
    assert out["relative_gap"] < 3e-4
    assert all(d < 0 for d in out["differences"])
    flat = limit_study(WeightedSamples.uniform([2.0, 2.0]), [1, 0.1])
    assert flat["gap"] == pytest.approx(0.0, abs=1e-15)


def test_domain_errors():
    with pytest.raises(LogMeanDomainError):
        WeightedSamples([1.0, -1.0], [0.5, 0.5])
    with pytest.raises(LogMeanDomainError):
        WeightedSamples([1.0, 0.0], [0.5, 0.5])
    with pytest.raises(LogMeanDomainError):
        WeightedSamples([1.0, 2.0], [0.5, 0.6])
    with pytest.raises(LogMeanDomainError):
        p_norm(two_point(), 0.0)
    with pytest.raises(LogMeanDomainError):
        p_norm(two_point(), -1.0)
    with pytest.raises(ValueError):
        limit_study(two_point(), [0.1, 1.0])
    with pytest.raises(ValueError):
        WeightedSamples([1.0], [0.5, 0.5])
