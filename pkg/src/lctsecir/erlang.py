"""Erlang and exponential stay-time distributions.

A chain of ``shape`` subcompartments, each left at rate ``rate``, produces an
Erlang(rate, shape) distributed total stay time.  These closed forms serve as
the analytic oracle against which the chain construction is verified.
"""
from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ErlangParams:
    """Rate (1/days) and integer shape of an Erlang distribution."""

    rate: float
    shape: int

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"rate must be positive, got {self.rate}")
        if int(self.shape) != self.shape or self.shape < 1:
            raise ValueError(f"shape must be a positive integer, got {self.shape}")


def pdf(p: ErlangParams, x: float) -> float:
    """Density rate^shape / (shape-1)! * x^(shape-1) * exp(-rate*x) for x >= 0.

    Evaluated in log-space so large shapes (tested up to 200) do not overflow.
    """
    if x < 0:
        return 0.0
    if x == 0.0:
        return p.rate if p.shape == 1 else 0.0
    log_f = (p.shape * math.log(p.rate) - math.lgamma(p.shape)
             + (p.shape - 1) * math.log(x) - p.rate * x)
    return math.exp(log_f)


def survival(p: ErlangParams, x: float) -> float:
    """P(stay time > x), i.e. 1 - cdf.

    The partial sum exp(-rate*x) * sum_{j=0}^{shape-1} (rate*x)^j / j! is
    evaluated term by term in log-space.
    """
    if x <= 0:
        return 1.0
    lam_x = p.rate * x
    if lam_x == 0.0:  # rate * x underflowed for subnormal x
        return 1.0
    log_lx = math.log(lam_x)
    total = 0.0
    for j in range(p.shape):
        total += math.exp(j * log_lx - math.lgamma(j + 1) - lam_x)
    return min(total, 1.0)


def cdf(p: ErlangParams, x: float) -> float:
    """P(stay time <= x); zero for x < 0, monotone nondecreasing."""
    if x <= 0:
        return 0.0
    return 1.0 - survival(p, x)


def mean_variance(p: ErlangParams) -> tuple[float, float]:
    """Mean shape/rate (the stay time T) and variance shape/rate^2 = T^2/shape."""
    mean = p.shape / p.rate
    return mean, mean / p.rate


def subcompartments_for_variance(mean: float, variance: float) -> int:
    """Chain length whose Erlang variance best approximates the target.

    Uses round-half-away-from-zero on mean^2/variance, clamped to >= 1.  When
    the ratio is not an integer the returned chain only approximates the
    requested variance.
    """
    if mean <= 0 or variance <= 0:
        raise ValueError("mean and variance must be positive")
    ratio = mean * mean / variance
    return max(1, int(math.floor(ratio + 0.5)))
