"""Moments of the auxiliary law, explosion coefficient and the asymptotic count.

``U`` takes the value ``-log lambda_i`` with probability ``lambda_i^2 / Lambda``.
With ``M``, ``sigma^2`` its mean and variance, ``E = Lambda exp(2M)`` and
``1 - Phi(q / sigma) = eps^2``, the information complexity behaves like

    n(eps, d) ~ K phi(q / sigma) E^d exp(2 q sqrt(d)) / sqrt(d)

with ``K = h / (sigma (1 - exp(-2h)))`` for a lattice law of span ``h`` and
``K = 1 / (2 sigma)`` otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp, expm1, fsum, log, pi, sqrt
from statistics import NormalDist

import mpmath as mp
import numpy as np

from ..errors import DegenerateSpectrum, TruncationTooCoarse, ValidationError
from .catalog import EigenSequence

MOMENT_TAIL_RTOL = 1e-6
_STD = NormalDist()


@dataclass(frozen=True)
class MomentSummary:
    M: float
    sigma2: float
    alpha3: float
    Lambda: float

    @property
    def sigma(self) -> float:
        return sqrt(max(self.sigma2, 0.0))

    @property
    def explosion(self) -> float:
        return self.Lambda * exp(2 * self.M)


def _head_sums(s: np.ndarray):
    ls = np.log(s)
    return [fsum(s), fsum(s * ls), fsum(s * ls ** 2), fsum(s * ls ** 3)]


def moments(seq: EigenSequence) -> MomentSummary:
    """Mean, variance and third central moment of ``U``.

    Catalog sequences add their exact tails beyond the materialized length;
    other sequences must not carry an undeclared tail heavier than the
    tolerance allows.
    """
    s = seq.values
    sums = _head_sums(s)
    Lam = seq.trace
    if seq.is_infinite:
        for j in range(4):
            sums[j] += float(seq.spec_tail(lambda v, j=j: v * mp.log(v) ** j))
    else:
        tail = Lam - sums[0]
        if tail < -1e-12 * Lam:
            raise ValidationError("declared trace is smaller than the sum of the eigenvalues")
        if tail > 0:
            # crude bound: the tail mass weighted by the largest log-power at the cut
            worst = tail * max(1.0, abs(0.5 * log(s[-1]))) ** 3 / Lam
            if worst > MOMENT_TAIL_RTOL:
                raise TruncationTooCoarse(
                    f"undeclared tail mass {tail:.3g} may shift the moments by up to {worst:.3g}")
    EU = -0.5 * sums[1] / Lam
    EU2 = 0.25 * sums[2] / Lam
    EU3 = -0.125 * sums[3] / Lam
    sigma2 = max(EU2 - EU * EU, 0.0)
    alpha3 = EU3 - 3 * EU * sigma2 - EU ** 3
    if sigma2 < 1e-15 * max(1.0, EU * EU):
        sigma2 = 0.0
    return MomentSummary(EU, sigma2, alpha3, Lam)


def normal_quantile_q(epsilon: float, sigma: float) -> float:
    """``q = sigma Phi^{-1}(1 - eps^2)``, evaluated as ``-sigma Phi^{-1}(eps^2)``."""
    if not 0 < epsilon < 1:
        raise ValidationError(f"epsilon must lie in (0, 1), got {epsilon}")
    if sigma <= 0:
        raise ValidationError("sigma must be positive")
    return -sigma * _STD.inv_cdf(epsilon * epsilon)


def lattice_constant(sigma: float, span: float | None) -> float:
    if span is None:
        return 1.0 / (2 * sigma)
    return span / (sigma * -expm1(-2 * span))


def normal_pdf(x: float) -> float:
    return exp(-0.5 * x * x) / sqrt(2 * pi)


@dataclass(frozen=True)
class AsymptoticPrediction:
    n: float
    log_n: float
    q: float
    K: float
    explosion: float
    d: int
    epsilon: float


def asymptotic_n(summary: MomentSummary, span: float | None, epsilon: float, d: int) -> AsymptoticPrediction:
    if d < 1:
        raise ValidationError("d must be a positive integer")
    sigma = summary.sigma
    if sigma == 0:
        raise DegenerateSpectrum("the auxiliary law is degenerate (sigma = 0)")
    q = normal_quantile_q(epsilon, sigma)
    K = lattice_constant(sigma, span)
    log_n = (log(K) + log(normal_pdf(q / sigma)) + d * log(summary.explosion)
             + 2 * q * sqrt(d) - 0.5 * log(d))
    n = exp(log_n) if log_n < 700 else float("inf")
    return AsymptoticPrediction(n, log_n, q, K, summary.explosion, d, epsilon)
