"""Fitted log-likelihood tests between scales and the sequential selection rule.

Scales are 1-based in the public API.  Internally the statistics triangle is a
``K x K`` array ``T`` with ``T[l-1, m-1] = T_{lm}`` for ``l < m`` and ``nan``
elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ValidationError
from .local_model import ScaleEstimate


def test_statistic(est_l: ScaleEstimate, est_m: ScaleEstimate) -> float:
    """``T_lm = (theta_l - theta_m)' B_l (theta_l - theta_m)``."""
    if est_l.theta.shape != est_m.theta.shape:
        raise DimensionMismatch("estimates have different dimensions")
    d = est_l.theta - est_m.theta
    return float(max(d @ est_l.info @ d, 0.0))


test_statistic.__test__ = False  # keep pytest from collecting the name


def _thresholds(cv, K: int) -> np.ndarray:
    z = np.asarray(getattr(cv, "thresholds", cv), dtype=float).ravel()
    if z.size != K - 1:
        raise DimensionMismatch(f"need {K - 1} critical values for K={K}, got {z.size}")
    return z


def statistics_triangle(thetas, infos) -> np.ndarray:
    thetas = np.asarray(thetas, dtype=float)
    K = thetas.shape[0]
    T = np.full((K, K), np.nan)
    for l in range(K - 1):
        d = thetas[l] - thetas[l + 1:]
        T[l, l + 1:] = np.maximum(np.einsum("mi,ij,mj->m", d, infos[l], d), 0.0)
    return T


def select_from_statistics(T, z) -> int:
    """Largest ``k`` with ``T[l, m] <= z[l]`` for all ``l < m <= k`` (1-based)."""
    T = np.asarray(T, dtype=float)
    z = np.asarray(z, dtype=float)
    K = T.shape[0]
    for m in range(1, K):
        if np.any(T[:m, m] > z[:m]):
            return m
    return K


@dataclass(frozen=True)
class AdaptiveResult:
    k_hat: int
    estimates: tuple
    statistics: np.ndarray
    accepted: np.ndarray

    @property
    def theta(self) -> np.ndarray:
        return self.estimates[self.k_hat - 1].theta

    @property
    def K(self) -> int:
        return len(self.estimates)


def select(estimates, cv) -> AdaptiveResult:
    """Sequential rule: scale ``k`` is accepted iff ``k-1`` was and ``T_lk <= z_l`` for all ``l < k``.

    The full triangle is kept for diagnostics; only its accepted prefix (and
    the first rejected column) decides ``k_hat``.
    """
    estimates = tuple(estimates)
    K = len(estimates)
    if K < 2:
        raise ValidationError("selection needs at least two scales")
    z = _thresholds(cv, K)
    thetas = np.stack([e.theta for e in estimates])
    T = statistics_triangle(thetas, [e.info for e in estimates])
    k_hat = select_from_statistics(T, z)
    accepted = np.arange(1, K + 1) <= k_hat
    return AdaptiveResult(k_hat, estimates, T, accepted)


def last_accepted(estimates, cv, k: int) -> np.ndarray:
    """``theta_hat_k = theta_tilde_{min(k, k_hat)}``."""
    estimates = tuple(estimates)
    if not 1 <= k <= len(estimates):
        raise ValidationError(f"k={k} outside 1..{len(estimates)}")
    res = select(estimates, cv)
    return estimates[min(k, res.k_hat) - 1].theta.copy()


def batch_statistics(thetas, infos) -> np.ndarray:
    """Statistics for many replicates: ``thetas`` is ``(R, K, p)``, result ``(R, K, K)``."""
    thetas = np.asarray(thetas, dtype=float)
    R, K, _ = thetas.shape
    T = np.full((R, K, K), np.nan)
    for l in range(K - 1):
        d = thetas[:, l:l + 1, :] - thetas[:, l + 1:, :]
        T[:, l, l + 1:] = np.maximum(np.einsum("rmi,ij,rmj->rm", d, infos[l], d), 0.0)
    return T


def batch_select(T, z) -> np.ndarray:
    """Vectorized :func:`select_from_statistics` over the leading axis."""
    T = np.asarray(T, dtype=float)
    z = np.asarray(z, dtype=float)
    R, K, _ = T.shape
    k_hat = np.full(R, K)
    alive = np.ones(R, dtype=bool)
    for m in range(1, K):
        bad = alive & np.any(T[:, :m, m] > z[:m], axis=1)
        k_hat[bad] = m
        alive &= ~bad
    return k_hat
