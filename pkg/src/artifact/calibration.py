"""Critical values for the selection rule.

Two sources: the closed-form bound ``theoretical_cv`` and ``calibrate_mc``,
which enforces the propagation conditions

    E_0 |(theta_k - theta_hat_k)' B_k (theta_k - theta_hat_k)|^r <= alpha C(p, r),  k = 2..K

on a simulated ensemble under the parametric model with ``theta = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import exp, lgamma, log

import numpy as np

from .errors import CalibrationDiverged, InvalidMu, ValidationError
from .lepski import batch_select, batch_statistics
from .local_model import LocalModel
from .mc import batch_means

METHODS = ("theoretical", "monte-carlo")

MAX_BISECTION = 60
BRACKET_RTOL = 0.005


def risk_constant(p: int, r: float) -> float:
    """``C(p, r) = E |chi2_p|^r = 2^r Gamma(r + p/2) / Gamma(p/2)``."""
    if p < 1 or r <= 0:
        raise ValidationError("need p >= 1 and r > 0")
    return exp(r * log(2.0) + lgamma(r + p / 2) - lgamma(p / 2))


def cbar(p: int, r: float) -> float:
    """``log{2^{2r} [Gamma(2r + p/2) Gamma(p/2)]^{1/2} / Gamma(r + p/2)}``."""
    return 2 * r * log(2.0) + 0.5 * (lgamma(2 * r + p / 2) + lgamma(p / 2)) - lgamma(r + p / 2)


@dataclass(frozen=True, eq=False)
class CriticalValues:
    thresholds: np.ndarray
    p: int
    r: float
    alpha: float
    u: float
    K: int
    method: str
    seed: int = 0
    replicates: int = 0
    mu: float | None = None
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        z = np.asarray(self.thresholds, dtype=float).ravel()
        if z.size != self.K - 1:
            raise ValidationError(f"expected {self.K - 1} thresholds, got {z.size}")
        if np.any(~np.isfinite(z)) or np.any(z <= 0):
            raise ValidationError("thresholds must be finite and positive")
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}")
        z.setflags(write=False)
        object.__setattr__(self, "thresholds", z)

    def __eq__(self, other):
        if not isinstance(other, CriticalValues):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None

    def to_dict(self) -> dict:
        doc = {
            "p": self.p, "r": self.r, "alpha": self.alpha, "u": self.u, "K": self.K,
            "method": self.method, "seed": self.seed, "replicates": self.replicates,
            "thresholds": [float(v) for v in self.thresholds],
        }
        if self.mu is not None:
            doc["mu"] = self.mu
        doc.update(self.extra)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "CriticalValues":
        try:
            known = {k: doc[k] for k in ("thresholds", "p", "r", "alpha", "u", "K", "method")}
        except KeyError as exc:
            raise ValidationError(f"critical-value document lacks field {exc.args[0]!r}") from None
        extra = {k: v for k, v in doc.items()
                 if k not in known and k not in ("seed", "replicates", "mu")}
        return cls(np.asarray(known.pop("thresholds"), dtype=float), int(known.pop("p")),
                   seed=int(doc.get("seed", 0)), replicates=int(doc.get("replicates", 0)),
                   mu=doc.get("mu"), extra=extra, **known)


def _check_common(p, r, alpha, u, K):
    if p < 1:
        raise ValidationError("p must be >= 1")
    if r <= 0:
        raise ValidationError("r must be positive")
    if not 0 < alpha <= 1:
        raise ValidationError(f"alpha must lie in (0, 1], got {alpha}")
    if u <= 1:
        raise ValidationError(f"u must exceed 1, got {u}")
    if K < 2:
        raise ValidationError("K must be >= 2")


def theoretical_cv(p: int, r: float, alpha: float, u: float, K: int,
                   mu: float = 0.1) -> CriticalValues:
    """Closed-form thresholds, affine and strictly decreasing in ``k``."""
    _check_common(p, r, alpha, u, K)
    if not 0 < mu < 0.25:
        raise InvalidMu(f"mu must lie in (0, 1/4), got {mu}")
    k = np.arange(1, K)
    const = (log(K / alpha) - 0.25 * p * log(1 - 4 * mu)
             - log(1 - u ** (-r)) + cbar(p, r))
    z = 4.0 / mu * (r * (K - k) * log(u) + const)
    return CriticalValues(z, p, r, alpha, u, K, "theoretical", mu=mu)


def scale_risks(thetas, infos, k_hat, r: float) -> np.ndarray:
    """Per-replicate ``|(theta_k - theta_hat_k)' B_k (...)|^r``, shape ``(R, K)``."""
    thetas = np.asarray(thetas, dtype=float)
    R, K, _ = thetas.shape
    out = np.zeros((R, K))
    idx = np.arange(R)
    for k in range(1, K):
        sel = np.minimum(k + 1, k_hat) - 1
        d = thetas[:, k] - thetas[idx, sel]
        q = np.maximum(np.einsum("ri,ij,rj->r", d, infos[k], d), 0.0)
        out[:, k] = q ** r
    return out


@dataclass(frozen=True)
class PropagationCheck:
    risk: np.ndarray
    se: np.ndarray
    bound: float

    @property
    def slack(self) -> np.ndarray:
        return self.risk - self.bound

    def passed(self, n_se: float = 2.0) -> bool:
        return bool(np.all(self.risk[1:] <= self.bound + n_se * self.se[1:]))


def propagation_check(thetas, infos, z, r: float, alpha: float) -> PropagationCheck:
    """Empirical propagation risks at every scale (entry 0 is the trivial ``k = 1``)."""
    thetas = np.asarray(thetas)
    p = thetas.shape[2]
    T = batch_statistics(thetas, infos)
    k_hat = batch_select(T, z)
    mean, se = batch_means(scale_risks(thetas, infos, k_hat, r))
    return PropagationCheck(mean, se, alpha * risk_constant(p, r))


def pairwise_losses(thetas, infos, r: float) -> np.ndarray:
    """``L[:, k, j] = |(theta_k - theta_j)' B_k (theta_k - theta_j)|^r`` for ``j <= k``."""
    thetas = np.asarray(thetas, dtype=float)
    R, K, _ = thetas.shape
    L = np.zeros((R, K, K))
    for k in range(1, K):
        d = thetas[:, k:k + 1, :] - thetas[:, :k, :]
        L[:, k, :k] = np.maximum(np.einsum("rji,ik,rjk->rj", d, infos[k], d), 0.0) ** r
    return L


def _calibrate_ensemble(thetas, infos, r: float, alpha: float) -> np.ndarray:
    """Sequential bisection on a cached ensemble ``(R, K, p)``.

    At step ``l`` the thresholds ``z_1..z_{l-1}`` are fixed, ``z_{l+1..}`` are
    infinite and ``z_l`` is the smallest value for which every risk
    ``R_k, k > l`` stays within ``alpha C(p, r) l / (K - 1)``.
    """
    thetas = np.asarray(thetas)
    R, K, p = thetas.shape
    C = risk_constant(p, r)
    T = batch_statistics(thetas, infos)
    L = pairwise_losses(thetas, infos, r)
    z = np.full(K - 1, np.inf)
    k_hat = np.full(R, K)
    idx = np.arange(R)
    cols = np.arange(K)
    for l in range(1, K):
        budget = alpha * C * l / (K - 1)
        row = T[:, l - 1, :]

        def select(zl):
            # first column m > l (0-based) where row l rejects caps k_hat at m
            bad = row[:, l:] > zl
            first = np.where(bad.any(axis=1), l + np.argmax(bad, axis=1), K)
            return np.minimum(k_hat, first)

        def risk(zl):
            kh = select(zl)
            sel = np.minimum(cols[None, l:], kh[:, None] - 1)
            return (L[idx[:, None], cols[None, l:], sel].mean(axis=0)).max()

        hi = float(np.nanmax(row[:, l:], initial=0.0))
        if risk(hi) > budget:
            raise CalibrationDiverged(
                f"step {l}: risk {risk(hi):.4g} from earlier thresholds already exceeds "
                f"the budget {budget:.4g}")
        lo = 0.0
        if risk(lo) <= budget:
            hi = lo
        else:
            r_lo, r_hi = risk(lo), risk(hi)
            for _ in range(MAX_BISECTION):
                if r_lo - r_hi <= BRACKET_RTOL * budget:
                    break
                mid = 0.5 * (lo + hi)
                r_mid = risk(mid)
                if r_mid <= budget:
                    hi, r_hi = mid, r_mid
                else:
                    lo, r_lo = mid, r_mid
        z[l - 1] = hi
        k_hat = select(hi)
    return z


def calibrate_mc(model: LocalModel, r: float, alpha: float, replicates: int,
                 seed: int, u: float | None = None) -> CriticalValues:
    """Monte Carlo thresholds from the propagation conditions.

    The ensemble is simulated once with ``Y = Sigma^{1/2} eps`` under the model
    variances and reused for every bisection step (common random numbers).
    ``z_l`` is the smallest threshold found by bisection for which the risk at
    scale ``l + 1`` stays within ``alpha * C(p, r) * l / (K - 1)``, with
    ``z_1..z_{l-1}`` fixed and the later thresholds infinite.
    """
    K, p = model.K, model.p
    u = model.ladder.u if u is None else u
    _check_common(p, r, alpha, u, K)
    if replicates < 1:
        raise ValidationError("replicates must be >= 1")
    thetas = model.simulate(replicates, seed, true_noise=False)
    infos = [model.info_matrix(k) for k in range(1, K + 1)]
    z = _calibrate_ensemble(thetas, infos, r, alpha)
    # a zero threshold means any disagreement rejects; keep thresholds positive
    z = np.maximum(z, np.finfo(float).tiny)
    return CriticalValues(z, p, r, alpha, u, K, "monte-carlo", seed=seed,
                          replicates=replicates,
                          extra={"budget_split": "uniform-cumulative"})
