"""Local polynomial quasi-likelihood fits at each scale of a ladder.

All estimators here are linear in the response: ``theta_k = D_k @ Y`` with
``D_k = B_k^{-1} Psi W_k``.  :class:`LocalModel` caches ``B_k`` and ``D_k`` so
that Monte Carlo code can push many responses through at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import factorial

import numpy as np
from scipy import linalg

from .design import LocalizationLadder
from .errors import DimensionMismatch, SingularInformation, ValidationError

# eigenvalue ratio below which the (unit-diagonal scaled) information matrix is singular
SINGULAR_RTOL = 1e-12


@dataclass(frozen=True)
class PolynomialBasis:
    """Columns ``Psi(u) = (1, u, u^2/2!, ..., u^(p-1)/(p-1)!)``."""

    p: int

    def __post_init__(self):
        if self.p < 1:
            raise ValidationError("basis dimension p must be >= 1")

    @property
    def degree(self) -> int:
        return self.p - 1

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.stack([u ** j / factorial(j) for j in range(self.p)])


@dataclass(frozen=True)
class NoiseModel:
    """Model variances ``sigma2`` and true variances ``sigma2_true``.

    ``delta`` is the declared misspecification level; the constructor checks
    ``1 - delta <= sigma2_true / sigma2 <= 1 + delta`` pointwise.
    """

    sigma2: np.ndarray
    sigma2_true: np.ndarray
    delta: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.sigma2, dtype=float).ravel()
        s0 = np.asarray(self.sigma2_true, dtype=float).ravel()
        if s.shape != s0.shape:
            raise DimensionMismatch("model and true variances differ in length")
        if np.any(s <= 0) or np.any(s0 <= 0):
            raise ValidationError("variances must be positive")
        if not 0.0 <= self.delta < 1.0:
            raise ValidationError(f"delta must lie in [0, 1), got {self.delta}")
        ratio = s0 / s
        slack = 1e-12
        if np.any(ratio < 1 - self.delta - slack) or np.any(ratio > 1 + self.delta + slack):
            raise ValidationError(
                f"variance ratio range [{ratio.min():.6g}, {ratio.max():.6g}] "
                f"violates the declared delta={self.delta}")
        for a in (s, s0):
            a.setflags(write=False)
        object.__setattr__(self, "sigma2", s)
        object.__setattr__(self, "sigma2_true", s0)

    @classmethod
    def homoscedastic(cls, n: int, sigma: float, sigma_true: float | None = None) -> "NoiseModel":
        sigma_true = sigma if sigma_true is None else sigma_true
        ratio = sigma_true ** 2 / sigma ** 2
        return cls(np.full(n, sigma ** 2), np.full(n, sigma_true ** 2), abs(ratio - 1.0))

    @classmethod
    def misspecified(cls, sigma2, ratios) -> "NoiseModel":
        """True variances ``ratios * sigma2`` with delta read off the ratios."""
        sigma2 = np.asarray(sigma2, dtype=float)
        ratios = np.asarray(ratios, dtype=float)
        return cls(sigma2, sigma2 * ratios, float(np.max(np.abs(ratios - 1.0))))

    @property
    def n(self) -> int:
        return self.sigma2.size

    @property
    def is_homogeneous(self) -> bool:
        return bool(np.ptp(self.sigma2) == 0 and np.ptp(self.sigma2_true) == 0)

    @property
    def sigma_max2(self) -> float:
        return float(self.sigma2.max())


@dataclass(frozen=True)
class ScaleEstimate:
    theta: np.ndarray
    info: np.ndarray
    k: int

    @property
    def p(self) -> int:
        return self.theta.size


def _check_spd(B: np.ndarray) -> None:
    d = np.diag(B)
    if np.any(d <= 0):
        raise SingularInformation("information matrix has a zero diagonal entry")
    s = 1.0 / np.sqrt(d)
    vals = np.linalg.eigvalsh(B * s[:, None] * s[None, :])
    if vals[0] <= SINGULAR_RTOL * vals[-1]:
        raise SingularInformation(
            f"information matrix is numerically singular (scaled eigenvalues "
            f"{vals[0]:.3g} .. {vals[-1]:.3g})")


def spd_solve(B: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``B X = rhs`` by a Jacobi-scaled Cholesky factorization."""
    s = 1.0 / np.sqrt(np.diag(B))
    c = linalg.cho_factor(B * s[:, None] * s[None, :], lower=True)
    rhs = np.asarray(rhs, dtype=float)
    scaled = rhs * (s[:, None] if rhs.ndim == 2 else s)
    out = linalg.cho_solve(c, scaled)
    return out * (s[:, None] if rhs.ndim == 2 else s)


def sqrtm_spd(A: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(A)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


class LocalModel:
    """Scale-indexed local fits for one ladder, basis and noise model.

    Scale indices are 1-based in the public methods, matching ``k = 1..K``.
    """

    def __init__(self, ladder: LocalizationLadder, basis: PolynomialBasis | int,
                 noise: NoiseModel):
        if isinstance(basis, int):
            basis = PolynomialBasis(basis)
        if noise.n != ladder.n:
            raise DimensionMismatch(f"noise model has {noise.n} entries, grid has {ladder.n}")
        self.ladder = ladder
        self.basis = basis
        self.noise = noise
        self._B: dict[int, np.ndarray] = {}
        self._D: dict[int, np.ndarray] = {}

    @property
    def K(self) -> int:
        return self.ladder.K

    @property
    def p(self) -> int:
        return self.basis.p

    @property
    def n(self) -> int:
        return self.ladder.n

    @cached_property
    def Psi(self) -> np.ndarray:
        """The ``p x n`` design matrix centered at the reference point."""
        return self.basis(self.ladder.grid.points - self.ladder.x)

    def _check_k(self, k: int) -> None:
        if not 1 <= k <= self.K:
            raise ValidationError(f"scale index k={k} outside 1..{self.K}")

    def weights(self, k: int) -> np.ndarray:
        """Diagonal of ``W_k = diag(w_{k,i} / sigma_i^2)``."""
        self._check_k(k)
        return self.ladder.weights[k - 1] / self.noise.sigma2

    def info_matrix(self, k: int) -> np.ndarray:
        if k not in self._B:
            wk = self.weights(k)
            B = (self.Psi * wk) @ self.Psi.T
            B = 0.5 * (B + B.T)
            _check_spd(B)
            B.setflags(write=False)
            self._B[k] = B
        return self._B[k]

    def estimator_matrix(self, k: int) -> np.ndarray:
        """``D_k = B_k^{-1} Psi W_k`` (``p x n``)."""
        if k not in self._D:
            D = spd_solve(self.info_matrix(k), self.Psi * self.weights(k))
            D.setflags(write=False)
            self._D[k] = D
        return self._D[k]

    def qmle(self, k: int, Y) -> ScaleEstimate:
        Y = np.asarray(Y, dtype=float)
        if Y.shape != (self.n,):
            raise DimensionMismatch(f"response has shape {Y.shape}, expected ({self.n},)")
        theta = spd_solve(self.info_matrix(k), self.Psi @ (self.weights(k) * Y))
        return ScaleEstimate(theta, self.info_matrix(k), k)

    def all_estimates(self, Y) -> list[ScaleEstimate]:
        return [self.qmle(k, Y) for k in range(1, self.K + 1)]

    def lp_weights(self, k: int) -> np.ndarray:
        """Equivalent-kernel weights ``W*_{k,i} = e_1' B_k^{-1} Psi_i w_{k,i}/sigma_i^2``."""
        return self.estimator_matrix(k)[0].copy()

    def best_fit(self, k: int, f_values) -> np.ndarray:
        """Parameter of the best parametric fit, ``B_k^{-1} Psi W_k f``."""
        return self.estimator_matrix(k) @ np.asarray(f_values, dtype=float)

    def variance(self, k: int) -> np.ndarray:
        """Exact ``Var theta_k = D_k Sigma_0 D_k'`` under the true noise."""
        D = self.estimator_matrix(k)
        return (D * self.noise.sigma2_true) @ D.T

    def difference_variance(self, l: int, k: int) -> np.ndarray:
        """Exact ``Var(theta_k - theta_l)`` under the true noise."""
        D = self.estimator_matrix(k) - self.estimator_matrix(l)
        return (D * self.noise.sigma2_true) @ D.T

    def stacked_estimator(self, k: int | None = None) -> np.ndarray:
        """Rows of ``D_1, ..., D_k`` stacked into a ``(k p) x n`` matrix."""
        k = self.K if k is None else k
        return np.vstack([self.estimator_matrix(j) for j in range(1, k + 1)])

    def simulate(self, replicates: int, seed: int, f_values=None,
                 true_noise: bool = True) -> np.ndarray:
        """Estimates at every scale for simulated responses, shape ``(R, K, p)``.

        Responses are ``f + Sigma^{1/2} eps`` with ``Sigma`` the true (default)
        or the model variances; ``f = 0`` when ``f_values`` is omitted.
        """
        from .mc import normal_blocks

        D = self.stacked_estimator()
        sd = np.sqrt(self.noise.sigma2_true if true_noise else self.noise.sigma2)
        mean = np.zeros(D.shape[0]) if f_values is None else D @ np.asarray(f_values, dtype=float)
        out = np.empty((replicates, self.K, self.p))
        for start, eps in normal_blocks(seed, replicates, self.n):
            block = (eps * sd) @ D.T + mean
            out[start:start + len(eps)] = block.reshape(len(eps), self.K, self.p)
        return out

    def log_likelihood(self, k: int, Y, theta) -> float:
        """Local quasi-log-likelihood without the theta-free constant."""
        r = np.asarray(Y, dtype=float) - self.Psi.T @ np.asarray(theta, dtype=float)
        return -0.5 * float(np.sum(r * r * self.weights(k)))


def info_matrix(ladder, basis, noise, k):
    return LocalModel(ladder, basis, noise).info_matrix(k)


def qmle(ladder, basis, noise, k, Y) -> ScaleEstimate:
    return LocalModel(ladder, basis, noise).qmle(k, Y)


def lp_weights(ladder, basis, noise, k) -> np.ndarray:
    return LocalModel(ladder, basis, noise).lp_weights(k)


def fll_quadratic(est: ScaleEstimate, theta) -> float:
    """Fitted log-likelihood ratio ``(theta_k - theta)' B_k (theta_k - theta)``."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != est.theta.shape:
        raise DimensionMismatch(f"theta has shape {theta.shape}, expected {est.theta.shape}")
    d = est.theta - theta
    return float(max(d @ est.info @ d, 0.0))


def derivative_estimates(est: ScaleEstimate, basis: PolynomialBasis | None = None) -> np.ndarray:
    """Estimates of ``f(x), f'(x), ..., f^(p-1)(x)``.

    With the factorial-scaled basis the j-th coordinate already estimates the
    (j-1)-th derivative, so this is the parameter vector itself.
    """
    if basis is not None and basis.p != est.p:
        raise DimensionMismatch("basis dimension does not match the estimate")
    return est.theta.copy()
