"""Simulation laboratory for the finite-sample identities of the adaptive procedure.

Exact quantities (Wilks spectrum, joint covariances, determinant formula,
modeling bias, Kullback-Leibler divergence) are computed from the linear
estimator matrices ``D_k``; Monte Carlo counterparts reuse
:meth:`LocalModel.simulate`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import log

import numpy as np

from .calibration import (CriticalValues, calibrate_mc, pairwise_losses,
                          risk_constant, theoretical_cv)
from .design import DesignGrid, build_ladder, growth_bounds
from .errors import (AssumptionViolated, SingularJointCovariance,
                     SMBViolatedAtFirstScale, UnknownScenario, ValidationError)
from .lepski import batch_select, batch_statistics
from .local_model import LocalModel, NoiseModel, PolynomialBasis, spd_solve, sqrtm_spd
from .mc import batch_means

# eigenvalue slack used for semidefinite comparisons
PSD_TOL = 1e-9


def best_parametric_fit(model: LocalModel, k: int, f_values) -> np.ndarray:
    """``theta_bar_k = B_k^{-1} Psi W_k f``."""
    return model.best_fit(k, f_values)


def wilks_matrix(model: LocalModel, k: int) -> np.ndarray:
    """Full ``n x n`` matrix ``S = Sigma_0^{1/2} W_k Psi' B_k^{-1} Psi W_k Sigma_0^{1/2}``."""
    s0 = np.sqrt(model.noise.sigma2_true)
    G = (model.Psi * (model.weights(k) * s0))
    return G.T @ spd_solve(model.info_matrix(k), G)


def wilks_spectrum(model: LocalModel, k: int) -> np.ndarray:
    """The ``p`` nonzero eigenvalues of ``S``, in decreasing order.

    They coincide with the eigenvalues of the ``p x p`` matrix
    ``B_k^{-1/2} Psi W_k Sigma_0 W_k Psi' B_k^{-1/2}``.
    """
    B = model.info_matrix(k)
    G = model.Psi * (model.weights(k) * np.sqrt(model.noise.sigma2_true))
    vals, vecs = np.linalg.eigh(B)
    R = (vecs / np.sqrt(vals)) @ vecs.T
    M = R @ (G @ G.T) @ R
    return np.sort(np.linalg.eigvalsh(0.5 * (M + M.T)))[::-1]


def weighted_chi2_moments(weights) -> tuple[float, float]:
    """Mean and variance of ``sum_j w_j eps_j^2``."""
    w = np.asarray(weights, dtype=float)
    return float(w.sum()), float(2 * np.sum(w * w))


def difference_bound(model: LocalModel, l: int, k: int, u0: float | None = None) -> tuple[float, float]:
    """Largest eigenvalue of ``V_lk^{1/2} B_l V_lk^{1/2}`` and its bound ``2(1+delta)(1+u0^{-(k-l)})``."""
    if u0 is None:
        u0, _ = growth_bounds([model.info_matrix(j) for j in range(1, model.K + 1)])
    V = model.difference_variance(l, k)
    Vh = sqrtm_spd(V)
    lam = float(np.linalg.eigvalsh(Vh @ model.info_matrix(l) @ Vh)[-1])
    return lam, 2 * (1 + model.noise.delta) * (1 + u0 ** (-(k - l)))


def componentwise_constant(model: LocalModel) -> float:
    """Measured ``Lambda_0 = min_k lambda_min(B_k) sigma_max^2 / (n h_k)``."""
    h = model.ladder.bandwidths.bandwidths
    return min(float(np.linalg.eigvalsh(model.info_matrix(k))[0]) * model.noise.sigma_max2
               / (model.n * h[k - 1]) for k in range(1, model.K + 1))


@dataclass(frozen=True)
class JointCovariance:
    k: int
    Sigma: np.ndarray
    Sigma0: np.ndarray

    def sandwich_gaps(self, delta: float) -> tuple[float, float]:
        """Smallest eigenvalues of ``Sigma0 - (1-delta) Sigma`` and ``(1+delta) Sigma - Sigma0``."""
        a = np.linalg.eigvalsh(self.Sigma0 - (1 - delta) * self.Sigma)[0]
        b = np.linalg.eigvalsh((1 + delta) * self.Sigma - self.Sigma0)[0]
        return float(a), float(b)


def joint_covariance(model: LocalModel, k: int) -> JointCovariance:
    """Blocks ``D_l Sigma D_m'`` (model) and ``D_l Sigma_0 D_m'`` (true), ``l, m <= k``."""
    D = model.stacked_estimator(k)
    S = (D * model.noise.sigma2) @ D.T
    S0 = (D * model.noise.sigma2_true) @ D.T
    return JointCovariance(k, 0.5 * (S + S.T), 0.5 * (S0 + S0.T))


def _logdet_spd(A: np.ndarray) -> float:
    s = 1.0 / np.sqrt(np.diag(A))
    vals = np.linalg.eigvalsh(A * s[:, None] * s[None, :])
    if np.any(~np.isfinite(s)) or vals[0] <= 1e-12 * vals[-1]:
        raise SingularJointCovariance("joint covariance is numerically singular")
    return float(np.sum(np.log(vals)) - 2 * np.sum(np.log(s)))


def det_block_formula(model: LocalModel, k: int) -> tuple[float, float]:
    """``det Sigma_k`` directly and via ``det B_k^{-1} prod_l det(B_{l-1}^{-1} - B_l^{-1})``.

    Requires binary weights; the differences ``B_{l-1}^{-1} - B_l^{-1}`` must be
    positive definite, i.e. the information grows strictly between scales.
    """
    if not model.ladder.kernel.is_binary:
        raise AssumptionViolated("the determinant formula needs a rectangular kernel")
    Bs = [model.info_matrix(j) for j in range(1, k + 1)]
    if k >= 2:
        lo, _ = growth_bounds(Bs)
        if lo <= 1 + 1e-12:
            raise AssumptionViolated(
                f"information does not grow strictly between scales (min growth {lo:.6g})")
    inv = [np.linalg.inv(B) for B in Bs]
    rhs = np.linalg.det(inv[-1])
    for l in range(1, k):
        rhs *= np.linalg.det(inv[l - 1] - inv[l])
    lhs = np.linalg.det(joint_covariance(model, k).Sigma)
    return float(lhs), float(rhs)


def _bias_vector(model, k, f_values, theta_ref):
    theta_ref = np.asarray(theta_ref, dtype=float)
    return np.concatenate([model.best_fit(j, f_values) - theta_ref for j in range(1, k + 1)])


def _solve_joint(S, b):
    _logdet_spd(S)
    return spd_solve(S, b)


def modeling_bias(model: LocalModel, k: int, f_values, theta_ref) -> float:
    """``Delta(k) = b(k)' Sigma_k^{-1} b(k)``."""
    b = _bias_vector(model, k, f_values, theta_ref)
    S = joint_covariance(model, k).Sigma
    return float(max(b @ _solve_joint(S, b), 0.0))


def kl_divergence(model: LocalModel, k: int, f_values, theta_ref) -> float:
    """``KL(N(vec Theta*_k, Sigma_k0) || N(vec Theta_k, Sigma_k))`` in closed form."""
    J = joint_covariance(model, k)
    b = _bias_vector(model, k, f_values, theta_ref)
    delta_k = float(b @ _solve_joint(J.Sigma, b))
    logdet = _logdet_spd(J.Sigma) - _logdet_spd(J.Sigma0)
    tr = float(np.trace(spd_solve(J.Sigma, J.Sigma0)))
    return 0.5 * (delta_k + logdet + tr - model.p * k)


def kl_homogeneous(p: int, k: int, sigma: float, sigma0: float, delta_k: float) -> float:
    """Homogeneous-noise form ``pk log(sigma/sigma0) + Delta/2 + (pk/2)(sigma0^2/sigma^2 - 1)``."""
    return p * k * log(sigma / sigma0) + 0.5 * delta_k + 0.5 * p * k * (sigma0 ** 2 / sigma ** 2 - 1)


def log_density_ratio(model: LocalModel, k: int, samples, f_values, theta_ref) -> np.ndarray:
    """``log Z_k`` evaluated at samples of ``vec(theta_1..theta_k)``, shape ``(R, pk)``."""
    J = joint_covariance(model, k)
    mean0 = np.concatenate([model.best_fit(j, f_values) for j in range(1, k + 1)])
    mean = np.tile(np.asarray(theta_ref, dtype=float), k)
    y = np.asarray(samples, dtype=float)

    def quad(S, c):
        d = y - c
        Lc = np.linalg.cholesky(S)
        w = np.linalg.solve(Lc, d.T)
        return np.sum(w * w, axis=0)

    half_logdet = 0.5 * (_logdet_spd(J.Sigma) - _logdet_spd(J.Sigma0))
    return half_logdet - 0.5 * quad(J.Sigma0, mean0) + 0.5 * quad(J.Sigma, mean)


def phi_delta(delta: float, homogeneous: bool) -> float:
    return 1.0 if homogeneous else 2 * (1 + delta) / (1 - delta) ** 2 - 1


# --- scenarios ---------------------------------------------------------------

def _kink(t, x0=0.6, slope=3.0):
    return slope * np.maximum(np.asarray(t, dtype=float) - x0, 0.0)


TRUTHS = {
    # name: (f, Taylor coefficients at x as a function of (x, p))
    "constant": (lambda t: np.ones_like(np.asarray(t, dtype=float)),
                 lambda x, p: np.eye(p)[0]),
    "parametric-linear": (lambda t: 1.0 + 2.0 * np.asarray(t, dtype=float),
                          lambda x, p: np.array([1.0 + 2.0 * x, 2.0, 0.0, 0.0][:p])),
    "sine": (lambda t: np.sin(2 * np.pi * np.asarray(t, dtype=float)),
             lambda x, p: np.array([(2 * np.pi) ** j * np.sin(2 * np.pi * x + j * np.pi / 2)
                                    for j in range(p)])),
    "kink": (_kink, lambda x, p: np.array([float(_kink(x)), 3.0 * (x > 0.6), 0.0, 0.0][:p])),
    # C^1 with Lipschitz derivative: Hoelder smoothness exactly 2
    "holder2": (lambda t: (np.asarray(t, dtype=float) - 0.5) * np.abs(np.asarray(t, dtype=float) - 0.5),
                lambda x, p: np.array([(x - 0.5) * abs(x - 0.5), 2 * abs(x - 0.5),
                                       2 * np.sign(x - 0.5), 0.0][:p])),
    "exp": (lambda t: np.exp(np.asarray(t, dtype=float)),
            lambda x, p: np.full(p, np.exp(x))),
}


@dataclass(frozen=True)
class SimulationScenario:
    name: str
    truth: str
    n: int = 200
    x: float = 0.5
    kernel: str = "rectangular"
    p: int = 2
    h1: float = 0.02
    u: float = 1.5
    K: int = 6
    sigma: float = 1.0
    delta: float = 0.0
    r: float = 1.0
    alpha: float = 1.0
    replicates: int = 20000
    seed: int = 1
    cv_method: str = "monte-carlo"
    cv_replicates: int = 20000
    mu: float = 0.1
    Delta: float = 1.0
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.truth not in TRUTHS:
            raise UnknownScenario(f"unknown truth {self.truth!r}; choose from {sorted(TRUTHS)}")
        if self.replicates < 1 or self.cv_replicates < 1:
            raise ValidationError("replicate counts must be >= 1")
        if not 0 <= self.delta < 1:
            raise ValidationError("delta must lie in [0, 1)")

    def f(self, t):
        return TRUTHS[self.truth][0](t)

    def theta_ref(self) -> np.ndarray:
        return np.asarray(TRUTHS[self.truth][1](self.x, self.p), dtype=float)

    def noise(self) -> NoiseModel:
        t = DesignGrid.equidistant(self.n).points
        sigma2 = np.full(self.n, self.sigma ** 2)
        if self.delta == 0:
            return NoiseModel(sigma2, sigma2, 0.0)
        # heteroscedastic true variances oscillating inside the (S) band
        return NoiseModel.misspecified(sigma2, 1 + self.delta * np.cos(14 * np.pi * t))

    def model(self) -> LocalModel:
        grid = DesignGrid.equidistant(self.n)
        ladder = build_ladder(grid, self.x, self.kernel, self.h1, self.u, self.K, self.p)
        return LocalModel(ladder, PolynomialBasis(self.p), self.noise())

    def critical_values(self, model: LocalModel | None = None) -> CriticalValues:
        if self.cv_method == "theoretical":
            return theoretical_cv(self.p, self.r, self.alpha, self.u, self.K, self.mu)
        model = self.model() if model is None else model
        return calibrate_mc(model, self.r, self.alpha, self.cv_replicates, self.seed + 7919)


SCENARIOS = {
    "parametric-linear": SimulationScenario("parametric-linear", "parametric-linear"),
    "constant": SimulationScenario("constant", "constant", p=1),
    "sine": SimulationScenario("sine", "sine", x=0.3),
    "kink": SimulationScenario("kink", "kink", n=400, h1=0.02, u=1.4, K=8, sigma=0.5),
    "heteroscedastic": SimulationScenario("heteroscedastic", "parametric-linear", delta=0.2),
}


def get_scenario(name: str, **overrides) -> SimulationScenario:
    if name not in SCENARIOS:
        raise UnknownScenario(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    return replace(SCENARIOS[name], **overrides)


# --- Monte Carlo checks ----------------------------------------------------------

def risk_curve(model: LocalModel, z, r: float, replicates: int, seed: int,
               theta=None, true_noise: bool = False):
    """Propagation risks at every scale under the parametric model ``Psi' theta``."""
    f = None if theta is None else model.Psi.T @ np.asarray(theta, dtype=float)
    thetas = model.simulate(replicates, seed, f, true_noise=true_noise)
    infos = [model.info_matrix(k) for k in range(1, model.K + 1)]
    k_hat = batch_select(batch_statistics(thetas, infos), z)
    L = pairwise_losses(thetas, infos, r)
    idx = np.arange(replicates)
    per = np.stack([L[idx, k, np.minimum(k + 1, k_hat) - 1] for k in range(model.K)], axis=1)
    return batch_means(per)


@dataclass
class OracleReport:
    Delta: np.ndarray
    oracle_index: int
    budget: float
    adaptive_risk: float
    oracle_risk: float
    lhs: float
    lhs_se: float
    lhs_full: float
    lhs_full_se: float
    bound: float
    z_term: float
    propagation_term: float
    unbounded: bool
    k_hat_counts: np.ndarray

    @property
    def passed(self) -> bool:
        return bool(self.unbounded or self.lhs - 2 * self.lhs_se <= self.bound)

    def to_dict(self) -> dict:
        return {
            "Delta": [float(v) for v in self.Delta], "oracle_index": self.oracle_index,
            "Delta_budget": self.budget, "adaptive_risk": self.adaptive_risk,
            "oracle_risk": self.oracle_risk, "lhs_r_half": self.lhs, "lhs_r_half_se": self.lhs_se,
            "lhs_r": self.lhs_full, "lhs_r_se": self.lhs_full_se, "bound": self.bound,
            "z_term": self.z_term, "propagation_term": self.propagation_term,
            "unbounded": self.unbounded, "passed": self.passed,
            "k_hat_counts": [int(c) for c in self.k_hat_counts],
        }


def oracle_report(scenario: SimulationScenario, cv: CriticalValues | None = None,
                  Delta_budget: float | None = None, model: LocalModel | None = None) -> OracleReport:
    """Oracle index, simulated adaptive-vs-oracle risk and the theoretical bound.

    The left side is evaluated at exponent ``r/2`` (the bound's exponent) and
    also at ``r``; only the ``r/2`` value is compared with the bound.
    """
    model = scenario.model() if model is None else model
    cv = scenario.critical_values(model) if cv is None else cv
    budget = scenario.Delta if Delta_budget is None else Delta_budget
    fv = scenario.f(model.ladder.grid.points)
    ref = scenario.theta_ref()
    K, p, r = model.K, model.p, scenario.r
    Delta = np.array([modeling_bias(model, k, fv, ref) for k in range(1, K + 1)])
    if Delta[0] > budget:
        raise SMBViolatedAtFirstScale(f"Delta(1)={Delta[0]:.6g} exceeds the budget {budget}")
    k_star = int(np.max(np.flatnonzero(Delta <= budget))) + 1

    thetas = model.simulate(scenario.replicates, scenario.seed, fv, true_noise=True)
    infos = [model.info_matrix(k) for k in range(1, K + 1)]
    k_hat = batch_select(batch_statistics(thetas, infos), cv.thresholds)
    idx = np.arange(len(k_hat))
    B = infos[k_star - 1]
    d = thetas[:, k_star - 1] - thetas[idx, k_hat - 1]
    q = np.maximum(np.einsum("ri,ij,rj->r", d, B, d), 0.0)
    lhs, lhs_se = batch_means(q ** (r / 2))
    lhs_full, lhs_full_se = batch_means(q ** r)

    def risk_vs_ref(th):
        e = th - ref
        return float(np.mean(np.maximum(np.einsum("ri,ij,rj->r", e, B, e), 0.0) ** (r / 2)))

    delta = model.noise.delta
    phi = phi_delta(delta, model.noise.is_homogeneous)
    with np.errstate(over="ignore"):
        prop = (np.sqrt(cv.alpha * risk_constant(p, r)) * (1 + delta) ** (p * k_star / 4)
                * (1 - delta) ** (-3 * p * k_star / 4) * np.exp(phi * budget / (2 * (1 - delta))))
    z_term = 0.0 if k_star == K else float(cv.thresholds[k_star - 1]) ** (r / 2)
    bound = z_term + float(prop)
    unbounded = not np.isfinite(bound) or prop > 1e12
    return OracleReport(Delta, k_star, budget, risk_vs_ref(thetas[idx, k_hat - 1]),
                        risk_vs_ref(thetas[:, k_star - 1]), float(lhs), float(lhs_se),
                        float(lhs_full), float(lhs_full_se), bound, z_term, float(prop),
                        bool(unbounded), np.bincount(k_hat, minlength=K + 1)[1:])


def invariant_checks(model: LocalModel, cv: CriticalValues | None = None,
                     replicates: int = 0, seed: int = 0) -> list[tuple[str, bool, str]]:
    """Exact invariant ledger for one configuration: ``(name, passed, detail)``."""
    out = []
    K, p, delta = model.K, model.p, model.noise.delta
    pts = model.ladder.grid.points - model.ladder.x
    worst = 0.0
    for k in range(1, K + 1):
        w = model.lp_weights(k)
        worst = max(worst, abs(w.sum() - 1), *(abs(np.sum(pts ** m * w)) for m in range(1, p)))
    out.append(("reproducing-polynomials", bool(worst <= 1e-9), f"max error {worst:.3g}"))
    lam = max(float(wilks_spectrum(model, k)[0]) for k in range(1, K + 1))
    out.append(("wilks-eigenvalue-bound", lam <= (1 + delta) * (1 + 1e-9), f"max eigenvalue {lam:.12g}"))
    worst = 0.0
    for k in range(1, K + 1):
        Bh = sqrtm_spd(model.info_matrix(k))
        worst = max(worst, float(np.linalg.eigvalsh(Bh @ model.variance(k) @ Bh)[-1]))
    out.append(("variance-bound", worst <= (1 + delta) * (1 + 1e-9), f"max eigenvalue {worst:.12g}"))
    u0, u1 = growth_bounds([model.info_matrix(k) for k in range(1, K + 1)])
    out.append(("growth-condition", u0 > 1, f"growth eigenvalues in [{u0:.6g}, {u1:.6g}]"))
    ok = True
    for l in range(1, K):
        for k in range(l + 1, K + 1):
            lam, bnd = difference_bound(model, l, k, u0)
            ok &= lam <= bnd * (1 + 1e-9)
    out.append(("difference-variance-bound", bool(ok), f"u0={u0:.6g}"))
    J = joint_covariance(model, K)
    a, b = J.sandwich_gaps(delta)
    out.append(("joint-covariance-sandwich", min(a, b) >= -PSD_TOL, f"gaps {a:.3g}, {b:.3g}"))
    if replicates and cv is not None:
        from .calibration import propagation_check
        thetas = model.simulate(replicates, seed, true_noise=False)
        infos = [model.info_matrix(k) for k in range(1, K + 1)]
        pc = propagation_check(thetas, infos, cv.thresholds, cv.r, cv.alpha)
        out.append(("propagation-conditions", pc.passed(2.0),
                    f"max risk {pc.risk.max():.4g} vs bound {pc.bound:.4g}"))
    return out


# --- rate experiment -----------------------------------------------------------

@dataclass
class RateResult:
    n: np.ndarray
    rmse: np.ndarray
    slope: float
    k_hat_mean: np.ndarray


def rate_ladder(n: int, p: int, u: float = 1.25, h_max: float = 0.5, c: float = 2.0):
    """Geometric ladder from ``h1 = c p / n`` up to at most ``h_max``."""
    h1 = max(c * p / n, 1.0 / (2 * n))
    K = int(np.floor(np.log(h_max / h1) / np.log(u) + 1e-9)) + 1
    return h1, max(K, 2)


def empirical_rate(truth: str, ns, sigma: float = 1.0, p: int = 2, x: float = 0.5,
                   replicates: int = 200, seed: int = 0, r: float = 0.5, alpha: float = 1.0,
                   cv_replicates: int = 2000, u: float = 1.25, noiseless: bool = False) -> RateResult:
    """Log-log slope of the adaptive estimator's root-MSE for ``f(x)`` against ``n``.

    Critical values are calibrated by Monte Carlo separately for every ``n``.
    """
    if truth not in TRUTHS:
        raise UnknownScenario(f"unknown truth {truth!r}")
    f, taylor = TRUTHS[truth]
    target = float(taylor(x, p)[0])
    rmse, kmean = [], []
    for i, n in enumerate(ns):
        h1, K = rate_ladder(n, p, u)
        grid = DesignGrid.equidistant(n)
        ladder = build_ladder(grid, x, "rectangular", h1, u, K, p)
        sig = 1e-12 if noiseless else sigma
        model = LocalModel(ladder, PolynomialBasis(p), NoiseModel.homoscedastic(n, sig))
        cv = calibrate_mc(model, r, alpha, cv_replicates, seed + 1000 + i)
        fv = f(grid.points)
        thetas = model.simulate(replicates, seed + i, fv, true_noise=True)
        infos = [model.info_matrix(k) for k in range(1, K + 1)]
        k_hat = batch_select(batch_statistics(thetas, infos), cv.thresholds)
        est = thetas[np.arange(replicates), k_hat - 1, 0]
        rmse.append(float(np.sqrt(np.mean((est - target) ** 2))))
        kmean.append(float(k_hat.mean()))
    ns = np.asarray(ns, dtype=float)
    rmse = np.asarray(rmse)
    slope = float(np.polyfit(np.log(ns), np.log(rmse), 1)[0])
    return RateResult(ns, rmse, slope, np.asarray(kmean))
