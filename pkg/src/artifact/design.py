"""Design grids, localizing kernels and nested bandwidth ladders."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientSupport, InvalidLadder, SingularMatrix, ValidationError

KERNELS = ("rectangular", "triangular", "epanechnikov")

# relative slack on the geometric-growth check of a ladder
_LADDER_RTOL = 1e-12


@dataclass(frozen=True)
class DesignGrid:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).ravel()
        if pts.size == 0:
            raise ValidationError("design grid is empty")
        if not np.all(np.isfinite(pts)) or pts.min() < 0.0 or pts.max() > 1.0:
            raise ValidationError("design points must lie in [0, 1]")
        if np.any(np.diff(pts) < 0):
            raise ValidationError("design points must be nondecreasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.size

    @classmethod
    def equidistant(cls, n: int) -> "DesignGrid":
        """Regular grid ``X_i = i/n``, ``i = 1..n`` (``n = 1`` gives ``{1}``)."""
        if n < 1:
            raise ValidationError("n must be positive")
        return cls(np.arange(1, n + 1) / n)


@dataclass(frozen=True)
class Kernel:
    """Localizing function on [-1, 1] normalized so that ``w(0) = 1``.

    The window is closed: ``|u| = 1`` is evaluated by the formula, which gives
    1 for the rectangular kernel and 0 for the other two.
    """

    shape: str = "rectangular"

    def __post_init__(self):
        if self.shape not in KERNELS:
            raise ValidationError(f"unknown kernel {self.shape!r}; choose from {KERNELS}")

    def __call__(self, u):
        a = np.abs(np.asarray(u, dtype=float))
        inside = a <= 1.0
        if self.shape == "rectangular":
            w = np.ones_like(a)
        elif self.shape == "triangular":
            w = 1.0 - a
        else:
            w = 1.0 - a * a
        return np.where(inside, np.clip(w, 0.0, 1.0), 0.0)

    @property
    def is_binary(self) -> bool:
        return self.shape == "rectangular"


@dataclass(frozen=True)
class BandwidthLadder:
    bandwidths: np.ndarray
    u: float

    def __post_init__(self):
        h = np.asarray(self.bandwidths, dtype=float)
        if self.u <= 1.0:
            raise InvalidLadder(f"growth factor u must exceed 1, got {self.u}")
        if h.size < 2 or np.any(np.diff(h) <= 0):
            raise InvalidLadder("bandwidths must be strictly increasing, K >= 2")
        ratio = h[1:] / h[:-1]
        if np.any(np.abs(ratio - self.u) > _LADDER_RTOL * self.u):
            raise InvalidLadder("bandwidths must grow geometrically with ratio u")
        h.setflags(write=False)
        object.__setattr__(self, "bandwidths", h)

    @property
    def K(self) -> int:
        return self.bandwidths.size

    @classmethod
    def geometric(cls, h1: float, u: float, K: int) -> "BandwidthLadder":
        if u <= 1.0:
            raise InvalidLadder(f"growth factor u must exceed 1, got {u}")
        if K < 2:
            raise InvalidLadder(f"need at least two scales, got K={K}")
        return cls(h1 * u ** np.arange(K), u)


@dataclass(frozen=True)
class LocalizationLadder:
    """Weights ``w[k, i]`` of scale ``k`` (0-based) at design point ``i``."""

    grid: DesignGrid
    x: float
    kernel: Kernel
    bandwidths: BandwidthLadder
    weights: np.ndarray = field(repr=False)

    @property
    def K(self) -> int:
        return self.weights.shape[0]

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def u(self) -> float:
        return self.bandwidths.u

    def support(self, k: int) -> np.ndarray:
        """Indices of design points with positive weight at scale ``k``."""
        return np.flatnonzero(self.weights[k] > 0)

    @property
    def w_max(self) -> float:
        return float(self.weights.max())

    def check_invariants(self) -> None:
        w = self.weights
        if np.any(w < 0) or np.any(w > 1):
            raise AssertionError("weights outside [0, 1]")
        if np.any(np.diff(w, axis=0) < 0):
            raise AssertionError("ordering condition violated")
        dist = np.abs(self.grid.points - self.x)
        outside = dist[None, :] > self.bandwidths.bandwidths[:, None]
        if np.any(w[outside] != 0):
            raise AssertionError("positive weight outside the window")


def build_ladder(grid: DesignGrid, x: float, kernel: Kernel | str, h1: float,
                 u: float, K: int, p: int = 1) -> LocalizationLadder:
    """Nested kernel weights ``w_{k,i} = W((X_i - x)/h_k)``, ``h_k = h1 u^(k-1)``.

    Raises ``InsufficientSupport`` when the smallest window holds fewer than
    ``p`` points with positive weight.
    """
    if isinstance(kernel, str):
        kernel = Kernel(kernel)
    if u <= 1.0:
        raise InvalidLadder(f"growth factor u must exceed 1, got {u}")
    if K < 2:
        raise InvalidLadder(f"need at least two scales, got K={K}")
    if not 0.0 <= x <= 1.0:
        raise ValidationError(f"reference point x={x} outside [0, 1]")
    if h1 < 1.0 / (2 * grid.n):
        raise InvalidLadder(f"h1={h1} below the resolution 1/(2n)={1 / (2 * grid.n)}")
    ladder = BandwidthLadder.geometric(h1, u, K)
    if ladder.bandwidths[-1] > 1.0 + 1e-12:
        raise InvalidLadder(f"largest bandwidth {ladder.bandwidths[-1]:.6g} exceeds 1")
    diff = grid.points - x
    weights = np.vstack([kernel(diff / h) for h in ladder.bandwidths])
    if np.count_nonzero(weights[0] > 0) < p:
        raise InsufficientSupport(
            f"smallest window (h1={h1}) contains {np.count_nonzero(weights[0] > 0)} "
            f"weighted points, need at least p={p}")
    weights.setflags(write=False)
    return LocalizationLadder(grid, float(x), kernel, ladder, weights)


def _inv_sqrt_spd(B):
    vals, vecs = np.linalg.eigh(B)
    if vals[0] <= 0:
        raise SingularMatrix("matrix is not positive definite")
    return (vecs / np.sqrt(vals)) @ vecs.T


def growth_bounds(Bks) -> tuple[float, float]:
    """Extreme eigenvalues of ``B_{k-1}^{-1/2} B_k B_{k-1}^{-1/2}`` over all k."""
    lo, hi = np.inf, -np.inf
    mats = [np.atleast_2d(np.asarray(B, dtype=float)) for B in Bks]
    for prev, cur in zip(mats[:-1], mats[1:]):
        if prev.shape != cur.shape:
            raise ValidationError("information matrices differ in dimension")
        R = _inv_sqrt_spd(prev)
        vals = np.linalg.eigvalsh(R @ cur @ R)
        lo, hi = min(lo, vals[0]), max(hi, vals[-1])
    for B in mats[-1:]:
        if np.linalg.eigvalsh(B)[0] <= 0:
            raise SingularMatrix("matrix is not positive definite")
    return float(lo), float(hi)


def verify_assumption_B(Bks, u0: float, u: float, rtol: float = 1e-9) -> bool:
    """True iff every consecutive growth eigenvalue lies in ``[u0, u]``."""
    lo, hi = growth_bounds(Bks)
    return bool(lo >= u0 * (1 - rtol) and hi <= u * (1 + rtol))
