"""Marginal eigenvalue sequences ``lambda_i^2`` of Karhunen-Loeve expansions.

Every catalog field is described by a base sequence ``b(i)``, ``i = 1, 2, ...``
repeated ``mult`` times (the centered bridge has a double spectrum), an
analytic trace and, for geometric decay, a lattice span.  Sequences are kept
in the squared domain throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil, log
from typing import Callable

import mpmath as mp
import numpy as np

from ..errors import UnknownField, ValidationError

# default and maximal materialized lengths
DEFAULT_TAIL_RTOL = 1e-8
MAX_LENGTH = 1 << 20


@dataclass(frozen=True)
class FieldSpec:
    name: str
    base: Callable  # vectorized numpy formula b(i), i >= 1
    base_mp: Callable  # the same formula for mpmath arguments
    trace: float
    mult: int = 1
    span: float | None = None
    power: float | None = None  # b(i) ~ c i^{-power}; None for geometric decay


def _geometric(rho: float) -> FieldSpec:
    if not 0 < rho < 1:
        raise ValidationError(f"geometric ratio must lie in (0, 1), got {rho}")
    return FieldSpec(f"geometric({rho:g})", lambda i: rho ** (2.0 * (i - 1)),
                     lambda i: mp.mpf(rho) ** (2 * (i - 1)), 1.0 / (1.0 - rho * rho),
                     span=-log(rho))


def _pycke(mu: float) -> FieldSpec:
    if mu <= 0:
        raise ValidationError(f"pycke parameter must be positive, got {mu}")
    return FieldSpec(f"pycke({mu:g})", lambda i: mu / ((mu + i - 1.0) * (mu + i)),
                     lambda i: mp.mpf(mu) / ((mu + i - 1) * (mu + i)), 1.0, power=2.0)


_PI = np.pi
_FIXED = {
    "brownian-sheet": FieldSpec("brownian-sheet", lambda i: (_PI * (i - 0.5)) ** -2.0,
                                lambda i: (mp.pi * (i - mp.mpf(1) / 2)) ** -2, 0.5, power=2.0),
    "brownian-bridge": FieldSpec("brownian-bridge", lambda i: (_PI * i) ** -2.0,
                                 lambda i: (mp.pi * i) ** -2, 1.0 / 6.0, power=2.0),
    "centered-wiener": FieldSpec("centered-wiener", lambda i: (_PI * i) ** -2.0,
                                 lambda i: (mp.pi * i) ** -2, 1.0 / 6.0, power=2.0),
    "centered-bridge": FieldSpec("centered-bridge", lambda i: (2 * _PI * i) ** -2.0,
                                 lambda i: (2 * mp.pi * i) ** -2, 1.0 / 12.0, mult=2, power=2.0),
    "centered-integrated-bridge": FieldSpec("centered-integrated-bridge",
                                            lambda i: (_PI * i) ** -4.0,
                                            lambda i: (mp.pi * i) ** -4, 1.0 / 90.0, power=4.0),
    "anderson-darling": FieldSpec("anderson-darling", lambda i: 1.0 / (i * (i + 1.0)),
                                  lambda i: mp.mpf(1) / (i * (i + 1)), 1.0, power=2.0),
}
_ALIASES = {"brownian-pillow": "brownian-bridge", "pillow": "brownian-bridge",
            "hbkr": "brownian-bridge", "watson": "centered-bridge"}

FIELDS = tuple(_FIXED) + ("pycke", "geometric")


def field_spec(name: str, **params) -> FieldSpec:
    key = _ALIASES.get(name, name)
    if key in _FIXED:
        return _FIXED[key]
    if key == "geometric":
        return _geometric(float(params.get("rho", 0.5)))
    if key == "pycke":
        return _pycke(float(params.get("mu", 1.0)))
    raise UnknownField(f"unknown field {name!r}; choose from {FIELDS}")


@dataclass(frozen=True)
class EigenSequence:
    """Nonincreasing ``lambda_i^2`` materialized to length ``m``.

    ``trace`` is the full trace (analytic for catalogs, the finite sum for
    user sequences) and ``tail = trace - sum(values)`` is what lies beyond ``m``.
    """

    values: np.ndarray
    trace: float
    name: str = "custom"
    span: float | None = None
    spec: FieldSpec | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0 or np.any(~np.isfinite(v)) or np.any(v <= 0):
            raise ValidationError("eigenvalues must be finite and strictly positive")
        if np.any(np.diff(v) > 0):
            raise ValidationError("eigenvalues must be nonincreasing")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def finite(cls, values, name: str = "custom") -> "EigenSequence":
        """A finite spectrum; its trace is the exact sum and there is no tail."""
        v = np.sort(np.asarray(values, dtype=float).ravel())[::-1]
        return cls(v, float(np.sum(v)), name)

    @property
    def m(self) -> int:
        return self.values.size

    @property
    def head_sum(self) -> float:
        return float(np.sum(self.values))

    @property
    def tail(self) -> float:
        if self.spec is None:
            return 0.0
        return float(self.spec_tail(lambda s: s))

    @property
    def is_infinite(self) -> bool:
        return self.spec is not None

    def extended(self, m: int) -> "EigenSequence":
        """The same catalog sequence materialized to length ``m``."""
        if self.spec is None or m <= self.m:
            return self
        return EigenSequence(_materialize(self.spec, m), self.trace, self.name, self.span, self.spec)

    def spec_tail(self, g) -> mp.mpf:
        """``sum_{j > m} g(lambda_j^2)`` for the catalog formula, by mpmath summation."""
        spec = self.spec
        m, r = self.m, spec.mult
        total = mp.mpf(0)
        first = m // r + 1
        if m % r:
            # the partner of the last materialized value of a repeated pair
            total += g(spec.base_mp(first))
            first += 1
        if spec.power is None:
            # geometric decay: the tail below double precision is negligible
            terms = [g(spec.base_mp(i)) for i in range(first, first + 200)]
            return total + r * mp.fsum(terms)
        return total + r * mp.nsum(lambda i: g(spec.base_mp(i)), [first, mp.inf],
                                   method="euler-maclaurin")


def _materialize(spec: FieldSpec, m: int) -> np.ndarray:
    n_base = -(-m // spec.mult)
    b = spec.base(np.arange(1, n_base + 1, dtype=float))
    return np.repeat(b, spec.mult)[:m]


def default_length(spec: FieldSpec, rtol: float = DEFAULT_TAIL_RTOL) -> int:
    """Smallest ``m`` with relative tail below ``rtol`` (capped at ``MAX_LENGTH``).

    Power-law tails are bounded by integral comparison, ``sum_{i>m} c i^-a <= c m^(1-a)/(a-1)``;
    geometric tails are summed exactly.
    """
    if spec.power is None:
        rho2 = spec.base(2.0) / spec.base(1.0)
        m = int(ceil(log(rtol * (1 - rho2)) / log(rho2))) + 1
        return max(m, 2)
    a = spec.power
    # constant c from the first term's asymptotic form b(i) i^a
    c = float(spec.base(1e6) * 1e6 ** a) * spec.mult
    m = ceil((c / ((a - 1) * rtol * spec.trace)) ** (1 / (a - 1)))
    return int(min(max(m, 2), MAX_LENGTH))


def catalog(name: str, m: int | None = None, **params) -> EigenSequence:
    """Catalog sequence truncated to ``m`` terms (default: relative tail ``<= 1e-8``, capped)."""
    spec = field_spec(name, **params)
    if m is None:
        m = default_length(spec)
    if m < 2:
        raise ValidationError("truncation length m must be >= 2")
    return EigenSequence(_materialize(spec, m), spec.trace, spec.name, spec.span, spec)


def detect_lattice(values, terms: int = 50, max_mult: int = 1000, tol: float = 1e-9):
    """Span ``h`` if ``-log lambda_i`` lie on ``a + h Z`` (within ``tol``), else ``None``.

    ``values`` are squared eigenvalues.  The candidate span is the smallest
    positive difference divided by an integer; the largest admissible span is
    returned.
    """
    u = -0.5 * np.log(np.asarray(values, dtype=float)[:terms])
    diffs = u - u[0]
    pos = diffs[diffs > tol]
    if pos.size == 0:
        return None
    base = pos.min()
    for k in range(1, max_mult + 1):
        g = base / k
        resid = np.abs(diffs - np.round(diffs / g) * g)
        if np.all(resid <= tol * np.maximum(1.0, np.abs(diffs))):
            return float(g)
    return None
