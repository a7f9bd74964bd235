"""Exact information complexity ``n(eps, d)`` by threshold search over the enumeration.

The search works with squared products ``v = lambda_k^2``.  ``zeta^2`` is the
largest attainable product value whose strictly smaller products carry at most
``eps^2 Lambda^d``; it is bracketed by galloping and bisection in ``log v`` and
certified by enumerating just above it.  Budget comparisons use the exact
budget: an absolute slack ``s`` would shift the count by up to ``s / zeta^2``,
which is large when ``d`` is.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from math import ceil, exp, log, sqrt

import numpy as np

from ..errors import BudgetExceeded, TruncationTooCoarse, ValidationError
from .asymptotics import asymptotic_n, moments, normal_quantile_q
from .catalog import MAX_LENGTH, EigenSequence
from .enumeration import enumerate_above, prefix_sums

DEFAULT_CAP = 10 ** 8
TIE_RTOL = 1e-12
MAX_ITER = 200
TRUNCATION_LIMIT = 1e-3


@dataclass
class ComplexityResult:
    field: str
    epsilon: float
    d: int
    n_exact: int | None
    zeta: float | None
    theta: float | None
    n_asymptotic: float | None
    log_n_asymptotic: float | None
    q: float | None
    K: float | None
    explosion: float | None
    relative_tail_error: float
    count_at_zeta: int | None = None
    lower: int | None = None
    upper: int | None = None
    m: int | None = None
    nodes: int = 0
    status: str = "exact"

    @property
    def ratio(self) -> float | None:
        if self.n_exact is None or not self.n_asymptotic:
            return None
        return self.n_exact / self.n_asymptotic

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["ratio"] = self.ratio
        return doc


class _Searcher:
    """Caches enumerations at fixed thresholds and grows catalog truncations on demand."""

    def __init__(self, seq: EigenSequence, d: int, cap: int):
        self.seq = seq
        self.d = d
        self.cap = cap
        self.s = np.ascontiguousarray(seq.values)
        self.P = prefix_sums(self.s)
        self.nodes = 0
        self.covered = True
        self.total = seq.trace ** d

    def _extend(self, threshold: float) -> bool:
        # smallest length whose next value times the top product lies below the threshold
        s1 = self.s[0]
        m = self.seq.m
        while m < MAX_LENGTH:
            m = min(2 * m, MAX_LENGTH)
            ext = self.seq.extended(m)
            if ext.values[-1] * s1 ** (self.d - 1) < threshold:
                break
        if m == self.seq.m:
            return False
        self.seq = ext
        self.s = np.ascontiguousarray(ext.values)
        self.P = prefix_sums(self.s)
        return True

    def run(self, threshold: float):
        while True:
            e = enumerate_above(self.s, self.d, threshold, self.cap, self.P)
            self.nodes += e.nodes
            if e.exceeded:
                return e
            if e.truncated and self.seq.is_infinite:
                if self._extend(threshold):
                    continue
                self.covered = False
            return e


def _tail_error(seq: EigenSequence, d: int, eps: float) -> float:
    head = seq.head_sum
    return (seq.trace ** d - min(head, seq.trace) ** d) / (eps * eps * seq.trace ** d)


def exact_count(seq: EigenSequence, epsilon: float, d: int, cap: int = DEFAULT_CAP,
                with_asymptotics: bool = True) -> ComplexityResult:
    """Minimal number of tensor-product terms with normalized error ``<= epsilon``.

    ``n_exact`` is the length of the shortest prefix of the decreasingly sorted
    products whose sum reaches ``(1 - eps^2) Lambda^d``.  ``count_at_zeta`` is
    the number of products ``>= zeta^2``; it exceeds ``n_exact`` only when
    several products tie at ``zeta^2``.
    """
    if not 0 < epsilon < 1:
        raise ValidationError(f"epsilon must lie in (0, 1), got {epsilon}")
    if d < 1:
        raise ValidationError(f"d must be a positive integer, got {d}")
    summ = moments(seq)
    S = _Searcher(seq, d, cap)
    total = S.total
    target = (1 - epsilon ** 2) * total
    cache = {}

    def enum(log_t):
        if log_t not in cache:
            cache[log_t] = S.run(exp(log_t))
        return cache[log_t]

    lo_count = None
    hi_count = None

    def ok(log_t):
        nonlocal lo_count, hi_count
        e = enum(log_t)
        if e.exceeded:
            raise BudgetExceeded(
                f"enumeration exceeded {cap} nodes at threshold {exp(log_t):.6g}",
                lower=(hi_count or 0) + 1, upper=lo_count)
        good = e.head >= target
        if good:
            lo_count = e.count if lo_count is None else min(lo_count, e.count)
        else:
            hi_count = e.count if hi_count is None else max(hi_count, e.count)
        return good

    s1 = S.s[0]
    top = d * log(s1)
    if summ.sigma > 0:
        q = normal_quantile_q(epsilon, summ.sigma)
        guess = -2 * (d * summ.M + sqrt(d) * q)
        step = max(1.0, 2 * summ.sigma * sqrt(d))
    else:
        guess, step = top, 1.0
    guess = min(guess, top)
    if ok(guess):
        lo = guess
        hi = min(lo + step, top + 1e-9)
        while ok(hi):
            lo = hi
            step *= 2
            hi = min(lo + step, top + 1e-9)
    else:
        hi = guess
        lo = hi - step
        while not ok(lo):
            hi = lo
            step *= 2
            lo = hi - step

    for _ in range(MAX_ITER):
        v = enum(lo).vmin
        above = log(v) + TIE_RTOL
        if not ok(above):
            break
        lo = above
        if lo >= hi:
            raise RuntimeError("threshold search lost its bracket")
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    else:
        raise RuntimeError("threshold search did not converge")

    e_ge = enum(lo)
    e_gt = enum(above)
    v = e_ge.vmin
    mult = e_ge.count - e_gt.count
    c = int(ceil((target - e_gt.head) / v))
    c = min(max(c, 1), mult)
    n_exact = e_gt.count + c
    rel_err = 0.0
    if not S.covered:
        rel_err = _tail_error(S.seq, d, epsilon)
        if rel_err > TRUNCATION_LIMIT:
            raise TruncationTooCoarse(
                f"marginal truncation at m={S.seq.m} leaves relative tail error {rel_err:.3g}")
    zeta = sqrt(v)
    res = ComplexityResult(seq.name, epsilon, d, n_exact, zeta, None, None, None, None, None,
                           summ.explosion, rel_err, e_ge.count, n_exact, n_exact, S.seq.m, S.nodes)
    if summ.sigma > 0:
        res.theta = -(log(zeta) + d * summ.M) / (summ.sigma * sqrt(d))
        if with_asymptotics:
            a = asymptotic_n(summ, seq.span, epsilon, d)
            res.n_asymptotic, res.log_n_asymptotic, res.q, res.K = a.n, a.log_n, a.q, a.K
    return res


def asymptotic_result(seq: EigenSequence, epsilon: float, d: int) -> ComplexityResult:
    summ = moments(seq)
    a = asymptotic_n(summ, seq.span, epsilon, d)
    return ComplexityResult(seq.name, epsilon, d, None, None, None, a.n, a.log_n, a.q, a.K,
                            summ.explosion, 0.0, m=seq.m, status="asymptotic")


def convergence_table(seq: EigenSequence, epsilon: float, d_values, cap: int = DEFAULT_CAP):
    """One :class:`ComplexityResult` per ``d``; rows over budget are marked partial."""
    rows = []
    summ = moments(seq)
    for d in d_values:
        try:
            rows.append(exact_count(seq, epsilon, int(d), cap))
        except BudgetExceeded as exc:
            a = asymptotic_n(summ, seq.span, epsilon, int(d)) if summ.sigma > 0 else None
            rows.append(ComplexityResult(
                seq.name, epsilon, int(d), None, None, None,
                a.n if a else None, a.log_n if a else None, a.q if a else None,
                a.K if a else None, summ.explosion, 0.0, lower=exc.lower, upper=exc.upper,
                m=seq.m, status="partial"))
    return rows
