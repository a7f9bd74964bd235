"""Pruned depth-first enumeration of tensor-product eigenvalues.

The products ``lambda_k^2 = s[k_1] ... s[k_d]`` are visited as nondecreasing
index tuples, each weighted by its number of distinct permutations, so a run
touches roughly ``count / d!`` nodes and keeps ``O(d)`` state.  A branch is cut
as soon as ``partial * s[i]^(remaining + 1)`` drops below the threshold; the
last coordinate is resolved by binary search and prefix sums.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np
from numba import njit

# relative slack on the pruning bound so that rounding never cuts a valid branch
_PRUNE_SLACK = 1e-13


@njit(cache=True)
def _last_count(s, q, thr, lo):
    # number of indices j >= lo with q * s[j] >= thr, given q * s[lo] >= thr
    hi = s.size
    a, b = lo + 1, hi
    while a < b:
        mid = (a + b) // 2
        if q * s[mid] >= thr:
            a = mid + 1
        else:
            b = mid
    return a


# counts stay well inside int64
_COUNT_LIMIT = 1 << 60


@njit(cache=True)
def _dfs(s, P, d, thr, cap):
    """Return (count, head, vmin, nodes, truncated, exceeded).

    ``coef[level]`` is the number of distinct orderings of the chosen prefix;
    it is updated incrementally, so it never exceeds the final permutation
    count of a surviving tuple.
    """
    m = s.size
    count = 0
    head = 0.0
    vmin = np.inf
    nodes = 0
    truncated = False
    if d == 1:
        if s[0] < thr:
            return 0, 0.0, np.inf, 1, False, False
        J = _last_count(s, 1.0, thr, 0)
        return J, P[J], s[J - 1], 1, J == m, False
    idx = np.full(d, -1, dtype=np.int64)
    pp = np.ones(d + 1)
    coef = np.ones(d + 1, dtype=np.int64)
    run = np.zeros(d + 1, dtype=np.int64)
    level = 0
    while level >= 0:
        prev = idx[level - 1] if level > 0 else 0
        i = prev if idx[level] < 0 else idx[level] + 1
        if i >= m:
            truncated = True
            idx[level] = -1
            level -= 1
            continue
        rem = d - level - 1
        if pp[level] * s[i] ** (rem + 1) < thr * (1.0 - _PRUNE_SLACK):
            idx[level] = -1
            level -= 1
            continue
        idx[level] = i
        nodes += 1
        if nodes > cap or count > _COUNT_LIMIT:
            return count, head, vmin, nodes, truncated, True
        # orderings of the prefix idx[0..level]
        if level > 0 and i == idx[level - 1]:
            r = run[level] + 1
        else:
            r = 1
        c = coef[level] * (level + 1) // r
        q = pp[level] * s[i]
        if level + 1 == d - 1:
            # resolve the last coordinate j >= i directly
            if q * s[i] >= thr:
                mult = c * d // (r + 1)
                v = q * s[i]
                count += mult
                head += mult * v
                if v < vmin:
                    vmin = v
                J = _last_count(s, q, thr, i)
                if J > i + 1:
                    mult = c * d
                    count += mult * (J - i - 1)
                    head += mult * q * (P[J] - P[i + 1])
                    v = q * s[J - 1]
                    if v < vmin:
                        vmin = v
                if J == m:
                    truncated = True
        else:
            pp[level + 1] = q
            coef[level + 1] = c
            run[level + 1] = r
            level += 1
            idx[level] = -1
    return count, head, vmin, nodes, truncated, False


@dataclass(frozen=True)
class Enumeration:
    threshold: float
    count: int
    head: float
    vmin: float
    nodes: int
    truncated: bool
    exceeded: bool


def prefix_sums(s: np.ndarray) -> np.ndarray:
    P = np.zeros(s.size + 1)
    P[1:] = np.cumsum(s)
    return P


def enumerate_above(s, d: int, threshold: float, cap: int = 10 ** 8, P=None) -> Enumeration:
    """Count and sum the products ``>= threshold`` over ``{1..m}^d``.

    ``s`` must be sorted in decreasing order.  ``truncated`` reports that the
    enumeration reached the last materialized index, so products involving
    indices beyond ``m`` might also exceed the threshold.
    """
    s = np.ascontiguousarray(s, dtype=float)
    if P is None:
        P = prefix_sums(s)
    c, h, v, nodes, tr, ex = _dfs(s, P, int(d), float(threshold), int(cap))
    return Enumeration(float(threshold), int(c), float(h), float(v), int(nodes), bool(tr), bool(ex))


def sorted_products(s, d: int, floor: float = 0.0) -> np.ndarray:
    """All products ``>= floor`` over ``{1..m}^d``, sorted decreasingly (small-case oracle)."""
    s = np.asarray(s, dtype=float)
    prods = np.ones(1)
    for t in range(d):
        prods = np.multiply.outer(prods, s).ravel()
        if floor > 0:
            # drop partial products that cannot reach the floor even with top factors
            prods = prods[prods * s[0] ** (d - t - 1) >= floor]
    return np.sort(prods)[::-1]
