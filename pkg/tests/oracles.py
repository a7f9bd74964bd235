"""Independent reference computations shared by the unit and acceptance suites."""

import math
from math import comb, fsum

import numpy as np

from artifact.complexity import catalog
from artifact.complexity.enumeration import sorted_products


def sort_oracle_n(name, eps, d, **params):
    """Minimal prefix of the decreasingly sorted products reaching ``(1 - eps^2) Lambda^d``.

    The floor is lowered until the prefix closes above it; every product
    above the floor is materialized, so the prefix is exact.
    """
    top = catalog(name, m=2, **params)
    s1, Lam = top.values[0], top.trace
    target = (1 - eps * eps) * Lam ** d
    floor = s1 ** d
    while True:
        floor *= 0.1
        # indices whose best product can still reach the floor
        m = 2
        while catalog(name, m=m, **params).values[-1] * s1 ** (d - 1) >= floor:
            m *= 2
        s = catalog(name, m=m, **params).values
        prods = sorted_products(s, d, floor)
        prods = prods[prods >= floor]
        csum = np.cumsum(prods)
        if csum.size and csum[-1] >= target:
            return int(np.searchsorted(csum, target) + 1)


def geometric_n(rho, eps, d):
    """``n(eps, d)`` for geometric spectra, by levels: ``C(j+d-1, d-1)`` products equal ``rho^(2j)``."""
    Lam = 1 / (1 - rho * rho)
    target = (1 - eps * eps) * Lam ** d
    head, count, j = 0.0, 0, 0
    while True:
        mult = comb(j + d - 1, d - 1)
        v = rho ** (2 * j)
        if head + mult * v >= target:
            return count + math.ceil((target - head) / v)
        head += mult * v
        count += mult
        j += 1


def convolution_tail(s, d, t):
    """``Lambda^d P(U_1 + ... + U_d > t)`` by the exact d-fold convolution of the U law."""
    s = np.asarray(s, dtype=float)
    Lam = fsum(s)
    u = -0.5 * np.log(s)
    p = s / Lam
    vals, probs = np.zeros(1), np.ones(1)
    for _ in range(d):
        vals = np.add.outer(vals, u).ravel()
        probs = np.multiply.outer(probs, p).ravel()
    return Lam ** d * fsum(probs[vals > t])
