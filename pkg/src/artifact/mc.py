"""Seeded Monte Carlo streams and batch-means standard errors.

Replicate ``j`` always receives the same normal draws for a given seed: the
replicates are cut into blocks of ``BLOCK`` rows and block ``b`` is drawn from
its own ``SeedSequence(seed, spawn_key=(b,))``.  Results therefore do not
depend on how a run is chunked.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

BLOCK = 1024
N_BATCHES = 20


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def normal_blocks(seed: int, replicates: int, dim: int):
    """Yield ``(start, Z)`` with ``Z`` a ``(rows, dim)`` block of N(0, 1) draws."""
    if replicates < 1:
        raise ValidationError("replicates must be >= 1")
    for b in range(-(-replicates // BLOCK)):
        rows = min(BLOCK, replicates - b * BLOCK)
        z = block_rng(seed, b).standard_normal((BLOCK, dim))
        yield b * BLOCK, z[:rows]


def batch_means(values, batches: int = N_BATCHES):
    """Mean and batch-means standard error along axis 0.

    Falls back to the plain iid standard error when there are fewer
    observations than batches.
    """
    v = np.asarray(values, dtype=float)
    R = v.shape[0]
    mean = v.mean(axis=0)
    if R < 2:
        return mean, np.full_like(mean, np.inf)
    if R < batches:
        return mean, v.std(axis=0, ddof=1) / np.sqrt(R)
    edges = np.linspace(0, R, batches + 1).astype(int)
    bm = np.stack([v[a:b].mean(axis=0) for a, b in zip(edges[:-1], edges[1:])])
    return mean, bm.std(axis=0, ddof=1) / np.sqrt(batches)
