"""Random primes: each ``n >= 3`` is kept with probability ``1/ln n``.

Membership of ``n`` is a pure function of ``(seed, n)``. The uniform
variate for ``n`` comes from a Philox stream keyed on the seed whose
counter is set from the block containing ``n``, so any range can be
generated alone, in any order, or in parallel, with identical results.

Record statistics on these sets approach their limiting value ``1/k`` only
logarithmically slowly. A finite run gives a lower-bound witness whose
drift with the limit is the informative part, not a converged estimate.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .primes import GapRecord, rk_records

BLOCK_BITS = 16
BLOCK = 1 << BLOCK_BITS


@dataclass(frozen=True)
class RandomPrimeSet:
    limit: int
    seed: int
    members: np.ndarray

    def __post_init__(self):
        self.members.setflags(write=False)

    def __len__(self) -> int:
        return len(self.members)


def _uniforms(seed: int, block: int) -> np.ndarray:
    # Philox counters are 256-bit; the block index goes in a high word so
    # blocks never share a counter range.
    bg = np.random.Philox(key=seed & ((1 << 64) - 1), counter=[0, 0, block, 0])
    return np.random.Generator(bg).random(BLOCK)


def _block_members(seed: int, block: int, limit: int) -> np.ndarray:
    lo = block * BLOCK
    n = np.arange(lo, lo + BLOCK, dtype=np.int64)
    u = _uniforms(seed, block)
    keep = np.zeros(BLOCK, dtype=bool)
    big = n >= 3
    keep[big] = u[big] < 1.0 / np.log(n[big].astype(float))
    keep &= n <= limit
    keep |= n == 2
    return n[keep]


def simulate(limit: int, seed: int, threads: int = 1) -> RandomPrimeSet:
    """One realisation of the random set on ``[2, limit]`` (2 always included)."""
    limit = int(limit)
    if limit < 3:
        raise DomainError(f"limit must be >= 3, got {limit}")
    blocks = range(limit // BLOCK + 1)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: _block_members(seed, b, limit), blocks))
    else:
        parts = [_block_members(seed, b, limit) for b in blocks]
    return RandomPrimeSet(limit, int(seed), np.concatenate(parts))


def membership(seed: int, n: int) -> bool:
    """Whether ``n`` belongs to the set of the given seed, computed alone."""
    if n == 2:
        return True
    if n < 3:
        return False
    u = _uniforms(seed, n // BLOCK)[n % BLOCK]
    return bool(u < 1.0 / math.log(n))


def expected_count(lo: int, hi: int) -> tuple[float, float]:
    """Mean and variance of the member count in ``[lo, hi]`` (``lo >= 3``)."""
    n = np.arange(max(lo, 3), hi + 1, dtype=float)
    p = 1.0 / np.log(n)
    return float(p.sum()), float((p * (1 - p)).sum())


def rk_on_model(rset: RandomPrimeSet, k: int, p_min: int = 1000) -> list[GapRecord]:
    """Gap records on the random set, through the same routine as true primes."""
    return rk_records(rset, k, p_min=p_min)
