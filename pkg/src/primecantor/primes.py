"""Segmented prime sieve, prime-gap records and window counts."""

from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, OutOfRangeError

DEFAULT_SEGMENT = 1 << 20
CACHE_MAGIC = b"PCFPRIME"
CACHE_VERSION = 1
_HEADER = struct.Struct("<8sIQ")


@dataclass(frozen=True)
class PrimeTable:
    """All primes in ``[2, limit]``, in increasing order.

    ``rank`` and ``select`` are binary searches / direct indexing into
    the sorted array, so both are O(log n) or better.
    """

    limit: int
    primes: np.ndarray

    def __post_init__(self):
        self.primes.setflags(write=False)

    def __len__(self) -> int:
        return len(self.primes)

    def rank(self, x: float) -> int:
        """Number of primes ``<= x``."""
        return int(np.searchsorted(self.primes, math.floor(x), side="right"))

    def select(self, i: int) -> int:
        """The ``i``-th prime, 1-based (``select(1) == 2``)."""
        if not 1 <= i <= len(self.primes):
            raise OutOfRangeError(f"prime index {i} outside 1..{len(self.primes)}")
        return int(self.primes[i - 1])

    def count_between(self, lo: float, hi: float) -> int:
        """Number of primes in the closed interval ``[lo, hi]``."""
        if hi < lo:
            return 0
        return self.rank(hi) - self.rank(math.ceil(lo) - 1)

    @classmethod
    def from_values(cls, values, limit: int | None = None) -> "PrimeTable":
        """Wrap an already sorted integer sequence (used for random models)."""
        arr = np.asarray(values, dtype=np.int64)
        if limit is None:
            limit = int(arr[-1]) if len(arr) else 0
        return cls(int(limit), arr.copy())


def _small_sieve(n: int) -> np.ndarray:
    """Plain odd-only sieve, used for the base primes up to sqrt(limit)."""
    if n < 2:
        return np.array([], dtype=np.int64)
    odd = np.ones((n + 1) // 2, dtype=bool)  # odd[i] <-> 2i+1
    odd[0] = False
    for i in range(1, (math.isqrt(n) + 1) // 2 + 1):
        if odd[i]:
            p = 2 * i + 1
            odd[p * p // 2 :: p] = False
    return np.concatenate(([2], 2 * np.flatnonzero(odd) + 1)).astype(np.int64)


def _sieve_segment(lo: int, hi: int, base: np.ndarray) -> np.ndarray:
    # odd indices i in [lo, hi) stand for the integers 2i+1
    mask = np.ones(hi - lo, dtype=bool)
    top = 2 * hi - 1
    for p in base:
        p = int(p)
        sq = p * p
        if sq > top:
            break
        first = max(sq, -(-(2 * lo + 1) // p) * p)
        if first % 2 == 0:
            first += p
        start = (first - 1) // 2 - lo
        if start < len(mask):
            mask[start::p] = False
    return 2 * (lo + np.flatnonzero(mask)) + 1


def sieve(limit: int, segment_size: int = DEFAULT_SEGMENT, threads: int = 1) -> PrimeTable:
    """Segmented odd-only sieve of Eratosthenes over ``[2, limit]``.

    Working memory beyond the output is the base primes up to
    ``sqrt(limit)`` plus one boolean segment of ``segment_size`` entries
    (each entry is an odd number). Segments are independent, so with
    ``threads > 1`` they are sieved concurrently; output order is fixed.
    """
    limit = int(limit)
    if limit < 2:
        raise DomainError(f"sieve limit must be >= 2, got {limit}")
    base = _small_sieve(math.isqrt(limit))[1:]
    n_odd = (limit + 1) // 2  # odd numbers 1, 3, ..., <= limit
    bounds = [(lo, min(lo + segment_size, n_odd)) for lo in range(1, n_odd, segment_size)]
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: _sieve_segment(b[0], b[1], base), bounds))
    else:
        parts = [_sieve_segment(lo, hi, base) for lo, hi in bounds]
    primes = np.concatenate([np.array([2], dtype=np.int64)] + parts).astype(np.int64)
    return PrimeTable(limit, primes)


def gaps(table) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Consecutive gaps as arrays ``(n, p_n, d_n)`` with 1-based ``n``.

    Tables with fewer than two primes give three empty arrays.
    """
    p = _prime_array(table)
    if len(p) < 2:
        empty = np.array([], dtype=np.int64)
        return empty, empty.copy(), empty.copy()
    d = np.diff(p)
    n = np.arange(1, len(d) + 1, dtype=np.int64)
    return n, p[:-1].copy(), d


@dataclass(frozen=True)
class GapRecord:
    n: int
    p_n: int
    d_n: int
    k: int
    window_min: int
    normalized: float


def _prime_array(table) -> np.ndarray:
    if isinstance(table, PrimeTable):
        return table.primes
    if hasattr(table, "members"):
        return np.asarray(table.members, dtype=np.int64)
    return np.asarray(table, dtype=np.int64)


def window_minima(table, k: int) -> tuple[np.ndarray, np.ndarray]:
    """For each 1-based ``n``, ``min(d_{n+1}, ..., d_{n+k})`` as ``(n, window_min)``."""
    if k < 1:
        raise DomainError(f"window size k must be >= 1, got {k}")
    p = _prime_array(table)
    d = np.diff(p)
    count = len(d) - k  # n runs over 1..len(d)-k
    if count < 1:
        empty = np.array([], dtype=np.int64)
        return empty, empty.copy()
    win = np.lib.stride_tricks.sliding_window_view(d[1:], k).min(axis=1)
    return np.arange(1, count + 1, dtype=np.int64), win[:count]


def rk_records(table, k: int, p_min: int = 1000) -> list[GapRecord]:
    """Running maxima of ``min(d_{n+1},...,d_{n+k}) / ln^2(p_n)``.

    Accepts a :class:`PrimeTable`, a random-model set, or any sorted
    integer array, so true primes and simulated ones share this path.
    Only ``n`` with ``p_n >= p_min`` are scanned; tiny primes otherwise
    dominate because ``ln^2`` is small there. The last record is a
    finite-range lower-bound witness for ``R_k``, not a limit.
    """
    n, win = window_minima(table, k)
    if len(n) == 0:
        return []
    p = _prime_array(table)
    pn = p[n - 1]
    keep = pn >= max(p_min, 2)
    n, win, pn = n[keep], win[keep], pn[keep]
    if len(n) == 0:
        return []
    norm = win / np.log(pn.astype(float)) ** 2
    best = np.maximum.accumulate(norm)
    is_rec = np.empty(len(norm), dtype=bool)
    is_rec[0] = True
    is_rec[1:] = norm[1:] > best[:-1]
    d = np.diff(p)
    return [
        GapRecord(int(n[i]), int(pn[i]), int(d[n[i] - 1]), k, int(win[i]), float(norm[i]))
        for i in np.flatnonzero(is_rec)
    ]


def window_count(table: PrimeTable, a: int, x: float, closed: bool = True) -> int:
    """Number of primes ``p`` with ``|p - a| <= x`` (``< x`` if not ``closed``)."""
    if x < 0:
        raise DomainError(f"window radius must be >= 0, got {x}")
    if a + x > table.limit:
        raise OutOfRangeError(f"window [{a - x}, {a + x}] exceeds table limit {table.limit}")
    p = table.primes
    if closed:
        lo = np.searchsorted(p, math.ceil(a - x), side="left")
        hi = np.searchsorted(p, math.floor(a + x), side="right")
    else:
        lo = np.searchsorted(p, math.floor(a - x), side="right")
        hi = np.searchsorted(p, math.ceil(a + x), side="left")
    return int(max(hi - lo, 0))


def hoheisel_ratio(table: PrimeTable, a: int, b: int) -> float:
    """``#(P ∩ [a, b]) * ln(a) / (b - a)``."""
    if b <= a or a < 2:
        raise DomainError(f"need 2 <= a < b, got [{a}, {b}]")
    if b > table.limit:
        raise OutOfRangeError(f"window end {b} exceeds table limit {table.limit}")
    return table.count_between(a, b) * math.log(a) / (b - a)


@dataclass(frozen=True)
class HoheiselStats:
    theta: float
    windows: np.ndarray  # shape (samples, 2)
    ratios: np.ndarray

    @property
    def min(self) -> float:
        return float(self.ratios.min())

    @property
    def median(self) -> float:
        return float(np.median(self.ratios))

    @property
    def max(self) -> float:
        return float(self.ratios.max())


def hoheisel_ratios(
    table: PrimeTable, theta: float, samples: int, seed: int = 0, a_min: int = 1000
) -> HoheiselStats:
    """Normalized prime counts on random windows ``a^theta <= b - a <= a``.

    ``a`` is log-uniform on ``[a_min, limit / 2]`` and ``b - a`` is
    log-uniform on ``[a^theta, a]``, so ``b <= limit`` always.
    """
    if not 0 < theta < 1:
        raise DomainError(f"theta must lie in (0, 1), got {theta}")
    if samples < 1:
        raise DomainError("samples must be >= 1")
    a_max = table.limit // 2
    if a_max <= a_min:
        raise OutOfRangeError(f"table limit {table.limit} too small for a_min={a_min}")
    rng = np.random.default_rng(seed)
    la = rng.uniform(math.log(a_min), math.log(a_max), samples)
    a = np.floor(np.exp(la)).astype(np.int64)
    lw = rng.uniform(theta * np.log(a), np.log(a))
    b = a + np.maximum(np.floor(np.exp(lw)).astype(np.int64), 1)
    ratios = np.array([hoheisel_ratio(table, int(x), int(y)) for x, y in zip(a, b)])
    return HoheiselStats(theta, np.stack([a, b], axis=1), ratios)


def save_table(table: PrimeTable, path) -> None:
    """Binary cache: header (magic, version, limit) then the odd-number bitset."""
    n_odd = (table.limit + 1) // 2
    bits = np.zeros(n_odd, dtype=bool)
    odd = table.primes[table.primes > 2]
    bits[(odd - 1) // 2] = True
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CACHE_MAGIC, CACHE_VERSION, table.limit))
        fh.write(np.packbits(bits).tobytes())


def load_table(path) -> PrimeTable:
    data = Path(path).read_bytes()
    magic, version, limit = _HEADER.unpack_from(data)
    if magic != CACHE_MAGIC:
        raise ValueError(f"{path}: not a prime table cache")
    if version != CACHE_VERSION:
        raise ValueError(f"{path}: unsupported cache version {version}")
    n_odd = (limit + 1) // 2
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8, offset=_HEADER.size))[:n_odd]
    odd = 2 * np.flatnonzero(bits).astype(np.int64) + 1
    primes = np.concatenate(([2], odd)) if limit >= 2 else odd
    return PrimeTable(int(limit), primes.astype(np.int64))
