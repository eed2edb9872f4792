"""Pressure and conformal dimension of truncated Gauss systems.

For a word ``w`` with continuant ratio ``t = q_{n-1}/q_n``, appending a
letter multiplies ``q`` by ``a + t`` and moves the ratio to ``1/(a + t)``.
Hence

    Z_n(s) = sum_{|w| = n} q_w^(-2s) = (L_s^n 1)(0),
    (L_s g)(t) = sum_a (a + t)^(-2s) g(1 / (a + t)),

and ``L_s`` acts on functions of ``t`` in ``[0, 1]``. Those functions are
analytic, so a Chebyshev collocation of modest size reproduces ``Z_n``
to rounding error without touching individual words.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, RegularityError

LN4 = math.log(4.0)
DEFAULT_NODES = 40
_CACHE_ENTRIES = 16_000_000  # interpolation weights kept in memory (float64)


@dataclass(frozen=True)
class TruncatedAlphabet:
    """A finite alphabet ``E ∩ [1, cutoff]`` and the density law of ``E``.

    ``kind`` is ``"primes"``, ``"all"`` or ``"set"``. For primes the
    density law is ``f(N) = N / ln N`` with growth exponent 1; for all
    integers ``f(N) = N``. Explicit sets carry no density law.
    """

    kind: str
    cutoff: int
    letters: np.ndarray
    growth_exponent: float | None = None

    def __post_init__(self):
        self.letters.setflags(write=False)

    def __len__(self) -> int:
        return len(self.letters)

    @classmethod
    def primes(cls, cutoff: int, table=None) -> "TruncatedAlphabet":
        from .primes import sieve

        if table is None or table.limit < cutoff:
            table = sieve(max(cutoff, 2))
        letters = table.primes[table.primes <= cutoff].astype(np.int64)
        return cls("primes", int(cutoff), letters, 1.0)

    @classmethod
    def all_integers(cls, cutoff: int) -> "TruncatedAlphabet":
        return cls("all", int(cutoff), np.arange(1, cutoff + 1, dtype=np.int64), 1.0)

    @classmethod
    def explicit(cls, letters) -> "TruncatedAlphabet":
        arr = np.unique(np.asarray(list(letters), dtype=np.int64))
        if len(arr) == 0 or arr[0] < 1:
            raise DomainError("explicit alphabets need letters >= 1")
        return cls("set", int(arr[-1]), arr, None)

    @classmethod
    def parse(cls, spec: str, cutoff: int | None = None, table=None) -> "TruncatedAlphabet":
        """``"primes"``, ``"all"`` or ``"set:2,3,5"``."""
        if spec.startswith("set:"):
            return cls.explicit(int(tok) for tok in spec[4:].split(",") if tok.strip())
        if cutoff is None:
            raise DomainError(f"alphabet {spec!r} needs a truncation")
        if spec == "primes":
            return cls.primes(cutoff, table)
        if spec == "all":
            return cls.all_integers(cutoff)
        raise DomainError(f"unknown alphabet {spec!r}")

    def density(self, n: float) -> float:
        """The comparison function ``f(N)`` for ``#(E ∩ [N, 2N])``."""
        if self.kind == "primes":
            return n / math.log(n)
        if self.kind == "all":
            return n
        raise DomainError("explicit sets carry no density law")

    def contains(self, a: int) -> bool:
        i = np.searchsorted(self.letters, a)
        return bool(i < len(self.letters) and self.letters[i] == a)

    def tail_sum_bound(self, s: float) -> float:
        """Bound on ``sum_{a > cutoff, a in E} a^(-2s)`` for the untruncated ``E``.

        Uses ``N^(1-2s) / (2s - 1)``, thinned by ``1/ln N`` for primes.
        Explicit sets have no tail. Infinite when ``s <= 1/2``.
        """
        if self.kind == "set":
            return 0.0
        if s <= 0.5:
            return math.inf
        n = self.cutoff
        bound = n ** (1 - 2 * s) / (2 * s - 1)
        if self.kind == "primes":
            bound /= math.log(n)
        return bound


def chebyshev_nodes(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Chebyshev-Lobatto nodes on ``[0, 1]`` (node 0 is ``t = 0``) and
    their barycentric weights."""
    j = np.arange(m)
    x = (1 - np.cos(np.pi * j / (m - 1))) / 2
    w = (-1.0) ** j
    w[0] *= 0.5
    w[-1] *= 0.5
    return x, w


def barycentric_matrix(nodes: np.ndarray, weights: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Lagrange basis values ``l_k(y)`` for every entry of ``y``; shape ``y.shape + (m,)``."""
    diff = y[..., None] - nodes
    hit = diff == 0
    diff[hit] = 1.0
    c = weights / diff
    c /= c.sum(axis=-1, keepdims=True)
    if hit.any():
        rows = hit.any(axis=-1)
        c[rows] = hit[rows]
    return c


class TransferOperator:
    """Collocation matrix of ``L_s`` for a fixed alphabet.

    ``matrix(s)[j, k]`` is the coefficient of ``g(t_k)`` in ``(L_s g)(t_j)``.
    Interpolation weights do not depend on ``s`` and are cached when the
    alphabet is small enough; only the factors ``(a + t)^(-2s)`` change.
    """

    def __init__(self, letters, nodes: int = DEFAULT_NODES, chunk: int = 4096):
        self.letters = np.asarray(letters, dtype=np.float64)
        self.size = nodes
        self.t, self.bw = chebyshev_nodes(nodes)
        self.chunk = chunk
        self._cached = None
        if len(self.letters) * nodes * nodes <= _CACHE_ENTRIES:
            y = 1.0 / (self.letters[:, None] + self.t[None, :])
            self._cached = (np.log(y), barycentric_matrix(self.t, self.bw, y))

    def matrix(self, s: float) -> np.ndarray:
        if self._cached is not None:
            log_y, basis = self._cached
            return np.einsum("cj,cjk->jk", np.exp(2 * s * log_y), basis)
        out = np.zeros((self.size, self.size))
        for start in range(0, len(self.letters), self.chunk):
            a = self.letters[start : start + self.chunk]
            y = 1.0 / (a[:, None] + self.t[None, :])
            out += np.einsum("cj,cjk->jk", y ** (2 * s), barycentric_matrix(self.t, self.bw, y))
        return out

    def log_partition(self, s: float, n: int) -> float:
        """``ln Z_n(s)`` by binary powering with log-scale bookkeeping."""
        if n < 0:
            raise DomainError("n must be >= 0")
        power = self.matrix(s)  # true power = power * exp(power_log)
        power_log = 0.0
        vec = np.ones(self.size)  # true vector = vec * exp(vec_log)
        vec_log = 0.0
        while n:
            if n & 1:
                vec = power @ vec
                vec_log += power_log
                scale = np.abs(vec).max()
                vec /= scale
                vec_log += math.log(scale)
            n >>= 1
            if n:
                power = power @ power
                scale = np.abs(power).max()
                power /= scale
                power_log = 2 * power_log + math.log(scale)
        return vec_log + math.log(vec[0])

    def log_partition_iterated(self, s: float, n: int) -> list[float]:
        """``[ln Z_1, ..., ln Z_n]`` by plain repeated application."""
        a = self.matrix(s)
        vec = np.ones(self.size)
        log_scale = 0.0
        out = []
        for _ in range(n):
            vec = a @ vec
            scale = np.abs(vec).max()
            vec /= scale
            log_scale += math.log(scale)
            out.append(log_scale + math.log(vec[0]))
        return out


@lru_cache(maxsize=32)
def _operator_for(key: tuple, nodes: int) -> TransferOperator:
    return TransferOperator(np.frombuffer(key[1], dtype=np.int64), nodes)


def operator_for(alphabet: TruncatedAlphabet, nodes: int = DEFAULT_NODES) -> TransferOperator:
    key = (alphabet.kind, alphabet.letters.tobytes())
    return _operator_for(key, nodes)


def _check_s(s: float) -> None:
    if s < 0 or not math.isfinite(s):
        raise DomainError(f"pressure needs s >= 0, got {s}")


def partition_sum(alphabet: TruncatedAlphabet, n: int, s: float, nodes: int = DEFAULT_NODES) -> float:
    """``ln sum_{w in E^n} ||phi_w'||^s`` via the transfer operator."""
    _check_s(s)
    if n < 1:
        raise DomainError("n must be >= 1")
    return operator_for(alphabet, nodes).log_partition(s, n)


@dataclass(frozen=True)
class PressureEstimate:
    """``value = ln(Z_n)/n`` with the quasi-multiplicative bracket.

    ``Z_{n+m} <= Z_n Z_m`` and ``Z_{n+m} >= 4^-s Z_n Z_m`` give
    ``(ln Z_n - s ln 4)/n <= P(s) <= ln(Z_n)/n``. ``rate`` is
    ``ln Z_n - ln Z_{n-1}``, which converges geometrically but carries
    no bracket of its own.
    """

    s: float
    n: int
    value: float
    lower: float
    upper: float
    rate: float
    converged: bool

    @property
    def width(self) -> float:
        return self.upper - self.lower


def pressure(
    alphabet: TruncatedAlphabet,
    s: float,
    n_max: int = 1 << 48,
    tol: float = 1e-6,
    nodes: int = DEFAULT_NODES,
) -> PressureEstimate:
    """Pressure at ``s`` with a bracket of width ``< tol`` when ``n_max`` allows.

    The bracket width is exactly ``s ln 4 / n``, so ``n`` is chosen up
    front; if that exceeds ``n_max`` the estimate is flagged unconverged.
    """
    _check_s(s)
    op = operator_for(alphabet, nodes)
    need = max(1, math.floor(s * LN4 / tol) + 1) if tol > 0 else n_max
    n = min(need, n_max)
    log_z = op.log_partition(s, n)
    prev = op.log_partition(s, n - 1) if n > 1 else 0.0
    return PressureEstimate(
        s=s,
        n=n,
        value=log_z / n,
        lower=(log_z - s * LN4) / n,
        upper=log_z / n,
        rate=log_z - prev,
        converged=s * LN4 / n < tol or s == 0,
    )


@dataclass(frozen=True)
class DimensionResult:
    delta: float
    lower: float
    upper: float
    cutoff: int
    tol: float
    tail_bound: float
    certified: bool
    evaluations: int = 0
    history: list = field(default_factory=list, repr=False)

    @property
    def bracket(self) -> tuple[float, float]:
        return (self.lower, self.upper)


def conformal_dimension(
    alphabet: TruncatedAlphabet,
    tol: float = 1e-6,
    nodes: int = DEFAULT_NODES,
    n_max: int = 1 << 48,
) -> DimensionResult:
    """Root of the pressure by bisection on certified sign decisions.

    ``lower``/``upper`` always satisfy ``P(lower) > 0 > P(upper)`` per the
    quasi-multiplicative brackets. If a midpoint cannot be decided even at
    ``n_max`` the search stops there and ``certified`` is False.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    size = len(alphabet)
    if size == 0:
        raise RegularityError("empty alphabet")
    if size == 1:
        # one word per level: P(s) = -2s ln(golden-type ratio) <= 0 with P(0) = 0
        return DimensionResult(0.0, 0.0, 0.0, alphabet.cutoff, tol, alphabet.tail_sum_bound(0.0), True)
    lo, hi = 0.0, 1.0
    top = pressure(alphabet, hi, n_max=n_max, tol=tol / 10, nodes=nodes)
    if not top.upper < 0:
        raise RegularityError(f"pressure at s=1 is not negative (bracket [{top.lower}, {top.upper}])")
    certified = True
    evaluations = 1
    history = []
    while hi - lo > tol:
        mid = (lo + hi) / 2
        ptol = tol / 10
        while True:
            est = pressure(alphabet, mid, n_max=n_max, tol=ptol, nodes=nodes)
            evaluations += 1
            if est.lower > 0 or est.upper < 0 or est.n >= n_max:
                break
            ptol /= 8
        history.append((mid, est.lower, est.upper))
        if est.lower > 0:
            lo = mid
        elif est.upper < 0:
            hi = mid
        else:
            certified = False
            break
    delta = (lo + hi) / 2
    return DimensionResult(
        delta, lo, hi, alphabet.cutoff, tol, alphabet.tail_sum_bound(delta), certified, evaluations, history
    )


def assumption_checks(
    alphabet: TruncatedAlphabet,
    table,
    delta: float | None = None,
    n_grid=None,
    r_grid=None,
    lam: float = 4.0,
) -> dict:
    """Numeric diagnostics for the density law, the annulus condition and
    the Lyapunov exponent. Nothing here raises; everything is reported."""
    from .conformal import MeasureModel, annulus_ratio

    if delta is None:
        delta = conformal_dimension(alphabet, tol=1e-8).delta
    report: dict = {"delta": delta}

    if alphabet.kind != "set":
        if n_grid is None:
            top = min(table.limit, alphabet.cutoff) // 2
            n_grid = [int(v) for v in np.geomspace(10, max(top, 20), 12)]
        rows = []
        for n in n_grid:
            if 2 * n > table.limit:
                continue
            if alphabet.kind == "primes":
                count = table.count_between(n, 2 * n)
            else:
                count = n + 1
            rows.append({"N": n, "count": count, "ratio": count / alphabet.density(n)})
        report["density"] = rows

    model = MeasureModel.build(alphabet, delta)
    if r_grid is None:
        r_min = max(4.0 / alphabet.cutoff**2 * lam, 1e-8)
        r_grid = [float(r) for r in np.geomspace(r_min, 1.0, 10)]
    report["annulus"] = [
        {"r": r, "ratio": res.ratio, "empty": res.empty} for r in r_grid for res in [annulus_ratio(model, r, lam)]
    ]

    a = alphabet.letters.astype(float)
    terms = model.letter_weights * 2 * np.log(a)
    partial = np.cumsum(terms)
    cut_grid = sorted(set(int(c) for c in np.geomspace(a[0], a[-1], 12)))
    lyap = []
    for c in cut_grid:
        i = np.searchsorted(a, c, side="right")
        lyap.append({"N": c, "partial": float(partial[i - 1])})
    cauchy = [abs(lyap[i + 1]["partial"] - lyap[i]["partial"]) for i in range(len(lyap) - 1)]
    report["lyapunov"] = {
        "value": float(partial[-1]),
        "partials": lyap,
        "cauchy_differences": cauchy,
        "tail_bound": lyapunov_tail_bound(alphabet, delta, model.normalization),
    }
    return report


def lyapunov_tail_bound(alphabet: TruncatedAlphabet, delta: float, normalization: float) -> float:
    """Bound on ``sum_{a > N} mu(a) * 2 ln a`` with ``mu(a) = a^(-2 delta) / Z``."""
    if alphabet.kind == "set":
        return 0.0
    if delta <= 0.5:
        return math.inf
    n = alphabet.cutoff
    e = 2 * delta - 1
    if alphabet.kind == "primes":
        bound = 2 * n ** (-e) / e
    else:
        bound = 2 * n ** (-e) * (math.log(n) / e + 1 / e**2)
    return bound / normalization
