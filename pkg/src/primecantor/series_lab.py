"""Dimension functions, the series criteria built from them, and verdicts.

All evaluations happen in ``L = ln(1/r)`` because the interesting radii
underflow any float (``Psi^-1`` of a moderate number can be
``exp(-10^6)``). ``log_inverse(spec, y)`` returns ``ln(1/Psi^-1(y))``
directly, which is also exactly the quantity the series need.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .conformal import MeasureModel
from .dimension import TruncatedAlphabet
from .errors import DomainError, OutOfRangeError, TruncationError
from .primes import PrimeTable, _prime_array

FAMILIES = ("log_power", "loglog_power", "maier", "power_offset")
_E_E = math.exp(math.e)
_MAIER_L_MIN = math.exp(_E_E)  # ln ln ln L > 1 below this fails


def _maier_log_phi(L: float) -> float:
    """``ln phi(L)`` for ``phi(x) = ln x lnln x lnlnlnln x / (lnlnln x)^2``."""
    l1 = math.log(L)
    l2 = math.log(l1)
    l3 = math.log(l2)
    l4 = math.log(l3)
    return math.log(l1) + math.log(l2) + math.log(l4) - 2 * math.log(l3)


@dataclass(frozen=True)
class DimensionFunctionSpec:
    """``psi(r) = r^delta Psi(r)`` for one of the built-in families.

    ``log_power(e)``: ``Psi = L^e``; ``loglog_power(e)``: ``Psi = (ln L)^e``;
    ``maier``: ``Psi = phi(L)^-delta``; ``power_offset(t)``: ``Psi = r^t``,
    i.e. ``psi(r) = r^(delta + t)``.
    """

    family: str
    param: float
    delta: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.family != "maier" and self.param == 0:
            raise DomainError("a zero exponent makes Psi constant")

    @classmethod
    def log_power(cls, s: float, delta: float) -> "DimensionFunctionSpec":
        return cls("log_power", float(s), float(delta))

    @classmethod
    def loglog_power(cls, s: float, delta: float) -> "DimensionFunctionSpec":
        return cls("loglog_power", float(s), float(delta))

    @classmethod
    def maier(cls, delta: float) -> "DimensionFunctionSpec":
        return cls("maier", float(delta), float(delta))

    @classmethod
    def power_offset(cls, t: float, delta: float) -> "DimensionFunctionSpec":
        return cls("power_offset", float(t), float(delta))

    @property
    def L_min(self) -> float:
        """Valid domain is ``L > L_min``, i.e. ``r < exp(-L_min)``."""
        return {"log_power": 0.0, "loglog_power": math.e, "maier": _MAIER_L_MIN, "power_offset": 0.0}[self.family]

    @property
    def r_max(self) -> float:
        return math.exp(-self.L_min)

    @property
    def epsilon(self) -> int:
        """+1 if ``Psi`` decreases in ``r`` (grows as ``r -> 0``), -1 if it increases."""
        if self.family == "maier":
            return -1
        if self.family == "power_offset":
            return -1 if self.param > 0 else 1
        return 1 if self.param > 0 else -1

    def log_Psi(self, L: float) -> float:
        if not L > self.L_min:
            raise OutOfRangeError(f"L = {L} outside the valid domain L > {self.L_min}")
        if self.family == "log_power":
            return self.param * math.log(L)
        if self.family == "loglog_power":
            return self.param * math.log(math.log(L))
        if self.family == "maier":
            return -self.param * _maier_log_phi(L)
        return -self.param * L

    def log_range(self) -> tuple[float, float]:
        """Open range of ``ln Psi`` over the valid domain."""
        inf = math.inf
        if self.family == "maier":
            return (-inf, inf)
        if self.family == "log_power":
            return (-inf, inf)
        if self.family == "loglog_power":
            return (0.0, inf) if self.param > 0 else (-inf, 0.0)
        return (-inf, 0.0) if self.param > 0 else (0.0, inf)

    def Psi(self, r: float) -> float:
        return math.exp(self.log_Psi(-math.log(r)))

    def psi(self, r: float) -> float:
        L = -math.log(r)
        return math.exp(-self.delta * L + self.log_Psi(L))

    def describe(self) -> dict:
        d = asdict(self)
        d["epsilon"] = self.epsilon
        d["r_max"] = self.r_max
        return d


def psi_eval(spec: DimensionFunctionSpec, r: float) -> float:
    """``Psi(r)``; ``r`` must lie in ``(0, r_max)``."""
    if not 0 < r < spec.r_max:
        raise OutOfRangeError(f"r = {r} outside (0, {spec.r_max})")
    return spec.Psi(r)


def log_inverse(spec: DimensionFunctionSpec, y: float | None = None, rel_tol: float = 1e-12, *, log_y=None) -> float:
    """``ln(1/Psi^-1(y))`` by bisection on ``ln L``.

    Pass ``log_y`` instead of ``y`` when ``y`` itself would under- or overflow.
    """
    if log_y is None:
        if not y > 0:
            raise OutOfRangeError(f"Psi takes positive values only, got y = {y}")
        log_y = math.log(y)
    target = float(log_y)
    lo_r, hi_r = spec.log_range()
    if not lo_r < target < hi_r:
        raise OutOfRangeError(
            f"ln y = {target} outside the range of ln Psi, ({lo_r}, {hi_r}); Psi ranges over"
            f" ({math.exp(lo_r)}, {math.exp(hi_r)})"
        )
    sign = 1 if spec.epsilon == 1 else -1  # ln Psi is increasing in L iff epsilon = +1

    def g(u):
        try:
            return sign * (spec.log_Psi(math.exp(u)) - target)
        except (ValueError, OutOfRangeError):
            return math.nan

    if spec.L_min > 0:
        base = math.log(spec.L_min)
        for j in range(14, -2, -1):
            lo = base + 10.0**-j
            if g(lo) < 0:  # NaN compares False
                break
        else:
            raise OutOfRangeError(f"ln y = {target} is not attained by Psi on its valid domain")
    else:
        lo = -50.0
        while not g(lo) < 0:
            lo *= 2
            if lo < -700:
                raise OutOfRangeError(f"ln y = {target} needs L below e^-700")
    hi = lo + 1.0
    while not g(hi) >= 0:
        hi = lo + 2 * (hi - lo)
        if hi > 710:
            raise OutOfRangeError(f"ln y = {target} needs L beyond e^710")
    while hi - lo > 0.1 * rel_tol:
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))


def psi_inverse(spec: DimensionFunctionSpec, y: float) -> float:
    """``Psi^-1(y)``; underflows to 0.0 for very large ``L``, use :func:`log_inverse` then."""
    return math.exp(-log_inverse(spec, y))


@dataclass
class TermStream:
    """Series terms with their index (``k`` or the letter ``a``)."""

    label: str
    index: np.ndarray
    terms: np.ndarray
    flagged: np.ndarray  # per-term flag; flagged terms are 0 in ``terms``
    params: dict = field(default_factory=dict)

    @property
    def skipped(self) -> int:
        return int(self.flagged.sum())

    @property
    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.terms)


def hd_series_terms(spec: DimensionFunctionSpec, lam: float, delta: float, K: int) -> TermStream:
    """``y^((1-2 delta)/(1-delta)) / (ln y)^(delta/(1-delta))`` at ``y = Psi(lam^-k)``, ``k = 1..K``.

    Terms with ``y <= 1`` or ``lam^-k`` outside the valid domain are flagged
    and set to 0.
    """
    if lam <= 1:
        raise DomainError(f"lambda must exceed 1, got {lam}")
    if not 0.5 < delta < 1:
        raise DomainError(f"the criterion needs 1/2 < delta < 1, got {delta}")
    e1 = (1 - 2 * delta) / (1 - delta)
    e2 = delta / (1 - delta)
    k = np.arange(1, K + 1, dtype=np.int64)
    terms = np.zeros(K)
    flag = np.ones(K, dtype=bool)
    ln_lam = math.log(lam)
    for i in range(K):
        L = (i + 1) * ln_lam
        if L <= spec.L_min:
            continue
        ly = spec.log_Psi(L)
        if ly <= 0:
            continue
        terms[i] = math.exp(e1 * ly - e2 * math.log(ly))
        flag[i] = False
    if flag.all():
        raise DomainError("Psi(lam^-k) <= 1 for every k: the series criterion does not apply")
    return TermStream("hd", k, terms, flag, {"lambda": lam, "delta": delta, **spec.describe()})


def _model(alphabet: TruncatedAlphabet, delta: float) -> MeasureModel:
    return MeasureModel.build(alphabet, delta)


def sigma_doubleprime_terms(
    spec: DimensionFunctionSpec, alpha: float, delta: float, alphabet: TruncatedAlphabet
) -> TermStream:
    """``mu(a) ln(1/Psi^-1(F(1/a) / alpha))`` with ``F(1/a) = a^(1-delta) / ln a``."""
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    model = _model(alphabet, delta)
    a = alphabet.letters
    terms = np.zeros(len(a))
    flag = np.zeros(len(a), dtype=bool)
    for i, letter in enumerate(a):
        la = math.log(float(letter))
        log_y = (1 - delta) * la - math.log(la) - math.log(alpha)
        try:
            terms[i] = model.letter_weights[i] * log_inverse(spec, log_y=log_y)
        except OutOfRangeError:
            flag[i] = True
    return TermStream("sigma2", a.copy(), terms, flag, {"alpha": alpha, "delta": delta, **spec.describe()})


@dataclass(frozen=True)
class InnerMax:
    a: int
    x: float  # candidate attaining the optimum (open counts mean "x from the left")
    count: int
    closed: bool
    y: float  # alpha^-1 x^-delta count
    value: float  # ln(1/Psi^-1(y))


def _neighbour_distances(members: np.ndarray, a: int) -> np.ndarray:
    lo = np.searchsorted(members, a - a / 3, side="left")
    hi = np.searchsorted(members, a + a / 3, side="right")
    return np.sort(np.abs(members[lo:hi] - a).astype(float))


def inner_max(spec: DimensionFunctionSpec, alpha: float, delta: float, members: np.ndarray, a: int) -> InnerMax | None:
    """``sup_{1 <= x <= a/3} ln(1/Psi^-1(alpha^-1 x^-delta #(B(a,x) ∩ E)))``.

    The count is a step function jumping at the distances ``|p - a|``;
    between jumps ``x^-delta * count`` decreases. Its supremum over ``x``
    sits at ``x = 1`` or at a jump (closed count), its infimum at a jump
    or at ``a/3`` approached from the left (open count). Since
    ``ln(1/Psi^-1)`` is monotone, evaluating both kinds of candidate and
    keeping the best covers either monotonicity of ``Psi``. Returns None
    when ``a/3 < 1`` (empty domain).
    """
    top = a / 3
    if top < 1:
        return None
    d = _neighbour_distances(members, a)
    jumps = d[(d > 1) & (d <= top)]
    xs = np.concatenate(([1.0], jumps, jumps, [top, top]))
    closed = np.concatenate(([True], np.ones(len(jumps), bool), np.zeros(len(jumps), bool), [True, False]))
    counts = np.where(closed, np.searchsorted(d, xs, side="right"), np.searchsorted(d, xs, side="left"))
    ok = counts > 0
    xs, closed, counts = xs[ok], closed[ok], counts[ok]
    log_ys = np.log(counts) - delta * np.log(xs) - math.log(alpha)
    # ln(1/Psi^-1(y)) increases in y when epsilon = +1, decreases when -1
    i = int(np.argmax(log_ys) if spec.epsilon == 1 else np.argmin(log_ys))
    ly = float(log_ys[i])
    return InnerMax(int(a), float(xs[i]), int(counts[i]), bool(closed[i]), math.exp(ly), log_inverse(spec, log_y=ly))


def sigma_prime_packing_terms(
    spec: DimensionFunctionSpec, alpha: float, delta: float, table, alphabet: TruncatedAlphabet
) -> TermStream:
    """``mu(a) sup_x ln(1/Psi^-1(alpha^-1 x^-delta #(B(a,x) ∩ E)))`` over ``a ∈ E``.

    ``table`` supplies the set ``E`` for the counts and must reach
    ``4a/3``; letters beyond that, letters with ``a < 3`` and arguments
    outside the range of ``Psi`` are flagged and contribute 0.
    """
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    model = _model(alphabet, delta)
    members = _prime_array(table)
    limit = table.limit if isinstance(table, PrimeTable) else int(members[-1])
    a = alphabet.letters
    terms = np.zeros(len(a))
    flag = np.zeros(len(a), dtype=bool)
    for i, letter in enumerate(a):
        letter = int(letter)
        if letter + letter / 3 > limit:
            flag[i] = True
            continue
        try:
            best = inner_max(spec, alpha, delta, members, letter)
        except OutOfRangeError:
            best = None
        if best is None:
            flag[i] = True
            continue
        terms[i] = model.letter_weights[i] * best.value
    return TermStream("sigma1_packing", a.copy(), terms, flag, {"alpha": alpha, "delta": delta, **spec.describe()})


def sigma_prime_one(
    spec: DimensionFunctionSpec, alpha: float, delta: float, table, alphabet: TruncatedAlphabet
) -> TermStream:
    """The composed series: packing part plus ``Sigma''``, letter by letter."""
    p = sigma_prime_packing_terms(spec, alpha, delta, table, alphabet)
    q = sigma_doubleprime_terms(spec, alpha, delta, alphabet)
    return TermStream("sigma1", p.index, p.terms + q.terms, p.flagged | q.flagged, p.params)


@dataclass(frozen=True)
class VerdictPolicy:
    margin: float = 0.05  # on the power exponent
    log_margin: float = 0.25  # on the log exponent when the power sits at -1
    raabe_margin: float = 0.25
    min_terms: int = 1000
    tail_from: float = 1 / 3  # fit over index >= n^tail_from


@dataclass
class SeriesDiagnostics:
    terms_computed: int
    partial_sums: np.ndarray
    fitted_exponent: float  # power of k in the tail model
    log_exponent: float  # power of ln k in the tail model
    verdict: str  # converges | diverges | inconclusive
    verdict_basis: str
    policy: VerdictPolicy = field(default_factory=VerdictPolicy)
    skipped: int = 0

    def record(self) -> dict:
        return {
            "terms_computed": self.terms_computed,
            "final_partial_sum": float(self.partial_sums[-1]) if len(self.partial_sums) else 0.0,
            # NaN (no fit) becomes JSON null
            "fitted_exponent": None if math.isnan(self.fitted_exponent) else self.fitted_exponent,
            "log_exponent": None if math.isnan(self.log_exponent) else self.log_exponent,
            "verdict": self.verdict,
            "verdict_basis": self.verdict_basis,
            "skipped": self.skipped,
            "policy": asdict(self.policy),
        }


def _design(n: np.ndarray) -> np.ndarray:
    ln = np.log(n)
    return np.column_stack([np.ones_like(ln), ln, np.log(ln), 1 / ln])


def _tail_fit(n: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, float]:
    """Least squares ``ln t = c + alpha ln n + beta ln ln n + gamma / ln n``.

    The ``1/ln n`` column absorbs shifts such as ``ln(n) + const`` inside
    the logarithmic factor. Returns the coefficients and the rms residual.
    """
    X = _design(n)
    coef, *_ = np.linalg.lstsq(X, np.log(t), rcond=None)
    resid = np.log(t) - X @ coef
    return coef, float(np.sqrt(np.mean(resid**2)))


def _power_refit(n: np.ndarray, t: np.ndarray, coef: np.ndarray) -> float:
    """Power exponent on a sub-window with the log-factor terms held fixed."""
    X = _design(n)
    rest = np.log(t) - X[:, 2:] @ coef[2:]
    sub, *_ = np.linalg.lstsq(X[:, :2], rest, rcond=None)
    return float(sub[1])


def _classify(alpha: float, beta: float, pol: VerdictPolicy) -> tuple[str, str]:
    if alpha < -1 - pol.margin:
        return "converges", f"power exponent {alpha:.4f} < -1 - {pol.margin}"
    if alpha > -1 + pol.margin:
        return "diverges", f"power exponent {alpha:.4f} > -1 + {pol.margin}"
    if beta < -1 - pol.log_margin:
        return "converges", f"power exponent {alpha:.4f} ~ -1, log exponent {beta:.3f} < -1"
    if beta > -1 + pol.log_margin:
        return "diverges", f"power exponent {alpha:.4f} ~ -1, log exponent {beta:.3f} > -1"
    return "inconclusive", f"power exponent {alpha:.4f} and log exponent {beta:.3f} both sit at the boundary"


def _condensed_raabe(n: np.ndarray, t: np.ndarray) -> float:
    """Median Raabe number ``j (c_j / c_{j+1} - 1)`` of the condensed series
    ``c_j = 2^j t_{2^j}``, over the upper half of the available ``j``."""
    pos = {int(v): i for i, v in enumerate(n)}
    js = [j for j in range(1, 64) if (1 << j) in pos]
    if len(js) < 6:
        return math.nan
    c = np.array([(1 << j) * t[pos[1 << j]] for j in js])
    jj = np.array(js, dtype=float)
    r = jj[:-1] * (c[:-1] / c[1:] - 1)
    return float(np.median(r[len(r) // 2 :]))


def verdict(stream, policy: VerdictPolicy | None = None) -> SeriesDiagnostics:
    """Three-way convergence verdict for a term stream (or a plain array).

    The tail is modelled as ``n^alpha (ln n)^beta`` (index ``n`` is the
    position in the stream). ``alpha`` away from -1 by more than the
    margin decides, provided a refit of ``alpha`` on each half of the
    tail (log terms held fixed) lands on the same side. At the
    boundary ``beta`` decides, and the Raabe number of the condensed
    series must concur. Any disagreement gives ``inconclusive``.
    """
    pol = policy or VerdictPolicy()
    terms = np.asarray(stream.terms if isinstance(stream, TermStream) else stream, dtype=float)
    skipped = stream.skipped if isinstance(stream, TermStream) else 0
    n_all = np.arange(1, len(terms) + 1, dtype=float)
    partial = np.cumsum(terms)
    keep = terms > 0
    if keep.sum() < pol.min_terms:
        return SeriesDiagnostics(
            len(terms), partial, math.nan, math.nan, "inconclusive",
            f"only {int(keep.sum())} positive terms, need {pol.min_terms}", pol, skipped,
        )
    n, t = n_all[keep], terms[keep]
    start = n[-1] ** pol.tail_from
    tail = n >= max(start, 3.0)
    n_t, t_t = n[tail], t[tail]
    # geometric subsample keeps the fit from being dominated by the last decade
    idx = np.unique(np.geomspace(1, len(n_t), 400).astype(int) - 1)
    coef, rms = _tail_fit(n_t[idx], t_t[idx])
    alpha, beta = float(coef[1]), float(coef[2])
    half = len(idx) // 2
    v, basis = _classify(alpha, beta, pol)
    v1, _ = _classify(_power_refit(n_t[idx[:half]], t_t[idx[:half]], coef), beta, pol)
    v2, _ = _classify(_power_refit(n_t[idx[half:]], t_t[idx[half:]], coef), beta, pol)
    if v != "inconclusive" and not (v1 == v2 == v):
        basis += f"; tail halves disagree ({v1}, {v2})"
        v = "inconclusive"
    if v != "inconclusive" and abs(alpha + 1) <= pol.margin:
        R = _condensed_raabe(n, t)
        if math.isnan(R):
            basis += "; too few points for the condensed Raabe check"
            v = "inconclusive"
        else:
            rv = "converges" if R > 1 + pol.raabe_margin else "diverges" if R < 1 - pol.raabe_margin else "inconclusive"
            basis += f"; condensed Raabe number {R:.3f}"
            if rv != v:
                v = "inconclusive"
    if rms > 0.5:
        basis += f"; poor tail fit (rms {rms:.2f})"
        v = "inconclusive"
    return SeriesDiagnostics(len(terms), partial, alpha, beta, v, basis, pol, skipped)


def borel_cantelli_series(table, k: int, C: float, terms: int, policy: VerdictPolicy | None = None) -> SeriesDiagnostics:
    """Verdict on ``sum_n p_n^(-kC)`` over the first ``terms`` primes."""
    if k < 1:
        raise DomainError("k must be >= 1")
    if C <= 0:
        raise DomainError("C must be positive")
    p = _prime_array(table)
    if len(p) < terms:
        raise TruncationError(f"table holds {len(p)} primes, {terms} requested")
    t = np.exp(-k * C * np.log(p[:terms].astype(float)))
    return verdict(TermStream("borel_cantelli", np.arange(1, terms + 1), t, np.zeros(terms, bool), {"k": k, "C": C}), policy)


def critical_exponent(delta: float) -> float:
    """``s* = (1 - delta)/(2 delta - 1)``: the log-power HD series converges iff ``s > s*``."""
    if not 0.5 < delta < 1:
        raise DomainError(f"need 1/2 < delta < 1, got {delta}")
    return (1 - delta) / (2 * delta - 1)
