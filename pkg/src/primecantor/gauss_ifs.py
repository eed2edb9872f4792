"""Exact arithmetic for the Gauss IFS ``phi_a(x) = 1/(a + x)``.

A word ``w = (a_1, ..., a_n)`` stands for ``phi_w = phi_{a_1} o ... o phi_{a_n}``,
which is the Moebius map

    phi_w(x) = (p_n + p_{n-1} x) / (q_n + q_{n-1} x)

built from the continuants ``p``/``q``. Everything here is exact:
continuants are Python ints and interval endpoints are Fractions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from .errors import DomainError, OutOfRangeError


@dataclass(frozen=True)
class Word:
    """Finite word with cached continuants ``(p_{n-1}, p_n, q_{n-1}, q_n)``."""

    letters: tuple[int, ...] = ()
    p_prev: int = 1
    p: int = 0
    q_prev: int = 0
    q: int = 1

    def __len__(self) -> int:
        return len(self.letters)

    def __str__(self) -> str:
        return ",".join(map(str, self.letters))

    @classmethod
    def from_letters(cls, letters: Iterable[int]) -> "Word":
        w = EMPTY
        for a in letters:
            w = extend(w, a)
        return w

    @property
    def ratio(self) -> Fraction:
        """``q_{n-1} / q_n``, the state used by the transfer operator."""
        return Fraction(self.q_prev, self.q)

    def prefix(self, n: int) -> "Word":
        if not 0 <= n <= len(self):
            raise OutOfRangeError(f"prefix length {n} outside 0..{len(self)}")
        return Word.from_letters(self.letters[:n])

    def __add__(self, other: "Word | Sequence[int]") -> "Word":
        letters = other.letters if isinstance(other, Word) else tuple(other)
        w = self
        for a in letters:
            w = extend(w, a)
        return w


EMPTY = Word()


def parse_word(text: str) -> Word:
    """Parse the literal syntax ``"2,3,5"``; an empty string is the empty word."""
    text = text.strip()
    if not text:
        return EMPTY
    return Word.from_letters(int(tok) for tok in text.split(","))


def extend(word: Word, letter: int) -> Word:
    """Append ``letter``: one step of the continuant recursion."""
    letter = int(letter)
    if letter < 1:
        raise DomainError(f"letters must be >= 1, got {letter}")
    return Word(
        word.letters + (letter,),
        word.p,
        letter * word.p + word.p_prev,
        word.q,
        letter * word.q + word.q_prev,
    )


def shift(word: Word) -> Word:
    """Drop the first letter (continuants are rebuilt)."""
    if not word.letters:
        raise DomainError("cannot shift the empty word")
    return Word.from_letters(word.letters[1:])


def determinant(word: Word) -> int:
    """``p_{n-1} q_n - p_n q_{n-1}``; always ``(-1)^n``."""
    return word.p_prev * word.q - word.p * word.q_prev


def contraction_norm(word: Word) -> Fraction:
    """``sup |phi_w'|`` on ``[0, 1]``, which is ``1/q_n^2`` (attained at 0).

    The empty word is the identity map, norm 1.
    """
    return Fraction(1, word.q * word.q)


def phi(word: Word, x) -> Fraction:
    """Evaluate ``phi_w(x)`` exactly."""
    x = Fraction(x)
    return (word.p + word.p_prev * x) / (word.q + word.q_prev * x)


def phi_inverse(word: Word, y) -> Fraction:
    """Inverse Moebius map of ``phi_w``; only meaningful for ``y`` in range."""
    y = Fraction(y)
    den = word.p_prev - y * word.q_prev
    if den == 0:
        raise DomainError("point is the pole of the inverse map")
    return (y * word.q - word.p) / den


@dataclass(frozen=True)
class CylinderInterval:
    lo: Fraction
    hi: Fraction

    @property
    def diameter(self) -> Fraction:
        return self.hi - self.lo

    def __contains__(self, x) -> bool:
        return self.lo <= Fraction(x) <= self.hi

    def contains_interval(self, other: "CylinderInterval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi


def cylinder(word: Word) -> CylinderInterval:
    """``[w] = phi_w([0, 1])`` with endpoints ``p_n/q_n`` and ``(p_n+p_{n-1})/(q_n+q_{n-1})``."""
    a = Fraction(word.p, word.q)
    b = Fraction(word.p + word.p_prev, word.q + word.q_prev)
    return CylinderInterval(min(a, b), max(a, b))


def cylinder_diameter(word: Word) -> Fraction:
    """Closed form ``1 / (q_n (q_n + q_{n-1}))``."""
    return Fraction(1, word.q * (word.q + word.q_prev))


@dataclass(frozen=True)
class PeriodicWord:
    """Infinite word ``prefix + period + period + ...``."""

    prefix: tuple[int, ...]
    period: tuple[int, ...]

    def __post_init__(self):
        if not self.period:
            raise DomainError("period must be non-empty")

    def letters(self) -> Iterator[int]:
        return itertools.chain(self.prefix, itertools.cycle(self.period))

    def take(self, n: int) -> Word:
        return Word.from_letters(itertools.islice(self.letters(), n))


def coding_point(word: Word | PeriodicWord, depth: int) -> tuple[Fraction, Fraction]:
    """Convergent ``p_n/q_n`` of depth ``n`` and the bound ``1/q_n^2`` on its
    distance to the coded point ``pi(w)``."""
    if isinstance(word, PeriodicWord):
        w = word.take(depth)
    else:
        if depth > len(word):
            raise OutOfRangeError(f"depth {depth} exceeds the {len(word)} available letters")
        w = word.prefix(depth)
    return Fraction(w.p, w.q), Fraction(1, w.q * w.q)


def point_of_prefix(word: Word, tail_letter: int, min_depth: int = 40) -> Fraction:
    """A rational stand-in for ``pi(word + tail_letter^infinity)``.

    Uses a convergent deep enough that its error ``1/q^2`` is below
    ``1e-30`` times the diameter of ``[word]``.
    """
    per = PeriodicWord(word.letters, (tail_letter,))
    target = cylinder_diameter(word) * Fraction(1, 10**30)
    depth = len(word) + min_depth
    while True:
        x, err = coding_point(per, depth)
        if err < target:
            return x
        depth += min_depth


@dataclass
class WkBucket:
    """Words with ``lam^-(k+1) < ||phi_w'|| <= lam^-k``."""

    k: int
    lam: Fraction
    members: list[Word] = field(default_factory=list)
    complete: bool = True
    ambiguous: list[Word] = field(default_factory=list)


def _in_bucket(q2: int, lo_pow: Fraction, hi_pow: Fraction) -> int:
    # norm = 1/q2; returns -1 if norm > lam^-k, 0 inside, 1 if norm <= lam^-(k+1)
    if q2 < lo_pow:
        return -1
    if q2 >= hi_pow:
        return 1
    return 0


def enumerate_wk(letters: Sequence[int], lam, k: int, cap: int = 100_000, guard: float = 1e-12) -> WkBucket:
    """Depth-first enumeration of ``W_k`` over a finite alphabet.

    Membership is decided exactly for the rational value of ``lam``
    (floats are converted exactly). When ``lam`` was given as a
    non-integer float, members whose ``q^2`` lies within relative
    ``guard`` of a bucket edge are additionally listed as ambiguous,
    since the float may only approximate the intended constant.
    A prefix whose norm is already ``<= lam^-(k+1)`` is never extended.
    """
    if k < 0:
        raise DomainError("k must be >= 0")
    lam_q = Fraction(lam)
    if lam_q <= 1:
        raise DomainError(f"lambda must exceed 1, got {lam}")
    fuzzy = isinstance(lam, float) and not float(lam).is_integer()
    lo_pow = lam_q**k  # norm <= lam^-k  <=>  q^2 >= lam^k
    hi_pow = lam_q ** (k + 1)  # norm > lam^-(k+1)  <=>  q^2 < lam^(k+1)
    alphabet = sorted(set(int(a) for a in letters))
    bucket = WkBucket(k, lam_q)

    def near_edge(q2: int) -> bool:
        return any(abs(q2 - float(e)) <= guard * float(e) for e in (lo_pow, hi_pow))

    stack = [EMPTY]
    while stack:
        w = stack.pop()
        q2 = w.q * w.q
        where = _in_bucket(q2, lo_pow, hi_pow)
        if where == 0:
            if len(bucket.members) >= cap:
                bucket.complete = False
                return bucket
            bucket.members.append(w)
            if fuzzy and near_edge(q2):
                bucket.ambiguous.append(w)
        if where == 1:
            continue
        children = []
        for a in alphabet:
            child = extend(w, a)
            if child.q * child.q >= hi_pow:
                break  # larger letters only shrink the norm further
            children.append(child)
        stack.extend(reversed(children))
    bucket.members.sort(key=lambda w: w.letters)
    return bucket
