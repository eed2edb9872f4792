import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from primecantor.errors import DomainError, OutOfRangeError
from primecantor.gauss_ifs import (
    EMPTY,
    PeriodicWord,
    Word,
    coding_point,
    contraction_norm,
    cylinder,
    cylinder_diameter,
    determinant,
    enumerate_wk,
    extend,
    parse_word,
    phi,
    phi_inverse,
    point_of_prefix,
    shift,
)

letters = st.lists(st.integers(1, 500), min_size=1, max_size=30)
letters2 = st.lists(st.integers(2, 500), min_size=1, max_size=30)


def compose(word, x):
    """Direct oracle: apply phi_{a_n} first, phi_{a_1} last."""
    x = Fraction(x)
    for a in reversed(word):
        x = 1 / (a + x)
    return x


def test_extend_examples():
    w = extend(EMPTY, 2)
    assert (w.q_prev, w.q) == (1, 2)
    assert contraction_norm(w) == Fraction(1, 4)
    w = extend(w, 3)
    assert (w.q_prev, w.q) == (2, 7)
    assert contraction_norm(w) == Fraction(1, 49)
    assert extend(w, 2).q == 16
    with pytest.raises(DomainError):
        extend(EMPTY, 0)


def test_single_letter_norm():
    for a in (1, 2, 7, 10**6):
        assert contraction_norm(Word.from_letters([a])) == Fraction(1, a * a)


def test_empty_word_is_identity():
    assert contraction_norm(EMPTY) == 1
    assert phi(EMPTY, Fraction(2, 7)) == Fraction(2, 7)
    assert cylinder(EMPTY).lo == 0 and cylinder(EMPTY).hi == 1


def test_cylinder_examples():
    c = cylinder(Word.from_letters([2]))
    assert (c.lo, c.hi, c.diameter) == (Fraction(1, 3), Fraction(1, 2), Fraction(1, 6))
    c = cylinder(Word.from_letters([2, 3]))
    # phi_2(phi_3(0)) = 3/7 and phi_2(phi_3(1)) = 4/9
    assert (c.lo, c.hi) == (Fraction(3, 7), Fraction(4, 9))
    assert c.diameter == Fraction(1, 63) == cylinder_diameter(Word.from_letters([2, 3]))
    assert cylinder(Word.from_letters([2])).contains_interval(c)


def test_shift_examples():
    assert shift(Word.from_letters([2, 3])).letters == (3,)
    assert shift(Word.from_letters([5])) == EMPTY
    with pytest.raises(DomainError):
        shift(EMPTY)


def test_parse_word():
    assert parse_word("2,3,5").letters == (2, 3, 5)
    assert parse_word("") == EMPTY
    assert str(parse_word("7, 11")) == "7,11"


def test_prefix_bounds():
    w = Word.from_letters([2, 3, 5])
    assert w.prefix(2).letters == (2, 3)
    with pytest.raises(OutOfRangeError):
        w.prefix(4)


def test_coding_point_examples():
    x, err = coding_point(Word.from_letters([2]), 1)
    assert x == Fraction(1, 2) and err == Fraction(1, 4)
    x, err = coding_point(PeriodicWord((), (2,)), 30)
    assert brackets_root(lambda t: t * t + 2 * t - 1, x, err)  # sqrt(2) - 1
    with pytest.raises(OutOfRangeError):
        coding_point(Word.from_letters([2]), 2)


def brackets_root(f, x, err):
    """Exact test that the monotone ``f`` changes sign on ``[x - err, x + err]``."""
    return f(x - err) * f(x + err) <= 0


def test_coding_point_period_23():
    # x = 1/(2 + 1/(3 + x))  <=>  2x^2 + 6x - 3 = 0, root (sqrt(15) - 3)/2
    quad = lambda t: 2 * t * t + 6 * t - 3  # noqa: E731
    for depth in (8, 21):
        x, err = coding_point(PeriodicWord((), (2, 3)), depth)
        assert brackets_root(quad, x, err)
    assert float(x) == pytest.approx((math.sqrt(15) - 3) / 2, rel=1e-15)


def test_point_of_prefix_lies_in_cylinder():
    w = Word.from_letters([3, 5, 7])
    x = point_of_prefix(w, 2)
    assert x in cylinder(w)
    # it approximates the point coded by 3,5,7,2,2,2,...
    deep = PeriodicWord((3, 5, 7), (2,))
    y, err = coding_point(deep, 60)
    assert abs(x - y) <= err + cylinder_diameter(w) / 10**30


@settings(max_examples=200)
@given(letters)
def test_determinant_identity(ls):
    w = Word.from_letters(ls)
    assert determinant(w) == (-1) ** len(ls)


@settings(max_examples=200)
@given(letters2)
def test_distortion_ratio(ls):
    w = Word.from_letters(ls)
    ratio = cylinder(w).diameter / contraction_norm(w)
    assert ratio == Fraction(w.q, w.q + w.q_prev)
    assert Fraction(1, 2) < ratio <= 1


@given(letters)
def test_distortion_ratio_with_letter_one(ls):
    # q_{n-1} = q_n only for the one-letter word (1), where the ratio is 1/2
    w = Word.from_letters(ls)
    ratio = cylinder(w).diameter / contraction_norm(w)
    assert Fraction(1, 2) <= ratio <= 1
    assert (ratio == Fraction(1, 2)) == (ls == [1])


@settings(max_examples=200)
@given(letters, letters)
def test_quasi_multiplicativity(u, v):
    wu, wv, wuv = Word.from_letters(u), Word.from_letters(v), Word.from_letters(u + v)
    assert wuv == wu + wv
    f = contraction_norm(wuv) / (contraction_norm(wu) * contraction_norm(wv))
    assert Fraction(1, 4) <= f <= 1


@settings(max_examples=200)
@given(letters)
def test_cylinder_matches_composition(ls):
    w = Word.from_letters(ls)
    ends = sorted([compose(ls, 0), compose(ls, 1)])
    c = cylinder(w)
    assert [c.lo, c.hi] == ends
    assert phi(w, Fraction(1, 3)) == compose(ls, Fraction(1, 3))


@settings(max_examples=200)
@given(letters, st.fractions(0, 1))
def test_phi_inverse_round_trip(ls, x):
    w = Word.from_letters(ls)
    assert phi_inverse(w, phi(w, x)) == x


@given(letters, st.integers(1, 500), st.integers(1, 500))
def test_nesting_and_disjoint_siblings(ls, a, b):
    w = Word.from_letters(ls)
    ca, cb = cylinder(extend(w, a)), cylinder(extend(w, b))
    assert cylinder(w).contains_interval(ca)
    if a != b:
        assert ca.hi <= cb.lo or cb.hi <= ca.lo


@given(letters)
def test_continuant_growth(ls):
    w = Word.from_letters(ls)
    fib = [1, 1]
    while len(fib) <= len(ls):
        fib.append(fib[-1] + fib[-2])
    assert w.q >= w.q_prev >= 1
    assert w.q >= fib[len(ls)]


def test_shift_distortion():
    w = Word.from_letters([7, 2, 11, 3])
    head, rest = Word.from_letters([7]), shift(w)
    f = contraction_norm(w) / (contraction_norm(head) * contraction_norm(rest))
    assert Fraction(1, 4) <= f <= 1


def _all_words(alphabet, max_len):
    for n in range(max_len + 1):
        yield from itertools.product(alphabet, repeat=n)


def test_wk_example():
    b = enumerate_wk([2, 3], 4, 1)
    assert [w.letters for w in b.members] == [(2,), (3,)]
    assert b.complete and not b.ambiguous
    assert [w.letters for w in enumerate_wk([2, 3], 4, 0).members] == [()]


@pytest.mark.parametrize("lam,k", [(2, 3), (4, 2), (Fraction(5, 2), 4), (3, 5)])
def test_wk_matches_exhaustive_scan(lam, k):
    alphabet = [2, 3, 5]
    lam = Fraction(lam)
    expect = sorted(
        w for w in _all_words(alphabet, 8)
        if lam ** -(k + 1) < contraction_norm(Word.from_letters(w)) <= lam**-k
    )
    got = [w.letters for w in enumerate_wk(alphabet, lam, k).members]
    assert got == expect


def test_wk_buckets_partition():
    alphabet = [2, 3]
    seen = {}
    for k in range(8):
        for w in enumerate_wk(alphabet, 2, k).members:
            assert w.letters not in seen
            seen[w.letters] = k
    for w in _all_words(alphabet, 3):
        if contraction_norm(Word.from_letters(w)) > Fraction(1, 2**8):
            assert w in seen


def test_wk_float_lambda_flags_edges():
    # sqrt(2) as a float: q^2 = 4 sits within the guard band of lam^4
    b = enumerate_wk([2], math.sqrt(2), 3)
    assert b.members and [w.letters for w in b.ambiguous] == [(2,)]


def test_wk_cap():
    b = enumerate_wk(list(range(2, 40)), 2, 12, cap=5)
    assert not b.complete and len(b.members) == 5


def test_wk_rejects_bad_lambda():
    with pytest.raises(DomainError):
        enumerate_wk([2], 1, 0)
    with pytest.raises(DomainError):
        enumerate_wk([2], 2, -1)
