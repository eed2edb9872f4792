import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from primecantor.cramer_model import (
    BLOCK,
    expected_count,
    membership,
    rk_on_model,
    simulate,
)
from primecantor.errors import DomainError
from primecantor.primes import PrimeTable, rk_records

SET_1E6 = simulate(10**6, 11)


def test_deterministic_under_seed():
    a = simulate(300_000, 4)
    b = simulate(300_000, 4, threads=4)
    assert np.array_equal(a.members, b.members)
    assert not np.array_equal(a.members, simulate(300_000, 5).members)


def test_prefix_stability():
    # a shorter run is a prefix of a longer one with the same seed
    short = simulate(100_000, 11).members
    assert np.array_equal(SET_1E6.members[: len(short)], short)


@settings(max_examples=100)
@given(st.integers(2, 10**6))
def test_membership_matches_bulk(n):
    i = np.searchsorted(SET_1E6.members, n)
    in_bulk = i < len(SET_1E6.members) and SET_1E6.members[i] == n
    assert membership(11, n) == in_bulk


def test_membership_block_order_independent():
    probe = [BLOCK * 7 + 5, 3, BLOCK * 2 - 1, BLOCK * 2, 999_983]
    forward = [membership(3, n) for n in probe]
    backward = [membership(3, n) for n in reversed(probe)][::-1]
    assert forward == backward


def test_members_sorted_and_bounded():
    m = SET_1E6.members
    assert m[0] == 2 and m[-1] <= 10**6
    assert np.all(np.diff(m) > 0)
    assert membership(11, 2) and not membership(11, 1)


def test_count_within_five_sigma():
    lo, hi = 200_000, 400_000
    mean, var = expected_count(lo, hi)
    got = int(((SET_1E6.members >= lo) & (SET_1E6.members <= hi)).sum())
    assert abs(got - mean) <= 5 * math.sqrt(var)


def test_seed_averaged_density():
    counts = [len(simulate(200_000, s)) for s in range(8)]
    mean, var = expected_count(3, 200_000)
    assert abs(np.mean(counts) - 1 - mean) <= 5 * math.sqrt(var / 8)


def test_tiny_limit():
    assert simulate(3, 0).members.tolist() in ([2], [2, 3])
    with pytest.raises(DomainError):
        simulate(2, 0)


def test_records_share_the_prime_path():
    recs = rk_on_model(SET_1E6, 1)
    assert recs == rk_records(PrimeTable.from_values(SET_1E6.members, 10**6), 1)
    vals = [r.normalized for r in recs]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert all(r.p_n >= 1000 for r in recs)
