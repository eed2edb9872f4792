"""Acceptance criteria 1-10. Each test prints one PASS/FAIL line and then asserts.

Tolerances and bands are the contract values; nothing here is loosened to
make a criterion pass.
"""

import itertools
import json
import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE
from inner_cases import draw
from oracles import inner_max_grid
from primecantor.cli import main
from primecantor.conformal import GMF_C, annulus_ratio, global_measure_formula, tail_measure
from primecantor.cramer_model import rk_on_model, simulate
from primecantor.dimension import TruncatedAlphabet, partition_sum
from primecantor.errors import PrefixTooShort
from primecantor.gauss_ifs import Word, contraction_norm, cylinder, determinant
from primecantor.primes import rk_records, sieve
from primecantor.series_lab import (
    DimensionFunctionSpec,
    borel_cantelli_series,
    critical_exponent,
    hd_series_terms,
    inner_max,
    verdict,
)


def report(capsys, n, ok, detail):
    ACCEPTANCE[n] = (ok, detail)
    with capsys.disabled():
        print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def compose_ends(letters):
    ends = []
    for x in (Fraction(0), Fraction(1)):
        for a in reversed(letters):
            x = 1 / (a + x)
        ends.append(x)
    return sorted(ends)


def test_criterion_01_delta(capsys):
    lo_band, hi_band, budget = 0.654, 0.660, 300.0
    t0 = time.perf_counter()
    code = main(["delta", "--alphabet", "primes", "--trunc", "1e5", "--tol", "1e-4"])
    wall = time.perf_counter() - t0
    out = json.loads(capsys.readouterr().out)
    d = out["delta"]
    ok = code == 0 and lo_band <= d <= hi_band and wall <= budget
    report(capsys, 1, ok, f"delta = {d:.6f} (bracket {out['bracket'][0]:.6f}..{out['bracket'][1]:.6f}), "
                          f"band [{lo_band}, {hi_band}], {wall:.1f} s")


def test_criterion_02_exact_arithmetic(capsys):
    rng = random.Random(20240202)
    letters = sieve(10**4).primes.tolist()
    bad = []
    for _ in range(10**4):
        w = Word.from_letters([rng.choice(letters) for _ in range(rng.randint(1, 30))])
        ratio = cylinder(w).diameter / contraction_norm(w)
        if determinant(w) != (-1) ** len(w.letters):
            bad.append(("determinant", w.letters))
        if not (ratio == Fraction(w.q, w.q + w.q_prev) and Fraction(1, 2) < ratio <= 1):
            bad.append(("distortion", w.letters))
        cut = rng.randint(0, len(w.letters))
        u, v = Word.from_letters(w.letters[:cut]), Word.from_letters(w.letters[cut:])
        f = contraction_norm(w) / (contraction_norm(u) * contraction_norm(v))
        if not Fraction(1, 4) <= f <= 1:
            bad.append(("quasi-multiplicativity", w.letters))
    report(capsys, 2, not bad, f"10^4 words over primes <= 10^4, length 1..30: {len(bad)} violations")


def test_criterion_03_oracles(capsys):
    worst = 0.0
    for letters in ([2], [1, 2], [2, 3, 5], [2, 3, 5, 7], [3, 4, 7, 11]):
        alpha = TruncatedAlphabet.explicit(letters)
        for n in range(1, 9):
            for s in (0.4, 0.8, 1.3):
                z = math.fsum(Word.from_letters(w).q ** (-2 * s) for w in itertools.product(letters, repeat=n))
                worst = max(worst, abs(math.exp(partition_sum(alpha, n, s)) / z - 1))
    rng = random.Random(303)
    mismatches = 0
    for _ in range(10**3):
        ls = [rng.randint(1, 10**4) for _ in range(rng.randint(1, 30))]
        c = cylinder(Word.from_letters(ls))
        mismatches += [c.lo, c.hi] != compose_ends(ls)
    ok = worst <= 1e-12 and mismatches == 0
    report(capsys, 3, ok, f"Z_n worst relative error {worst:.2e} (limit 1e-12); endpoint mismatches {mismatches}/1000")


def test_criterion_04_hd_threshold(capsys, delta_1e5):
    s_star = critical_exponent(delta_1e5)
    verdicts = {}
    for lam in (2, 10):
        for f in (0.9, 1.1):
            spec = DimensionFunctionSpec.log_power(f * s_star, delta_1e5)
            verdicts[(lam, f)] = verdict(hd_series_terms(spec, lam, delta_1e5, 10**5)).verdict
    ok = all(verdicts[(lam, 0.9)] == "diverges" and verdicts[(lam, 1.1)] == "converges" for lam in (2, 10))
    detail = ", ".join(f"lam={lam} {f}s*: {v}" for (lam, f), v in verdicts.items())
    report(capsys, 4, ok, f"s* = {s_star:.5f} at delta = {delta_1e5:.6f}; {detail}")


def test_criterion_05_gap_record(capsys):
    budget = 120.0
    t0 = time.perf_counter()
    table = sieve(10**8, threads=4)
    rec = rk_records(table, 1)[-1]
    wall = time.perf_counter() - t0
    target = 34 / math.log(1327) ** 2
    ok = rec.p_n == 1327 and rec.window_min == 34 and wall <= budget
    report(capsys, 5, ok, f"record {rec.normalized:.5f} at p_n = {rec.p_n} (gap {rec.window_min}); "
                          f"expected {target:.5f} at 1327 (gap 34); {wall:.1f} s")


def test_criterion_06_borel_cantelli(capsys):
    terms = 10**6
    table = sieve(16_000_000)
    got = {}
    for k in (1, 2):
        for c in (0.8, 1.25):
            got[(k, c)] = borel_cantelli_series(table, k, c / k, terms).verdict
    ok = all(got[(k, 0.8)] == "diverges" and got[(k, 1.25)] == "converges" for k in (1, 2))
    detail = ", ".join(f"k={k} C={c}/k: {v}" for (k, c), v in got.items())
    report(capsys, 6, ok, f"{terms} terms; {detail}")


def test_criterion_07_cramer(capsys):
    r1, r2 = [], []
    for seed in range(20):
        rset = simulate(10**7, seed, threads=4)
        r1.append(rk_on_model(rset, 1)[-1].normalized)
        r2.append(rk_on_model(rset, 2)[-1].normalized)
    m1, m2 = float(np.median(r1)), float(np.median(r2))
    ok = 0.5 <= m1 <= 1.5 and m2 < m1
    report(capsys, 7, ok, f"20 seeds at 10^7: median R1 = {m1:.4f} (band [0.5, 1.5]), median R2 = {m2:.4f}")


def test_criterion_08_gmf_sandwich(capsys, model_1e4):
    rng = random.Random(2024)
    letters = model_1e4.alphabet.letters.tolist()
    done = below = contained = 0
    worst = 0.0
    while done < 100:
        w = Word.from_letters([rng.choice(letters[: rng.choice([10, 100, 1229])]) for _ in range(14)])
        r = Fraction(1, int(10 ** rng.uniform(1, 9)))
        try:
            g = global_measure_formula(model_1e4, w, r)
        except PrefixTooShort:
            continue
        done += 1
        below += g.lower.value <= g.ball.upper
        contained += g.contained
        worst = max(worst, g.containment_factor)
    ok = below == 100 and contained == 100
    report(capsys, 8, ok, f"100 samples: M <= ball upper band {below}/100, "
                          f"[w|n+1] in B(x, {GMF_C} r) {contained}/100 (largest factor {worst:.3f})")


def test_criterion_09_asymptotic_bands(capsys, model_1e5):
    radii = np.geomspace(1e-1, 1e-4, 13)
    tails = np.array([tail_measure(model_1e5, float(r)).ratio for r in radii])
    ann = np.array([annulus_ratio(model_1e5, float(r), 4.0).ratio for r in radii])
    t_spread = tails.max() / tails.min()
    a_spread = ann.max() / ann.min() if ann.min() > 0 else math.inf
    ok = t_spread <= 10 and a_spread <= 10
    report(capsys, 9, ok, f"tail ratio in [{tails.min():.3f}, {tails.max():.3f}] (spread {t_spread:.2f}); "
                          f"annulus ratio (lambda 4) in [{ann.min():.3f}, {ann.max():.3f}] (spread {a_spread:.2f})")


def test_criterion_10_inner_max(capsys, table_1e6, delta_1e5):
    primes = table_1e6.primes
    is_prime = np.zeros(2001, bool)
    is_prime[primes[primes <= 2000]] = True
    letters = [int(p) for p in primes if 3 <= p <= 1500]
    rng = random.Random(1010)
    worst = 0.0
    for i in range(10**3):
        family, param, alpha, a = draw(rng, i, delta_1e5, letters)
        got = inner_max(DimensionFunctionSpec(family, param, delta_1e5), alpha, delta_1e5, primes, a).value
        want = inner_max_grid(family, param, delta_1e5, alpha, is_prime, a)
        worst = max(worst, abs(got - want) / abs(want))
    report(capsys, 10, worst <= 1e-10, f"10^3 instances, worst relative difference {worst:.2e} (limit 1e-10)")
