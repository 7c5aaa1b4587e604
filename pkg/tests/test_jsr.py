import itertools

import numpy as np
import pytest

from delayjsr.errors import AllZeroProductsError, BudgetError
from delayjsr.jsr import (JsrOptions, bounds_by_products, enumerate_products, extremal_polytope,
                          find_smp_candidate, jsr, product, spectral_radius, verify_invariance)
from delayjsr.geometry import equivalence_constant
from delayjsr.lift import lift
from delayjsr.model import DelaySet, Gain, Plant, build_error_system

from conftest import PAPER_A11, PAPER_A15, scalar_case

GOLDEN = (1 + 5 ** 0.5) / 2
PAIR = [np.array([[1.0, 1.0], [0.0, 1.0]]), np.array([[1.0, 0.0], [1.0, 1.0]])]


def brute_bounds(mats, depth):
    lo, up = 0.0, np.inf
    for length in range(1, depth + 1):
        rs, ns = [], []
        for word in itertools.product(range(len(mats)), repeat=length):
            p = np.eye(mats[0].shape[0])
            for i in word:
                p = mats[i] @ p
            if not np.any(p):
                continue
            rs.append(spectral_radius(p))
            ns.append(np.linalg.norm(p, 2))
        if rs:
            lo = max(lo, max(rs) ** (1 / length))
            up = min(up, max(ns) ** (1 / length))
    return lo, up


def test_golden_pair_bracket():
    lo, up = bounds_by_products(PAIR, 12)
    assert lo <= GOLDEN <= up
    assert lo == pytest.approx(GOLDEN, abs=1e-2)


def test_bounds_match_brute_force(rng):
    sys = build_error_system(Plant.scalar(1.1), DelaySet((0, 1)), Gain.from_flat([-0.5, 0.1]))
    mats = lift(sys).matrix_list()
    assert bounds_by_products(mats, 5) == pytest.approx(brute_bounds(mats, 5), rel=1e-12)
    mats = [rng.normal(size=(3, 3)) for _ in range(3)]
    assert bounds_by_products(mats, 4) == pytest.approx(brute_bounds(mats, 4), rel=1e-12)


def test_enumeration_only_nonzero_and_lex():
    sys = build_error_system(*scalar_case(*PAPER_A11))
    L = lift(sys)
    for length, words, prods in enumerate_products(L, 4):
        assert len(words) == 4 * 2 ** (length - 1)
        assert [tuple(w) for w in words] == sorted(tuple(w) for w in words)
        for w, p in zip(words, prods):
            assert np.allclose(p, product(L, w))


def test_budget():
    with pytest.raises(BudgetError):
        list(enumerate_products(PAIR, 12, budget=100))


def test_singleton_and_scaling(rng):
    for _ in range(5):
        a = rng.normal(size=(4, 4))
        lo, up = bounds_by_products([a], 6)
        assert lo == pytest.approx(spectral_radius(a), rel=1e-9)
        est = jsr([a])
        assert est.lower == est.upper == pytest.approx(spectral_radius(a), rel=1e-9)
        assert find_smp_candidate([a], 5) == (0,)
    mats = [rng.normal(size=(3, 3)) for _ in range(2)]
    c = 2.7
    assert np.allclose(bounds_by_products([c * m for m in mats], 6),
                       c * np.array(bounds_by_products(mats, 6)), rtol=1e-10)
    assert find_smp_candidate([c * m for m in mats], 6) == find_smp_candidate(mats, 6)


def test_upper_monotone_in_depth(rng):
    mats = [rng.normal(size=(3, 3)) for _ in range(2)]
    ups = [bounds_by_products(mats, d)[1] for d in range(1, 8)]
    assert all(b <= a + 1e-12 for a, b in zip(ups, ups[1:]))


def test_zero_and_nilpotent():
    z = jsr([np.zeros((2, 2)), np.zeros((2, 2))])
    assert z.lower == z.upper == 0.0
    n = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert bounds_by_products([n, n], 3) == (0.0, 0.0)
    with pytest.raises(AllZeroProductsError):
        find_smp_candidate([n], 1)


def test_extremal_singleton_real():
    a = np.array([[0.5, 1.0], [0.0, 0.3]])
    est = extremal_polytope([a], (0,))
    assert est.certified
    assert est.upper == pytest.approx(0.5 * (1 + 1e-8))
    assert est.sweeps <= 20


def test_extremal_golden_pair():
    scaled = [m / GOLDEN for m in PAIR]
    est = extremal_polytope(scaled, (0, 1))
    assert est.certified
    assert abs(est.upper - 1) <= 1e-6
    assert not verify_invariance(scaled, est.extremal, est.rate / (1 + 1e-8) * (1 + 1e-7))


@pytest.mark.parametrize("case", [PAPER_A11, PAPER_A15])
def test_paper_systems_certified(case, rng):
    sys = build_error_system(*scalar_case(*case))
    L = lift(sys)
    est = jsr(L)
    assert est.certified and est.lower <= est.upper < 1
    # independent re-verification of the polytope
    assert not verify_invariance(L, est.extremal, est.rate, tol=1e-7)
    # random admissible lifted products never beat the upper bound; the
    # lifted product of an open path is nilpotent, a closed walk keeps its spectrum
    for _ in range(50):
        w = sys.words[rng.integers(4)]
        p = np.eye(L.dim)
        for _ in range(20):
            p = L.matrices[w] @ p
            succ = sys.graph[w]
            w = succ[rng.integers(len(succ))]
        assert spectral_radius(p) ** (1 / 20) <= est.upper * (1 + 1e-8)
        assert np.linalg.norm(p, 2) <= equivalence_constant(est.extremal).c * est.rate ** 20 * (1 + 1e-8)


def test_candidate_consistent_with_certificate():
    L = lift(build_error_system(*scalar_case(*PAPER_A11)))
    word = find_smp_candidate(L, 6)
    val = spectral_radius(product(L, word)) ** (1 / len(word))
    assert val <= jsr(L).upper < 1


def test_single_delay_lift_is_spectral_radius():
    sys = build_error_system(Plant.scalar(1.1), DelaySet((1,)), Gain.from_flat([-0.6, 0.1]))
    est = jsr(lift(sys))
    rho = spectral_radius(sys.matrices[(1, 1)])
    assert est.certified and est.lower == est.upper == pytest.approx(rho, rel=1e-9)


def test_upper_covers_random_sets(rng):
    for _ in range(4):
        mats = [rng.normal(size=(3, 3)) for _ in range(2)]
        est = jsr(mats, JsrOptions(depth_max=8))
        assert est.lower <= est.upper
        if est.certified:
            assert not verify_invariance(mats, est.extremal, est.rate, tol=1e-7)
