import itertools
import warnings

import numpy as np
import pytest

from delayjsr.bound import (BoundOptions, greedy_prefix, polytope_series, polytope_term,
                            prefix_term, tail_term, total_bound)
from delayjsr.errors import BudgetError, PropagationExplosionError, UnstableError
from delayjsr.geometry import EquivalenceConstant
from delayjsr.lift import lift
from delayjsr.model import DelaySet, Gain, Plant, build_error_system, error_trajectory, simulate

from conftest import PAPER_A11, PAPER_A15, scalar_case


def eps_sq_norms(e, d_max):
    """||eps(k)||^2 from a scalar error sequence, zero history before k=0."""
    e = np.concatenate([np.zeros(2 * d_max), np.asarray(e).ravel()])
    w = 2 * d_max + 1
    return np.array([np.sum(e[k:k + w] ** 2) for k in range(len(e) - w + 1)])


def brute_prefix(plant, delays, gain, tau):
    best = 0.0
    for sigma in itertools.product(delays.delays, repeat=tau):
        e = simulate(plant, delays, gain, sigma, [1.0])
        best = max(best, eps_sq_norms(e, delays.d_max).sum())
    return best


@pytest.mark.parametrize("case", [PAPER_A11, PAPER_A15, (0.8, (-0.3, 0.4))])
def test_prefix_matches_brute_force(case):
    plant, delays, gain = scalar_case(*case)
    sys = build_error_system(plant, delays, gain)
    res = prefix_term(sys, sys.initial_state([1.0]), 8)
    assert res.value == pytest.approx(brute_prefix(plant, delays, gain, 8), rel=1e-12)
    assert res.worst_path.sum() == pytest.approx(res.value, rel=1e-12)
    assert np.all(res.worst_path <= res.per_k_max + 1e-15)
    assert greedy_prefix(sys, sys.initial_state([1.0]), 8) <= res.value + 1e-12


def test_prefix_dmax2_brute_force():
    plant, delays, gain = Plant.scalar(0.9), DelaySet((0, 2)), Gain.from_flat([-0.4, 0.2, 0.1])
    sys = build_error_system(plant, delays, gain)
    res = prefix_term(sys, sys.initial_state([1.0]), 6)
    assert res.value == pytest.approx(brute_prefix(plant, delays, gain, 6), rel=1e-12)


def test_prefix_open_loop_closed_form():
    sys = build_error_system(*scalar_case(1.1, (0, 0)))
    res = prefix_term(sys, sys.initial_state([1.0]), 9)
    # eps(k) holds e(k), e(k-1), e(k-2) with e(j) = 1.1^j
    expected = sum(1.1 ** (2 * j) * min(3, 10 - j) for j in range(10))
    assert res.value == pytest.approx(expected, rel=1e-12)


def test_prefix_single_delay_is_lti():
    plant, delays, gain = Plant.scalar(1.1), DelaySet((1,)), Gain.from_flat([-0.5, 0.1])
    sys = build_error_system(plant, delays, gain)
    res = prefix_term(sys, sys.initial_state([1.0]), 12)
    n = sys.matrices[(1, 1)]
    x, total = sys.initial_state([1.0]), 1.0
    for _ in range(12):
        x = n @ x
        total += x @ x
    assert res.value == pytest.approx(total, rel=1e-13)


def test_prefix_budget():
    sys = build_error_system(*scalar_case(*PAPER_A11))
    with pytest.raises(BudgetError):
        prefix_term(sys, sys.initial_state([1.0]), 12, budget=100)


def test_tail_formula():
    assert tail_term(1.0, 0.5, 0, [1.0]) == pytest.approx(1 / 3)
    c = EquivalenceConstant(3.0, 1.5, 2.0)
    assert tail_term(c, 0.7, 11, [1, 1]) == pytest.approx(tail_term(c, 0.7, 10, [1, 1]) * 0.49)
    with pytest.raises(UnstableError):
        tail_term(1.0, 1.0, 5, [1.0])


def test_polytope_term_empty_range():
    L = lift(build_error_system(*scalar_case(*PAPER_A11)))
    assert polytope_term(L, [1, 0, 0], 5, 5, 0.6) == (0.0, {}, {})


def test_polytope_dominates_exact_per_k():
    sys = build_error_system(*scalar_case(*PAPER_A11))
    L = lift(sys)
    eps0 = sys.initial_state([1.0])
    exact = prefix_term(sys, eps0, 9).per_k_max
    for cumulative in (True, False):
        vals, _ = polytope_series(L, eps0, 9, 0.63, cumulative=cumulative)
        assert np.all(vals >= exact * (1 - 1e-12))
    # scaling by alpha^k only is never smaller for alpha < 1 past k = 0
    v2, _ = polytope_series(L, eps0, 9, 0.63)
    v1, _ = polytope_series(L, eps0, 9, 0.63, power=1)
    assert np.all(v1 >= v2 - 1e-15)


def test_propagation_cap():
    L = lift(build_error_system(*scalar_case(*PAPER_A11)))
    with pytest.raises(PropagationExplosionError):
        polytope_series(L, [1, 0, 0], 20, 0.63, vertex_cap=10)


def test_alpha_warning():
    L = lift(build_error_system(*scalar_case(*PAPER_A11)))
    with pytest.warns(RuntimeWarning):
        polytope_term(L, [1, 0, 0], 2, 4, 0.7, rho_lower=0.639)


def test_open_loop_unstable():
    with pytest.raises(UnstableError):
        total_bound(*scalar_case(1.1, (0, 0)))


def test_boundary_tau_eta_zero():
    rep = total_bound(*scalar_case(0.5, (0, 0)), tau=0, eta=0)
    assert len(rep.series) == 1
    assert rep.term_prefix == 1.0 and rep.term_polytope == 0.0
    assert rep.total == pytest.approx((1 + rep.term_tail) / 3)
    c, r = rep.equivalence.c, rep.rate
    assert rep.term_tail == pytest.approx(c ** 2 * r ** 2 / (1 - r ** 2))


@pytest.fixture(scope="module")
def a11_report():
    return total_bound(*scalar_case(*PAPER_A11))


def test_report_structure(a11_report):
    r = a11_report
    assert r.normalization == 3
    assert r.total == pytest.approx((r.term_prefix + r.term_polytope + r.term_tail) / 3)
    assert r.alpha == pytest.approx(r.rho_lower / 1.01)
    assert [row.source for row in r.series] == ["prefix"] * 10 + ["polytope"] * 41
    assert sum(row.exact_sq_norm for row in r.series[:10]) == pytest.approx(r.term_prefix)
    assert r.vertex_counts[-1][1] < 2000


def test_soundness_sampling(a11_report, rng):
    plant, delays, gain = scalar_case(*PAPER_A11)
    sys = build_error_system(plant, delays, gain)
    for _ in range(100):
        sigma = rng.choice([0, 1], size=50)
        cost = eps_sq_norms(simulate(plant, delays, gain, sigma, [1.0]), 1).sum() / 3
        assert cost <= a11_report.total + 1e-8
        traj = error_trajectory(sys, sigma, [1.0])
        assert np.sum(traj ** 2) / 3 == pytest.approx(cost, rel=1e-10)


def test_strict_alpha_mode_is_larger():
    plant, delays, gain = scalar_case(*PAPER_A11)
    strict = total_bound(plant, delays, gain, options=BoundOptions(strict_paper_alpha=True))
    base = total_bound(plant, delays, gain)
    assert strict.term_polytope >= base.term_polytope
    assert strict.term_prefix == base.term_prefix
