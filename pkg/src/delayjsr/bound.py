"""Three-term upper bound on the worst-case L2 cost of the error signal.

    sum_k ||e(k)||^2  <=  (prefix + intermediate + tail) / (2 d_max + 1)

* prefix: exact maximum over admissible switching prefixes of
  ``sum_{k<=tau} ||eps(k)||^2``, by exhaustive enumeration;
* intermediate: ``sum_{tau<k<=eta} alpha^(2k) max_{v in V_k} ||v||^2`` where
  ``V_k`` are pruned vertex sets propagated through the lifted set scaled by
  ``1/alpha``;
* tail: ``C^2 r^(2 eta + 2) / (1 - r^2) ||eps(0)||^2`` with ``r`` the
  certified polytope rate and ``C`` the equivalence constant of the extremal
  polytope.
"""
from dataclasses import dataclass, field
import logging
import math
from typing import List, Optional, Tuple
import warnings

import numpy as np

from .errors import BudgetError, GeometryError, PropagationExplosionError, UnstableError
from .geometry import PRUNE_TOL, EquivalenceConstant, equivalence_constant, prune
from .jsr import JsrEstimate, JsrOptions, jsr
from .lift import LiftedSet, lift, lifted_initial_vectors
from .model import DelaySet, Gain, Plant, SwitchedErrorSystem, build_error_system

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PrefixResult:
    value: float
    per_k_max: np.ndarray  # max over prefixes of ||eps(k)||^2
    worst_path: np.ndarray  # ||eps(k)||^2 along the maximising prefix
    worst_words: Tuple = ()
    paths: int = 0


@dataclass(frozen=True)
class SeriesRow:
    k: int
    exact_sq_norm: Optional[float]
    polytope_sq_norm: float
    source: str


@dataclass(frozen=True)
class BoundOptions:
    enum_budget: int = 4_000_000
    vertex_cap: int = 2000
    alpha: Optional[float] = None
    beta: float = 1.01
    strict_paper_alpha: bool = False
    cumulative: bool = True
    prune_tol: float = PRUNE_TOL
    jsr: JsrOptions = JsrOptions()


@dataclass(frozen=True)
class BoundReport:
    tau: int
    eta: int
    alpha: float
    term_prefix: float
    term_polytope: float
    term_tail: float
    total: float
    normalization: int
    rho_lower: float
    rho_upper: float
    rate: float
    certified: bool
    candidate_word: Tuple[int, ...]
    equivalence: EquivalenceConstant
    extremal_vertices: int
    eps0_sq_norm: float
    series: List[SeriesRow] = field(repr=False)
    vertex_counts: List[Tuple[int, int]] = field(repr=False)
    per_k_max: List[float] = field(repr=False)
    polytope_prefix_sum: float = 0.0  # intermediate estimator summed over k <= tau

    def to_dict(self):
        d = {
            "tau": self.tau, "eta": self.eta, "alpha": self.alpha,
            "term_prefix": self.term_prefix, "term_polytope": self.term_polytope,
            "term_tail": self.term_tail, "total": self.total,
            "normalization": self.normalization,
            "rho_lower": self.rho_lower, "rho_upper": self.rho_upper, "rate": self.rate,
            "certified": self.certified, "candidate_word": list(self.candidate_word),
            "equivalence_constant": self.equivalence.c,
            "circumradius": self.equivalence.r_primal,
            "dual_circumradius": self.equivalence.r_dual,
            "extremal_vertices": self.extremal_vertices,
            "eps0_sq_norm": self.eps0_sq_norm,
            "polytope_prefix_sum": self.polytope_prefix_sum,
            "per_k_max": list(self.per_k_max),
            "vertex_counts": [list(c) for c in self.vertex_counts],
            "series": [[r.k, r.exact_sq_norm, r.polytope_sq_norm, r.source] for r in self.series],
        }
        return d


def prefix_term(system: SwitchedErrorSystem, eps0, tau, budget=4_000_000) -> PrefixResult:
    """Exact max over admissible prefixes of sum_{k=0}^{tau} ||eps(k)||^2.

    Every delay word is allowed at k = 0 (the delays before time 0 act on
    zero commands).  Paths are expanded breadth-first along the graph.
    """
    words = list(system.words)
    index = {w: i for i, w in enumerate(words)}
    mats = np.array([system.matrices[w] for w in words])
    succ = np.array([[index[v] for v in system.graph[w]] for w in words])
    eps0 = np.asarray(eps0, dtype=float).reshape(-1)

    npaths = len(words)
    x = np.repeat(eps0[None, :], npaths, axis=0)
    cur = np.arange(npaths)
    hist = cur[:, None]
    sums = np.full(npaths, eps0 @ eps0)
    norms = [sums.copy()]
    for k in range(tau):
        x = np.einsum("pij,pj->pi", mats[cur], x)
        sq = np.einsum("pi,pi->p", x, x)
        sums = sums + sq
        norms.append(sq)
        if k == tau - 1:
            break
        fan = succ.shape[1]
        if len(cur) * fan > budget:
            raise BudgetError(
                f"prefix enumeration needs {len(cur) * fan} paths at step {k + 1} "
                f"(budget {budget}); lower tau")
        nxt = succ[cur].reshape(-1)
        parent = np.repeat(np.arange(len(cur)), fan)
        x, sums = x[parent], sums[parent]
        norms = [n[parent] for n in norms]
        hist = np.hstack([hist[parent], nxt[:, None]])
        cur = nxt
    norms = np.array(norms)  # (tau+1, paths)
    best = int(np.argmax(sums))
    return PrefixResult(
        value=float(sums[best]),
        per_k_max=norms.max(axis=1),
        worst_path=norms[:, best].copy(),
        worst_words=tuple(words[i] for i in hist[best][:tau]),
        paths=len(sums),
    )


def greedy_prefix(system: SwitchedErrorSystem, eps0, tau) -> float:
    """Quick heuristic: follow the locally largest next-step norm.  Not a bound."""
    eps0 = np.asarray(eps0, dtype=float).reshape(-1)
    best = 0.0
    for w0 in system.words:
        x, w, total = eps0, w0, float(eps0 @ eps0)
        for _ in range(tau):
            x = system.matrices[w] @ x
            total += float(x @ x)
            w = max(system.graph[w],
                    key=lambda v: float(np.sum((system.matrices[v] @ x) ** 2)))
        best = max(best, total)
    return best


def polytope_series(lifted: LiftedSet, eps0, k_max, alpha, cumulative=True,
                    vertex_cap=2000, power=2, prune_tol=PRUNE_TOL):
    """Per-step values alpha^(power k) max_{v in V_k} ||v||^2 for k = 0..k_max.

    ``V_0`` holds every lifted copy of ``eps0``; ``V_k`` is the pruned image
    of ``V_{k-1}`` under the lifted set divided by ``alpha`` (joined with
    ``V_{k-1}`` when ``cumulative``).
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    scaled = np.array(lifted.matrix_list()) / alpha
    d = lifted.dim
    verts = prune(lifted_initial_vectors(eps0, lifted), prune_tol, dim=d).vertices
    values = [float(np.max(np.sum(verts ** 2, axis=1)))]
    counts = [len(verts)]
    for k in range(1, k_max + 1):
        imgs = np.einsum("mij,vj->mvi", scaled, verts).reshape(-1, d)
        imgs = imgs[np.any(imgs != 0, axis=1)]
        cand = np.vstack([verts, imgs]) if cumulative else imgs
        verts = prune(cand, prune_tol, dim=d).vertices
        if len(verts) > vertex_cap:
            raise PropagationExplosionError(
                f"V_{k} has {len(verts)} vertices after pruning (cap {vertex_cap})")
        values.append(alpha ** (power * k) * float(np.max(np.sum(verts ** 2, axis=1))))
        counts.append(len(verts))
    return np.array(values), counts


def polytope_term(lifted: LiftedSet, eps0, tau, eta, alpha, rho_lower=None, cumulative=True,
                  vertex_cap=2000, power=2, prune_tol=PRUNE_TOL):
    """Intermediate term over tau < k <= eta; returns (value, {k: value}, {k: count})."""
    if eta <= tau:
        return 0.0, {}, {}
    if rho_lower is not None and alpha >= rho_lower:
        warnings.warn(f"alpha={alpha:g} >= rho lower bound {rho_lower:g}: the scaled set may "
                      f"have JSR <= 1 and old vertices will not be absorbed", RuntimeWarning)
    values, counts = polytope_series(lifted, eps0, eta, alpha, cumulative, vertex_cap, power,
                                     prune_tol)
    ks = range(tau + 1, eta + 1)
    per_k = {k: float(values[k]) for k in ks}
    return float(sum(per_k.values())), per_k, {k: counts[k] for k in ks}


def tail_term(c, rho_upper, eta, eps0) -> float:
    """Geometric tail C^2 r^(2 eta + 2) / (1 - r^2) ||eps0||^2."""
    cval = c.c if isinstance(c, EquivalenceConstant) else float(c)
    if rho_upper >= 1:
        raise UnstableError(f"certified rate {rho_upper:.6g} >= 1: the tail diverges")
    e2 = float(np.sum(np.asarray(eps0, dtype=float) ** 2))
    return cval ** 2 * rho_upper ** (2 * eta + 2) / (1.0 - rho_upper ** 2) * e2


def total_bound(plant: Plant, delays: DelaySet, gain: Gain, eps0=None, tau=9, eta=50,
                options: BoundOptions = BoundOptions(), estimate: JsrEstimate = None) -> BoundReport:
    if tau > eta:
        raise ValueError(f"tau={tau} must not exceed eta={eta}")
    system = build_error_system(plant, delays, gain)
    lifted = lift(system)
    if eps0 is None:
        e0 = np.zeros(plant.n)
        e0[0] = 1.0
        eps0 = system.initial_state(e0)
    eps0 = np.asarray(eps0, dtype=float).reshape(-1)
    if eps0.size == plant.n and system.dim != plant.n:
        eps0 = system.initial_state(eps0)

    est = estimate if estimate is not None else jsr(lifted, options.jsr)
    if est.lower >= 1 or est.upper >= 1:
        raise UnstableError(f"joint spectral radius bracket [{est.lower:.6g}, {est.upper:.6g}] "
                            f"does not certify stability")
    if est.extremal is None or not est.extremal.full_dimensional:
        raise GeometryError("no full-dimensional invariant polytope; the tail cannot be bounded")
    rate = est.rate
    equiv = equivalence_constant(est.extremal)

    pre = prefix_term(system, eps0, tau, options.enum_budget)
    alpha = options.alpha if options.alpha is not None else est.lower / options.beta
    if alpha <= 0:
        raise ValueError("alpha must be positive; the joint spectral radius lower bound is zero")
    power = 1 if options.strict_paper_alpha else 2
    if alpha >= est.lower:
        warnings.warn(f"alpha={alpha:g} >= rho lower bound {est.lower:g}", RuntimeWarning)
    values, counts = polytope_series(lifted, eps0, eta, alpha, options.cumulative,
                                     options.vertex_cap, power, options.prune_tol)
    term_poly = float(values[tau + 1:].sum())
    term_tail = tail_term(equiv, rate, eta, eps0)
    norm = 2 * delays.d_max + 1
    total = (pre.value + term_poly + term_tail) / norm

    series = []
    for k in range(eta + 1):
        exact = float(pre.worst_path[k]) if k <= tau else None
        series.append(SeriesRow(k, exact, float(values[k]), "prefix" if k <= tau else "polytope"))
    return BoundReport(
        tau=tau, eta=eta, alpha=alpha, term_prefix=pre.value, term_polytope=term_poly,
        term_tail=term_tail, total=total, normalization=norm,
        rho_lower=est.lower, rho_upper=est.upper, rate=rate, certified=est.certified,
        candidate_word=est.candidate_word, equivalence=equiv,
        extremal_vertices=est.vertex_count, eps0_sq_norm=float(eps0 @ eps0),
        series=series, vertex_counts=list(enumerate(counts)),
        per_k_max=[float(v) for v in pre.per_k_max],
        polytope_prefix_sum=float(values[:tau + 1].sum()),
    )
