"""Joint spectral radius: product bounds, s.m.p. candidates, extremal polytopes.

A matrix set is either a :class:`~delayjsr.lift.LiftedSet` or any sequence of
square arrays.  Words are tuples of indices into the set in application
order: ``(i1, ..., iL)`` stands for ``A[iL] @ ... @ A[i1]``.  Products that
vanish identically are skipped during enumeration; for a lifted set these are
exactly the inadmissible words, so only admissible products are ever formed.
"""
from dataclasses import dataclass, field
import logging
import math
from typing import Optional, Tuple

import numpy as np

from .errors import (AllZeroProductsError, BudgetError, JSRError, MaxIterError,
                     NotSMPError)
from .geometry import PRUNE_TOL, SupportIndex, SymPolytope, batch_gauge, gauge, prune
from .lift import LiftedSet

logger = logging.getLogger(__name__)

DEFAULT_PRODUCT_BUDGET = 2_000_000


@dataclass(frozen=True)
class JsrOptions:
    tol: float = 1e-8
    max_iter: int = 200
    depth_start: int = 4
    depth_max: int = 12
    depth_step: int = 2
    growth_cap: float = 1e6
    product_budget: int = DEFAULT_PRODUCT_BUDGET
    vertex_cap: int = 4000
    # relative inflation of the scaling tried when the exact s.m.p. route fails
    inflations: Tuple[float, ...] = (1e-4, 1e-3, 1e-2, 5e-2)


@dataclass(frozen=True)
class JsrEstimate:
    lower: float
    upper: float
    candidate_word: Tuple[int, ...] = ()
    extremal: Optional[SymPolytope] = field(default=None, repr=False)
    certified: bool = False
    # every matrix maps the extremal polytope into rate * polytope
    rate: Optional[float] = None
    method: str = "products"
    sweeps: int = 0

    @property
    def vertex_count(self) -> int:
        return 0 if self.extremal is None else len(self.extremal)


def as_matrices(matrix_set) -> np.ndarray:
    if isinstance(matrix_set, LiftedSet):
        mats = matrix_set.matrix_list()
    else:
        mats = list(matrix_set)
    if not mats:
        raise JSRError("empty matrix set")
    arr = np.array([np.asarray(m, dtype=float) for m in mats])
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise JSRError(f"matrix set must hold square matrices of one size, got {arr.shape}")
    return arr


def spectral_radius(mat) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(mat))))


def product(matrix_set, word) -> np.ndarray:
    mats = as_matrices(matrix_set)
    out = np.eye(mats.shape[1])
    for i in word:
        out = mats[i] @ out
    return out


def enumerate_products(matrix_set, depth, budget=DEFAULT_PRODUCT_BUDGET):
    """Yield ``(length, words, products)`` per length, nonzero products only.

    Words come out in lexicographic order.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    mats = as_matrices(matrix_set)
    k = len(mats)
    keep = np.any(mats != 0, axis=(1, 2))
    words = np.flatnonzero(keep)[:, None]
    prods = mats[keep]
    total = len(words)
    for length in range(1, depth + 1):
        if length > 1:
            if total + len(words) * k > budget:
                raise BudgetError(
                    f"product enumeration at length {length} would exceed the budget of "
                    f"{budget} products")
            prods = np.einsum("kij,pjl->pkil", mats, prods).reshape(-1, *mats.shape[1:])
            words = np.hstack([np.repeat(words, k, axis=0),
                               np.tile(np.arange(k), len(words))[:, None]])
            nz = np.any(prods != 0, axis=(1, 2))
            prods, words = prods[nz], words[nz]
            total += len(words)
        yield length, words, prods
        if len(words) == 0:
            return


def _level_radii(prods, length):
    if len(prods) == 0:
        return np.zeros(0)
    return np.max(np.abs(np.linalg.eigvals(prods)), axis=1) ** (1.0 / length)


def bounds_by_products(matrix_set, depth, budget=DEFAULT_PRODUCT_BUDGET):
    """(lower, upper) from spectral radii and 2-norms of products up to ``depth``."""
    lower, upper = 0.0, math.inf
    for length, _, prods in enumerate_products(matrix_set, depth, budget):
        if len(prods) == 0:
            # every product of this length vanishes, hence so does the JSR
            return 0.0, 0.0
        lower = max(lower, float(_level_radii(prods, length).max()))
        upper = min(upper, float(np.linalg.norm(prods, ord=2, axis=(1, 2)).max()) ** (1.0 / length))
    return lower, max(upper, lower)


def find_smp_candidate(matrix_set, depth, budget=DEFAULT_PRODUCT_BUDGET, rtol=1e-12):
    """Word maximising rho(P_w)^(1/|w|); ties go to the shorter, then lexicographically smaller word."""
    best_val, best_word = 0.0, None
    for length, words, prods in enumerate_products(matrix_set, depth, budget):
        if len(prods) == 0:
            break
        radii = _level_radii(prods, length)
        top = radii.max()
        if top > best_val * (1.0 + rtol) and top > 0:
            i = int(np.flatnonzero(radii >= top * (1.0 - rtol))[0])
            best_val, best_word = float(top), tuple(int(v) for v in words[i])
    if best_word is None:
        raise AllZeroProductsError("every product up to the search depth is nilpotent")
    return best_word


def _real_seeds(vec, eigval):
    vec = vec / vec[np.argmax(np.abs(vec))]
    if abs(eigval.imag) <= 1e-12 * max(1.0, abs(eigval)):
        seeds = [vec.real]
    else:
        seeds = [vec.real, vec.imag]
    return [s / np.linalg.norm(s) for s in seeds if np.linalg.norm(s) > 0]


def _complement_basis(vectors, dim):
    if len(vectors) == 0:
        return np.eye(dim)
    u, s, _ = np.linalg.svd(np.asarray(vectors).T)
    r = int(np.sum(s > 1e-10 * s[0]))
    return u[:, r:].T


def verify_invariance(matrix_set, polytope: SymPolytope, rate, tol=1e-8):
    """Check ``A v in (1 + tol) * rate * P`` for every matrix A and vertex v."""
    mats = as_matrices(matrix_set)
    failures = []
    for v in polytope.vertices:
        for a in mats:
            y = (a @ v) / rate
            if np.any(y) and gauge(polytope.vertices, y) > 1.0 + tol:
                failures.append(y)
    return failures


def extremal_polytope(matrix_set, candidate, tol=1e-8, max_iter=200, growth_cap=1e6,
                      inflation=0.0, extra_seeds=None, vertex_cap=4000,
                      complete=True) -> JsrEstimate:
    """Invariant polytope for the set scaled by the candidate's averaged spectral radius.

    Seeds are the leading eigenvector of the candidate product (real and
    imaginary parts for a complex eigenvalue).  Each sweep maps the vertices
    added by the previous one through every scaled matrix and keeps the images
    that fall outside the current hull.  A sweep that adds nothing certifies
    ``||A||_P <= rho_c (1 + inflation)(1 + tol)`` for every matrix.
    """
    mats = as_matrices(matrix_set)
    dim = mats.shape[1]
    word = tuple(candidate)
    p = product(mats, word)
    evals, evecs = np.linalg.eig(p)
    j = int(np.argmax(np.abs(evals)))
    rho_c = abs(evals[j]) ** (1.0 / len(word))
    if rho_c == 0:
        raise JSRError("candidate product is nilpotent")
    scale = rho_c * (1.0 + inflation)
    scaled = mats / scale

    seeds = _real_seeds(evecs[:, j], evals[j])
    if extra_seeds is not None:
        seeds += [np.asarray(s, dtype=float) for s in extra_seeds]
    verts = prune(seeds, dim=dim).vertices
    init_norm = float(np.max(np.linalg.norm(verts, axis=1)))
    index = SupportIndex(dim, verts)
    new = verts
    completed = False
    last_prune = 0
    for sweep in range(1, max_iter + 1):
        imgs = np.einsum("mij,vj->vmi", scaled, new).reshape(-1, dim)
        imgs = imgs[np.any(imgs != 0, axis=1)]
        if len(imgs) and np.max(np.linalg.norm(imgs, axis=1)) > growth_cap * init_norm:
            raise NotSMPError(
                f"vertex images grow past {growth_cap:g}x: candidate {word} "
                f"underestimates the joint spectral radius")
        added = []
        if len(imgs):
            added = list(imgs[batch_gauge(index.vertices, imgs) > 1.0 + tol])
            for y in added:
                index.add(y)
        if not added:
            poly = SymPolytope(dim, index.vertices)
            if complete and not completed and not poly.full_dimensional:
                # orbit spans an invariant subspace only; seed the complement
                added = list(_complement_basis(poly.vertices, dim) * 1e-3 * init_norm)
                for y in added:
                    index.add(y)
                completed = True
            else:
                poly = prune(poly.vertices, PRUNE_TOL, dim=dim)
                bad = verify_invariance(scaled, poly, 1.0, tol)
                if not bad:
                    rate = scale * (1.0 + tol)
                    return JsrEstimate(rho_c, rate, word, poly, poly.full_dimensional,
                                       rate, "extremal" if inflation == 0 else "inflated",
                                       sweep)
                index = SupportIndex(dim, poly.vertices)
                for y in bad:
                    index.add(y)
                added = bad
        new = np.array(added)
        count = len(index.rows)
        if count > vertex_cap or count > 2 * max(last_prune, 50):
            # interior points do not change the hull; drop them now and then
            verts = prune(index.vertices, PRUNE_TOL, dim=dim).vertices
            if len(verts) > vertex_cap:
                raise MaxIterError(f"extremal polytope exceeded {vertex_cap} vertices")
            index = SupportIndex(dim, verts)
            last_prune = len(verts)
            kept = {row.tobytes() for row in verts}
            new = np.array([y for y in new if y.tobytes() in kept]).reshape(-1, dim)
        logger.debug("sweep %d: %d vertices (%d new)", sweep, len(index.rows), len(new))
    raise MaxIterError(f"no invariant polytope after {max_iter} sweeps for candidate {word}")


def jsr(matrix_set, options: JsrOptions = JsrOptions()) -> JsrEstimate:
    """Bracket the JSR and, where possible, certify the upper bound with a polytope.

    The exact route tries s.m.p. candidates at increasing depth.  If none
    yields an invariant polytope, the candidate scaling is inflated by the
    factors in ``options.inflations`` (with a basis added to the seeds); a
    success there certifies a slightly larger upper bound.  Otherwise the
    plain product bounds are returned uncertified.
    """
    mats = as_matrices(matrix_set)
    if not np.any(mats):
        return JsrEstimate(0.0, 0.0, (), None, True, 0.0, "zero")
    opts = options
    kw = dict(tol=opts.tol, max_iter=opts.max_iter, growth_cap=opts.growth_cap,
              vertex_cap=opts.vertex_cap)

    if len(mats) == 1:
        rho = spectral_radius(mats[0])
        if rho == 0:
            return JsrEstimate(0.0, 0.0, (0,), None, True, 0.0, "singleton")
        est = _inflated(mats, (0,), opts, kw, allow_exact=True)
        poly, rate = (est.extremal, est.rate) if est is not None else (None, None)
        return JsrEstimate(rho, rho, (0,), poly, True, rate, "singleton",
                           est.sweeps if est else 0)

    lower, upper = 0.0, math.inf
    cand = None
    depth = opts.depth_start
    while depth <= opts.depth_max:
        try:
            lo, up = bounds_by_products(mats, depth, opts.product_budget)
        except BudgetError as exc:
            if cand is None:
                raise BudgetError(str(exc), best=None) from exc
            break
        lower, upper = max(lower, lo), min(upper, up)
        if upper == 0.0:
            return JsrEstimate(0.0, 0.0, (), None, True, 0.0, "nilpotent")
        new_cand = find_smp_candidate(mats, depth, opts.product_budget)
        if new_cand != cand:
            cand = new_cand
            try:
                est = extremal_polytope(mats, cand, **kw)
                return _merge(est, lower, upper)
            except (NotSMPError, MaxIterError) as exc:
                logger.info("candidate %s at depth %d failed: %s", cand, depth, exc)
        depth += opts.depth_step

    est = _inflated(mats, cand, opts, kw)
    if est is not None and est.upper < upper:
        return _merge(est, lower, upper)
    return JsrEstimate(lower, max(upper, lower), cand or (), None, False, None, "products")


def _merge(est, lower, upper):
    lo = max(lower, est.lower)
    return JsrEstimate(lo, max(lo, min(upper, est.upper)), est.candidate_word, est.extremal,
                       est.certified, est.rate, est.method, est.sweeps)


def _inflated(mats, cand, opts, kw, allow_exact=False):
    dim = mats.shape[1]
    basis = list(np.eye(dim))
    factors = ((0.0,) if allow_exact else ()) + tuple(opts.inflations)
    for infl in factors:
        try:
            return extremal_polytope(mats, cand, inflation=infl, extra_seeds=basis, **kw)
        except (NotSMPError, MaxIterError) as exc:
            logger.info("inflation %g failed: %s", infl, exc)
    return None
