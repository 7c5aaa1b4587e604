"""Centrally symmetric polytopes in vertex representation.

A ``SymPolytope`` stores one representative ``v`` per vertex pair ``±v``; the
body is ``conv{±v}``.  Membership and the Minkowski gauge reduce to the LP

    min sum(l+ + l-)  s.t.  V^T (l+ - l-) = x,  l+, l- >= 0,

solved by the dense simplex in :mod:`delayjsr.simplex`.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import DegeneratePolytopeError, DimensionLimitError, LPFailureError
from .simplex import INFEASIBLE, OPTIMAL, solve_standard

MEMBERSHIP_TOL = 1e-9
PRUNE_TOL = 1e-9
PIVOT_TOL = 1e-10
DUAL_DIM_LIMIT = 8


def _as_points(vertices, dim=None):
    pts = np.array(vertices, dtype=float, ndmin=2)
    if pts.size == 0:
        return np.zeros((0, dim or 0))
    return pts


def gauge(vertices, x, pivot_tol=PIVOT_TOL):
    """Minkowski gauge of ``x`` w.r.t. ``conv{±vertices}``; inf outside the span."""
    V = _as_points(vertices)
    x = np.asarray(x, dtype=float).reshape(-1)
    if not np.any(x):
        return 0.0
    if V.shape[0] == 0:
        return math.inf
    rows = np.flatnonzero(np.any(V != 0, axis=0) | (x != 0))
    Vt = V[:, rows].T
    A = np.hstack([Vt, -Vt])
    res = solve_standard(np.ones(A.shape[1]), A, x[rows], tol=pivot_tol)
    if res.status == INFEASIBLE:
        return math.inf
    if res.status != OPTIMAL:
        raise LPFailureError(f"gauge LP ended with status {res.status}")
    return res.fun


@dataclass(frozen=True)
class SymPolytope:
    dim: int
    vertices: np.ndarray

    def __post_init__(self):
        pts = _as_points(self.vertices, self.dim).reshape(-1, self.dim).copy()
        pts.setflags(write=False)
        object.__setattr__(self, "vertices", pts)

    def __len__(self):
        return self.vertices.shape[0]

    @property
    def rank(self) -> int:
        if len(self) == 0:
            return 0
        return int(np.linalg.matrix_rank(self.vertices))

    @property
    def full_dimensional(self) -> bool:
        return self.rank == self.dim

    def circumradius(self) -> float:
        if len(self) == 0:
            return 0.0
        return float(np.max(np.linalg.norm(self.vertices, axis=1)))

    def norm(self, x) -> float:
        return polytope_norm(self, x)

    def contains(self, x, tol=MEMBERSHIP_TOL) -> bool:
        return contains(self, x, tol)

    def scaled(self, c) -> "SymPolytope":
        return SymPolytope(self.dim, self.vertices * c)


@dataclass(frozen=True)
class EquivalenceConstant:
    c: float
    r_primal: float
    r_dual: float


def contains(p: SymPolytope, x, tol=MEMBERSHIP_TOL) -> bool:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != p.dim:
        raise ValueError(f"point has dimension {x.size}, polytope {p.dim}")
    return gauge(p.vertices, x) <= 1.0 + tol


def polytope_norm(p: SymPolytope, x) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != p.dim:
        raise ValueError(f"point has dimension {x.size}, polytope {p.dim}")
    if not p.full_dimensional:
        raise DegeneratePolytopeError(
            f"gauge is unbounded: polytope spans {p.rank} of {p.dim} dimensions")
    return gauge(p.vertices, x)


def support_groups(points):
    """Split point indices by disjoint coordinate supports.

    Returns a list of ``(indices, coords)`` pairs when the supports of the
    groups are pairwise disjoint, else a single group with all coordinates.
    Exact zeros are used, which is what block-structured matrices produce.
    """
    pts = _as_points(points)
    k, d = pts.shape
    masks = pts != 0
    # union-find over coordinates linked by a common point
    parent = list(range(d))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    patterns, inverse = np.unique(masks, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    for row in patterns:
        idx = np.flatnonzero(row)
        for j in idx[1:]:
            ri, rj = find(idx[0]), find(j)
            if ri != rj:
                parent[rj] = ri
    roots = [find(int(np.flatnonzero(row)[0])) if row.any() else -1 for row in patterns]
    groups = {}
    for i, pat in enumerate(inverse):
        if roots[pat] >= 0:
            groups.setdefault(roots[pat], []).append(i)
    coords = {}
    for j in range(d):
        coords.setdefault(find(j), []).append(j)
    return [(np.array(ix), np.array(coords[r])) for r, ix in groups.items()]


class SupportIndex:
    """Incremental vertex store that tracks coordinate blocks with disjoint supports.

    For a direct sum of polytopes living on disjoint coordinate blocks, the
    gauge of a point only involves the vertices of the blocks it touches, so
    the LP can be restricted to those.
    """

    def __init__(self, dim, vertices=()):
        self.dim = dim
        self.label = np.arange(dim)
        self.covered = np.zeros(dim, dtype=bool)
        self.rows = []
        self.vlabel = []
        for v in vertices:
            self.add(v)

    def add(self, v):
        v = np.asarray(v, dtype=float)
        idx = np.flatnonzero(v)
        if idx.size == 0:
            return
        touched = np.unique(self.label[idx])
        root = touched.min()
        if touched.size > 1:
            self.label[np.isin(self.label, touched)] = root
            self.vlabel = [root if l in touched else l for l in self.vlabel]
        self.covered[idx] = True
        self.rows.append(v)
        self.vlabel.append(root)

    @property
    def vertices(self):
        if not self.rows:
            return np.zeros((0, self.dim))
        return np.array(self.rows)

    def gauge(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.flatnonzero(x)
        if idx.size == 0:
            return 0.0
        if not np.all(self.covered[idx]):
            return math.inf
        touched = set(np.unique(self.label[idx]).tolist())
        sel = [r for r, l in zip(self.rows, self.vlabel) if l in touched]
        return gauge(np.array(sel), x)


def _dedupe(pts, tol):
    keep = []
    for i, v in enumerate(pts):
        if keep:
            kept = pts[keep]
            near = np.minimum(np.linalg.norm(kept - v, axis=1), np.linalg.norm(kept + v, axis=1))
            if near.min() < tol:
                continue
        keep.append(i)
    return keep


def _prune_group(pts, tol):
    order = np.argsort(-np.linalg.norm(pts, axis=1), kind="stable")
    kept = []
    for i in order:
        if kept and gauge(pts[kept], pts[i]) <= 1.0 + tol:
            continue
        kept.append(i)
    # a later, larger hull may swallow an early survivor
    pos = len(kept) - 1
    while pos >= 0 and len(kept) > 1:
        others = kept[:pos] + kept[pos + 1:]
        if gauge(pts[others], pts[kept[pos]]) <= 1.0 + tol:
            kept.pop(pos)
        pos -= 1
    return sorted(kept)


def _hull_vertices(sub, max_dim=DUAL_DIM_LIMIT):
    """Indices of the qhull vertices of conv{±sub}, or None when qhull does not apply.

    Qhull works at floating-point precision, so a point sticking out of the
    hull of the others by less than the prune tolerance may survive; that
    only costs an extra vertex.
    """
    k, d = sub.shape
    if d < 2 or d > max_dim or k <= 2 * d or np.linalg.matrix_rank(sub) < d:
        return None
    try:
        hull = ConvexHull(np.vstack([sub, -sub]))
    except QhullError:
        return None
    return np.unique(hull.vertices % k)


def batch_gauge(vertices, points, max_dim=DUAL_DIM_LIMIT):
    """Gauges of many points at once.

    The vertices are split into blocks with disjoint supports; the gauge of
    a direct sum is the sum of the block gauges.  Full-dimensional blocks of
    small dimension use their facet form ``max |N x|``, the rest the LP.
    """
    V = _as_points(vertices)
    X = np.array(points, dtype=float, ndmin=2)
    out = np.zeros(len(X))
    if V.shape[0] == 0:
        out[np.any(X != 0, axis=1)] = math.inf
        return out
    covered = np.any(V != 0, axis=0)
    out[np.any(X[:, ~covered] != 0, axis=1)] = math.inf
    for ix, coords in support_groups(V):
        sub = V[np.ix_(ix, coords)]
        xs = X[:, coords]
        live = np.flatnonzero(np.any(xs != 0, axis=1) & np.isfinite(out))
        if live.size == 0:
            continue
        if len(coords) <= max_dim and np.linalg.matrix_rank(sub) == len(coords):
            normals = _facet_normals(sub)
            out[live] += np.max(np.abs(xs[live] @ normals.T), axis=1)
        else:
            out[live] += [gauge(sub, x) for x in xs[live]]
    return out


def prune(vertices, tol=PRUNE_TOL, dim=None) -> SymPolytope:
    """Drop every point that lies in the symmetric hull of the others."""
    pts = _as_points(vertices, dim)
    d = pts.shape[1] if dim is None else dim
    if pts.shape[0] == 0:
        return SymPolytope(d, np.zeros((0, d)))
    pts = pts[np.linalg.norm(pts, axis=1) > tol]
    survivors = []
    for ix, coords in support_groups(pts):
        sub = pts[np.ix_(ix, coords)]
        hv = _hull_vertices(sub)
        if hv is not None:
            uniq = hv[_dedupe(sub[hv], tol)]
            kept = np.arange(len(uniq))
        else:
            uniq = _dedupe(sub, tol)
            kept = _prune_group(sub[uniq], tol)
        survivors.extend(ix[uniq][kept].tolist())
    return SymPolytope(d, pts[sorted(survivors)])


def _check_dual_input(p: SymPolytope, max_dim):
    if p.dim > max_dim:
        raise DimensionLimitError(f"dual enumeration limited to dim <= {max_dim}, got {p.dim}")
    if not p.full_dimensional:
        raise DegeneratePolytopeError(
            f"polytope spans {p.rank} of {p.dim} dimensions; its dual is unbounded")


def _facet_normals(pts):
    """Scaled facet normals y with max |<v, y>| = 1 for the body conv{±pts}."""
    d = pts.shape[1]
    if d == 1:
        return np.array([[1.0 / np.max(np.abs(pts))]])
    try:
        hull = ConvexHull(np.vstack([pts, -pts]))
    except QhullError as exc:
        raise DegeneratePolytopeError(f"facet enumeration failed: {exc}") from exc
    normals = hull.equations[:, :-1] / -hull.equations[:, -1:]
    # canonical sign: first clearly nonzero coordinate positive
    lead = np.argmax(np.abs(normals) > 1e-12, axis=1)
    signs = np.sign(normals[np.arange(len(normals)), lead])
    normals = normals * signs[:, None]
    scale = np.max(np.abs(normals))
    _, first = np.unique(np.round(normals / scale, 9), axis=0, return_index=True)
    normals = normals[np.sort(first)]
    # put each normal exactly on the boundary of the dual
    support = np.max(np.abs(normals @ pts.T), axis=1)
    return normals / support[:, None]


def dual_vertices(p: SymPolytope, max_dim=DUAL_DIM_LIMIT, tol=1e-7) -> SymPolytope:
    """Vertices of the polar body {y : |<v, y>| <= 1 for all vertices v}."""
    _check_dual_input(p, max_dim)
    normals = _facet_normals(p.vertices)
    if len(normals) <= 5000:
        normals = normals[_dedupe(normals, tol * max(1.0, np.max(np.abs(normals))))]
    return SymPolytope(p.dim, normals)


def dual_circumradius(p: SymPolytope, max_dim=DUAL_DIM_LIMIT) -> float:
    """Circumradius of the polar body.

    When the vertices split into groups with disjoint coordinate supports the
    body is a direct sum and its polar is the Cartesian product of the group
    polars, so the radius is the root-sum-square of the group radii.
    """
    _check_dual_input(p, max_dim)
    groups = support_groups(p.vertices)
    if len(groups) > 1:
        total = 0.0
        for ix, coords in groups:
            sub = p.vertices[np.ix_(ix, coords)]
            if np.linalg.matrix_rank(sub) < len(coords):
                raise DegeneratePolytopeError("block of the polytope is degenerate")
            total += float(np.max(np.linalg.norm(_facet_normals(sub), axis=1))) ** 2
        return math.sqrt(total)
    return float(np.max(np.linalg.norm(_facet_normals(p.vertices), axis=1)))


def equivalence_constant(p: SymPolytope, max_dim=DUAL_DIM_LIMIT) -> EquivalenceConstant:
    """C = R(P) R(P*), so that ||A||_2 <= C ||A||_P for every operator A."""
    r_primal = p.circumradius()
    r_dual = dual_circumradius(p, max_dim)
    return EquivalenceConstant(r_primal * r_dual, r_primal, r_dual)


def operator_norm(p: SymPolytope, mat) -> float:
    """Induced polytope norm: max over vertices of the gauge of the image."""
    mat = np.asarray(mat, dtype=float)
    return max(polytope_norm(p, mat @ v) for v in p.vertices)
