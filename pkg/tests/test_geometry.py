import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from delayjsr.errors import DegeneratePolytopeError, DimensionLimitError
from delayjsr.geometry import (SupportIndex, SymPolytope, batch_gauge, contains, dual_vertices,
                               equivalence_constant, gauge, operator_norm, polytope_norm, prune,
                               support_groups)

SQUARE = SymPolytope(2, [[1, 1], [1, -1]])
CROSS = SymPolytope(2, [[1, 0], [0, 1]])


def same_vertex_set(p, q, tol=1e-7):
    if len(p) != len(q):
        return False
    for v in p.vertices:
        d = np.minimum(np.linalg.norm(q.vertices - v, axis=1), np.linalg.norm(q.vertices + v, axis=1))
        if d.min() > tol:
            return False
    return True


def test_square_membership_and_norm():
    assert contains(SQUARE, [0.5, 0.5])
    assert not contains(SQUARE, [1.2, 0], tol=0)
    assert polytope_norm(SQUARE, [1, 0]) == pytest.approx(1.0)
    assert polytope_norm(CROSS, [1, 1]) == pytest.approx(2.0)
    for v in SQUARE.vertices:
        assert contains(SQUARE, v, 0)


def test_degenerate_norm_raises():
    with pytest.raises(DegeneratePolytopeError):
        polytope_norm(SymPolytope(2, [[1, 0]]), [0, 1])
    assert math.isinf(gauge([[1, 0]], [0, 1]))


def test_prune_examples():
    p = prune([[1, 0], [0.5, 0], [0, 1]])
    assert same_vertex_set(p, CROSS)
    t = np.linspace(0, np.pi, 17, endpoint=False)
    circle = np.c_[np.cos(t), np.sin(t)]
    assert len(prune(circle)) == 17
    # coincident and antipodal duplicates collapse
    assert len(prune([[1, 2], [1, 2], [-1, -2], [0, 0]])) == 1


def test_prune_no_survivor_inside_others(rng):
    for d in (2, 3, 5):
        pts = rng.normal(size=(40, d))
        p = prune(pts)
        for i in range(len(p)):
            others = np.delete(p.vertices, i, axis=0)
            assert gauge(others, p.vertices[i]) > 1.0 - 1e-9
        # every input point is covered
        for x in pts:
            assert p.contains(x)


def test_prune_idempotent(rng):
    for d in (2, 3, 4, 9):
        p = prune(rng.normal(size=(60, d)))
        assert same_vertex_set(prune(p.vertices), p, tol=0)


def test_square_cross_duality():
    assert same_vertex_set(dual_vertices(SQUARE), CROSS)
    assert same_vertex_set(dual_vertices(CROSS), SQUARE)


def test_duality_involution(rng):
    for d in (2, 3, 4):
        p = prune(rng.normal(size=(12, d)))
        assert same_vertex_set(dual_vertices(dual_vertices(p)), p, tol=1e-6)


def test_dual_contains_polar_points(rng):
    p = prune(rng.normal(size=(15, 3)))
    q = dual_vertices(p)
    assert np.max(np.abs(q.vertices @ p.vertices.T)) <= 1 + 1e-9


def test_dual_limits():
    with pytest.raises(DimensionLimitError):
        dual_vertices(SymPolytope(9, np.eye(9)))
    with pytest.raises(DegeneratePolytopeError):
        dual_vertices(SymPolytope(2, [[1, 1]]))


def test_equivalence_constants():
    ec = equivalence_constant(CROSS)
    assert (ec.r_primal, ec.r_dual, ec.c) == pytest.approx((1.0, math.sqrt(2), math.sqrt(2)))
    for d in (2, 3, 4):
        cube = SymPolytope(d, prune(np.array(np.meshgrid(*[[-1, 1]] * d)).reshape(d, -1).T).vertices)
        # R(cube) = sqrt(d), R(cross) = 1
        assert equivalence_constant(cube).c == pytest.approx(math.sqrt(d))


def test_block_dual_radius_matches_direct(rng):
    a = prune(rng.normal(size=(10, 3)))
    b = prune(rng.normal(size=(10, 2)))
    verts = np.vstack([np.c_[a.vertices, np.zeros((len(a), 2))],
                       np.c_[np.zeros((len(b), 3)), b.vertices]])
    p = SymPolytope(5, verts)
    assert len(support_groups(p.vertices)) == 2
    joint = equivalence_constant(p).r_dual
    direct = max(np.linalg.norm(dual_vertices(SymPolytope(5, verts + 0.0)).vertices, axis=1))
    assert joint == pytest.approx(direct, rel=1e-9)


def test_equivalence_constant_valid_on_random_operators(rng):
    for d in (2, 3, 4):
        p = prune(rng.normal(size=(14, d)))
        c = equivalence_constant(p).c
        for _ in range(20):
            A = rng.normal(size=(d, d))
            opn = operator_norm(p, A)
            for _ in range(5):
                x = rng.normal(size=d)
                ratio = np.linalg.norm(A @ x) / (opn * np.linalg.norm(x))
                assert ratio <= c * (1 + 1e-8)
            assert np.linalg.norm(A, 2) <= c * opn * (1 + 1e-8)


def test_batch_gauge_and_index_agree_with_lp(rng):
    blocks = [rng.normal(size=(8, 3)), rng.normal(size=(6, 3))]
    verts = np.vstack([np.c_[blocks[0], np.zeros((8, 3))], np.c_[np.zeros((6, 3)), blocks[1]]])
    X = rng.normal(size=(30, 6))
    X[:10, 3:] = 0
    X[10:20, :3] = 0
    lp = np.array([gauge(verts, x) for x in X])
    assert np.allclose(batch_gauge(verts, X), lp, rtol=1e-8)
    idx = SupportIndex(6, verts)
    assert np.allclose([idx.gauge(x) for x in X], lp, rtol=1e-8)
    assert math.isinf(batch_gauge(verts[:8], X[15:16])[0])


vec = st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3)


@settings(max_examples=40, deadline=None)
@given(x=vec, c=st.floats(-10, 10, allow_nan=False))
def test_gauge_homogeneity(x, c):
    p = SymPolytope(3, [[1, 0.2, 0], [0.1, 1, 0.3], [0, -0.4, 1], [1, 1, 1]])
    x = np.array(x)
    assert polytope_norm(p, c * x) == pytest.approx(abs(c) * polytope_norm(p, x), rel=1e-8, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(x=vec)
def test_norm_membership_consistency(x):
    p = SymPolytope(3, [[1, 0.2, 0], [0.1, 1, 0.3], [0, -0.4, 1], [1, 1, 1]])
    x = np.array(x)
    n = polytope_norm(p, x)
    if abs(n - 1) > 1e-7:
        assert (n <= 1) == contains(p, x, 0)
