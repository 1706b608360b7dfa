"""Root-system construction, folding, and lattice enumeration."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affsim.errors import ConfigError
from affsim.rootsys import (
    alpha_values,
    build_root_system,
    coroot_lattice_ball,
    dominant_weights_ball,
    fold_to_alcove,
    in_alcove,
    wall_distance,
    weyl_dimension,
)


def test_rank1_basic_data(rs1):
    assert rs1.rank == 1
    assert rs1.positive_roots.shape == (1, 1)
    alpha = rs1.positive_roots[0]
    assert alpha @ alpha == pytest.approx(2.0, abs=1e-14)
    np.testing.assert_allclose(rs1.rho, 0.5 * alpha, atol=1e-14)
    assert rs1.dual_coxeter == 2


def test_rank2_basic_data(rs2):
    assert rs2.positive_roots.shape[0] == 3
    assert rs2.weyl_group.shape[0] == 6
    assert rs2.dual_coxeter == 3


def test_rank1_weyl_group_is_sign_flip(rs1):
    mats = sorted(float(w[0, 0]) for w in rs1.weyl_group)
    assert mats == pytest.approx([-1.0, 1.0])
    assert sorted(rs1.weyl_signs) == pytest.approx([-1.0, 1.0])


def test_unsupported_inputs_rejected():
    with pytest.raises(ConfigError):
        build_root_system("B", 2)
    with pytest.raises(ConfigError):
        build_root_system("A", 0)
    with pytest.raises(ConfigError):
        build_root_system("A", 5)


def test_builder_deterministic():
    a = build_root_system("A", 2)
    b = build_root_system("A", 2)
    np.testing.assert_array_equal(a.positive_roots, b.positive_roots)
    np.testing.assert_array_equal(a.weyl_group, b.weyl_group)


# ---------------------------------------------------------------------------
# folding


def test_fold_origin_is_boundary(rs1, rs2):
    for rs in (rs1, rs2):
        pt, interior = fold_to_alcove(rs, np.zeros(rs.rank))
        np.testing.assert_allclose(pt.coords, 0.0, atol=1e-12)
        assert not interior


def test_fold_fixes_interior_points(rs2, rng):
    for _ in range(20):
        # random convex combination of alcove vertices, kept off the walls
        verts = np.vstack([np.zeros(2), rs2.fundamental_weights])
        w = rng.dirichlet(np.ones(3) * 2.0)
        x = w @ verts
        if wall_distance(rs2, x) < 1e-3:
            continue
        pt, interior = fold_to_alcove(rs2, x)
        np.testing.assert_allclose(pt.coords, x, atol=1e-12)
        assert interior


def test_fold_rank1_translation():
    rs = build_root_system("A", 1)
    alpha = rs.positive_roots[0]
    x = 2.3 * alpha / 2.0  # alpha(x) = 2.3
    pt, interior = fold_to_alcove(rs, x)
    assert alpha_values(rs, pt.coords)[0] == pytest.approx(0.3, abs=1e-12)
    assert interior


def _affine_orbit(rs, x, depth):
    """Bounded brute-force orbit of x under reflections and coroot shifts."""
    seen = {tuple(np.round(x, 9))}
    frontier = [x]
    for _ in range(depth):
        new = []
        for v in frontier:
            for w in rs.weyl_group:
                for shift in np.vstack([np.zeros(rs.rank), rs.coroots, -rs.coroots]):
                    u = w @ v + shift
                    key = tuple(np.round(u, 9))
                    if key not in seen:
                        seen.add(key)
                        new.append(u)
        frontier = new
    return [np.array(k) for k in seen]


@pytest.mark.parametrize("rank", [1, 2])
def test_fold_lands_in_orbit(rank, rng):
    rs = build_root_system("A", rank)
    for _ in range(5):
        x = rng.normal(scale=0.8, size=rank)
        pt, _ = fold_to_alcove(rs, x)
        assert in_alcove(rs, pt.coords, tol=1e-9)
        orbit = _affine_orbit(rs, x, depth=3)
        dists = [np.linalg.norm(pt.coords - u) for u in orbit]
        assert min(dists) < 1e-8


@given(st.lists(st.floats(-3.0, 3.0), min_size=2, max_size=2))
@settings(max_examples=40, deadline=None)
def test_fold_idempotent(coords):
    rs = build_root_system("A", 2)
    pt, _ = fold_to_alcove(rs, np.asarray(coords))
    again, _ = fold_to_alcove(rs, pt.coords)
    np.testing.assert_array_equal(again.coords, pt.coords)


# ---------------------------------------------------------------------------
# lattice balls


def test_coroot_ball_rank1(rs1):
    assert len(coroot_lattice_ball(rs1, 0.5)) == 1
    pts = coroot_lattice_ball(rs1, 1.5)
    assert len(pts) == 3
    arr = np.array(sorted(float(p[0]) for p in pts))
    coroot = rs1.coroots[0]
    np.testing.assert_allclose(arr, [-coroot[0], 0.0, coroot[0]], atol=1e-12)


def test_coroot_ball_rank2(rs2):
    pts = coroot_lattice_ball(rs2, 1.5)
    assert len(pts) == 7
    # brute-force recount over small integer combinations
    count = 0
    for m1, m2 in itertools.product(range(-2, 3), repeat=2):
        v = m1 * rs2.simple_roots[0] + m2 * rs2.simple_roots[1]
        if np.linalg.norm(v) <= 1.5:
            count += 1
    assert count == 7


def test_coroot_ball_symmetric(rs2):
    pts = {tuple(np.round(p, 9)) for p in coroot_lattice_ball(rs2, 2.5)}
    assert (0.0, 0.0) in pts
    for p in pts:
        assert tuple(np.round(-np.array(p), 9)) in pts


def test_dominant_ball_rank1(rs1):
    assert [np.linalg.norm(v) for v in dominant_weights_ball(rs1, 0.8)] == [0.0]
    pts = dominant_weights_ball(rs1, 1.5)
    assert len(pts) == 2
    np.testing.assert_allclose(pts[1], rs1.positive_roots[0] / 2.0, atol=1e-12)


def test_dominant_ball_excludes_everything_below_rho(rs2):
    assert dominant_weights_ball(rs2, 0.5) == []


def test_dominant_ball_sorted(rs2):
    pts = dominant_weights_ball(rs2, 4.0)
    norms = [np.linalg.norm(v + rs2.rho) for v in pts]
    # ties may land in either order within roundoff
    assert all(b >= a - 1e-12 for a, b in zip(norms, norms[1:]))
    assert all(n <= 4.0 + 1e-12 for n in norms)


# ---------------------------------------------------------------------------
# invariants


def test_weyl_group_closure_and_sign_homomorphism(rs2):
    mats = rs2.weyl_group
    signs = rs2.weyl_signs
    keys = {tuple(np.round(m, 9).ravel()): s for m, s in zip(mats, signs)}
    for (ma, sa), (mb, sb) in itertools.product(zip(mats, signs), repeat=2):
        prod = np.round(ma @ mb, 9)
        key = tuple(prod.ravel())
        assert key in keys
        assert keys[key] == pytest.approx(sa * sb)


def test_form_invariance_under_weyl(rs2, rng):
    u = rng.normal(size=2)
    v = rng.normal(size=2)
    base = u @ v
    for w in rs2.weyl_group:
        assert (w @ u) @ (w @ v) == pytest.approx(base, abs=1e-14)


def test_weyl_dimension_small_values(rs1, rs2):
    assert weyl_dimension(rs1, np.zeros(1)) == 1
    assert weyl_dimension(rs1, rs1.positive_roots[0]) == 3
    assert weyl_dimension(rs2, np.zeros(2)) == 1
    assert weyl_dimension(rs2, rs2.fundamental_weights[0]) == 3
