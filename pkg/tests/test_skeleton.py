import numpy as np
import pytest

from fumot.grid import AngularGrid, SpatialGrid
from fumot.skeleton import (GeometryError, LocalizedData, LocalizedSource, bfactor,
                            boundary_packing, build_skeleton, chord_attenuation_E, covering_check,
                            default_theta, packing_size, recover_sigma_skeleton, segment_distance,
                            skeleton_distance, uniform_disk)
from fumot.transport import hg_kernel


# ---------------------------------------------------------------- packing
@pytest.mark.parametrize("delta,n", [(0.5, 12), (0.2, 31), (1.0, 5), (1.9, 2)])
def test_packing_size_examples(delta, n):
    assert packing_size(delta) == n


@pytest.mark.parametrize("delta", [0.05, 0.2, 0.5, 1.3])
def test_boundary_packing_is_maximal(delta):
    P = boundary_packing(delta)
    d = np.linalg.norm(P[:, None] - P[None], axis=-1) + 3 * np.eye(len(P))
    assert d.min() > delta
    assert np.allclose(np.linalg.norm(P, axis=1), 1)
    # no circle point is farther than delta from the set, so nothing can be added
    phi = np.linspace(0, 2 * np.pi, 5000)
    c = np.column_stack([np.cos(phi), np.sin(phi)])
    assert np.linalg.norm(c[:, None] - P[None], axis=-1).min(axis=1).max() <= delta


@pytest.mark.parametrize("delta", [0.0, 2.0, -1.0])
def test_packing_rejects_bad_delta(delta):
    with pytest.raises(ValueError):
        packing_size(delta)


def test_default_theta():
    assert default_theta(0.2, 31) == pytest.approx(0.04 / (4 * 31 ** 2))


# ---------------------------------------------------------------- skeleton
def test_zero_theta_keeps_every_chord():
    G = build_skeleton(boundary_packing(0.9), 0.0)
    assert len(G.edges) == 15
    assert all(p == [(0.0, 1.0)] for p in G.kept)
    assert np.all(G.removed_lengths() == 0)


def test_triangle_skeleton_cuts_only_near_vertices():
    V = boundary_packing(1.5)  # equilateral triangle, chords of length sqrt(3)
    theta = 0.05
    G = build_skeleton(V, theta)
    for e in range(3):
        pieces = G.kept[e]
        assert len(pieces) == 1
        t0, t1 = pieces[0]
        # the chord enters the other tube at distance theta / sin(60 deg) from the shared vertex
        cut = theta / np.sin(np.pi / 3) / np.sqrt(3)
        assert t0 == pytest.approx(cut) and t1 == pytest.approx(1 - cut)


def test_kept_and_removed_points_respect_tubes():
    V = boundary_packing(0.9)
    theta = 0.03
    G = build_skeleton(V, theta)
    P, Q, ids = G.segments()
    for e in range(len(G.edges)):
        k, l = G.edges[e]
        t = np.linspace(0, 1, 801)
        x = V[k] + t[:, None] * (V[l] - V[k])
        others = np.arange(len(G.edges)) != e
        A = V[G.edges[others, 0]]
        B = V[G.edges[others, 1]]
        dmin = segment_distance(x, A, B)
        kept = G.on_skeleton(e, t)
        assert np.all(dmin[kept] >= theta - 1e-12)
        assert np.all(dmin[~kept] <= theta + 1e-12)


def test_sample_points_lie_on_kept_pieces():
    G = build_skeleton(boundary_packing(0.8), 0.02)
    pts, ids, t = G.sample(0.05)
    assert len(pts) > 0
    for e in np.unique(ids):
        assert np.all(G.on_skeleton(e, t[ids == e]))
    assert np.max(skeleton_distance(pts, G)) < 1e-12


def test_skeleton_distance_matches_brute_force(rng):
    G = build_skeleton(boundary_packing(0.7), 0.05)
    P, Q, _ = G.segments()
    x = uniform_disk(300, rng)
    ref = np.array([min(np.linalg.norm(xi - (p + np.clip((xi - p) @ (q - p) / ((q - p) @ (q - p)), 0, 1) * (q - p)))
                    for p, q in zip(P, Q)) for xi in x])
    assert np.allclose(skeleton_distance(x, G), ref, atol=1e-12)


def test_segment_distance_examples():
    x = np.array([[0.5, 1.0], [2.0, 0.0], [-3.0, 4.0]])
    d = segment_distance(x, np.array([[0.0, 0.0]]), np.array([[1.0, 0.0]]))
    assert np.allclose(d, [1.0, 1.0, 5.0])
    # a second segment through the third point
    d = segment_distance(x, np.array([[0.0, 0.0], [-3.0, 0.0]]), np.array([[1.0, 0.0], [-3.0, 5.0]]))
    assert np.allclose(d, [1.0, 1.0, 0.0])
    assert np.all(np.isinf(segment_distance(x, np.zeros((0, 2)), np.zeros((0, 2)))))


def test_uniform_disk_distribution(rng):
    x = uniform_disk(20000, rng, radius=0.5)
    r = np.linalg.norm(x, axis=1)
    assert r.max() <= 0.5
    # the fraction inside radius 0.25 is one quarter
    assert abs(np.mean(r < 0.25) - 0.25) < 0.015


def test_covering_with_default_theta():
    delta = 0.3
    V = boundary_packing(delta)
    G = build_skeleton(V, default_theta(delta, len(V)), delta)
    rep = covering_check(G, samples=4000, seed=1)
    assert rep.passes and rep.max_distance <= 2 * delta


def test_covering_detects_gaps():
    # two vertices: a single chord cannot cover the disk within 2 * 0.1
    G = build_skeleton(np.array([[1.0, 0.0], [-1.0, 0.0]]), 0.0, 0.1)
    assert not covering_check(G, samples=2000).passes
    with pytest.raises(ValueError):
        covering_check(build_skeleton(np.array([[1.0, 0.0], [-1.0, 0.0]]), 0.0))


def test_build_skeleton_validation():
    with pytest.raises(ValueError):
        build_skeleton(np.zeros(4), 0.1)
    with pytest.raises(ValueError):
        build_skeleton(boundary_packing(1.0), -0.1)


# ---------------------------------------------------------------- ballistic quantities
def test_chord_attenuation_constant_and_linear():
    grid = SpatialGrid("unit-disk", 33)
    y, yp = np.array([-0.6, -0.8]), np.array([0.8, 0.6])
    L = np.linalg.norm(yp - y)
    assert chord_attenuation_E(y, yp, np.full(grid.shape, 0.7), grid) == pytest.approx(np.exp(-0.7 * L))
    # linear sigma away from the rim: the trapezoid rule and bilinear interpolation are exact
    sig = 1.0 + 0.5 * grid.X - 0.25 * grid.Y
    y, yp = np.array([-0.5, -0.3]), np.array([0.4, 0.5])
    L = np.linalg.norm(yp - y)
    mid = 0.5 * (y + yp)
    exact = np.exp(-L * (1.0 + 0.5 * mid[0] - 0.25 * mid[1]))
    assert chord_attenuation_E(y, yp, sig, grid) == pytest.approx(exact, rel=1e-12)
    assert chord_attenuation_E(y, y, sig, grid) == 1.0


def test_localized_source_geometry():
    src = LocalizedSource.equispaced(4, 0.1)
    assert src.n == 4 and src.amplitude == pytest.approx(0.1 ** -0.5)
    assert np.allclose(src.centers, [[1, 0], [0, 1], [-1, 0], [0, -1]], atol=1e-15)
    phi = np.array([0.0, src.half_angle * 0.99, src.half_angle * 1.01])
    vals = src(np.cos(phi), np.sin(phi))
    assert np.allclose(vals, [src.amplitude, src.amplitude, 0.0])
    with pytest.raises(GeometryError):
        LocalizedSource(np.array([0.0, 0.05]), 0.1)
    with pytest.raises(ValueError):
        LocalizedSource(np.array([0.0]), 2.5)


def test_bfactor_symmetry_scaling_and_subtended_angle():
    h = 0.02
    src = LocalizedSource.equispaced(4, h)
    z = np.array([0.1, 0.0])  # on the diameter joining spots 0 and 2
    b = bfactor(z, 0, 2, src)
    assert b == pytest.approx(bfactor(z, 2, 0, src), rel=1e-12)
    assert bfactor(z, 0, 2, src, nu=4.0) == pytest.approx(0.5 * b, rel=1e-12)
    # for small h the weight is |y_k - y_l| / (2 |z - y|) = 1 / |z - y| on a preimage arc of
    # length 2h |z - y| / |z - y'| (the far spot seen through z), capped at the spot width 2h
    d0, d2 = 0.9, 1.1
    arcs = 2 * h * min(1, d0 / d2) / d0 + 2 * h * min(1, d2 / d0) / d2
    assert b == pytest.approx(arcs / (2 * h), rel=1e-3)
    with pytest.raises(GeometryError):
        bfactor(np.array([0.0, 0.5]), 0, 2, src)
    with pytest.raises(GeometryError):
        bfactor(np.array([1.0, 0.0]), 0, 2, src)


# ---------------------------------------------------------------- localized data and recovery
@pytest.fixture(scope="module")
def homogeneous_data():
    grid = SpatialGrid("unit-disk", 33)
    ang = AngularGrid(32)
    src = LocalizedSource.equispaced(6, 1 / 32, np.pi / 6)
    L = LocalizedData(grid, ang, hg_kernel(0.5, ang), np.full(grid.shape, 0.9),
                      np.full(grid.shape, 0.2), src)
    return grid, src, L


def test_localized_data_nodal_matches_pointwise(homogeneous_data):
    grid, src, L = homogeneous_data
    nod = L.nodal()
    pts = np.column_stack([grid.X[grid.inside], grid.Y[grid.inside]])[::17]
    ev = L.evaluate(pts)
    assert np.allclose(nod.H[grid.inside][::17], ev.H, rtol=1e-12, atol=1e-14)
    assert np.all(ev.psi >= 0) and np.all(ev.psi_ballistic <= ev.psi + 1e-14)
    assert L.iterations > 0


def test_localized_data_requires_disk():
    grid = SpatialGrid("unit-square", 9)
    ang = AngularGrid(8)
    with pytest.raises(GeometryError):
        LocalizedData(grid, ang, hg_kernel(0.0, ang), np.ones(grid.shape), np.zeros(grid.shape),
                      LocalizedSource.equispaced(3, 0.1))


def test_ballistic_recovery_of_homogeneous_medium():
    # without scattering the ratio formula is exact up to the O(h^2) spot geometry
    grid = SpatialGrid("unit-disk", 33)
    ang = AngularGrid(16)
    src = LocalizedSource.equispaced(6, 1 / 64, np.pi / 6)
    L = LocalizedData(grid, ang, hg_kernel(0.0, ang), np.full(grid.shape, 0.9),
                      np.zeros(grid.shape), src)
    G = build_skeleton(src.centers, 0.1, 0.1)
    rec = recover_sigma_skeleton(L.H, G, 0.9, 0.8, src, delta=0.05)
    assert len(rec) > 10
    assert rec.errors(0.9).max() < 1e-4
    # the normalization constant cancels in the ratio
    other = recover_sigma_skeleton(L.H, G, 0.9, 0.8, src, delta=0.05, nu=5.0)
    assert np.max(np.abs(other.recovered - rec.recovered)) < 1e-14


def test_recovery_with_scattering(homogeneous_data):
    grid, src, L = homogeneous_data
    G = build_skeleton(src.centers, 0.1, 0.1)
    rec = recover_sigma_skeleton(L.H, G, 0.9, 0.8, src, delta=0.05)
    assert rec.errors(0.9).max() < 0.1
    assert rec.table().shape == (len(rec), 5)
