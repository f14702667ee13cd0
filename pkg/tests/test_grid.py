import numpy as np
import pytest

from fumot.grid import (AngularGrid, SpatialGrid, exit_times, path_weights, ray_quadrature,
                        trace_ray)


# ---------------------------------------------------------------- angular grid
def test_angular_weights_sum_to_two_pi():
    for M in (2, 8, 36, 64):
        a = AngularGrid(M)
        assert abs(a.weights.sum() - 2 * np.pi) < 1e-12


def test_antipode_is_exact_negation_and_involution():
    a = AngularGrid(16)
    assert np.array_equal(a.directions[a.antipode], -a.directions)
    assert np.array_equal(a.antipode[a.antipode], np.arange(16))


def test_angular_grid_rejects_odd_count():
    with pytest.raises(ValueError):
        AngularGrid(7)


def test_directions_are_unit_vectors():
    a = AngularGrid(20)
    assert np.allclose(np.linalg.norm(a.directions, axis=1), 1.0, atol=1e-15)


# ---------------------------------------------------------------- spatial grid
def test_square_nodes_tile_unit_square():
    g = SpatialGrid("unit-square", 9)
    assert g.X.min() == 0.0 and g.X.max() == 1.0
    assert g.Y.min() == 0.0 and g.Y.max() == 1.0
    assert g.inside.all()
    assert abs(g.integrate(np.ones(g.shape)) - 1.0) < 1e-14


def test_disk_active_nodes_inside_unit_circle():
    g = SpatialGrid("unit-disk", 21)
    r = np.hypot(g.X, g.Y)
    assert np.all(r[g.inside] <= 1.0 + 1e-12)
    assert np.all(r[~g.inside] > 1.0)


@pytest.mark.parametrize("kind", ["unit-square", "unit-disk"])
def test_boundary_normals_are_unit(kind):
    g = SpatialGrid(kind, 17)
    assert np.allclose(np.linalg.norm(g.boundary_normals, axis=1), 1.0, atol=1e-12)


def test_square_corner_normal_is_diagonal():
    g = SpatialGrid("unit-square", 5)
    i = np.argmin(np.hypot(g.boundary_points[:, 0], g.boundary_points[:, 1]))
    assert np.allclose(g.boundary_normals[i], [-np.sqrt(0.5), -np.sqrt(0.5)])


def test_unknown_domain_rejected():
    with pytest.raises(ValueError):
        SpatialGrid("unit-cube", 5)


def test_fill_and_fold_ghosts_are_transposes(rng):
    g = SpatialGrid("unit-disk", 15)
    a = rng.standard_normal(g.shape)
    b = rng.standard_normal(g.shape)
    lhs = np.sum(g.fill_ghosts(a.copy()) * b)
    rhs = np.sum(a * g.fold_ghosts(b.copy()))
    assert abs(lhs - rhs) < 1e-12 * (abs(lhs) + 1)


def test_bilinear_interpolation_reproduces_bilinear_functions(rng):
    g = SpatialGrid("unit-square", 11)
    f = 1.0 + 2.0 * g.X - 3.0 * g.Y + 0.5 * g.X * g.Y
    px, py = rng.uniform(0, 1, 50), rng.uniform(0, 1, 50)
    exact = 1.0 + 2.0 * px - 3.0 * py + 0.5 * px * py
    assert np.allclose(g.interpolate(f, px, py), exact, atol=1e-13)


# ---------------------------------------------------------------- exit times
def test_exit_times_square_center_axis():
    assert np.allclose(exit_times([0.5, 0.5], [1.0, 0.0], SpatialGrid("unit-square", 5)), (0.5, 0.5))


def test_exit_times_square_center_diagonal():
    v = [1 / np.sqrt(2), 1 / np.sqrt(2)]
    tm, tp = exit_times([0.5, 0.5], v, SpatialGrid("unit-square", 5))
    assert abs(tm - np.sqrt(2) / 2) < 1e-14 and abs(tp - np.sqrt(2) / 2) < 1e-14


def test_exit_times_disk_origin(rng):
    g = SpatialGrid("unit-disk", 9)
    for t in rng.uniform(0, 2 * np.pi, 10):
        assert np.allclose(exit_times([0, 0], [np.cos(t), np.sin(t)], g), (1.0, 1.0), atol=1e-14)


def test_exit_times_outflow_boundary_point_has_zero_forward_length():
    g = SpatialGrid("unit-disk", 9)
    x = np.array([np.cos(0.3), np.sin(0.3)])
    tm, tp = exit_times(x, x, g)  # v = n(x), pointing outward
    assert tp == 0.0 and abs(tm - 2.0) < 1e-12


def test_exit_times_rejects_outside_point():
    with pytest.raises(ValueError):
        exit_times([1.1, 0.5], [1, 0], SpatialGrid("unit-square", 5))


def test_exit_times_projects_marginal_points():
    tm, tp = exit_times([1.0 + 5e-11, 0.5], [1, 0], SpatialGrid("unit-square", 5))
    assert abs(tm - 1.0) < 1e-9 and tp == 0.0


@pytest.mark.parametrize("kind", ["unit-square", "unit-disk"])
def test_exit_points_on_boundary_and_reversal_symmetry(kind):
    g = SpatialGrid(kind, 11)
    a = AngularGrid(12)
    px = g.X[g.inside][:, None]
    py = g.Y[g.inside][:, None]
    vx, vy = a.directions[:, 0][None], a.directions[:, 1][None]
    tm, tp = g.exit_times(px, py, vx, vy)
    for s in (-tm, tp):
        qx, qy = px + s * vx, py + s * vy
        assert np.max(np.abs(g.signed_outside(qx, qy))) < 1e-10
    tm_r, tp_r = g.exit_times(px, py, -vx, -vy)
    assert np.max(np.abs(tm - tp_r)) < 1e-10
    assert np.all(tm >= 0) and np.all(tp >= 0)
    assert np.max(tm + tp) <= g.diameter + 1e-10


# ---------------------------------------------------------------- quadrature
def test_trapezoid_weights_on_unit_ray():
    q = ray_quadrature([1.0, 0.5], [1.0, 0.0], SpatialGrid("unit-square", 5), "trapezoid", 0.25)
    assert len(q.s) == 5
    assert np.allclose(q.weights, [0.125, 0.25, 0.25, 0.25, 0.125])


def test_simpson_exact_on_cubic():
    q = ray_quadrature([1.0, 0.5], [1.0, 0.0], SpatialGrid("unit-square", 5), "simpson", 0.25)
    assert abs(np.dot(q.weights, q.s ** 2) - 1.0 / 3.0) < 1e-15
    assert abs(np.dot(q.weights, q.s ** 3) - 0.25) < 1e-15


@pytest.mark.parametrize("rule", ["trapezoid", "simpson"])
def test_weights_nonnegative_and_sum_to_length(rule, rng):
    g = SpatialGrid("unit-disk", 9)
    for _ in range(20):
        x = rng.uniform(-0.6, 0.6, 2)
        t = rng.uniform(0, 2 * np.pi)
        v = [np.cos(t), np.sin(t)]
        q = ray_quadrature(x, v, g, rule, 0.07)
        tm, _ = exit_times(x, v, g)
        assert np.all(q.weights >= 0)
        assert abs(q.weights.sum() - tm) < 1e-10


def test_short_ray_reduces_to_two_node_trapezoid():
    q = ray_quadrature([0.01, 0.5], [1.0, 0.0], SpatialGrid("unit-square", 5), "simpson", 0.1)
    assert len(q.s) == 2 and np.allclose(q.weights, [0.005, 0.005])


def test_path_weights_rejects_unknown_rule():
    with pytest.raises(ValueError):
        path_weights(3, 0.1, 0.2, "gauss")


def _smooth(p):
    return np.exp(0.7 * p[:, 0]) * np.cos(1.3 * p[:, 1])


@pytest.mark.parametrize("rule,order", [("trapezoid", 2), ("simpson", 4)])
def test_quadrature_convergence_order_against_dense_oracle(rule, order):
    g = SpatialGrid("unit-square", 5)
    x, v = np.array([0.9, 0.8]), np.array([0.6, 0.8])
    tm, _ = exit_times(x, v, g)
    errs = []
    steps = [tm / 8, tm / 16, tm / 32]
    for st in steps:
        q = ray_quadrature(x, v, g, rule, st * (1 + 1e-13))
        dense = ray_quadrature(x, v, g, "simpson", st / 64)
        errs.append(abs(np.dot(q.weights, _smooth(q.points)) - np.dot(dense.weights, _smooth(dense.points))))
    slopes = np.diff(np.log(errs)) / np.diff(np.log(steps))
    assert np.all(slopes > order - 0.3)


def test_trace_ray_endpoints():
    g = SpatialGrid("unit-disk", 9)
    tr = trace_ray([0.2, -0.1], [0.0, 1.0], g)
    assert abs(np.hypot(*tr.entry) - 1) < 1e-12 and abs(np.hypot(*tr.exit) - 1) < 1e-12
    assert tr.quadrature is not None
