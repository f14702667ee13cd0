import numpy as np
import pytest

from fumot.grid import AngularGrid, SpatialGrid
from fumot.transport import (AdmissibleBounds, AngularRefinement, CoefficientSet, ConvergenceError,
                             TransportProblem, ballistic, hg_kernel, p_hg, refine_directions,
                             refine_directions_transpose, scatter, solve_adjoint, solve_forward,
                             solve_transpose)

from conftest import random_coefficients


# ---------------------------------------------------------------- phase function
def test_isotropic_kernel_is_constant():
    ph = hg_kernel(0.0, AngularGrid(12))
    assert np.allclose(ph.p, 1 / (2 * np.pi), atol=1e-15)


def test_hg_forward_peak_value():
    assert abs(p_hg(1.0, 0.5) - 3 / (2 * np.pi)) < 1e-15


@pytest.mark.parametrize("g", [-0.9, -0.3, 0.0, 0.5, 0.95])
def test_kernel_rows_normalized_symmetric_positive(g):
    a = AngularGrid(24)
    ph = hg_kernel(g, a)
    assert np.max(np.abs(ph.p @ a.weights - 1)) < 1e-12
    assert np.array_equal(ph.p, ph.p.T)
    assert ph.p.min() > 0


@pytest.mark.parametrize("g", [1.0, -1.0, 1.5])
def test_kernel_rejects_bad_anisotropy(g):
    with pytest.raises(ValueError):
        hg_kernel(g, AngularGrid(8))


def test_scatter_constant_and_isotropic_mean(rng):
    a = AngularGrid(16)
    f = np.full((16, 3, 3), 2.5)
    assert np.allclose(scatter(f, hg_kernel(0.7, a)), 2.5, atol=1e-13)
    f = rng.standard_normal((16, 3, 3))
    iso = scatter(f, hg_kernel(0.0, a))
    assert np.allclose(iso, a.integrate(f)[None] / (2 * np.pi), atol=1e-14)


def test_scatter_matches_dense_loop(rng):
    a = AngularGrid(10)
    ph = hg_kernel(0.6, a)
    f = rng.standard_normal((10, 4, 5))
    ref = np.zeros_like(f)
    for k in range(10):
        for kp in range(10):
            cos = a.directions[k] @ a.directions[kp]
            ref[k] += p_hg(np.clip(cos, -1, 1), 0.6) / np.sum(p_hg(np.clip(a.directions[k] @ a.directions.T, -1, 1), 0.6) * a.weights) * f[kp] * a.weights[kp]
    assert np.max(np.abs(scatter(f, ph) - ref)) < 1e-13


# ---------------------------------------------------------------- coefficients
def test_coefficient_totals_and_admissibility():
    g = SpatialGrid("unit-square", 5)
    one = np.ones(g.shape)
    c = CoefficientSet(0.2 * one, 0.3 * one, 0.5 * one, 0.4 * one, 2 * one, 0.5 * one)
    assert np.allclose(c.sigma_xt, 0.5) and np.allclose(c.sigma_xtf, 1.0) and np.allclose(c.sigma_mt, 2.4)
    c.check_admissible()
    with pytest.raises(ValueError):
        c.with_eta(1.2 * one).check_admissible()
    with pytest.raises(ValueError):
        AdmissibleBounds(c6=1.0)
    with pytest.raises(ValueError):
        CoefficientSet(one, one, np.ones((4, 4)))


# ---------------------------------------------------------------- ballistic
def test_ballistic_vacuum_is_boundary_value(small_setup):
    grid, ang, _ = small_setup
    u = ballistic(1.0, np.zeros(grid.shape), grid, ang)
    assert np.allclose(u[:, grid.inside], 1.0, atol=1e-15)


def test_ballistic_constant_attenuation_analytic(small_setup):
    grid, ang, _ = small_setup
    s0 = 0.7
    g = lambda x, y: 1.0 + x + 0.5 * y
    u = ballistic(g, np.full(grid.shape, s0), grid, ang)
    px, py = grid.X[grid.inside], grid.Y[grid.inside]
    for k, (vx, vy) in enumerate(ang.directions):
        tm, _ = grid.exit_times(px, py, vx, vy)
        ex, ey = grid.project(px - tm * vx, py - tm * vy)
        assert np.allclose(u[k][grid.inside], g(ex, ey) * np.exp(-s0 * tm), rtol=1e-12)


def test_ballistic_linear_attenuation_second_order():
    # sigma = x on the square: exact optical depth along the backward ray
    errs = []
    ns = [9, 17, 33]
    for n in ns:
        grid = SpatialGrid("unit-square", n)
        ang = AngularGrid(8)
        u = ballistic(1.0, grid.X.copy(), grid, ang)
        px, py = grid.X.ravel(), grid.Y.ravel()
        e = 0.0
        for k, (vx, vy) in enumerate(ang.directions):
            tm, _ = grid.exit_times(px, py, vx, vy)
            depth = tm * px - 0.5 * tm * tm * vx
            e = max(e, np.max(np.abs(u[k].ravel() - np.exp(-depth)) / np.exp(-depth)))
        errs.append(e)
    # sigma = x is linear, so bilinear interpolation and the trapezoid rule are exact up to rounding
    assert max(errs) < 1e-12


def test_ballistic_smooth_attenuation_converges_second_order():
    def exact_depth(px, py, vx, vy, tm, m=4000):
        s = np.linspace(0, 1, m + 1)[None] * tm[:, None]
        x = px[:, None] - s * vx
        y = py[:, None] - s * vy
        f = np.sin(2 * x) * np.cos(y) + 1.2
        return np.trapezoid(f, s, axis=1)

    errs, hs = [], []
    for n in (9, 17, 33):
        grid = SpatialGrid("unit-square", n)
        ang = AngularGrid(4)
        sig = np.sin(2 * grid.X) * np.cos(grid.Y) + 1.2
        u = ballistic(1.0, sig, grid, ang)
        px, py = np.array([0.5, 0.75]), np.array([0.5, 0.25])
        i = np.rint(px / grid.h).astype(int)
        j = np.rint(py / grid.h).astype(int)
        vx, vy = ang.directions[1]
        tm, _ = grid.exit_times(px, py, vx, vy)
        errs.append(np.max(np.abs(u[1][i, j] - np.exp(-exact_depth(px, py, vx, vy, tm)))))
        hs.append(grid.h)
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert slope > 1.7


# ---------------------------------------------------------------- forward solver
def _problem(grid, ang, ph, rng, ratio=0.8):
    st = random_coefficients(grid, rng, 0.5, 2.0)
    ss = ratio * st * random_coefficients(grid, rng, 0.5, 1.0)
    return TransportProblem(grid, ang, st, ss, ph)


def test_no_scattering_returns_ballistic_in_one_sweep(small_setup):
    grid, ang, ph = small_setup
    st = np.full(grid.shape, 0.8)
    sol = solve_forward(1.0, None, st, np.zeros(grid.shape), ph, grid)
    assert sol.iterations == 1
    assert np.array_equal(sol.u, ballistic(1.0, st, grid, ang))


def _dense_matrix(op, shape):
    n = int(np.prod(shape))
    A = np.zeros((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        A[:, i] = op(e.reshape(shape)).ravel()
    return A


def test_forward_matches_neumann_series_and_dense_solve(rng):
    grid = SpatialGrid("unit-square", 8)
    ang = AngularGrid(8)
    ph = hg_kernel(0.5, ang)
    prob = _problem(grid, ang, ph, rng)
    g = lambda x, y: 1.0 + 0.5 * np.cos(3 * x + y)
    sol = prob.solve(g, tol=1e-13)
    B = prob.ballistic(g)
    # Neumann series with a geometric tail bound
    rho = float(np.max(prob.sigma_s / prob.sigma_t))
    J = int(np.ceil(np.log(1e-10 * (1 - rho) / np.max(B)) / np.log(rho)))
    term, series = B.copy(), B.copy()
    for _ in range(J):
        term = prob.op.sweep(prob.sigma_s * ph.apply(term))
        series += term
    assert np.max(np.abs(sol.u - series)) < 1e-8
    # direct solve of (I - T sigma_s K) u = B g with the assembled matrix
    shape = (ang.M,) + grid.shape
    A = _dense_matrix(lambda f: prob.op.sweep(prob.sigma_s * ph.apply(f)), shape)
    u = np.linalg.solve(np.eye(A.shape[0]) - A, B.ravel()).reshape(shape)
    assert np.max(np.abs(sol.u - u)) < 1e-10


def test_maximum_principle_bounds(small_setup, rng):
    grid, ang, ph = small_setup
    for _ in range(3):
        prob = _problem(grid, ang, ph, rng)
        g = lambda x, y: 1.0 + 0.5 * np.sin(4 * x) * np.cos(3 * y)
        u = prob.solve(g).u[:, grid.inside]
        gb = prob.boundary_values(g)
        lower = np.exp(-grid.diameter * prob.sigma_t[grid.inside].max()) * gb.min()
        assert u.min() >= lower and u.max() <= gb.max() * (1 + 1e-12)


def test_contraction_rate(small_setup, rng):
    grid, ang, ph = small_setup
    prob = _problem(grid, ang, ph, rng, ratio=0.9)
    sol = prob.solve(1.0, tol=1e-12)
    res = np.array(sol.residuals)
    ratios = res[1:] / res[:-1]
    bound = np.max(prob.sigma_s[grid.inside] / prob.sigma_t[grid.inside])
    assert np.all(ratios <= bound + 0.05)


def test_solution_residual_below_tolerance(small_setup, rng):
    grid, ang, ph = small_setup
    prob = _problem(grid, ang, ph, rng)
    q = rng.uniform(0, 1, (ang.M,) + grid.shape)
    tol = 1e-9
    sol = prob.solve(1.0, q, tol=tol)
    assert prob.residual(sol.u, 1.0, q) <= 10 * tol


def test_nonconvergence_is_signalled(small_setup, rng):
    grid, ang, ph = small_setup
    prob = _problem(grid, ang, ph, rng, ratio=0.95)
    with pytest.raises(ConvergenceError) as err:
        prob.solve(1.0, tol=1e-14, max_iter=3)
    assert err.value.iterations == 3 and err.value.residual > 0


def test_rotation_equivariance():
    n, M = 11, 8
    grid = SpatialGrid("unit-square", n)
    ang = AngularGrid(M)
    ph = hg_kernel(0.4, ang)
    st = 1.0 + grid.X ** 2 + 0.3 * grid.Y
    ss = 0.5 + 0.2 * grid.X * grid.Y
    g = lambda x, y: 1.0 + x + 2 * y ** 2

    def rot(f):
        # f'(x', y') = f(R^-1 (x', y')) with R the quarter turn about the centre
        i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        return f[..., j, n - 1 - i]

    g_rot = lambda x, y: g(y, 1 - x)
    u = TransportProblem(grid, ang, st, ss, ph).solve(g, tol=1e-14).u
    u_rot = TransportProblem(grid, ang, rot(st), rot(ss), ph).solve(g_rot, tol=1e-14).u
    shift = M // 4
    assert np.max(np.abs(u_rot - rot(np.roll(u, shift, axis=0)))) < 1e-12


# ---------------------------------------------------------------- adjoint solves
def test_adjoint_of_zero_source_is_zero(small_setup):
    grid, ang, ph = small_setup
    q = solve_adjoint(np.zeros((ang.M,) + grid.shape), np.ones(grid.shape), 0.5 * np.ones(grid.shape), ph, grid)
    assert np.all(q.u == 0)


def test_adjoint_equals_reversed_forward(small_setup, rng):
    grid, ang, ph = small_setup
    st = random_coefficients(grid, rng, 0.5, 1.5)
    ss = 0.5 * st
    q = rng.uniform(0, 1, (ang.M,) + grid.shape)
    adj = solve_adjoint(q, st, ss, ph, grid, tol=1e-13).u
    fwd = solve_forward(None, q[ang.antipode], st, ss, ph, grid, tol=1e-13).u
    assert np.max(np.abs(adj - fwd[ang.antipode])) < 1e-14


def test_reversed_solution_satisfies_reversed_fixed_point(small_setup, rng):
    grid, ang, ph = small_setup
    st = random_coefficients(grid, rng, 0.5, 1.5)
    prob = TransportProblem(grid, ang, st, 0.6 * st, ph)
    q = np.broadcast_to(rng.uniform(0, 1, grid.shape), (ang.M,) + grid.shape)
    f = prob.solve_reversed(None, q, tol=1e-12).u
    flip = ang.antipode
    assert prob.residual(f[flip], None, q[flip]) < 1e-10


def test_transpose_inner_product_identity(small_setup, rng):
    grid, ang, ph = small_setup
    st = random_coefficients(grid, rng, 0.5, 1.5)
    ss = 0.7 * st
    shape = (ang.M,) + grid.shape
    q = grid.zero_ghosts(rng.standard_normal(shape))
    r = grid.zero_ghosts(rng.standard_normal(shape))
    u = solve_forward(None, q, st, ss, ph, grid, tol=1e-14).u
    z = solve_transpose(r, st, ss, ph, grid, tol=1e-14).z
    lhs = np.sum(grid.zero_ghosts(u.copy()) * r)
    rhs = np.sum(q * z)
    assert abs(lhs - rhs) < 1e-10 * max(abs(lhs), 1)


# ---------------------------------------------------------------- angular refinement
def test_refine_directions_transpose_identity(rng):
    f = rng.standard_normal((6, 3, 2))
    g = rng.standard_normal((24, 3, 2))
    assert abs(np.sum(refine_directions(f, 4) * g) - np.sum(f * refine_directions_transpose(g, 4))) < 1e-12
    # coarse ordinates are reproduced exactly, midpoints are averages
    r = refine_directions(f, 2)
    assert np.array_equal(r[::2], f)
    assert np.allclose(r[1::2], 0.5 * (f + np.roll(f, -1, axis=0)))


def test_refinement_without_scattering_is_fine_ballistic(small_setup):
    grid, ang, ph = small_setup
    st = 0.5 + grid.X ** 2
    prob = TransportProblem(grid, ang, st, np.zeros(grid.shape), ph)
    ref = AngularRefinement(grid, ang, ph, 4)
    g = lambda x, y: 2 + np.sin(5 * x)
    sol = ref.solve(prob, g)
    fine = AngularGrid(4 * ang.M)
    assert np.max(np.abs(sol.u - ballistic(g, st, grid, fine))) < 1e-14


def test_refinement_approaches_fine_discrete_ordinates():
    # the collided part is smooth in angle, so coarse-collided + fine-ballistic tracks the fine solve
    grid = SpatialGrid("unit-square", 17)
    g = lambda x, y: 5 * np.sin(4 * np.pi * x) ** 2 + 5 * np.sin(4 * np.pi * y) ** 2
    st = np.full(grid.shape, 0.6)
    ss = np.full(grid.shape, 0.2)
    fine = AngularGrid(64)
    u_ref = TransportProblem(grid, fine, st, ss, hg_kernel(0.5, fine)).solve(g, tol=1e-12).u
    errs = []
    for M in (8, 16):
        ang = AngularGrid(M)
        ph = hg_kernel(0.5, ang)
        prob = TransportProblem(grid, ang, st, ss, ph)
        R = 64 // M
        u = AngularRefinement(grid, ang, ph, R).solve(prob, g, tol=1e-12).u
        plain = prob.solve(g, tol=1e-12).u
        scale = np.max(u_ref)
        errs.append(np.sqrt(np.mean((u - u_ref) ** 2)) / scale)
        # on the coarse ordinates the refined solve beats plain discrete ordinates
        assert np.max(np.abs(u[::R] - u_ref[::R])) < 0.2 * np.max(np.abs(plain - u_ref[::R]))
    assert errs[1] < errs[0] and errs[1] < 0.01


def test_refined_sigma_adjoint_matches_finite_differences(rng):
    grid = SpatialGrid("unit-square", 9)
    ang = AngularGrid(8)
    ph = hg_kernel(0.5, ang)
    ref = AngularRefinement(grid, ang, ph, 3)
    st = random_coefficients(grid, rng, 0.5, 1.5)
    ss = 0.4 * st
    g = lambda x, y: 1 + np.sin(3 * x) ** 2
    r = rng.standard_normal((ref.fine.M,) + grid.shape)

    def J(s):
        return np.sum(r * ref.solve(TransportProblem(grid, ang, s, ss, ph), g, tol=1e-14).u)

    prob = TransportProblem(grid, ang, st, ss, ph)
    sol = ref.solve(prob, g, tol=1e-14)
    grad, _ = ref.sigma_adjoint(prob, sol, r, tol=1e-14)
    d = rng.standard_normal(grid.shape)
    eps = 1e-6
    fd = (J(st + eps * d) - J(st - eps * d)) / (2 * eps)
    assert abs(fd - np.sum(grad * d)) < 1e-6 * abs(fd)
    du = ref.tangent(prob, sol, d, tol=1e-14)
    assert abs(np.sum(r * du) - fd) < 1e-6 * abs(fd)
