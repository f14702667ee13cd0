"""
Source iteration for the stationary transport equation on discrete ordinates.

The discrete problem reads ``u = B g + T(sigma_s K u + q)`` where ``B`` is the
attenuated boundary trace (ballistic operator), ``T`` integrates a source
along backward rays with attenuation ``exp(-int sigma_t)`` and ``K`` is the
scattering matrix. :class:`TransportProblem` bundles the ray tables of one
attenuation field with the scattering data and offers forward, reversed and
exactly transposed solves, plus the derivatives with respect to ``sigma_t``
needed by the reconstruction code.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from ..grid import AngularGrid, SpatialGrid
from . import _kernels as kern
from .phase import PhaseFunction

logger = logging.getLogger(__name__)

BoundarySource = Union[None, float, Callable[[np.ndarray, np.ndarray], np.ndarray]]

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 5000
# Ray tables above this size are not stored; weights are recomputed per sweep.
TABLE_LIMIT_BYTES = 700 * 2**20


class ConvergenceError(RuntimeError):
    """Source iteration did not reach the tolerance within ``max_iter`` sweeps."""

    def __init__(self, residual: float, iterations: int, field=None):
        super().__init__(
            f"source iteration stopped after {iterations} sweeps with relative update {residual:.3e}"
        )
        self.residual = residual
        self.iterations = iterations
        self.field = field


@dataclass
class TransportSolution:
    """Converged phase-space field with its iteration history.

    ``residuals`` holds the sup-norm of successive updates
    ``|u^{T+1} - u^T|`` (absolute, one entry per sweep).
    """

    u: np.ndarray
    iterations: int
    residuals: list = field(default_factory=list)

    def __array__(self, dtype=None, copy=None):
        return self.u if dtype is None else self.u.astype(dtype)


@dataclass
class TransposeSolution:
    """Result of a transposed solve: ``z = S^T r`` and the adjoint state ``mu``."""

    z: np.ndarray
    mu: np.ndarray
    iterations: int
    residuals: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# geometry shared by all attenuation fields on a (grid, angular, step) triple
# ---------------------------------------------------------------------------
_GEOMETRY_CACHE: dict = {}


class RayGeometry:
    """Exit lengths, boundary end points and sample counts of all backward rays."""

    def __init__(self, grid: SpatialGrid, angular: AngularGrid, step: float | None = None):
        self.grid = grid
        self.angular = angular
        self.step = float(grid.h if step is None else step)
        if self.step <= 0:
            raise ValueError("ray step must be positive")
        px = grid.X.ravel()[grid.active]
        py = grid.Y.ravel()[grid.active]
        d = angular.directions
        tau, _ = grid.exit_times(px[None, :], py[None, :], d[:, :1], d[:, 1:])
        self.tau = np.ascontiguousarray(tau)
        ex = px[None, :] - tau * d[:, :1]
        ey = py[None, :] - tau * d[:, 1:]
        self.end_x, self.end_y = grid.project(ex, ey)
        counts = kern.sample_counts(self.tau, self.step)
        self.ptr = np.zeros(counts.size + 1, dtype=np.int64)
        np.cumsum(counts.ravel(), out=self.ptr[1:])
        self.maxlen = int(counts.max())
        self.dirs = np.ascontiguousarray(d)

    @classmethod
    def get(cls, grid: SpatialGrid, angular: AngularGrid, step: float | None = None) -> "RayGeometry":
        key = (grid.kind, grid.nx, angular.M, float(grid.h if step is None else step))
        geo = _GEOMETRY_CACHE.get(key)
        if geo is None:
            if len(_GEOMETRY_CACHE) > 16:
                _GEOMETRY_CACHE.clear()
            geo = _GEOMETRY_CACHE[key] = cls(grid, angular, step)
        return geo

    @property
    def n_samples(self) -> int:
        return int(self.ptr[-1])

    def lattice_args(self):
        g = self.grid
        return (g.x0, g.y0, g.h, g.nx, g.ny, self.dirs, g.active, self.tau, self.step)

    def boundary_values(self, g: BoundarySource) -> np.ndarray:
        """Boundary data at the end point of every ray, shape ``(M, n_active)``."""
        if g is None:
            return np.zeros_like(self.tau)
        if callable(g):
            vals = np.asarray(g(self.end_x, self.end_y), dtype=float)
            return np.ascontiguousarray(np.broadcast_to(vals, self.tau.shape))
        return np.full_like(self.tau, float(g))


class TransportOperator:
    """Ray integrals for one attenuation field ``sigma_t``.

    Parameters
    ----------
    geometry : RayGeometry
    sigma_t : ndarray, shape (nx, ny)
        Total attenuation.
    table_limit : int
        Byte budget for storing per-sample attenuation weights. Above it the
        weights are recomputed on the fly in every sweep.
    """

    def __init__(self, geometry: RayGeometry, sigma_t: np.ndarray, table_limit: int = TABLE_LIMIT_BYTES):
        self.geometry = geometry
        grid = geometry.grid
        sig = np.array(sigma_t, dtype=float)
        if sig.shape != grid.shape:
            raise ValueError(f"sigma_t has shape {sig.shape}, grid is {grid.shape}")
        if np.any(sig[grid.inside] < 0):
            raise ValueError("attenuation must be nonnegative")
        self.sigma = np.ascontiguousarray(grid.fill_ghosts(sig))
        self.atten = np.empty_like(geometry.tau)
        args = geometry.lattice_args()
        self.use_table = geometry.n_samples * 8 <= table_limit
        if self.use_table:
            self.wtab = np.empty(geometry.n_samples)
            kern.build_table(self.sigma, *args, geometry.ptr, self.wtab, self.atten)
        else:
            self.wtab = np.empty(1)
            kern.boundary_attenuation(self.sigma, *args, self.atten)

    @property
    def grid(self) -> SpatialGrid:
        return self.geometry.grid

    def _zeros(self):
        g = self.grid
        return np.zeros((self.geometry.angular.M, g.nx, g.ny))

    def ballistic(self, gb: np.ndarray) -> np.ndarray:
        """``B g`` given boundary values at the ray ends (see ``RayGeometry.boundary_values``)."""
        out = self._zeros()
        flat = out.reshape(out.shape[0], -1)
        flat[:, self.grid.active] = self.atten * gb
        return self.grid.fill_ghosts(out)

    def sweep(self, src: np.ndarray) -> np.ndarray:
        """``T src`` for a ghost-filled phase-space source."""
        src = np.ascontiguousarray(src, dtype=float)
        out = self._zeros()
        kern.sweep(src, self.sigma, self.use_table, self.geometry.ptr, self.wtab,
                   *self.geometry.lattice_args(), out)
        return self.grid.fill_ghosts(out)

    def sweep_transpose(self, lam: np.ndarray) -> np.ndarray:
        """Transpose of :meth:`sweep` with respect to the active-node inner product."""
        lam = np.ascontiguousarray(lam, dtype=float)
        out = self._zeros()
        kern.sweep_transpose(lam, self.sigma, self.use_table, self.geometry.ptr, self.wtab,
                             *self.geometry.lattice_args(), out)
        return self.grid.fold_ghosts(out)

    def tangent(self, src: np.ndarray, gb: np.ndarray, dsigma: np.ndarray) -> np.ndarray:
        """Derivative of ``B g + T src`` in the direction ``dsigma`` of ``sigma_t``."""
        ds = np.ascontiguousarray(self.grid.fill_ghosts(np.array(dsigma, dtype=float)))
        out = self._zeros()
        kern.tangent(np.ascontiguousarray(src, dtype=float), gb, self.sigma, ds,
                     *self.geometry.lattice_args(), out)
        return self.grid.fill_ghosts(out)

    def sigma_adjoint(self, lam: np.ndarray, src: np.ndarray, gb: np.ndarray) -> np.ndarray:
        """Gradient of ``<lam, B g + T src>`` with respect to nodal ``sigma_t``."""
        out = self._zeros()
        kern.sigma_adjoint(np.ascontiguousarray(lam, dtype=float), np.ascontiguousarray(src, dtype=float),
                           gb, self.sigma, *self.geometry.lattice_args(), self.geometry.maxlen, out)
        grad = out.sum(axis=0)
        return self.grid.fold_ghosts(grad)


def _as_phase_source(q, M: int, grid: SpatialGrid) -> np.ndarray | None:
    if q is None:
        return None
    q = np.asarray(q, dtype=float)
    if q.shape == grid.shape:
        q = np.broadcast_to(q, (M,) + grid.shape)
    if q.shape != (M,) + grid.shape:
        raise ValueError(f"volumetric source has shape {q.shape}")
    return grid.fill_ghosts(np.array(q))


class TransportProblem:
    """Discrete transport problem with fixed attenuation and scattering.

    Parameters
    ----------
    grid, angular : SpatialGrid, AngularGrid
    sigma_t : ndarray
        Total attenuation (``sigma_xtf`` for excitation, ``sigma_mt`` for emission).
    sigma_s : ndarray
        Scattering coefficient.
    phase : PhaseFunction
    step : float, optional
        Ray step, defaults to the grid spacing.
    """

    def __init__(self, grid: SpatialGrid, angular: AngularGrid, sigma_t, sigma_s,
                 phase: PhaseFunction, step: float | None = None,
                 table_limit: int = TABLE_LIMIT_BYTES):
        if phase.K.shape[0] != angular.M:
            raise ValueError("phase function and angular grid disagree on M")
        self.grid = grid
        self.angular = angular
        self.phase = phase
        self.geometry = RayGeometry.get(grid, angular, step)
        self.op = TransportOperator(self.geometry, sigma_t, table_limit)
        sig_s = np.array(sigma_s, dtype=float)
        if sig_s.shape != grid.shape:
            raise ValueError(f"sigma_s has shape {sig_s.shape}, grid is {grid.shape}")
        if np.any(sig_s[grid.inside] < 0):
            raise ValueError("scattering coefficient must be nonnegative")
        self.sigma_s = grid.fill_ghosts(sig_s)
        self.sigma_t = self.op.sigma
        self.scattering = bool(np.any(self.sigma_s[grid.inside] > 0))

    # --------------------------------------------------------------- pieces
    def boundary_values(self, g: BoundarySource) -> np.ndarray:
        return self.geometry.boundary_values(g)

    def ballistic(self, g: BoundarySource) -> np.ndarray:
        return self.op.ballistic(self.boundary_values(g))

    def scattering_source(self, u: np.ndarray, q: np.ndarray | None = None) -> np.ndarray:
        s = self.sigma_s * self.phase.apply(u)
        if q is not None:
            s = s + q
        return s

    def fixed_point_map(self, u, g: BoundarySource = None, q=None) -> np.ndarray:
        q = _as_phase_source(q, self.angular.M, self.grid)
        return self.ballistic(g) + self.op.sweep(self.scattering_source(u, q))

    def residual(self, u, g: BoundarySource = None, q=None) -> float:
        """Relative sup-norm residual of the discrete fixed-point equation."""
        r = self.fixed_point_map(u, g, q) - u
        mask = self.grid.inside
        scale = np.max(np.abs(u[:, mask])) or 1.0
        return float(np.max(np.abs(r[:, mask])) / scale)

    # -------------------------------------------------------------- solvers
    def iterate(self, direct: np.ndarray, q: np.ndarray | None, tol: float = DEFAULT_TOL,
                max_iter: int = DEFAULT_MAX_ITER, u0: np.ndarray | None = None) -> TransportSolution:
        """Source iteration ``u <- direct + T(sigma_s K u + q)``."""
        if tol <= 0:
            raise ValueError("tol must be positive")
        mask = self.grid.inside
        if not self.scattering:
            src = q if q is not None else None
            u = direct if src is None else direct + self.op.sweep(src)
            return TransportSolution(u, 1, [float(np.max(np.abs(u[:, mask]), initial=0.0))])
        u = np.zeros_like(direct) if u0 is None else np.array(u0, dtype=float)
        residuals = []
        for it in range(1, max_iter + 1):
            u_new = direct + self.op.sweep(self.scattering_source(u, q))
            diff = float(np.max(np.abs(u_new[:, mask] - u[:, mask]), initial=0.0))
            scale = float(np.max(np.abs(u_new[:, mask]), initial=0.0))
            residuals.append(diff)
            u = u_new
            if diff <= tol * scale or scale == 0.0:
                return TransportSolution(u, it, residuals)
        raise ConvergenceError(residuals[-1] / (scale or 1.0), max_iter, u)

    def solve(self, g: BoundarySource = None, q=None, tol: float = DEFAULT_TOL,
              max_iter: int = DEFAULT_MAX_ITER, u0=None) -> TransportSolution:
        """Forward solve with inflow ``g`` on the incoming boundary and source ``q``."""
        q = _as_phase_source(q, self.angular.M, self.grid)
        direct = self.ballistic(g)
        return self.iterate(direct, q, tol, max_iter, u0)

    def solve_reversed(self, g: BoundarySource = None, q=None, tol: float = DEFAULT_TOL,
                       max_iter: int = DEFAULT_MAX_ITER, u0=None) -> TransportSolution:
        """Solve ``-v . grad f + sigma_t f = sigma_s K f + q`` with ``f = g`` on the outflow boundary.

        Implemented as a forward solve in the antipodal directions.
        """
        flip = self.angular.antipode
        q = _as_phase_source(q, self.angular.M, self.grid)
        sol = self.solve(g, None if q is None else q[flip], tol, max_iter,
                         None if u0 is None else np.asarray(u0)[flip])
        sol.u = sol.u[flip]
        return sol

    def solve_transpose(self, r: np.ndarray, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                        mu0=None) -> TransposeSolution:
        """Apply the exact transpose of the zero-inflow solution operator.

        With ``S q = (I - T sigma_s K)^{-1} T q`` this returns ``z = S^T r`` and
        the adjoint state ``mu = (I - T sigma_s K)^{-T} r`` that satisfies
        ``mu = r + K^T sigma_s T^T mu`` (ghost entries of ``r`` are ignored).
        """
        r = self.grid.zero_ghosts(np.array(r, dtype=float))
        mask = self.grid.inside
        if not self.scattering:
            return TransposeSolution(self.op.sweep_transpose(r), r, 1, [])
        mu = r.copy() if mu0 is None else np.array(mu0, dtype=float)
        residuals = []
        for it in range(1, max_iter + 1):
            z = self.op.sweep_transpose(mu)
            mu_new = r + self.phase.apply_transpose(self.sigma_s * z)
            self.grid.zero_ghosts(mu_new)
            diff = float(np.max(np.abs(mu_new[:, mask] - mu[:, mask]), initial=0.0))
            scale = float(np.max(np.abs(mu_new[:, mask]), initial=0.0))
            residuals.append(diff)
            mu = mu_new
            if diff <= tol * scale or scale == 0.0:
                return TransposeSolution(self.op.sweep_transpose(mu), mu, it, residuals)
        raise ConvergenceError(residuals[-1] / (scale or 1.0), max_iter, mu)

    def solve_reversed_transpose(self, r: np.ndarray, tol: float = DEFAULT_TOL,
                                 max_iter: int = DEFAULT_MAX_ITER) -> TransposeSolution:
        """Transpose of the zero-inflow :meth:`solve_reversed` operator."""
        flip = self.angular.antipode
        sol = self.solve_transpose(np.asarray(r)[flip], tol, max_iter)
        sol.z = sol.z[flip]
        sol.mu = sol.mu[flip]
        return sol


# ---------------------------------------------------------------------------
# functional interface
# ---------------------------------------------------------------------------
def ballistic(g_bdy: BoundarySource, sigma_total, grid: SpatialGrid, angular: AngularGrid,
              step: float | None = None) -> np.ndarray:
    """Attenuated boundary trace ``g(x - tau v) exp(-int_0^tau sigma_total)``."""
    geo = RayGeometry.get(grid, angular, step)
    op = TransportOperator(geo, sigma_total)
    return op.ballistic(geo.boundary_values(g_bdy))


def solve_forward(g_bdy: BoundarySource, q_vol, sigma_total, sigma_scat, phase: PhaseFunction,
                  grid: SpatialGrid, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                  step: float | None = None) -> TransportSolution:
    """Forward transport solve; see :meth:`TransportProblem.solve`."""
    prob = TransportProblem(grid, phase.angular, sigma_total, sigma_scat, phase, step)
    return prob.solve(g_bdy, q_vol, tol, max_iter)


def solve_adjoint(q_vol, sigma_total, sigma_scat, phase: PhaseFunction, grid: SpatialGrid,
                  tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                  g_bdy: BoundarySource = None, step: float | None = None) -> TransportSolution:
    """Reversed-direction solve with zero (or ``g_bdy``) data on the outflow boundary."""
    prob = TransportProblem(grid, phase.angular, sigma_total, sigma_scat, phase, step)
    return prob.solve_reversed(g_bdy, q_vol, tol, max_iter)


def solve_transpose(r, sigma_total, sigma_scat, phase: PhaseFunction, grid: SpatialGrid,
                    tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                    step: float | None = None) -> TransposeSolution:
    """Exact discrete transpose of the zero-inflow forward solution operator."""
    prob = TransportProblem(grid, phase.angular, sigma_total, sigma_scat, phase, step)
    return prob.solve_transpose(r, tol, max_iter)
