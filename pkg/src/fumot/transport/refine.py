"""
Angular refinement of the uncollided field.

With a boundary source that oscillates along the boundary, the uncollided
part ``u0 = B g`` varies rapidly in angle and the discrete-ordinates
quadratures of ``int u(v) u(-v) dv`` show strong ray effects. The collided
part is smooth in angle because it is an average through the scattering
kernel. The refined field is therefore split as

    u = u0_fine + P u1,     u1 = (I - T sigma_s K)^{-1} T (sigma_s K_cf u0_fine)

where ``u0_fine`` is the ballistic field on ``R M`` ordinates, ``K_cf`` the
scattering kernel from the fine to the coarse ordinates, ``u1`` the collided
field solved on the ``M`` coarse ordinates and ``P`` periodic linear
interpolation in angle. Every step is linear in the data and differentiable in
``sigma_t``; :meth:`AngularRefinement.sigma_adjoint` and
:meth:`AngularRefinement.tangent` are the exact derivatives of this discrete
map.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..grid import AngularGrid, SpatialGrid
from .phase import PhaseFunction, hg_kernel
from .solver import DEFAULT_MAX_ITER, DEFAULT_TOL, BoundarySource, RayGeometry, TransportOperator

__all__ = ["AngularRefinement", "RefinedSolution", "refine_directions",
           "refine_directions_transpose"]


def refine_directions(f: np.ndarray, factor: int) -> np.ndarray:
    """Periodic linear interpolation from ``M`` to ``factor * M`` ordinates (axis 0)."""
    if factor == 1:
        return np.array(f, dtype=float)
    M = f.shape[0]
    out = np.empty((M, factor) + f.shape[1:])
    nxt = np.roll(f, -1, axis=0)
    for r in range(factor):
        t = r / factor
        out[:, r] = (1.0 - t) * f + t * nxt
    return out.reshape((M * factor,) + f.shape[1:])


def refine_directions_transpose(g: np.ndarray, factor: int) -> np.ndarray:
    """Transpose of :func:`refine_directions`."""
    if factor == 1:
        return np.array(g, dtype=float)
    M = g.shape[0] // factor
    gr = g.reshape((M, factor) + g.shape[1:])
    t = (np.arange(factor) / factor).reshape((1, factor) + (1,) * (g.ndim - 1))
    same = np.sum((1.0 - t) * gr, axis=1)
    prev = np.sum(t * gr, axis=1)
    return same + np.roll(prev, 1, axis=0)


@dataclass
class RefinedSolution:
    """Refined excitation field and the pieces needed for its derivatives."""

    u: np.ndarray          # (R M, nx, ny) full field on the fine ordinates
    u0: np.ndarray         # (R M, nx, ny) ballistic part on the fine ordinates
    u1: np.ndarray         # (M, nx, ny) collided part on the coarse ordinates
    q: np.ndarray          # (M, nx, ny) first-collision source
    op_fine: TransportOperator
    gb_fine: np.ndarray
    iterations: int


class AngularRefinement:
    """Fine-angle ballistic solves attached to a coarse discrete-ordinates problem.

    Parameters
    ----------
    grid, angular, phase
        Coarse discretization; the fine kernel uses the same anisotropy.
    factor : int
        Number of fine ordinates per coarse ordinate.
    step : float, optional
        Ray step of the fine ballistic integrals.
    """

    def __init__(self, grid: SpatialGrid, angular: AngularGrid, phase: PhaseFunction,
                 factor: int, step: float | None = None):
        factor = int(factor)
        if factor < 1:
            raise ValueError("refinement factor must be a positive integer")
        self.grid = grid
        self.coarse = angular
        self.factor = factor
        self.fine = AngularGrid(angular.M * factor)
        self.phase = phase
        self.phase_fine = hg_kernel(phase.g, self.fine)
        # scattering from fine into coarse ordinates: the coarse rows of the fine kernel
        self.K_cf = np.ascontiguousarray(self.phase_fine.K[::factor])
        self.geometry = RayGeometry.get(grid, self.fine, step)

    def interpolate(self, f: np.ndarray) -> np.ndarray:
        return refine_directions(f, self.factor)

    def interpolate_transpose(self, g: np.ndarray) -> np.ndarray:
        return refine_directions_transpose(g, self.factor)

    def first_collision(self, sigma_s: np.ndarray, u0: np.ndarray) -> np.ndarray:
        return sigma_s * np.tensordot(self.K_cf, u0, axes=(1, 0))

    def solve(self, prob, g: BoundarySource, tol: float = DEFAULT_TOL,
              max_iter: int = DEFAULT_MAX_ITER, u1_init=None) -> RefinedSolution:
        """Refined solution of the forward problem ``prob`` with inflow ``g``."""
        if prob.angular.M != self.coarse.M:
            raise ValueError("transport problem and refinement disagree on M")
        op_f = TransportOperator(self.geometry, prob.sigma_t, table_limit=0)
        gb_f = self.geometry.boundary_values(g)
        u0 = op_f.ballistic(gb_f)
        q = self.first_collision(prob.sigma_s, u0)
        sol = prob.solve(None, q, tol, max_iter, u1_init)
        u = u0 + self.interpolate(sol.u)
        return RefinedSolution(u, u0, sol.u, q, op_f, gb_f, sol.iterations)

    def sigma_adjoint(self, prob, sol: RefinedSolution, r: np.ndarray, tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER, mu0=None):
        """Gradient of ``<r, u>`` with respect to nodal ``sigma_t``.

        ``r`` lives on the fine ordinates. Returns ``(gradient, mu)`` with
        ``mu`` the coarse adjoint state (reusable as a warm start).
        """
        adj = prob.solve_transpose(self.interpolate_transpose(r), tol, max_iter, mu0)
        src = prob.sigma_s * prob.phase.apply(sol.u1) + sol.q
        grad = prob.op.sigma_adjoint(adj.mu, src, prob.boundary_values(None))
        r0 = r + np.tensordot(self.K_cf.T, prob.sigma_s * adj.z, axes=(1, 0))
        grad = grad + sol.op_fine.sigma_adjoint(r0, np.zeros_like(r0), sol.gb_fine)
        return grad, adj.mu

    def tangent(self, prob, sol: RefinedSolution, dsigma: np.ndarray, tol: float = DEFAULT_TOL,
                max_iter: int = DEFAULT_MAX_ITER) -> np.ndarray:
        """Derivative of the refined field in the direction ``dsigma`` of ``sigma_t``."""
        du0 = sol.op_fine.tangent(np.zeros_like(sol.u0), sol.gb_fine, dsigma)
        dq = self.first_collision(prob.sigma_s, du0)
        src = prob.sigma_s * prob.phase.apply(sol.u1) + sol.q
        t = prob.op.tangent(src, prob.boundary_values(None), dsigma)
        du1 = prob.iterate(t, dq, tol, max_iter).u
        return du0 + self.interpolate(du1)
