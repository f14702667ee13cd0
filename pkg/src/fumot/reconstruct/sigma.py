"""
Recovery of the fluorophore absorption ``sigma_xf`` from the internal data ``H``.

The discrete objective is

    J(s) = 1/2 sum_i a_i (H_i(s) - H*_i)^2 + beta/2 sum_{edges (i,j)} (s_i - s_j)^2

with ``a_i`` the nodal area weights; the edge sum is the lattice form of
``int |grad s|^2``. Its gradient is computed exactly for the discrete forward
operator: the adjoint state is the transposed source iteration of
:meth:`TransportProblem.solve_transpose` and the derivative of the ray
attenuation is handled by :meth:`TransportOperator.sigma_adjoint`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..functionals import correlator_K, correlator_psi
from ..grid import AngularGrid, SpatialGrid
from ..transport import AngularRefinement, PhaseFunction, TransportProblem
from ..transport.solver import DEFAULT_MAX_ITER, BoundarySource
from .lbfgs import OptimizeResult, lbfgs_minimize

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# H1 seminorm on the lattice graph
# ---------------------------------------------------------------------------
def _edge_masks(mask: np.ndarray):
    ex = mask[1:, :] & mask[:-1, :]
    ey = mask[:, 1:] & mask[:, :-1]
    return ex, ey


def gradient_energy(s: np.ndarray, mask: np.ndarray) -> float:
    """``1/2 sum over lattice edges inside mask of (s_i - s_j)^2``."""
    ex, ey = _edge_masks(mask)
    dx = np.diff(s, axis=0)
    dy = np.diff(s, axis=1)
    return 0.5 * float(np.sum(dx[ex] ** 2) + np.sum(dy[ey] ** 2))


def neumann_laplacian(s: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Gradient of :func:`gradient_energy`: the graph Laplacian with zero-flux rows."""
    ex, ey = _edge_masks(mask)
    dx = np.where(ex, np.diff(s, axis=0), 0.0)
    dy = np.where(ey, np.diff(s, axis=1), 0.0)
    out = np.zeros_like(s, dtype=float)
    out[:-1, :] -= dx
    out[1:, :] += dx
    out[:, :-1] -= dy
    out[:, 1:] += dy
    return out


@dataclass
class SigmaEvaluation:
    """Cached quantities of one objective evaluation."""

    sigma_xf: np.ndarray
    u: np.ndarray
    psi: np.ndarray
    H: np.ndarray
    misfit: float
    penalty: float
    grad: np.ndarray | None = None

    @property
    def objective(self) -> float:
        return self.misfit + self.penalty


class SigmaObjective:
    """Objective, gradient and linearization of ``sigma_xf -> H``.

    Parameters
    ----------
    grid, angular, phase
        Inversion discretization.
    sigma_xa, sigma_xs : ndarray
        Known background absorption and scattering.
    g : boundary source
        Illumination used to generate ``H_star``.
    H_star : ndarray
        Measured internal data on ``grid``.
    beta : float
        Weight of the gradient penalty.
    tol, max_iter
        Source-iteration controls. Tight tolerances are needed for
        finite-difference checks; ``1e-8`` is enough for reconstruction.
    warm_start : bool
        Reuse the previous forward and adjoint fields as initial iterates.
    refine : int
        Angular refinement factor of the uncollided field (see
        :class:`~fumot.transport.AngularRefinement`); 1 keeps the plain
        discrete-ordinates solve.
    """

    def __init__(self, grid: SpatialGrid, angular: AngularGrid, phase: PhaseFunction,
                 sigma_xa, sigma_xs, g: BoundarySource, H_star, beta: float = 0.0,
                 tol: float = 1e-8, max_iter: int = DEFAULT_MAX_ITER, step: float | None = None,
                 warm_start: bool = True, weights: np.ndarray | None = None, refine: int = 1):
        self.grid = grid
        self.angular = angular
        self.phase = phase
        self.sigma_xa = np.asarray(sigma_xa, float)
        self.sigma_xs = np.asarray(sigma_xs, float)
        self.g = g
        self.H_star = np.asarray(H_star, float)
        if self.H_star.shape != grid.shape:
            raise ValueError(f"H_star has shape {self.H_star.shape}, grid is {grid.shape}")
        self.beta = float(beta)
        self.tol = tol
        self.max_iter = max_iter
        self.step = step
        self.warm_start = warm_start
        self.weights = grid.cell_weights if weights is None else np.asarray(weights, float)
        self.mask = grid.inside
        self.n_evals = 0
        self._u_prev = None
        self._mu_prev = None
        self.last: SigmaEvaluation | None = None
        self.refinement = (AngularRefinement(grid, angular, phase, refine, step)
                           if refine > 1 else None)
        # ordinates and kernel on which u, psi and C live
        self.angular_u = angular if self.refinement is None else self.refinement.fine
        self.phase_u = phase if self.refinement is None else self.refinement.phase_fine

    # ------------------------------------------------------------ forward
    def problem(self, sigma_xf) -> TransportProblem:
        return TransportProblem(self.grid, self.angular, self.sigma_xa + self.sigma_xs + sigma_xf,
                                self.sigma_xs, self.phase, self.step)

    def forward(self, sigma_xf, prob: TransportProblem | None = None):
        """``(prob, u)``; with refinement ``u`` is the refined field on the fine ordinates."""
        prob, u, _ = self._forward(sigma_xf, prob)
        return prob, u

    def _forward(self, sigma_xf, prob: TransportProblem | None = None):
        prob = prob or self.problem(sigma_xf)
        u0 = self._u_prev if self.warm_start else None
        if self.refinement is None:
            u = prob.solve(self.g, None, self.tol, self.max_iter, u0).u
            sol, coarse = None, u
        else:
            sol = self.refinement.solve(prob, self.g, self.tol, self.max_iter, u0)
            u, coarse = sol.u, sol.u1
        if self.warm_start:
            self._u_prev = coarse
        return prob, u, sol

    def internal_H(self, sigma_xf, u) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        psi = correlator_psi(u, self.angular_u)
        Ku = self.phase_u.apply(u)
        C = correlator_K(u, self.phase_u, Ku)
        H = -(self.sigma_xa + self.sigma_xs + sigma_xf) * psi + self.sigma_xs * C
        # ghost nodes carry the nearest interior value, as every other nodal field
        return self.grid.fill_ghosts(H), psi, Ku

    def H(self, sigma_xf) -> np.ndarray:
        sigma_xf = np.asarray(sigma_xf, float)
        _, u = self.forward(sigma_xf)
        return self.internal_H(sigma_xf, u)[0]

    # ---------------------------------------------------------- objective
    def penalty(self, sigma_xf) -> float:
        return self.beta * gradient_energy(sigma_xf, self.mask) if self.beta else 0.0

    def value(self, sigma_xf) -> float:
        sigma_xf = np.asarray(sigma_xf, float)
        H = self.H(sigma_xf)
        r = H - self.H_star
        return 0.5 * float(np.sum(self.weights * r * r)) + self.penalty(sigma_xf)

    def value_and_gradient(self, sigma_xf) -> tuple[float, np.ndarray]:
        """Objective and its exact discrete gradient (area weights included)."""
        sigma_xf = np.array(sigma_xf, dtype=float)
        self.n_evals += 1
        prob, u, sol = self._forward(sigma_xf)
        H, psi, Ku = self.internal_H(sigma_xf, u)
        res = self.weights * (H - self.H_star)
        misfit = 0.5 * float(np.sum(res * (H - self.H_star)))
        pen = self.penalty(sigma_xf)

        ang = self.angular_u
        flip = ang.antipode
        sig_tf = prob.sigma_t
        # dH_i / du_ik = w_k Q_ik, Q = -2 sigma_tf u(-v) + 2 sigma_s Ku(-v)
        Q = -2.0 * sig_tf * u[flip] + 2.0 * self.sigma_xs * Ku[flip]
        r_u = res[None] * ang.weights[:, None, None] * Q
        mu0 = self._mu_prev if self.warm_start else None
        if self.refinement is None:
            adj = prob.solve_transpose(r_u, self.tol, self.max_iter, mu0)
            mu = adj.mu
            src = prob.sigma_s * Ku
            gb = prob.boundary_values(self.g)
            grad_t = prob.op.sigma_adjoint(mu, src, gb)
        else:
            grad_t, mu = self.refinement.sigma_adjoint(prob, sol, r_u, self.tol, self.max_iter, mu0)
        if self.warm_start:
            self._mu_prev = mu
        grad = -res * psi + grad_t
        if self.beta:
            grad = grad + self.beta * neumann_laplacian(sigma_xf, self.mask)
        grad = np.where(self.mask, grad, 0.0)
        self.last = SigmaEvaluation(sigma_xf, u, psi, H, misfit, pen, grad)
        return misfit + pen, grad

    __call__ = value_and_gradient

    # -------------------------------------------------------- linearization
    def frechet_H(self, sigma_xf, dsigma, u=None) -> np.ndarray:
        """Derivative of the discrete map ``sigma_xf -> H`` in direction ``dsigma``.

        Returns ``-dsigma psi - 2 sigma_tf int v u(-v) + 2 sigma_s int (Kv) u(-v)``
        where ``v`` solves the linearized transport problem with the exact
        derivative of the discrete attenuation as source.
        """
        sigma_xf = np.asarray(sigma_xf, float)
        dsigma = np.asarray(dsigma, float)
        prob = self.problem(sigma_xf)
        if self.refinement is None:
            if u is None:
                u = prob.solve(self.g, None, self.tol, self.max_iter).u
            Ku = self.phase.apply(u)
            src = prob.sigma_s * Ku
            t = prob.op.tangent(src, prob.boundary_values(self.g), dsigma)
            v = prob.iterate(t, None, self.tol, self.max_iter).u
        else:
            # the refined tangent needs the split fields, so u is always recomputed
            sol = self.refinement.solve(prob, self.g, self.tol, self.max_iter)
            u = sol.u
            v = self.refinement.tangent(prob, sol, dsigma, self.tol, self.max_iter)
        ang, phase = self.angular_u, self.phase_u
        flip = ang.antipode
        psi = correlator_psi(u, ang)
        integ = ang.integrate
        dH = (-dsigma * psi - 2.0 * prob.sigma_t * integ(v * u[flip])
              + 2.0 * self.sigma_xs * integ(phase.apply(v) * u[flip]))
        return self.grid.fill_ghosts(dH)


def frechet_H(sigma_xf, dsigma, u, grid, angular, phase, sigma_xa, sigma_xs, g,
              tol: float = 1e-10, max_iter: int = DEFAULT_MAX_ITER) -> np.ndarray:
    """Functional form of :meth:`SigmaObjective.frechet_H`."""
    obj = SigmaObjective(grid, angular, phase, sigma_xa, sigma_xs, g, np.zeros(grid.shape),
                         tol=tol, max_iter=max_iter, warm_start=False)
    return obj.frechet_H(sigma_xf, dsigma, u)


def sigma_objective_and_gradient(objective: SigmaObjective, sigma_xf):
    """Objective value and gradient field at ``sigma_xf``."""
    return objective.value_and_gradient(sigma_xf)


@dataclass
class SigmaReconstruction:
    sigma_xf: np.ndarray
    result: OptimizeResult
    H: np.ndarray
    trace: list = field(default_factory=list)


def reconstruct_sigma(objective: SigmaObjective, x0, lo: float, hi: float, mem: int = 10,
                      max_iter: int = 100, grad_tol: float = 0.0, max_evals: int | None = None,
                      first_step: float | None = None, callback=None) -> SigmaReconstruction:
    """Projected L-BFGS minimization of the ``sigma_xf`` objective.

    Parameters
    ----------
    objective : SigmaObjective
    x0 : ndarray
        Initial guess, projected onto ``[lo, hi]``.
    lo, hi : float or ndarray
        Admissible bounds for ``sigma_xf`` (scalars or nodal fields).
    first_step : float, optional
        Sup-norm of the first trial step; defaults to a quarter of the box width.
    """
    if first_step is None:
        first_step = 0.25 * float(np.max(np.asarray(hi) - np.asarray(lo)))
    x0 = np.where(objective.mask, np.clip(x0, lo, hi), lo)
    res = lbfgs_minimize(objective.value_and_gradient, x0, lo, hi, mem=mem, max_iter=max_iter,
                         grad_tol=grad_tol, max_evals=max_evals, first_step=first_step,
                         callback=callback)
    x = res.x
    H = objective.H(x)
    logger.info("sigma reconstruction: %s after %d iterations, %d evaluations, J=%.4e",
                res.status, res.n_iter, res.n_evals, res.fun)
    return SigmaReconstruction(x, res, H, res.trace)
