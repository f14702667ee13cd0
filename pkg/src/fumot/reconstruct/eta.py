"""
Recovery of the quantum efficiency ``eta`` from the emission internal data ``S``.

With ``sigma_xf`` fixed, ``eta -> S(eta)`` is linear:

    S(eta) = D eta + C_w[ S_m (b_u eta) ] + C_phi[ R_x (b_W eta) ]

where ``D = sigma_xf (Iu)(IW)``, ``b_u = sigma_xf Iu``, ``b_W = sigma_xf IW``,
``S_m`` is the zero-inflow emission solution operator, ``R_x`` the
reversed-direction excitation solution operator and ``C_w``, ``C_phi`` the
angular contractions of the remaining terms of ``S``. The regularized
least-squares problem

    min 1/2 sum a (S(eta) - S*)^2 + beta'/2 sum a eta^2

is solved by conjugate gradients on the normal equations, using the exact
discrete transposes of ``S_m`` and ``R_x``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..functionals import ForwardModel, internal_S
from ..grid import AngularGrid, SpatialGrid
from ..transport import CoefficientSet, PhaseFunction
from ..transport.solver import DEFAULT_MAX_ITER, BoundarySource

logger = logging.getLogger(__name__)


class EtaProblem:
    """Matrix-free linear map ``eta -> S(eta)`` and its transpose.

    Parameters
    ----------
    grid, angular, phase
        Discretization.
    coeffs : CoefficientSet
        Must contain ``sigma_xf`` (held fixed) and the emission coefficients;
        ``eta`` is ignored.
    g : boundary source
        Excitation illumination.
    h : boundary source
        Positive weight defining the auxiliary field ``W``.
    tol, max_iter
        Source-iteration controls for every inner solve.
    refine : int
        Angular refinement factor of the excitation field ``u``.
    """

    def __init__(self, grid: SpatialGrid, angular: AngularGrid, phase: PhaseFunction,
                 coeffs: CoefficientSet, g: BoundarySource, h: BoundarySource = 1.0,
                 tol: float = 1e-8, max_iter: int = DEFAULT_MAX_ITER, step: float | None = None,
                 refine: int = 1):
        self.grid = grid
        self.angular = angular
        self.phase = phase
        self.coeffs = coeffs
        self.model = ForwardModel(grid, angular, phase, coeffs, tol, max_iter, step, refine)
        self.tol = tol
        self.max_iter = max_iter
        self.u = self.model.solve_u(g)
        self.W = self.model.solve_W(h)
        wk = angular.weights[:, None, None]
        em = self.model.emission
        ex = self.model.excitation
        sig_f = coeffs.sigma_xf
        self.Iu = self.model.angular_u.integrate(self.u)
        self.IW = angular.integrate(self.W)
        self.b_u = sig_f * self.Iu
        self.b_W = sig_f * self.IW
        self.D = sig_f * self.Iu * self.IW
        # S_w(w) = sum_k w_k [ -sigma_mt w W + sigma_ms (Kw) W ]
        self._w_coef = wk * (-em.sigma_t * self.W)
        self._wK_coef = wk * (em.sigma_s * self.W)
        # S_phi(phi) = sum_k w_k [ -sigma_xtf u + sigma_xs Ku ] phi, pulled back to
        # the coarse ordinates of phi when u is refined
        wu = self.model.angular_u.weights[:, None, None]
        coef = wu * (-ex.sigma_t * self.u + ex.sigma_s * self.model.phase_u.apply(self.u))
        ref = self.model.refinement
        self._phi_coef = coef if ref is None else ref.interpolate_transpose(coef)
        self.n_apply = 0
        self.n_apply_transpose = 0

    # --------------------------------------------------------------- fields
    def fields(self, eta):
        """Emission field ``w`` and adjoint field ``phi`` for a given ``eta``."""
        m = self.model
        w = m.emission.solve(None, self.b_u * eta, self.tol, self.max_iter).u
        phi = m.excitation.solve_reversed(None, self.b_W * eta, self.tol, self.max_iter).u
        return w, phi

    def apply(self, eta) -> np.ndarray:
        """``S(eta)``, identical to :func:`internal_S` with the solved fields."""
        self.n_apply += 1
        eta = np.asarray(eta, float)
        w, phi = self.fields(eta)
        return internal_S(self.u, w, self.W, self.model.to_u_ordinates(phi), self.coeffs,
                          self.phase, eta=eta, phase_u=self.model.phase_u)

    def apply_transpose(self, y) -> np.ndarray:
        """Transpose of :meth:`apply` with respect to the plain nodal inner product."""
        self.n_apply_transpose += 1
        y = np.asarray(y, float)
        m = self.model
        K = self.phase
        r_w = self._w_coef * y + K.apply_transpose(self._wK_coef * y)
        z_w = m.emission.solve_transpose(r_w, self.tol, self.max_iter).z
        r_phi = self._phi_coef * y
        z_phi = m.excitation.solve_reversed_transpose(r_phi, self.tol, self.max_iter).z
        return self.D * y + self.b_u * z_w.sum(axis=0) + self.b_W * z_phi.sum(axis=0)

    def check_linearity(self, rng=None, rtol: float | None = None) -> float:
        """Superposition defect ``|S(a e1 + b e2) - a S(e1) - b S(e2)| / (|a S(e1)| + |b S(e2)|)``.

        Raises ``RuntimeError`` when it exceeds ``rtol`` (default ``1e3 * tol``).
        """
        rng = np.random.default_rng(0) if rng is None else rng
        mask = self.grid.inside
        e1 = rng.uniform(0.1, 0.9, self.grid.shape) * mask
        e2 = rng.uniform(0.1, 0.9, self.grid.shape) * mask
        a, b = rng.uniform(0.5, 2.0, 2)
        s1, s2 = self.apply(e1), self.apply(e2)
        s12 = self.apply(a * e1 + b * e2)
        num = np.max(np.abs((s12 - a * s1 - b * s2)[mask]))
        den = np.max(np.abs((a * s1)[mask])) + np.max(np.abs((b * s2)[mask]))
        defect = float(num / den)
        limit = 1e3 * self.tol if rtol is None else rtol
        if defect > limit:
            raise RuntimeError(f"eta -> S map failed the superposition check ({defect:.2e} > {limit:.2e})")
        return defect


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residuals: list = field(default_factory=list)
    status: str = "converged"


def conjugate_gradient(apply, b, x0=None, tol: float = 1e-8, max_iter: int = 100,
                       precond=None, stall_window: int = 25, stall_factor: float = 0.999,
                       callback=None) -> CGResult:
    """Preconditioned conjugate gradients for a symmetric positive semidefinite operator.

    ``precond`` is an optional array ``m`` applied as the diagonal
    preconditioner ``r -> m r`` (entries must be positive where ``b`` lives).

    Stops when ``|r| <= tol |b|``. CG residual norms need not decrease
    monotonically, so stagnation is declared only when the smallest residual of
    the last ``stall_window`` iterations is not below ``stall_factor`` times the
    smallest one before them; the run then ends with status ``"stagnated"`` and
    ``residuals`` holds the full history for diagnosis.
    """
    b = np.asarray(b, float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, float)
    r = b - apply(x) if x0 is not None else b.copy()
    m = np.ones_like(b) if precond is None else np.asarray(precond, float)
    z = m * r
    p = z.copy()
    rz = float(np.vdot(r, z))
    bnorm = float(np.sqrt(np.vdot(b, b)))
    history = [float(np.sqrt(np.vdot(r, r)))]
    if bnorm == 0.0:
        return CGResult(np.zeros_like(b), 0, history)
    status = "max_iter"
    it = 0
    for it in range(1, max_iter + 1):
        if history[-1] <= tol * bnorm:
            status = "converged"
            it -= 1
            break
        Ap = apply(p)
        pAp = float(np.vdot(p, Ap))
        if pAp <= 0:
            status = "indefinite"
            break
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = m * r
        rz_new = float(np.vdot(r, z))
        history.append(float(np.sqrt(np.vdot(r, r))))
        if callback:
            callback(it, history[-1], x)
        p = z + (rz_new / rz) * p
        rz = rz_new
        if (len(history) > stall_window
                and min(history[-stall_window:]) > stall_factor * min(history[:-stall_window])):
            status = "stagnated"
            break
    else:
        if history[-1] <= tol * bnorm:
            status = "converged"
    if status not in ("converged", "max_iter"):
        logger.warning("CG %s after %d iterations; residual history %s", status, it,
                       ", ".join(f"{v:.3e}" for v in history[-stall_window:]))
    return CGResult(x, it, history, status)


@dataclass
class EtaReconstruction:
    eta: np.ndarray
    eta_unclamped: np.ndarray
    cg: CGResult
    linearity_defect: float | None = None


def reconstruct_eta(problem: EtaProblem, S_star, beta_prime: float = 0.0, lo: float = 0.0,
                    hi: float = 1.0, cg_tol: float = 1e-8, cg_max_iter: int = 100,
                    check_linearity: bool = True, weights=None, precondition: bool = True,
                    callback=None) -> EtaReconstruction:
    """Tikhonov-regularized least squares for ``eta`` followed by clamping to ``[lo, hi]``.

    Solves ``(A^T diag(a) A + beta' diag(a)) eta = A^T diag(a) S*`` with CG,
    where ``A`` is the linear map of ``problem`` and ``a`` the area weights.
    The local term ``D eta`` dominates ``A``, so ``1 / (a D^2 + beta' a)`` is
    used as a diagonal preconditioner unless ``precondition`` is false.
    """
    S_star = np.asarray(S_star, float)
    mask = problem.grid.inside
    a = problem.grid.cell_weights if weights is None else np.asarray(weights, float)
    defect = problem.check_linearity() if check_linearity else None

    def normal(x):
        return problem.apply_transpose(a * problem.apply(x)) + beta_prime * a * x

    rhs = problem.apply_transpose(a * S_star)
    m = None
    if precondition:
        diag = a * problem.D**2 + beta_prime * a
        m = np.where(mask & (diag > 0), 1.0 / np.where(diag > 0, diag, 1.0), 0.0)
    cg = conjugate_gradient(normal, rhs, tol=cg_tol, max_iter=cg_max_iter, precond=m,
                            callback=callback)
    eta_raw = np.where(mask, cg.x, 0.0)
    eta = np.where(mask, np.clip(eta_raw, lo, hi), 0.0)
    logger.info("eta reconstruction: CG %s in %d iterations", cg.status, cg.iterations)
    return EtaReconstruction(eta, eta_raw, cg, defect)
