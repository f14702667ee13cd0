"""
Internal data of the excitation and emission stages.

The excitation field ``u`` solves the forward problem with boundary source
``g``. The emission stage needs three more fields:

* ``W``   reversed-direction emission solve with ``W = h`` on the outflow boundary,
* ``w``   forward emission solve with source ``eta sigma_xf I u`` and zero inflow,
* ``phi`` reversed-direction excitation solve with source ``eta sigma_xf I W``.

From these the nodal data are

    H = -sigma_xtf psi + sigma_xs C,        psi = int u(v) u(-v),  C = int (Ku)(v) u(-v)
    S = -sigma_mt int w W + sigma_ms int (Kw) W + eta sigma_xf (Iu)(IW)
        - sigma_xtf int u phi + sigma_xs int (Ku) phi

where ``I`` is the angular integral. The emission-stage fluorophore absorption
is taken to be zero.

With an angular refinement factor ``R > 1`` the excitation field ``u`` is the
refined field of :class:`~fumot.transport.AngularRefinement` on ``R M``
ordinates; every integral involving ``u`` is then taken on those ordinates and
``phi`` is interpolated to them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import AngularGrid, SpatialGrid
from .transport import AngularRefinement, CoefficientSet, PhaseFunction, TransportProblem
from .transport.solver import DEFAULT_MAX_ITER, DEFAULT_TOL, BoundarySource

__all__ = [
    "NoiseSpec",
    "InternalData",
    "ForwardModel",
    "correlator_psi",
    "correlator_K",
    "internal_H",
    "internal_S",
    "solve_W",
    "solve_w",
    "solve_phi",
    "boundary_current",
    "add_noise",
]


# ---------------------------------------------------------------------------
# angular correlators
# ---------------------------------------------------------------------------
def correlator_psi(u: np.ndarray, angular: AngularGrid) -> np.ndarray:
    """``psi(x) = sum_k u(x, v_k) u(x, -v_k) w_k``."""
    return angular.integrate(u * u[angular.antipode])


def correlator_K(u: np.ndarray, phase: PhaseFunction, Ku: np.ndarray | None = None) -> np.ndarray:
    """``sum_k (Ku)(x, v_k) u(x, -v_k) w_k``."""
    ang = phase.angular
    if Ku is None:
        Ku = phase.apply(u)
    return ang.integrate(Ku * u[ang.antipode])


def internal_H(u: np.ndarray, coeffs: CoefficientSet, phase: PhaseFunction) -> np.ndarray:
    """Excitation internal data ``H = -sigma_xtf psi + sigma_xs C``."""
    psi = correlator_psi(u, phase.angular)
    out = -coeffs.sigma_xtf * psi
    if np.any(coeffs.sigma_xs):
        out = out + coeffs.sigma_xs * correlator_K(u, phase)
    return out


def internal_S(u, w, W, phi, coeffs: CoefficientSet, phase: PhaseFunction, eta=None,
               phase_u: PhaseFunction | None = None) -> np.ndarray:
    """Emission internal data assembled from converged ``u, w, W, phi``.

    ``phase_u`` is the kernel on the ordinates of ``u`` and ``phi`` when they
    differ from those of ``w`` and ``W`` (angular refinement).
    """
    eta = coeffs.eta if eta is None else eta
    if eta is None:
        raise ValueError("quantum efficiency eta is required")
    phase_u = phase if phase_u is None else phase_u
    integ = phase.angular.integrate
    integ_u = phase_u.angular.integrate
    S = (-coeffs.sigma_mt * integ(w * W)
         + coeffs.sigma_ms * integ(phase.apply(w) * W)
         + eta * coeffs.sigma_xf * integ_u(u) * integ(W)
         - coeffs.sigma_xtf * integ_u(u * phi)
         + coeffs.sigma_xs * integ_u(phase_u.apply(u) * phi))
    return S


# ---------------------------------------------------------------------------
# solves
# ---------------------------------------------------------------------------
class ForwardModel:
    """Excitation and emission transport problems of one coefficient set.

    Parameters
    ----------
    grid, angular, phase
        Discretization and scattering kernel (shared by both wavelengths).
    coeffs : CoefficientSet
    tol, max_iter
        Source-iteration controls used by every solve.
    step : float, optional
        Ray step.
    refine : int
        Angular refinement factor of the uncollided excitation field.
    """

    def __init__(self, grid: SpatialGrid, angular: AngularGrid, phase: PhaseFunction,
                 coeffs: CoefficientSet, tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER, step: float | None = None, refine: int = 1):
        self.grid = grid
        self.angular = angular
        self.phase = phase
        self.coeffs = coeffs
        self.tol = tol
        self.max_iter = max_iter
        self.step = step
        self._excitation = None
        self._emission = None
        self.refinement = (AngularRefinement(grid, angular, phase, refine, step)
                           if refine > 1 else None)

    @property
    def angular_u(self) -> AngularGrid:
        """Ordinates of the excitation field returned by :meth:`solve_u`."""
        return self.angular if self.refinement is None else self.refinement.fine

    @property
    def phase_u(self) -> PhaseFunction:
        return self.phase if self.refinement is None else self.refinement.phase_fine

    def to_u_ordinates(self, f: np.ndarray) -> np.ndarray:
        """Interpolate a coarse-ordinate field to the ordinates of ``u``."""
        return f if self.refinement is None else self.refinement.interpolate(f)

    @property
    def excitation(self) -> TransportProblem:
        if self._excitation is None:
            c = self.coeffs
            self._excitation = TransportProblem(self.grid, self.angular, c.sigma_xtf, c.sigma_xs,
                                                self.phase, self.step)
        return self._excitation

    @property
    def emission(self) -> TransportProblem:
        if self._emission is None:
            c = self.coeffs
            self._emission = TransportProblem(self.grid, self.angular, c.sigma_mt, c.sigma_ms,
                                              self.phase, self.step)
        return self._emission

    def solve_u(self, g: BoundarySource, u0=None) -> np.ndarray:
        """Excitation field on the ordinates :attr:`angular_u`."""
        if self.refinement is None:
            return self.excitation.solve(g, None, self.tol, self.max_iter, u0).u
        return self.refinement.solve(self.excitation, g, self.tol, self.max_iter).u

    def solve_W(self, h: BoundarySource = 1.0) -> np.ndarray:
        _check_positive(h, self.excitation)
        return self.emission.solve_reversed(h, None, self.tol, self.max_iter).u

    def emission_source(self, u, eta) -> np.ndarray:
        return np.asarray(eta) * self.coeffs.sigma_xf * self.angular_u.integrate(u)

    def solve_w(self, u, eta) -> np.ndarray:
        return self.emission.solve(None, self.emission_source(u, eta), self.tol, self.max_iter).u

    def solve_phi(self, W, eta) -> np.ndarray:
        q = np.asarray(eta) * self.coeffs.sigma_xf * self.angular.integrate(W)
        return self.excitation.solve_reversed(None, q, self.tol, self.max_iter).u

    def internal_H(self, u) -> np.ndarray:
        return internal_H(u, self.coeffs, self.phase_u)

    def internal_data(self, g: BoundarySource, h: BoundarySource = 1.0,
                      emission: bool = True) -> "InternalData":
        """Solve every field and assemble ``H``, ``S``, ``psi`` and the boundary currents."""
        u = self.solve_u(g)
        psi = correlator_psi(u, self.angular_u)
        H = self.internal_H(u)
        data = InternalData(H=H, psi=psi, J_u=boundary_current(u, self.grid, self.angular_u))
        if emission and self.coeffs.eta is not None and self.coeffs.sigma_ma is not None:
            eta = self.coeffs.eta
            W = self.solve_W(h)
            w = self.solve_w(u, eta)
            phi = self.solve_phi(W, eta)
            data.S = internal_S(u, w, W, self.to_u_ordinates(phi), self.coeffs, self.phase,
                                phase_u=self.phase_u)
            data.J_w = boundary_current(w, self.grid, self.angular)
        return data


def _check_positive(h, prob: TransportProblem):
    vals = prob.boundary_values(h)
    if np.any(vals <= 0):
        raise ValueError("auxiliary boundary weight h must be strictly positive")


def solve_W(h_bdy: BoundarySource, coeffs: CoefficientSet, phase: PhaseFunction, grid: SpatialGrid,
            tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> np.ndarray:
    """Reversed-direction emission field with ``W = h`` on the outflow boundary."""
    return ForwardModel(grid, phase.angular, phase, coeffs, tol, max_iter).solve_W(h_bdy)


def solve_w(u, coeffs: CoefficientSet, phase: PhaseFunction, grid: SpatialGrid, eta=None,
            tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> np.ndarray:
    """Emission field driven by ``eta sigma_xf I u`` with zero inflow."""
    eta = coeffs.eta if eta is None else eta
    return ForwardModel(grid, phase.angular, phase, coeffs, tol, max_iter).solve_w(u, eta)


def solve_phi(W, coeffs: CoefficientSet, eta, phase: PhaseFunction, grid: SpatialGrid,
              tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> np.ndarray:
    """Reversed-direction excitation field driven by ``eta sigma_xf I W``."""
    return ForwardModel(grid, phase.angular, phase, coeffs, tol, max_iter).solve_phi(W, eta)


# ---------------------------------------------------------------------------
# boundary currents and data containers
# ---------------------------------------------------------------------------
def boundary_current(f: np.ndarray, grid: SpatialGrid, angular: AngularGrid) -> np.ndarray:
    """Net current ``sum_k f(x, v_k) (v_k . n(x)) w_k`` at every boundary node."""
    fb = grid.boundary_trace(f)  # (M, nb)
    vn = angular.directions @ grid.boundary_normals.T  # (M, nb)
    return np.tensordot(angular.weights, fb * vn, axes=(0, 0))


@dataclass
class InternalData:
    """Nodal internal data and boundary currents of one experiment."""

    H: np.ndarray
    psi: np.ndarray
    S: Optional[np.ndarray] = None
    J_u: Optional[np.ndarray] = None
    J_w: Optional[np.ndarray] = None


@dataclass(frozen=True)
class NoiseSpec:
    """Multiplicative uniform noise ``out = in (1 + level xi)``, ``xi ~ U[-1, 1]``."""

    level: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.level < 1.0:
            raise ValueError(f"noise level must lie in [0, 1), got {self.level}")


def add_noise(field: np.ndarray, spec: NoiseSpec) -> np.ndarray:
    """Return a noisy copy of a nodal field.

    The random numbers are drawn in C order of the array from
    ``numpy.random.default_rng(seed)``, so the result depends only on the field
    and the spec.
    """
    field = np.asarray(field, dtype=float)
    if spec.level == 0.0:
        return field.copy()
    rng = np.random.default_rng(spec.seed)
    xi = rng.uniform(-1.0, 1.0, size=field.shape)
    return field * (1.0 + spec.level * xi)
