"""
Sufficient conditions for uniqueness of the linearized ``sigma_xf`` problem.

With ``l`` the domain diameter the conditions are

    exp(l sup sigma_xtf) < 1 + gamma
    sup sigma_xs / sigma_xtf < delta
    (1 + delta) (1 + 2 mu^2 (1 + gamma)^2) < (1 + 2 gamma) / gamma

where ``mu = sup g / inf g``. The left side of the last inequality grows and
the right side shrinks with ``gamma`` and ``delta``, so the conditions hold for
some admissible pair exactly when they hold in the limit ``gamma -> gamma_0``,
``delta -> delta_0`` with ``gamma_0 = exp(l sup sigma_xtf) - 1`` and
``delta_0 = sup sigma_xs / sigma_xtf``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..grid import SpatialGrid
from ..transport import CoefficientSet


@dataclass
class ConditionReport:
    diameter: float
    sup_sigma_xtf: float
    gamma: float
    delta: float
    mu: float
    lhs: float
    rhs: float
    delta_max: float
    delta_condition: bool
    passes: bool

    @property
    def margin(self) -> float:
        """``rhs - lhs`` of the combined inequality; positive when it holds."""
        return self.rhs - self.lhs

    def to_dict(self) -> dict:
        d = asdict(self)
        d["margin"] = self.margin
        return d


def condition_terms(diameter: float, sup_sigma_xtf: float, delta: float, mu: float):
    """``(gamma, lhs, rhs, delta_max)`` for the given scalar bounds."""
    gamma = float(np.expm1(diameter * sup_sigma_xtf))
    if gamma <= 0:
        # vacuum limit: the right side is unbounded
        return gamma, (1 + delta) * (1 + 2 * mu * mu), np.inf, np.inf
    lhs = (1.0 + delta) * (1.0 + 2.0 * mu * mu * (1.0 + gamma) ** 2)
    rhs = (1.0 + 2.0 * gamma) / gamma
    delta_max = rhs / (1.0 + 2.0 * mu * mu * (1.0 + gamma) ** 2) - 1.0
    return gamma, lhs, rhs, delta_max


def check_linearized_conditions(coeffs: CoefficientSet, g_bdy, grid: SpatialGrid) -> ConditionReport:
    """Evaluate the uniqueness conditions for a coefficient set and illumination.

    Parameters
    ----------
    coeffs : CoefficientSet
    g_bdy : float or callable
        Boundary illumination; callables are sampled at the boundary nodes.
    grid : SpatialGrid
        Supplies the nodes (suprema are nodal) and the domain diameter.

    Returns
    -------
    ConditionReport
        ``delta_condition`` is true when the scattering ratio stays below both
        one and the largest ``delta`` compatible with the combined inequality;
        ``passes`` when all conditions hold.
    """
    mask = grid.inside
    tf = coeffs.sigma_xtf[mask]
    sup_tf = float(tf.max())
    delta = float(np.max(coeffs.sigma_xs[mask] / tf))
    if callable(g_bdy):
        bp = grid.boundary_points
        gv = np.asarray(g_bdy(bp[:, 0], bp[:, 1]), float)
    else:
        gv = np.array([float(g_bdy)])
    if np.any(gv <= 0):
        raise ValueError("illumination must be strictly positive on the boundary")
    mu = float(gv.max() / gv.min())
    gamma, lhs, rhs, delta_max = condition_terms(grid.diameter, sup_tf, delta, mu)
    delta_ok = delta < min(1.0, delta_max)
    return ConditionReport(grid.diameter, sup_tf, gamma, delta, mu, lhs, rhs, delta_max,
                           bool(delta_ok), bool(lhs < rhs and delta_ok))
