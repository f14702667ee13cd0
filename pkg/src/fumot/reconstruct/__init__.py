"""
Inverse problems for the fluorophore absorption and the quantum efficiency.

Stage one fits ``sigma_xf`` to the internal data ``H`` with projected L-BFGS
and exact discrete adjoint gradients. Stage two recovers ``eta`` from ``S``
with conjugate gradients on the regularized normal equations.
"""
from .conditions import ConditionReport, check_linearized_conditions
from .eta import CGResult, EtaProblem, EtaReconstruction, conjugate_gradient, reconstruct_eta
from .lbfgs import OptimizeResult, TraceRecord, lbfgs_minimize, projected_gradient
from .sigma import (
    SigmaObjective,
    SigmaReconstruction,
    frechet_H,
    gradient_energy,
    neumann_laplacian,
    reconstruct_sigma,
    sigma_objective_and_gradient,
)

__all__ = [
    "ConditionReport",
    "check_linearized_conditions",
    "CGResult",
    "EtaProblem",
    "EtaReconstruction",
    "conjugate_gradient",
    "reconstruct_eta",
    "OptimizeResult",
    "TraceRecord",
    "lbfgs_minimize",
    "projected_gradient",
    "SigmaObjective",
    "SigmaReconstruction",
    "frechet_H",
    "gradient_energy",
    "neumann_laplacian",
    "reconstruct_sigma",
    "sigma_objective_and_gradient",
]
