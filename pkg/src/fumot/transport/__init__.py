"""
Discrete-ordinates transport solves.

``TransportProblem`` owns the ray tables of one attenuation field and provides
forward, reversed-direction and transposed source iterations. The functional
wrappers ``ballistic``, ``solve_forward``, ``solve_adjoint`` and
``solve_transpose`` build a problem on the fly for one-off use.
``AngularRefinement`` evaluates the uncollided field on finer ordinates.
"""
from .coefficients import AdmissibleBounds, CoefficientSet, POSITIVITY_FLOOR
from .phase import PhaseFunction, hg_kernel, p_hg, scatter
from .refine import AngularRefinement, RefinedSolution, refine_directions, refine_directions_transpose
from .solver import (
    ConvergenceError,
    RayGeometry,
    TransportOperator,
    TransportProblem,
    TransportSolution,
    TransposeSolution,
    ballistic,
    solve_adjoint,
    solve_forward,
    solve_transpose,
)

__all__ = [
    "AdmissibleBounds",
    "CoefficientSet",
    "POSITIVITY_FLOOR",
    "PhaseFunction",
    "hg_kernel",
    "p_hg",
    "scatter",
    "AngularRefinement",
    "RefinedSolution",
    "refine_directions",
    "refine_directions_transpose",
    "ConvergenceError",
    "RayGeometry",
    "TransportOperator",
    "TransportProblem",
    "TransportSolution",
    "TransposeSolution",
    "ballistic",
    "solve_adjoint",
    "solve_forward",
    "solve_transpose",
]
