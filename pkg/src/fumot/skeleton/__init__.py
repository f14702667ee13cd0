"""Geometric skeleton reconstruction on the unit disk: packings, chord skeletons,
localized illumination and ratio recovery of the total attenuation."""
from .ballistic import (
    GeometryError,
    LocalizedData,
    LocalizedFields,
    LocalizedSource,
    bfactor,
    chord_attenuation_E,
    project_through,
    spot_preimage,
)
from .geometry import (
    CoveringReport,
    SkeletonGraph,
    boundary_packing,
    build_skeleton,
    covering_check,
    default_theta,
    packing_size,
    segment_distance,
    skeleton_distance,
    tube_intervals,
    uniform_disk,
)
from .recovery import SkeletonRecovery, as_point_function, recover_sigma_skeleton

__all__ = [
    "GeometryError",
    "LocalizedData",
    "LocalizedFields",
    "LocalizedSource",
    "bfactor",
    "chord_attenuation_E",
    "project_through",
    "spot_preimage",
    "CoveringReport",
    "SkeletonGraph",
    "boundary_packing",
    "build_skeleton",
    "covering_check",
    "default_theta",
    "packing_size",
    "segment_distance",
    "skeleton_distance",
    "tube_intervals",
    "uniform_disk",
    "SkeletonRecovery",
    "as_point_function",
    "recover_sigma_skeleton",
]
