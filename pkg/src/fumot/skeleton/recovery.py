"""
Recovery of ``sigma_xtf`` on the skeleton from localized internal data.

Along the beam joining spots ``y_k`` and ``y_l`` the localized data behave
like ``H(z) ~ -sigma_xtf(z) nu B(z) E(y_k, y_l)``. The chord attenuation ``E``
is common to every point of the chord, so comparing ``z`` with a reference
point ``z'`` on the same chord where ``sigma_xtf`` is known gives

    sigma_xtf(z) = sigma_xtf(z') (H(z) / H(z')) (B(z') / B(z)).

Reference points are taken from the annulus just inside the boundary layer
where the coefficient is assumed known.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..grid import SpatialGrid
from .ballistic import GeometryError, LocalizedSource, bfactor
from .geometry import SkeletonGraph

logger = logging.getLogger(__name__)

__all__ = ["SkeletonRecovery", "recover_sigma_skeleton", "as_point_function"]


def as_point_function(f, grid: SpatialGrid | None = None):
    """Wrap a callable, a scalar or a nodal field as ``points (P, 2) -> values (P,)``."""
    if callable(f):
        return lambda p: np.asarray(f(np.atleast_2d(p)), float)
    arr = np.asarray(f, float)
    if arr.ndim == 0:
        return lambda p: np.full(len(np.atleast_2d(p)), float(arr))
    if grid is None:
        raise ValueError("a grid is needed to interpolate a nodal field")
    if arr.shape != grid.shape:
        raise ValueError(f"nodal field has shape {arr.shape}, grid is {grid.shape}")
    filled = grid.fill_ghosts(arr)
    return lambda p: grid.interpolate(filled, np.atleast_2d(p)[:, 0], np.atleast_2d(p)[:, 1])


@dataclass
class SkeletonRecovery:
    """Recovered samples on the skeleton.

    Row ``i`` describes point ``points[i]`` on chord ``edge[i]``: the
    reference point and its known value, the data and geometric factors at
    both points and the recovered ``sigma_xtf``.
    """

    points: np.ndarray
    edge: np.ndarray
    recovered: np.ndarray
    reference_points: np.ndarray
    reference_values: np.ndarray
    H: np.ndarray
    H_reference: np.ndarray
    B: np.ndarray
    B_reference: np.ndarray
    skipped: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.points)

    def errors(self, truth) -> np.ndarray:
        """Relative errors against ``truth`` (callable, scalar or values per point)."""
        t = np.asarray(truth(self.points) if callable(truth) else truth, float)
        return np.abs(self.recovered - t) / np.abs(t)

    def table(self) -> np.ndarray:
        """Columns ``x, y, chord id, recovered value, reference value``."""
        return np.column_stack([self.points, self.edge, self.recovered, self.reference_values])


def _annulus_bounds(r: float, delta: float):
    """Radii ``(inner, outer)``: targets have ``|z| <= inner``, references ``inner < |z'| <= outer``."""
    inner = 1.0 - (r - 2.0 * delta)
    outer = 1.0 - (r - 4.0 * delta)
    return inner, min(outer, 1.0)


def recover_sigma_skeleton(H, G: SkeletonGraph, sigma_known, r: float, source: LocalizedSource,
                           delta: float | None = None, grid: SpatialGrid | None = None,
                           spacing: float = 0.02, nu: float = 2.0, n_quad: int = 32,
                           min_separation: float = 0.0) -> SkeletonRecovery:
    """Ratio-formula recovery of ``sigma_xtf`` at sampled skeleton points.

    Parameters
    ----------
    H : callable or ndarray
        Localized internal data, either a point evaluator or a nodal field on
        ``grid`` (interpolated bilinearly).
    G : SkeletonGraph
        Skeleton whose vertices are the spot centres of ``source``.
    sigma_known : callable, float or ndarray
        ``sigma_xtf`` where it is known (at least in the reference annulus).
    r : float
        Width of the boundary layer where the coefficient is known.
    source : LocalizedSource
        Spots that generated ``H``.
    delta : float, optional
        Annulus parameter; defaults to ``G.delta``.
    spacing : float
        Distance between sampled skeleton points.
    min_separation : float
        Skip targets closer than this to their reference point.

    Returns
    -------
    SkeletonRecovery
        Targets are skeleton points with ``|z| <= 1 - (r - 2 delta)``; each
        uses the farthest point ``z'`` of the same chord on the skeleton with
        ``1 - (r - 2 delta) < |z'| <= 1 - (r - 4 delta)``. Points without a
        usable reference are listed in ``skipped``.
    """
    delta = G.delta if delta is None else delta
    if delta is None:
        raise ValueError("delta is required")
    centers = source.centers
    if len(centers) != G.n or np.max(np.abs(centers - G.vertices)) > 1e-9:
        raise GeometryError("skeleton vertices must be the spot centres")
    inner, outer = _annulus_bounds(r, delta)
    if inner <= 0.0:
        raise ValueError("r - 2 delta must be smaller than 1")

    targets, t_edge, refs = [], [], []
    skipped = []
    pts, edge, t = G.sample(spacing)
    rad = np.hypot(pts[:, 0], pts[:, 1])
    fine = np.linspace(0.0, 1.0, 4001)
    for e in np.unique(edge):
        sel = (edge == e) & (rad <= inner)
        if not np.any(sel):
            continue
        k, l = G.edges[e]
        a, b = G.vertices[k], G.vertices[l]
        cand = a[None] + fine[:, None] * (b - a)[None]
        cr = np.hypot(cand[:, 0], cand[:, 1])
        ok = (cr > inner) & (cr <= outer) & G.on_skeleton(e, fine)
        if not np.any(ok):
            for p in pts[sel]:
                skipped.append((tuple(p), int(e), "no reference point on chord"))
            continue
        cand = cand[ok]
        for p in pts[sel]:
            d = np.hypot(*(cand - p).T)
            j = int(np.argmax(d))
            if d[j] < min_separation:
                skipped.append((tuple(p), int(e), "reference too close"))
                continue
            targets.append(p)
            t_edge.append(e)
            refs.append(cand[j])
    if skipped:
        logger.info("skeleton recovery skipped %d points", len(skipped))
    if not targets:
        empty = np.zeros((0, 2))
        z0 = np.zeros(0)
        return SkeletonRecovery(empty, np.zeros(0, dtype=np.int64), z0, empty, z0, z0, z0, z0, z0, skipped)

    Z = np.array(targets)
    R = np.array(refs)
    E = np.array(t_edge, dtype=np.int64)
    H_at = as_point_function(H, grid)
    sig_at = as_point_function(sigma_known, grid)
    both = H_at(np.vstack([Z, R]))
    Hz, Hr = both[:len(Z)], both[len(Z):]
    sig_ref = sig_at(R)
    Bz = np.empty(len(Z))
    Br = np.empty(len(Z))
    for i, e in enumerate(E):
        k, l = G.edges[e]
        Bz[i] = bfactor(Z[i], k, l, source, nu, n_quad)
        Br[i] = bfactor(R[i], k, l, source, nu, n_quad)
    rec = sig_ref * (Hz / Hr) * (Br / Bz)
    return SkeletonRecovery(Z, E, rec, R, sig_ref, Hz, Hr, Bz, Br, skipped)
