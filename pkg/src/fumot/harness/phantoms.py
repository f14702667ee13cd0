"""
Phantom and coefficient generators.

Every generator is a pure function of the node coordinates, so a field on a
coarse lattice equals the fine field restricted to the shared nodes.

Reference coordinates ``(X, Y)`` live in ``[-1, 1]^2``: on the unit square
``X = 2x - 1``, on the unit disk the physical coordinates are used directly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..grid import SpatialGrid

__all__ = [
    "SHEPP_LOGAN_MODIFIED",
    "DerenzoLayout",
    "affine",
    "derenzo",
    "derenzo_discs",
    "phantom",
    "reference_coordinates",
    "shepp_logan",
    "PHANTOM_NAMES",
]

# Modified Shepp-Logan ellipses (Toft's table): intensity, semi-axes a and b,
# centre (x0, y0) and rotation in degrees.
SHEPP_LOGAN_MODIFIED = np.array([
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
    [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
])

PHANTOM_NAMES = ("shepp-logan-modified", "derenzo", "affine")


def reference_coordinates(grid: SpatialGrid):
    """Node coordinates mapped to the reference square ``[-1, 1]^2``."""
    if grid.kind == "unit-square":
        return 2.0 * grid.X - 1.0, 2.0 * grid.Y - 1.0
    return grid.X, grid.Y


def affine(grid: SpatialGrid, a: float, b: float = 0.0, c: float = 0.0) -> np.ndarray:
    """Nodal field ``a + b x + c y`` in physical coordinates."""
    return grid.fill_ghosts(a + b * grid.X + c * grid.Y)


def shepp_logan(grid: SpatialGrid, lo: float = 0.0, hi: float = 1.0,
                table: np.ndarray = SHEPP_LOGAN_MODIFIED) -> np.ndarray:
    """Modified Shepp-Logan head phantom rescaled to ``[lo, hi]``.

    The ellipse sum takes values in ``[0, 1]`` (0 outside the skull, 1 on the
    skull); the value ``v`` is mapped to ``lo + (hi - lo) v``. The rescaling
    uses the nominal range, not the sampled extrema, so it does not depend on
    the resolution.
    """
    X, Y = reference_coordinates(grid)
    v = np.zeros(grid.shape)
    for A, a, b, x0, y0, phi in table:
        t = np.deg2rad(phi)
        ct, st = np.cos(t), np.sin(t)
        xr = (X - x0) * ct + (Y - y0) * st
        yr = -(X - x0) * st + (Y - y0) * ct
        v += A * ((xr / a) ** 2 + (yr / b) ** 2 <= 1.0)
    v = np.clip(v, 0.0, 1.0)
    return grid.fill_ghosts(lo + (hi - lo) * v)


@dataclass(frozen=True)
class DerenzoLayout:
    """Six wedge-shaped sectors of equal discs, one disc radius per sector.

    Discs sit on a triangular lattice with centre spacing ``spacing * radius``
    inside a 60 degree wedge of the reference disc of radius ``outer``.
    Lengths are in reference coordinates.
    """

    radii: tuple = (0.12, 0.1, 0.085, 0.07, 0.06, 0.05)
    outer: float = 0.85
    spacing: float = 4.0
    rotation: float = 90.0

    def __post_init__(self):
        if len(self.radii) != 6:
            raise ValueError("a Derenzo layout has exactly six sectors")
        if min(self.radii) <= 0 or self.spacing < 2.0:
            raise ValueError("disc radii must be positive and discs must not overlap")


def derenzo_discs(layout: DerenzoLayout = DerenzoLayout()) -> np.ndarray:
    """Disc centres and radii ``(K, 3)`` of a Derenzo layout."""
    discs = []
    half = np.pi / 6.0
    for k, r in enumerate(layout.radii):
        alpha = np.deg2rad(layout.rotation) + k * np.pi / 3.0
        axis = np.array([np.cos(alpha), np.sin(alpha)])
        perp = np.array([-axis[1], axis[0]])
        s = layout.spacing * r
        # closest row clears the wedge edges by one radius plus a gap
        d0 = (r + 0.5 * s) / np.sin(half)
        row = 0
        while True:
            d = d0 + row * s * np.sqrt(3.0) / 2.0
            if d + r > layout.outer:
                break
            for j in range(row + 1):
                off = (j - 0.5 * row) * s
                c = d * axis + off * perp
                # keep discs inside the wedge and the outer circle
                if np.hypot(*c) + r <= layout.outer and abs(off) + r <= d * np.tan(half):
                    discs.append((c[0], c[1], r))
            row += 1
    return np.array(discs)


def derenzo(grid: SpatialGrid, background: float = 0.2, insert: float = 0.8,
            layout: DerenzoLayout = DerenzoLayout()) -> np.ndarray:
    """Two-level Derenzo phantom: ``insert`` inside the discs, ``background`` elsewhere."""
    X, Y = reference_coordinates(grid)
    hit = np.zeros(grid.shape, dtype=bool)
    for cx, cy, r in derenzo_discs(layout):
        hit |= (X - cx) ** 2 + (Y - cy) ** 2 <= r * r
    return grid.fill_ghosts(np.where(hit, insert, background))


def phantom(name: str, grid: SpatialGrid, **params) -> np.ndarray:
    """Named nodal phantom.

    Parameters
    ----------
    name : {"shepp-logan-modified", "derenzo", "affine"}
    grid : SpatialGrid
    **params
        ``lo, hi`` for Shepp-Logan; ``background, insert, radii, outer`` for
        Derenzo; ``a, b, c`` for the affine field.
    """
    if name == "shepp-logan-modified":
        return shepp_logan(grid, params.get("lo", 0.0), params.get("hi", 1.0))
    if name == "derenzo":
        kw = {k: params[k] for k in ("radii", "outer", "spacing", "rotation") if k in params}
        if "radii" in kw:
            kw["radii"] = tuple(kw["radii"])
        return derenzo(grid, params.get("background", 0.2), params.get("insert", 0.8),
                       DerenzoLayout(**kw))
    if name == "affine":
        return affine(grid, params.get("a", 0.0), params.get("b", 0.0), params.get("c", 0.0))
    raise ValueError(f"unknown phantom {name!r}; expected one of {PHANTOM_NAMES}")
