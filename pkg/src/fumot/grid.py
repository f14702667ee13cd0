"""
Phase-space discretization: spatial lattices, discrete ordinates and ray geometry.

Two domains are supported. The unit square is covered by an ``n x n`` lattice
with spacing ``1/(n-1)`` whose edge nodes are the boundary nodes. The unit disk
is embedded in the lattice over ``[-1, 1]^2``; nodes inside the disk are
*active*, the remaining ones are *ghost* nodes that carry a copy of the nearest
active value so that bilinear interpolation is defined on every cell meeting
the disk. Disk boundary nodes are placed at uniform angles.

Fields are stored as arrays of shape ``(nx, ny)`` (nodal) or ``(M, nx, ny)``
(phase space), with ``ij`` indexing so that ``field[i, j]`` lives at
``(x[i], y[j])``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "SpatialGrid",
    "AngularGrid",
    "RayTrace",
    "exit_times",
    "ray_quadrature",
    "trace_ray",
    "path_weights",
]

DOMAIN_KINDS = ("unit-square", "unit-disk")

# Tolerance used when deciding whether a point lies in the closed domain.
GEOMETRY_TOL = 1e-10
# Direction components below this magnitude are treated as exactly zero.
_AXIS_EPS = 1e-14


class AngularGrid:
    """Uniform discrete ordinates on the unit circle.

    Parameters
    ----------
    M : int
        Number of directions, must be even so that every direction has an
        antipode in the set.

    Attributes
    ----------
    theta : ndarray, shape (M,)
        Polar angles ``2 pi k / M``.
    directions : ndarray, shape (M, 2)
        Unit vectors. The second half is the exact negation of the first half.
    weights : ndarray, shape (M,)
        Quadrature weights, all equal to ``2 pi / M``.
    antipode : ndarray of int, shape (M,)
        Index map ``k -> (k + M/2) mod M``.
    """

    def __init__(self, M: int):
        M = int(M)
        if M < 2 or M % 2:
            raise ValueError(f"direction count must be even and >= 2, got {M}")
        self.M = M
        half = M // 2
        self.theta = 2.0 * np.pi * np.arange(M) / M
        first = np.column_stack((np.cos(self.theta[:half]), np.sin(self.theta[:half])))
        self.directions = np.vstack((first, -first))
        self.weights = np.full(M, 2.0 * np.pi / M)
        self.antipode = (np.arange(M) + half) % M

    @property
    def dtheta(self) -> float:
        return 2.0 * np.pi / self.M

    def flip(self, f: np.ndarray) -> np.ndarray:
        """Return ``f(x, -v)`` for a phase-space array with direction axis first."""
        return f[self.antipode]

    def integrate(self, f: np.ndarray) -> np.ndarray:
        """Angular integral ``sum_k f_k w_k`` with a fixed summation order."""
        return np.tensordot(self.weights, f, axes=(0, 0))

    def __repr__(self) -> str:
        return f"AngularGrid(M={self.M})"


@dataclass(frozen=True)
class _Lattice:
    x0: float
    y0: float
    h: float
    nx: int
    ny: int


class SpatialGrid:
    """Nodal lattice on the unit square or the unit disk.

    Parameters
    ----------
    kind : {"unit-square", "unit-disk"}
        Domain type.
    n : int
        Nodes per axis of the underlying lattice (``nx = ny = n``).
    n_boundary : int, optional
        Number of boundary nodes for the disk. Defaults to about one node per
        lattice spacing of arc length.
    """

    def __init__(self, kind: str, n: int, n_boundary: int | None = None):
        if kind not in DOMAIN_KINDS:
            raise ValueError(f"unknown domain kind {kind!r}; expected one of {DOMAIN_KINDS}")
        n = int(n)
        if n < 3:
            raise ValueError("need at least 3 nodes per axis")
        self.kind = kind
        self.nx = self.ny = n
        if kind == "unit-square":
            self.x0 = self.y0 = 0.0
            self.h = 1.0 / (n - 1)
        else:
            self.x0 = self.y0 = -1.0
            self.h = 2.0 / (n - 1)
        self.x = np.linspace(self.x0, -self.x0 if kind == "unit-disk" else 1.0, n)
        self.y = self.x.copy()
        self.X, self.Y = np.meshgrid(self.x, self.y, indexing="ij")

        if kind == "unit-square":
            self.inside = np.ones((n, n), dtype=bool)
            self.diameter = np.sqrt(2.0)
        else:
            self.inside = self.X**2 + self.Y**2 <= 1.0 + 1e-12
            self.diameter = 2.0
        flat_inside = self.inside.ravel()
        self.active = np.flatnonzero(flat_inside).astype(np.int64)
        self.ghost = np.flatnonzero(~flat_inside).astype(np.int64)
        self.ghost_source = self._nearest_active(self.ghost)

        self.cell_weights = self._cell_weights()
        self._init_boundary(n_boundary)

    # ------------------------------------------------------------------ setup
    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def lattice(self) -> _Lattice:
        return _Lattice(self.x0, self.y0, self.h, self.nx, self.ny)

    @property
    def n_active(self) -> int:
        return self.active.size

    def _nearest_active(self, ghost: np.ndarray) -> np.ndarray:
        if ghost.size == 0:
            return np.zeros(0, dtype=np.int64)
        from scipy.spatial import cKDTree

        pts = np.column_stack((self.X.ravel(), self.Y.ravel()))
        tree = cKDTree(pts[self.active])
        _, idx = tree.query(pts[ghost])
        return self.active[idx]

    def _cell_weights(self) -> np.ndarray:
        """Nodal quadrature weights of the area integral."""
        h = self.h
        if self.kind == "unit-square":
            w1 = np.full(self.nx, h)
            w1[[0, -1]] = 0.5 * h
            return np.outer(w1, w1)
        return np.where(self.inside, h * h, 0.0)

    def _init_boundary(self, n_boundary):
        if self.kind == "unit-square":
            n = self.nx
            ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
            edge = (ii == 0) | (ii == n - 1) | (jj == 0) | (jj == n - 1)
            flat = np.flatnonzero(edge.ravel())
            i, j = np.divmod(flat, n)
            normals = np.zeros((flat.size, 2))
            normals[:, 0] = np.where(i == 0, -1.0, np.where(i == n - 1, 1.0, 0.0))
            normals[:, 1] = np.where(j == 0, -1.0, np.where(j == n - 1, 1.0, 0.0))
            normals /= np.linalg.norm(normals, axis=1, keepdims=True)
            arc = np.full(flat.size, self.h)
            self.boundary_index = flat.astype(np.int64)
            self.boundary_points = np.column_stack((self.x[i], self.y[j]))
            self.boundary_normals = normals
            self.boundary_weights = arc
        else:
            nb = n_boundary or max(16, int(np.ceil(2.0 * np.pi / self.h)))
            ang = 2.0 * np.pi * np.arange(nb) / nb
            pts = np.column_stack((np.cos(ang), np.sin(ang)))
            self.boundary_index = None
            self.boundary_points = pts
            self.boundary_normals = pts.copy()
            self.boundary_weights = np.full(nb, 2.0 * np.pi / nb)

    # -------------------------------------------------------------- geometry
    def signed_outside(self, px, py):
        """Positive where the point lies outside the domain (distance-like)."""
        px = np.asarray(px, float)
        py = np.asarray(py, float)
        if self.kind == "unit-square":
            return np.maximum.reduce([-px, px - 1.0, -py, py - 1.0])
        return np.hypot(px, py) - 1.0

    def contains(self, px, py, tol: float = GEOMETRY_TOL):
        return self.signed_outside(px, py) <= tol

    def project(self, px, py):
        """Project points lying at most marginally outside onto the closed domain."""
        px = np.asarray(px, float)
        py = np.asarray(py, float)
        if self.kind == "unit-square":
            return np.clip(px, 0.0, 1.0), np.clip(py, 0.0, 1.0)
        r = np.hypot(px, py)
        scale = np.where(r > 1.0, 1.0 / np.where(r > 0, r, 1.0), 1.0)
        return px * scale, py * scale

    def exit_times(self, px, py, vx, vy):
        """Vectorized backward and forward exit lengths ``(tau_minus, tau_plus)``.

        Points are assumed to lie in the closed domain; no validation happens
        here (see :func:`exit_times` for the checked version).
        """
        px, py, vx, vy = np.broadcast_arrays(*(np.asarray(a, float) for a in (px, py, vx, vy)))
        if self.kind == "unit-square":
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                big = np.inf
                pos_x = vx > _AXIS_EPS
                neg_x = vx < -_AXIS_EPS
                pos_y = vy > _AXIS_EPS
                neg_y = vy < -_AXIS_EPS
                bx = np.where(pos_x, px / vx, np.where(neg_x, (1.0 - px) / -vx, big))
                by = np.where(pos_y, py / vy, np.where(neg_y, (1.0 - py) / -vy, big))
                fx = np.where(pos_x, (1.0 - px) / vx, np.where(neg_x, px / -vx, big))
                fy = np.where(pos_y, (1.0 - py) / vy, np.where(neg_y, py / -vy, big))
            tm = np.minimum(bx, by)
            tp = np.minimum(fx, fy)
        else:
            b = px * vx + py * vy
            c = px * px + py * py - 1.0
            root = np.sqrt(np.maximum(b * b - c, 0.0))
            tm = b + root
            tp = root - b
        return np.maximum(tm, 0.0), np.maximum(tp, 0.0)

    # ----------------------------------------------------------- field utils
    def fill_ghosts(self, f: np.ndarray) -> np.ndarray:
        """Copy the nearest active value into ghost nodes (in place, returns ``f``).

        Works for nodal ``(nx, ny)`` and phase-space ``(M, nx, ny)`` arrays.
        """
        if self.ghost.size:
            flat = f.reshape(f.shape[:-2] + (-1,))
            flat[..., self.ghost] = flat[..., self.ghost_source]
        return f

    def fold_ghosts(self, f: np.ndarray) -> np.ndarray:
        """Transpose of :meth:`fill_ghosts`: accumulate ghost entries onto sources."""
        if self.ghost.size:
            flat = f.reshape(-1, self.nx * self.ny)
            np.add.at(flat, (slice(None), self.ghost_source), flat[:, self.ghost])
            flat[:, self.ghost] = 0.0
        return f

    def zero_ghosts(self, f: np.ndarray) -> np.ndarray:
        if self.ghost.size:
            flat = f.reshape(f.shape[:-2] + (-1,))
            flat[..., self.ghost] = 0.0
        return f

    def evaluate(self, func, *channels) -> np.ndarray:
        """Sample ``func(X, Y)`` on the lattice and fill ghost nodes."""
        vals = np.broadcast_to(np.asarray(func(self.X, self.Y), float), self.shape).copy()
        return self.fill_ghosts(vals)

    def interpolate(self, f: np.ndarray, px, py) -> np.ndarray:
        """Bilinear interpolation of a nodal (or stacked nodal) field at points.

        ``f`` has shape ``(..., nx, ny)``; the result has shape
        ``(..., *px.shape)``. Points are clamped to the lattice cells.
        """
        px = np.asarray(px, float)
        py = np.asarray(py, float)
        a = (px - self.x0) / self.h
        b = (py - self.y0) / self.h
        ia = np.clip(np.floor(a).astype(np.int64), 0, self.nx - 2)
        ib = np.clip(np.floor(b).astype(np.int64), 0, self.ny - 2)
        fa = np.clip(a - ia, 0.0, 1.0)
        fb = np.clip(b - ib, 0.0, 1.0)
        f00 = f[..., ia, ib]
        f10 = f[..., ia + 1, ib]
        f01 = f[..., ia, ib + 1]
        f11 = f[..., ia + 1, ib + 1]
        return (1 - fa) * (1 - fb) * f00 + fa * (1 - fb) * f10 + (1 - fa) * fb * f01 + fa * fb * f11

    def integrate(self, f: np.ndarray) -> float:
        """Area integral of a nodal field with the trapezoid cell weights."""
        return float(np.sum(self.cell_weights * f))

    def l2_norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(self.integrate(f * f)))

    def boundary_trace(self, f: np.ndarray) -> np.ndarray:
        """Values of a nodal or phase-space field at the boundary nodes."""
        if self.boundary_index is not None:
            flat = f.reshape(f.shape[:-2] + (-1,))
            return flat[..., self.boundary_index]
        bp = self.boundary_points
        return self.interpolate(f, bp[:, 0], bp[:, 1])

    def same_discretization(self, other: "SpatialGrid") -> bool:
        return self.kind == other.kind and self.nx == other.nx and self.ny == other.ny

    def __repr__(self) -> str:
        return f"SpatialGrid(kind={self.kind!r}, n={self.nx}, h={self.h:.5g})"


# ---------------------------------------------------------------------------
# checked scalar geometry
# ---------------------------------------------------------------------------
def _as_point(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != 2:
        raise ValueError("points and directions must have two components")
    return x


def _checked_point(x, grid: SpatialGrid) -> np.ndarray:
    x = _as_point(x)
    out = float(grid.signed_outside(x[0], x[1]))
    if out > GEOMETRY_TOL:
        raise ValueError(f"point {tuple(x)} lies outside the {grid.kind} by {out:.3g}")
    if out > 0:
        px, py = grid.project(x[0], x[1])
        x = np.array([float(px), float(py)])
    return x


def _checked_direction(v) -> np.ndarray:
    v = _as_point(v)
    if abs(np.hypot(v[0], v[1]) - 1.0) > 1e-10:
        raise ValueError("direction must be a unit vector")
    return v


def exit_times(x, v, grid: SpatialGrid) -> tuple[float, float]:
    """Backward and forward distances from ``x`` to the boundary along ``v``.

    Parameters
    ----------
    x : array_like, shape (2,)
        Point in the closed domain. Points outside by at most ``1e-10`` are
        projected onto the boundary first.
    v : array_like, shape (2,)
        Unit direction.
    grid : SpatialGrid
        Supplies the domain kind.

    Returns
    -------
    tau_minus, tau_plus : float
        ``x - tau_minus v`` and ``x + tau_plus v`` lie on the boundary.
    """
    x = _checked_point(x, grid)
    v = _checked_direction(v)
    tm, tp = grid.exit_times(x[0], x[1], v[0], v[1])
    return float(tm), float(tp)


def path_weights(m: int, r: float, step: float, rule: str = "simpson") -> np.ndarray:
    """Quadrature weights for nodes ``0, step, ..., m*step, m*step + r``.

    The returned array has ``m + 2`` entries; the last one belongs to the end
    node at distance ``m*step + r``. For ``rule="simpson"`` composite Simpson
    covers the largest even number of full steps; a leftover full step and the
    partial segment of length ``r`` use the trapezoid rule.
    """
    w = np.zeros(m + 2)
    if rule == "trapezoid":
        if m >= 1:
            w[:m + 1] += step
            w[0] -= 0.5 * step
            w[m] -= 0.5 * step
    elif rule == "simpson":
        me = m - (m % 2)
        if me >= 2:
            sw = np.full(me + 1, 2.0 * step / 3.0)
            sw[1::2] = 4.0 * step / 3.0
            sw[0] = sw[me] = step / 3.0
            w[:me + 1] += sw
        if m % 2:
            w[m - 1] += 0.5 * step
            w[m] += 0.5 * step
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}")
    w[m] += 0.5 * r
    w[m + 1] += 0.5 * r
    return w


def split_ray(tau: float, step: float) -> tuple[int, float]:
    """Number of full steps along a ray of length ``tau`` and the remainder."""
    m = int(np.floor(tau / step + 1e-10))
    r = max(tau - m * step, 0.0)
    return m, r


class RayQuadrature(NamedTuple):
    s: np.ndarray  # distances from the origin, increasing
    points: np.ndarray  # (n, 2) positions x - s v
    weights: np.ndarray


def ray_quadrature(x, v, grid: SpatialGrid, rule: str = "simpson", step: float | None = None) -> RayQuadrature:
    """Nodes and weights for integrating along the backward ray ``[x - tau_minus v, x]``.

    Nodes are placed at ``s = 0, step, 2 step, ...`` from ``x`` followed by the
    boundary point. A boundary point that coincides with the last regular node
    (remainder below ``1e-12 step``) is merged into it. Rays shorter than one
    step reduce to the two-node trapezoid rule.
    """
    step = grid.h if step is None else float(step)
    if step <= 0:
        raise ValueError("step must be positive")
    x = _checked_point(x, grid)
    v = _checked_direction(v)
    tau, _ = grid.exit_times(x[0], x[1], v[0], v[1])
    tau = float(tau)
    if tau <= 0.0:
        raise ValueError("ray has zero length")
    m, r = split_ray(tau, step)
    w = path_weights(m, r, step, rule)
    s = np.append(step * np.arange(m + 1), tau)
    if r <= 1e-12 * step and m >= 1:
        w[m] += w[m + 1]
        w = w[:-1]
        s = s[:-1]
        s[-1] = tau
    pts = x[None, :] - s[:, None] * v[None, :]
    return RayQuadrature(s, pts, w)


@dataclass
class RayTrace:
    """Geometry of the line through ``origin`` with direction ``direction``."""

    origin: np.ndarray
    direction: np.ndarray
    tau_minus: float
    tau_plus: float
    entry: np.ndarray = field(init=False)
    exit: np.ndarray = field(init=False)
    quadrature: RayQuadrature | None = None

    def __post_init__(self):
        self.entry = self.origin - self.tau_minus * self.direction
        self.exit = self.origin + self.tau_plus * self.direction


def trace_ray(x, v, grid: SpatialGrid, rule: str = "simpson", step: float | None = None) -> RayTrace:
    """Exit times, boundary hit points and backward quadrature for one ray."""
    x = _checked_point(x, grid)
    v = _checked_direction(v)
    tm, tp = exit_times(x, v, grid)
    quad = ray_quadrature(x, v, grid, rule, step) if tm > 0 else None
    return RayTrace(x, v, tm, tp, quadrature=quad)
