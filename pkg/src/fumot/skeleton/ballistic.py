"""
Localized illumination of the unit disk and its ballistic signal.

The source ``g_h`` is ``h^(-1/2)`` on small boundary arcs ``D_j`` (the parts
of the circle within distance ``h`` of the spot centres ``y_j``) and zero
elsewhere. Its uncollided field is concentrated on the thin beams joining two
spots, far narrower than any practical angular grid can resolve. The internal
data of such a source are therefore evaluated pointwise with the split
``u = u0 + u1``:

* ``u0`` (uncollided) is integrated exactly in angle: for every spot the
  directions reaching it from ``z`` form one interval, sampled with
  Gauss-Legendre nodes, and the attenuation along each ray is a line integral
  of the nodal ``sigma_t``;
* ``u1`` (collided) solves the discrete-ordinates problem on the lattice with
  the first-collision source ``sigma_s K u0`` and zero inflow.

Products of the two parts are assembled into ``psi``, the scattering
correlator and ``H`` at arbitrary points.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..grid import AngularGrid, SpatialGrid
from ..transport import PhaseFunction, TransportProblem, p_hg
from ..transport._kernels import optical_depths
from ..transport.solver import DEFAULT_MAX_ITER

logger = logging.getLogger(__name__)

__all__ = [
    "GeometryError",
    "LocalizedSource",
    "chord_attenuation_E",
    "project_through",
    "spot_preimage",
    "bfactor",
    "LocalizedFields",
    "LocalizedData",
]

TWO_PI = 2.0 * np.pi
# points closer than this to the circle are pulled inside before angular work
_RIM = 1e-9


class GeometryError(ValueError):
    """Raised when a spot configuration cannot support the requested quantity."""


def _wrap(a):
    """Angles reduced to ``(-pi, pi]``."""
    return np.pi - np.mod(np.pi - a, TWO_PI)


# ---------------------------------------------------------------------------
# source
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class LocalizedSource:
    """Sum of boundary spots ``h^(-1/2) chi(D_j)`` on the unit circle.

    Parameters
    ----------
    angles : array_like
        Polar angles of the spot centres ``y_j``.
    h : float
        Spot radius; ``D_j`` is the arc of points within distance ``h`` of
        ``y_j``, of half-angle ``2 arcsin(h / 2)``.
    """

    angles: np.ndarray
    h: float

    def __post_init__(self):
        ang = np.mod(np.asarray(self.angles, float).ravel(), TWO_PI)
        object.__setattr__(self, "angles", ang)
        if not 0.0 < self.h < 2.0:
            raise ValueError(f"spot radius must lie in (0, 2), got {self.h}")
        if ang.size > 1:
            s = np.sort(ang)
            gaps = np.diff(np.append(s, s[0] + TWO_PI))
            if gaps.min() <= 2.0 * self.half_angle:
                raise GeometryError("spots overlap; increase their spacing or reduce h")

    @classmethod
    def equispaced(cls, n: int, h: float, offset: float = 0.0) -> "LocalizedSource":
        return cls(offset + TWO_PI * np.arange(n) / n, h)

    @classmethod
    def from_points(cls, points, h: float) -> "LocalizedSource":
        p = np.asarray(points, float)
        return cls(np.arctan2(p[:, 1], p[:, 0]), h)

    @property
    def n(self) -> int:
        return self.angles.size

    @property
    def amplitude(self) -> float:
        return self.h ** -0.5

    @property
    def half_angle(self) -> float:
        return 2.0 * np.arcsin(0.5 * self.h)

    @property
    def centers(self) -> np.ndarray:
        return np.column_stack([np.cos(self.angles), np.sin(self.angles)])

    def arc_ends(self) -> tuple[np.ndarray, np.ndarray]:
        """Clockwise and counter-clockwise ends of every spot, each ``(n, 2)``."""
        a = self.angles - self.half_angle
        b = self.angles + self.half_angle
        return (np.column_stack([np.cos(a), np.sin(a)]),
                np.column_stack([np.cos(b), np.sin(b)]))

    def __call__(self, x, y) -> np.ndarray:
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        out = np.zeros(np.broadcast(x, y).shape)
        for cx, cy in self.centers:
            out += np.hypot(x - cx, y - cy) <= self.h
        return self.amplitude * out


# ---------------------------------------------------------------------------
# chord attenuation
# ---------------------------------------------------------------------------
def _lattice(grid: SpatialGrid):
    return grid.x0, grid.y0, grid.h, grid.nx, grid.ny


def chord_attenuation_E(y, y_prime, sigma, grid: SpatialGrid, step: float | None = None) -> float:
    """``exp(-|y - y'| int_0^1 sigma(y + s (y' - y)) ds)``.

    The line integral uses the composite trapezoid rule with about one node
    per lattice spacing (``step`` overrides the spacing) and bilinear values
    of the nodal field, ghost nodes filled.
    """
    y = np.asarray(y, float)
    yp = np.asarray(y_prime, float)
    L = float(np.hypot(*(yp - y)))
    if L == 0.0:
        return 1.0
    sig = grid.fill_ghosts(np.asarray(sigma, float))
    v = (yp - y) / L
    depth = optical_depths(sig, *_lattice(grid), np.array([yp[0]]), np.array([yp[1]]),
                           np.array([v[0]]), np.array([v[1]]), np.array([L]),
                           grid.h if step is None else step)
    return float(np.exp(-depth[0]))


# ---------------------------------------------------------------------------
# spot preimages and the geometric factor
# ---------------------------------------------------------------------------
def project_through(y, z) -> np.ndarray:
    """Second intersection with the unit circle of the line from ``y`` through ``z``."""
    y = np.asarray(y, float)
    z = np.asarray(z, float)
    d = z - y
    t = -2.0 * np.sum(y * d, axis=-1) / np.sum(d * d, axis=-1)
    return y + t[..., None] * d if d.ndim > 1 else y + t * d


def _arc_local(points, center_angle):
    return _wrap(np.arctan2(points[..., 1], points[..., 0]) - center_angle)


def spot_preimage(z, k: int, l: int, source: LocalizedSource) -> tuple[float, float]:
    """Arc ``D_kl(z)`` of spot ``k`` whose projection through ``z`` lands in spot ``l``.

    Returned as an interval of polar angles relative to the centre of spot
    ``k``; the interval is empty (``lo >= hi``) when no line through ``z``
    joins the two spots.
    """
    z = np.asarray(z, float)
    alpha = source.half_angle
    phi_k = source.angles[k]
    a, b = source.arc_ends()
    ends = np.array([project_through(a[l], z), project_through(b[l], z)])
    s = _arc_local(ends, phi_k)
    lo, hi = min(s), max(s)
    if hi - lo > np.pi:
        # the projected arc straddles the far side of spot k
        return 0.0, 0.0
    return max(lo, -alpha), min(hi, alpha)


def _ballistic_weight(phi, z):
    """``|y - y'| / (2 |z - y|)`` for ``y`` at polar angle ``phi``.

    On the unit circle ``|n(y) . (y - y') / |y - y'||`` is ``|y - y'| / 2``, so
    this weight times ``dS_y`` is the angle under which ``dS_y`` is seen from
    ``z``.
    """
    y = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    yp = project_through(y, np.broadcast_to(z, y.shape))
    return np.linalg.norm(y - yp, axis=-1) / (2.0 * np.linalg.norm(z - y, axis=-1))


def bfactor(z, k: int, l: int, source: LocalizedSource, nu: float = 2.0, n_quad: int = 32) -> float:
    """Geometric factor of the ballistic signal of chord ``(k, l)`` at ``z``.

    ``B = (1 / (nu h)) (int_{D_kl(z)} w dS + int_{D_lk(z)} w dS)`` with
    ``w = |y - y'| / (2 |z - y|)``; near the chord ``|y - y'|`` is
    ``|y_k - y_l|`` up to ``O(h)``. Each integral is evaluated with
    ``n_quad`` Gauss-Legendre nodes on the preimage arc. ``nu`` only scales
    the result and cancels in ratios.

    Raises
    ------
    GeometryError
        When ``D_kl(z)`` or ``D_lk(z)`` is empty, i.e. ``z`` lies outside the
        beam joining the two spots.
    """
    z = np.asarray(z, float)
    if np.hypot(*z) >= 1.0 - _RIM:
        raise GeometryError("z must lie inside the disk")
    xg, wg = np.polynomial.legendre.leggauss(n_quad)
    total = 0.0
    for i, j in ((k, l), (l, k)):
        lo, hi = spot_preimage(z, i, j, source)
        if hi <= lo:
            raise GeometryError(f"z={z} is outside the beam of spots {k} and {l}")
        phi = source.angles[i] + 0.5 * (hi + lo) + 0.5 * (hi - lo) * xg
        total += 0.5 * (hi - lo) * float(np.dot(wg, _ballistic_weight(phi, z)))
    return total / (nu * source.h)


# ---------------------------------------------------------------------------
# pointwise internal data
# ---------------------------------------------------------------------------
def _spot_intervals(z, source: LocalizedSource):
    """Direction intervals ``[lo, lo + width]`` whose backward rays from ``z`` hit each spot.

    ``v = (z - y) / |z - y|`` for ``y`` on the arc. The width is the angle
    between the directions to the arc ends, taken the long way round when
    ``z`` lies between the arc and its chord.
    """
    a, b = source.arc_ends()
    za = z[:, None, :] - a[None]
    zb = z[:, None, :] - b[None]
    ang_a = np.arctan2(za[..., 1], za[..., 0])
    ang_b = np.arctan2(zb[..., 1], zb[..., 0])
    cosw = np.einsum("psi,psi->ps", za, zb) / (np.linalg.norm(za, axis=-1) * np.linalg.norm(zb, axis=-1))
    w0 = np.arccos(np.clip(cosw, -1.0, 1.0))
    cross = za[..., 0] * zb[..., 1] - za[..., 1] * zb[..., 0]
    lens = (z @ source.centers.T) > np.cos(source.half_angle)
    ccw = (cross > 0) != lens
    lo = np.where(ccw, ang_a, ang_b)
    width = np.where(lens, TWO_PI - w0, w0)
    return lo, width


def _intersect(lo1, w1, lo2, w2):
    """Intersection of circular intervals as up to two pieces ``(start, length)``."""
    d = np.mod(lo2 - lo1, TWO_PI)
    pieces = []
    for shift in (0.0, -TWO_PI):
        s = np.maximum(0.0, d + shift)
        e = np.minimum(w1, d + shift + w2)
        pieces.append((lo1 + s, np.maximum(e - s, 0.0)))
    return pieces


def _exit_lengths(z, vx, vy):
    """Backward and forward distances from ``z`` to the unit circle along ``+-v``."""
    zv = z[..., 0] * vx + z[..., 1] * vy
    disc = np.sqrt(np.maximum(zv * zv + 1.0 - np.sum(z * z, axis=-1), 0.0))
    return zv + disc, -zv + disc


@dataclass
class LocalizedFields:
    """Pointwise correlators of a localized source.

    ``psi_ballistic`` is the uncollided-uncollided part of ``psi``.
    """

    points: np.ndarray
    psi: np.ndarray
    corr_K: np.ndarray
    H: np.ndarray
    psi_ballistic: np.ndarray


class LocalizedData:
    """Internal data of a spot source on the unit disk, evaluated at arbitrary points.

    Parameters
    ----------
    grid : SpatialGrid
        Disk lattice carrying the coefficients and the collided field.
    angular : AngularGrid
        Directions of the collided solve.
    phase : PhaseFunction
        Discrete kernel for the collided field; its anisotropy ``g`` also sets
        the continuum kernel applied to ``u0``.
    sigma_t, sigma_s : ndarray
        Nodal total attenuation (``sigma_xtf``) and scattering.
    source : LocalizedSource
    n_gl : int
        Gauss-Legendre nodes per spot interval.
    collided : bool
        Include ``u1``; with ``False`` only the uncollided part is used.
    """

    def __init__(self, grid: SpatialGrid, angular: AngularGrid, phase: PhaseFunction, sigma_t,
                 sigma_s, source: LocalizedSource, n_gl: int = 16, tol: float = 1e-8,
                 max_iter: int = DEFAULT_MAX_ITER, collided: bool = True, chunk: int = 512):
        if grid.kind != "unit-disk":
            raise GeometryError("localized sources are defined on the unit disk")
        self.grid = grid
        self.angular = angular
        self.phase = phase
        self.source = source
        self.n_gl = n_gl
        self.chunk = chunk
        self.prob = TransportProblem(grid, angular, sigma_t, sigma_s, phase)
        self.sigma_t = self.prob.sigma_t
        self.sigma_s = self.prob.sigma_s
        self.step = 0.5 * grid.h
        self._xg, self._wg = np.polynomial.legendre.leggauss(n_gl)
        self.u1 = None
        self.Ku1 = None
        self.iterations = 0
        if collided and np.any(self.sigma_s[grid.inside] > 0):
            q = self.first_collision_source()
            sol = self.prob.solve(None, q, tol, max_iter)
            self.u1 = sol.u
            self.Ku1 = phase.apply(self.u1)
            self.iterations = sol.iterations

    # ------------------------------------------------------------ uncollided
    def _depth(self, px, py, vx, vy, length):
        shape = np.broadcast_shapes(px.shape, py.shape, vx.shape, vy.shape, length.shape)
        args = [np.ascontiguousarray(np.broadcast_to(a, shape), dtype=float).ravel()
                for a in (px, py, vx, vy, length)]
        return optical_depths(self.sigma_t, *_lattice(self.grid), *args, self.step).reshape(shape)

    def uncollided(self, z):
        """Quadrature of ``u0(z, .)``.

        Returns ``(theta, weight, u0)`` of shape ``(P, n_spots * n_gl)``: node
        directions, angular weights and field values.
        """
        lo, width = _spot_intervals(z, self.source)
        theta = lo[..., None] + 0.5 * width[..., None] * (1.0 + self._xg)
        weight = 0.5 * width[..., None] * self._wg
        P = len(z)
        theta = theta.reshape(P, -1)
        weight = weight.reshape(P, -1)
        vx, vy = np.cos(theta), np.sin(theta)
        zz = z[:, None, :]
        tau_m, _ = _exit_lengths(zz, vx, vy)
        depth = self._depth(zz[..., 0], zz[..., 1], vx, vy, tau_m)
        return theta, weight, self.source.amplitude * np.exp(-depth)

    def ballistic_psi(self, z) -> np.ndarray:
        """``int u0(z, v) u0(z, -v) dv``: rays that leave one spot and hit another."""
        lo, width = _spot_intervals(z, self.source)
        S = self.source.n
        P = len(z)
        starts, lengths, owner = [], [], []
        for i in range(S):
            for j in range(S):
                for s, ln in _intersect(lo[:, i], width[:, i], lo[:, j] + np.pi, width[:, j]):
                    keep = ln > 0
                    if np.any(keep):
                        starts.append(s[keep])
                        lengths.append(ln[keep])
                        owner.append(np.nonzero(keep)[0])
        out = np.zeros(P)
        if not starts:
            return out
        s = np.concatenate(starts)
        ln = np.concatenate(lengths)
        own = np.concatenate(owner)
        theta = s[:, None] + 0.5 * ln[:, None] * (1.0 + self._xg)
        w = 0.5 * ln[:, None] * self._wg
        vx, vy = np.cos(theta), np.sin(theta)
        zz = z[own][:, None, :]
        tau_m, tau_p = _exit_lengths(zz, vx, vy)
        depth = (self._depth(zz[..., 0], zz[..., 1], vx, vy, tau_m)
                 + self._depth(zz[..., 0], zz[..., 1], -vx, -vy, tau_p))
        contrib = np.sum(w * np.exp(-depth), axis=1) * self.source.amplitude ** 2
        np.add.at(out, own, contrib)
        return out

    def _Ku0(self, z) -> np.ndarray:
        """``(K u0)(z, v_k)`` for the discrete directions, shape ``(M, P)``."""
        dirs = self.angular.directions
        theta, w, u0 = self.uncollided(z)
        cos = dirs[:, 0, None, None] * np.cos(theta)[None] + dirs[:, 1, None, None] * np.sin(theta)[None]
        return np.einsum("mpn,pn->mp", p_hg(cos, self.phase.g), w * u0)

    def first_collision_source(self, subsample: int = 8) -> np.ndarray:
        """``sigma_s (K u0)`` at the active lattice nodes for every discrete direction.

        ``K u0`` grows like ``h^(-1/2) min(pi, 2 h / d)`` at distance ``d`` from
        a spot, far too sharply for point sampling. Nodes within two lattice
        spacings of a spot therefore carry the average over a
        ``subsample x subsample`` sub-grid of their cell (points inside the
        disk only) instead of the point value.
        """
        grid = self.grid
        M = self.angular.M
        q = np.zeros((M,) + grid.shape)
        flat = q.reshape(M, -1)
        sig_s = self.sigma_s.ravel()
        idx = grid.active[sig_s[grid.active] > 0]
        pts = _pull_inside(np.column_stack([grid.X.ravel()[idx], grid.Y.ravel()[idx]]))
        dist = np.min(np.linalg.norm(pts[:, None, :] - self.source.centers[None], axis=-1), axis=1)
        near = dist < self.source.h + 2.0 * grid.h
        far_idx, far_pts = idx[~near], pts[~near]
        for s in range(0, len(far_idx), self.chunk):
            sl = slice(s, s + self.chunk)
            flat[:, far_idx[sl]] = self._Ku0(far_pts[sl]) * sig_s[far_idx[sl]]
        offs = (np.arange(subsample) + 0.5) / subsample - 0.5
        ox, oy = np.meshgrid(offs * grid.h, offs * grid.h, indexing="ij")
        for node, p in zip(idx[near], pts[near]):
            sub = np.column_stack([p[0] + ox.ravel(), p[1] + oy.ravel()])
            sub = sub[np.hypot(sub[:, 0], sub[:, 1]) < 1.0 - _RIM]
            if len(sub) == 0:
                sub = p[None]
            flat[:, node] = self._Ku0(sub).mean(axis=1) * sig_s[node]
        return q

    # -------------------------------------------------------------- collided
    def _angular_interp(self, f, theta):
        """Periodic linear interpolation in angle of ``f`` (shape ``(M, P)``) at ``theta`` ``(P, n)``."""
        M = self.angular.M
        x = np.mod(theta, TWO_PI) / (TWO_PI / M)
        k0 = np.floor(x).astype(np.int64) % M
        fr = x - np.floor(x)
        k1 = (k0 + 1) % M
        cols = np.arange(f.shape[1])[:, None]
        return (1.0 - fr) * f[k0, cols] + fr * f[k1, cols]

    # ------------------------------------------------------------ evaluation
    def evaluate(self, points) -> LocalizedFields:
        """``psi``, the scattering correlator and ``H`` at ``points`` (shape ``(P, 2)``)."""
        z = _pull_inside(np.atleast_2d(np.asarray(points, float)))
        P = len(z)
        psi = np.empty(P)
        corr = np.empty(P)
        psi_b = np.empty(P)
        g = self.phase.g
        dirs = self.angular.directions
        wk = self.angular.weights
        flip = self.angular.antipode
        for s in range(0, P, self.chunk):
            zc = z[s:s + self.chunk]
            theta, w, u0 = self.uncollided(zc)
            wu = w * u0
            ct, st = np.cos(theta), np.sin(theta)
            # K u0 at -v_n for every node direction v_n (reflection of the kernel argument)
            cos_nn = -(ct[:, :, None] * ct[:, None, :] + st[:, :, None] * st[:, None, :])
            Ku0_back = np.einsum("pnm,pm->pn", p_hg(cos_nn, g), wu)
            # K u0 at the discrete directions
            cos_kn = dirs[None, :, 0, None] * ct[:, None, :] + dirs[None, :, 1, None] * st[:, None, :]
            Ku0_k = np.einsum("pkn,pn->pk", p_hg(cos_kn, g), wu).T  # (M, P)
            bb = self.ballistic_psi(zc)
            psi_c = bb.copy()
            corr_c = np.sum(wu * Ku0_back, axis=1)
            if self.u1 is not None:
                u1 = self.grid.interpolate(self.u1, zc[:, 0], zc[:, 1])  # (M, P)
                Ku1 = self.grid.interpolate(self.Ku1, zc[:, 0], zc[:, 1])
                u1_back = self._angular_interp(u1, theta + np.pi)
                Ku1_back = self._angular_interp(Ku1, theta + np.pi)
                psi_c += 2.0 * np.sum(wu * u1_back, axis=1) + wk @ (u1 * u1[flip])
                corr_c += np.sum(wu * Ku1_back, axis=1) + wk @ ((Ku0_k + Ku1) * u1[flip])
            psi[s:s + self.chunk] = psi_c
            corr[s:s + self.chunk] = corr_c
            psi_b[s:s + self.chunk] = bb
        sig_t = self.grid.interpolate(self.sigma_t, z[:, 0], z[:, 1])
        sig_s = self.grid.interpolate(self.sigma_s, z[:, 0], z[:, 1])
        H = -sig_t * psi + sig_s * corr
        return LocalizedFields(z, psi, corr, H, psi_b)

    def H(self, points) -> np.ndarray:
        return self.evaluate(points).H

    def nodal(self) -> LocalizedFields:
        """Fields at every lattice node inside the disk, returned as nodal arrays."""
        grid = self.grid
        idx = np.flatnonzero(grid.inside)
        pts = np.column_stack([grid.X.ravel()[idx], grid.Y.ravel()[idx]])
        f = self.evaluate(pts)

        def scatter(vals):
            out = np.zeros(grid.shape)
            out.ravel()[idx] = vals
            return out

        return LocalizedFields(f.points, scatter(f.psi), scatter(f.corr_K), scatter(f.H),
                               scatter(f.psi_ballistic))


def _pull_inside(z):
    r = np.hypot(z[:, 0], z[:, 1])
    scale = np.where(r > 1.0 - _RIM, (1.0 - _RIM) / np.maximum(r, 1e-300), 1.0)
    return z * scale[:, None]
