"""
Chord graphs on the unit circle.

A vertex set ``V`` on the unit circle defines the complete graph of chords
between its points. Its theta-skeleton keeps, of every chord, only the parts
that stay at distance at least ``theta`` from every other chord. If ``V`` is a
maximal delta-packing and ``theta`` is small enough the surviving segments
still come within ``2 delta`` of every point of the disk, which
:func:`covering_check` verifies by Monte Carlo sampling.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "packing_size",
    "boundary_packing",
    "SkeletonGraph",
    "build_skeleton",
    "default_theta",
    "CoveringReport",
    "covering_check",
    "segment_distance",
    "skeleton_distance",
    "uniform_disk",
]


# ---------------------------------------------------------------------------
# packings of the unit circle
# ---------------------------------------------------------------------------
def packing_size(delta: float) -> int:
    """Largest ``n`` whose equally spaced points are more than ``delta`` apart.

    Neighbouring points of ``n`` equally spaced points are ``2 sin(pi / n)``
    apart, which decreases in ``n``.
    """
    if not 0.0 < delta < 2.0:
        raise ValueError(f"delta must lie in (0, 2), got {delta}")
    n = max(2, int(np.floor(np.pi / np.arcsin(delta / 2.0))))
    while 2.0 * np.sin(np.pi / (n + 1)) > delta:
        n += 1
    while n > 2 and 2.0 * np.sin(np.pi / n) <= delta:
        n -= 1
    return n


def boundary_packing(delta: float, offset: float = 0.0) -> np.ndarray:
    """Maximal delta-packing of the unit circle.

    Returns ``n = packing_size(delta)`` equally spaced points (shape ``(n, 2)``)
    starting at angle ``offset``. No further point can be added: every point of
    the circle lies within ``2 sin(pi / (2n)) <= 2 sin(pi / (n + 1)) <= delta``
    of the set, so the packing is also a delta-covering.
    """
    n = packing_size(delta)
    phi = offset + 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([np.cos(phi), np.sin(phi)])


# ---------------------------------------------------------------------------
# tube intersections
# ---------------------------------------------------------------------------
def _disc_interval(A, d, C, theta):
    """Parameters ``t`` with ``|A + t d - C| < theta``, vectorized over ``C``.

    The chord of the disc is centred at the foot of the perpendicular from
    ``C``; its half-length comes from the perpendicular distance, taken from a
    cross product so that discs centred on the line (shared chord endpoints)
    are resolved to full precision instead of ``sqrt(eps)``.
    """
    a = d @ d
    w = C - A
    t0 = (w @ d) / a
    perp = (w[:, 0] * d[1] - w[:, 1] * d[0]) / np.sqrt(a)
    gap = theta * theta - perp * perp
    ok = gap > 0
    half = np.sqrt(np.where(ok, gap, 0.0) / a)
    lo = np.where(ok, t0 - half, np.inf)
    hi = np.where(ok, t0 + half, -np.inf)
    return lo, hi


def tube_intervals(A, B, C, D, theta):
    """Parameter intervals of the segment ``AB`` inside the theta-tubes of segments ``CD``.

    The tube of a segment is the open set of points closer than ``theta`` to
    it (a stadium). The distance to a convex set is convex along a line, so
    each intersection is a single interval; it is the hull of the
    intersections with the central rectangle and the two end discs.

    Parameters
    ----------
    A, B : ndarray, shape (2,)
        Endpoints of the segment being pruned, parametrized as ``A + t (B - A)``.
    C, D : ndarray, shape (m, 2)
        Endpoints of the other segments.

    Returns
    -------
    lo, hi : ndarray, shape (m,)
        Interval ends clipped to ``[0, 1]``; empty intervals have ``lo >= hi``.
    """
    d = B - A
    e = D - C
    L2 = np.linalg.norm(e, axis=1)
    t_hat = e / L2[:, None]
    n_hat = np.column_stack([-t_hat[:, 1], t_hat[:, 0]])
    # rectangle: along-segment slab intersected with the across-segment slab
    mid = 0.5 * (C + D)
    lo1, hi1 = _slab_interval_many(A, d, t_hat, np.einsum("ij,ij->i", t_hat, mid), 0.5 * L2)
    lo2, hi2 = _slab_interval_many(A, d, n_hat, np.einsum("ij,ij->i", n_hat, mid), np.full_like(L2, theta))
    r_lo, r_hi = np.maximum(lo1, lo2), np.minimum(hi1, hi2)
    c_lo, c_hi = _disc_interval(A, d, C, theta)
    d_lo, d_hi = _disc_interval(A, d, D, theta)
    los = np.stack([r_lo, c_lo, d_lo])
    his = np.stack([r_hi, c_hi, d_hi])
    nonempty = los < his
    lo = np.min(np.where(nonempty, los, np.inf), axis=0)
    hi = np.max(np.where(nonempty, his, -np.inf), axis=0)
    return np.clip(lo, 0.0, 1.0), np.clip(hi, 0.0, 1.0)


def _slab_interval_many(A, d, normals, offsets, half_widths):
    nd = normals @ d
    na = normals @ A - offsets
    safe = np.where(np.abs(nd) < 1e-14, 1.0, nd)
    t1 = (-half_widths - na) / safe
    t2 = (half_widths - na) / safe
    lo = np.minimum(t1, t2)
    hi = np.maximum(t1, t2)
    parallel = np.abs(nd) < 1e-14
    inside = np.abs(na) < half_widths
    lo = np.where(parallel, np.where(inside, -np.inf, np.inf), lo)
    hi = np.where(parallel, np.where(inside, np.inf, -np.inf), hi)
    return lo, hi


def _merge(intervals):
    """Union of ``(lo, hi)`` intervals as a sorted disjoint list."""
    out = []
    for lo, hi in sorted(intervals):
        if out and lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [(a, b) for a, b in out]


def _complement(removed, eps=1e-15):
    keep = []
    t = 0.0
    for lo, hi in removed:
        if lo > t + eps:
            keep.append((t, lo))
        t = max(t, hi)
    if t < 1.0 - eps:
        keep.append((t, 1.0))
    return keep


# ---------------------------------------------------------------------------
# skeleton graph
# ---------------------------------------------------------------------------
@dataclass
class SkeletonGraph:
    """Complete chord graph of ``vertices`` with theta-tube crossings removed.

    Attributes
    ----------
    vertices : ndarray, shape (n, 2)
    edges : ndarray, shape (n_edges, 2)
        Vertex index pairs ``(k, l)`` with ``k < l``; row ``e`` is chord ``e``.
    theta : float
        Tube radius.
    kept : list of list of (t0, t1)
        Surviving parameter intervals of every chord, ``x = y_k + t (y_l - y_k)``.
    removed : list of list of (t0, t1)
        Merged removed intervals of every chord.
    delta : float or None
        Packing parameter the vertices were built with, if known.
    """

    vertices: np.ndarray
    edges: np.ndarray
    theta: float
    kept: list
    removed: list
    delta: float | None = None
    params: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.vertices)

    def edge_length(self, e: int) -> float:
        k, l = self.edges[e]
        return float(np.linalg.norm(self.vertices[l] - self.vertices[k]))

    def removed_length(self, e: int) -> float:
        return self.edge_length(e) * sum(b - a for a, b in self.removed[e])

    def removed_lengths(self) -> np.ndarray:
        return np.array([self.removed_length(e) for e in range(len(self.edges))])

    def segments(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Surviving pieces as ``(P, Q, edge_id)`` with endpoint arrays of shape ``(m, 2)``."""
        P, Q, ids = [], [], []
        for e, pieces in enumerate(self.kept):
            k, l = self.edges[e]
            a, b = self.vertices[k], self.vertices[l]
            for t0, t1 in pieces:
                P.append(a + t0 * (b - a))
                Q.append(a + t1 * (b - a))
                ids.append(e)
        if not P:
            return np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0, dtype=np.int64)
        return np.array(P), np.array(Q), np.array(ids, dtype=np.int64)

    def on_skeleton(self, e: int, t) -> np.ndarray:
        """Whether chord parameters ``t`` of edge ``e`` lie on a surviving piece."""
        t = np.asarray(t, float)
        out = np.zeros(t.shape, dtype=bool)
        for t0, t1 in self.kept[e]:
            out |= (t >= t0) & (t <= t1)
        return out

    def sample(self, spacing: float):
        """Points along the surviving pieces, roughly ``spacing`` apart.

        Returns ``(points, edge_id, t)``.
        """
        pts, ids, ts = [], [], []
        for e, pieces in enumerate(self.kept):
            k, l = self.edges[e]
            a, b = self.vertices[k], self.vertices[l]
            L = np.linalg.norm(b - a)
            for t0, t1 in pieces:
                m = max(1, int(np.ceil((t1 - t0) * L / spacing)))
                t = np.linspace(t0, t1, m + 1)
                pts.append(a[None] + t[:, None] * (b - a)[None])
                ids.append(np.full(t.size, e))
                ts.append(t)
        if not pts:
            return np.zeros((0, 2)), np.zeros(0, dtype=np.int64), np.zeros(0)
        return np.concatenate(pts), np.concatenate(ids), np.concatenate(ts)


def default_theta(delta: float, n: int) -> float:
    """Tube radius ``delta^2 / (4 n^2)``, small enough for the covering bound."""
    return delta * delta / (4.0 * n * n)


def build_skeleton(vertices, theta: float, delta: float | None = None) -> SkeletonGraph:
    """Theta-skeleton of the complete chord graph on ``vertices``.

    Every chord loses its intersection with the theta-tube of every other
    chord, including chords that share an endpoint with it.
    """
    V = np.asarray(vertices, float)
    if V.ndim != 2 or V.shape[1] != 2:
        raise ValueError("vertices must have shape (n, 2)")
    if theta < 0:
        raise ValueError("theta must be non-negative")
    n = len(V)
    edges = np.array([(k, l) for k in range(n) for l in range(k + 1, n)], dtype=np.int64).reshape(-1, 2)
    C = V[edges[:, 0]]
    D = V[edges[:, 1]]
    kept, removed = [], []
    for e, (k, l) in enumerate(edges):
        others = np.arange(len(edges)) != e
        if theta == 0 or not np.any(others):
            kept.append([(0.0, 1.0)])
            removed.append([])
            continue
        lo, hi = tube_intervals(V[k], V[l], C[others], D[others], theta)
        cut = _merge([(a, b) for a, b in zip(lo, hi) if b > a])
        removed.append(cut)
        kept.append(_complement(cut))
    G = SkeletonGraph(V, edges, float(theta), kept, removed, delta)
    logger.debug("skeleton: %d vertices, %d edges, theta=%.3e", n, len(edges), theta)
    return G


# ---------------------------------------------------------------------------
# covering check
# ---------------------------------------------------------------------------
def segment_distance(points, P, Q, chunk_elems: int = 2_000_000) -> np.ndarray:
    """Distance from each point to the nearest of the segments ``[P_i, Q_i]``."""
    points = np.atleast_2d(np.asarray(points, float))
    if len(P) == 0:
        return np.full(len(points), np.inf)
    d = Q - P
    dd = np.einsum("ij,ij->i", d, d)
    dd = np.where(dd > 0, dd, 1.0)
    out = np.empty(len(points))
    chunk = max(1, chunk_elems // len(P))
    for s in range(0, len(points), chunk):
        x = points[s:s + chunk]
        wx = x[:, None, 0] - P[None, :, 0]
        wy = x[:, None, 1] - P[None, :, 1]
        t = np.clip((wx * d[:, 0] + wy * d[:, 1]) / dd, 0.0, 1.0)
        ex = wx - t * d[:, 0]
        ey = wy - t * d[:, 1]
        out[s:s + chunk] = np.sqrt(np.min(ex * ex + ey * ey, axis=1))
    return out


def skeleton_distance(points, G: SkeletonGraph) -> np.ndarray:
    """Distance from each point to the surviving pieces of ``G``.

    Works chord by chord: the orthogonal projection onto the chord is moved
    to the nearest surviving parameter, which costs one sorted search per
    chord instead of one distance per piece.
    """
    points = np.atleast_2d(np.asarray(points, float))
    best = np.full(len(points), np.inf)
    for e, pieces in enumerate(G.kept):
        if not pieces:
            continue
        k, l = G.edges[e]
        a, b = G.vertices[k], G.vertices[l]
        d = b - a
        L = float(np.hypot(*d))
        w = points - a
        t = (w @ d) / (L * L)
        perp = (w[:, 0] * d[1] - w[:, 1] * d[0]) / L
        lo = np.array([p[0] for p in pieces])
        hi = np.array([p[1] for p in pieces])
        # piece j is the last one starting at or before t
        j = np.clip(np.searchsorted(lo, t, side="right") - 1, 0, len(lo) - 1)
        inside = (t >= lo[j]) & (t <= hi[j])
        gap_left = np.where(t < lo[j], lo[j] - t, np.where(t > hi[j], t - hi[j], 0.0))
        # the next piece to the right may be closer than the end of piece j
        jn = np.minimum(j + 1, len(lo) - 1)
        gap_right = np.where(lo[jn] > t, lo[jn] - t, np.inf)
        gap = np.where(inside, 0.0, np.minimum(gap_left, gap_right)) * L
        best = np.minimum(best, np.sqrt(perp * perp + gap * gap))
    return best


@dataclass
class CoveringReport:
    samples: int
    seed: int
    threshold: float
    max_distance: float
    max_distance_interior: float
    r: float
    passes: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def uniform_disk(samples: int, rng, radius: float = 1.0) -> np.ndarray:
    """Uniform points in the disk of the given radius."""
    rho = radius * np.sqrt(rng.uniform(0.0, 1.0, samples))
    phi = rng.uniform(0.0, 2.0 * np.pi, samples)
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi)])


def covering_check(G: SkeletonGraph, r: float = 0.0, samples: int = 10_000, seed: int = 0,
                   delta: float | None = None, points=None) -> CoveringReport:
    """Monte Carlo check that every point of the disk is within ``2 delta`` of the skeleton.

    ``samples`` uniform points are drawn in the unit disk and, separately, in
    the interior disk ``|x| <= 1 - r``. ``points`` may be given instead of
    random samples.
    """
    delta = G.delta if delta is None else delta
    if delta is None:
        raise ValueError("delta is needed to set the covering threshold")
    rng = np.random.default_rng(seed)
    if points is None:
        pts = uniform_disk(samples, rng)
        inner = uniform_disk(samples, rng, 1.0 - r) if 0.0 < r < 1.0 else pts
    else:
        pts = inner = np.atleast_2d(np.asarray(points, float))
    dist = skeleton_distance(pts, G)
    dist_in = dist if inner is pts else skeleton_distance(inner, G)
    thr = 2.0 * delta
    md, mdi = float(dist.max()), float(dist_in.max())
    report = CoveringReport(len(pts), seed, thr, md, mdi, r, bool(md <= thr and mdi <= thr))
    if not report.passes:
        logger.warning("covering check failed: max distance %.4f > %.4f", max(md, mdi), thr)
    return report
