"""
Experiment drivers.

Every driver takes an :class:`~fumot.harness.config.ExperimentConfig`, an
optional output directory and returns a report dictionary. When an output
directory is given the nodal fields are written as CSV (with PGM previews),
together with optimizer traces and a manifest that echoes the configuration,
the seeds and the library versions.

Synthetic data are generated on the data grid of the configuration and moved
to the inversion grid by bilinear interpolation; the two grids are checked to
be distinct and the data grid strictly finer before anything is solved.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..functionals import ForwardModel, InternalData, NoiseSpec, add_noise
from ..grid import AngularGrid, SpatialGrid
from ..reconstruct import (
    EtaProblem,
    SigmaObjective,
    check_linearized_conditions,
    reconstruct_eta,
    reconstruct_sigma,
)
from ..skeleton import (
    LocalizedData,
    LocalizedSource,
    boundary_packing,
    build_skeleton,
    covering_check,
    default_theta,
    packing_size,
    recover_sigma_skeleton,
    skeleton_distance,
)
from ..transport import POSITIVITY_FLOOR, CoefficientSet, hg_kernel
from .config import ConfigError, ExperimentConfig, inverse_crime_guard
from .io import write_field, write_manifest, write_table, write_trace
from .phantoms import phantom

logger = logging.getLogger(__name__)

__all__ = [
    "Discretization",
    "build_coefficients",
    "build_source",
    "transfer",
    "relative_l2",
    "generate_data",
    "run_forward",
    "run_internal_data",
    "run_reconstruct_sigma",
    "run_reconstruct_eta",
    "run_example1",
    "run_example2",
    "run_skeleton_demo",
    "run_check_conditions",
    "RUNNERS",
]

CHANNELS = ("sigma_xa", "sigma_xs", "sigma_xf", "sigma_ma", "sigma_ms", "eta")


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------
@dataclass
class Discretization:
    """Spatial grid, ordinates and scattering kernel of one solve."""

    grid: SpatialGrid
    angular: AngularGrid
    phase: object

    @classmethod
    def from_spec(cls, spec, g_aniso: float) -> "Discretization":
        grid, angular = spec.build()
        return cls(grid, angular, hg_kernel(g_aniso, angular))


def _field(spec, grid: SpatialGrid) -> np.ndarray:
    """Nodal field from a scalar or a phantom specification."""
    if isinstance(spec, (int, float)):
        return grid.fill_ghosts(np.full(grid.shape, float(spec)))
    if not isinstance(spec, dict) or "phantom" not in spec:
        raise ConfigError(f"coefficient spec must be a number or a mapping with 'phantom': {spec!r}")
    params = {k: v for k, v in spec.items() if k != "phantom"}
    return phantom(spec["phantom"], grid, **params)


def build_coefficients(specs: dict, grid: SpatialGrid) -> CoefficientSet:
    """Coefficient set on ``grid`` from per-channel specifications."""
    unknown = set(specs) - set(CHANNELS)
    if unknown:
        raise ConfigError(f"unknown coefficient channels {sorted(unknown)}")
    for ch in ("sigma_xa", "sigma_xs", "sigma_xf"):
        if ch not in specs:
            raise ConfigError(f"coefficient {ch} is required")
    vals = {ch: _field(specs[ch], grid) for ch in CHANNELS if specs.get(ch) is not None}
    return CoefficientSet(**vals)


def build_source(spec: dict):
    """Boundary source from its specification.

    ``constant``: ``value``. ``sinusoidal``: ``amplitude sin^2(f pi x) +
    amplitude sin^2(f pi y)`` with ``f = frequency``; the defaults ``f = 4``
    and ``amplitude = 5`` give ``5 sin^2(4 pi x) + 5 sin^2(4 pi y)``.
    ``spots``: a :class:`LocalizedSource` with ``n`` spots of radius ``h``.
    """
    kind = spec.get("kind", "constant")
    if kind == "constant":
        return float(spec.get("value", 1.0))
    if kind == "sinusoidal":
        amp = float(spec.get("amplitude", 5.0))
        freq = float(spec.get("frequency", 4.0))

        def g(x, y):
            return amp * np.sin(freq * np.pi * x) ** 2 + amp * np.sin(freq * np.pi * y) ** 2

        return g
    if kind == "spots":
        return LocalizedSource.equispaced(int(spec.get("n", 6)), float(spec.get("h", 1.0 / 32.0)),
                                          float(spec.get("offset", 0.0)))
    raise ConfigError(f"unknown source kind {kind!r}")


def transfer(field: np.ndarray, src: SpatialGrid, dst: SpatialGrid) -> np.ndarray:
    """Bilinear transfer of a nodal field between lattices of the same domain."""
    if src.kind != dst.kind:
        raise ValueError("cannot transfer between different domains")
    f = src.fill_ghosts(np.array(field, dtype=float))
    return dst.fill_ghosts(src.interpolate(f, dst.X, dst.Y))


def relative_l2(a: np.ndarray, ref: np.ndarray, grid: SpatialGrid) -> float:
    """``||a - ref|| / ||ref||`` in the area-weighted L2 norm of ``grid``."""
    return float(np.sqrt(grid.integrate((a - ref) ** 2) / grid.integrate(ref ** 2)))


def _solver(cfg: ExperimentConfig) -> dict:
    s = cfg["solver"]
    return {"tol": float(s["tol"]), "data_tol": float(s.get("data_tol", s["tol"])),
            "max_iter": int(s["max_iter"]), "refine": int(s.get("refine", 1)),
            "data_refine": int(s.get("data_refine", 1))}


def generate_data(cfg: ExperimentConfig, inv: Discretization, emission: bool = True):
    """Noise-free internal data on the data grid, transferred to the inversion grid.

    Returns ``(H, S, data_discretization)``; ``S`` is ``None`` without the
    emission stage.
    """
    if cfg.data_grid is None:
        raise ConfigError(f"{cfg.experiment} needs a data_grid finer than the inversion grid")
    fine = Discretization.from_spec(cfg.data_grid, float(cfg["g_aniso"]))
    inverse_crime_guard(fine.grid, inv.grid, fine.angular.M, inv.angular.M)
    s = _solver(cfg)
    coeffs = build_coefficients(cfg["coefficients"], fine.grid)
    model = ForwardModel(fine.grid, fine.angular, fine.phase, coeffs, s["data_tol"],
                         s["max_iter"], refine=s["data_refine"])
    t0 = time.perf_counter()
    data = model.internal_data(build_source(cfg["source"]), build_source(cfg["weight"]),
                               emission=emission)
    logger.info("data on %s (M=%d) in %.1f s", fine.grid, fine.angular.M, time.perf_counter() - t0)
    H = transfer(data.H, fine.grid, inv.grid)
    S = None if data.S is None else transfer(data.S, fine.grid, inv.grid)
    return H, S, fine


def _noisy(field, level: float, seed: int) -> np.ndarray:
    return add_noise(field, NoiseSpec(level, seed))


def _bounds(cfg: ExperimentConfig, coeffs: CoefficientSet):
    """Box for ``sigma_xf``; ``"total-absorption"`` keeps ``sigma_xa + sigma_xf >= floor``."""
    opt = cfg["optimizer"]
    lo = opt["lower"]
    if lo == "total-absorption":
        lo = POSITIVITY_FLOOR - coeffs.sigma_xa
    else:
        lo = float(lo)
    return lo, float(opt["upper"])


def _initial_guess(cfg: ExperimentConfig, grid: SpatialGrid, lo, hi) -> np.ndarray:
    init = cfg["optimizer"]["init"]
    if init == "zero":
        return np.zeros(grid.shape)
    if init == "random":
        rng = np.random.default_rng(cfg.seed)
        lo_s = float(np.max(lo)) if np.ndim(lo) else lo
        return rng.uniform(lo_s, hi, grid.shape)
    if isinstance(init, (int, float)):
        return np.full(grid.shape, float(init))
    raise ConfigError(f"unknown initial guess {init!r}")


class _Writer:
    """Collects the files written by one run."""

    def __init__(self, out, domain: str):
        self.out = None if out is None else Path(out)
        self.domain = domain
        self.files = []

    def field(self, name: str, data, pgm: bool = True):
        if self.out is not None:
            self.files.append(write_field(self.out / f"{name}.csv", data, self.domain, name, pgm=pgm))

    def trace(self, name: str, trace):
        if self.out is not None:
            self.files.append(write_trace(self.out / f"{name}.csv", trace))

    def table(self, name: str, rows, columns):
        if self.out is not None:
            self.files.append(write_table(self.out / f"{name}.csv", rows, columns))

    def manifest(self, cfg: ExperimentConfig, seeds: dict, report: dict):
        if self.out is not None:
            write_manifest(self.out / "manifest.json", cfg.to_dict(), seeds, report, self.files)


def _seeds(cfg: ExperimentConfig) -> dict:
    return {"seed": cfg.seed, "noise_seed_H": cfg.noise_seed, "noise_seed_S": cfg.noise_seed + 1}


# ---------------------------------------------------------------------------
# single-stage drivers
# ---------------------------------------------------------------------------
def run_forward(cfg: ExperimentConfig, out=None) -> dict:
    """Excitation solve on the inversion grid; writes the angular average of ``u``."""
    inv = Discretization.from_spec(cfg.grid, float(cfg["g_aniso"]))
    s = _solver(cfg)
    coeffs = build_coefficients(cfg["coefficients"], inv.grid)
    model = ForwardModel(inv.grid, inv.angular, inv.phase, coeffs, s["tol"], s["max_iter"],
                         refine=s["refine"])
    src = build_source(cfg["source"])
    if isinstance(src, LocalizedSource):
        raise ConfigError("the forward driver takes constant or sinusoidal sources")
    t0 = time.perf_counter()
    prob = model.excitation
    sol = prob.solve(src, None, s["tol"], s["max_iter"])
    elapsed = time.perf_counter() - t0
    fluence = inv.angular.integrate(sol.u)
    mask = inv.grid.inside
    report = {
        "experiment": "forward",
        "iterations": sol.iterations,
        "residual": prob.residual(sol.u, src),
        "u_min": float(sol.u[:, mask].min()),
        "u_max": float(sol.u[:, mask].max()),
        "seconds": elapsed,
    }
    w = _Writer(out, inv.grid.kind)
    w.field("fluence", fluence)
    w.manifest(cfg, _seeds(cfg), report)
    return report


def run_internal_data(cfg: ExperimentConfig, out=None) -> dict:
    """Internal data ``H`` (and ``S`` when emission coefficients are set) with noise."""
    spec = cfg.data_grid or cfg.grid
    disc = Discretization.from_spec(spec, float(cfg["g_aniso"]))
    s = _solver(cfg)
    coeffs = build_coefficients(cfg["coefficients"], disc.grid)
    refine = s["data_refine"] if cfg.data_grid is not None else s["refine"]
    model = ForwardModel(disc.grid, disc.angular, disc.phase, coeffs, s["data_tol"], s["max_iter"],
                         refine=refine)
    src = build_source(cfg["source"])
    t0 = time.perf_counter()
    data: InternalData = model.internal_data(src, build_source(cfg["weight"]))
    H = _noisy(data.H, cfg.noise_level, cfg.noise_seed)
    S = None if data.S is None else _noisy(data.S, cfg.noise_level, cfg.noise_seed + 1)
    report = {"experiment": "internal-data", "grid": str(disc.grid), "M": disc.angular.M,
              "noise": cfg.noise_level, "H_range": [float(H.min()), float(H.max())],
              "seconds": time.perf_counter() - t0}
    if S is not None:
        report["S_range"] = [float(S.min()), float(S.max())]
    w = _Writer(out, disc.grid.kind)
    w.field("H", H)
    w.field("psi", data.psi)
    if S is not None:
        w.field("S", S)
    w.manifest(cfg, _seeds(cfg), report)
    return report


def _sigma_stage(cfg: ExperimentConfig, inv: Discretization, coeffs: CoefficientSet, H_star,
                 beta: float):
    s = _solver(cfg)
    opt = cfg["optimizer"]
    lo, hi = _bounds(cfg, coeffs)
    obj = SigmaObjective(inv.grid, inv.angular, inv.phase, coeffs.sigma_xa, coeffs.sigma_xs,
                         build_source(cfg["source"]), H_star, beta=beta, tol=s["tol"],
                         max_iter=s["max_iter"], refine=s["refine"])
    x0 = _initial_guess(cfg, inv.grid, lo, hi)
    t0 = time.perf_counter()
    rec = reconstruct_sigma(obj, x0, lo, hi, mem=int(opt["mem"]), max_iter=int(opt["max_iter"]),
                            grad_tol=float(opt["grad_tol"]))
    return rec, time.perf_counter() - t0


def run_reconstruct_sigma(cfg: ExperimentConfig, out=None) -> dict:
    """Stage one: recover ``sigma_xf`` from noisy ``H``."""
    inv = Discretization.from_spec(cfg.grid, float(cfg["g_aniso"]))
    coeffs = build_coefficients(cfg["coefficients"], inv.grid)
    H, _, fine = generate_data(cfg, inv, emission=False)
    H_star = _noisy(H, cfg.noise_level, cfg.noise_seed)
    rec, secs = _sigma_stage(cfg, inv, coeffs, H_star, float(cfg["beta"]))
    truth = coeffs.sigma_xf
    report = {
        "experiment": "reconstruct-sigma",
        "noise": cfg.noise_level,
        "sigma_error": relative_l2(rec.sigma_xf, truth, inv.grid),
        "data_misfit": relative_l2(rec.H, H_star, inv.grid),
        "status": rec.result.status,
        "iterations": rec.result.n_iter,
        "seconds": secs,
    }
    w = _Writer(out, inv.grid.kind)
    w.field("sigma_xf_reconstructed", rec.sigma_xf)
    w.field("sigma_xf_true", truth)
    w.field("sigma_xf_error", rec.sigma_xf - truth)
    w.trace("trace_sigma", rec.trace)
    w.manifest(cfg, _seeds(cfg), report)
    return report


def _eta_stage(cfg: ExperimentConfig, inv: Discretization, coeffs: CoefficientSet, S_star):
    s = _solver(cfg)
    es = cfg["eta_solver"]
    prob = EtaProblem(inv.grid, inv.angular, inv.phase, coeffs, build_source(cfg["source"]),
                      build_source(cfg["weight"]), tol=s["tol"], max_iter=s["max_iter"],
                      refine=s["refine"])
    t0 = time.perf_counter()
    rec = reconstruct_eta(prob, S_star, beta_prime=float(cfg["beta_prime"]), lo=float(es["lower"]),
                          hi=float(es["upper"]), cg_tol=float(es["cg_tol"]),
                          cg_max_iter=int(es["cg_max_iter"]),
                          check_linearity=bool(es["check_linearity"]))
    return rec, time.perf_counter() - t0


def run_reconstruct_eta(cfg: ExperimentConfig, out=None, sigma_xf=None) -> dict:
    """Stage two: recover ``eta`` from noisy ``S`` with a given (default exact) ``sigma_xf``."""
    inv = Discretization.from_spec(cfg.grid, float(cfg["g_aniso"]))
    coeffs = build_coefficients(cfg["coefficients"], inv.grid)
    if coeffs.eta is None or coeffs.sigma_ma is None:
        raise ConfigError("the eta stage needs eta, sigma_ma and sigma_ms")
    _, S, _ = generate_data(cfg, inv, emission=True)
    S_star = _noisy(S, cfg.noise_level, cfg.noise_seed + 1)
    truth = coeffs.eta
    used = coeffs if sigma_xf is None else coeffs.with_sigma_xf(sigma_xf)
    rec, secs = _eta_stage(cfg, inv, used, S_star)
    report = {
        "experiment": "reconstruct-eta",
        "noise": cfg.noise_level,
        "eta_error": relative_l2(rec.eta, truth, inv.grid),
        "cg_status": rec.cg.status,
        "cg_iterations": rec.cg.iterations,
        "linearity_defect": rec.linearity_defect,
        "seconds": secs,
    }
    w = _Writer(out, inv.grid.kind)
    w.field("eta_reconstructed", rec.eta)
    w.field("eta_true", truth)
    w.field("eta_error", rec.eta - truth)
    w.table("cg_residuals", np.array(rec.cg.residuals)[:, None], ["residual"])
    w.manifest(cfg, _seeds(cfg), report)
    return report


# ---------------------------------------------------------------------------
# examples
# ---------------------------------------------------------------------------
def run_example1(cfg: ExperimentConfig, out=None) -> dict:
    """Strongly scattering medium: small data misfit, large coefficient error."""
    inv = Discretization.from_spec(cfg.grid, float(cfg["g_aniso"]))
    coeffs = build_coefficients(cfg["coefficients"], inv.grid)
    H_star, _, fine = generate_data(cfg, inv, emission=False)
    H_star = _noisy(H_star, cfg.noise_level, cfg.noise_seed)
    cond = check_linearized_conditions(coeffs, build_source(cfg["source"]), inv.grid)
    rec, secs = _sigma_stage(cfg, inv, coeffs, H_star, float(cfg["beta"]))
    truth = coeffs.sigma_xf
    diff = np.abs(rec.H - H_star)
    report = {
        "experiment": "example1",
        "data_misfit": relative_l2(rec.H, H_star, inv.grid),
        "sigma_error": relative_l2(rec.sigma_xf, truth, inv.grid),
        "sigma_min": float(rec.sigma_xf[inv.grid.inside].min()),
        "sigma_max": float(rec.sigma_xf[inv.grid.inside].max()),
        "status": rec.result.status,
        "iterations": rec.result.n_iter,
        "conditions_pass": cond.passes,
        "scattering_ratio": cond.delta,
        "seconds": secs,
    }
    w = _Writer(out, inv.grid.kind)
    w.field("sigma_xf_reconstructed", rec.sigma_xf)
    w.field("sigma_xf_true", truth)
    w.field("H_difference_log10", np.log10(np.maximum(diff, 1e-300)))
    w.trace("trace_sigma", rec.trace)
    w.manifest(cfg, _seeds(cfg), report)
    return report


def run_example2(cfg: ExperimentConfig, out=None) -> dict:
    """Both stages on a thin medium at every configured noise level."""
    t_start = time.perf_counter()
    inv = Discretization.from_spec(cfg.grid, float(cfg["g_aniso"]))
    coeffs = build_coefficients(cfg["coefficients"], inv.grid)
    if coeffs.eta is None or coeffs.sigma_ma is None:
        raise ConfigError("example2 needs eta, sigma_ma and sigma_ms")
    H, S, fine = generate_data(cfg, inv, emission=True)
    t_data = time.perf_counter() - t_start
    levels = cfg.get("noise_levels") or [cfg.noise_level]
    w = _Writer(out, inv.grid.kind)
    w.field("sigma_xf_true", coeffs.sigma_xf)
    w.field("eta_true", coeffs.eta)
    runs = []
    for level in levels:
        level = float(level)
        tag = f"noise{level:g}"
        H_star = _noisy(H, level, cfg.noise_seed)
        S_star = _noisy(S, level, cfg.noise_seed + 1)
        rec_s, t_s = _sigma_stage(cfg, inv, coeffs, H_star, float(cfg["beta"]))
        rec_e, t_e = _eta_stage(cfg, inv, coeffs.with_sigma_xf(rec_s.sigma_xf), S_star)
        run = {
            "noise": level,
            "sigma_error": relative_l2(rec_s.sigma_xf, coeffs.sigma_xf, inv.grid),
            "eta_error": relative_l2(rec_e.eta, coeffs.eta, inv.grid),
            "data_misfit": relative_l2(rec_s.H, H_star, inv.grid),
            "sigma_status": rec_s.result.status,
            "sigma_iterations": rec_s.result.n_iter,
            "cg_status": rec_e.cg.status,
            "cg_iterations": rec_e.cg.iterations,
            "sigma_seconds": t_s,
            "eta_seconds": t_e,
        }
        logger.info("example2 %s: sigma error %.4f, eta error %.4f", tag, run["sigma_error"],
                    run["eta_error"])
        runs.append(run)
        w.field(f"sigma_xf_{tag}", rec_s.sigma_xf)
        w.field(f"sigma_xf_error_{tag}", rec_s.sigma_xf - coeffs.sigma_xf)
        w.field(f"eta_{tag}", rec_e.eta)
        w.field(f"eta_error_{tag}", rec_e.eta - coeffs.eta)
        w.trace(f"trace_sigma_{tag}", rec_s.trace)
    report = {
        "experiment": "example2",
        "inversion_grid": [cfg.grid.n, cfg.grid.n, cfg.grid.M],
        "data_grid": [cfg.data_grid.n, cfg.data_grid.n, cfg.data_grid.M],
        "data_seconds": t_data,
        "runs": runs,
        "seconds": time.perf_counter() - t_start,
    }
    w.manifest(cfg, _seeds(cfg), report)
    return report


# ---------------------------------------------------------------------------
# skeleton demonstration
# ---------------------------------------------------------------------------
def _ridge_ratio(data: LocalizedData, G, h: float, radius: float = 0.9, spacing: float = 0.02):
    """Mean ``psi`` on chords between spots over its mean away from every chord."""
    pts, _, _ = G.sample(spacing)
    pts = pts[np.hypot(pts[:, 0], pts[:, 1]) <= radius]
    grid = data.grid
    idx = np.flatnonzero(grid.inside)
    nodes = np.column_stack([grid.X.ravel()[idx], grid.Y.ravel()[idx]])
    nodes = nodes[np.hypot(nodes[:, 0], nodes[:, 1]) <= radius]
    full = build_skeleton(G.vertices, 0.0)
    far = nodes[skeleton_distance(nodes, full) > 4.0 * h]
    on = data.evaluate(pts).psi
    off = data.evaluate(far).psi
    return float(np.mean(on) / np.mean(off)), len(pts), len(far)


def run_skeleton_demo(cfg: ExperimentConfig, out=None) -> dict:
    """Localized spot illumination on the disk and ratio recovery on its skeleton."""
    t0 = time.perf_counter()
    disc = Discretization.from_spec(cfg.grid, float(cfg["g_aniso"]))
    if disc.grid.kind != "unit-disk":
        raise ConfigError("the skeleton demo runs on the unit disk")
    s = _solver(cfg)
    sk = cfg["skeleton"]
    coeffs = build_coefficients(cfg["coefficients"], disc.grid)
    source = build_source(cfg["source"])
    if not isinstance(source, LocalizedSource):
        raise ConfigError("the skeleton demo needs a 'spots' source")
    data = LocalizedData(disc.grid, disc.angular, disc.phase, coeffs.sigma_xtf, coeffs.sigma_xs,
                         source, tol=s["tol"], max_iter=s["max_iter"])
    fields = data.nodal()
    G = build_skeleton(source.centers, float(sk["theta"]), float(sk["delta"]))
    ratio, n_on, n_off = _ridge_ratio(data, G, source.h)
    rec = recover_sigma_skeleton(data.H, G, coeffs.sigma_xtf, float(sk["r"]), source,
                                 delta=float(sk["delta"]), grid=disc.grid,
                                 spacing=float(sk["spacing"]))
    truth = coeffs.sigma_xtf
    err = rec.errors(lambda p: disc.grid.interpolate(truth, p[:, 0], p[:, 1]))
    # Monte-Carlo covering check of a theta-skeleton on a maximal boundary packing
    cdelta = float(sk["covering_delta"])
    V = boundary_packing(cdelta)
    Gc = build_skeleton(V, default_theta(cdelta, packing_size(cdelta)), cdelta)
    cover = covering_check(Gc, samples=int(sk["covering_samples"]), seed=cfg.seed)
    report = {
        "experiment": "skeleton-demo",
        "spots": source.n,
        "h": source.h,
        "collided_iterations": data.iterations,
        "ridge_ratio": ratio,
        "ridge_points": n_on,
        "background_points": n_off,
        "recovered_points": len(rec),
        "skipped_points": len(rec.skipped),
        "max_relative_error": float(err.max()) if len(rec) else float("nan"),
        "mean_relative_error": float(err.mean()) if len(rec) else float("nan"),
        "covering": cover.to_dict(),
        "seconds": time.perf_counter() - t0,
    }
    w = _Writer(out, disc.grid.kind)
    w.field("psi", fields.psi)
    w.field("correlator_K", fields.corr_K)
    w.field("H", fields.H)
    P, Q, ids = G.segments()
    w.table("skeleton_segments", np.column_stack([ids, P, Q]), ["chord", "x0", "y0", "x1", "y1"])
    w.table("skeleton_recovery", np.column_stack([rec.table(), err]) if len(rec) else np.zeros((0, 6)),
            ["x", "y", "chord", "recovered", "reference", "relative_error"])
    w.manifest(cfg, _seeds(cfg), report)
    return report


def run_check_conditions(cfg: ExperimentConfig, out=None) -> dict:
    """Evaluate the linearized uniqueness conditions for the configured coefficients."""
    disc = Discretization.from_spec(cfg.grid, float(cfg["g_aniso"]))
    coeffs = build_coefficients(cfg["coefficients"], disc.grid)
    src = build_source(cfg["source"])
    if isinstance(src, LocalizedSource):
        raise ConfigError("conditions are evaluated for constant or sinusoidal sources")
    rep = check_linearized_conditions(coeffs, src, disc.grid)
    report = {"experiment": "check-conditions", **rep.to_dict()}
    w = _Writer(out, disc.grid.kind)
    w.manifest(cfg, _seeds(cfg), report)
    return report


RUNNERS = {
    "forward": run_forward,
    "internal-data": run_internal_data,
    "reconstruct-sigma": run_reconstruct_sigma,
    "reconstruct-eta": run_reconstruct_eta,
    "example1": run_example1,
    "example2": run_example2,
    "skeleton-demo": run_skeleton_demo,
    "check-conditions": run_check_conditions,
}
