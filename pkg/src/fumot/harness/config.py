"""
Experiment configuration.

Configurations are YAML documents with nested sections. A run starts from the
built-in defaults of its experiment and preset, then a user file and finally
command-line overrides are merged on top (dictionaries merge key by key, any
other value replaces the default).

Lengths are in domain units (the unit square or unit disk), coefficients in
inverse domain units, and the noise level is a fraction (0.01 = 1%).
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..grid import AngularGrid, SpatialGrid

__all__ = [
    "ConfigError",
    "GridSpec",
    "ExperimentConfig",
    "EXPERIMENTS",
    "PRESETS",
    "default_config",
    "load_config",
    "deep_merge",
    "inverse_crime_guard",
]

EXPERIMENTS = ("forward", "internal-data", "reconstruct-sigma", "reconstruct-eta",
               "example1", "example2", "skeleton-demo", "check-conditions")
PRESETS = ("desk", "paper")


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


def deep_merge(base: dict, update: dict | None) -> dict:
    """Recursive merge of ``update`` into a copy of ``base``."""
    out = copy.deepcopy(base)
    for k, v in (update or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


_EXAMPLE2_COEFFS = {
    "sigma_xa": {"phantom": "affine", "a": 0.2, "b": 0.0, "c": 0.2},
    "sigma_xs": {"phantom": "affine", "a": 0.2, "b": 0.2, "c": 0.0},
    # rescaled into the admissible box [c3, c4] so that sigma_xf stays positive
    "sigma_xf": {"phantom": "shepp-logan-modified", "lo": 0.1, "hi": 1.0},
    "sigma_ma": {"phantom": "affine", "a": 0.4, "b": 0.0, "c": 0.2},
    "sigma_ms": {"phantom": "affine", "a": 2.0, "b": 0.2, "c": 0.0},
    "eta": {"phantom": "derenzo", "background": 0.2, "insert": 0.8},
}

_EXAMPLE1_COEFFS = {
    "sigma_xa": {"phantom": "affine", "a": 0.2, "b": 0.0, "c": 0.2},
    "sigma_xs": {"phantom": "affine", "a": 10.0, "b": 0.2, "c": 0.0},
    "sigma_xf": {"phantom": "affine", "a": 0.5, "b": 0.5, "c": 0.0},
}

_BASE = {
    "experiment": "forward",
    "preset": "desk",
    # n counts nodes per axis: 64 and 128 cells, so every inversion node is a data node
    "grid": {"kind": "unit-square", "n": 65, "M": 32},
    "data_grid": {"kind": "unit-square", "n": 129, "M": 64},
    "g_aniso": 0.5,
    "coefficients": copy.deepcopy(_EXAMPLE2_COEFFS),
    "source": {"kind": "sinusoidal", "amplitude": 5.0, "frequency": 4.0},
    "weight": {"kind": "constant", "value": 1.0},
    "noise": {"level": 0.0, "seed": 0},
    "seed": 0,
    "beta": 1e-3,
    "beta_prime": 1e-8,
    # refine / data_refine: fine ordinates per ordinate for the uncollided excitation field
    "solver": {"tol": 1e-8, "data_tol": 1e-10, "max_iter": 2000, "refine": 8, "data_refine": 4},
    "optimizer": {"mem": 10, "max_iter": 80, "grad_tol": 0.0, "lower": 0.1, "upper": 1.0,
                  "init": "random"},
    "eta_solver": {"cg_tol": 1e-6, "cg_max_iter": 100, "lower": 0.0, "upper": 0.999,
                   "check_linearity": True},
    "noise_levels": [0.01, 0.05],
    "output": "runs",
}

_EXPERIMENT_DEFAULTS = {
    "example1": {
        "grid": {"kind": "unit-square", "n": 33, "M": 16},
        "data_grid": {"kind": "unit-square", "n": 65, "M": 32},
        "coefficients": _EXAMPLE1_COEFFS,
        "source": {"kind": "constant", "value": 1.0},
        "beta": 0.0,
        "solver": {"tol": 1e-9, "data_tol": 1e-10, "refine": 1, "data_refine": 1},
        # total excitation absorption sigma_xa + sigma_xf stays positive
        "optimizer": {"lower": "total-absorption", "upper": 5.0, "init": "zero", "max_iter": 300},
    },
    "example2": {},
    "skeleton-demo": {
        "grid": {"kind": "unit-disk", "n": 65, "M": 64},
        "data_grid": None,
        "coefficients": {
            "sigma_xa": {"phantom": "affine", "a": 0.2},
            "sigma_xs": {"phantom": "affine", "a": 0.2},
            "sigma_xf": {"phantom": "affine", "a": 0.5},
        },
        "source": {"kind": "spots", "n": 6, "h": 1.0 / 32.0, "offset": np.pi / 6.0},
        "skeleton": {"delta": 0.05, "theta": 0.1, "r": 0.8, "spacing": 0.02,
                     "covering_delta": 0.2, "covering_samples": 10000},
    },
    "check-conditions": {
        "coefficients": _EXAMPLE1_COEFFS,
        "source": {"kind": "constant", "value": 1.0},
        "data_grid": None,
    },
}

_PAPER = {
    "grid": {"n": 129, "M": 36},
    "data_grid": {"n": 257, "M": 72},
}


@dataclass(frozen=True)
class GridSpec:
    """Spatial lattice and discrete-ordinates resolution."""

    kind: str = "unit-square"
    n: int = 64
    M: int = 32

    def build(self) -> tuple[SpatialGrid, AngularGrid]:
        return SpatialGrid(self.kind, self.n), AngularGrid(self.M)

    @property
    def unknowns(self) -> int:
        return self.n * self.n * self.M


@dataclass
class ExperimentConfig:
    """Validated view of a merged configuration dictionary.

    ``raw`` keeps the full merged dictionary (echoed into the run manifest);
    the attributes are typed shortcuts into it.
    """

    raw: dict
    experiment: str = field(init=False)
    grid: GridSpec = field(init=False)
    data_grid: GridSpec | None = field(init=False)

    def __post_init__(self):
        r = self.raw
        self.experiment = r["experiment"]
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        self.grid = _grid_spec(r["grid"], "grid")
        self.data_grid = None if r.get("data_grid") is None else _grid_spec(r["data_grid"], "data_grid")
        if self.data_grid is not None:
            inverse_crime_guard(self.data_grid, self.grid)
        lvl = float(r["noise"]["level"])
        if not 0.0 <= lvl < 1.0:
            raise ConfigError(f"noise level must lie in [0, 1), got {lvl}")
        for key in ("beta", "beta_prime", "g_aniso"):
            float(r[key])
        if not -1.0 < float(r["g_aniso"]) < 1.0:
            raise ConfigError("g_aniso must lie in (-1, 1)")

    def __getitem__(self, key):
        return self.raw[key]

    def get(self, key, default=None):
        return self.raw.get(key, default)

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def noise_level(self) -> float:
        return float(self.raw["noise"]["level"])

    @property
    def noise_seed(self) -> int:
        return int(self.raw["noise"]["seed"])

    @property
    def output(self) -> Path:
        return Path(self.raw["output"])

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    def dump(self) -> str:
        return yaml.safe_dump(self.raw, sort_keys=True)


def _grid_spec(d: dict, name: str) -> GridSpec:
    try:
        spec = GridSpec(str(d.get("kind", "unit-square")), int(d["n"]), int(d["M"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: expected kind, n and M ({exc})") from None
    if spec.kind not in ("unit-square", "unit-disk"):
        raise ConfigError(f"{name}: unknown domain kind {spec.kind!r}")
    if spec.n < 3 or spec.M < 4 or spec.M % 2:
        raise ConfigError(f"{name}: need n >= 3 and an even M >= 4")
    return spec


def inverse_crime_guard(data: GridSpec | SpatialGrid, inversion: GridSpec | SpatialGrid,
                        data_M: int | None = None, inversion_M: int | None = None) -> None:
    """Reject a synthetic-data discretization that is not strictly finer.

    Accepts two ``GridSpec`` or two ``SpatialGrid`` objects (with the angular
    counts passed separately). Sharing the same grid object is always an
    error; otherwise the data lattice must have more nodes per axis and at
    least as many directions.
    """
    if data is inversion:
        raise ConfigError("synthetic data and inversion share one grid object (inverse crime)")
    if isinstance(data, GridSpec):
        kd, nd, Md = data.kind, data.n, data.M
        ki, ni, Mi = inversion.kind, inversion.n, inversion.M
    else:
        kd, nd, Md = data.kind, data.nx, data_M
        ki, ni, Mi = inversion.kind, inversion.nx, inversion_M
    if kd != ki:
        raise ConfigError(f"data domain {kd!r} differs from inversion domain {ki!r}")
    if nd <= ni:
        raise ConfigError(f"data grid ({nd} nodes per axis) must be strictly finer than the "
                          f"inversion grid ({ni}) to avoid the inverse crime")
    if Md is not None and Mi is not None and Md < Mi:
        raise ConfigError(f"data grid has fewer directions ({Md}) than the inversion grid ({Mi})")


def default_config(experiment: str, preset: str = "desk") -> dict:
    """Built-in defaults of an experiment at a preset scale."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; expected one of {PRESETS}")
    cfg = deep_merge(_BASE, _EXPERIMENT_DEFAULTS.get(experiment, {}))
    cfg["experiment"] = experiment
    cfg["preset"] = preset
    if preset == "paper":
        cfg["grid"] = deep_merge(cfg["grid"], _PAPER["grid"])
        if cfg.get("data_grid") is not None:
            cfg["data_grid"] = deep_merge(cfg["data_grid"], _PAPER["data_grid"])
    return cfg


def load_config(experiment: str, path=None, preset: str = "desk",
                overrides: dict | None = None) -> ExperimentConfig:
    """Merge defaults, an optional YAML file and overrides into a validated config.

    A ``preset`` key in the file takes precedence over the ``preset``
    argument.
    """
    user = {}
    if path is not None:
        text = Path(path).read_text()
        user = yaml.safe_load(text) or {}
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    preset = user.get("preset", preset)
    cfg = default_config(experiment, preset)
    cfg = deep_merge(cfg, user)
    cfg = deep_merge(cfg, overrides)
    cfg["experiment"] = experiment
    return ExperimentConfig(cfg)
