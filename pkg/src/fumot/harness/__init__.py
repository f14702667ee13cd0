"""
Experiment harness: phantoms, configuration, file formats, drivers and the CLI.
"""
from .config import (
    EXPERIMENTS,
    PRESETS,
    ConfigError,
    ExperimentConfig,
    GridSpec,
    default_config,
    inverse_crime_guard,
    load_config,
)
from .experiments import RUNNERS, build_coefficients, build_source, relative_l2, transfer
from .io import read_field, read_pgm, write_field, write_manifest, write_pgm
from .phantoms import PHANTOM_NAMES, DerenzoLayout, derenzo, phantom, shepp_logan

__all__ = [
    "EXPERIMENTS",
    "PRESETS",
    "ConfigError",
    "ExperimentConfig",
    "GridSpec",
    "default_config",
    "inverse_crime_guard",
    "load_config",
    "RUNNERS",
    "build_coefficients",
    "build_source",
    "relative_l2",
    "transfer",
    "read_field",
    "read_pgm",
    "write_field",
    "write_manifest",
    "write_pgm",
    "PHANTOM_NAMES",
    "DerenzoLayout",
    "derenzo",
    "phantom",
    "shepp_logan",
]
