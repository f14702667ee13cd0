"""Optical coefficients of the coupled excitation/emission system."""
from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

# Default strict-positivity floor used when a test or config supplies zeros.
POSITIVITY_FLOOR = 1e-6


@dataclass(frozen=True)
class AdmissibleBounds:
    """Box constraints on the coefficients.

    ``c1 <= sigma_xa, sigma_xs, sigma_ma, sigma_ms <= c2``,
    ``c3 <= sigma_xf <= c4`` and ``c5 <= eta <= c6 < 1``.
    """

    c1: float = POSITIVITY_FLOOR
    c2: float = 1e3
    c3: float = POSITIVITY_FLOOR
    c4: float = 10.0
    c5: float = 0.0
    c6: float = 0.999

    def __post_init__(self):
        if not (0 < self.c1 <= self.c2 and self.c3 <= self.c4 and 0 <= self.c5 <= self.c6 < 1):
            raise ValueError(f"inconsistent admissible bounds {self}")


@dataclass(frozen=True)
class CoefficientSet:
    """Nodal coefficient fields on one spatial lattice.

    Every field is an ``(nx, ny)`` array. Emission-stage fields and ``eta`` may
    be omitted when only the excitation problem is needed.
    """

    sigma_xa: np.ndarray
    sigma_xs: np.ndarray
    sigma_xf: np.ndarray
    sigma_ma: np.ndarray | None = None
    sigma_ms: np.ndarray | None = None
    eta: np.ndarray | None = None

    def __post_init__(self):
        shape = np.shape(self.sigma_xa)
        for f in fields(self):
            val = getattr(self, f.name)
            if val is None:
                continue
            arr = np.asarray(val, dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{f.name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{f.name} contains non-finite values")
            object.__setattr__(self, f.name, arr)

    @property
    def sigma_xt(self) -> np.ndarray:
        return self.sigma_xa + self.sigma_xs

    @property
    def sigma_xtf(self) -> np.ndarray:
        return self.sigma_xa + self.sigma_xs + self.sigma_xf

    @property
    def sigma_mt(self) -> np.ndarray:
        self._require_emission()
        return self.sigma_ma + self.sigma_ms

    def _require_emission(self):
        if self.sigma_ma is None or self.sigma_ms is None:
            raise ValueError("emission coefficients sigma_ma and sigma_ms are not set")

    def with_sigma_xf(self, sigma_xf) -> "CoefficientSet":
        return replace(self, sigma_xf=np.asarray(sigma_xf, float))

    def with_eta(self, eta) -> "CoefficientSet":
        return replace(self, eta=np.asarray(eta, float))

    def violations(self, bounds: AdmissibleBounds, mask=None) -> list[str]:
        """Names and ranges of the fields that leave the admissible box."""
        out = []
        sel = (lambda a: a) if mask is None else (lambda a: a[mask])
        checks = [
            ("sigma_xa", bounds.c1, bounds.c2),
            ("sigma_xs", bounds.c1, bounds.c2),
            ("sigma_ma", bounds.c1, bounds.c2),
            ("sigma_ms", bounds.c1, bounds.c2),
            ("sigma_xf", bounds.c3, bounds.c4),
            ("eta", bounds.c5, bounds.c6),
        ]
        for name, lo, hi in checks:
            val = getattr(self, name)
            if val is None:
                continue
            v = sel(val)
            if v.min() < lo or v.max() > hi:
                out.append(f"{name} in [{v.min():.4g}, {v.max():.4g}] outside [{lo:.4g}, {hi:.4g}]")
        return out

    def check_admissible(self, bounds: AdmissibleBounds | None = None, mask=None) -> None:
        bad = self.violations(bounds or AdmissibleBounds(), mask)
        if bad:
            raise ValueError("inadmissible coefficients: " + "; ".join(bad))
