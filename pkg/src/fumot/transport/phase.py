"""Henyey-Greenstein scattering kernel on a discrete set of ordinates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..grid import AngularGrid


def p_hg(cos_theta, g):
    """Continuum two-dimensional Henyey-Greenstein density.

    ``p(cos t) = (1 - g^2) / (2 pi (1 + g^2 - 2 g cos t))``, normalized so that
    its integral over the unit circle is one.
    """
    cos_theta = np.asarray(cos_theta, dtype=float)
    return (1.0 - g * g) / (2.0 * np.pi * (1.0 + g * g - 2.0 * g * cos_theta))


@dataclass(frozen=True)
class PhaseFunction:
    """Discrete scattering kernel.

    Attributes
    ----------
    g : float
        Anisotropy parameter.
    p : ndarray, shape (M, M)
        Kernel samples ``p[k, k']`` after row normalization.
    K : ndarray, shape (M, M)
        ``p[k, k'] * w[k']``, the matrix applied by :meth:`apply`.
    """

    g: float
    angular: AngularGrid
    p: np.ndarray
    K: np.ndarray

    def apply(self, f: np.ndarray) -> np.ndarray:
        """``(Kf)[k] = sum_k' p[k, k'] f[k'] w[k']`` for an ``(M, ...)`` array."""
        if f.shape[0] != self.K.shape[0]:
            raise ValueError(f"field has {f.shape[0]} directions, kernel expects {self.K.shape[0]}")
        return np.tensordot(self.K, f, axes=(1, 0))

    def apply_transpose(self, f: np.ndarray) -> np.ndarray:
        if f.shape[0] != self.K.shape[0]:
            raise ValueError(f"field has {f.shape[0]} directions, kernel expects {self.K.shape[0]}")
        return np.tensordot(self.K.T, f, axes=(1, 0))

    @property
    def is_isotropic(self) -> bool:
        return self.g == 0.0


def hg_kernel(g: float, angular: AngularGrid) -> PhaseFunction:
    """Sample the Henyey-Greenstein kernel on ``angular`` and renormalize rows.

    Parameters
    ----------
    g : float
        Anisotropy, ``|g| < 1``.
    angular : AngularGrid
        Discrete ordinates.

    Returns
    -------
    PhaseFunction
        Kernel with ``sum_k' p[k, k'] w[k'] = 1`` for every ``k``.

    Notes
    -----
    For uniform ordinates the sampled matrix is circulant, so every row has the
    same sum and the normalized kernel stays symmetric.
    """
    g = float(g)
    if not abs(g) < 1.0:
        raise ValueError(f"anisotropy must satisfy |g| < 1, got {g}")
    v = angular.directions
    cos = np.clip(v @ v.T, -1.0, 1.0)
    p = p_hg(cos, g)
    w = angular.weights
    p = p / (p @ w)[:, None]
    # symmetrize away the last-bit asymmetry of the row division
    p = 0.5 * (p + p.T)
    p.setflags(write=False)
    K = p * w[None, :]
    K.setflags(write=False)
    return PhaseFunction(g, angular, p, K)


def scatter(field: np.ndarray, phase: PhaseFunction) -> np.ndarray:
    """Apply the discrete scattering operator to a phase-space field."""
    return phase.apply(field)
