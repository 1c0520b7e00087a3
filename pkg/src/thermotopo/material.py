"""Power-law (SIMP) interpolation of conductivity and heat capacity."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MaterialPair:
    """Fluid (index 1) and solid (index 2) endpoints.

    Heat capacities are volumetric (J/m^3/K), i.e. density is already folded in.
    Defaults are water and structural steel at room temperature.
    """

    k1: float = 0.6
    k2: float = 44.5
    C1: float = 4.18e6
    C2: float = 3.75e6
    p: float = 3.0

    def __post_init__(self):
        if not self.k1 > 0:
            raise ValueError(f"k1 must be positive, got {self.k1}")
        if not self.k2 >= self.k1:
            raise ValueError(f"k2 must not be below k1, got k1={self.k1}, k2={self.k2}")
        if not (self.C1 > 0 and self.C2 > 0):
            raise ValueError("heat capacities must be positive")
        if not self.p >= 1:
            raise ValueError(f"penalization exponent must be >= 1, got {self.p}")


def _check_theta(theta):
    t = np.asarray(theta, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError("density must lie in [0, 1]")
    return t


def _interp(theta, lo, hi, p):
    t = _check_theta(theta)
    out = lo + t**p * (hi - lo)
    return out if out.ndim else float(out)


def _dinterp(theta, lo, hi, p):
    t = _check_theta(theta)
    out = p * t ** (p - 1.0) * (hi - lo)
    return out if out.ndim else float(out)


def k_simp(theta, mat: MaterialPair):
    return _interp(theta, mat.k1, mat.k2, mat.p)


def c_simp(theta, mat: MaterialPair):
    return _interp(theta, mat.C1, mat.C2, mat.p)


def dk_simp(theta, mat: MaterialPair):
    """Derivative of :func:`k_simp` with respect to density."""
    return _dinterp(theta, mat.k1, mat.k2, mat.p)


def dc_simp(theta, mat: MaterialPair):
    return _dinterp(theta, mat.C1, mat.C2, mat.p)
