"""Thermoelectric figure of merit and conversion efficiency."""
from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class TegParams:
    """Thermoelement material and device parameters.

    ``k_total`` may be omitted when all three components (electronic,
    bipolar, lattice) are given; if both are given they must agree.
    """

    alpha: float = 2e-4
    sigma: float = 1e5
    k_total: float | None = 1.5
    k_e: float | None = None
    k_bi: float | None = None
    k_l: float | None = None
    L: float = 1e-3
    rho_c: float = 0.0
    pulse_gain: float = 2.7

    def __post_init__(self):
        parts = (self.k_e, self.k_bi, self.k_l)
        if any(p is not None for p in parts):
            if any(p is None for p in parts):
                raise ValueError("give all of k_e, k_bi, k_l or none of them")
            total = sum(parts)
            if self.k_total is None:
                object.__setattr__(self, "k_total", total)
            elif abs(total - self.k_total) > 1e-9:
                raise ValueError(f"k_e + k_bi + k_l = {total} differs from k_total = {self.k_total}")
        if self.k_total is None or not self.k_total > 0:
            raise ValueError("k_total must be positive")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.L > 0:
            raise ValueError("L must be positive")
        if not self.rho_c >= 0:
            raise ValueError("rho_c must be non-negative")
        if not self.pulse_gain >= 0:
            raise ValueError("pulse_gain must be non-negative")


def zt_thermoelement(p: TegParams, T: float) -> float:
    """``alpha^2 sigma T / k``."""
    if not T > 0:
        raise ValueError(f"temperature must be positive, got {T}")
    return p.alpha**2 * p.sigma * T / p.k_total


def zt_device(zt_te: float, p: TegParams) -> float:
    """Contact-resistance derating ``L / (L + 2 rho_c sigma)``."""
    if zt_te < 0:
        raise ValueError(f"ZT must be non-negative, got {zt_te}")
    return p.L / (p.L + 2.0 * p.rho_c * p.sigma) * zt_te


def teg_efficiency(T_H: float, T_L: float, zt_avg: float) -> float:
    """Conversion efficiency between hot and cold junction temperatures."""
    if not T_H > T_L > 0:
        raise ValueError(f"need T_H > T_L > 0, got T_H={T_H}, T_L={T_L}")
    if zt_avg < 0:
        raise ValueError(f"ZT must be non-negative, got {zt_avg}")
    root = math.sqrt(1.0 + zt_avg)
    return (T_H - T_L) / T_H * (root - 1.0) / (root + T_L / T_H)


def pulse_mode_efficiency(eta: float, p: TegParams | None = None) -> float:
    """Efficiency credited to pulsed operation, a plain ``pulse_gain`` multiplier."""
    if eta < 0:
        raise ValueError("efficiency must be non-negative")
    gain = 2.7 if p is None else p.pulse_gain
    return eta * gain


def device_efficiency(p: TegParams, T_H: float, T_L: float) -> dict[str, float]:
    """Efficiency from material data, with ZT taken at the mean junction temperature."""
    T_mean = 0.5 * (T_H + T_L)
    zt_te = zt_thermoelement(p, T_mean)
    zt_dev = zt_device(zt_te, p)
    eta = teg_efficiency(T_H, T_L, zt_dev)
    return {"T_mean": T_mean, "zt_thermoelement": zt_te, "zt_device": zt_dev,
            "eta": eta, "eta_pulse": pulse_mode_efficiency(eta, p)}
