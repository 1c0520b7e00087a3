"""Density-based topology optimization of the conductive layout.

The loop filters the control density, interpolates material properties,
solves the steady state, evaluates the objective, back-propagates the adjoint
sensitivity through the filter, and applies an optimality-criteria update
under a mean-density constraint.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .fem import (
    ThermalBC,
    assemble_steady,
    element_matrices,
    fluid_sink,
    solve_linear,
    solve_steady,
)
from .filter import default_radius, filter_chain_gradient, helmholtz_filter
from .material import MaterialPair, dk_simp, k_simp
from .mesh import Mesh, RegionMap, classify_regions

log = logging.getLogger(__name__)

MODES = ("thermal", "combined")


@dataclass(frozen=True)
class ObjectiveSpec:
    """Weights of the combined objective.

    ``q`` blends the thermal term with a density penalty scaled by
    ``h0 * h_max / area``. ``mode="thermal"`` ignores the penalty altogether.
    """

    h0: float
    h_max: float
    area: float
    q: float = 0.5
    mode: str = "combined"

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"q must lie in [0, 1], got {self.q}")
        if not (self.h0 > 0 and self.h_max > 0 and self.area > 0):
            raise ValueError("h0, h_max and area must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")

    @classmethod
    def for_mesh(cls, mesh: Mesh, q: float = 0.5, mode: str = "combined", h0=None, h_max=None):
        h = max(mesh.hx, mesh.hy)
        return cls(h0=h0 or h, h_max=h_max or h, area=mesh.Lx * mesh.Ly, q=q, mode=mode)

    @property
    def weights(self) -> tuple[float, float]:
        """Multipliers of the thermal integral and of the squared-density integral."""
        if self.mode == "thermal":
            return 1.0, 0.0
        return 1.0 - self.q, self.q * self.h0 * self.h_max / self.area


@dataclass(frozen=True)
class OptConfig:
    volfrac: float = 0.35
    move: float = 0.2
    damping: float = 0.5
    max_iter: int = 200
    tol: float = 0.01
    theta_min: float = 1e-3
    r_min: float | None = None

    def __post_init__(self):
        if not 0.0 < self.volfrac <= 1.0:
            raise ValueError(f"volfrac must lie in (0, 1], got {self.volfrac}")
        if not 0.0 < self.move <= 1.0:
            raise ValueError(f"move must lie in (0, 1], got {self.move}")
        if not self.damping > 0:
            raise ValueError(f"damping must be positive, got {self.damping}")
        if not 0.0 < self.theta_min < 1.0:
            raise ValueError(f"theta_min must lie in (0, 1), got {self.theta_min}")
        if not self.max_iter >= 1:
            raise ValueError("max_iter must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.r_min is not None and not self.r_min >= 0:
            raise ValueError("r_min must be non-negative")


@dataclass
class OptResult:
    theta_c: np.ndarray
    theta_f: np.ndarray
    T: np.ndarray
    objective: list[float] = field(default_factory=list)
    volume: list[float] = field(default_factory=list)
    change: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.objective)


def _element_values(mesh: Mesh, T: np.ndarray) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    if T.shape != (mesh.n_nodes,):
        raise ValueError(f"temperature has shape {T.shape}, expected ({mesh.n_nodes},)")
    return T[mesh.elements]


def gradient_energy(mesh: Mesh, T) -> np.ndarray:
    """Per-element ``int |grad T|^2`` (exact for bilinear fields)."""
    Te = _element_values(mesh, T)
    Te = Te - Te.mean(axis=1, keepdims=True)  # Ke kills constants; avoids cancellation
    Ke, _ = element_matrices(mesh)
    return np.einsum("ei,ij,ej->e", Te, Ke, Te)


def objective_thermal(mesh: Mesh, k_elem, T) -> float:
    """``int k |grad T|^2`` over the domain."""
    k = np.broadcast_to(np.asarray(k_elem, dtype=float), (mesh.n_elements,))
    return float(np.dot(k, gradient_energy(mesh, T)))


def objective_combined(mesh: Mesh, k_elem, T, theta_f, spec: ObjectiveSpec) -> float:
    w_th, w_rho = spec.weights
    theta = np.broadcast_to(np.asarray(theta_f, dtype=float), (mesh.n_elements,))
    penalty = mesh.element_area * float(np.sum(theta**2))
    return w_th * objective_thermal(mesh, k_elem, T) + w_rho * penalty


def evaluate(mesh: Mesh, theta_f, bc: ThermalBC, mat: MaterialPair, spec: ObjectiveSpec,
             method="auto") -> tuple[float, np.ndarray]:
    """Solve the state for ``theta_f`` and return ``(objective, T)``."""
    k = k_simp(theta_f, mat)
    system = assemble_steady(mesh, k, fluid_sink(theta_f, bc), bc)
    T = solve_steady(system, method=method)
    return objective_combined(mesh, k, T, theta_f, spec), T


def adjoint_gradient(mesh: Mesh, theta_f, T, bc: ThermalBC, mat: MaterialPair,
                     spec: ObjectiveSpec, method="auto") -> np.ndarray:
    """Total derivative of the objective with respect to each filtered density.

    The state operator is symmetric, so the adjoint reuses the state matrix.
    """
    theta = np.asarray(theta_f, dtype=float)
    w_th, w_rho = spec.weights
    k = k_simp(theta, mat)
    system = assemble_steady(mesh, k, fluid_sink(theta, bc), bc)
    Ke, Me = element_matrices(mesh)
    Te = _element_values(mesh, T)

    # dF/dT of the thermal term is 2 K_cond T
    KT_e = np.einsum("ij,ej->ei", Ke, Te) * k[:, None]
    dFdT = 2.0 * w_th * np.bincount(mesh.elements.ravel(), weights=KT_e.ravel(),
                                    minlength=mesh.n_nodes)
    lam = np.zeros(mesh.n_nodes)
    if system.free.size and np.any(dFdT[system.free]):
        A, _ = system.reduced()
        lam[system.free] = solve_linear(A, -dFdT[system.free], symmetric=True, method=method)
    Le = lam[mesh.elements]

    dk = dk_simp(theta, mat)
    ds = -bc.h_sink
    explicit = w_th * dk * np.einsum("ei,ij,ej->e", Te, Ke, Te) + 2.0 * w_rho * theta * mesh.element_area
    residual = (dk * np.einsum("ei,ij,ej->e", Le, Ke, Te)
                + ds * np.einsum("ei,ij,ej->e", Le, Me, Te - bc.T_amb))
    return explicit + residual


def oc_update(theta_c, grad, cfg: OptConfig, regions: RegionMap | None = None) -> np.ndarray:
    """Optimality-criteria step with move limits and a bisected multiplier.

    The mean of the returned field over all elements equals ``cfg.volfrac``.
    Fixed-solid elements are pinned at 1 and fixed-fluid at ``theta_min``.
    """
    theta = np.asarray(theta_c, dtype=float)
    g = np.asarray(grad, dtype=float)
    if g.shape != theta.shape or not np.all(np.isfinite(g)):
        raise ValueError("gradient must be finite and match the density field")
    design = np.ones(theta.size, dtype=bool) if regions is None else regions.design
    pinned = theta.copy()
    if regions is not None:
        pinned[regions.solid] = 1.0
        pinned[regions.fluid] = cfg.theta_min

    gd = g[design]
    scale = np.max(np.abs(gd)) if gd.size else 0.0
    if scale == 0.0:
        gd = -np.ones_like(gd)
    elif np.max(gd) >= 0.0:
        gd = gd - np.max(gd) - 1e-6 * scale
    b = -gd
    x = theta[design]
    lo = np.maximum(cfg.theta_min, x - cfg.move)
    hi = np.minimum(1.0, x + cfg.move)
    n = theta.size
    fixed_sum = float(np.sum(pinned[~design]))

    def trial(log_lam):
        return np.clip(x * (b / np.exp(log_lam)) ** cfg.damping, lo, hi)

    def volume(xd):
        return (fixed_sum + float(np.sum(xd))) / n

    a = float(np.log(b.min())) - 60.0 / cfg.damping
    c = float(np.log(b.max())) + 60.0 / cfg.damping
    for _ in range(100):
        mid = 0.5 * (a + c)
        xd = trial(mid)
        v = volume(xd)
        if abs(v - cfg.volfrac) < 1e-9:
            break
        if v > cfg.volfrac:
            a = mid
        else:
            c = mid
    if abs(volume(xd) - cfg.volfrac) > 1e-4:
        raise RuntimeError(
            f"OC bisection failed: volume {volume(xd):.6f} vs target {cfg.volfrac} after 100 iterations"
        )
    out = pinned
    out[design] = xd
    return out


def run_topopt(cfg: OptConfig, spec: ObjectiveSpec, mesh: Mesh, regions: RegionMap | None,
               bc: ThermalBC, mat: MaterialPair, callback: Callable | None = None,
               method="auto") -> OptResult:
    """Optimize the density layout from a uniform start at ``cfg.volfrac``.

    ``callback(iteration, theta_f, objective, volume, change)`` is invoked once
    per iteration. Terminates when the largest density change drops below
    ``cfg.tol`` or after ``cfg.max_iter`` iterations.
    """
    regions = regions if regions is not None else classify_regions(mesh)
    r_min = default_radius(mesh) if cfg.r_min is None else cfg.r_min
    pinned = ~regions.design
    pin_values = np.where(regions.solid, 1.0, cfg.theta_min)

    theta_c = np.full(mesh.n_elements, cfg.volfrac)
    theta_c[pinned] = pin_values[pinned]
    result = OptResult(theta_c, theta_c.copy(), np.zeros(mesh.n_nodes))

    for it in range(cfg.max_iter):
        theta_f = helmholtz_filter(mesh, theta_c, r_min)
        theta_f[pinned] = pin_values[pinned]
        f, T = evaluate(mesh, theta_f, bc, mat, spec, method)
        dfdf = adjoint_gradient(mesh, theta_f, T, bc, mat, spec, method)
        dfdf[pinned] = 0.0
        dfdc = filter_chain_gradient(mesh, dfdf, r_min)
        new = oc_update(theta_c, dfdc, cfg, regions)
        change = float(np.max(np.abs(new - theta_c)))
        vol = float(np.mean(theta_f))

        result.objective.append(f)
        result.volume.append(vol)
        result.change.append(change)
        result.theta_f, result.T = theta_f, T
        log.debug("it %3d obj %.6e vol %.4f change %.4f", it, f, vol, change)
        if callback is not None:
            callback(it, theta_f, f, vol, change)
        theta_c = new
        result.theta_c = theta_c
        if change < cfg.tol:
            result.converged = True
            break
    return result
