"""Bilinear finite elements for steady, advective and transient heat transfer.

All element quantities (conductivity, heat capacity, sink coefficient) are
piecewise constant. Dirichlet data come from :class:`ThermalBC` walls; every
side without an entry is insulated.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import SIDES, Mesh

_GP = np.array([-1.0, 1.0]) / np.sqrt(3.0)
# reference corner signs, counter-clockwise from lower-left
_XI = np.array([-1.0, 1.0, 1.0, -1.0])
_ETA = np.array([-1.0, -1.0, 1.0, 1.0])


class SolverError(RuntimeError):
    """Iterative solve failed to reach the requested residual."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class ThermalBC:
    """Boundary and load data.

    ``walls`` maps side names to a prescribed temperature; ``None`` (the
    default) holds all four sides at ``T_hot``. ``Q`` is either a constant or a
    callable ``Q(x, y)`` evaluated at quadrature points.
    """

    T_hot: float = 1000.0
    T_amb: float = 293.15
    h_sink: float = 0.1
    Q: float | Callable = 0.0
    walls: Mapping[str, float] | None = None

    def __post_init__(self):
        if not self.T_hot > self.T_amb >= 0:
            raise ValueError(f"need T_hot > T_amb >= 0, got {self.T_hot}, {self.T_amb}")
        if not self.h_sink >= 0:
            raise ValueError(f"h_sink must be non-negative, got {self.h_sink}")
        if self.walls is not None:
            bad = set(self.walls) - set(SIDES)
            if bad:
                raise ValueError(f"unknown wall sides {sorted(bad)}")

    def wall_map(self) -> dict[str, float]:
        if self.walls is None:
            return {s: self.T_hot for s in SIDES}
        return {s: float(v) for s, v in self.walls.items() if v is not None}

    def dirichlet(self, mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
        vals = np.full(mesh.n_nodes, np.nan)
        for side, T in self.wall_map().items():
            vals[mesh.boundary_nodes([side])] = T
        nodes = np.flatnonzero(~np.isnan(vals))
        return nodes, vals[nodes]


def fluid_sink(theta, bc: ThermalBC) -> np.ndarray:
    """Out-of-plane sink coefficient weighted by the fluid fraction ``1 - theta``."""
    return bc.h_sink * (1.0 - np.asarray(theta, dtype=float))


# ---------------------------------------------------------------- element kernels


def _reference(mesh: Mesh):
    """Shape values ``N[g, i]``, physical gradients ``G[g, i, d]``, weights ``w[g]``."""
    xi, eta = np.meshgrid(_GP, _GP)
    xi, eta = xi.ravel(), eta.ravel()
    N = 0.25 * (1 + np.outer(xi, _XI)) * (1 + np.outer(eta, _ETA))
    dxi = 0.25 * _XI[None, :] * (1 + np.outer(eta, _ETA))
    deta = 0.25 * _ETA[None, :] * (1 + np.outer(xi, _XI))
    G = np.stack([dxi * 2.0 / mesh.hx, deta * 2.0 / mesh.hy], axis=-1)
    w = np.full(4, mesh.element_area / 4.0)
    return N, G, w


def element_matrices(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Unit-conductivity stiffness and unit mass matrices of one element."""
    N, G, w = _reference(mesh)
    Ke = np.einsum("g,gid,gjd->ij", w, G, G)
    Me = np.einsum("g,gi,gj->ij", w, N, N)
    return Ke, Me


def gauss_points(mesh: Mesh) -> np.ndarray:
    """Physical quadrature points, shape ``(n_elements, 4, 2)``."""
    N, _, _ = _reference(mesh)
    xy = mesh.nodes[mesh.elements]  # (ne, 4, 2)
    return np.einsum("gi,eid->egd", N, xy)


def _scatter(mesh: Mesh, blocks: np.ndarray) -> sp.csr_matrix:
    conn = mesh.elements
    rows = np.repeat(conn, 4, axis=1).ravel()
    cols = np.tile(conn, (1, 4)).ravel()
    n = mesh.n_nodes
    return sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _scatter_vec(mesh: Mesh, blocks: np.ndarray) -> np.ndarray:
    return np.bincount(mesh.elements.ravel(), weights=blocks.ravel(), minlength=mesh.n_nodes)


def stiffness(mesh: Mesh, k_elem) -> sp.csr_matrix:
    Ke, _ = element_matrices(mesh)
    return _scatter(mesh, np.asarray(k_elem, dtype=float)[:, None, None] * Ke)


def mass(mesh: Mesh, c_elem=1.0) -> sp.csr_matrix:
    _, Me = element_matrices(mesh)
    c = np.broadcast_to(np.asarray(c_elem, dtype=float), (mesh.n_elements,))
    return _scatter(mesh, c[:, None, None] * Me)


def source_vector(mesh: Mesh, Q) -> np.ndarray:
    """Consistent load ``int Q N_i``."""
    N, _, w = _reference(mesh)
    if callable(Q):
        xy = gauss_points(mesh)
        q = np.asarray(Q(xy[..., 0], xy[..., 1]), dtype=float)
        q = np.broadcast_to(q, xy.shape[:2])
    else:
        q = np.full((mesh.n_elements, 4), float(Q))
    return _scatter_vec(mesh, np.einsum("g,eg,gi->ei", w, q, N))


# ---------------------------------------------------------------- systems


@dataclass
class LinearSystem:
    """Unconstrained operator ``K``, load ``F`` and the Dirichlet constraint set."""

    K: sp.csr_matrix
    F: np.ndarray
    fixed: np.ndarray
    values: np.ndarray
    symmetric: bool = True
    free: np.ndarray = field(init=False)

    def __post_init__(self):
        n = self.K.shape[0]
        mask = np.ones(n, dtype=bool)
        mask[self.fixed] = False
        self.free = np.flatnonzero(mask)

    @property
    def size(self) -> int:
        return self.K.shape[0]

    def reduced(self) -> tuple[sp.csr_matrix, np.ndarray]:
        """Free-free block and right-hand side with the Dirichlet lift removed."""
        K, f, d = self.K, self.free, self.fixed
        Kff = K[f][:, f].tocsr()
        b = self.F[f] - K[f][:, d] @ self.values
        return Kff, b

    def constrained(self) -> tuple[sp.csr_matrix, np.ndarray]:
        """Full-size operator with identity Dirichlet rows and columns (symmetric elimination)."""
        n = self.size
        keep = np.zeros(n)
        keep[self.free] = 1.0
        P = sp.diags(keep)
        T_d = np.zeros(n)
        T_d[self.fixed] = self.values
        b = P @ (self.F - self.K @ T_d) + T_d
        ident = sp.diags(1.0 - keep)
        return (P @ self.K @ P + ident).tocsr(), b

    def lift(self, T_free: np.ndarray) -> np.ndarray:
        T = np.empty(self.size)
        T[self.fixed] = self.values
        T[self.free] = T_free
        return T

    def residual(self, T: np.ndarray) -> float:
        """Relative residual of the constrained system."""
        A, b = self.constrained()
        return float(np.linalg.norm(A @ T - b) / max(np.linalg.norm(b), 1e-300))

    def reactions(self, T: np.ndarray) -> np.ndarray:
        """Nodal imbalance ``K T - F``; non-zero only at Dirichlet nodes for a solved field."""
        return self.K @ T - self.F


def _check_elem(mesh: Mesh, name: str, arr, positive=False) -> np.ndarray:
    a = np.asarray(arr, dtype=float)
    if a.ndim == 0:
        a = np.full(mesh.n_elements, float(a))
    if a.shape != (mesh.n_elements,):
        raise ValueError(f"{name} has shape {a.shape}, expected ({mesh.n_elements},)")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    if positive and np.any(a <= 0):
        raise ValueError(f"{name} must be strictly positive")
    return a


def assemble_steady(mesh: Mesh, k_elem, sink_elem, bc: ThermalBC) -> LinearSystem:
    """Conduction plus volumetric sink ``s (T - T_amb)`` with source ``Q``."""
    k = _check_elem(mesh, "k_elem", k_elem, positive=True)
    s = _check_elem(mesh, "sink_elem", sink_elem)
    if np.any(s < 0):
        raise ValueError("sink_elem must be non-negative")
    K = stiffness(mesh, k) + mass(mesh, s)
    F = source_vector(mesh, bc.Q) + mass(mesh, s) @ np.full(mesh.n_nodes, bc.T_amb)
    fixed, values = bc.dirichlet(mesh)
    return LinearSystem(K.tocsr(), F, fixed, values, symmetric=True)


def _supg_tau(a_norm, h, k):
    pe = a_norm * h / (2.0 * k)
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = np.where(pe > 1e-3, 1.0 / np.tanh(pe) - 1.0 / np.where(pe > 0, pe, 1.0), pe / 3.0)
        tau = np.where(a_norm > 0, h / (2.0 * np.where(a_norm > 0, a_norm, 1.0)) * xi, 0.0)
    return tau


def assemble_convection(mesh: Mesh, k_elem, C_elem, vel, bc: ThermalBC, sink_elem=None) -> LinearSystem:
    """Steady advection-diffusion ``C U.grad T - div(k grad T) + s (T - T_amb) = Q``.

    Streamline-upwind Petrov-Galerkin stabilization is applied per element with
    the classical optimal ``tau``.
    """
    k = _check_elem(mesh, "k_elem", k_elem, positive=True)
    C = _check_elem(mesh, "C_elem", C_elem)
    s = np.zeros(mesh.n_elements) if sink_elem is None else _check_elem(mesh, "sink_elem", sink_elem)
    U = np.asarray(vel, dtype=float)
    if U.shape != (mesh.n_nodes, 2):
        raise ValueError(f"velocity has shape {U.shape}, expected ({mesh.n_nodes}, 2)")
    if not np.all(np.isfinite(U)):
        raise ValueError("velocity contains non-finite values")

    base = assemble_steady(mesh, k, s, bc)
    N, G, w = _reference(mesh)
    a_nodes = U[mesh.elements] * C[:, None, None]  # (ne, 4, 2)
    a_gp = np.einsum("gi,eid->egd", N, a_nodes)
    a_c = a_nodes.mean(axis=1)
    a_norm = np.linalg.norm(a_c, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = np.maximum(np.abs(a_c[:, 0]) / mesh.hx, np.abs(a_c[:, 1]) / mesh.hy)
        h_stream = np.where(denom > 0, a_norm / np.where(denom > 0, denom, 1.0), 0.0)
    tau = _supg_tau(a_norm, h_stream, k)

    adv = np.einsum("egd,gjd->egj", a_gp, G)  # a . grad N_j at each Gauss point
    galerkin = np.einsum("g,gi,egj->eij", w, N, adv)
    streamline = np.einsum("g,egi,egj->eij", w, adv, adv)
    sink_supg = np.einsum("g,egi,gj->eij", w, adv, N) * s[:, None, None]
    blocks = galerkin + tau[:, None, None] * (streamline + sink_supg)
    if not np.any(blocks):
        return base

    if callable(bc.Q):
        xy = gauss_points(mesh)
        q = np.broadcast_to(np.asarray(bc.Q(xy[..., 0], xy[..., 1]), dtype=float), xy.shape[:2])
    else:
        q = np.full((mesh.n_elements, 4), float(bc.Q))
    load = q + (s * bc.T_amb)[:, None]
    rhs = tau[:, None] * np.einsum("g,egi,eg->ei", w, adv, load)

    K = (base.K + _scatter(mesh, blocks)).tocsr()
    F = base.F + _scatter_vec(mesh, rhs)
    return LinearSystem(K, F, base.fixed, base.values, symmetric=False)


# ---------------------------------------------------------------- solvers


def _iterate(A, b, symmetric, rtol, maxiter, x0=None):
    its = [0]

    def count(_):
        its[0] += 1

    if symmetric:
        d = A.diagonal()
        M = spla.LinearOperator(A.shape, matvec=lambda v: v / d, dtype=float)
        x, info = spla.cg(A, b, x0=x0, rtol=rtol, atol=0.0, maxiter=maxiter, M=M, callback=count)
    else:
        ilu = spla.spilu(A.tocsc(), drop_tol=1e-5, fill_factor=20)
        M = spla.LinearOperator(A.shape, matvec=ilu.solve, dtype=float)
        x, info = spla.bicgstab(A, b, x0=x0, rtol=rtol, atol=0.0, maxiter=maxiter, M=M, callback=count)
    return x, info, its[0]


def solve_linear(A, b, symmetric=True, method="auto", rtol=1e-12, maxiter=None, x0=None):
    """Solve ``A x = b`` with PCG (symmetric), ILU-BiCGSTAB, or sparse LU (``method="direct"``)."""
    if method not in ("auto", "iterative", "direct"):
        raise ValueError(f"unknown method {method!r}")
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b)
    if method == "direct":
        return spla.spsolve(A.tocsc(), b)
    maxiter = maxiter or max(1000, 10 * A.shape[0])
    x, info, its = _iterate(A, b, symmetric, rtol, maxiter, x0)
    res = np.linalg.norm(A @ x - b) / bnorm
    if info != 0 or not np.isfinite(res) or res > max(10 * rtol, 1e-8):
        raise SolverError(
            f"{'PCG' if symmetric else 'BiCGSTAB'} did not converge: "
            f"{its} iterations, relative residual {res:.3e}",
            iterations=its, residual=res,
        )
    return x


def solve_steady(system: LinearSystem, method="auto", rtol=1e-12) -> np.ndarray:
    """Nodal temperatures satisfying the constrained system exactly at Dirichlet nodes."""
    if system.free.size == 0:
        return system.lift(np.zeros(0))
    A, b = system.reduced()
    x = solve_linear(A, b, symmetric=system.symmetric, method=method, rtol=rtol)
    return system.lift(x)


def solve_transient(mesh: Mesh, k_elem, C_elem, sink_elem, bc: ThermalBC, T0, dt: float,
                    t_end: float, method="auto") -> tuple[np.ndarray, np.ndarray]:
    """Backward-Euler integration; returns ``(times, snapshots)`` including the initial state."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not t_end >= dt:
        raise ValueError(f"t_end must be at least dt, got t_end={t_end}, dt={dt}")
    C = _check_elem(mesh, "C_elem", C_elem, positive=True)
    steady = assemble_steady(mesh, k_elem, sink_elem, bc)
    Mc = mass(mesh, C) / dt
    n_steps = int(round(t_end / dt))
    T = np.array(T0, dtype=float)
    if T.ndim == 0:
        T = np.full(mesh.n_nodes, float(T))
    if T.shape != (mesh.n_nodes,):
        raise ValueError(f"T0 has shape {T.shape}, expected ({mesh.n_nodes},)")

    stepper = LinearSystem((steady.K + Mc).tocsr(), steady.F, steady.fixed, steady.values)
    A, lift = stepper.reduced()
    Mc_ff = Mc[stepper.free][:, stepper.free]
    Mc_fd = Mc[stepper.free][:, stepper.fixed]
    lu = spla.splu(A.tocsc()) if method == "direct" else None

    snaps = [T.copy()]
    for n in range(1, n_steps + 1):
        b = lift + Mc_ff @ T[stepper.free] + Mc_fd @ T[stepper.fixed]
        try:
            if lu is not None:
                x = lu.solve(b)
            else:
                x = solve_linear(A, b, symmetric=True, rtol=1e-12, x0=T[stepper.free])
        except SolverError as err:
            raise SolverError(f"step {n}: {err}", err.iterations, err.residual) from err
        T = stepper.lift(x)
        snaps.append(T.copy())
    return dt * np.arange(n_steps + 1), np.array(snaps)


def boundary_heat_input(system: LinearSystem, T: np.ndarray) -> float:
    """Net heat entering through the Dirichlet boundary (W per unit depth)."""
    return float(np.sum(system.reactions(T)[system.fixed]))
