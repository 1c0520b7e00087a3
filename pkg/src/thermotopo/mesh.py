"""Structured quadrilateral grids and region classification.

Nodes are numbered row-major with x varying fastest: node ``(i, j)`` has id
``j * (nx + 1) + i``. Elements follow the same convention, ``e = j * nx + i``,
and list their nodes counter-clockwise starting at the lower-left corner.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

SIDES = ("bottom", "right", "top", "left")

DESIGN, FIXED_SOLID, FIXED_FLUID = 0, 1, 2
REGION_NAMES = {"design": DESIGN, "fixed-solid": FIXED_SOLID, "fixed-fluid": FIXED_FLUID}


@dataclass(frozen=True)
class Mesh:
    """Uniform ``nx`` x ``ny`` grid of bilinear quadrilaterals on ``[0, Lx] x [0, Ly]``."""

    nx: int
    ny: int
    Lx: float
    Ly: float

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ValueError("element counts must be integers")
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"need nx, ny >= 2, got nx={self.nx}, ny={self.ny}")
        if not (self.Lx > 0 and self.Ly > 0):
            raise ValueError(f"domain lengths must be positive, got Lx={self.Lx}, Ly={self.Ly}")

    @property
    def hx(self) -> float:
        return self.Lx / self.nx

    @property
    def hy(self) -> float:
        return self.Ly / self.ny

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny

    @property
    def element_area(self) -> float:
        return self.hx * self.hy

    @cached_property
    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``(n_nodes, 2)``."""
        x = np.linspace(0.0, self.Lx, self.nx + 1)
        y = np.linspace(0.0, self.Ly, self.ny + 1)
        X, Y = np.meshgrid(x, y)
        return np.column_stack([X.ravel(), Y.ravel()])

    @cached_property
    def elements(self) -> np.ndarray:
        """Element connectivity, shape ``(n_elements, 4)``."""
        i, j = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        n0 = (j * (self.nx + 1) + i).ravel()
        return np.column_stack([n0, n0 + 1, n0 + self.nx + 2, n0 + self.nx + 1])

    @cached_property
    def centroids(self) -> np.ndarray:
        xc = (np.arange(self.nx) + 0.5) * self.hx
        yc = (np.arange(self.ny) + 0.5) * self.hy
        X, Y = np.meshgrid(xc, yc)
        return np.column_stack([X.ravel(), Y.ravel()])

    @cached_property
    def boundary_edges(self) -> dict[str, np.ndarray]:
        """Boundary edges per side as ``(n_edges, 2)`` node-id arrays."""
        nx, ny = self.nx, self.ny
        row = nx + 1
        bottom = np.arange(nx)
        top = ny * row + np.arange(nx)
        left = np.arange(ny) * row
        right = np.arange(ny) * row + nx
        return {
            "bottom": np.column_stack([bottom, bottom + 1]),
            "right": np.column_stack([right, right + row]),
            "top": np.column_stack([top, top + 1]),
            "left": np.column_stack([left, left + row]),
        }

    def boundary_nodes(self, sides: Iterable[str] = SIDES) -> np.ndarray:
        """Sorted unique node ids lying on the given sides."""
        edges = self.boundary_edges
        ids = [edges[s].ravel() for s in sides]
        if not ids:
            return np.zeros(0, dtype=int)
        return np.unique(np.concatenate(ids))

    def element_grid(self, values: np.ndarray) -> np.ndarray:
        """View a per-element array as ``(ny, nx)``."""
        return np.asarray(values).reshape(self.ny, self.nx)

    def node_grid(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values).reshape(self.ny + 1, self.nx + 1)


def build_grid(nx: int, ny: int, Lx: float, Ly: float) -> Mesh:
    return Mesh(int(nx), int(ny), float(Lx), float(Ly))


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle ``[x0, x1] x [y0, y1]`` carrying a region label."""

    x0: float
    y0: float
    x1: float
    y1: float
    region: str = "fixed-solid"

    def __post_init__(self):
        if self.region not in ("fixed-solid", "fixed-fluid"):
            raise ValueError(f"unknown region label {self.region!r}")
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError(f"degenerate rectangle {self}")

    def contains(self, pts: np.ndarray) -> np.ndarray:
        x, y = pts[:, 0], pts[:, 1]
        return (x >= self.x0) & (x <= self.x1) & (y >= self.y0) & (y <= self.y1)

    @classmethod
    def from_mapping(cls, d: Mapping) -> "Rect":
        return cls(float(d["x0"]), float(d["y0"]), float(d["x1"]), float(d["y1"]),
                   d.get("region", "fixed-solid"))


def ring(Lx: float, Ly: float, width: float, region: str = "fixed-solid") -> list[Rect]:
    """Four rectangles forming a band of ``width`` along the domain boundary."""
    return [
        Rect(0.0, 0.0, Lx, width, region),
        Rect(0.0, Ly - width, Lx, Ly, region),
        Rect(0.0, width, width, Ly - width, region),
        Rect(Lx - width, width, Lx, Ly - width, region),
    ]


@dataclass(frozen=True)
class RegionMap:
    labels: np.ndarray
    edge_labels: dict[str, str] = field(default_factory=lambda: {s: "hot" for s in SIDES})

    @property
    def design(self) -> np.ndarray:
        return self.labels == DESIGN

    @property
    def solid(self) -> np.ndarray:
        return self.labels == FIXED_SOLID

    @property
    def fluid(self) -> np.ndarray:
        return self.labels == FIXED_FLUID

    def counts(self) -> dict[str, int]:
        return {name: int(np.sum(self.labels == code)) for name, code in REGION_NAMES.items()}


def classify_regions(mesh: Mesh, geometry: Iterable[Rect | Mapping] = ()) -> RegionMap:
    """Label elements by centroid membership; later rectangles override earlier ones."""
    labels = np.full(mesh.n_elements, DESIGN, dtype=np.int8)
    c = mesh.centroids
    tol = 1e-12 * max(mesh.Lx, mesh.Ly)
    for r in geometry:
        if not isinstance(r, Rect):
            r = Rect.from_mapping(r)
        if r.x0 < -tol or r.y0 < -tol or r.x1 > mesh.Lx + tol or r.y1 > mesh.Ly + tol:
            raise ValueError(f"rectangle {r} extends outside the domain")
        labels[r.contains(c)] = REGION_NAMES[r.region]
    if not np.any(labels == DESIGN):
        raise ValueError("geometry leaves no design elements")
    labels.setflags(write=False)
    return RegionMap(labels)
