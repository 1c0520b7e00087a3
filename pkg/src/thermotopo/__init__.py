"""2D finite-element thermal design: conduction/advection solves, density-based
topology optimization, parametric fin layouts and thermoelectric efficiency."""

from .fem import (
    LinearSystem,
    SolverError,
    ThermalBC,
    assemble_convection,
    assemble_steady,
    fluid_sink,
    solve_steady,
    solve_transient,
)
from .material import MaterialPair, c_simp, dc_simp, dk_simp, k_simp
from .mesh import Mesh, RegionMap, Rect, build_grid, classify_regions, ring

__version__ = "0.1.0"
