"""Field export to legacy VTK and CSV, and PNG heat maps.

Element fields are written as cell data, nodal fields as point data; the
kind is inferred from the array length. Numbers use ``%.17g`` so files round
trip exactly and identical inputs give identical bytes.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .mesh import Mesh

_FMT = "%.17g"


def _kind(mesh: Mesh, values: np.ndarray) -> str:
    if values.shape == (mesh.n_elements,):
        return "cell"
    if values.shape == (mesh.n_nodes,):
        return "point"
    raise ValueError(f"field of length {values.size} matches neither elements "
                     f"({mesh.n_elements}) nor nodes ({mesh.n_nodes})")


def _points(mesh: Mesh, kind: str) -> np.ndarray:
    return mesh.centroids if kind == "cell" else mesh.nodes


def write_vtk(values, mesh: Mesh, path, name: str = "field") -> Path:
    v = np.asarray(values, dtype=float)
    kind = _kind(mesh, v)
    lines = [
        "# vtk DataFile Version 3.0",
        name,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {mesh.nx + 1} {mesh.ny + 1} 1",
        "ORIGIN 0 0 0",
        f"SPACING {_FMT % mesh.hx} {_FMT % mesh.hy} 1",
        f"{'CELL' if kind == 'cell' else 'POINT'}_DATA {v.size}",
        f"SCALARS {name} double 1",
        "LOOKUP_TABLE default",
    ]
    lines += [_FMT % x for x in v]
    path = Path(path)
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as err:
        raise OSError(f"cannot write {path}: {err}") from err
    return path


def read_vtk(path) -> np.ndarray:
    lines = Path(path).read_text().splitlines()
    start = next(i for i, ln in enumerate(lines) if ln.startswith("LOOKUP_TABLE")) + 1
    return np.array([float(x) for x in lines[start:] if x.strip()])


def write_csv(values, mesh: Mesh, path, name: str = "value") -> Path:
    v = np.asarray(values, dtype=float)
    pts = _points(mesh, _kind(mesh, v))
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "y", name])
            for (x, y), val in zip(pts, v):
                w.writerow([_FMT % x, _FMT % y, _FMT % val])
    except OSError as err:
        raise OSError(f"cannot write {path}: {err}") from err
    return path


def read_csv(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 2]


def export_field(values, mesh: Mesh, path, name: str = "field", formats=("vtk", "csv")) -> list[Path]:
    """Write ``<path>.vtk`` and/or ``<path>.csv`` (any suffix on ``path`` is replaced)."""
    base = Path(path).with_suffix("")
    out = []
    if "vtk" in formats:
        out.append(write_vtk(values, mesh, base.with_suffix(".vtk"), name))
    if "csv" in formats:
        out.append(write_csv(values, mesh, base.with_suffix(".csv"), name))
    return out


def palette_lut(palette: str = "inferno", n: int = 256) -> np.ndarray:
    """``(n, 3)`` uint8 colour table, low to high."""
    from matplotlib import colormaps

    cmap = colormaps[palette]
    return (np.asarray(cmap(np.linspace(0.0, 1.0, n)))[:, :3] * 255).round().astype(np.uint8)


def render_heatmap(values, mesh: Mesh, path, palette: str = "inferno", block: int = 4) -> Path:
    """Write a PNG with one ``block`` x ``block`` pixel square per element.

    Nodal fields are averaged onto elements. Row 0 of the image is the top of
    the domain. A ``<path>.json`` sidecar records the colour range.
    """
    from PIL import Image

    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("field contains non-finite values")
    if _kind(mesh, v) == "point":
        v = v[mesh.elements].mean(axis=1)
    lo, hi = float(v.min()), float(v.max())
    lut = palette_lut(palette)
    idx = np.zeros(v.size, dtype=int) if hi == lo else \
        np.clip(((v - lo) / (hi - lo) * (len(lut) - 1)).round().astype(int), 0, len(lut) - 1)
    img = lut[mesh.element_grid(idx)[::-1]]
    img = np.repeat(np.repeat(img, block, axis=0), block, axis=1)
    path = Path(path)
    Image.fromarray(img).save(path)
    path.with_suffix(".json").write_text(json.dumps(
        {"min": lo, "max": hi, "palette": palette, "block": block,
         "elements": [mesh.nx, mesh.ny]}, indent=2) + "\n")
    return path
