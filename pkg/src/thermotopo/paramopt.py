"""Parametric fin and post layouts, fin-count sweeps and Nelder-Mead sizing.

Layout geometry on a domain of side ``L``:

* fins are evenly pitched at ``pitch = L / (count + 1)``;
* each fin is a pair of strips reaching ``0.45 L`` in from opposite walls,
  so the centre band stays open;
* horizontal fins grow from the left and right walls, vertical fins (paired
  setups only) from the bottom and top walls;
* the post is a cross centred in the domain: a vertical bar ``A`` wide and
  ``H`` tall plus a horizontal bar ``W`` wide and ``B`` thick.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .fem import ThermalBC, assemble_steady, fluid_sink, solve_steady
from .material import MaterialPair, k_simp
from .mesh import Mesh, Rect
from .topopt import objective_thermal

log = logging.getLogger(__name__)

SETUPS = ("1A", "1B", "1C", "1D", "2A", "2B", "2C", "2D")
FAMILY_FINS = {"1": 18, "2": 36}
VARIANTS = {"A": ("single", False), "B": ("single", True), "C": ("paired", True), "D": ("paired", False)}
EXTENT = 0.45
BASE_THICKNESS = 0.1
BASE_COUNT = 18


@dataclass(frozen=True)
class FinLayout:
    """Fin/post geometry on an ``Lx`` x ``Ly`` design space.

    ``thickness`` holds one entry per horizontal fin, followed by one per
    vertical fin for paired layouts.
    """

    Lx: float = 8.0
    Ly: float = 8.0
    orientation: str = "single"
    count: int = 18
    thickness: tuple[float, ...] = ()
    post: bool = False
    H: float = 4.0
    W: float = 4.0
    A: float = 0.2
    B: float = 0.2
    setup: str | None = None

    def __post_init__(self):
        if self.orientation not in ("single", "paired"):
            raise ValueError(f"orientation must be 'single' or 'paired', got {self.orientation!r}")
        if self.count < 0:
            raise ValueError("fin count must be non-negative")
        t = tuple(float(v) for v in self.thickness) if len(self.thickness) else \
            (BASE_THICKNESS,) * (self.count * self.n_orient)
        object.__setattr__(self, "thickness", t)
        if len(t) != self.count * self.n_orient:
            raise ValueError(f"expected {self.count * self.n_orient} thicknesses, got {len(t)}")
        pitch_x, pitch_y = self.pitch
        for i, ti in enumerate(t):
            limit = pitch_y if i < self.count else pitch_x
            if not 0.0 < ti < limit:
                raise ValueError(f"fin {i}: thickness {ti} must lie in (0, pitch={limit:.4g})")
        if self.post:
            if not (0 < self.A <= self.Lx and 0 < self.W <= self.Lx
                    and 0 < self.B <= self.Ly and 0 < self.H <= self.Ly):
                raise ValueError("post does not fit inside the design space")

    @property
    def n_orient(self) -> int:
        return 2 if self.orientation == "paired" else 1

    @property
    def pitch(self) -> tuple[float, float]:
        """Spacing of vertical fins along x and of horizontal fins along y."""
        return self.Lx / (self.count + 1), self.Ly / (self.count + 1)

    def rectangles(self) -> list[Rect]:
        Lx, Ly, n = self.Lx, self.Ly, self.count
        rects = []
        t = self.thickness
        for j in range(n):
            y = (j + 1) * Ly / (n + 1)
            h = 0.5 * t[j]
            rects.append(Rect(0.0, y - h, EXTENT * Lx, y + h))
            rects.append(Rect((1 - EXTENT) * Lx, y - h, Lx, y + h))
        if self.orientation == "paired":
            for j in range(n):
                x = (j + 1) * Lx / (n + 1)
                h = 0.5 * t[n + j]
                rects.append(Rect(x - h, 0.0, x + h, EXTENT * Ly))
                rects.append(Rect(x - h, (1 - EXTENT) * Ly, x + h, Ly))
        if self.post:
            cx, cy = 0.5 * Lx, 0.5 * Ly
            rects.append(Rect(cx - self.A / 2, cy - self.H / 2, cx + self.A / 2, cy + self.H / 2))
            rects.append(Rect(cx - self.W / 2, cy - self.B / 2, cx + self.W / 2, cy + self.B / 2))
        return rects

    def solid_area(self) -> float:
        """Exact area of the union of all solid rectangles."""
        rects = self.rectangles()
        if not rects:
            return 0.0
        xs = np.unique([v for r in rects for v in (r.x0, r.x1)])
        ys = np.unique([v for r in rects for v in (r.y0, r.y1)])
        xc, yc = 0.5 * (xs[1:] + xs[:-1]), 0.5 * (ys[1:] + ys[:-1])
        X, Y = np.meshgrid(xc, yc)
        pts = np.column_stack([X.ravel(), Y.ravel()])
        inside = np.zeros(len(pts), dtype=bool)
        for r in rects:
            inside |= r.contains(pts)
        cell = np.outer(np.diff(ys), np.diff(xs)).ravel()
        return float(cell[inside].sum())


def generate_fin_layout(setup: str, Lx: float = 8.0, Ly: float = 8.0, **overrides) -> FinLayout:
    """Layout for one of the named setups ``1A`` ... ``2D``; keyword overrides win."""
    setup = setup.upper()
    if setup not in SETUPS:
        raise ValueError(f"unknown setup {setup!r}; expected one of {SETUPS}")
    orientation, post = VARIANTS[setup[1]]
    fields = dict(Lx=Lx, Ly=Ly, orientation=orientation, count=FAMILY_FINS[setup[0]],
                  post=post, setup=setup)
    fields.update(overrides)
    return FinLayout(**fields)


def _overlap_1d(lo, hi, edges):
    """Overlap length of ``[lo, hi]`` with each cell ``[edges[i], edges[i+1]]``."""
    return np.clip(np.minimum(hi, edges[1:]) - np.maximum(lo, edges[:-1]), 0.0, None)


def layout_to_density(mesh: Mesh, layout: FinLayout, theta_min: float = 1e-3,
                      antialias: bool = False) -> np.ndarray:
    """Rasterize a layout onto element densities.

    By default an element is solid (1) when its centroid lies in any
    rectangle and ``theta_min`` otherwise. With ``antialias=True`` the density
    is the exact solid area fraction of each element (union, no double count),
    floored at ``theta_min``; this keeps objectives continuous in the geometry.
    """
    rects = layout.rectangles()
    if not antialias:
        inside = np.zeros(mesh.n_elements, dtype=bool)
        for r in rects:
            inside |= r.contains(mesh.centroids)
        return np.where(inside, 1.0, theta_min)

    # sub-sample each element on the union's breakpoints so overlaps count once
    xe = np.linspace(0.0, mesh.Lx, mesh.nx + 1)
    ye = np.linspace(0.0, mesh.Ly, mesh.ny + 1)
    if not rects:
        return np.full(mesh.n_elements, theta_min)
    xs = np.unique(np.concatenate([xe, [v for r in rects for v in (r.x0, r.x1)]]))
    ys = np.unique(np.concatenate([ye, [v for r in rects for v in (r.y0, r.y1)]]))
    xs = xs[(xs >= 0) & (xs <= mesh.Lx)]
    ys = ys[(ys >= 0) & (ys <= mesh.Ly)]
    xc, yc = 0.5 * (xs[1:] + xs[:-1]), 0.5 * (ys[1:] + ys[:-1])
    inside = np.zeros((yc.size, xc.size), dtype=bool)
    for r in rects:
        inside |= np.outer((yc >= r.y0) & (yc <= r.y1), (xc >= r.x0) & (xc <= r.x1))
    area = inside * np.outer(np.diff(ys), np.diff(xs))
    ix = np.minimum(np.searchsorted(xe, xc, side="right") - 1, mesh.nx - 1)
    iy = np.minimum(np.searchsorted(ye, yc, side="right") - 1, mesh.ny - 1)
    per_elem = np.zeros((mesh.ny, mesh.nx))
    np.add.at(per_elem, (iy[:, None], ix[None, :]), area)
    frac = per_elem.ravel() / mesh.element_area
    return np.clip(np.maximum(frac, theta_min), 0.0, 1.0)


def density_objective(mesh: Mesh, theta, bc: ThermalBC, mat: MaterialPair,
                      antialias: bool = False, method="auto") -> tuple[float, np.ndarray]:
    """Thermal objective and temperature for a rasterized layout.

    Area fractions from an antialiased raster are homogenized with the linear
    rule of mixtures, exact for conduction along a fin.
    """
    theta = np.asarray(theta, dtype=float)
    k = mat.k1 + theta * (mat.k2 - mat.k1) if antialias else k_simp(theta, mat)
    system = assemble_steady(mesh, k, fluid_sink(theta, bc), bc)
    T = solve_steady(system, method=method)
    return objective_thermal(mesh, k, T), T


def layout_objective(mesh: Mesh, layout: FinLayout, bc: ThermalBC, mat: MaterialPair,
                     antialias: bool = True, theta_min: float = 1e-3) -> float:
    theta = layout_to_density(mesh, layout, theta_min, antialias)
    return density_objective(mesh, theta, bc, mat, antialias)[0]


# ---------------------------------------------------------------- fin-count sweep


@dataclass
class SweepResult:
    counts: dict[str, list[int]] = field(default_factory=dict)
    objectives: dict[str, list[float]] = field(default_factory=dict)

    def best(self, family: str) -> tuple[int, float]:
        obj = np.asarray(self.objectives[family])
        i = int(np.argmin(obj))
        return self.counts[family][i], float(obj[i])

    def rows(self):
        for fam in self.counts:
            for c, f in zip(self.counts[fam], self.objectives[fam]):
                yield c, f, fam


def sweep_thickness(count: int, L: float, base_thickness: float = BASE_THICKNESS,
                    base_count: int = BASE_COUNT) -> float:
    """Fin thickness shrinking with pitch, capped at 90% of the pitch."""
    pitch = L / (count + 1)
    base_pitch = L / (base_count + 1)
    return min(base_thickness * pitch / base_pitch, 0.9 * pitch)


def sweep_fin_count(family: str, counts: Sequence[int] | tuple[int, int, int], mesh: Mesh,
                    bc: ThermalBC, mat: MaterialPair, antialias: bool = True,
                    threads: int = 1, result: SweepResult | None = None) -> SweepResult:
    """Objective versus fin count for the ``single`` or ``paired`` family.

    ``counts`` is either an explicit sequence or an inclusive ``(start, stop, step)``.
    """
    if family not in ("single", "paired"):
        raise ValueError(f"family must be 'single' or 'paired', got {family!r}")
    if isinstance(counts, tuple) and len(counts) == 3:
        start, stop, step = counts
        if step <= 0 or (stop - start) % step:
            raise ValueError(f"step {step} must divide the range {start}..{stop}")
        counts = list(range(start, stop + 1, step))
    counts = [int(c) for c in counts]
    if any(b <= a for a, b in zip(counts, counts[1:])):
        raise ValueError("fin counts must be strictly increasing")

    def run(c):
        t = sweep_thickness(c, mesh.Ly)
        lay = FinLayout(mesh.Lx, mesh.Ly, family, c, (t,) * (c * (2 if family == "paired" else 1)))
        try:
            return layout_objective(mesh, lay, bc, mat, antialias)
        except Exception as err:
            raise RuntimeError(f"fin count {c}: {err}") from err

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            objs = list(pool.map(run, counts))
    else:
        objs = [run(c) for c in counts]
    result = result or SweepResult()
    result.counts[family] = counts
    result.objectives[family] = [float(v) for v in objs]
    return result


# ---------------------------------------------------------------- Nelder-Mead sizing


@dataclass
class ParamResult:
    layout: FinLayout
    objective: float
    initial_objective: float
    evaluations: int
    converged: bool


def _parameter_bounds(layout: FinLayout) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Initial vector and box bounds for thicknesses (+ H, W, A, B with a post)."""
    px, py = layout.pitch
    n = layout.count
    lim = np.array([py] * n + [px] * (len(layout.thickness) - n))
    x0 = list(layout.thickness)
    lo = list(np.minimum(0.01, 0.5 * np.asarray(x0)))
    hi = list(0.9 * lim)
    if layout.post:
        L = min(layout.Lx, layout.Ly)
        x0 += [layout.H, layout.W, layout.A, layout.B]
        lo += [0.1 * L, 0.1 * L, 0.02 * L, 0.02 * L]
        hi += [0.9 * L, 0.9 * L, 0.25 * L, 0.25 * L]
    x0, lo, hi = (np.asarray(v, dtype=float) for v in (x0, lo, hi))
    return np.clip(x0, lo, hi), lo, hi


def _with_params(layout: FinLayout, x: np.ndarray) -> FinLayout:
    nt = len(layout.thickness)
    kw = {"thickness": tuple(x[:nt])}
    if layout.post:
        kw.update(H=x[nt], W=x[nt + 1], A=x[nt + 2], B=x[nt + 3])
    return replace(layout, **kw)


def reflect_into(u: np.ndarray) -> np.ndarray:
    """Fold unit-box coordinates back into ``[0, 1]`` by mirror reflection."""
    r = np.mod(u, 2.0)
    return np.where(r > 1.0, 2.0 - r, r)


def nelder_mead_bounded(fun: Callable[[np.ndarray], float], x0, lo, hi, budget: int,
                        seed: int | None = 0, step: float = 0.1):
    """Minimize ``fun`` over a box with scipy's Nelder-Mead.

    Iterates live in unit-box coordinates; every trial point is mirrored back
    into the box before ``fun`` sees it. Returns ``(x_best, f_best, f_initial,
    n_evaluations, converged)`` where ``x_best`` is the best point ever
    evaluated, so ``f_best <= f_initial`` always.
    """
    x0, lo, hi = (np.asarray(v, dtype=float) for v in (x0, lo, hi))
    span = np.where(hi > lo, hi - lo, 1.0)
    dim = x0.size
    if budget < 10 * dim:
        raise ValueError(f"budget {budget} below 10 x dimension ({10 * dim})")

    best = {"x": x0.copy(), "f": np.inf, "n": 0}

    def to_x(u):
        return lo + reflect_into(u) * span

    def wrapped(u):
        x = to_x(u)
        f = float(fun(x))
        best["n"] += 1
        if f < best["f"]:
            best["x"], best["f"] = x.copy(), f
        return f

    u0 = (x0 - lo) / span
    f0 = wrapped(u0)
    rng = np.random.default_rng(seed)
    simplex = [u0]
    for i in range(dim):
        v = u0.copy()
        d = step * (1.0 + 0.1 * rng.uniform(-1.0, 1.0))
        # step toward the interior so the first vertices are not all folded
        v[i] += d if u0[i] + d <= 1.0 else -d
        simplex.append(v)
    res = minimize(wrapped, u0, method="Nelder-Mead",
                   options={"initial_simplex": np.array(simplex), "maxfev": budget - 1,
                            "xatol": 1e-4, "fatol": 1e-10 * max(abs(f0), 1.0)})
    return best["x"], best["f"], f0, best["n"], bool(res.success)


def optimize_parameters(setup: str | FinLayout, mesh: Mesh, bc: ThermalBC, mat: MaterialPair,
                        budget: int | None = None, seed: int | None = 0, antialias: bool = True,
                        objective: Callable[[FinLayout], float] | None = None) -> ParamResult:
    """Size fin thicknesses (and the post, when present) by bounded Nelder-Mead.

    ``objective`` replaces the finite-element evaluation, e.g. with a surrogate.
    The default budget is ten evaluations per parameter.
    """
    layout = setup if isinstance(setup, FinLayout) else generate_fin_layout(setup, mesh.Lx, mesh.Ly)
    x0, lo, hi = _parameter_bounds(layout)
    budget = budget or 10 * x0.size
    if objective is None:
        def objective(lay):
            return layout_objective(mesh, lay, bc, mat, antialias)

    xb, fb, f0, nev, ok = nelder_mead_bounded(lambda x: objective(_with_params(layout, x)),
                                              x0, lo, hi, budget, seed)
    log.info("setup %s: %.6e -> %.6e in %d evaluations", layout.setup, f0, fb, nev)
    return ParamResult(_with_params(layout, xb), fb, f0, nev, ok)
