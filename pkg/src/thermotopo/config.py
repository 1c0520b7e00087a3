"""JSON run configuration with defaults and per-key validation."""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .fem import ThermalBC
from .material import MaterialPair
from .mesh import SIDES, Mesh, Rect, build_grid
from .paramopt import SETUPS
from .teg import TegParams
from .topopt import MODES, ObjectiveSpec, OptConfig


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


DEFAULTS: dict[str, Any] = {
    "mesh": {"nx": 64, "ny": 64, "Lx": 8.0, "Ly": 8.0},
    "geometry": [],
    "material": {"k1": 0.6, "k2": 44.5, "C1": 4.18e6, "C2": 3.75e6, "p": 3.0},
    "bc": {"T_hot": 1000.0, "T_amb": 293.15, "h_sink": 0.1, "Q": 0.0, "walls": None},
    "solve": {"theta": 0.35, "setup": None, "velocity": [0.0, 0.0]},
    "topopt": {"volfrac": 0.35, "move": 0.2, "damping": 0.5, "max_iter": 200, "tol": 0.01,
               "theta_min": 1e-3, "r_min": None, "q": 0.5, "h0": None, "h_max": None,
               "mode": "combined"},
    "paramopt": {"setups": ["1C"], "budget": None, "sweep": [0, 80, 2],
                 "families": ["single", "paired"], "antialias": True},
    "transient": {"theta": 0.35, "T0": 293.15, "dt": 60.0, "t_end": 3600.0},
    "teg": {"alpha": 2e-4, "sigma": 1e5, "k_total": 1.5, "k_e": None, "k_bi": None, "k_l": None,
            "L": 1e-3, "rho_c": 0.0, "pulse_gain": 2.7, "T_H": 1000.0, "T_L": 548.29,
            "zt_avg": 1.5, "summary": None},
    "output": {"directory": "out", "formats": ["csv", "vtk"], "heatmap": False,
               "palette": "inferno"},
}


def _num(lo=-math.inf, hi=math.inf, lo_open=False, hi_open=False, integer=False, optional=False):
    def check(v):
        if v is None and optional:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            return "must be a number"
        if integer and int(v) != v:
            return "must be an integer"
        if not math.isfinite(v):
            return "must be finite"
        if (v <= lo if lo_open else v < lo) or (v >= hi if hi_open else v > hi):
            left = "(" if lo_open else "["
            right = ")" if hi_open else "]"
            return f"must lie in {left}{lo}, {hi}{right}"
        return None
    return check


def _choice(options, optional=False):
    def check(v):
        if v is None and optional:
            return None
        return None if v in options else f"must be one of {list(options)}"
    return check


def _boolean(v):
    return None if isinstance(v, bool) else "must be true or false"


def _walls(v):
    if v is None:
        return None
    if not isinstance(v, dict) or set(v) - set(SIDES):
        return f"must be null or an object keyed by {list(SIDES)}"
    for val in v.values():
        if val is not None and _num()(val):
            return "wall temperatures must be numbers or null"
    return None


def _list_of(options):
    def check(v):
        if not isinstance(v, list) or not v or any(x not in options for x in v):
            return f"must be a non-empty list drawn from {list(options)}"
        return None
    return check


def _sweep(v):
    if not (isinstance(v, list) and len(v) == 3 and all(isinstance(x, int) for x in v)):
        return "must be [start, stop, step] integers"
    a, b, s = v
    if a < 0 or b < a or s <= 0 or (b - a) % s:
        return "needs 0 <= start <= stop and a positive step dividing the range"
    return None


def _pair(v):
    if not (isinstance(v, list) and len(v) == 2 and not any(_num()(x) for x in v)):
        return "must be a [ux, uy] pair of numbers"
    return None


def _string(v):
    return None if isinstance(v, str) and v else "must be a non-empty string"


CHECKS = {
    "mesh": {"nx": _num(2, integer=True), "ny": _num(2, integer=True),
             "Lx": _num(0, lo_open=True), "Ly": _num(0, lo_open=True)},
    "material": {"k1": _num(0, lo_open=True), "k2": _num(0, lo_open=True),
                 "C1": _num(0, lo_open=True), "C2": _num(0, lo_open=True), "p": _num(1)},
    "bc": {"T_hot": _num(0), "T_amb": _num(0), "h_sink": _num(0), "Q": _num(), "walls": _walls},
    "solve": {"theta": _num(0, 1), "setup": _choice(SETUPS, optional=True), "velocity": _pair},
    "topopt": {"volfrac": _num(0, 1, lo_open=True), "move": _num(0, 1, lo_open=True),
               "damping": _num(0, lo_open=True), "max_iter": _num(1, integer=True),
               "tol": _num(0, lo_open=True), "theta_min": _num(0, 1, lo_open=True, hi_open=True),
               "r_min": _num(0, optional=True), "q": _num(0, 1),
               "h0": _num(0, lo_open=True, optional=True),
               "h_max": _num(0, lo_open=True, optional=True), "mode": _choice(MODES)},
    "paramopt": {"setups": _list_of(SETUPS), "budget": _num(1, integer=True, optional=True),
                 "sweep": _sweep, "families": _list_of(("single", "paired")),
                 "antialias": _boolean},
    "transient": {"theta": _num(0, 1), "T0": _num(0), "dt": _num(0, lo_open=True),
                  "t_end": _num(0, lo_open=True)},
    "teg": {"alpha": _num(), "sigma": _num(0, lo_open=True),
            "k_total": _num(0, lo_open=True, optional=True), "k_e": _num(optional=True),
            "k_bi": _num(optional=True), "k_l": _num(optional=True), "L": _num(0, lo_open=True),
            "rho_c": _num(0), "pulse_gain": _num(0), "T_H": _num(0, lo_open=True),
            "T_L": _num(0, lo_open=True), "zt_avg": _num(0),
            "summary": lambda v: None if v is None or isinstance(v, str) else "must be a path or null"},
    "output": {"directory": _string, "formats": _list_of(("csv", "vtk")), "heatmap": _boolean,
               "palette": _string},
}


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; ``data`` holds the fully defaulted JSON tree."""

    data: dict

    def __getitem__(self, section):
        return self.data[section]

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.data == other.data

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.data, sort_keys=True).encode()).hexdigest()

    # builders for module objects
    def mesh(self) -> Mesh:
        m = self.data["mesh"]
        return build_grid(m["nx"], m["ny"], m["Lx"], m["Ly"])

    def geometry(self) -> list[Rect]:
        return [Rect.from_mapping(r) for r in self.data["geometry"]]

    def material(self) -> MaterialPair:
        return MaterialPair(**self.data["material"])

    def bc(self) -> ThermalBC:
        return ThermalBC(**self.data["bc"])

    def opt_config(self) -> OptConfig:
        t = self.data["topopt"]
        return OptConfig(volfrac=t["volfrac"], move=t["move"], damping=t["damping"],
                         max_iter=int(t["max_iter"]), tol=t["tol"], theta_min=t["theta_min"],
                         r_min=t["r_min"])

    def objective_spec(self, mesh: Mesh | None = None) -> ObjectiveSpec:
        t = self.data["topopt"]
        return ObjectiveSpec.for_mesh(mesh or self.mesh(), q=t["q"], mode=t["mode"],
                                      h0=t["h0"], h_max=t["h_max"])

    def teg_params(self) -> TegParams:
        t = self.data["teg"]
        keys = ("alpha", "sigma", "k_total", "k_e", "k_bi", "k_l", "L", "rho_c", "pulse_gain")
        return TegParams(**{k: t[k] for k in keys})


def _merge(defaults: dict, given: dict, prefix: str) -> dict:
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        if key not in defaults:
            raise ConfigError(f"{prefix}{key}", "unknown key")
        out[key] = val
    return out


def _check_geometry(geo, mesh_section):
    if not isinstance(geo, list):
        raise ConfigError("geometry", "must be a list of rectangles")
    out = []
    for i, r in enumerate(geo):
        key = f"geometry[{i}]"
        if not isinstance(r, dict):
            raise ConfigError(key, "must be an object with x0, y0, x1, y1, region")
        for c in ("x0", "y0", "x1", "y1"):
            if c not in r or _num()(r[c]):
                raise ConfigError(f"{key}.{c}", "must be a number")
        try:
            rect = Rect.from_mapping(r)
        except ValueError as err:
            raise ConfigError(key, str(err)) from None
        if rect.x0 < 0 or rect.y0 < 0 or rect.x1 > mesh_section["Lx"] or rect.y1 > mesh_section["Ly"]:
            raise ConfigError(key, "rectangle extends outside the domain")
        out.append({"x0": rect.x0, "y0": rect.y0, "x1": rect.x1, "y1": rect.y1,
                    "region": rect.region})
    return out


def parse_config(raw: dict) -> RunConfig:
    """Fill defaults and validate a decoded JSON object."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown section")
    data = {}
    for section, default in DEFAULTS.items():
        if section == "geometry":
            continue
        given = raw.get(section, {})
        if not isinstance(given, dict):
            raise ConfigError(section, "must be an object")
        merged = _merge(default, given, f"{section}.")
        for key, check in CHECKS[section].items():
            msg = check(merged[key])
            if msg:
                raise ConfigError(f"{section}.{key}", msg)
        data[section] = merged
    data["geometry"] = _check_geometry(raw.get("geometry", []), data["mesh"])

    for section, build in (("material", MaterialPair), ("bc", ThermalBC)):
        try:
            build(**data[section])
        except ValueError as err:
            raise ConfigError(section, str(err)) from None
    cfg = RunConfig(data)
    for section, build in (("teg", cfg.teg_params), ("topopt", cfg.opt_config)):
        try:
            build()
        except ValueError as err:
            raise ConfigError(section, str(err)) from None
    if data["teg"]["T_H"] <= data["teg"]["T_L"]:
        raise ConfigError("teg.T_L", "must be below teg.T_H")
    if data["transient"]["t_end"] < data["transient"]["dt"]:
        raise ConfigError("transient.t_end", "must be at least transient.dt")
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    text = path.read_text()
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as err:
        raise ConfigError("<json>", f"{path}: line {err.lineno}, column {err.colno}: {err.msg}") from None
    return parse_config(raw)


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(cfg.to_json() + "\n")
