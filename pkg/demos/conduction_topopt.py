"""Optimize a conductive layout inside a hot-walled square and save the result.

Run: python3 demos/conduction_topopt.py
"""
from pathlib import Path

import numpy as np

from thermotopo import MaterialPair, ThermalBC, build_grid
from thermotopo.export import export_field, render_heatmap
from thermotopo.topopt import ObjectiveSpec, OptConfig, run_topopt

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

# 8 m square, walls held at 1000 K, water with a weak out-of-plane sink
mesh = build_grid(48, 48, 8.0, 8.0)
bc = ThermalBC()
mat = MaterialPair()

res = run_topopt(OptConfig(volfrac=0.35), ObjectiveSpec.for_mesh(mesh), mesh, None, bc, mat,
                 callback=lambda it, th, f, v, c: it % 10 or print(f"it {it:3d}  obj {f:.4e}  change {c:.3f}"))

print(f"{res.iterations} iterations, objective {res.objective[0]:.4e} -> {res.objective[-1]:.4e}")
print(f"mean density {np.mean(res.theta_f):.4f}, T range {res.T.min():.1f}..{res.T.max():.1f} K")

export_field(res.theta_f, mesh, out / "topopt_theta", "theta")
render_heatmap(res.theta_f, mesh, out / "topopt_theta.png", palette="gray_r")
render_heatmap(res.T, mesh, out / "topopt_temperature.png")
