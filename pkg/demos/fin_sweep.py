"""Sweep fin count for single and paired fins, then size one setup with Nelder-Mead.

Run: python3 demos/fin_sweep.py
"""
from thermotopo import MaterialPair, ThermalBC, build_grid
from thermotopo.paramopt import optimize_parameters, sweep_fin_count

mesh = build_grid(32, 32, 8.0, 8.0)
bc, mat = ThermalBC(), MaterialPair()

res = sweep_fin_count("single", (0, 40, 4), mesh, bc, mat)
sweep_fin_count("paired", (0, 40, 4), mesh, bc, mat, result=res)
for count, f, fam in res.rows():
    print(f"{fam:7s} {count:3d} fins  objective {f:.4e}")
for fam in ("single", "paired"):
    c, f = res.best(fam)
    print(f"best {fam}: {c} fins ({f:.4e})")

# thickness of each fin plus post dimensions are free parameters
r = optimize_parameters("1C", mesh, bc, mat, seed=0)
print(f"1C: {r.initial_objective:.4e} -> {r.objective:.4e} in {r.evaluations} evaluations")
print(f"post H={r.layout.H:.3f} W={r.layout.W:.3f} A={r.layout.A:.3f} B={r.layout.B:.3f}")
