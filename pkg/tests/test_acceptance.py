"""One test per acceptance criterion; each prints a single PASS/FAIL line."""
import json
import time

import numpy as np
import pytest

from conftest import gauss_l2_error
from thermotopo import (MaterialPair, ThermalBC, assemble_steady, build_grid, c_simp, dk_simp,
                        fluid_sink, k_simp, solve_steady, solve_transient)
from thermotopo.cli import main
from thermotopo.filter import helmholtz_filter
from thermotopo.paramopt import SETUPS, optimize_parameters, sweep_fin_count
from thermotopo.teg import pulse_mode_efficiency, teg_efficiency
from thermotopo.topopt import ObjectiveSpec, OptConfig, adjoint_gradient, evaluate, run_topopt

pytestmark = pytest.mark.acceptance


def verdict(report, n, ok, detail):
    report(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_criterion_1_fem_convergence(report):
    t0 = time.perf_counter()
    sides = ("left", "right", "top", "bottom")
    bc = ThermalBC(T_hot=1.0, T_amb=0.0, h_sink=0.0, walls={s: 0.0 for s in sides},
                   Q=lambda x, y: 2 * np.pi**2 * np.sin(np.pi * x) * np.sin(np.pi * y))
    errs = []
    for n in (16, 32, 64):
        mesh = build_grid(n, n, 1.0, 1.0)
        T = solve_steady(assemble_steady(mesh, np.ones(mesh.n_elements), np.zeros(mesh.n_elements), bc))
        errs.append(gauss_l2_error(mesh, T, lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    elapsed = time.perf_counter() - t0
    ok = bool(np.all(np.abs(orders - 2.0) <= 0.2)) and elapsed < 30.0
    verdict(report, 1, ok, f"L2 orders {orders.round(4).tolist()}, {elapsed:.1f} s")


def test_criterion_2_adjoint_fidelity(report):
    mesh = build_grid(16, 16, 8.0, 8.0)
    mat, bc = MaterialPair(), ThermalBC()
    spec = ObjectiveSpec.for_mesh(mesh)
    rng = np.random.default_rng(2024)
    theta = rng.uniform(0.05, 0.95, mesh.n_elements)
    _, T = evaluate(mesh, theta, bc, mat, spec, "direct")
    g = adjoint_gradient(mesh, theta, T, bc, mat, spec, "direct")
    h, worst = 1e-5, 0.0
    for e in rng.choice(mesh.n_elements, 20, replace=False):
        tp, tm = theta.copy(), theta.copy()
        tp[e] += h
        tm[e] -= h
        fd = (evaluate(mesh, tp, bc, mat, spec, "direct")[0] - evaluate(mesh, tm, bc, mat, spec, "direct")[0]) / (2 * h)
        worst = max(worst, abs(g[e] - fd) / abs(fd))
    verdict(report, 2, worst < 1e-3, f"max relative error {worst:.2e} over 20 elements")


def test_criterion_3_filter_identities(report):
    mesh = build_grid(32, 32, 8.0, 8.0)
    r = 0.5
    rng = np.random.default_rng(3)
    const = max(np.max(np.abs(helmholtz_filter(mesh, np.full(mesh.n_elements, c), r) - c)) for c in (0.0, 0.35, 1.0))
    ident = max(np.max(np.abs(helmholtz_filter(mesh, v, 0.0) - v))
                for v in rng.uniform(0, 1, (5, mesh.n_elements)))
    mean = max(abs(helmholtz_filter(mesh, v, r, clamp=False).mean() - v.mean())
               for v in rng.uniform(0, 1, (5, mesh.n_elements)))
    ok = const <= 1e-10 and ident <= 1e-10 and mean <= 1e-8
    verdict(report, 3, ok, f"constant {const:.1e}, identity {ident:.1e}, mean {mean:.1e}")


def test_criterion_4_simp_endpoints(report):
    mat = MaterialPair()
    exact = k_simp(0.0, mat) == mat.k1 and k_simp(1.0, mat) == mat.k2
    h = 1e-5
    errs = [abs(dk_simp(t, mat) - (k_simp(t + h, mat) - k_simp(t - h, mat)) / (2 * h)) / abs(dk_simp(t, mat))
            for t in (0.1, 0.25, 0.5, 0.75, 0.9)]
    verdict(report, 4, exact and max(errs) <= 1e-6, f"endpoints exact={exact}, derivative rel error {max(errs):.1e}")


def test_criterion_5_teg(report):
    t0 = time.perf_counter()
    eta = teg_efficiency(1000.0, 548.29, 1.5)
    pulse = pulse_mode_efficiency(eta)
    ms = 1e3 * (time.perf_counter() - t0)
    ok = abs(eta - 0.123) <= 0.0015 and abs(pulse - 0.333) <= 0.005 and ms < 100
    verdict(report, 5, ok, f"eta {100 * eta:.3f}%, pulse {100 * pulse:.3f}%, {ms:.2f} ms")


def test_criterion_6_topopt_behaviour(report):
    mesh = build_grid(64, 64, 8.0, 8.0)
    asym = []

    def cb(it, theta_f, f, vol, change):
        g = mesh.element_grid(theta_f)
        asym.append(float(np.max(np.abs(g - g.T))))

    t0 = time.perf_counter()
    res = run_topopt(OptConfig(), ObjectiveSpec.for_mesh(mesh), mesh, None, ThermalBC(), MaterialPair(), cb)
    elapsed = time.perf_counter() - t0
    f = np.array(res.objective)
    rises = [i for i in range(6, len(f)) if f[i] > 1.01 * f[i - 1]]
    vol_err = float(np.max(np.abs(np.array(res.volume) - 0.35)))
    ratio = f[-1] / f[0]
    ok = (not rises and vol_err <= 1e-3 and ratio <= 0.5 and max(asym) <= 1e-6
          and res.converged and res.iterations <= 200 and elapsed < 600)
    verdict(report, 6, ok, f"{res.iterations} iterations in {elapsed:.1f} s, final/initial {ratio:.3f}, "
                           f"volume error {vol_err:.1e}, asymmetry {max(asym):.1e}, rises {len(rises)}")


def test_criterion_7_parametric_behaviour(report):
    mesh = build_grid(64, 64, 8.0, 8.0)
    mat, bc = MaterialPair(), ThermalBC()
    t0 = time.perf_counter()
    sweep = sweep_fin_count("single", (0, 80, 2), mesh, bc, mat)
    sweep_fin_count("paired", (0, 80, 2), mesh, bc, mat, result=sweep)
    interior, best = {}, {}
    for fam in ("single", "paired"):
        obj = sweep.objectives[fam]
        i = int(np.argmin(obj))
        interior[fam] = len(obj) == 41 and 0 < i < len(obj) - 1
        best[fam] = sweep.best(fam)
    improved = {}
    for s in SETUPS:
        r = optimize_parameters(s, mesh, bc, mat)
        improved[s] = r.objective <= r.initial_objective
    elapsed = time.perf_counter() - t0
    ok = (all(interior.values()) and best["paired"][1] <= best["single"][1]
          and all(improved.values()) and elapsed < 900)
    verdict(report, 7, ok, f"best single {best['single'][0]} ({best['single'][1]:.4g}), "
                           f"best paired {best['paired'][0]} ({best['paired'][1]:.4g}), "
                           f"interior {interior}, setups improved {sum(improved.values())}/8, {elapsed:.0f} s")


def test_criterion_8_transient(report):
    mesh = build_grid(16, 16, 8.0, 8.0)
    mat, bc = MaterialPair(), ThermalBC()
    theta = np.full(mesh.n_elements, 0.35)
    k, C, s = k_simp(theta, mat), c_simp(theta, mat), fluid_sink(theta, bc)
    steady = solve_steady(assemble_steady(mesh, k, s, bc))
    _, snaps = solve_transient(mesh, k, C, s, bc, bc.T_amb, 1e7, 2e9)
    long_err = float(np.max(np.abs(snaps[-1] - steady)) / np.max(np.abs(steady)))

    lumped = build_grid(4, 4, 1.0, 1.0)
    n = lumped.n_elements
    h, Cv = 0.1, 4.18e6
    tau = Cv / h
    ins = ThermalBC(h_sink=h, walls={})
    _, dec = solve_transient(lumped, np.full(n, 0.6), np.full(n, Cv), np.full(n, h), ins,
                             ins.T_amb + 100.0, tau / 200, tau)
    decay_err = float(np.max(np.abs((dec[-1] - ins.T_amb) / (100.0 * np.exp(-1.0)) - 1.0)))
    ok = long_err <= 1e-4 and decay_err <= 0.01
    verdict(report, 8, ok, f"long-horizon relative error {long_err:.1e}, decay error {100 * decay_err:.2f}%")


def test_criterion_9_determinism(report, tmp_path):
    dirs = []
    for name in ("first", "second"):
        out = tmp_path / name
        cfg = tmp_path / f"{name}.json"
        cfg.write_text(json.dumps({"mesh": {"nx": 32, "ny": 32}, "topopt": {"max_iter": 40},
                                   "paramopt": {"setups": ["1C", "2A"]},
                                   "output": {"directory": str(out)}}))
        for cmd in ("topopt", "sweep", "paramopt", "transient"):
            assert main([cmd, "--config", str(cfg), "--seed", "11"]) == 0
        dirs.append(out)
    files = sorted(p.name for p in dirs[0].iterdir() if p.suffix in (".csv", ".vtk"))
    differ = [f for f in files if (dirs[0] / f).read_bytes() != (dirs[1] / f).read_bytes()]
    verdict(report, 9, bool(files) and not differ, f"{len(files)} CSV/VTK files compared, {len(differ)} differ")
