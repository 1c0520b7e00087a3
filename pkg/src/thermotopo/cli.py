"""Command-line entry point: ``thermotopo <subcommand> --config run.json``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import paramopt as po
from .config import ConfigError, RunConfig, load_config
from .export import export_field, render_heatmap
from .fem import SolverError, assemble_convection, fluid_sink, solve_steady, solve_transient
from .filter import default_radius
from .material import c_simp, k_simp
from .mesh import classify_regions
from .teg import device_efficiency, pulse_mode_efficiency, teg_efficiency, zt_device, zt_thermoelement
from .topopt import objective_combined, objective_thermal, run_topopt

COMMANDS = ("solve", "topopt", "sweep", "paramopt", "teg", "transient")

log = logging.getLogger("thermotopo")


class Run:
    """Output directory, summary accumulation and single-writer file output."""

    def __init__(self, cfg: RunConfig, command: str, seed: int, threads: int):
        self.cfg = cfg
        self.command = command
        self.seed = seed
        self.threads = threads
        self.out = Path(cfg["output"]["directory"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.summary = {"command": command, "config_hash": cfg.digest(), "seed": seed,
                        "iterations": 0, "final_objective": None}
        self.t0 = time.perf_counter()

    def field(self, values, mesh, stem, name):
        out = self.cfg["output"]
        export_field(values, mesh, self.out / stem, name, formats=out["formats"])
        if out["heatmap"]:
            render_heatmap(values, mesh, self.out / f"{stem}.png", palette=out["palette"])

    def table(self, name, header, rows):
        with (self.out / name).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([("%.17g" % v) if isinstance(v, float) else v for v in r])

    def finish(self):
        self.summary["wall_time"] = time.perf_counter() - self.t0
        (self.out / "summary.json").write_text(json.dumps(self.summary, indent=2, sort_keys=True) + "\n")


def _density(cfg: RunConfig, section: str, mesh):
    """Uniform density from ``<section>.theta`` or a rasterized named setup."""
    sec = cfg[section]
    setup = sec.get("setup")
    if setup:
        lay = po.generate_fin_layout(setup, mesh.Lx, mesh.Ly)
        return po.layout_to_density(mesh, lay, cfg["topopt"]["theta_min"])
    theta = np.full(mesh.n_elements, float(sec["theta"]))
    regions = classify_regions(mesh, cfg.geometry())
    theta[regions.solid] = 1.0
    theta[regions.fluid] = cfg["topopt"]["theta_min"]
    return theta


def cmd_solve(run: Run):
    cfg = run.cfg
    mesh, mat, bc = cfg.mesh(), cfg.material(), cfg.bc()
    theta = _density(cfg, "solve", mesh)
    k, C = k_simp(theta, mat), c_simp(theta, mat)
    vel = np.tile(np.asarray(cfg["solve"]["velocity"], dtype=float), (mesh.n_nodes, 1))
    system = assemble_convection(mesh, k, C, vel, bc, sink_elem=fluid_sink(theta, bc))
    T = solve_steady(system)
    obj = objective_thermal(mesh, k, T)
    run.field(theta, mesh, "theta", "theta")
    run.field(T, mesh, "temperature", "temperature")
    run.summary.update(final_objective=obj, T_min=float(T.min()), T_max=float(T.max()),
                       T_mean=float(T.mean()), residual=system.residual(T))


def cmd_topopt(run: Run):
    cfg = run.cfg
    mesh, mat, bc = cfg.mesh(), cfg.material(), cfg.bc()
    regions = classify_regions(mesh, cfg.geometry())
    opt = cfg.opt_config()
    res = run_topopt(opt, cfg.objective_spec(mesh), mesh, regions, bc, mat)
    run.table("objective_history.csv", ["iteration", "objective", "volume", "max_change"],
              [(i, f, v, c) for i, (f, v, c) in enumerate(zip(res.objective, res.volume, res.change))])
    run.field(res.theta_f, mesh, "theta_final", "theta")
    run.field(res.T, mesh, "temperature_final", "temperature")
    run.summary.update(iterations=res.iterations, final_objective=res.objective[-1],
                       initial_objective=res.objective[0], converged=res.converged,
                       final_volume=res.volume[-1],
                       r_min=opt.r_min if opt.r_min is not None else default_radius(mesh))


def cmd_sweep(run: Run):
    cfg = run.cfg
    mesh, mat, bc = cfg.mesh(), cfg.material(), cfg.bc()
    p = cfg["paramopt"]
    res = po.SweepResult()
    for fam in p["families"]:
        po.sweep_fin_count(fam, tuple(p["sweep"]), mesh, bc, mat, antialias=p["antialias"],
                           threads=run.threads, result=res)
    run.table("sweep.csv", ["count", "objective", "family"], res.rows())
    best = {fam: dict(zip(("count", "objective"), res.best(fam))) for fam in p["families"]}
    run.summary.update(iterations=sum(len(c) for c in res.counts.values()), best=best,
                       final_objective=min(b["objective"] for b in best.values()))


def cmd_paramopt(run: Run):
    cfg = run.cfg
    mesh, mat, bc = cfg.mesh(), cfg.material(), cfg.bc()
    p = cfg["paramopt"]
    rows, layouts = [], {}
    for setup in p["setups"]:
        r = po.optimize_parameters(setup, mesh, bc, mat, budget=p["budget"], seed=run.seed,
                                   antialias=p["antialias"])
        rows.append((setup, r.initial_objective, r.objective, r.evaluations))
        lay = r.layout
        layouts[setup] = {"thickness": list(lay.thickness), "post": lay.post,
                          "H": lay.H, "W": lay.W, "A": lay.A, "B": lay.B,
                          "orientation": lay.orientation, "count": lay.count}
        theta = po.layout_to_density(mesh, lay, cfg["topopt"]["theta_min"], p["antialias"])
        run.field(theta, mesh, f"theta_{setup}", "theta")
    run.table("paramopt.csv", ["setup", "initial_objective", "final_objective", "evaluations"], rows)
    (run.out / "layouts.json").write_text(json.dumps(layouts, indent=2, sort_keys=True) + "\n")
    run.summary.update(iterations=sum(r[3] for r in rows),
                       final_objective=min(r[2] for r in rows),
                       setups={r[0]: {"initial": r[1], "final": r[2]} for r in rows})


def cmd_transient(run: Run):
    cfg = run.cfg
    mesh, mat, bc = cfg.mesh(), cfg.material(), cfg.bc()
    tr = cfg["transient"]
    theta = _density(cfg, "transient", mesh)
    times, snaps = solve_transient(mesh, k_simp(theta, mat), c_simp(theta, mat),
                                   fluid_sink(theta, bc), bc, tr["T0"], tr["dt"], tr["t_end"])
    run.table("transient.csv", ["time", "T_min", "T_max", "T_mean"],
              [(float(t), float(s.min()), float(s.max()), float(s.mean())) for t, s in zip(times, snaps)])
    run.field(snaps[-1], mesh, "temperature_final", "temperature")
    run.summary.update(iterations=len(times) - 1, T_L=float(snaps[-1].mean()),
                       T_min=float(snaps[-1].min()), T_max=float(snaps[-1].max()),
                       final_objective=objective_thermal(mesh, k_simp(theta, mat), snaps[-1]))


def cmd_teg(run: Run):
    t = run.cfg["teg"]
    p = run.cfg.teg_params()
    T_H, T_L = t["T_H"], t["T_L"]
    if t["summary"]:
        T_L = float(json.loads(Path(t["summary"]).read_text())["T_L"])
    eta = teg_efficiency(T_H, T_L, t["zt_avg"])
    run.summary.update(T_H=T_H, T_L=T_L, zt_avg=t["zt_avg"], eta=eta,
                       eta_pulse=pulse_mode_efficiency(eta, p),
                       material=device_efficiency(p, T_H, T_L),
                       zt_thermoelement=zt_thermoelement(p, 0.5 * (T_H + T_L)),
                       zt_device=zt_device(zt_thermoelement(p, 0.5 * (T_H + T_L)), p))
    run.summary["final_objective"] = eta
    print(json.dumps({k: run.summary[k] for k in ("eta", "eta_pulse", "zt_thermoelement", "zt_device")},
                     sort_keys=True))


HANDLERS = {"solve": cmd_solve, "topopt": cmd_topopt, "sweep": cmd_sweep,
            "paramopt": cmd_paramopt, "teg": cmd_teg, "transient": cmd_transient}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thermotopo", description=__doc__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=0, help="Nelder-Mead simplex jitter seed")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker cap (falls back to THERMOTOPO_THREADS, then 1)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _error(kind: str, msg: str) -> None:
    print(f"error: {kind}: {' '.join(str(msg).split())}", file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = args.threads or int(os.environ.get("THERMOTOPO_THREADS", "1") or 1)
    try:
        cfg = load_config(args.config)
    except FileNotFoundError as err:
        _error("config", f"{args.config}: {err.strerror}")
        return 2
    except ConfigError as err:
        _error("config", err)
        return 2
    try:
        run = Run(cfg, args.command, args.seed, max(1, threads))
        HANDLERS[args.command](run)
        run.finish()
    except SolverError as err:
        _error("solver", err)
        return 1
    except (OSError, ValueError, RuntimeError) as err:
        _error(type(err).__name__, err)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
