"""Warm a uniform design from ambient, then estimate thermoelectric efficiency.

The cold-junction temperature is the mean chamber temperature at the end of
the transient; the hot junction sits at the wall temperature.

Run: python3 demos/warmup_and_teg.py
"""
import numpy as np

from thermotopo import MaterialPair, ThermalBC, build_grid, c_simp, fluid_sink, k_simp, solve_transient
from thermotopo.teg import TegParams, device_efficiency, pulse_mode_efficiency, teg_efficiency

mesh = build_grid(24, 24, 8.0, 8.0)
bc, mat = ThermalBC(), MaterialPair()
theta = np.full(mesh.n_elements, 0.35)

day = 24 * 3600.0
times, snaps = solve_transient(mesh, k_simp(theta, mat), c_simp(theta, mat), fluid_sink(theta, bc),
                               bc, bc.T_amb, dt=day / 4, t_end=30 * day)
for t, T in zip(times[::20], snaps[::20]):
    print(f"day {t / day:5.1f}  mean {T.mean():7.2f} K")

T_L = float(snaps[-1].mean())
eta = teg_efficiency(bc.T_hot, T_L, 1.5)
print(f"T_L = {T_L:.2f} K, eta = {100 * eta:.2f}%, pulsed = {100 * pulse_mode_efficiency(eta):.2f}%")

# the same estimate from material data instead of an assumed ZT
dev = device_efficiency(TegParams(rho_c=1e-9), bc.T_hot, T_L)
print(f"ZT(device) = {dev['zt_device']:.3f}, eta = {100 * dev['eta']:.2f}%")
