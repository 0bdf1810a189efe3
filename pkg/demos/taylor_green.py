"""Decaying Taylor-Green vortex with LABFM operators at two resolutions.

Each run integrates to t = 1 (Re = 100, Ma = 0.1) on a jittered periodic
cloud and reports the relative L2 error of the velocity magnitude.

Run: python demos/taylor_green.py
"""
from meshfree.diagnostics.providers import LabfmProvider
from meshfree.geometry import unit_square_cloud
from meshfree.pde_solver import SolverConfig, run_tgv

config = SolverConfig(reynolds=100, mach=0.1, end_time=1.0)
for n in (16, 32):
    cloud = unit_square_cloud(1 / n, epsilon=0.5, seed=1)
    res = run_tgv(config, cloud, LabfmProvider(2), sample_times=[0.25, 0.5, 0.75])
    series = ", ".join(f"t={t:.2f}: {e:.2e}" for t, e in zip(res.times[1:], res.errors[1:]))
    print(f"s=1/{n}: {res.steps} steps of dt={res.dt:.2e}; {series}")
