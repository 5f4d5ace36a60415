"""T / (N log2 N) across a sweep that keeps the points per wavelength fixed."""

import math
import time

import numpy as np

import ifgf
from ifgf.geometry import n_per_dim_for

# compile once so the first row is not charged for it
ifgf.IFGFOperator(ifgf.generate_surface("sphere", 1.0, 12), ifgf.KernelConfig.helmholtz(4.0),
                  ifgf.IFGFParams(depth=5)).apply()

n0, lam0 = 5000, 2.0
for n in (5000, 20000, 80000):
    lam = lam0 * math.sqrt(n / n0)
    pc = ifgf.generate_surface("sphere", 1.0, n_per_dim_for(n), seed=0)
    cfg = ifgf.KernelConfig.helmholtz(2 * np.pi * lam / 2.0)
    t = time.perf_counter()
    res = ifgf.IFGFOperator(pc, cfg).apply()
    dt = time.perf_counter() - t
    print(f"N = {pc.n:6d}  D = {res.depth}  T = {dt:6.2f} s  T/(N log2 N) = {dt / (pc.n * math.log2(pc.n)):.2e}")
