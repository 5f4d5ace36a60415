"""Simulated ranks: identical output, and how many blocks move between them."""

import numpy as np

import ifgf

pc = ifgf.generate_surface("sphere", 1.0, n_per_dim=40, seed=1)
cfg = ifgf.KernelConfig.helmholtz(2 * np.pi * 3.0 / 2.0)
op = ifgf.IFGFOperator(pc, cfg)
ref = op.apply().values

for ranks in (1, 2, 4, 8):
    res = ifgf.run_distributed(pc, cfg, n_ranks=ranks, op=op)
    same = np.array_equal(res.values, ref)
    s = res.stats
    print(f"{ranks} ranks: bitwise equal = {same}, blocks fetched = {s.total_fetched}, "
          f"max fan-out interp/prop = {s.max_interp_fanout()}/{s.max_prop_fanout()}")
