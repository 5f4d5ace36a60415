"""Interpolated Factored Green Function (IFGF) operator evaluation.

Accelerated O(N log N) evaluation of

    I(x_l) = sum_{m != l} a_m G(x_l, x_m)

for the Helmholtz and Laplace Green functions on surface point clouds,
with a shared-memory engine and an in-process simulation of the
distributed (one-sided communication) driver.
"""

import os

# The numba thread pool size is fixed at import; keep room for determinism
# checks with more execution units than physical cores.
os.environ.setdefault(
    "NUMBA_NUM_THREADS",
    str(max(os.cpu_count() or 1, int(os.environ.get("IFGF_THREADS", "0") or 0), 8)),
)
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

import numba  # noqa: E402

# run on the physical cores (or $IFGF_THREADS) unless told otherwise
numba.set_num_threads(
    min(int(os.environ.get("IFGF_THREADS", "0") or 0) or os.cpu_count() or 1, numba.config.NUMBA_NUM_THREADS)
)

from .kernel import KernelConfig, KernelKind, green, analytic_factor, transfer_factor  # noqa: E402
from .geometry import (  # noqa: E402
    BoundingCube,
    PointCloud,
    Shape,
    bounding_cube,
    diameter,
    shape_diameter,
    generate_surface,
    read_points,
    write_points,
)
from .engine import IFGFParams, IFGFOperator, ApplyResult, apply, direct_eval, estimate_error  # noqa: E402
from .dist import run_distributed  # noqa: E402
from .metrics import metrics  # noqa: E402

__all__ = [
    "ApplyResult",
    "BoundingCube",
    "IFGFOperator",
    "IFGFParams",
    "KernelConfig",
    "KernelKind",
    "PointCloud",
    "Shape",
    "analytic_factor",
    "apply",
    "bounding_cube",
    "diameter",
    "shape_diameter",
    "direct_eval",
    "estimate_error",
    "generate_surface",
    "green",
    "metrics",
    "read_points",
    "run_distributed",
    "transfer_factor",
    "write_points",
]

__version__ = "0.1.0"
