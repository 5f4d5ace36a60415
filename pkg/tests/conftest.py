import os

# room for the 8-thread determinism checks, even on small machines
os.environ.setdefault("NUMBA_NUM_THREADS", "8")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from ifgf import KernelConfig, generate_surface, shape_diameter  # noqa: E402
from ifgf.engine import IFGFOperator, IFGFParams  # noqa: E402


def sphere_problem(n_per_dim, size_lambda, seed=0, shape="sphere"):
    pc = generate_surface(shape, 1.0, n_per_dim, seed=seed)
    cfg = KernelConfig.helmholtz(2 * np.pi * size_lambda / shape_diameter(shape))
    return pc, cfg


def random_cloud(n, seed, spread=1.0):
    rng = np.random.default_rng(seed)
    from ifgf import PointCloud

    p = rng.normal(size=(n, 3))
    p /= np.linalg.norm(p, axis=1)[:, None]
    p *= spread * (1.0 + 0.1 * rng.random((n, 1)))
    return PointCloud.from_arrays(p, rng.random(n) + 1j * rng.random(n))


@pytest.fixture(scope="session")
def small_sphere():
    """~2.4k-point 2-wavelength sphere with a depth-4 operator."""
    pc, cfg = sphere_problem(20, 2.0)
    op = IFGFOperator(pc, cfg, IFGFParams(depth=4))
    return pc, cfg, op


@pytest.fixture(scope="session")
def criterion_sphere():
    """The ~2e4-point 4-wavelength sphere at default parameters."""
    pc, cfg = sphere_problem(58, 4.0)
    return pc, cfg, IFGFOperator(pc, cfg)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE = []


def record(criterion, status, detail):
    line = f"criterion {criterion}: {status} - {detail}"
    ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
