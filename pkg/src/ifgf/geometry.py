"""Test surfaces, structure-of-arrays point storage and the bounding cube."""

import csv
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

CUBE_INFLATION = 1e-6
MIN_CUBE_SIDE = 1e-9

MAGIC = b"IFGF"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQ")


class Shape(str, Enum):
    SPHERE = "sphere"
    OBLATE = "oblate"
    PROLATE = "prolate"


# z-axis scale of x^2 + y^2 + (z/c)^2 = a^2
_Z_SCALE = {Shape.SPHERE: 1.0, Shape.OBLATE: 0.1, Shape.PROLATE: 10.0}


class PointCloud:
    """Surface points in structure-of-arrays layout.

    Coordinates live in ``x1, x2, x3``; source coefficients in ``a_re, a_im``;
    operator output in ``i_re, i_im``. All six arrays have length ``n``.
    """

    def __init__(self, x1, x2, x3, a_re=None, a_im=None):
        self.x1 = np.ascontiguousarray(x1, dtype=np.float64)
        self.x2 = np.ascontiguousarray(x2, dtype=np.float64)
        self.x3 = np.ascontiguousarray(x3, dtype=np.float64)
        n = self.x1.size
        if n < 1:
            raise ValueError("a point cloud needs at least one point")
        self.a_re = np.ones(n) if a_re is None else np.ascontiguousarray(a_re, dtype=np.float64)
        self.a_im = np.zeros(n) if a_im is None else np.ascontiguousarray(a_im, dtype=np.float64)
        self.i_re = np.zeros(n)
        self.i_im = np.zeros(n)
        for name in ("x2", "x3", "a_re", "a_im"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"array {name} must have shape ({n},)")
        if not all(np.all(np.isfinite(a)) for a in (self.x1, self.x2, self.x3, self.a_re, self.a_im)):
            raise ValueError("point cloud contains non-finite values")
        self.meta = {}

    @classmethod
    def from_arrays(cls, points, coefficients=None):
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if coefficients is None:
            return cls(points[:, 0], points[:, 1], points[:, 2])
        c = np.asarray(coefficients, dtype=np.complex128).reshape(-1)
        return cls(points[:, 0], points[:, 1], points[:, 2], c.real, c.imag)

    @property
    def n(self):
        return self.x1.size

    def __len__(self):
        return self.n

    @property
    def points(self):
        """(n, 3) copy of the coordinates."""
        return np.stack([self.x1, self.x2, self.x3], axis=1)

    @property
    def coefficients(self):
        return self.a_re + 1j * self.a_im

    @property
    def result(self):
        return self.i_re + 1j * self.i_im

    def permute(self, perm):
        """Reorder every array in place: new[i] = old[perm[i]]."""
        for name in ("x1", "x2", "x3", "a_re", "a_im", "i_re", "i_im"):
            setattr(self, name, np.ascontiguousarray(getattr(self, name)[perm]))

    def copy(self):
        pc = PointCloud(self.x1.copy(), self.x2.copy(), self.x3.copy(), self.a_re.copy(), self.a_im.copy())
        pc.i_re[:] = self.i_re
        pc.i_im[:] = self.i_im
        pc.meta = dict(self.meta)
        return pc

    def __repr__(self):
        return f"PointCloud(n={self.n})"


@dataclass(frozen=True)
class BoundingCube:
    origin: tuple
    h1: float

    def __post_init__(self):
        if not self.h1 > 0:
            raise ValueError("cube side must be positive")
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))

    def side(self, d):
        """Box side H_d at level d (H_1 is the cube itself)."""
        return self.h1 / 2.0 ** (d - 1)

    def contains(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        o = np.asarray(self.origin)
        return np.all((p >= o) & (p < o + self.h1), axis=1)


def _cube_face_grid(n):
    """Equispaced cell-centred parameters on the six faces of [-1, 1]^3."""
    t = -1.0 + (2.0 * np.arange(n) + 1.0) / n
    u, v = np.meshgrid(t, t, indexing="ij")
    u, v = u.ravel(), v.ravel()
    one = np.ones_like(u)
    faces = [
        (one, u, v), (-one, v, u),
        (u, one, v), (v, -one, u),
        (u, v, one), (v, u, -one),
    ]
    return np.concatenate([np.stack(f, axis=1) for f in faces])


def generate_surface(shape, a=1.0, n_per_dim=16, seed=0):
    """Discretize a sphere or spheroid with six cube-face patches.

    Each face of the cube carries an ``n_per_dim x n_per_dim`` equispaced
    parameter grid which is projected radially to the unit sphere and then
    scaled (``a`` in x, y and ``a * c`` in z). Coefficients are drawn
    uniformly from the unit square ``[0, 1) + i [0, 1)`` with ``seed``.
    """
    shape = Shape(shape)
    if not a > 0:
        raise ValueError("a must be positive")
    if n_per_dim < 2:
        raise ValueError("n_per_dim must be >= 2")
    p = _cube_face_grid(int(n_per_dim))
    p /= np.linalg.norm(p, axis=1)[:, None]
    p *= a
    p[:, 2] *= _Z_SCALE[shape]
    rng = np.random.default_rng(seed)
    a_re = rng.random(p.shape[0])
    a_im = rng.random(p.shape[0])
    pc = PointCloud(p[:, 0], p[:, 1], p[:, 2], a_re, a_im)
    pc.meta = {"shape": shape.value, "a": float(a), "n_per_dim": int(n_per_dim), "seed": seed,
               "coefficients": "uniform [0,1) + i[0,1)"}
    return pc


def surface_residual(pc, shape, a):
    """|x^2 + y^2 + (z/c)^2 - a^2| / a^2 per point."""
    c = _Z_SCALE[Shape(shape)]
    return np.abs(pc.x1**2 + pc.x2**2 + (pc.x3 / c) ** 2 - a * a) / (a * a)


def n_per_dim_for(n):
    """Smallest grid size giving at least ``n`` points (6 n_per_dim^2 >= n)."""
    return max(2, int(np.ceil(np.sqrt(n / 6.0))))


def bounding_cube(pc, inflation=CUBE_INFLATION):
    """Cube centred on the midrange with side (1 + inflation) * max extent."""
    lo = np.array([pc.x1.min(), pc.x2.min(), pc.x3.min()])
    hi = np.array([pc.x1.max(), pc.x2.max(), pc.x3.max()])
    h1 = max((1.0 + inflation) * float(np.max(hi - lo)), MIN_CUBE_SIDE)
    origin = 0.5 * (lo + hi) - 0.5 * h1
    return BoundingCube(tuple(origin), h1)


EXACT_DIAMETER_MAX_N = 10_000


def diameter(pc):
    """Largest pairwise distance, or an upper bound for large clouds.

    Exact up to ``EXACT_DIAMETER_MAX_N`` points; above that, the diagonal of
    the axis-aligned extent box.
    """
    if pc.n == 1:
        return 0.0
    pts = pc.points
    if pc.n > EXACT_DIAMETER_MAX_N:
        return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    best = 0.0
    for i in range(0, pc.n, 1024):
        best = max(best, float(cdist(pts[i:i + 1024], pts[i:]).max()))
    return best


def shape_diameter(shape, a=1.0):
    """Exact diameter of a generated surface of radius parameter ``a``."""
    return 2.0 * a * max(1.0, _Z_SCALE[Shape(shape)])


# File formats


def write_points(path, pc, fmt=None):
    """Write ``pc`` as binary (``.bin``/default) or CSV (``.csv``)."""
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "bin")
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "z", "a_re", "a_im"])
            for row in zip(pc.x1, pc.x2, pc.x3, pc.a_re, pc.a_im):
                w.writerow([repr(float(v)) for v in row])
        return
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, pc.n))
        fh.write(np.stack([pc.x1, pc.x2, pc.x3], axis=1).astype("<f8").tobytes())
        fh.write(np.stack([pc.a_re, pc.a_im], axis=1).astype("<f8").tobytes())


def read_points(path):
    """Read a binary or CSV point file written by :func:`write_points`."""
    path = Path(path)
    with path.open("rb") as fh:
        head = fh.read(_HEADER.size)
    if head[:4] == MAGIC:
        return _read_binary(path)
    return _read_csv(path)


def _read_binary(path):
    raw = path.read_bytes()
    magic, version, n = _HEADER.unpack_from(raw)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported point file version {version}")
    expected = _HEADER.size + 8 * 5 * n
    if len(raw) != expected:
        raise ValueError(f"point file truncated: expected {expected} bytes, got {len(raw)}")
    xyz = np.frombuffer(raw, dtype="<f8", count=3 * n, offset=_HEADER.size).reshape(n, 3)
    ab = np.frombuffer(raw, dtype="<f8", count=2 * n, offset=_HEADER.size + 24 * n).reshape(n, 2)
    return PointCloud(xyz[:, 0], xyz[:, 1], xyz[:, 2], ab[:, 0], ab[:, 1])


def _read_csv(path):
    rows = []
    with path.open(newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                vals = [float(v) for v in row]
            except ValueError:
                if i == 0:
                    continue  # header line
                raise ValueError(f"{path}:{i + 1}: non-numeric field") from None
            if len(vals) != 5:
                raise ValueError(f"{path}:{i + 1}: expected 5 fields x,y,z,a_re,a_im, got {len(vals)}")
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no points")
    arr = np.asarray(rows)
    return PointCloud(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4])
