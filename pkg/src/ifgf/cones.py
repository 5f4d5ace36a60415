"""Cone segments in box-centred spherical coordinates.

Around each box centre the exterior of the neighbor zone is described by
``(s, theta, phi)`` with ``s = sqrt(3) H_d / (2 r)``. Cousin points satisfy
``r >= 3 H_d / 2``, i.e. ``s <= sqrt(3) / 3``, and infinity maps to ``s = 0``,
so the analytic factor is interpolated on the bounded box
``(0, s_max] x [0, pi] x [0, 2 pi)``. That box is split into half-open
segments; the counts per axis double on every step up the tree.

Cones are keyed per level by ``box_index * n_per_box + gamma`` where
``gamma = (i_s * n_theta + i_theta) * n_phi + i_phi``. Sorting by that key is
the cone order used everywhere: box Morton code, then radial, elevation,
azimuth.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numba
import numpy as np

from ._hashmap import HashIndex
from .interp import chebyshev_nodes

S_MAX = np.sqrt(3.0) / 3.0
HALF_SQRT3 = 0.5 * np.sqrt(3.0)
TWO_PI = 2.0 * np.pi
_S_TOL = 1e-12


class ConeKey(NamedTuple):
    box: int  # Morton code of the co-centred box
    gamma: tuple  # (i_s, i_theta, i_phi)
    level: int


def cone_order_key(cone):
    """Sort key realising the cone total order."""
    return (cone.level, cone.box, *cone.gamma)


@dataclass(frozen=True)
class ConeGridSpec:
    """Segment counts per level and interpolation degrees.

    ``base`` holds ``(n_s, n_theta, n_phi)`` on the finest level; every
    coarser level doubles each count.
    """

    depth: int
    base: tuple = (1, 2, 4)
    degrees: tuple = (3, 5, 5)
    s_max: float = S_MAX

    def __post_init__(self):
        object.__setattr__(self, "base", tuple(int(v) for v in self.base))
        object.__setattr__(self, "degrees", tuple(int(v) for v in self.degrees))
        if len(self.base) != 3 or min(self.base) < 1:
            raise ValueError("cone base counts must be three positive integers")
        if len(self.degrees) != 3 or min(self.degrees) < 1:
            raise ValueError("interpolation degrees must be three positive integers")

    @property
    def P(self):
        return int(np.prod(self.degrees))

    def counts(self, d):
        f = 1 << (self.depth - d)
        return tuple(b * f for b in self.base)

    def n_per_box(self, d):
        ns, nt, npp = self.counts(d)
        return ns * nt * npp

    def widths(self, d):
        ns, nt, npp = self.counts(d)
        return (self.s_max / ns, np.pi / nt, TWO_PI / npp)

    def gamma_index(self, gamma, d):
        ns, nt, npp = self.counts(d)
        i, j, k = (int(v) for v in gamma)
        if not (0 <= i < ns and 0 <= j < nt and 0 <= k < npp):
            raise ValueError(f"cone index {gamma} outside the level-{d} grid {ns}x{nt}x{npp}")
        return (i * nt + j) * npp + k

    def gamma_tuple(self, g, d):
        _, nt, npp = self.counts(d)
        return (int(g) // (nt * npp), (int(g) // npp) % nt, int(g) % npp)

    def segment_bounds(self, gamma, d):
        """((s0, s1), (theta0, theta1), (phi0, phi1)) of a segment."""
        self.gamma_index(gamma, d)
        w = self.widths(d)
        return tuple((g * wi, (g + 1) * wi) for g, wi in zip(gamma, w))

    def kernel_args(self, d):
        """Scalars describing the level-``d`` grid for compiled kernels."""
        ns, nt, npp = self.counts(d)
        ws, wt, wp = self.widths(d)
        return np.int64(ns), np.int64(nt), np.int64(npp), ws, wt, wp, float(self.s_max)

    def reference_nodes(self):
        return tuple(np.array(chebyshev_nodes(p)) for p in self.degrees)


def cone_coords(box_center, h, x):
    """(s, theta, phi) of ``x`` about ``box_center`` for box side ``h``."""
    c = np.asarray(box_center, dtype=float)
    x = np.asarray(x, dtype=float)
    dv = x - c
    r = float(np.linalg.norm(dv))
    if r == 0.0:
        raise ValueError("cone coordinates are undefined at the box centre")
    return _coords(dv[0], dv[1], dv[2], h)[:3]


def cone_of_point(box_center, h, d, x, spec):
    """Cone index (i_s, i_theta, i_phi) containing ``x`` on level ``d``."""
    s, th, ph = cone_coords(box_center, h, x)
    ns, nt, npp, ws, wt, wp, smax = spec.kernel_args(d)
    if s > smax * (1.0 + _S_TOL):
        raise ValueError(f"point at s={s:.6g} lies inside the neighbor zone (s_max={smax:.6g})")
    return (int(_bin(s, ws, ns)), int(_bin(th, wt, nt)), int(_bin(ph, wp, npp)))


def interpolation_nodes(box_center, h, gamma, d, spec):
    """Cartesian interpolation nodes of a segment, shape (P, 3), block order."""
    (s0, s1), (t0, t1), (p0, p1) = spec.segment_bounds(gamma, d)
    ts, tt, tp = spec.reference_nodes()
    s = s0 + 0.5 * (s1 - s0) * (ts + 1.0)
    th = t0 + 0.5 * (t1 - t0) * (tt + 1.0)
    ph = p0 + 0.5 * (p1 - p0) * (tp + 1.0)
    S, T, F = np.meshgrid(s, th, ph, indexing="ij")
    r = HALF_SQRT3 * h / S.ravel()
    st = np.sin(T.ravel())
    c = np.asarray(box_center, dtype=float)
    return np.stack([c[0] + r * st * np.cos(F.ravel()),
                     c[1] + r * st * np.sin(F.ravel()),
                     c[2] + r * np.cos(T.ravel())], axis=1)


def local_coords(box_center, h, x, gamma, d, spec):
    """Reference coordinates in [-1, 1]^3 of ``x`` inside segment ``gamma``."""
    s, th, ph = cone_coords(box_center, h, x)
    (s0, s1), (t0, t1), (p0, p1) = spec.segment_bounds(gamma, d)
    return np.array([2.0 * (s - s0) / (s1 - s0) - 1.0,
                     2.0 * (th - t0) / (t1 - t0) - 1.0,
                     2.0 * (ph - p0) / (p1 - p0) - 1.0])


# Compiled helpers


@numba.njit(cache=True, inline="always")
def _coords(dx, dy, dz, h):
    r = np.sqrt(dx * dx + dy * dy + dz * dz)
    s = HALF_SQRT3 * h / r
    c = dz / r
    if c > 1.0:
        c = 1.0
    elif c < -1.0:
        c = -1.0
    th = np.arccos(c)
    ph = np.arctan2(dy, dx)
    if ph < 0.0:
        ph += TWO_PI
    return s, th, ph, r


@numba.njit(cache=True, inline="always")
def _bin(v, w, n):
    i = np.int64(v / w)
    if i >= n:
        i = n - 1
    elif i < 0:
        i = 0
    return i


@numba.njit(cache=True, inline="always")
def locate(dx, dy, dz, h, ns, nt, npp, ws, wt, wp, smax):
    """Cone gamma and local coordinates of offset (dx, dy, dz) from a box centre.

    Returns ``(gamma, us, ut, up, r)``; ``gamma == -1`` flags ``s > s_max``.
    """
    s, th, ph, r = _coords(dx, dy, dz, h)
    if s > smax * (1.0 + 1e-12):
        return -1, 0.0, 0.0, 0.0, r
    i = _bin(s, ws, ns)
    j = _bin(th, wt, nt)
    k = _bin(ph, wp, npp)
    us = 2.0 * (s - i * ws) / ws - 1.0
    ut = 2.0 * (th - j * wt) / wt - 1.0
    up = 2.0 * (ph - k * wp) / wp - 1.0
    return (i * nt + j) * npp + k, us, ut, up, r


@numba.njit(cache=True, inline="always")
def node_offset(gamma, a, b, c, h, nt, npp, ws, wt, wp, ts, tt, tp):
    """Offset from the box centre of node (a, b, c) of segment ``gamma``."""
    i = gamma // (nt * npp)
    j = (gamma // npp) % nt
    k = gamma % npp
    s = (i + 0.5 * (ts[a] + 1.0)) * ws
    th = (j + 0.5 * (tt[b] + 1.0)) * wt
    ph = (k + 0.5 * (tp[c] + 1.0)) * wp
    r = HALF_SQRT3 * h / s
    st = np.sin(th)
    return r * st * np.cos(ph), r * st * np.sin(ph), r * np.cos(th)


# Relevant cones


@dataclass
class ConeLevel:
    """Relevant cones of one level, sorted in cone order."""

    d: int
    n_per_box: int
    box: np.ndarray  # box index on level d, per cone
    gamma: np.ndarray  # linear gamma, per cone
    box_ptr: np.ndarray  # cones of box b: [box_ptr[b], box_ptr[b + 1])
    index: HashIndex = field(repr=False)

    @property
    def n_cones(self):
        return self.box.size

    @property
    def keys(self):
        return self.box * self.n_per_box + self.gamma

    def find(self, box_index, gamma_lin):
        """Cone position for a (box index, linear gamma) pair, or -1."""
        v = self.index.get(int(box_index) * self.n_per_box + int(gamma_lin))
        return -1 if v is None else v


class RelevantConeSet:
    """Relevant cone segments on levels 3..D."""

    def __init__(self, tree, spec, levels):
        self.tree = tree
        self.spec = spec
        self._levels = levels

    def level(self, d):
        return self._levels.get(d)

    @property
    def levels(self):
        return sorted(self._levels)

    def count(self, d):
        lv = self._levels.get(d)
        return 0 if lv is None else lv.n_cones

    def cone_keys(self, d):
        """Cone keys of level ``d`` in cone order."""
        lv = self._levels.get(d)
        if lv is None:
            return []
        codes = self.tree.level(d).codes
        return [ConeKey(int(codes[b]), self.spec.gamma_tuple(g, d), d) for b, g in zip(lv.box, lv.gamma)]

    def index_of(self, key):
        """Position of ``key`` in its level's cone list, or -1."""
        lv = self._levels.get(key.level)
        if lv is None:
            return -1
        b = self.tree.level(key.level).index.get(key.box)
        if b is None:
            return -1
        return lv.find(b, self.spec.gamma_index(key.gamma, key.level))

    def is_relevant(self, key):
        return self.index_of(key) >= 0

    def nodes(self, key):
        """Interpolation nodes of a cone, (P, 3)."""
        lv = self.tree.level(key.level)
        b = lv.index.get(key.box)
        return interpolation_nodes(lv.centers[b], lv.h, key.gamma, key.level, self.spec)


def compute_relevant_cones(tree, spec):
    """Mark relevant cones top-down from level 3 to level D.

    A level-d cone of box B is relevant if it contains a cousin point of B,
    or one of the interpolation nodes of a relevant cone of B's parent.
    """
    if spec.depth != tree.depth:
        raise ValueError("cone grid depth does not match the tree depth")
    levels = {}
    ts, tt, tp = spec.reference_nodes()
    x = (tree.x1, tree.x2, tree.x3)
    prev = None
    for d in range(3, tree.depth + 1):
        lv = tree.level(d)
        cptr, cidx = lv.cousin_lists
        ns, nt, npp, ws, wt, wp, smax = spec.kernel_args(d)
        if prev is None:
            pbox_ptr = np.zeros(1, np.int64)
            pgamma = np.zeros(0, np.int64)
            pcenters = np.zeros((1, 3))
            parent = np.zeros(lv.n_boxes, np.int64)
            pargs = spec.kernel_args(d)
            ph = 0.0
        else:
            plv = tree.level(d - 1)
            pbox_ptr, pgamma = prev.box_ptr, prev.gamma
            pcenters = plv.centers
            parent = lv.parent
            pargs = spec.kernel_args(d - 1)
            ph = plv.h
        box, gamma, bad = _mark_level(
            lv.centers, lv.h, lv.first, lv.count, cptr, cidx, x[0], x[1], x[2],
            ns, nt, npp, ws, wt, wp, smax,
            parent, pcenters, ph, pbox_ptr, pgamma, pargs[1], pargs[2], pargs[3], pargs[4], pargs[5],
            ts, tt, tp)
        if bad:
            raise RuntimeError(f"{bad} cousin points or parent nodes fell outside the cone grid on level {d}")
        box_ptr = np.searchsorted(box, np.arange(lv.n_boxes + 1)).astype(np.int64)
        n_per_box = spec.n_per_box(d)
        keys = box * n_per_box + gamma
        cur = ConeLevel(d, n_per_box, box, gamma, box_ptr, HashIndex(keys))
        levels[d] = cur
        prev = cur
    return RelevantConeSet(tree, spec, levels)


@numba.njit(cache=True)
def _mark_level(centers, h, first, count, cptr, cidx, x1, x2, x3,
                ns, nt, npp, ws, wt, wp, smax,
                parent, pcenters, ph, pbox_ptr, pgamma, pnt, pnpp, pws, pwt, pwp,
                ts, tt, tp):
    nb = centers.shape[0]
    n_per_box = ns * nt * npp
    seen = np.zeros(n_per_box, np.bool_)
    touched = np.empty(64, np.int64)
    cap = max(64, 8 * nb)
    out_box = np.empty(cap, np.int64)
    out_gamma = np.empty(cap, np.int64)
    n_out = 0
    bad = 0
    for b in range(nb):
        n_t = 0
        cx, cy, cz = centers[b, 0], centers[b, 1], centers[b, 2]
        # cousin points
        for q in range(cptr[b], cptr[b + 1]):
            c = cidx[q]
            for p in range(first[c], first[c] + count[c]):
                g, _, _, _, _ = locate(x1[p] - cx, x2[p] - cy, x3[p] - cz, h, ns, nt, npp, ws, wt, wp, smax)
                if g < 0:
                    bad += 1
                    continue
                if not seen[g]:
                    seen[g] = True
                    if n_t == touched.size:
                        touched = np.concatenate((touched, np.empty(touched.size, np.int64)))
                    touched[n_t] = g
                    n_t += 1
        # interpolation nodes of the parent's relevant cones
        j = parent[b]
        if pgamma.size > 0:
            px, py, pz = pcenters[j, 0], pcenters[j, 1], pcenters[j, 2]
            ox, oy, oz = px - cx, py - cy, pz - cz
            for q in range(pbox_ptr[j], pbox_ptr[j + 1]):
                pg = pgamma[q]
                for a in range(ts.size):
                    for bb in range(tt.size):
                        for cc in range(tp.size):
                            nx, ny, nz = node_offset(pg, a, bb, cc, ph, pnt, pnpp, pws, pwt, pwp, ts, tt, tp)
                            g, _, _, _, _ = locate(nx + ox, ny + oy, nz + oz, h, ns, nt, npp, ws, wt, wp, smax)
                            if g < 0:
                                bad += 1
                                continue
                            if not seen[g]:
                                seen[g] = True
                                if n_t == touched.size:
                                    touched = np.concatenate((touched, np.empty(touched.size, np.int64)))
                                touched[n_t] = g
                                n_t += 1
        marks = np.sort(touched[:n_t])
        while n_out + n_t > out_box.size:
            out_box = np.concatenate((out_box, np.empty(out_box.size, np.int64)))
            out_gamma = np.concatenate((out_gamma, np.empty(out_gamma.size, np.int64)))
        for i in range(n_t):
            out_box[n_out + i] = b
            out_gamma[n_out + i] = marks[i]
            seen[marks[i]] = False
        n_out += n_t
    return out_box[:n_out].copy(), out_gamma[:n_out].copy(), bad
