"""IFGF passes, level-D singular interactions and the direct oracle.

Every compiled pass is a parallel loop over an index range in which each
iteration writes only its own output slot (a point result or a cone block)
and accumulates in a fixed order (Morton order of boxes, cone order of
segments, block order of nodes). Results are therefore bitwise identical for
any number of threads and for any partition of the ranges across ranks.
"""

import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numba
import numpy as np

from . import morton, octree
from .cones import ConeGridSpec, compute_relevant_cones, locate, node_offset
from .geometry import bounding_cube
from .interp import eval_flat, fit_into, transform_matrix
from .kernel import green_r, ratio_r
from ._hashmap import lookup

DEFAULT_DEGREES = (3, 5, 5)
DEFAULT_CONES = (1, 2, 4)

# error codes reported by the passes
ERR_OUTSIDE = 1  # point or node inside the neighbor zone of the cone box
ERR_NOT_RELEVANT = 2  # containing cone is not in the relevant set
ERR_NOT_LOCAL = 3  # relevant cone block not available on this rank


class CoverageError(RuntimeError):
    """A pass needed a cone block that the relevant set or cache lacks."""


@dataclass(frozen=True)
class IFGFParams:
    """Tuning parameters.

    ``depth`` fixes D directly; otherwise D is the shallowest level whose
    boxes are at most ``box_size_wavelengths`` wavelengths wide, capped so
    that level-D boxes hold ``min_points_per_box`` points on average.
    """

    depth: int = None
    box_size_wavelengths: float = 0.5
    degrees: tuple = DEFAULT_DEGREES
    cones: tuple = DEFAULT_CONES
    min_points_per_box: float = 8.0
    threads: int = None

    def __post_init__(self):
        object.__setattr__(self, "degrees", tuple(int(v) for v in self.degrees))
        object.__setattr__(self, "cones", tuple(int(v) for v in self.cones))
        if self.depth is not None and not 1 <= self.depth <= morton.MAX_LEVEL:
            raise ValueError(f"depth must be in [1, {morton.MAX_LEVEL}]")
        if not self.box_size_wavelengths > 0:
            raise ValueError("box_size_wavelengths must be positive")


@dataclass
class ApplyResult:
    values: np.ndarray  # complex, caller's point order
    timings: dict
    depth: int
    stats: dict = field(default_factory=dict)


@contextmanager
def execution_units(n):
    """Temporarily run compiled passes on ``n`` threads."""
    if n is None:
        yield numba.get_num_threads()
        return
    n = int(n)
    if not 1 <= n <= numba.config.NUMBA_NUM_THREADS:
        raise ValueError(f"threads must be in [1, {numba.config.NUMBA_NUM_THREADS}] "
                         "(raise NUMBA_NUM_THREADS or IFGF_THREADS before import)")
    old = numba.get_num_threads()
    numba.set_num_threads(n)
    try:
        yield n
    finally:
        numba.set_num_threads(old)


def choose_depth(pc, cube, cfg, params):
    if params.depth is not None:
        return params.depth
    dens = _density_depth(pc, cube, params.min_points_per_box)
    if cfg.kappa == 0:
        return dens
    target = params.box_size_wavelengths * cfg.wavelength * (1.0 + 1e-3)
    d = 1
    while cube.side(d) > target and d < morton.MAX_LEVEL:
        d += 1
    return min(d, dens)


def _density_depth(pc, cube, min_pts):
    """Deepest level whose relevant boxes hold >= ``min_pts`` points on average."""
    best = 1
    for d in range(2, morton.MAX_LEVEL + 1):
        codes = morton.point_codes(pc.x1, pc.x2, pc.x3, cube.origin, cube.side(d), 1 << (d - 1))
        if pc.n / np.unique(codes).size < min_pts:
            break
        best = d
    return best


class IFGFOperator:
    """Precomputed box and cone hierarchy for one point cloud.

    The cloud is copied and Morton-sorted internally; :meth:`apply` takes and
    returns data in the caller's original order.
    """

    def __init__(self, pc, cfg, params=None):
        params = params or IFGFParams()
        self.cfg = cfg
        self.params = params
        self.timings = {}
        t0 = time.perf_counter()
        self.pc = pc.copy()
        self.cube = bounding_cube(self.pc)
        self.depth = choose_depth(self.pc, self.cube, cfg, params)
        self.perm = morton.sort_points(self.pc, self.cube, self.depth)
        self.tree = octree.build(self.pc, self.cube, self.depth)
        t1 = time.perf_counter()
        self.spec = ConeGridSpec(self.depth, params.cones, params.degrees)
        self.cones = compute_relevant_cones(self.tree, self.spec)
        t2 = time.perf_counter()
        self.levels = {d: LevelArgs(self, d) for d in range(3, self.depth + 1)}
        self.timings["setup_tree"] = t1 - t0
        self.timings["setup_cones"] = t2 - t1

    @property
    def n(self):
        return self.pc.n

    @property
    def kappa(self):
        return self.cfg.kappa

    def sorted_coefficients(self, coefficients=None):
        if coefficients is None:
            return self.pc.a_re + 1j * self.pc.a_im
        c = np.asarray(coefficients, dtype=np.complex128).reshape(-1)
        if c.size != self.n:
            raise ValueError(f"expected {self.n} coefficients, got {c.size}")
        return np.ascontiguousarray(c[self.perm])

    def to_original(self, values_sorted):
        out = np.empty_like(values_sorted)
        out[self.perm] = values_sorted
        return out

    def apply(self, coefficients=None, threads=None):
        """Evaluate the operator; returns values in the caller's order."""
        threads = threads if threads is not None else self.params.threads
        a = self.sorted_coefficients(coefficients)
        timings = {}
        stats = {"peak_live_blocks": 0, "relevant_cones": {d: self.cones.count(d) for d in self.levels}}
        with execution_units(threads):
            t = time.perf_counter()
            out = singular_interactions(self, a, 0, self.n)
            timings["singular"] = time.perf_counter() - t
            D = self.depth
            if D >= 3:
                t = time.perf_counter()
                blocks = level_d_evaluations(self, a, 0, self.cones.count(D))
                timings["level_d"] = time.perf_counter() - t
                timings["interpolation"] = 0.0
                timings["propagation"] = 0.0
                rows = {D: np.arange(blocks.shape[0], dtype=np.int64)}
                for d in range(D, 2, -1):
                    live = blocks.shape[0]
                    if d > 3:
                        t = time.perf_counter()
                        parent = propagation_pass(self, d, blocks, rows[d], 0, self.cones.count(d - 1))
                        timings["propagation"] += time.perf_counter() - t
                        rows[d - 1] = np.arange(parent.shape[0], dtype=np.int64)
                        live += parent.shape[0]
                    stats["peak_live_blocks"] = max(stats["peak_live_blocks"], live)
                    t = time.perf_counter()
                    out += interpolation_pass(self, d, blocks, rows[d], 0, self.n)
                    timings["interpolation"] += time.perf_counter() - t
                    if d > 3:
                        blocks = parent
                    del rows[d]
        timings["total"] = sum(timings.values())
        return ApplyResult(self.to_original(out), timings, self.depth, stats)


class LevelArgs:
    """Flat arrays of one level, packed for the compiled passes."""

    def __init__(self, op, d):
        tree, spec = op.tree, op.spec
        lv = tree.level(d)
        cl = op.cones.level(d)
        self.d = d
        self.h = lv.h
        self.centers = lv.centers
        self.first = lv.first
        self.count = lv.count
        self.point_box = lv.point_box
        self.cousin_ptr, self.cousin_idx = lv.cousin_lists
        self.child_start = lv.child_start if d < tree.depth else np.zeros(lv.n_boxes + 1, np.int64)
        self.grid = spec.kernel_args(d)
        self.n_per_box = np.int64(spec.n_per_box(d))
        self.cone_box = cl.box
        self.cone_gamma = cl.gamma
        self.tk = cl.index.table_keys
        self.tv = cl.index.table_values


def _raise_on(err, what):
    bad = np.flatnonzero(err)
    if bad.size:
        code = int(err[bad[0]])
        reason = {ERR_OUTSIDE: "lies inside the neighbor zone",
                  ERR_NOT_RELEVANT: "falls in a non-relevant cone",
                  ERR_NOT_LOCAL: "needs a cone block missing from the local cache"}[code]
        raise CoverageError(f"{what}: {bad.size} items failed; first item {bad[0]} {reason}")


def singular_interactions(op, a, i0, i1):
    """Direct sums over level-D neighbor boxes for sorted points [i0, i1)."""
    lv = op.tree.level(op.depth)
    ptr, idx = lv.neighbor_lists
    out = np.zeros(i1 - i0, np.complex128)
    _singular(op.pc.x1, op.pc.x2, op.pc.x3, a, lv.point_box, lv.first, lv.count, ptr, idx,
              op.kappa, i0, i1, out)
    return out


def level_d_evaluations(op, a, c0, c1):
    """Fitted level-D blocks for relevant cones [c0, c1)."""
    la = op.levels[op.depth]
    ts, tt, tp = op.spec.reference_nodes()
    ms, mt, mp = (np.array(transform_matrix(p)) for p in op.spec.degrees)
    out = np.empty((c1 - c0, op.spec.P), np.complex128)
    ns, nt, npp, ws, wt, wp, smax = la.grid
    _level_d(c0, c1, la.cone_box, la.cone_gamma, la.centers, la.h, la.first, la.count,
             op.pc.x1, op.pc.x2, op.pc.x3, a, nt, npp, ws, wt, wp, ts, tt, tp, ms, mt, mp, op.kappa, out)
    return out


def interpolation_pass(op, d, blocks, rows, i0, i1):
    """Cousin contributions of level ``d`` at sorted points [i0, i1).

    ``rows`` maps a level-d cone position to its row in ``blocks`` (-1 if
    the block is not held locally).
    """
    la = op.levels[d]
    ps, pt, pp = op.spec.degrees
    out = np.zeros(i1 - i0, np.complex128)
    err = np.zeros(i1 - i0, np.int8)
    ns, nt, npp, ws, wt, wp, smax = la.grid
    _interpolate(i0, i1, la.point_box, la.cousin_ptr, la.cousin_idx, la.centers, la.h,
                 ns, nt, npp, ws, wt, wp, smax, la.tk, la.tv, la.n_per_box, rows, blocks,
                 ps, pt, pp, op.pc.x1, op.pc.x2, op.pc.x3, op.kappa, out, err)
    _raise_on(err, f"interpolation on level {d}")
    return out


def propagation_pass(op, d, blocks, rows, c0, c1):
    """Level-(d-1) blocks for parent cones [c0, c1) from level-d blocks."""
    child = op.levels[d]
    par = op.levels[d - 1]
    ps, pt, pp = op.spec.degrees
    ts, tt, tp = op.spec.reference_nodes()
    ms, mt, mp = (np.array(transform_matrix(p)) for p in op.spec.degrees)
    out = np.empty((c1 - c0, op.spec.P), np.complex128)
    err = np.zeros(c1 - c0, np.int8)
    _, pnt, pnpp, pws, pwt, pwp, _ = par.grid
    ns, nt, npp, ws, wt, wp, smax = child.grid
    _propagate(c0, c1, par.cone_box, par.cone_gamma, par.centers, par.h, pnt, pnpp, pws, pwt, pwp,
               par.child_start, child.centers, child.h, ns, nt, npp, ws, wt, wp, smax,
               child.tk, child.tv, child.n_per_box, rows, blocks, ps, pt, pp, ts, tt, tp, ms, mt, mp,
               op.kappa, out, err)
    _raise_on(err, f"propagation from level {d}")
    return out


def apply(pc, cfg, params=None):
    """Accelerated evaluation of the operator on ``pc``.

    Writes the result into ``pc.i_re``/``pc.i_im`` and returns an
    :class:`ApplyResult` whose timings include the setup stages.
    """
    op = IFGFOperator(pc, cfg, params)
    res = op.apply()
    res.timings = {**op.timings, **res.timings}
    res.timings["total"] = sum(v for k, v in res.timings.items() if k != "total")
    pc.i_re[:] = res.values.real
    pc.i_im[:] = res.values.imag
    return res


def direct_eval(pc, cfg, targets=None, threads=None):
    """Exact O(N^2) sums I(x_l) = sum_{m != l} a_m G(x_l, x_m)."""
    t = np.arange(pc.n, dtype=np.int64) if targets is None else np.ascontiguousarray(targets, dtype=np.int64)
    out = np.zeros(t.size, np.complex128)
    with execution_units(threads):
        _direct(pc.x1, pc.x2, pc.x3, pc.a_re + 1j * pc.a_im, t, cfg.kappa, out)
    return out


def estimate_error(pc, cfg, values, m=1000, seed=0, targets=None):
    """Relative L2 error of ``values`` against direct sums at ``m`` random points."""
    values = np.asarray(values, dtype=np.complex128)
    if targets is None:
        if not 1 <= m <= pc.n:
            raise ValueError(f"m must be in [1, {pc.n}]")
        targets = np.random.default_rng(seed).permutation(pc.n)[:m]
    exact = direct_eval(pc, cfg, targets)
    den = float(np.sum(np.abs(exact) ** 2))
    if den == 0.0:
        raise ValueError("reference field vanishes at the sampled points")
    return math.sqrt(float(np.sum(np.abs(exact - values[targets]) ** 2)) / den)


def relative_l2(exact, approx):
    exact = np.asarray(exact)
    return float(np.linalg.norm(exact - np.asarray(approx)) / np.linalg.norm(exact))


# Compiled passes


@numba.njit(parallel=True, cache=True)
def _direct(x1, x2, x3, a, targets, kappa, out):
    n = x1.size
    for t in numba.prange(targets.size):
        i = targets[t]
        acc = 0j
        for j in range(n):
            if j == i:
                continue
            dx = x1[i] - x1[j]
            dy = x2[i] - x2[j]
            dz = x3[i] - x3[j]
            acc += a[j] * green_r(math.sqrt(dx * dx + dy * dy + dz * dz), kappa)
        out[t] = acc


@numba.njit(parallel=True, cache=True)
def _singular(x1, x2, x3, a, point_box, first, count, ptr, idx, kappa, i0, i1, out):
    for i in numba.prange(i0, i1):
        b = point_box[i]
        acc = 0j
        for q in range(ptr[b], ptr[b + 1]):
            c = idx[q]
            for j in range(first[c], first[c] + count[c]):
                if j == i:
                    continue
                dx = x1[i] - x1[j]
                dy = x2[i] - x2[j]
                dz = x3[i] - x3[j]
                acc += a[j] * green_r(math.sqrt(dx * dx + dy * dy + dz * dz), kappa)
        out[i - i0] = acc


@numba.njit(parallel=True, cache=True)
def _level_d(c0, c1, cone_box, cone_gamma, centers, h, first, count, x1, x2, x3, a,
             nt, npp, ws, wt, wp, ts, tt, tp, ms, mt, mp, kappa, out):
    ps, pt, pp = ts.size, tt.size, tp.size
    P = ps * pt * pp
    for c in numba.prange(c0, c1):
        b = cone_box[c]
        g = cone_gamma[c]
        cx, cy, cz = centers[b, 0], centers[b, 1], centers[b, 2]
        vals = np.zeros(P, np.complex128)
        work = np.empty(P, np.complex128)
        n = 0
        for ia in range(ps):
            for ib in range(pt):
                for ic in range(pp):
                    ox, oy, oz = node_offset(g, ia, ib, ic, h, nt, npp, ws, wt, wp, ts, tt, tp)
                    rc = math.sqrt(ox * ox + oy * oy + oz * oz)
                    nx, ny, nz = cx + ox, cy + oy, cz + oz
                    acc = 0j
                    for p in range(first[b], first[b] + count[b]):
                        dx = nx - x1[p]
                        dy = ny - x2[p]
                        dz = nz - x3[p]
                        acc += a[p] * ratio_r(math.sqrt(dx * dx + dy * dy + dz * dz), rc, kappa)
                    vals[n] = acc
                    n += 1
        fit_into(vals, ms, mt, mp, out[c - c0], work)


@numba.njit(parallel=True, cache=True)
def _interpolate(i0, i1, point_box, cptr, cidx, centers, h, ns, nt, npp, ws, wt, wp, smax,
                 tk, tv, n_per_box, rows, blocks, ps, pt, pp, x1, x2, x3, kappa, out, err):
    for i in numba.prange(i0, i1):
        b = point_box[i]
        acc = 0j
        for q in range(cptr[b], cptr[b + 1]):
            c = cidx[q]
            g, us, ut, up, r = locate(x1[i] - centers[c, 0], x2[i] - centers[c, 1], x3[i] - centers[c, 2],
                                      h, ns, nt, npp, ws, wt, wp, smax)
            if g < 0:
                err[i - i0] = 1
                continue
            cone = lookup(tk, tv, c * n_per_box + g)
            if cone < 0:
                err[i - i0] = 2
                continue
            row = rows[cone]
            if row < 0:
                err[i - i0] = 3
                continue
            acc += eval_flat(blocks[row], ps, pt, pp, us, ut, up) * green_r(r, kappa)
        out[i - i0] = acc


@numba.njit(parallel=True, cache=True)
def _propagate(c0, c1, pcone_box, pcone_gamma, pcenters, ph, pnt, pnpp, pws, pwt, pwp,
               child_start, ccenters, ch, ns, nt, npp, ws, wt, wp, smax,
               tk, tv, n_per_box, rows, blocks, ps, pt, pp, ts, tt, tp, ms, mt, mp, kappa, out, err):
    P = ps * pt * pp
    for q in numba.prange(c0, c1):
        j = pcone_box[q]
        pg = pcone_gamma[q]
        vals = np.zeros(P, np.complex128)
        work = np.empty(P, np.complex128)
        # parent nodes are shared by all children
        nodes = np.empty((P, 4))
        n = 0
        for ia in range(ps):
            for ib in range(pt):
                for ic in range(pp):
                    ox, oy, oz = node_offset(pg, ia, ib, ic, ph, pnt, pnpp, pws, pwt, pwp, ts, tt, tp)
                    nodes[n, 0] = ox
                    nodes[n, 1] = oy
                    nodes[n, 2] = oz
                    nodes[n, 3] = math.sqrt(ox * ox + oy * oy + oz * oz)
                    n += 1
        for k in range(child_start[j], child_start[j + 1]):
            sx = pcenters[j, 0] - ccenters[k, 0]
            sy = pcenters[j, 1] - ccenters[k, 1]
            sz = pcenters[j, 2] - ccenters[k, 2]
            for n in range(P):
                g, us, ut, up, rc = locate(nodes[n, 0] + sx, nodes[n, 1] + sy, nodes[n, 2] + sz,
                                           ch, ns, nt, npp, ws, wt, wp, smax)
                if g < 0:
                    err[q - c0] = 1
                    continue
                cone = lookup(tk, tv, k * n_per_box + g)
                if cone < 0:
                    err[q - c0] = 2
                elif rows[cone] < 0:
                    err[q - c0] = 3
                else:
                    v = eval_flat(blocks[rows[cone]], ps, pt, pp, us, ut, up)
                    vals[n] += v * ratio_r(rc, nodes[n, 3], kappa)
        fit_into(vals, ms, mt, mp, out[q - c0], work)
