"""In-process simulation of the distributed driver with one-sided windows.

Ranks are isolated data partitions stepped level-synchronously in one
process. Every rank owns

* a contiguous Morton interval of level-D boxes, hence a contiguous interval
  of sorted points for which it computes results, and
* on every level, a contiguous interval of the cone-ordered relevant cones,
  whose coefficient blocks it computes and publishes.

Blocks owned by another rank are only reachable through :class:`Window`,
which refuses reads before the owner fenced the level and counts every
cross-rank fetch. Each rank runs the same compiled passes as the shared
memory engine on its own ranges, so results are bitwise identical to
:func:`ifgf.engine.apply` for any rank count.
"""

import time
from dataclasses import dataclass, field

import numba
import numpy as np

from . import engine
from ._hashmap import lookup
from .cones import ConeKey, locate, node_offset


class SynchronizationError(RuntimeError):
    """Read from a window epoch that its owner has not fenced."""


@dataclass
class RankLayout:
    n_ranks: int
    box_bounds: np.ndarray  # level-D box interval of rank r: [box_bounds[r], box_bounds[r+1])
    point_bounds: np.ndarray  # sorted point interval of rank r
    cone_bounds: dict  # level -> cone interval bounds, length n_ranks + 1

    def point_range(self, rank):
        return int(self.point_bounds[rank]), int(self.point_bounds[rank + 1])

    def cone_range(self, d, rank):
        b = self.cone_bounds[d]
        return int(b[rank]), int(b[rank + 1])

    def owners(self, d, cones):
        """Owning rank of each cone position on level ``d``."""
        return np.searchsorted(self.cone_bounds[d], cones, side="right") - 1


def partition(tree, cones, n_ranks):
    """Split level-D boxes by population and each level's cones by count."""
    n_ranks = int(n_ranks)
    if n_ranks < 1:
        raise ValueError("rank count must be at least 1")
    lv = tree.level(tree.depth)
    nb = lv.n_boxes
    if n_ranks > nb:
        raise ValueError(f"{n_ranks} ranks exceed the {nb} relevant level-{tree.depth} boxes")
    cum = np.r_[0, np.cumsum(lv.count)]
    n = cum[-1]
    bounds = np.empty(n_ranks + 1, np.int64)
    bounds[0], bounds[-1] = 0, nb
    for r in range(1, n_ranks):
        target = r * n / n_ranks
        k = int(np.searchsorted(cum, target))
        # nearest box boundary to the target population
        if k > 0 and (k > nb or target - cum[k - 1] <= cum[k] - target):
            k -= 1
        bounds[r] = min(max(k, bounds[r - 1] + 1), nb - (n_ranks - r))
    point_bounds = cum[bounds].astype(np.int64)
    cone_bounds = {}
    for d in cones.levels:
        m = cones.count(d)
        cone_bounds[d] = (np.arange(n_ranks + 1, dtype=np.int64) * m) // n_ranks
    return RankLayout(n_ranks, bounds, point_bounds, cone_bounds)


@dataclass
class CommStats:
    """Cross-rank block fetches and per-cone destination fan-out per level."""

    interp_fetched: dict = field(default_factory=dict)
    prop_fetched: dict = field(default_factory=dict)
    interp_fanout: dict = field(default_factory=dict)  # level -> per-cone distinct requester count
    prop_fanout: dict = field(default_factory=dict)
    cache_ratio: dict = field(default_factory=dict)  # level -> max over ranks of cached/owned blocks

    def _bump(self, kind, d, cone, n_cones):
        fetched = self.interp_fetched if kind == "interp" else self.prop_fetched
        fan = self.interp_fanout if kind == "interp" else self.prop_fanout
        fetched[d] = fetched.get(d, 0) + 1
        if d not in fan:
            fan[d] = np.zeros(n_cones, np.int64)
        fan[d][cone] += 1

    @property
    def total_fetched(self):
        return sum(self.interp_fetched.values()) + sum(self.prop_fetched.values())

    def max_interp_fanout(self, d=None):
        if d is not None:
            fans = [self.interp_fanout[d]] if d in self.interp_fanout else []
        else:
            fans = list(self.interp_fanout.values())
        return max((int(f.max()) for f in fans if f.size), default=0)

    def max_prop_fanout(self):
        return max((int(f.max()) for f in self.prop_fanout.values() if f.size), default=0)

    def to_dict(self):
        levels = sorted(set(self.interp_fetched) | set(self.prop_fetched) | set(self.cache_ratio))
        return {
            "total_blocks_fetched": self.total_fetched,
            "max_interp_fanout": self.max_interp_fanout(),
            "max_prop_fanout": self.max_prop_fanout(),
            "levels": {
                str(d): {
                    "interp_fetched": self.interp_fetched.get(d, 0),
                    "prop_fetched": self.prop_fetched.get(d, 0),
                    "max_interp_fanout": int(self.interp_fanout[d].max()) if d in self.interp_fanout else 0,
                    "max_prop_fanout": int(self.prop_fanout[d].max()) if d in self.prop_fanout else 0,
                    "max_cache_ratio": self.cache_ratio.get(d, 0.0),
                }
                for d in levels
            },
        }


class Window:
    """Published, immutable coefficient blocks of one level, one slot per rank."""

    def __init__(self, layout, d, n_cones):
        self.layout = layout
        self.d = d
        self.n_cones = n_cones
        self._blocks = [None] * layout.n_ranks
        self._fenced = [False] * layout.n_ranks
        self.epoch = 0

    def publish(self, rank, blocks):
        if self._fenced[rank]:
            raise SynchronizationError(f"rank {rank} already fenced level {self.d}")
        lo, hi = self.layout.cone_range(self.d, rank)
        if blocks.shape[0] != hi - lo:
            raise ValueError(f"rank {rank} owns {hi - lo} cones on level {self.d}, got {blocks.shape[0]} blocks")
        blocks = np.array(blocks, copy=True)
        blocks.setflags(write=False)
        self._blocks[rank] = blocks

    def fence(self, rank):
        if self._blocks[rank] is None:
            raise SynchronizationError(f"rank {rank} fenced level {self.d} before publishing")
        self._fenced[rank] = True
        if all(self._fenced):
            self.epoch += 1

    def owned(self, rank):
        """The rank's own blocks (no communication)."""
        if self._blocks[rank] is None:
            raise SynchronizationError(f"rank {rank} has not published level {self.d}")
        return self._blocks[rank]

    def get(self, requester, key, stats=None, kind="interp"):
        """One-sided read of a block by cone position or :class:`ConeKey` position."""
        cone = int(key)
        owner = int(self.layout.owners(self.d, cone))
        if not self._fenced[owner]:
            raise SynchronizationError(f"level {self.d} of rank {owner} read before its fence")
        lo, _ = self.layout.cone_range(self.d, owner)
        if owner != requester and stats is not None:
            stats._bump(kind, self.d, cone, self.n_cones)
        return self._blocks[owner][cone - lo]


def window_get(window, from_rank, key, stats, requester, cones=None):
    """Fetch the block of ``key`` (a cone position or a :class:`ConeKey`)."""
    if isinstance(key, ConeKey):
        if cones is None:
            raise ValueError("resolving a ConeKey needs the relevant cone set")
        pos = cones.index_of(key)
        if pos < 0:
            raise KeyError(f"{key} is not a relevant cone")
        key = pos
    owner = int(window.layout.owners(window.d, int(key)))
    if owner != from_rank:
        raise ValueError(f"cone {key} is owned by rank {owner}, not {from_rank}")
    return window.get(requester, key, stats)


class _LocalStore:
    """A rank's owned blocks plus its one-level cache of fetched blocks."""

    def __init__(self, own, own_lo, n_cones, cached_cones, cached_blocks):
        self.blocks = np.concatenate([own, cached_blocks]) if cached_blocks.shape[0] else own
        self.rows = np.full(n_cones, -1, np.int64)
        self.rows[own_lo:own_lo + own.shape[0]] = np.arange(own.shape[0])
        self.rows[cached_cones] = own.shape[0] + np.arange(cached_cones.size)


def _fetch(window, rank, needed, stats, kind, P):
    """Fetch the foreign blocks among ``needed`` cone positions (deduplicated)."""
    lo, hi = window.layout.cone_range(window.d, rank)
    foreign = np.flatnonzero(needed)
    foreign = foreign[(foreign < lo) | (foreign >= hi)]
    out = np.empty((foreign.size, P), np.complex128)
    for j, c in enumerate(foreign):
        out[j] = window.get(rank, c, stats, kind)
    return foreign, out


def interpolation_needs(op, d, i0, i1):
    """Mask of level-``d`` cones read by the interpolation of points [i0, i1)."""
    la = op.levels[d]
    ns, nt, npp, ws, wt, wp, smax = la.grid
    mask = np.zeros(op.cones.count(d), np.bool_)
    bad = _interp_needs(i0, i1, la.point_box, la.cousin_ptr, la.cousin_idx, la.centers, la.h,
                        ns, nt, npp, ws, wt, wp, smax, la.tk, la.tv, la.n_per_box,
                        op.pc.x1, op.pc.x2, op.pc.x3, mask)
    if bad:
        raise engine.CoverageError(f"{bad} cousin points on level {d} have no relevant cone")
    return mask


def propagation_needs(op, d, c0, c1):
    """Mask of level-``d`` cones read when computing parent cones [c0, c1)."""
    child = op.levels[d]
    par = op.levels[d - 1]
    ts, tt, tp = op.spec.reference_nodes()
    _, pnt, pnpp, pws, pwt, pwp, _ = par.grid
    ns, nt, npp, ws, wt, wp, smax = child.grid
    mask = np.zeros(op.cones.count(d), np.bool_)
    bad = _prop_needs(c0, c1, par.cone_box, par.cone_gamma, par.centers, par.h, pnt, pnpp, pws, pwt, pwp,
                      par.child_start, child.centers, child.h, ns, nt, npp, ws, wt, wp, smax,
                      child.tk, child.tv, child.n_per_box, ts, tt, tp, mask)
    if bad:
        raise engine.CoverageError(f"{bad} parent nodes on level {d - 1} have no relevant child cone")
    return mask


@dataclass
class DistResult:
    values: np.ndarray
    stats: CommStats
    layout: RankLayout
    timings: dict
    depth: int


def run_distributed(pc, cfg, params=None, n_ranks=1, threads=None, op=None):
    """Evaluate the operator with ``n_ranks`` simulated ranks.

    Stage order per rank: level-D evaluation, propagation-data exchange for
    level D, then for d = D..3 the interpolation-data exchange, propagation
    (d > 3), the propagation-data exchange for level d - 1 (d > 4) and the
    interpolation. Fetched blocks live for one level.
    """
    op = op or engine.IFGFOperator(pc, cfg, params)
    layout = partition(op.tree, op.cones, n_ranks)
    stats = CommStats()
    R = layout.n_ranks
    D = op.depth
    P = op.spec.P
    a = op.sorted_coefficients()
    timings = dict.fromkeys(("singular", "level_d", "comm", "propagation", "interpolation"), 0.0)
    results = [None] * R

    def tick(stage, t):
        timings[stage] += time.perf_counter() - t

    with engine.execution_units(threads if threads is not None else op.params.threads):
        t = time.perf_counter()
        for r in range(R):
            i0, i1 = layout.point_range(r)
            results[r] = engine.singular_interactions(op, a, i0, i1)
        tick("singular", t)
        if D >= 3:
            t = time.perf_counter()
            win = Window(layout, D, op.cones.count(D))
            for r in range(R):
                c0, c1 = layout.cone_range(D, r)
                win.publish(r, engine.level_d_evaluations(op, a, c0, c1))
                win.fence(r)
            tick("level_d", t)
            prop_cache = _comm_prop(op, layout, win, stats, P) if D > 3 else None
            for d in range(D, 2, -1):
                t = time.perf_counter()
                interp_cache = _comm_interp(op, layout, win, d, stats, P)
                tick("comm", t)
                stats.cache_ratio[d] = max(
                    _ratio(interp_cache[r][0].size + (prop_cache[r][0].size if prop_cache else 0),
                           layout.cone_range(d, r)) for r in range(R))
                if d > 3:
                    t = time.perf_counter()
                    parent = Window(layout, d - 1, op.cones.count(d - 1))
                    for r in range(R):
                        store = _LocalStore(win.owned(r), layout.cone_range(d, r)[0], win.n_cones, *prop_cache[r])
                        c0, c1 = layout.cone_range(d - 1, r)
                        parent.publish(r, engine.propagation_pass(op, d, store.blocks, store.rows, c0, c1))
                    for r in range(R):
                        parent.fence(r)
                    tick("propagation", t)
                    prop_cache = None
                    if d > 4:
                        t = time.perf_counter()
                        prop_cache = _comm_prop(op, layout, parent, stats, P)
                        tick("comm", t)
                t = time.perf_counter()
                for r in range(R):
                    store = _LocalStore(win.owned(r), layout.cone_range(d, r)[0], win.n_cones, *interp_cache[r])
                    i0, i1 = layout.point_range(r)
                    results[r] += engine.interpolation_pass(op, d, store.blocks, store.rows, i0, i1)
                tick("interpolation", t)
                del interp_cache
                if d > 3:
                    win = parent
    timings["total"] = sum(timings.values())
    return DistResult(op.to_original(np.concatenate(results)), stats, layout, timings, D)


def _ratio(n_cached, own_range):
    n_own = own_range[1] - own_range[0]
    return n_cached / n_own if n_own else float(n_cached > 0)


def _comm_interp(op, layout, win, d, stats, P):
    caches = []
    for r in range(layout.n_ranks):
        i0, i1 = layout.point_range(r)
        caches.append(_fetch(win, r, interpolation_needs(op, d, i0, i1), stats, "interp", P))
    return caches


def _comm_prop(op, layout, win, stats, P):
    d = win.d
    caches = []
    for r in range(layout.n_ranks):
        c0, c1 = layout.cone_range(d - 1, r)
        caches.append(_fetch(win, r, propagation_needs(op, d, c0, c1), stats, "prop", P))
    return caches


@numba.njit(cache=True)
def _interp_needs(i0, i1, point_box, cptr, cidx, centers, h, ns, nt, npp, ws, wt, wp, smax,
                  tk, tv, n_per_box, x1, x2, x3, mask):
    bad = 0
    for i in range(i0, i1):
        b = point_box[i]
        for q in range(cptr[b], cptr[b + 1]):
            c = cidx[q]
            g, _, _, _, _ = locate(x1[i] - centers[c, 0], x2[i] - centers[c, 1], x3[i] - centers[c, 2],
                                   h, ns, nt, npp, ws, wt, wp, smax)
            cone = lookup(tk, tv, c * n_per_box + g) if g >= 0 else -1
            if cone < 0:
                bad += 1
            else:
                mask[cone] = True
    return bad


@numba.njit(cache=True)
def _prop_needs(c0, c1, pcone_box, pcone_gamma, pcenters, ph, pnt, pnpp, pws, pwt, pwp,
                child_start, ccenters, ch, ns, nt, npp, ws, wt, wp, smax, tk, tv, n_per_box, ts, tt, tp, mask):
    bad = 0
    for q in range(c0, c1):
        j = pcone_box[q]
        pg = pcone_gamma[q]
        for k in range(child_start[j], child_start[j + 1]):
            sx = pcenters[j, 0] - ccenters[k, 0]
            sy = pcenters[j, 1] - ccenters[k, 1]
            sz = pcenters[j, 2] - ccenters[k, 2]
            for ia in range(ts.size):
                for ib in range(tt.size):
                    for ic in range(tp.size):
                        ox, oy, oz = node_offset(pg, ia, ib, ic, ph, pnt, pnpp, pws, pwt, pwp, ts, tt, tp)
                        g, _, _, _, _ = locate(ox + sx, oy + sy, oz + sz, ch, ns, nt, npp, ws, wt, wp, smax)
                        cone = lookup(tk, tv, k * n_per_box + g) if g >= 0 else -1
                        if cone < 0:
                            bad += 1
                        else:
                            mask[cone] = True
    return bad
