"""Linear octree over relevant boxes (boxes holding at least one point).

Each level stores only its relevant boxes, sorted by Morton code, together
with a hash index from code to position. Because the points are sorted by
their level-D code, every relevant box owns a contiguous point interval and
the children of a box form a contiguous run on the next level.
"""

from functools import cached_property
from typing import NamedTuple

import numba
import numpy as np

from . import morton
from ._hashmap import HashIndex, lookup


class BoxRecord(NamedTuple):
    first_point: int
    point_count: int
    center: tuple


class Level:
    """Relevant boxes of one octree level, in Morton order."""

    def __init__(self, d, codes, first, count, cube):
        self.d = d
        self.codes = codes
        self.first = first
        self.count = count
        self.h = cube.side(d)
        idx = morton.decode_array(codes).astype(np.float64)
        self.centers = np.asarray(cube.origin) + (idx + 0.5) * self.h
        self.index = HashIndex(codes)
        self.parent = None  # box index on level d - 1
        self.child_start = None  # children of box b: [child_start[b], child_start[b+1]) on level d + 1

    @property
    def n_boxes(self):
        return self.codes.size

    @cached_property
    def point_box(self):
        """Box index of every (sorted) point on this level."""
        return np.repeat(np.arange(self.n_boxes, dtype=np.int64), self.count)

    @cached_property
    def neighbor_lists(self):
        """CSR (ptr, idx) of relevant neighbors per box, self included."""
        return _neighbor_csr(self.codes, self.index.table_keys, self.index.table_values, self.n_side)

    @cached_property
    def cousin_lists(self):
        """CSR (ptr, idx) of relevant cousin boxes per box."""
        return _cousin_csr(self.codes, self.index.table_keys, self.index.table_values, self.n_side)

    @property
    def n_side(self):
        return 1 << (self.d - 1)


class LinearOctree:
    """Uniform-depth octree keeping only relevant boxes on levels 1..D."""

    def __init__(self, levels, cube, depth, coords):
        self._levels = levels
        self.cube = cube
        self.depth = depth
        # read-only views of the sorted point coordinates
        self.x1, self.x2, self.x3 = coords

    def level(self, d):
        if not 1 <= d <= self.depth:
            raise ValueError(f"level {d} outside [1, {self.depth}]")
        return self._levels[d - 1]

    def side(self, d):
        return self.cube.side(d)

    @property
    def n_points(self):
        return int(self._levels[0].count.sum())

    def total_boxes(self):
        return sum(lv.n_boxes for lv in self._levels)

    # Box-level queries, keyed by Morton code

    def _box_index(self, code, d):
        i = self.level(d).index.get(code)
        if i is None:
            raise KeyError(f"box {code} is not relevant on level {d}")
        return i

    def box(self, code, d):
        lv = self.level(d)
        i = self._box_index(code, d)
        return BoxRecord(int(lv.first[i]), int(lv.count[i]), tuple(lv.centers[i]))

    def is_relevant(self, code, d):
        return code in self.level(d).index

    def relevant_codes(self, d):
        return [int(c) for c in self.level(d).codes]

    def box_of_point(self, x, d):
        """Morton code of the level-``d`` box containing ``x``."""
        x = np.asarray(x, dtype=float)
        if not self.cube.contains(x)[0]:
            raise ValueError(f"point {tuple(x)} is outside the bounding cube")
        lv = self.level(d)
        k = np.floor((x - np.asarray(self.cube.origin)) / lv.h).astype(np.int64)
        k = np.minimum(k, lv.n_side - 1)
        return morton.encode(k, d)

    def parent(self, code, d):
        if d < 2:
            raise ValueError("level-1 box has no parent")
        self._box_index(code, d)
        return int(code) >> 3

    def children(self, code, d):
        if d >= self.depth:
            raise ValueError("boxes on the finest level have no children")
        lv = self.level(d)
        i = self._box_index(code, d)
        lo, hi = lv.child_start[i], lv.child_start[i + 1]
        return [int(c) for c in self.level(d + 1).codes[lo:hi]]

    def neighbors(self, code, d):
        lv = self.level(d)
        i = self._box_index(code, d)
        ptr, idx = lv.neighbor_lists
        return [int(c) for c in lv.codes[idx[ptr[i]:ptr[i + 1]]]]

    def cousins(self, code, d):
        lv = self.level(d)
        i = self._box_index(code, d)
        ptr, idx = lv.cousin_lists
        return [int(c) for c in lv.codes[idx[ptr[i]:ptr[i + 1]]]]


def build(pc, cube, depth):
    """Build the linear octree of a Morton-sorted point cloud."""
    if not 1 <= depth <= morton.MAX_LEVEL:
        raise ValueError(f"depth must be in [1, {morton.MAX_LEVEL}]")
    codes = morton.point_codes(pc.x1, pc.x2, pc.x3, cube.origin, cube.side(depth), 1 << (depth - 1))
    if codes.size > 1 and np.any(np.diff(codes) < 0):
        raise ValueError("point cloud is not Morton-sorted at the requested depth; call morton.sort_points first")

    starts = np.flatnonzero(np.r_[True, codes[1:] != codes[:-1]])
    box_codes = codes[starts]
    first = starts.astype(np.int64)
    count = np.diff(np.r_[first, codes.size]).astype(np.int64)
    levels = [None] * depth
    levels[depth - 1] = Level(depth, box_codes, first, count, cube)
    for d in range(depth - 1, 0, -1):
        child = levels[d]
        pcodes = child.codes >> 3
        runs = np.flatnonzero(np.r_[True, pcodes[1:] != pcodes[:-1]])
        lv = Level(d, pcodes[runs], child.first[runs], np.add.reduceat(child.count, runs), cube)
        lv.child_start = np.r_[runs, child.n_boxes].astype(np.int64)
        child.parent = np.repeat(np.arange(runs.size, dtype=np.int64), np.diff(lv.child_start))
        levels[d - 1] = lv
    return LinearOctree(levels, cube, depth, (pc.x1, pc.x2, pc.x3))


@numba.njit(cache=True)
def _neighbor_csr(codes, tk, tv, n):
    nb = codes.size
    tmp = np.full((nb, 27), -1, np.int64)
    cnt = np.zeros(nb, np.int64)
    for b in range(nb):
        i, j, k = morton.decode3(codes[b])
        c = 0
        for di in range(-1, 2):
            for dj in range(-1, 2):
                for dk in range(-1, 2):
                    a, bb, cc = i + di, j + dj, k + dk
                    if a < 0 or bb < 0 or cc < 0 or a >= n or bb >= n or cc >= n:
                        continue
                    v = lookup(tk, tv, morton.encode3(a, bb, cc))
                    if v >= 0:
                        tmp[b, c] = v
                        c += 1
        tmp[b, :c] = np.sort(tmp[b, :c])
        cnt[b] = c
    return _compress(tmp, cnt)


@numba.njit(cache=True)
def _cousin_csr(codes, tk, tv, n):
    nb = codes.size
    cnt = np.zeros(nb, np.int64)
    tmp = np.full((nb, 189), -1, np.int64)
    for b in range(nb):
        i, j, k = morton.decode3(codes[b])
        pi, pj, pk = i >> 1, j >> 1, k >> 1
        c = 0
        for di in range(-1, 2):
            for dj in range(-1, 2):
                for dk in range(-1, 2):
                    qi, qj, qk = pi + di, pj + dj, pk + dk
                    if qi < 0 or qj < 0 or qk < 0 or 2 * qi >= n or 2 * qj >= n or 2 * qk >= n:
                        continue
                    for ci in range(2 * qi, 2 * qi + 2):
                        for cj in range(2 * qj, 2 * qj + 2):
                            for ck in range(2 * qk, 2 * qk + 2):
                                if abs(ci - i) <= 1 and abs(cj - j) <= 1 and abs(ck - k) <= 1:
                                    continue
                                v = lookup(tk, tv, morton.encode3(ci, cj, ck))
                                if v >= 0:
                                    tmp[b, c] = v
                                    c += 1
        tmp[b, :c] = np.sort(tmp[b, :c])
        cnt[b] = c
    return _compress(tmp, cnt)


@numba.njit(cache=True)
def _compress(tmp, cnt):
    ptr = np.zeros(cnt.size + 1, np.int64)
    for b in range(cnt.size):
        ptr[b + 1] = ptr[b] + cnt[b]
    idx = np.empty(ptr[-1], np.int64)
    for b in range(cnt.size):
        idx[ptr[b]:ptr[b + 1]] = tmp[b, :cnt[b]]
    return ptr, idx
