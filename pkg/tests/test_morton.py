import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ifgf import PointCloud, bounding_cube
from ifgf import morton


def reference_encode(i, j, k, bits=21):
    code = 0
    for b in range(bits):
        code |= ((i >> b) & 1) << (3 * b)
        code |= ((j >> b) & 1) << (3 * b + 1)
        code |= ((k >> b) & 1) << (3 * b + 2)
    return code


def test_examples():
    assert morton.encode((0, 0, 0), 5) == 0
    assert morton.encode((1, 1, 1), 2) == 7
    assert morton.encode((2, 0, 0), 3) == 8
    assert morton.decode(0) == (0, 0, 0)
    assert morton.decode(7, 2) == (1, 1, 1)


def test_exhaustive_level_4():
    codes = set()
    for k in itertools.product(range(8), repeat=3):
        c = morton.encode(k, 4)
        assert c == reference_encode(*k)
        assert morton.decode(c, 4) == k
        codes.add(c)
    assert codes == set(range(512))


def test_parent_is_shift():
    for k in itertools.product(range(8), repeat=3):
        parent = tuple(v >> 1 for v in k)
        assert morton.encode(k, 4) >> 3 == morton.encode(parent, 3)


def test_out_of_range():
    with pytest.raises(ValueError):
        morton.encode((2, 0, 0), 2)
    with pytest.raises(ValueError):
        morton.encode((0, 0, 0), 22)
    with pytest.raises(ValueError):
        morton.decode(8, 2)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**20 - 1), st.integers(0, 2**20 - 1), st.integers(0, 2**20 - 1))
def test_roundtrip_deep(i, j, k):
    c = morton.encode((i, j, k), 21)
    assert c == reference_encode(i, j, k)
    assert morton.decode(c, 21) == (i, j, k)


def test_sorted_cloud_identity_permutation():
    pts = np.array([[0.1, 0.1, 0.1], [0.9, 0.1, 0.1], [0.1, 0.9, 0.1], [0.9, 0.9, 0.9]])
    pc = PointCloud.from_arrays(pts)
    perm = morton.sort_points(pc, bounding_cube(pc), 3)
    assert np.array_equal(perm, np.arange(4))


def test_sort_is_stable():
    pts = np.array([[0.9, 0.9, 0.9], [0.1, 0.1, 0.1], [0.11, 0.1, 0.1], [0.1, 0.12, 0.1]])
    pc = PointCloud.from_arrays(pts)
    perm = morton.sort_points(pc, bounding_cube(pc), 3)
    assert list(perm) == [1, 2, 3, 0]


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), depth=st.integers(3, 8))
def test_sort_makes_boxes_contiguous(seed, depth):
    rng = np.random.default_rng(seed)
    pc = PointCloud.from_arrays(rng.random((500, 3)))
    orig = pc.points
    cube = bounding_cube(pc)
    perm = morton.sort_points(pc, cube, depth)
    assert np.array_equal(pc.points, orig[perm])
    codes = morton.point_codes(pc.x1, pc.x2, pc.x3, cube.origin, cube.side(depth), 1 << (depth - 1))
    assert np.all(np.diff(codes) >= 0)
    # each box appears as one run
    runs = codes[np.r_[True, codes[1:] != codes[:-1]]]
    assert runs.size == np.unique(codes).size


def test_sort_rejects_outside_points():
    pc = PointCloud.from_arrays([[0, 0, 0], [1, 1, 1]])
    cube = bounding_cube(PointCloud.from_arrays([[0, 0, 0], [0.5, 0.5, 0.5]]))
    with pytest.raises(ValueError):
        morton.sort_points(pc, cube, 3)
