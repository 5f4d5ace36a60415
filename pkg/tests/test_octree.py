import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ifgf import PointCloud, bounding_cube, generate_surface, morton, octree

from conftest import random_cloud


def built(pc, depth):
    cube = bounding_cube(pc)
    morton.sort_points(pc, cube, depth)
    return octree.build(pc, cube, depth)


def uniform_grid_cloud(n_side):
    """One point per level-``log2(n_side)+1`` box on a full grid."""
    t = (np.arange(n_side) + 0.5) / n_side
    p = np.array(list(itertools.product(t, t, t)))
    # pin the extent to [0, 1] so the boxes align with the grid
    p = np.vstack([p, [[0, 0, 0], [1, 1, 1]]])
    return PointCloud.from_arrays(p)


def test_single_point():
    tree = built(PointCloud.from_arrays([[0.2, 0.3, 0.4]]), 5)
    for d in range(1, 6):
        lv = tree.level(d)
        assert lv.n_boxes == 1 and lv.first[0] == 0 and lv.count[0] == 1


def test_root_holds_everything():
    pc = generate_surface("sphere", 1.0, 10)
    tree = built(pc, 5)
    rec = tree.box(0, 1)
    assert (rec.first_point, rec.point_count) == (0, pc.n)
    assert np.allclose(rec.center, np.asarray(tree.cube.origin) + 0.5 * tree.cube.h1)


def test_level3_at_most_64_boxes():
    tree = built(generate_surface("sphere", 1.0, 30), 6)
    assert tree.level(3).n_boxes <= 64


def test_unsorted_rejected():
    pc = PointCloud.from_arrays([[0.9, 0.9, 0.9], [0.0, 0.0, 0.0]])
    with pytest.raises(ValueError, match="sorted"):
        octree.build(pc, bounding_cube(pc), 3)


def test_box_of_point_examples():
    pc = PointCloud.from_arrays([[0, 0, 0], [1, 1, 1]])
    tree = built(pc, 4)
    origin = tree.cube.origin
    for d in range(1, 5):
        assert tree.box_of_point(origin, d) == 0
    center = np.asarray(origin) + 0.5 * tree.cube.h1
    assert tree.box_of_point(center, 2) == 7
    with pytest.raises(ValueError):
        tree.box_of_point(np.asarray(origin) - 1.0, 2)


def test_box_of_point_parent_consistency():
    pc = random_cloud(400, 3)
    tree = built(pc, 6)
    for x in pc.points[::7]:
        for d in range(2, 6):
            assert tree.box_of_point(x, d + 1) >> 3 == tree.box_of_point(x, d)


def test_interior_box_has_27_neighbors():
    tree = built(uniform_grid_cloud(8), 4)
    assert len(tree.neighbors(morton.encode((3, 3, 3), 4), 4)) == 27
    assert len(tree.neighbors(0, 4)) == 8


def test_full_level3_neighbors_and_cousins_cover_all():
    tree = built(uniform_grid_cloud(4), 3)
    assert tree.level(3).n_boxes == 64
    for code in tree.relevant_codes(3):
        nb, co = set(tree.neighbors(code, 3)), set(tree.cousins(code, 3))
        assert not nb & co
        assert nb | co == set(range(64))


def test_max_cousin_count_is_189():
    tree = built(uniform_grid_cloud(16), 5)
    counts = [len(tree.cousins(c, 5)) for c in tree.relevant_codes(5)]
    assert max(counts) == 189


def test_children():
    pc = PointCloud.from_arrays([[0.1, 0.1, 0.1], [0.9, 0.9, 0.9]])
    tree = built(pc, 4)
    for code in tree.relevant_codes(2):
        kids = tree.children(code, 2)
        assert len(kids) == 1 and kids[0] >> 3 == code
    with pytest.raises(ValueError):
        tree.children(0, 4)


def test_lists_are_morton_sorted():
    tree = built(random_cloud(800, 9), 5)
    for code in tree.relevant_codes(5)[::11]:
        for lst in (tree.neighbors(code, 5), tree.cousins(code, 5)):
            assert lst == sorted(lst)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), depth=st.integers(3, 6))
def test_structural_invariants(seed, depth):
    pc = random_cloud(600, seed)
    tree = built(pc, depth)
    n = pc.n
    total = 0
    for d in range(1, depth + 1):
        lv = tree.level(d)
        total += lv.n_boxes
        # interval partition
        assert lv.first[0] == 0
        assert np.all(lv.count > 0)
        assert np.array_equal(lv.first[1:], lv.first[:-1] + lv.count[:-1])
        assert lv.first[-1] + lv.count[-1] == n
        assert np.all(np.diff(lv.codes) > 0)
        # points inside their half-open box
        lo = lv.centers[lv.point_box] - 0.5 * lv.h
        p = pc.points
        assert np.all(p >= lo - 1e-12 * tree.cube.h1) and np.all(p < lo + lv.h + 1e-12 * tree.cube.h1)
        if d >= 2:
            assert np.all(np.isin(lv.codes >> 3, tree.level(d - 1).codes))
        if d < depth:
            kids = tree.level(d + 1)
            for b in range(lv.n_boxes):
                lo_, hi_ = lv.child_start[b], lv.child_start[b + 1]
                assert kids.first[lo_] == lv.first[b]
                assert kids.count[lo_:hi_].sum() == lv.count[b]
    assert total <= n * depth
    if depth >= 3:
        lv = tree.level(depth)
        nptr, nidx = lv.neighbor_lists
        cptr, cidx = lv.cousin_lists
        for b in range(lv.n_boxes):
            nb = set(nidx[nptr[b]:nptr[b + 1]])
            co = set(cidx[cptr[b]:cptr[b + 1]])
            assert b in nb and not nb & co
            assert len(co) <= 189


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_neighbor_and_cousin_definitions_brute_force(seed):
    pc = random_cloud(300, seed)
    tree = built(pc, 4)
    codes = tree.relevant_codes(4)
    idx = {c: np.array(morton.decode(c, 4)) for c in codes}
    for c in codes:
        k = idx[c]
        nb = [b for b in codes if np.max(np.abs(idx[b] - k)) <= 1]
        co = [b for b in codes if np.max(np.abs(idx[b] - k)) > 1 and np.max(np.abs(idx[b] // 2 - k // 2)) <= 1]
        assert tree.neighbors(c, 4) == nb
        assert tree.cousins(c, 4) == co
        for b in nb:
            assert c in tree.neighbors(b, 4)


def test_each_pair_interacts_exactly_once():
    """Each point pair is a cousin pair on exactly one level or a level-D neighbor pair."""
    pc = random_cloud(200, 4)
    depth = 5
    tree = built(pc, depth)
    n = pc.n
    seen = np.zeros((n, n), np.int64)
    for d in range(3, depth + 1):
        lv = tree.level(d)
        cptr, cidx = lv.cousin_lists
        for b in range(lv.n_boxes):
            tgt = slice(lv.first[b], lv.first[b] + lv.count[b])
            for c in cidx[cptr[b]:cptr[b + 1]]:
                seen[tgt, lv.first[c]:lv.first[c] + lv.count[c]] += 1
    lv = tree.level(depth)
    nptr, nidx = lv.neighbor_lists
    for b in range(lv.n_boxes):
        tgt = slice(lv.first[b], lv.first[b] + lv.count[b])
        for c in nidx[nptr[b]:nptr[b + 1]]:
            seen[tgt, lv.first[c]:lv.first[c] + lv.count[c]] += 1
    assert np.all(seen == 1)
