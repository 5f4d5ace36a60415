import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ifgf import bounding_cube, generate_surface, morton, octree
from ifgf.cones import (
    S_MAX,
    ConeGridSpec,
    ConeKey,
    compute_relevant_cones,
    cone_coords,
    cone_of_point,
    cone_order_key,
    interpolation_nodes,
    local_coords,
)

from conftest import random_cloud


def setup(pc, depth, **kw):
    cube = bounding_cube(pc)
    morton.sort_points(pc, cube, depth)
    tree = octree.build(pc, cube, depth)
    spec = ConeGridSpec(depth, **kw)
    return tree, spec, compute_relevant_cones(tree, spec)


def test_cone_coords_examples():
    h = 0.4
    s, th, ph = cone_coords([0, 0, 0], h, [0, 0, 1.5 * h])
    assert s == pytest.approx(np.sqrt(3) / 3, rel=1e-15) and s == pytest.approx(S_MAX, rel=1e-15)
    assert th == 0.0
    s, _, _ = cone_coords([0, 0, 0], h, [1e12, 0, 0])
    assert s < 1e-12
    with pytest.raises(ValueError):
        cone_coords([1, 1, 1], h, [1, 1, 1])


def test_grid_counts_double_upward():
    spec = ConeGridSpec(6)
    assert spec.counts(6) == (1, 2, 4)
    for d in range(3, 6):
        assert spec.counts(d) == tuple(2 * c for c in spec.counts(d + 1))
    assert spec.P == 75


def test_cone_of_point_examples():
    spec = ConeGridSpec(5)
    h = 1.0
    (s0, _), (t0, _), (p0, _) = spec.segment_bounds((0, 1, 2), 5)
    r = np.sqrt(3) * h / (2 * (s0 + 0.5 * spec.widths(5)[0]))
    x = r * np.array([np.sin(t0) * np.cos(p0), np.sin(t0) * np.sin(p0), np.cos(t0)])
    assert cone_of_point([0, 0, 0], h, 5, x, spec) == (0, 1, 2)
    a = cone_of_point([0, 0, 0], h, 4, [3.0, 1.0, 0.5], spec)
    b = cone_of_point([0, 0, 0], h, 4, [-3.0, -1.0, -0.5], spec)
    assert abs(a[2] - b[2]) == spec.counts(4)[2] // 2
    with pytest.raises(ValueError, match="neighbor zone"):
        cone_of_point([0, 0, 0], h, 5, [0.5, 0.5, 0.5], spec)


def test_nodes_inside_segment():
    spec = ConeGridSpec(6)
    for gamma in [(0, 0, 0), (1, 2, 5), (0, 3, 7)]:
        nodes = interpolation_nodes([0.1, -0.2, 0.3], 0.25, gamma, 4, spec)
        assert nodes.shape == (75, 3)
        for x in nodes:
            assert cone_of_point([0.1, -0.2, 0.3], 0.25, 4, x, spec) == gamma
            u = local_coords([0.1, -0.2, 0.3], 0.25, x, gamma, 4, spec)
            assert np.all(np.abs(u) < 1.0)
        s = np.array([cone_coords([0.1, -0.2, 0.3], 0.25, x)[0] for x in nodes[::25]])
        (s0, s1), _, _ = spec.segment_bounds(gamma, 4)
        assert np.allclose(np.sort(s - 0.5 * (s0 + s1)), -np.sort(s - 0.5 * (s0 + s1))[::-1], atol=1e-14)


def test_order_key():
    a = ConeKey(5, (0, 1, 2), 4)
    b = ConeKey(5, (0, 1, 3), 4)
    c = ConeKey(4, (1, 3, 7), 4)
    assert cone_order_key(a) < cone_order_key(b)
    assert cone_order_key(c) < cone_order_key(a)
    cones = [b, a, c, a, b]
    once = sorted(set(sorted(cones, key=cone_order_key)), key=cone_order_key)
    assert sorted(set(once), key=cone_order_key) == once == [c, a, b]


def test_boxes_without_cousins_have_no_cones():
    from ifgf import PointCloud

    tree, spec, cones = setup(PointCloud.from_arrays([[0.3, 0.1, 0.2]]), 4)
    assert cones.count(3) == 0 and cones.count(4) == 0


def test_approximately_constant_count_per_level():
    pc = generate_surface("sphere", 1.0, 40)
    tree, spec, cones = setup(pc, 6)
    counts = [cones.count(d) for d in range(4, 7)]
    assert max(counts) / min(counts) < 3.0


def test_cone_keys_in_order_and_indexed():
    pc = random_cloud(500, 2)
    tree, spec, cones = setup(pc, 5)
    for d in cones.levels:
        keys = cones.cone_keys(d)
        assert keys == sorted(keys, key=cone_order_key)
        assert len(set(keys)) == len(keys)
        for i, k in enumerate(keys[::17]):
            assert cones.index_of(k) == 17 * i
    assert cones.index_of(ConeKey(10**9, (0, 0, 0), 5)) == -1


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), depth=st.integers(3, 5))
def test_coverage(seed, depth):
    """Every cousin point and every parent node lands in a relevant cone (Python oracle)."""
    pc = random_cloud(250, seed)
    tree, spec, cones = setup(pc, depth)
    p = pc.points
    rng = np.random.default_rng(seed)
    for d in range(3, depth + 1):
        lv = tree.level(d)
        cptr, cidx = lv.cousin_lists
        relevant = set(cones.cone_keys(d))
        for b in range(lv.n_boxes):
            for c in cidx[cptr[b]:cptr[b + 1]]:
                for i in range(lv.first[b], lv.first[b] + lv.count[b]):
                    g = cone_of_point(lv.centers[c], lv.h, d, p[i], spec)
                    assert ConeKey(int(lv.codes[c]), g, d) in relevant
        if d > 3:
            plv = tree.level(d - 1)
            for key in cones.cone_keys(d - 1)[:: max(1, cones.count(d - 1) // 15)]:
                j = plv.index.get(key.box)
                nodes = cones.nodes(key)[rng.permutation(spec.P)[:10]]
                for k in range(plv.child_start[j], plv.child_start[j + 1]):
                    for x in nodes:
                        g = cone_of_point(lv.centers[k], lv.h, d, x, spec)
                        assert ConeKey(int(lv.codes[k]), g, d) in relevant


def test_first_clause_cone_is_relevant():
    pc = random_cloud(300, 8)
    tree, spec, cones = setup(pc, 4)
    lv = tree.level(4)
    cptr, cidx = lv.cousin_lists
    b = int(np.argmax(np.diff(cptr)))
    c = cidx[cptr[b]]
    x = pc.points[lv.first[b]]
    g = cone_of_point(lv.centers[c], lv.h, 4, x, spec)
    assert cones.is_relevant(ConeKey(int(lv.codes[c]), g, 4))
