"""Morton (Z-order) codes for octree boxes.

Bit-plane ``b`` of the three zero-based box indices lands at bits
``3b`` (x), ``3b + 1`` (y) and ``3b + 2`` (z). A level-d box index has
``d - 1`` bits per axis, so the parent of a code is ``code >> 3``.
"""

import numba
import numpy as np

MAX_LEVEL = 21


def _check_level(d):
    if not 1 <= d <= MAX_LEVEL:
        raise ValueError(f"level must be in [1, {MAX_LEVEL}], got {d}")


@numba.njit(cache=True, inline="always")
def _spread(v):
    # 21-bit integer -> every third bit of a 63-bit integer
    v = np.uint64(v) & np.uint64(0x1FFFFF)
    v = (v | (v << np.uint64(32))) & np.uint64(0x1F00000000FFFF)
    v = (v | (v << np.uint64(16))) & np.uint64(0x1F0000FF0000FF)
    v = (v | (v << np.uint64(8))) & np.uint64(0x100F00F00F00F00F)
    v = (v | (v << np.uint64(4))) & np.uint64(0x10C30C30C30C30C3)
    v = (v | (v << np.uint64(2))) & np.uint64(0x1249249249249249)
    return v


@numba.njit(cache=True, inline="always")
def _compact(v):
    v = np.uint64(v) & np.uint64(0x1249249249249249)
    v = (v ^ (v >> np.uint64(2))) & np.uint64(0x10C30C30C30C30C3)
    v = (v ^ (v >> np.uint64(4))) & np.uint64(0x100F00F00F00F00F)
    v = (v ^ (v >> np.uint64(8))) & np.uint64(0x1F0000FF0000FF)
    v = (v ^ (v >> np.uint64(16))) & np.uint64(0x1F00000000FFFF)
    v = (v ^ (v >> np.uint64(32))) & np.uint64(0x1FFFFF)
    return v


@numba.njit(cache=True, inline="always")
def encode3(i, j, k):
    return np.int64(_spread(i) | (_spread(j) << np.uint64(1)) | (_spread(k) << np.uint64(2)))


@numba.njit(cache=True, inline="always")
def decode3(code):
    c = np.uint64(code)
    return (np.int64(_compact(c)), np.int64(_compact(c >> np.uint64(1))),
            np.int64(_compact(c >> np.uint64(2))))


@numba.njit(cache=True)
def encode_array(ix, iy, iz):
    out = np.empty(ix.size, np.int64)
    for n in range(ix.size):
        out[n] = encode3(ix[n], iy[n], iz[n])
    return out


@numba.njit(cache=True)
def decode_array(codes):
    out = np.empty((codes.size, 3), np.int64)
    for n in range(codes.size):
        a, b, c = decode3(codes[n])
        out[n, 0] = a
        out[n, 1] = b
        out[n, 2] = c
    return out


def encode(k, d):
    """Morton code of the zero-based level-``d`` box index ``k``."""
    _check_level(d)
    k = tuple(int(v) for v in k)
    if len(k) != 3:
        raise ValueError("box index must have three components")
    n = 1 << (d - 1)
    if any(not 0 <= v < n for v in k):
        raise ValueError(f"box index {k} out of range [0, {n}) at level {d}")
    return int(encode3(*k))


def decode(code, d=None):
    """Inverse of :func:`encode`."""
    code = int(code)
    if code < 0:
        raise ValueError("Morton codes are non-negative")
    if d is not None:
        _check_level(d)
        if code >= 8 ** (d - 1):
            raise ValueError(f"code {code} is not a level-{d} code")
    return tuple(int(v) for v in decode3(code))


def point_codes(x1, x2, x3, origin, h, n):
    """Level codes of points for boxes of side ``h`` on an ``n``-per-axis grid."""
    idx = []
    for x, o in zip((x1, x2, x3), origin):
        i = np.floor((x - o) / h).astype(np.int64)
        # the cube inflation keeps points off the upper faces; this clip only
        # absorbs a last-bit rounding of the division
        np.clip(i, 0, n - 1, out=i)
        idx.append(i)
    return encode_array(*idx)


def sort_points(pc, cube, depth):
    """Stable-sort ``pc`` in place by level-``depth`` box Morton code.

    Returns ``perm`` with ``sorted[i] = original[perm[i]]``.
    """
    _check_level(depth)
    p = pc.points
    if not np.all(cube.contains(p)):
        raise ValueError("point cloud is not contained in the bounding cube")
    codes = point_codes(pc.x1, pc.x2, pc.x3, cube.origin, cube.side(depth), 1 << (depth - 1))
    perm = np.argsort(codes, kind="stable")
    pc.permute(perm)
    return perm
