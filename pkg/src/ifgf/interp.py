"""Tensor-product Chebyshev interpolants on cone segments.

A block stores ``P = p_s * p_theta * p_phi`` Chebyshev coefficients of the
first kind, laid out C-contiguously as ``(p_s, p_theta, p_phi)``. Node values
are transformed one axis at a time; evaluation runs a nested Clenshaw
recurrence and allocates nothing. Local coordinates are the segment mapped
affinely onto ``[-1, 1]^3``.
"""

from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np


@lru_cache(maxsize=None)
def chebyshev_nodes(p):
    """Open Chebyshev points of the first kind on (-1, 1), ascending."""
    j = np.arange(p)
    t = -np.cos((2 * j + 1) * np.pi / (2 * p))
    t.setflags(write=False)
    return t


@lru_cache(maxsize=None)
def transform_matrix(p):
    """``M`` with ``coeffs = M @ values`` for values at :func:`chebyshev_nodes`."""
    t = chebyshev_nodes(p)
    k = np.arange(p)[:, None]
    m = (2.0 / p) * np.cos(k * np.arccos(t)[None, :])
    m[0] *= 0.5
    m.setflags(write=False)
    return m


@dataclass
class InterpolantBlock:
    coeffs: np.ndarray  # complex, shape (p_s, p_theta, p_phi)
    key: object = None

    @property
    def degrees(self):
        return self.coeffs.shape

    @property
    def P(self):
        return self.coeffs.size

    @property
    def coeffs_re(self):
        return self.coeffs.real.ravel()

    @property
    def coeffs_im(self):
        return self.coeffs.imag.ravel()


def fit(values, degrees=None, key=None):
    """Fit a block to node values laid out as ``(p_s, p_theta, p_phi)``."""
    v = np.asarray(values, dtype=np.complex128)
    if degrees is not None:
        v = v.reshape(degrees)
    if v.ndim != 3:
        raise ValueError("node values must be a 3-D (p_s, p_theta, p_phi) array")
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite node values")
    ms, mt, mp = (transform_matrix(p) for p in v.shape)
    c = np.einsum("ai,bj,ck,ijk->abc", ms, mt, mp, v, optimize=True)
    return InterpolantBlock(c, key)


def evaluate(block, local, check=True):
    """Value of ``block`` at reference coordinates ``local`` in [-1, 1]^3."""
    u = np.asarray(local, dtype=float)
    if check and np.any(np.abs(u) > 1.0 + 1e-12):
        raise ValueError(f"local coordinates {tuple(u)} outside [-1, 1]^3")
    ps, pt, pp = block.coeffs.shape
    return complex(eval_flat(np.ascontiguousarray(block.coeffs).ravel(), ps, pt, pp, u[0], u[1], u[2]))


def node_grid(degrees):
    """Reference node coordinates, shape (P, 3), in block layout order."""
    axes = [chebyshev_nodes(p) for p in degrees]
    g = np.meshgrid(*axes, indexing="ij")
    return np.stack([a.ravel() for a in g], axis=1)


# Compiled kernels shared by the passes


@numba.njit(cache=True)
def fit_into(vals, ms, mt, mp, out, work):
    """Separable transform of flat node values ``vals`` into ``out``."""
    ps, pt, pp = ms.shape[0], mt.shape[0], mp.shape[0]
    # phi axis: vals -> out
    for a in range(ps):
        for b in range(pt):
            base = (a * pt + b) * pp
            for k in range(pp):
                acc = 0j
                for j in range(pp):
                    acc += mp[k, j] * vals[base + j]
                out[base + k] = acc
    # theta axis: out -> work
    for a in range(ps):
        for c in range(pp):
            for k in range(pt):
                acc = 0j
                for j in range(pt):
                    acc += mt[k, j] * out[(a * pt + j) * pp + c]
                work[(a * pt + k) * pp + c] = acc
    # s axis: work -> out
    for b in range(pt):
        for c in range(pp):
            for k in range(ps):
                acc = 0j
                for j in range(ps):
                    acc += ms[k, j] * work[(j * pt + b) * pp + c]
                out[(k * pt + b) * pp + c] = acc


@numba.njit(cache=True, inline="always")
def _clenshaw_phi(coef, base, pp, up):
    b1 = 0j
    b2 = 0j
    t2 = 2.0 * up
    for k in range(pp - 1, 0, -1):
        b0 = coef[base + k] + t2 * b1 - b2
        b2 = b1
        b1 = b0
    return coef[base] + up * b1 - b2


@numba.njit(cache=True, inline="always")
def _clenshaw_theta(coef, a, pt, pp, ut, up):
    b1 = 0j
    b2 = 0j
    t2 = 2.0 * ut
    for k in range(pt - 1, 0, -1):
        b0 = _clenshaw_phi(coef, (a * pt + k) * pp, pp, up) + t2 * b1 - b2
        b2 = b1
        b1 = b0
    return _clenshaw_phi(coef, a * pt * pp, pp, up) + ut * b1 - b2


@numba.njit(cache=True)
def eval_flat(coef, ps, pt, pp, us, ut, up):
    """Nested Clenshaw evaluation of a flat coefficient block."""
    b1 = 0j
    b2 = 0j
    t2 = 2.0 * us
    for k in range(ps - 1, 0, -1):
        b0 = _clenshaw_theta(coef, k, pt, pp, ut, up) + t2 * b1 - b2
        b2 = b1
        b1 = b0
    return _clenshaw_theta(coef, 0, pt, pp, ut, up) + us * b1 - b2
