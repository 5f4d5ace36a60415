import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ifgf import KernelConfig, KernelKind, analytic_factor, green, transfer_factor
from ifgf.kernel import KernelDomainError


def test_laplace_unit_distance():
    g = green([0, 0, 0], [1, 0, 0], KernelConfig.laplace())
    assert g == pytest.approx(1 / (4 * np.pi), rel=1e-15)
    assert g.imag == 0.0


def test_phase_wraps():
    g = green([0, 0, 0], [0, 1, 0], KernelConfig.helmholtz(2 * np.pi))
    assert g == pytest.approx(1 / (4 * np.pi), rel=1e-14, abs=1e-16)


def test_direct_substitution():
    g = green([0, 0, 0], [0, 0, 2], KernelConfig.helmholtz(1.0))
    assert g == pytest.approx(np.exp(2j) / (8 * np.pi), rel=1e-15)


def test_coincident_points_rejected():
    with pytest.raises(KernelDomainError):
        green([1, 2, 3], [1, 2, 3], KernelConfig.laplace())
    with pytest.raises(KernelDomainError):
        analytic_factor([0, 0, 0], [1, 0, 0], [0, 0, 0], KernelConfig.laplace())


def test_laplace_is_zero_wavenumber():
    cfg = KernelConfig.laplace()
    assert cfg.kind is KernelKind.LAPLACE and cfg.kappa == 0.0
    x, y = np.array([0.3, -1.0, 2.0]), np.array([1.0, 0.5, 0.0])
    assert green(x, y, cfg) == green(x, y, KernelConfig.helmholtz(0.0))


def test_negative_wavenumber_rejected():
    with pytest.raises(ValueError):
        KernelConfig.helmholtz(-1.0)


def test_analytic_factor_at_center_is_one():
    cfg = KernelConfig.helmholtz(3.0)
    assert analytic_factor([2, 1, 0], [0.1, 0.2, 0.3], [0.1, 0.2, 0.3], cfg) == 1 + 0j


def test_analytic_factor_laplace_modulus_ratio():
    x, xp, c = np.array([3.0, 0, 0]), np.array([0, 1.0, 0]), np.zeros(3)
    g = analytic_factor(x, xp, c, KernelConfig.laplace())
    assert g == pytest.approx(3.0 / np.sqrt(10.0), rel=1e-15)


def test_transfer_factor_examples():
    cfg = KernelConfig.laplace()
    assert transfer_factor([0, 0, 5], [1, 1, 1], [1, 1, 1], cfg) == 1.0
    # |x - child| = 1, |x - parent| = 2
    assert transfer_factor([0, 0, 0], [1, 0, 0], [0, 2, 0], cfg) == pytest.approx(2.0, rel=1e-15)


def test_vectorized_broadcast():
    cfg = KernelConfig.helmholtz(2.0)
    x = np.random.default_rng(0).normal(size=(50, 3))
    y = x + 1.0
    g = green(x, y, cfg)
    assert g.shape == (50,)
    assert g[7] == green(x[7], y[7], cfg)


def _triples(seed, n):
    # phases stay below ~40 rad; beyond that ulp(kappa * r) alone exceeds 1e-14
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 3))
    xp = 0.3 * rng.normal(size=(n, 3))
    c = 0.3 * rng.normal(size=(n, 3))
    return x, xp, c


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), kappa=st.floats(0.0, 10.0))
def test_factorization_identity(seed, kappa):
    cfg = KernelConfig.helmholtz(kappa)
    x, xp, c = _triples(seed, 500)
    lhs = green(x, xp, cfg)
    rhs = green(x, c, cfg) * analytic_factor(x, xp, c, cfg)
    assert np.max(np.abs(lhs - rhs) / np.abs(lhs)) < 1e-14


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), kappa=st.floats(0.0, 10.0))
def test_recentering_identity(seed, kappa):
    cfg = KernelConfig.helmholtz(kappa)
    x, xp, child = _triples(seed, 500)
    parent = child + np.random.default_rng(seed + 1).normal(size=child.shape) * 0.3
    lhs = analytic_factor(x, xp, parent, cfg)
    rhs = analytic_factor(x, xp, child, cfg) * transfer_factor(x, child, parent, cfg)
    assert np.max(np.abs(lhs - rhs) / np.abs(lhs)) < 1e-14
