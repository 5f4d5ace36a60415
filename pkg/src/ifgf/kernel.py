"""Green functions and the centered/analytic factorization.

The Helmholtz Green function is factored about a box center ``c``::

    G(x, x') = G(x, c) * g(x, x'; c)

with ``g(x, x'; c) = |x - c| / |x - x'| * exp(i k (|x - x'| - |x - c|))``.
The analytic factor stays smooth for ``x`` outside the neighbor zone of the
box and all the way to infinity, which is what the cone interpolants rely on.
"""

from dataclasses import dataclass
from enum import Enum

import numba
import numpy as np

INV_4PI = 1.0 / (4.0 * np.pi)


class KernelKind(str, Enum):
    HELMHOLTZ = "helmholtz"
    LAPLACE = "laplace"


class KernelDomainError(ValueError):
    """Raised when a Green function is evaluated at coincident points."""


@dataclass(frozen=True)
class KernelConfig:
    """Kernel selection. ``wavenumber`` is ignored for Laplace."""

    kind: KernelKind = KernelKind.HELMHOLTZ
    wavenumber: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        if not np.isfinite(self.wavenumber) or self.wavenumber < 0:
            raise ValueError(f"wavenumber must be finite and >= 0, got {self.wavenumber}")

    @classmethod
    def helmholtz(cls, wavenumber):
        return cls(KernelKind.HELMHOLTZ, float(wavenumber))

    @classmethod
    def laplace(cls):
        return cls(KernelKind.LAPLACE, 0.0)

    @property
    def kappa(self):
        """Effective wavenumber (0 for Laplace)."""
        return 0.0 if self.kind is KernelKind.LAPLACE else float(self.wavenumber)

    @property
    def wavelength(self):
        return np.inf if self.kappa == 0 else 2.0 * np.pi / self.kappa


def _distance(x, y, what):
    d = np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float), axis=-1)
    if np.any(d == 0):
        raise KernelDomainError(f"coincident points ({what})")
    return d


def green(x, y, cfg):
    """exp(i k r) / (4 pi r), r = |x - y|. Broadcasts over leading axes."""
    r = _distance(x, y, "x == y")
    k = cfg.kappa
    return (np.cos(k * r) + 1j * np.sin(k * r)) * (INV_4PI / r)


def analytic_factor(x, xp, center, cfg):
    """G(x, xp) / G(x, center), evaluated without forming either factor."""
    r = _distance(x, xp, "x == xp")
    rc = _distance(x, center, "x == center")
    ph = cfg.kappa * (r - rc)
    return (rc / r) * (np.cos(ph) + 1j * np.sin(ph))


def transfer_factor(x, child_center, parent_center, cfg):
    """G(x, child_center) / G(x, parent_center); re-centers a child field."""
    return analytic_factor(x, child_center, parent_center, cfg)


# Scalar kernels used inside the compiled passes.


@numba.njit(cache=True, inline="always")
def green_r(r, kappa):
    s = INV_4PI / r
    return complex(np.cos(kappa * r) * s, np.sin(kappa * r) * s)


@numba.njit(cache=True, inline="always")
def ratio_r(r_num, r_den, kappa):
    """G(r_num) / G(r_den) for two distances from the same target."""
    ph = kappa * (r_num - r_den)
    q = r_den / r_num
    return complex(np.cos(ph) * q, np.sin(ph) * q)
