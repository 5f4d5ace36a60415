"""Speedup and efficiency figures from wall times."""

import math
from typing import NamedTuple, Optional


class Scaling(NamedTuple):
    speedup: float
    strong_efficiency: float
    weak_efficiency: Optional[float]


def metrics(t0, t, nc0, nc, n0=None, n=None, rtol=1e-12):
    """Speedup ``S = T0/T``, strong efficiency ``S/(Nc/Nc0)`` and weak efficiency.

    The weak efficiency ``T0 log N / (T log N0)`` is only defined when the
    problem grows with the execution units, ``N/N0 == Nc/Nc0``; it is
    ``None`` when ``n0``/``n`` are omitted.
    """
    for name, v in (("T0", t0), ("T", t), ("Nc0", nc0), ("Nc", nc)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")
    s = t0 / t
    e_s = s / (nc / nc0)
    e_w = None
    if n0 is not None or n is not None:
        if n0 is None or n is None or not (n0 > 1 and n > 1):
            raise ValueError("weak scaling needs both N0 and N greater than 1")
        if not math.isclose(n / n0, nc / nc0, rel_tol=rtol):
            raise ValueError(f"weak scaling requires N/N0 == Nc/Nc0, got {n / n0} vs {nc / nc0}")
        e_w = t0 * math.log(n) / (t * math.log(n0))
    return Scaling(s, e_s, e_w)
