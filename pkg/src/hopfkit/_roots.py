"""Dense-scan root finding for scalar functions of one variable."""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq, minimize_scalar


def scan_roots(fun, lo: float, hi: float, nodes: int = 20001, xtol: float = 1e-13,
               residual_tol: float = 1e-10, dedup: float = 1e-6) -> np.ndarray:
    """All roots of ``fun`` on ``[lo, hi]`` up to the scan resolution.

    Sign changes between scan nodes are refined by Brent's method. Local minima
    of ``|fun|`` without a sign change (tangential roots) are polished by a
    bounded scalar minimization and kept when the residual is below
    ``residual_tol``; that part is best effort.
    """
    y = np.linspace(lo, hi, nodes)
    r = np.asarray(fun(y), dtype=float)
    finite = np.isfinite(r)
    roots: list[float] = list(y[finite & (r == 0.0)])
    s = np.sign(r)
    idx = np.nonzero(finite[:-1] & finite[1:] & (s[:-1] * s[1:] < 0))[0]
    scalar = lambda v: float(fun(np.array([v]))[0])
    for i in idx:
        roots.append(brentq(scalar, y[i], y[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps))

    a = np.abs(r)
    interior = np.arange(1, nodes - 1)
    tangential = interior[
        finite[interior]
        & (a[interior] <= a[interior - 1])
        & (a[interior] <= a[interior + 1])
        & (s[interior - 1] * s[interior + 1] > 0)
        & (a[interior] > 0)
    ]
    step = y[1] - y[0]
    for i in tangential:
        res = minimize_scalar(lambda v: abs(scalar(v)), bounds=(y[i] - step, y[i] + step),
                              method="bounded", options={"xatol": xtol})
        if res.fun <= residual_tol:
            roots.append(float(res.x))

    roots.sort()
    out: list[float] = []
    for v in roots:
        if not out or abs(v - out[-1]) > dedup:
            out.append(v)
    return np.asarray(out)
