"""Romberg integration of log-domain integrands.

log_romberg returns log of the integral of exp(log_f) over [lo, hi] without
ever forming the linear integrand at full scale: a coarse probe grid sets a
per-call scaling constant, the trapezoid ladder runs on the scaled values,
and Richardson extrapolation accelerates as usual.  Refinement stops when
successive diagonal estimates agree to rel_tol or the level budget is spent
(then IntegrationError).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import IntegrationError

_PROBE_POINTS = 33
# level 5's dyadic grid is exactly the 33-point probe grid, so any mass the
# probe saw is guaranteed to enter the trapezoid ladder before we may stop
_MIN_LEVELS = 5


def log_romberg(
    log_f,
    lo: float,
    hi: float,
    rel_tol: float = 1e-6,
    max_levels: int = 12,
) -> float:
    """log of the integral of exp(log_f(y)) dy over [lo, hi].

    log_f must accept an ndarray and may return -inf where the integrand
    vanishes.  Returns -inf for an identically vanishing integrand.
    """
    if not hi > lo:
        raise ValueError("integration interval must have positive length")
    probe = np.linspace(lo, hi, _PROBE_POINTS)
    scale = float(np.max(log_f(probe)))
    if scale == -math.inf:
        # probe finer once before declaring the integrand zero
        probe = np.linspace(lo, hi, 4 * _PROBE_POINTS + 1)
        scale = float(np.max(log_f(probe)))
        if scale == -math.inf:
            return -math.inf

    width = hi - lo

    def f(y):
        # a value above the probe max can overflow after scaling; the infs
        # poison Richardson and surface as IntegrationError, never silently
        with np.errstate(over="ignore"):
            return np.exp(log_f(y) - scale)

    rows: list[np.ndarray] = []
    ends = f(np.array([lo, hi]))
    trap = 0.5 * width * float(ends.sum())
    rows.append(np.array([trap]))
    for level in range(1, max_levels + 1):
        pts = 2 ** (level - 1)
        h = width / (2.0 * pts)
        mids = lo + h * (2.0 * np.arange(pts) + 1.0)
        trap = 0.5 * rows[-1][0] + h * float(np.sum(f(mids)))
        row = np.empty(level + 1)
        row[0] = trap
        pow4 = 1.0
        for j in range(1, level + 1):
            pow4 *= 4.0
            row[j] = row[j - 1] + (row[j - 1] - rows[-1][j - 1]) / (pow4 - 1.0)
        prev_best = rows[-1][-1]
        rows.append(row)
        best = row[-1]
        if level >= _MIN_LEVELS:
            denom = max(abs(best), 1e-300)
            if abs(best - prev_best) <= rel_tol * denom:
                if best <= 0.0:
                    best = max(trap, 1e-300)  # extrapolation noise on a vanishing tail
                return scale + math.log(best)
    raise IntegrationError(
        f"romberg failed to reach rel_tol={rel_tol} within {max_levels} levels"
    )


def log_romberg_2d(
    log_f,
    lo: tuple,
    hi: tuple,
    rel_tol: float = 1e-6,
    inner_rel_tol: float | None = None,
    max_levels: int = 12,
) -> float:
    """Nested log-domain Romberg over a rectangle.

    log_f(y0, y1_array) must vectorize over its second axis.  The inner
    integral runs at a tighter tolerance so outer extrapolation is not
    limited by inner noise.
    """
    if inner_rel_tol is None:
        inner_rel_tol = rel_tol * 1e-2

    def outer(y0_arr):
        vals = np.empty(np.shape(y0_arr))
        flat = np.atleast_1d(y0_arr)
        out = np.empty(flat.shape)
        for i, y0 in enumerate(flat):
            out[i] = log_romberg(
                lambda y1: log_f(y0, y1), lo[1], hi[1], inner_rel_tol, max_levels
            )
        vals = out.reshape(np.shape(y0_arr))
        return vals

    return log_romberg(outer, lo[0], hi[0], rel_tol, max_levels)
