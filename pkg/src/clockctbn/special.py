"""Log-domain special functions.

The structure and parameter integrals need log Q(a, x), the log of the
regularized upper incomplete gamma function, far into the tail where the
linear value underflows (x >> a gives Q ~ exp(-x) with x in the hundreds or
thousands).  scipy's gammaincc is accurate wherever its result is
representable, so we use it there and switch to a modified-Lentz continued
fraction evaluated directly in log space for the deep tail.
"""

from __future__ import annotations

import numpy as np
from scipy import special as sp

# Below this the linear-domain value is too close to the underflow floor to
# trust its log; the continued fraction takes over.  The CF requires x > a,
# which holds whenever Q is this small.
_LINEAR_FLOOR = 1e-280
_CF_MAX_ITER = 400
_CF_TINY = 1e-300
_LOG_TWO = float(np.log(2.0))


def _log_gammaincc_cf(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """log Q(a, x) via the standard continued fraction, for x > a + 1.

    Q(a, x) = exp(-x + a ln x - ln Gamma(a)) * H where H is the CF value;
    H is O(1/x) here so everything stays representable.
    """
    b = x + 1.0 - a
    c = np.full_like(b, 1.0 / _CF_TINY)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(b.shape, dtype=bool)
    for i in range(1, _CF_MAX_ITER + 1):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        np.copyto(d, _CF_TINY, where=active & (np.abs(d) < _CF_TINY))
        c = b + an / c
        np.copyto(c, _CF_TINY, where=active & (np.abs(c) < _CF_TINY))
        d = 1.0 / d
        delta = d * c
        h = np.where(active, h * delta, h)
        active = active & (np.abs(delta - 1.0) >= 1e-15)
        if not active.any():
            break
    return -x + a * np.log(x) - sp.gammaln(a) + np.log(h)


def log_gammaincc(a, x):
    """log of the regularized upper incomplete gamma Q(a, x).

    Vectorized over x (and a); a > 0, x >= 0.  Exact -x for a == 1.
    Returns 0.0 at x == 0.
    """
    a_arr = np.asarray(a, dtype=float)
    x_arr = np.asarray(x, dtype=float)
    a_b, x_b = np.broadcast_arrays(a_arr, x_arr)
    if np.any(a_b <= 0.0):
        raise ValueError("log_gammaincc requires a > 0")
    if np.any(x_b < 0.0):
        raise ValueError("log_gammaincc requires x >= 0")

    out = np.empty(x_b.shape, dtype=float)
    # a == 1 reduces to the exponential survival exactly; keep it bit-exact.
    unit = a_b == 1.0
    out[unit] = -x_b[unit]
    rest = ~unit
    if rest.any():
        q = sp.gammaincc(a_b[rest], x_b[rest])
        sub = np.empty(q.shape, dtype=float)
        safe = q > _LINEAR_FLOOR
        sub[safe] = np.log(q[safe])
        tail = ~safe
        if tail.any():
            sub[tail] = _log_gammaincc_cf(a_b[rest][tail], x_b[rest][tail])
        out[rest] = sub
    if np.isscalar(a) and np.isscalar(x):
        return float(out)
    return out


def log_gammainc_lower(a, log_x):
    """log of the unregularized lower incomplete gamma(a, x), given log x.

    Power-series evaluation, valid for x < a + 1; taking log x directly keeps
    the result accurate when x itself underflows (log gamma(a, x) ~ a log x -
    log a there).  Vectorized over log_x.
    """
    log_x = np.asarray(log_x, dtype=float)
    x = np.exp(log_x)
    if np.any(x >= a + 1.0):
        raise ValueError("series for the lower incomplete gamma needs x < a + 1")
    term = np.full(x.shape, 1.0 / a)
    total = term.copy()
    for j in range(1, _CF_MAX_ITER + 1):
        term = term * x / (a + j)
        total += term
        if np.all(term <= total * 1e-17):
            break
    out = a * log_x - x + np.log(total)
    if out.ndim == 0:
        return float(out)
    return out


def dlog_gammaincc_dx(a, x):
    """d/dx log Q(a, x) = -x^(a-1) e^(-x) / (Gamma(a) Q(a, x)), in log-safe form.

    Vectorized; x > 0.
    """
    a_arr = np.asarray(a, dtype=float)
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0.0):
        raise ValueError("dlog_gammaincc_dx requires x > 0")
    logq = log_gammaincc(a_arr, x_arr)
    val = -np.exp((a_arr - 1.0) * np.log(x_arr) - x_arr - sp.gammaln(a_arr) - logq)
    if np.isscalar(a) and np.isscalar(x):
        return float(val)
    return val


def logsumexp(values: np.ndarray, axis=None) -> np.ndarray:
    """Stable log(sum(exp(values))); -inf inputs are handled."""
    return sp.logsumexp(values, axis=axis)


def log_diff_exp(log_p, log_q):
    """log(exp(log_p) - exp(log_q)) for log_p >= log_q, stable near ties.

    log(1 - e^d) is computed as log(-expm1(d)) when d is close to zero and as
    log1p(-exp(d)) otherwise; either alone loses all precision at one end.
    """
    log_p = np.asarray(log_p, dtype=float)
    log_q = np.asarray(log_q, dtype=float)
    d = np.minimum(log_q - log_p, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        body = np.where(d > -_LOG_TWO, np.log(-np.expm1(d)), np.log1p(-np.exp(d)))
        out = log_p + body
    # exact ties give log(0)
    out = np.where(log_q == log_p, -np.inf, out)
    if out.ndim == 0:
        return float(out)
    return out
