"""Parametric survival families for per-node holding clocks.

Each family is defined by its log survival function log L(s) = log P(T > s);
the hazard is -d/ds log L(s) and the log density is log hazard + log survival.
Supported families (all parameters strictly positive):

  exponential(rate)         log L = -rate * s
  weibull(shape k, rate b)  log L = -b * s**k
  gamma(shape a, rate b)    log L = log Q(a, b*s)  (regularized upper gamma)
  rayleigh(sigma_sq)        log L = -s**2 / (2 * sigma_sq)

Residual sampling conditions on an elapsed clock tau via
P(res > s) = L(tau + s) / L(tau); exponential, weibull, and rayleigh invert
this in closed form, gamma uses rejection from the unconditional law with a
bisection fallback on the log survival.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ModelError, StalledProcessError
from .special import log_gammaincc

_GAMMA_REJECTION_CAP = 10_000
_BISECT_ITERS = 200


class Family(str, Enum):
    EXPONENTIAL = "exponential"
    WEIBULL = "weibull"
    GAMMA = "gamma"
    RAYLEIGH = "rayleigh"


FAMILY_ARITY = {
    Family.EXPONENTIAL: 1,
    Family.WEIBULL: 2,
    Family.GAMMA: 2,
    Family.RAYLEIGH: 1,
}

PARAM_NAMES = {
    Family.EXPONENTIAL: ("rate",),
    Family.WEIBULL: ("shape", "rate"),
    Family.GAMMA: ("shape", "rate"),
    Family.RAYLEIGH: ("sigma_sq",),
}


@dataclass(frozen=True)
class SurvivalParams:
    """One family tag plus its parameter vector, validated on construction."""

    family: Family
    params: tuple

    def __post_init__(self):
        family = Family(self.family)
        params = tuple(float(p) for p in self.params)
        if len(params) != FAMILY_ARITY[family]:
            raise ModelError(
                f"{family.value} takes {FAMILY_ARITY[family]} parameter(s), "
                f"got {len(params)}"
            )
        if not all(math.isfinite(p) and p > 0.0 for p in params):
            raise ModelError(f"{family.value} parameters must be finite and > 0: {params}")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "params", params)


def _check_domain(s, allow_zero=True):
    arr = np.asarray(s, dtype=float)
    bad = arr < 0.0 if allow_zero else arr <= 0.0
    if np.any(bad):
        raise ValueError("clock reading outside the domain of the survival function")
    return arr


def log_survival(p: SurvivalParams, s):
    """log P(T > s); vectorized over s >= 0."""
    s_arr = _check_domain(s)
    if p.family is Family.EXPONENTIAL:
        (rate,) = p.params
        out = -rate * s_arr
    elif p.family is Family.WEIBULL:
        shape, rate = p.params
        out = -rate * s_arr**shape
    elif p.family is Family.GAMMA:
        shape, rate = p.params
        out = log_gammaincc(shape, rate * s_arr)
    else:
        (sigma_sq,) = p.params
        out = -(s_arr * s_arr) / (2.0 * sigma_sq)
    if np.isscalar(s):
        return float(out)
    return out


def hazard(p: SurvivalParams, s):
    """Instantaneous rate -d/ds log P(T > s); vectorized over s.

    s = 0 is rejected for families whose hazard is singular there
    (weibull shape < 1, gamma shape < 1).
    """
    s_arr = _check_domain(s)
    if p.family is Family.EXPONENTIAL:
        (rate,) = p.params
        out = np.full_like(s_arr, rate)
    elif p.family is Family.WEIBULL:
        shape, rate = p.params
        if shape < 1.0 and np.any(s_arr == 0.0):
            raise ValueError("weibull hazard is singular at s = 0 for shape < 1")
        out = rate * shape * s_arr ** (shape - 1.0)
    elif p.family is Family.GAMMA:
        shape, rate = p.params
        if shape == 1.0:
            out = np.full_like(s_arr, rate)
        else:
            if shape < 1.0 and np.any(s_arr == 0.0):
                raise ValueError("gamma hazard is singular at s = 0 for shape < 1")
            with np.errstate(divide="ignore"):
                log_s = np.log(s_arr)
            x = rate * s_arr
            log_h = (
                shape * math.log(rate)
                + (shape - 1.0) * log_s
                - x
                - math.lgamma(shape)
                - log_gammaincc(shape, x)
            )
            out = np.exp(log_h)
    else:
        (sigma_sq,) = p.params
        out = s_arr / sigma_sq
    if np.isscalar(s):
        return float(out)
    return out


def log_density(p: SurvivalParams, s):
    """log f(s) = log hazard(s) + log survival(s), in closed form per family."""
    s_arr = _check_domain(s)
    with np.errstate(divide="ignore"):
        log_s = np.log(s_arr)
    if p.family is Family.EXPONENTIAL:
        (rate,) = p.params
        out = math.log(rate) - rate * s_arr
    elif p.family is Family.WEIBULL:
        shape, rate = p.params
        if shape == 1.0:
            out = math.log(rate) - rate * s_arr
        else:
            if shape < 1.0 and np.any(s_arr == 0.0):
                raise ValueError("weibull density is singular at s = 0 for shape < 1")
            out = math.log(rate) + math.log(shape) + (shape - 1.0) * log_s - rate * s_arr**shape
    elif p.family is Family.GAMMA:
        shape, rate = p.params
        if shape == 1.0:
            out = math.log(rate) - rate * s_arr
        else:
            if shape < 1.0 and np.any(s_arr == 0.0):
                raise ValueError("gamma density is singular at s = 0 for shape < 1")
            out = (
                shape * math.log(rate)
                + (shape - 1.0) * log_s
                - rate * s_arr
                - math.lgamma(shape)
            )
    else:
        (sigma_sq,) = p.params
        out = log_s - math.log(sigma_sq) - (s_arr * s_arr) / (2.0 * sigma_sq)
    if np.isscalar(s):
        return float(out)
    return out


def _bisect_truncated(p: SurvivalParams, trunc: float, u: float) -> float:
    """Solve log L(trunc + s) - log L(trunc) = log u for s by bisection."""
    target = math.log(u)
    base = log_survival(p, trunc)

    def g(s):
        return log_survival(p, trunc + s) - base - target

    hi = max(trunc, 1.0)
    for _ in range(200):
        if g(hi) <= 0.0:
            break
        hi *= 2.0
    else:
        raise StalledProcessError("failed to bracket truncated residual")
    lo = 0.0
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * max(1.0, lo):
            break
    return 0.5 * (lo + hi)


def sample_truncated(p: SurvivalParams, trunc: float, u) -> float:
    """Draw a residual s with P(s > t) = L(trunc + t) / L(trunc).

    `u` is either a uniform(0,1) variate (deterministic inverse transform; the
    gamma family falls back to bisection on the log survival) or a
    numpy Generator.  trunc >= 0.
    """
    if trunc < 0.0:
        raise ValueError("truncation point must be >= 0")
    rng = None
    if isinstance(u, np.random.Generator):
        rng = u
        u = None

    if p.family is Family.EXPONENTIAL:
        (rate,) = p.params
        if u is None:
            u = _draw_uniform(rng)
        return -math.log(u) / rate
    if p.family is Family.WEIBULL:
        shape, rate = p.params
        if u is None:
            u = _draw_uniform(rng)
        return (trunc**shape - math.log(u) / rate) ** (1.0 / shape) - trunc
    if p.family is Family.RAYLEIGH:
        (sigma_sq,) = p.params
        if u is None:
            u = _draw_uniform(rng)
        return math.sqrt(trunc * trunc - 2.0 * sigma_sq * math.log(u)) - trunc
    # gamma: no closed-form inverse
    shape, rate = p.params
    if rng is not None:
        scale = 1.0 / rate
        for _ in range(_GAMMA_REJECTION_CAP):
            x = rng.gamma(shape, scale)
            if x > trunc:
                return x - trunc
        u = _draw_uniform(rng)
    return _bisect_truncated(p, trunc, u)


def _draw_uniform(rng: np.random.Generator) -> float:
    # random() lives in [0, 1); keep u in (0, 1) so log(u) stays finite
    u = rng.random()
    if u <= 0.0:
        u = 5e-324
    return u
