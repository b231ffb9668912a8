"""Bayesian parameter inference from sufficient statistics.

Landing categoricals get symmetric Dirichlet updates in closed form.  Holding
parameters phi get, per key: a bound-constrained MAP under a uniform box
prior (L-BFGS-B with analytic gradients; the gamma shape direction uses a
central difference through the incomplete-gamma term), a dense grid posterior
usable as an oracle, and exact conjugate updates where they exist
(inverse-gamma for the rayleigh scale, gamma for the exponential rate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy import special as sp

from .errors import InsufficientDataError, ModelError
from .likelihood import KeyStats, stats_log_likelihood
from .special import dlog_gammaincc_dx, log_gammaincc, logsumexp
from .survival import FAMILY_ARITY, Family, SurvivalParams

_FD_STEP = 1e-6
_LBFGSB_OPTIONS = {"maxiter": 500, "gtol": 1e-6}
# deterministic multistart fractions across the log-transformed box
_STARTS_1D = (0.125, 0.375, 0.625, 0.875)
_STARTS_2D = ((0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75))


@dataclass(frozen=True)
class BoxPrior:
    """Uniform prior over an axis-aligned box with positive bounds."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        if len(lower) != len(upper) or not lower:
            raise ModelError("box bounds must be nonempty and equal length")
        if any(lo <= 0.0 or hi <= lo for lo, hi in zip(lower, upper)):
            raise ModelError("box needs 0 < lower < upper per dimension")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def default(cls, family: Family, lo: float = 0.1, hi: float = 100.0) -> "BoxPrior":
        arity = FAMILY_ARITY[Family(family)]
        return cls((lo,) * arity, (hi,) * arity)

    @property
    def arity(self) -> int:
        return len(self.lower)

    def contains(self, params) -> bool:
        return all(lo <= p <= hi for p, lo, hi in zip(params, self.lower, self.upper))

    def log_volume(self) -> float:
        return float(sum(math.log(hi - lo) for lo, hi in zip(self.lower, self.upper)))

    def log_density(self, params) -> float:
        return -self.log_volume() if self.contains(params) else -math.inf


@dataclass(frozen=True)
class GammaPrior:
    """Gamma(shape, rate) prior; conjugate to the exponential holding rate."""

    shape: float = 1.0
    rate: float = 1.0

    def __post_init__(self):
        if self.shape <= 0.0 or self.rate <= 0.0:
            raise ModelError("gamma prior needs shape, rate > 0")


@dataclass(frozen=True)
class InvGammaPrior:
    """Inverse-gamma(shape, scale) prior; conjugate to the rayleigh sigma_sq."""

    shape: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if self.shape <= 0.0 or self.scale <= 0.0:
            raise ModelError("inverse-gamma prior needs shape, scale > 0")

    def log_pdf(self, sigma_sq):
        v = np.asarray(sigma_sq, dtype=float)
        out = (
            self.shape * math.log(self.scale)
            - math.lgamma(self.shape)
            - (self.shape + 1.0) * np.log(v)
            - self.scale / v
        )
        if np.isscalar(sigma_sq):
            return float(out)
        return out

    def mean(self) -> float:
        if self.shape <= 1.0:
            raise ModelError("inverse-gamma mean needs shape > 1")
        return self.scale / (self.shape - 1.0)


# ---------------------------------------------------------------- theta ----


def dirichlet_posterior(ks: KeyStats, own_state: int, concentration: float = 1.0) -> np.ndarray:
    """Posterior Dirichlet concentrations over landing states (0 at own_state)."""
    if concentration <= 0.0:
        raise ModelError("dirichlet concentration must be > 0")
    conc = np.full(len(ks.targets), float(concentration))
    conc[own_state] = 0.0
    return conc + ks.targets


def dirichlet_mean(concentration: np.ndarray) -> np.ndarray:
    total = concentration.sum()
    return concentration / total


# ------------------------------------------------------- conjugate phi ----


def _rayleigh_stat(ks: KeyStats) -> float:
    out = 0.0
    if ks.full:
        out += float(np.sum(np.square(ks.full)))
    if ks.cens:
        out += float(np.sum(np.square(ks.cens)))
    if ks.trunc:
        out -= float(np.sum(np.square(ks.trunc)))
    return 0.5 * out


def rayleigh_posterior_update(prior: InvGammaPrior, ks: KeyStats) -> InvGammaPrior:
    """Exact conjugate update of the inverse-gamma law on sigma_sq."""
    return InvGammaPrior(prior.shape + len(ks.full), prior.scale + _rayleigh_stat(ks))


def rayleigh_log_marginal(prior: InvGammaPrior, ks: KeyStats) -> float:
    """Closed-form log evidence of one key's stats under the conjugate prior."""
    post = rayleigh_posterior_update(prior, ks)
    out = (
        prior.shape * math.log(prior.scale)
        - math.lgamma(prior.shape)
        + math.lgamma(post.shape)
        - post.shape * math.log(post.scale)
    )
    if ks.full:
        out += float(np.sum(np.log(ks.full)))
    return out


def _exponential_dwell(ks: KeyStats) -> float:
    out = 0.0
    if ks.full:
        out += float(np.sum(ks.full))
    if ks.cens:
        out += float(np.sum(ks.cens))
    if ks.trunc:
        out -= float(np.sum(ks.trunc))
    return out


def exponential_posterior_update(prior: GammaPrior, ks: KeyStats) -> GammaPrior:
    """Exact conjugate update of the gamma law on the exponential rate."""
    return GammaPrior(prior.shape + len(ks.full), prior.rate + _exponential_dwell(ks))


def exponential_log_marginal(prior: GammaPrior, ks: KeyStats) -> float:
    post = exponential_posterior_update(prior, ks)
    return (
        prior.shape * math.log(prior.rate)
        - math.lgamma(prior.shape)
        + math.lgamma(post.shape)
        - post.shape * math.log(post.rate)
    )


# ------------------------------------------------------------- MAP phi ----


def _arrays(ks: KeyStats):
    sf = np.asarray(ks.full, dtype=float)
    sc = np.asarray(ks.cens, dtype=float)
    st = np.asarray(ks.trunc, dtype=float)
    return sf, sc, st


def negative_log_likelihood_and_grad(ks: KeyStats, family: Family):
    """Factory: params -> (-loglik, -grad) for one key's stats.

    The returned callable is what the bound-constrained optimizer minimizes;
    a uniform box prior shifts the objective by a constant, so the MAP equals
    the box-clipped MLE and the same callable serves both.
    """
    family = Family(family)
    sf, sc, st = _arrays(ks)
    m = sf.size

    if family is Family.EXPONENTIAL:
        dwell = float(sf.sum() + sc.sum() - st.sum())

        def fg(params):
            (rate,) = params
            nll = -(m * math.log(rate) - rate * dwell)
            grad = -(m / rate - dwell)
            return nll, np.array([grad])

        return fg

    if family is Family.RAYLEIGH:
        half_sq = _rayleigh_stat(ks)
        log_sum = float(np.sum(np.log(sf))) if m else 0.0

        def fg(params):
            (sig_sq,) = params
            ll = log_sum - m * math.log(sig_sq) - half_sq / sig_sq
            grad = -m / sig_sq + half_sq / (sig_sq * sig_sq)
            return -ll, np.array([-grad])

        return fg

    if family is Family.WEIBULL:
        ln_f, ln_c, ln_t = np.log(sf), np.log(sc), np.log(st)
        lf_sum = float(ln_f.sum())

        def fg(params):
            shape, rate = params
            pf, pc, pt = np.exp(shape * ln_f), np.exp(shape * ln_c), np.exp(shape * ln_t)
            w = float(pf.sum() + pc.sum() - pt.sum())
            w_prime = float((ln_f * pf).sum() + (ln_c * pc).sum() - (ln_t * pt).sum())
            ll = m * (math.log(rate) + math.log(shape)) + (shape - 1.0) * lf_sum - rate * w
            d_shape = m / shape + lf_sum - rate * w_prime
            d_rate = m / rate - w
            return -ll, np.array([-d_shape, -d_rate])

        return fg

    # gamma
    ln_f = np.log(sf)
    lf_sum = float(ln_f.sum())
    sf_sum = float(sf.sum())

    def fg(params):
        shape, rate = params
        xc, xt = rate * sc, rate * st
        qc = log_gammaincc(shape, xc) if sc.size else np.zeros(0)
        qt = log_gammaincc(shape, xt) if st.size else np.zeros(0)
        ll = (
            m * (shape * math.log(rate) - math.lgamma(shape))
            + (shape - 1.0) * lf_sum
            - rate * sf_sum
            + float(qc.sum())
            - float(qt.sum())
        )
        d_rate = m * shape / rate - sf_sum
        if sc.size:
            d_rate += float((sc * dlog_gammaincc_dx(shape, xc)).sum())
        if st.size:
            d_rate -= float((st * dlog_gammaincc_dx(shape, xt)).sum())
        h = _FD_STEP * max(1.0, shape)
        d_shape = m * (math.log(rate) - sp.digamma(shape)) + lf_sum
        if sc.size or st.size:
            up = down = 0.0
            if sc.size:
                up += float(log_gammaincc(shape + h, xc).sum())
                down += float(log_gammaincc(shape - h, xc).sum())
            if st.size:
                up -= float(log_gammaincc(shape + h, xt).sum())
                down -= float(log_gammaincc(shape - h, xt).sum())
            d_shape += (up - down) / (2.0 * h)
        return -ll, np.array([-d_shape, -d_rate])

    return fg


def map_estimate(
    ks: KeyStats,
    family: Family,
    box: BoxPrior | None = None,
    init=None,
) -> tuple:
    """MAP of one key's holding parameters under a uniform box prior.

    Runs four deterministic L-BFGS-B starts spread over the log-transformed
    box (plus `init` if given); the best objective wins, ties going to the
    earlier start.  Raises InsufficientDataError when the key has neither
    closed nor censored windows.
    """
    family = Family(family)
    if not ks.full and not ks.cens:
        raise InsufficientDataError("no closed or censored windows for this key")
    if box is None:
        box = BoxPrior.default(family)
    if box.arity != FAMILY_ARITY[family]:
        raise ModelError(f"box arity {box.arity} does not match {family.value}")

    log_lo = np.log(box.lower)
    log_hi = np.log(box.upper)
    if box.arity == 1:
        starts = [np.exp(log_lo + f * (log_hi - log_lo)) for f in _STARTS_1D]
    else:
        starts = [np.exp(log_lo + np.asarray(f) * (log_hi - log_lo)) for f in _STARTS_2D]
    if init is not None:
        init = np.asarray(init, dtype=float)
        if not box.contains(init):
            raise ModelError("init lies outside the box prior")
        starts.insert(0, init)

    fg = negative_log_likelihood_and_grad(ks, family)
    bounds = list(zip(box.lower, box.upper))
    best = None
    for x0 in starts:
        res = optimize.minimize(
            fg, x0, jac=True, method="L-BFGS-B", bounds=bounds, options=_LBFGSB_OPTIONS
        )
        if best is None or res.fun < best.fun:
            best = res
    return tuple(float(v) for v in best.x)


# ---------------------------------------------------------------- grid ----


def param_grid(box: BoxPrior, points_per_dim: int, log_spacing: bool = True) -> np.ndarray:
    """Lattice over the box, shape (points^arity, arity), last axis fastest."""
    if points_per_dim < 2:
        raise ModelError("need at least two grid points per dimension")
    axes = []
    for lo, hi in zip(box.lower, box.upper):
        if log_spacing:
            axes.append(np.exp(np.linspace(math.log(lo), math.log(hi), points_per_dim)))
        else:
            axes.append(np.linspace(lo, hi, points_per_dim))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=-1)


def grid_log_posterior(
    ks: KeyStats,
    family: Family,
    grid: np.ndarray,
    log_prior=None,
) -> np.ndarray:
    """Normalized log posterior weights on an explicit parameter lattice."""
    family = Family(family)
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.shape[1] != FAMILY_ARITY[family]:
        raise ModelError("grid arity does not match family")
    logw = np.empty(grid.shape[0])
    for i, row in enumerate(grid):
        logw[i] = stats_log_likelihood(ks, SurvivalParams(family, tuple(row)))
        if log_prior is not None:
            logw[i] += log_prior(row)
    norm = logsumexp(logw)
    if norm == -math.inf:
        raise InsufficientDataError("posterior vanishes on the whole grid")
    return logw - norm


def grid_posterior(ks, family, grid, log_prior=None) -> np.ndarray:
    """Linear-domain normalized grid posterior (sums to 1)."""
    return np.exp(grid_log_posterior(ks, family, grid, log_prior))
