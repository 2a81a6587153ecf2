"""Bi-Normal (BN) and proper Bi-Normal (PBN) models.

Both share one Gibbs sampler for the group means and variances.  PBN maps
each posterior ``(a, b)`` draw through the bi-chi-square representation of
the likelihood-ratio ROC, which is always concave.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..distributions import bvn_cdf, ncx1_sqrt_quantile, norm_cdf
from ..errors import FitError
from ..mcmc import ChainConfig, diagnose, gibbs_inverse_gamma_var, gibbs_normal_mean, run_chains
from ..roc import Sample, binormal_auc, binormal_roc_values
from .base import ModelFit, dispersion, grid_or_default

PRIOR_MEAN, PRIOR_VAR = 0.0, 100.0
IG_SHAPE, IG_RATE = 0.01, 0.01
LAMBDA_ONE_TOL = 1e-6


@dataclass(frozen=True)
class BinormalParams:
    mu0: float
    sigma0: float
    mu1: float
    sigma1: float

    def __post_init__(self):
        if not (self.sigma0 > 0 and self.sigma1 > 0):
            raise ValueError("standard deviations must be positive")

    @property
    def a(self) -> float:
        return (self.mu1 - self.mu0) / self.sigma1

    @property
    def b(self) -> float:
        return self.sigma0 / self.sigma1


@dataclass(frozen=True)
class PbnParams:
    alpha0: float
    alpha1: float

    def __post_init__(self):
        if not self.alpha1 > 0:
            raise ValueError("alpha1 must be positive")

    @property
    def lam(self) -> float:
        return 1.0 / self.alpha1**2

    @property
    def theta(self) -> float:
        if abs(self.alpha1 - 1) < LAMBDA_ONE_TOL:
            return float("inf")
        return self.alpha0**2 * self.alpha1**2 / (1 - self.alpha1**2) ** 2


# ----------------------------------------------------------------------------
# proper binormal ROC / AUC


def pbn_lambda_theta(alpha0, alpha1):
    alpha0 = np.asarray(alpha0, dtype=float)
    alpha1 = np.asarray(alpha1, dtype=float)
    lam = 1.0 / alpha1**2
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = alpha0**2 * alpha1**2 / (1 - alpha1**2) ** 2
    return lam, theta


def pbn_roc_values(alpha0, alpha1, grid):
    """Proper-binormal ROC on ``grid``; vectorized over draws of (alpha0, alpha1).

    lambda > 1: ``1 - F_{lam*theta}(F_theta^{-1}(1 - t) / lam)``;
    lambda < 1: ``F_{lam*theta}(F_theta^{-1}(t) / lam)``;
    ``|alpha1 - 1| < 1e-6`` uses the binormal closed form.
    """
    grid = np.asarray(grid, dtype=float)
    alpha0 = np.atleast_1d(np.asarray(alpha0, dtype=float))
    alpha1 = np.atleast_1d(np.asarray(alpha1, dtype=float))
    lam, theta = pbn_lambda_theta(alpha0, alpha1)
    out = np.empty((alpha0.size, grid.size))
    near_one = np.abs(alpha1 - 1) < LAMBDA_ONE_TOL
    if near_one.any():
        out[near_one] = binormal_roc_values(np.abs(alpha0[near_one]), alpha1[near_one], grid)
    interior = (grid > 0) & (grid < 1)
    t = grid[interior]
    for branch in (lam > 1, lam < 1):
        idx = branch & ~near_one
        if not idx.any():
            continue
        r = np.sqrt(theta[idx])[:, None]
        r_aff = np.sqrt(lam[idx] * theta[idx])[:, None]
        sl = np.sqrt(lam[idx])[:, None]
        upper = bool(lam[idx][0] > 1)
        p = (1 - t) if upper else t
        s0 = ncx1_sqrt_quantile(p[None, :], r)
        s1 = s0 / sl
        f_aff = norm_cdf(s1 - r_aff) - norm_cdf(-s1 - r_aff)
        vals = np.empty((idx.sum(), grid.size))
        vals[:, interior] = 1 - f_aff if upper else f_aff
        vals[:, grid <= 0] = 0.0
        vals[:, grid >= 1] = 1.0
        out[idx] = vals
    return out


def pbn_auc(alpha0, alpha1):
    """Proper-binormal AUC.

    For lambda > 1 this is ``Phi(q) + 2 F_BVN(-q, 0; rho)`` with
    ``q = sqrt(theta) (lam - 1) / sqrt(lam + 1)`` and ``rho = -2 sqrt(lam) / (lam + 1)``.
    For lambda < 1 the same formula applies after swapping the roles of the
    two groups, i.e. evaluating at ``(1 / lam, lam * theta)``.
    """
    alpha0 = np.atleast_1d(np.asarray(alpha0, dtype=float))
    alpha1 = np.atleast_1d(np.asarray(alpha1, dtype=float))
    lam, theta = pbn_lambda_theta(alpha0, alpha1)
    out = np.empty(alpha0.size)
    near_one = np.abs(alpha1 - 1) < LAMBDA_ONE_TOL
    out[near_one] = binormal_auc(np.abs(alpha0[near_one]), alpha1[near_one])
    rest = ~near_one
    lam_r = np.where(lam[rest] > 1, lam[rest], 1 / lam[rest])
    theta_r = np.where(lam[rest] > 1, theta[rest], lam[rest] * theta[rest])
    q = np.sqrt(theta_r) * (lam_r - 1) / np.sqrt(lam_r + 1)
    rho = -2 * np.sqrt(lam_r) / (lam_r + 1)
    out[rest] = norm_cdf(q) + 2 * bvn_cdf(-q, 0.0, rho)
    return out


# ----------------------------------------------------------------------------
# sampler


class BinormalKernel:
    """Independent conjugate Gibbs updates for each group's mean and variance."""

    def __init__(self, sample: Sample):
        self.y0 = sample.scores0
        self.y1 = sample.scores1
        self.n_chains = 1

    def init(self, rng, chain):
        off = dispersion(chain, self.n_chains)
        st = {}
        for g, y in (("0", self.y0), ("1", self.y1)):
            sd = y.std(ddof=1)
            st["mu" + g] = y.mean() + 3 * off * sd / np.sqrt(y.size)
            st["s2" + g] = sd**2 * 2.0**off
        return st

    def step(self, st, rng):
        for g, y in (("0", self.y0), ("1", self.y1)):
            st["mu" + g] = gibbs_normal_mean(y, st["s2" + g], PRIOR_MEAN, PRIOR_VAR, rng)
            st["s2" + g] = gibbs_inverse_gamma_var(y - st["mu" + g], IG_SHAPE, IG_RATE, rng)
        return st

    def monitor(self, st):
        s0, s1 = np.sqrt(st["s20"]), np.sqrt(st["s21"])
        a = (st["mu1"] - st["mu0"]) / s1
        b = s0 / s1
        return {
            "mu0": st["mu0"],
            "sigma0": s0,
            "mu1": st["mu1"],
            "sigma1": s1,
            "auc": float(binormal_auc(a, b)),
        }

    def record(self, st):
        return None


def _check_groups(sample: Sample):
    for name, y in (("reference", sample.scores0), ("affected", sample.scores1)):
        if y.size < 2:
            raise FitError(f"{name} group needs at least 2 observations")
        if np.ptp(y) == 0:
            raise FitError(f"{name} group has zero variance")


def _binormal_draws(sample: Sample, cfg: ChainConfig):
    _check_groups(sample)
    kernel = BinormalKernel(sample)
    kernel.n_chains = cfg.n_chains
    draws, diag = run_chains(kernel, cfg)
    a = (draws.flat("mu1") - draws.flat("mu0")) / draws.flat("sigma1")
    b = draws.flat("sigma0") / draws.flat("sigma1")
    return draws, diag, a, b


def _separation_note(sample: Sample) -> list[str]:
    if sample.scores1.min() > sample.scores0.max() or sample.scores1.max() < sample.scores0.min():
        return ["groups are perfectly separated; AUC is degenerate at the boundary"]
    return []


def fit_bn(sample: Sample, cfg: ChainConfig | None = None, grid=None) -> ModelFit:
    cfg = cfg or ChainConfig()
    grid = grid_or_default(grid)
    draws, diag, a, b = _binormal_draws(sample, cfg)
    roc = binormal_roc_values(a, b, grid)
    return ModelFit("BN", grid, binormal_auc(a, b), roc, diag, draws, notes=_separation_note(sample))


def fit_pbn(sample: Sample, cfg: ChainConfig | None = None, grid=None) -> ModelFit:
    """Binormal posterior draws mapped through the proper-binormal ROC.

    ``(alpha0, alpha1)`` equal the binormal ``(a, b)`` computed on scores
    standardized by the reference parameters, which ``(a, b)`` are invariant to.
    """
    cfg = cfg or ChainConfig()
    grid = grid_or_default(grid)
    draws, diag, a, b = _binormal_draws(sample, cfg)
    shape = draws.scalars["mu0"].shape
    draws.scalars["alpha0"] = a.reshape(shape)
    draws.scalars["alpha1"] = b.reshape(shape)
    auc = pbn_auc(a, b)
    draws.scalars["auc"] = auc.reshape(shape)
    diag = diagnose({k: draws.scalars[k] for k in ("alpha0", "alpha1", "auc")})
    roc = pbn_roc_values(a, b, grid)
    return ModelFit("PBN", grid, auc, roc, diag, draws, notes=_separation_note(sample))
