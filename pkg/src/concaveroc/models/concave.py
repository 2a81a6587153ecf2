"""Placement-value concave models: parametric (pCN) and DPM (spCN).

Both treat each placement value as ``z_i | w_i ~ U(0, w_i)`` with
``w_i = Phi(x_i)``.  pCN puts a single normal on ``x``; spCN a truncated
stick-breaking mixture of normals with a shared variance.  Every posterior
ROC draw is an average of uniform CDFs and therefore concave.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from scipy import special

from ..distributions import norm_cdf, norm_ppf
from ..errors import InputError
from ..mcmc import (
    ChainConfig,
    gibbs_inverse_gamma_var,
    gibbs_normal_mean,
    pv_latent_update,
    run_chains,
    slice_sample_1d,
    truncnorm_sample,
)
from ..roc import auc_from_bounds, clamp_placement_values, concave_cdf_eval
from .base import ModelFit, dispersion, grid_or_default


@dataclass(frozen=True)
class Priors:
    """Hyperparameters shared by the concave models and the reference DPM."""

    mean: float = 0.0  # prior mean of mu (pCN) / base-measure mean (spCN)
    var: float = 100.0
    ig_shape: float = 0.01
    ig_rate: float = 0.01
    alpha: float = 1.0  # DP concentration
    truncation: int = 30


DEFAULT_PRIORS = Priors()


def _validate_pv(z, n0):
    z = np.asarray(z, dtype=float).ravel()
    if z.size == 0:
        raise InputError("no placement values")
    if not np.all(np.isfinite(z)) or np.any((z < 0) | (z > 1)):
        raise InputError("placement values must lie in [0, 1]")
    if n0 is None:
        n0 = z.size
    return clamp_placement_values(z, n0)


def _start_x(z_lower, center, rng):
    """Feasible start: at least the constraint, jittered around ``center``."""
    return np.maximum(z_lower + 0.05 + 0.1 * rng.uniform(size=z_lower.size), center)


def location_shift(x, z_lower, center, prior_mean, prior_var, rng, width=0.5):
    """Translate a block of latents together with their location parameter.

    The move ``(x, center) -> (x + d, center + d)`` leaves the normal
    deviations unchanged, so the conditional of ``d`` only involves the
    location prior and the ``1 / Phi(x)`` likelihood factors.  It removes the
    slow random walk that single-site latent updates show when the latent
    spread is small.  Returns the new latents and center.
    """
    lo = float(np.max(z_lower - x))

    def log_dens(d):
        c = center + d
        return -0.5 * (c - prior_mean) ** 2 / prior_var - special.log_ndtr(x + d).sum()

    d = slice_sample_1d(log_dens, 0.0, width, lower=min(lo, 0.0), rng=rng)
    return np.maximum(x + d, z_lower), center + d


def scale_move(x, z_lower, centers, sigma2, ig_shape, ig_rate, rng, width=0.5):
    """Rescale all latent deviations from their centers together with ``sigma``.

    The move ``x - c -> s (x - c)``, ``sigma2 -> s^2 sigma2`` is drawn from
    its conditional on ``r = log s``; the normal kernel terms cancel against
    the Jacobian, leaving the inverse-gamma prior and ``1 / Phi(x)`` factors.
    This lets the shared variance escape small values, where single-site
    updates barely move.
    """
    dev = x - centers
    gap = z_lower - centers  # need centers + s * dev >= z_lower
    lo, hi = -np.inf, np.inf
    pos, neg = dev > 0, dev < 0
    with np.errstate(divide="ignore", invalid="ignore"):
        if pos.any():
            lb = np.max(gap[pos] / dev[pos])
            if lb > 0:
                lo = np.log(lb)
        if neg.any():
            hi = np.log(np.min(gap[neg] / dev[neg]))
    if np.any(gap[dev == 0] > 0):
        return x, sigma2

    def log_dens(r):
        return -2.0 * ig_shape * r - ig_rate * np.exp(-2.0 * r) / sigma2 - special.log_ndtr(centers + np.exp(r) * dev).sum()

    lo, hi = min(lo, 0.0), max(hi, 0.0)
    if not lo < hi:
        return x, sigma2
    r = slice_sample_1d(log_dens, 0.0, width, lower=lo, upper=hi, rng=rng)
    s = np.exp(r)
    return np.maximum(centers + s * dev, z_lower), sigma2 * s * s


# ----------------------------------------------------------------------------
# pCN


@dataclass
class PcnState:
    x: np.ndarray
    mu: float
    sigma2: float

    @property
    def w(self):
        return norm_cdf(self.x)


class PcnKernel:
    def __init__(self, z, priors: Priors = DEFAULT_PRIORS):
        self.z = np.asarray(z, dtype=float)
        self.z_lower = norm_ppf(self.z)
        self.priors = priors
        self.n_chains = 1

    def init(self, rng, chain):
        off = dispersion(chain, self.n_chains)
        center = np.median(self.z_lower) + 0.5 + 1.5 * off
        x = _start_x(self.z_lower, center, rng)
        return PcnState(x, float(x.mean()), float(max(x.var(), 0.05) * 2.0**off))

    def step(self, st: PcnState, rng):
        p = self.priors
        st.x = pv_latent_update(st.x, self.z_lower, st.mu, np.sqrt(st.sigma2), rng)
        st.mu = gibbs_normal_mean(st.x, st.sigma2, p.mean, p.var, rng)
        st.x, st.mu = location_shift(st.x, self.z_lower, st.mu, p.mean, p.var, rng)
        st.x, st.sigma2 = scale_move(st.x, self.z_lower, st.mu, st.sigma2, p.ig_shape, p.ig_rate, rng)
        st.sigma2 = gibbs_inverse_gamma_var(st.x - st.mu, p.ig_shape, p.ig_rate, rng)
        return st

    def monitor(self, st: PcnState):
        return {"auc": float(auc_from_bounds(st.w)), "mu": st.mu, "sigma2": st.sigma2}

    def record(self, st: PcnState):
        return st.w


# ----------------------------------------------------------------------------
# stick-breaking mixture pieces, shared with the reference-score DPM


def stick_weights(v):
    """``p_1 = V_1``, ``p_k = V_k prod_{j<k} (1 - V_j)``; with ``V_H = 1`` they sum to one."""
    rest = np.concatenate([[1.0], np.cumprod(1.0 - v[:-1])])
    return v * rest


def sample_assignments(x, log_p, atoms, sigma2, rng):
    """Categorical draw per row with log-weights ``log p_k - (x - mu_k)^2 / (2 sigma2)``."""
    logits = log_p[None, :] - (x[:, None] - atoms[None, :]) ** 2 / (2.0 * sigma2)
    logits -= logits.max(axis=1, keepdims=True)
    cum = np.cumsum(np.exp(logits), axis=1)
    u = rng.uniform(size=x.size) * cum[:, -1]
    return (cum < u[:, None]).sum(axis=1)


def log_interval_mass(a, b, rowwise=False):
    """``log(Phi(b) - Phi(a))`` for ``a <= b``, accurate in both tails.

    With ``rowwise=True`` (2-D input) the slow log-space path is only taken
    for rows where every direct difference underflows; elsewhere underflowed
    entries stay at ``-inf``, which is exact to double precision relative to
    the row maximum.
    """
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    # reflect intervals lying mostly in the upper tail
    flip = a > -b
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    with np.errstate(divide="ignore"):
        out = np.log(norm_cdf(hi) - norm_cdf(lo))
    bad = ~np.isfinite(out) & (hi > lo)
    if rowwise:
        bad &= ~np.isfinite(out.max(axis=1, keepdims=True))
    if bad.any():
        lh = special.log_ndtr(hi[bad])
        with np.errstate(divide="ignore", invalid="ignore"):
            out[bad] = lh + np.log1p(-np.exp(special.log_ndtr(lo[bad]) - lh))
    return out


def sample_labels_and_latents(x, z_lower, labels, log_p, atoms, sd, rng):
    """Joint draw of each latent and its cluster label given an auxiliary slice.

    With ``e ~ U(0, 1)`` the ``1 / Phi(x)`` factor becomes the interval
    ``[z_lower, Phi^{-1}(Phi(x) / e)]``.  On that interval the label marginal is
    ``p_k (Phi((u - mu_k)/sd) - Phi((l - mu_k)/sd))`` and the latent is a
    truncated normal, so labels can move even when ``sd`` is tiny.
    """
    e = rng.uniform(size=x.size)
    w_cap = norm_cdf(x) / np.maximum(e, 1e-300)
    with np.errstate(divide="ignore"):
        upper = np.where(w_cap >= 1.0, np.inf, norm_ppf(np.minimum(w_cap, 1.0)))
    a = (z_lower[:, None] - atoms[None, :]) / sd
    b = (upper[:, None] - atoms[None, :]) / sd
    logits = log_p[None, :] + log_interval_mass(a, b, rowwise=True)
    top = logits.max(axis=1)
    ok = np.isfinite(top)
    new_labels = labels.copy()
    if ok.any():
        lg = logits[ok] - top[ok, None]
        cum = np.cumsum(np.exp(lg), axis=1)
        u = rng.uniform(size=cum.shape[0]) * cum[:, -1]
        new_labels[ok] = (cum < u[:, None]).sum(axis=1)
    # rows with underflowing masses keep their label and get a plain slice update
    new_x = truncnorm_sample(atoms[new_labels], sd, z_lower, upper, rng)
    new_x = np.clip(new_x, z_lower, upper)
    return new_x, new_labels


def sample_sticks(counts, alpha, rng):
    """``V_k ~ Beta(1 + n_k, alpha + sum_{j>k} n_j)`` for k < H; ``V_H = 1``."""
    tail = np.concatenate([np.cumsum(counts[::-1])[::-1][1:], [0]])
    v = rng.beta(1.0 + counts, alpha + tail)
    v[-1] = 1.0
    return v


def sample_atoms(x, labels, counts, sigma2, prior_mean, prior_var, rng):
    sums = np.bincount(labels, weights=x, minlength=counts.size)
    prec = 1.0 / prior_var + counts / sigma2
    mean = (prior_mean / prior_var + sums / sigma2) / prec
    return mean + rng.standard_normal(counts.size) / np.sqrt(prec)


@dataclass
class SpcnState:
    x: np.ndarray
    labels: np.ndarray
    atoms: np.ndarray
    sticks: np.ndarray
    sigma2: float
    weights: np.ndarray = field(init=False)

    def __post_init__(self):
        self.weights = stick_weights(self.sticks)

    @property
    def w(self):
        return norm_cdf(self.x)


class SpcnKernel:
    """Blocked Gibbs sweep for the truncated DP mixture on the latent probits.

    The shared variance and the cluster count trade off against each other
    and mix slowly; they are reported as advisory diagnostics only.
    """

    advisory = ("sigma2", "n_clusters")

    def __init__(self, z, priors: Priors = DEFAULT_PRIORS):
        self.z = np.asarray(z, dtype=float)
        self.z_lower = norm_ppf(self.z)
        self.priors = priors
        self.n_chains = 1

    def init(self, rng, chain):
        p = self.priors
        H = p.truncation
        off = dispersion(chain, self.n_chains)
        center = np.median(self.z_lower) + 0.5 + 1.5 * off
        x = _start_x(self.z_lower, center, rng)
        k0 = min(H, 1 + chain % 5)
        labels = rng.integers(0, k0, size=x.size)
        counts = np.bincount(labels, minlength=H)
        sigma2 = float(max(x.var(), 0.05) * 2.0**off)
        atoms = sample_atoms(x, labels, counts, sigma2, p.mean, p.var, rng)
        sticks = sample_sticks(counts, p.alpha, rng)
        return SpcnState(x, labels, atoms, sticks, sigma2)

    def step(self, st: SpcnState, rng):
        p = self.priors
        sd = np.sqrt(st.sigma2)
        with np.errstate(divide="ignore"):
            log_p = np.log(st.weights)
        st.x, st.labels = sample_labels_and_latents(st.x, self.z_lower, st.labels, log_p, st.atoms, sd, rng)
        counts = np.bincount(st.labels, minlength=p.truncation)
        st.sticks = sample_sticks(counts, p.alpha, rng)
        st.weights = stick_weights(st.sticks)
        st.atoms = sample_atoms(st.x, st.labels, counts, st.sigma2, p.mean, p.var, rng)
        for k in np.flatnonzero(counts):
            idx = st.labels == k
            st.x[idx], st.atoms[k] = location_shift(st.x[idx], self.z_lower[idx], st.atoms[k], p.mean, p.var, rng)
        st.sigma2 = gibbs_inverse_gamma_var(st.x - st.atoms[st.labels], p.ig_shape, p.ig_rate, rng)
        st.x, st.sigma2 = scale_move(st.x, self.z_lower, st.atoms[st.labels], st.sigma2, p.ig_shape, p.ig_rate, rng)
        return st

    def monitor(self, st: SpcnState):
        return {
            "auc": float(auc_from_bounds(st.w)),
            "sigma2": st.sigma2,
            "mean_latent": float(st.x.mean()),
            "n_clusters": float(np.unique(st.labels).size),
        }

    def record(self, st: SpcnState):
        return st.w


# ----------------------------------------------------------------------------
# fitting


def _fit_concave(model, kernel, cfg, grid):
    draws, diag = run_chains(kernel, cfg)
    w = draws.flat_records()
    roc = concave_cdf_eval(w, grid)
    return ModelFit(model, grid, draws.flat("auc"), roc, diag, draws)


def fit_pcn(z, cfg: ChainConfig | None = None, grid=None, n0: int | None = None, priors: Priors = DEFAULT_PRIORS) -> ModelFit:
    """Fit the parametric concave model to placement values ``z``.

    ``n0`` (reference group size) sets the boundary clamp; defaults to ``len(z)``.
    """
    cfg = cfg or ChainConfig()
    z = _validate_pv(z, n0)
    kernel = PcnKernel(z, priors)
    kernel.n_chains = cfg.n_chains
    return _fit_concave("pCN", kernel, cfg, grid_or_default(grid))


def fit_spcn(z, cfg: ChainConfig | None = None, grid=None, n0: int | None = None, priors: Priors = DEFAULT_PRIORS) -> ModelFit:
    """Fit the semiparametric (DP mixture) concave model to placement values ``z``."""
    cfg = cfg or ChainConfig()
    z = _validate_pv(z, n0)
    kernel = SpcnKernel(z, priors)
    kernel.n_chains = cfg.n_chains
    return _fit_concave("spCN", kernel, cfg, grid_or_default(grid))
