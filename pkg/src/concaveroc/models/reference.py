"""Stage-1 estimation of the reference-score CDF used to form placement values."""

from __future__ import annotations

import numpy as np

from ..distributions import norm_cdf
from ..errors import FitError, InputError
from ..mcmc import ChainConfig, gibbs_inverse_gamma_var, gibbs_normal_mean, run_chains
from .base import dispersion
from .concave import DEFAULT_PRIORS, Priors, sample_assignments, sample_atoms, sample_sticks, stick_weights

MODES = ("parametric", "dpm")
MAX_CDF_DRAWS = 500


class ReferenceCdf:
    """Callable posterior-mean CDF ``sum_k p_k Phi((y - mu_k) / sigma)`` averaged over draws.

    The parametric mode has a single component at the posterior means.
    """

    def __init__(self, weights, atoms, sigma, mode):
        self.weights = np.atleast_2d(weights)
        self.atoms = np.atleast_2d(atoms)
        self.sigma = np.atleast_1d(sigma)
        self.mode = mode

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        flat = y.reshape(-1)
        out = np.zeros(flat.size)
        for p, mu, s in zip(self.weights, self.atoms, self.sigma):
            keep = p > 1e-12
            out += norm_cdf((flat[:, None] - mu[keep][None, :]) / s) @ p[keep]
        return (out / self.weights.shape[0]).reshape(y.shape)


class _NormalKernel:
    def __init__(self, y):
        self.y = y
        self.n_chains = 1

    def init(self, rng, chain):
        off = dispersion(chain, self.n_chains)
        sd = self.y.std(ddof=1)
        return {"mu": self.y.mean() + 3 * off * sd / np.sqrt(self.y.size), "s2": sd**2 * 2.0**off}

    def step(self, st, rng):
        st["mu"] = gibbs_normal_mean(self.y, st["s2"], 0.0, 100.0, rng)
        st["s2"] = gibbs_inverse_gamma_var(self.y - st["mu"], 0.01, 0.01, rng)
        return st

    def monitor(self, st):
        return {"mu": st["mu"], "sigma": float(np.sqrt(st["s2"]))}

    def record(self, st):
        return None


class _MixtureKernel:
    """Blocked Gibbs for a truncated DP mixture of normals with one shared variance."""

    advisory = ("sigma",)

    def __init__(self, y, priors: Priors):
        self.y = y
        self.priors = priors
        self.n_chains = 1

    def init(self, rng, chain):
        p = self.priors
        # start over-split: Gibbs merges surplus clusters quickly but rarely splits one
        k0 = min(p.truncation, 10 + 2 * chain)
        ranks = np.argsort(np.argsort(self.y + 1e-9 * rng.standard_normal(self.y.size)))
        labels = (ranks * k0 // self.y.size).astype(int)
        counts = np.bincount(labels, minlength=p.truncation)
        within = np.var(self.y - (np.bincount(labels, self.y, p.truncation) / np.maximum(counts, 1))[labels])
        s2 = float(max(within, 1e-4 * self.y.var()) * 2.0 ** dispersion(chain, self.n_chains))
        atoms = sample_atoms(self.y, labels, counts, s2, p.mean, p.var, rng)
        sticks = sample_sticks(counts, p.alpha, rng)
        return {"labels": labels, "atoms": atoms, "weights": stick_weights(sticks), "s2": s2}

    def step(self, st, rng):
        p = self.priors
        with np.errstate(divide="ignore"):
            log_p = np.log(st["weights"])
        labels = sample_assignments(self.y, log_p, st["atoms"], st["s2"], rng)
        counts = np.bincount(labels, minlength=p.truncation)
        st["weights"] = stick_weights(sample_sticks(counts, p.alpha, rng))
        st["atoms"] = sample_atoms(self.y, labels, counts, st["s2"], p.mean, p.var, rng)
        st["s2"] = gibbs_inverse_gamma_var(self.y - st["atoms"][labels], p.ig_shape, p.ig_rate, rng)
        st["labels"] = labels
        return st

    def monitor(self, st):
        return {"sigma": float(np.sqrt(st["s2"])), "mean": float(st["weights"] @ st["atoms"])}

    def record(self, st):
        return np.concatenate([st["weights"], st["atoms"], [np.sqrt(st["s2"])]])


def estimate_reference_cdf(scores0, mode: str = "parametric", cfg: ChainConfig | None = None, priors: Priors = DEFAULT_PRIORS):
    """Fit the reference scores and return the estimated CDF as a callable.

    ``parametric``: ``Phi((y - a) / s)`` at the posterior means of the normal
    mean and standard deviation.  ``dpm``: a truncated DP mixture of normals
    with shared variance, fitted on standardized scores; the returned CDF is
    the posterior mean of the mixture CDF (label-switching invariant).
    Any log transform is the caller's job.
    """
    y = np.asarray(scores0, dtype=float).ravel()
    if y.size < 3:
        raise FitError("reference CDF estimation needs at least 3 reference scores")
    if not np.all(np.isfinite(y)):
        raise FitError("reference scores must be finite")
    if np.ptp(y) == 0:
        raise FitError("reference scores have zero variance")
    cfg = cfg or ChainConfig()
    if mode == "parametric":
        kernel = _NormalKernel(y)
        kernel.n_chains = cfg.n_chains
        draws, diag = run_chains(kernel, cfg)
        cdf = ReferenceCdf([1.0], [draws.flat("mu").mean()], [draws.flat("sigma").mean()], mode)
    elif mode == "dpm":
        center, scale = y.mean(), y.std(ddof=1)
        kernel = _MixtureKernel((y - center) / scale, priors)
        kernel.n_chains = cfg.n_chains
        draws, diag = run_chains(kernel, cfg)
        rec = draws.flat_records()
        idx = np.linspace(0, rec.shape[0] - 1, min(MAX_CDF_DRAWS, rec.shape[0])).round().astype(int)
        rec = rec[idx]
        H = priors.truncation
        cdf = ReferenceCdf(rec[:, :H], center + scale * rec[:, H : 2 * H], scale * rec[:, -1], mode)
    else:
        raise InputError(f"unknown reference mode {mode!r}; expected one of {MODES}")
    cdf.diagnostics = diag
    return cdf
