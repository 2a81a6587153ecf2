"""Sampling kernels, a multi-chain driver and convergence diagnostics."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

from .distributions import norm_cdf, norm_ppf

log = logging.getLogger(__name__)

RHAT_THRESHOLD = 1.1


@dataclass(frozen=True)
class ChainConfig:
    """MCMC run lengths. ``keep`` is the retained draw count per chain."""

    n_chains: int = 4
    burn_in: int = 2000
    keep: int = 1250
    thin: int = 1
    seed: int = 0

    def __post_init__(self):
        for name in ("n_chains", "burn_in", "keep", "thin"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")
        if self.keep < 1000:
            raise ValueError("keep must be at least 1000")

    @property
    def total_draws(self) -> int:
        return self.n_chains * self.keep


@dataclass
class ChainDiagnostics:
    """R-hat and ESS per monitored scalar.

    ``converged`` is decided by ``r_hat`` alone.  ``advisory_r_hat`` holds
    quantities that are reported but do not gate convergence (e.g. mixture
    internals that are only weakly identified).
    """

    r_hat: dict[str, float]
    effective_sample_size: dict[str, float]
    converged: bool
    advisory_r_hat: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "r_hat": {k: float(v) for k, v in sorted(self.r_hat.items())},
            "effective_sample_size": {k: float(v) for k, v in sorted(self.effective_sample_size.items())},
            "converged": bool(self.converged),
            "advisory_r_hat": {k: float(v) for k, v in sorted(self.advisory_r_hat.items())},
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


# ----------------------------------------------------------------------------
# kernels


def slice_sample_1d(log_density, current, width, lower=-np.inf, upper=np.inf, rng=None, max_steps=100):
    """One univariate slice-sampling update with stepping out and shrinkage.

    The interval is clipped to ``[lower, upper]`` so the returned point always
    respects the bounds.
    """
    rng = np.random.default_rng() if rng is None else rng
    f0 = log_density(current)
    if not np.isfinite(f0):
        raise ValueError("log density must be finite at the current point")
    if not lower < upper:
        raise ValueError("slice sampler requires lower < upper")
    level = f0 - rng.exponential()
    left = current - width * rng.uniform()
    right = left + width
    j = int(np.floor(max_steps * rng.uniform()))
    k = max_steps - 1 - j
    while j > 0 and left > lower and log_density(left) > level:
        left -= width
        j -= 1
    while k > 0 and right < upper and log_density(right) > level:
        right += width
        k -= 1
    left = max(left, lower)
    right = min(right, upper)
    while True:
        x = min(max(rng.uniform(left, right), lower), upper)
        if log_density(x) > level:
            return x
        if x < current:
            left = x
        else:
            right = x
        if right - left < 1e-14 * (1 + abs(current)):
            return current


def truncnorm_sample(mean, sd, lo, hi, rng):
    """Vectorized draw from N(mean, sd^2) restricted to [lo, hi].

    Inverse-CDF sampling evaluated on whichever tail keeps precision.
    """
    a = (lo - mean) / sd
    b = (hi - mean) / sd
    u = rng.uniform(size=np.shape(a))
    # work on the side with smaller tail mass: flip when a > 0
    flip = a > 0
    lo_s = np.where(flip, -b, a)
    hi_s = np.where(flip, -a, b)
    pl = norm_cdf(lo_s)
    ph = norm_cdf(hi_s)
    p = pl + u * (ph - pl)
    with np.errstate(divide="ignore"):
        s = norm_ppf(p)
    s = np.clip(s, lo_s, hi_s)
    # both bounds far in the upper tail collapse pl == ph; fall back to the lower bound
    degenerate = ~np.isfinite(s)
    if degenerate.any():
        s = np.where(degenerate, lo_s, s)
    s = np.where(flip, -s, s)
    return mean + sd * s


def pv_latent_update(x, z_lower, mean, sd, rng):
    """Slice update for latent probits under ``N(x; mean, sd^2) / Phi(x)`` on ``x >= z_lower``.

    An auxiliary height ``u ~ U(0, 1/Phi(x))`` turns the ``1/Phi`` factor into
    the interval ``Phi(x_new) < Phi(x) / e`` with ``e ~ U(0, 1)``; the new point
    is then an exact truncated-normal draw on that slice.  No tuning needed.
    """
    e = rng.uniform(size=np.shape(x))
    w_cap = norm_cdf(x) / np.maximum(e, 1e-300)
    with np.errstate(divide="ignore"):
        upper = np.where(w_cap >= 1.0, np.inf, norm_ppf(np.minimum(w_cap, 1.0)))
    new = truncnorm_sample(mean, sd, z_lower, upper, rng)
    return np.maximum(new, z_lower)


def gibbs_normal_mean(data, sigma2, prior_mean, prior_var, rng) -> float:
    """Draw from the conjugate posterior of a normal mean with known variance."""
    if not (sigma2 > 0 and prior_var > 0):
        raise ValueError("variances must be positive")
    data = np.asarray(data, dtype=float)
    n = data.size
    prec = 1.0 / prior_var + n / sigma2
    mean = (prior_mean / prior_var + data.sum() / sigma2) / prec
    return float(mean + rng.standard_normal() / np.sqrt(prec))


def gibbs_inverse_gamma_var(residuals, shape0=0.01, rate0=0.01, rng=None) -> float:
    """Draw sigma^2 from IG(shape0 + n/2, rate0 + sum(r^2)/2)."""
    r = np.asarray(residuals, dtype=float)
    shape = shape0 + r.size / 2.0
    rate = rate0 + 0.5 * float(r @ r)
    return float(rate / rng.gamma(shape))


# ----------------------------------------------------------------------------
# diagnostics


def gelman_rubin(chains) -> float:
    """Potential scale reduction factor for an (n_chains, n) array."""
    chains = np.asarray(chains, dtype=float)
    m, n = chains.shape
    if m < 2 or n < 2:
        return float("nan")
    means = chains.mean(axis=1)
    W = chains.var(axis=1, ddof=1).mean()
    B = n * means.var(ddof=1)
    if W == 0:
        return 1.0 if B == 0 else float("inf")
    var_plus = (n - 1) / n * W + B / n
    return float(np.sqrt(var_plus / W))


def effective_sample_size(chains) -> float:
    """Multi-chain ESS with Geyer's initial monotone sequence."""
    chains = np.atleast_2d(np.asarray(chains, dtype=float))
    m, n = chains.shape
    if n < 4:
        return float(m * n)
    centered = chains - chains.mean(axis=1, keepdims=True)
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(centered, nfft, axis=1)
    acov = np.fft.irfft(f * np.conjugate(f), nfft, axis=1)[:, :n] / n
    chain_var = acov[:, 0] * n / (n - 1)
    W = chain_var.mean()
    B = n * chains.mean(axis=1).var(ddof=1) if m > 1 else 0.0
    var_plus = (n - 1) / n * W + B / n
    if var_plus <= 0:
        return float(m * n)
    rho = 1.0 - (W - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    # pair sums, truncated at the first negative pair, made monotone
    pairs = rho[: n - n % 2].reshape(-1, 2).sum(axis=1)
    neg = np.nonzero(pairs < 0)[0]
    if neg.size:
        pairs = pairs[: neg[0]]
    pairs = np.minimum.accumulate(pairs)
    tau = -1.0 + 2.0 * pairs.sum()
    tau = max(tau, 1.0 / np.log10(m * n + 10))
    return float(m * n / tau)


def diagnose(monitors: dict[str, np.ndarray], advisory=()) -> ChainDiagnostics:
    """R-hat/ESS for every monitor; names in ``advisory`` do not gate convergence."""
    r_hat = {k: gelman_rubin(v) for k, v in monitors.items() if k not in advisory}
    extra = {k: gelman_rubin(v) for k, v in monitors.items() if k in advisory}
    ess = {k: effective_sample_size(v) for k, v in monitors.items()}
    finite = [v for v in r_hat.values() if np.isfinite(v)]
    converged = bool(finite) and all(v < RHAT_THRESHOLD for v in finite) and len(finite) == len(r_hat)
    return ChainDiagnostics(r_hat, ess, converged, extra)


# ----------------------------------------------------------------------------
# chain driver


class Kernel(Protocol):
    """A model's MCMC sweep.

    ``init`` builds a dispersed starting state for chain ``chain``; ``step``
    performs one full sweep in place; ``monitor`` returns the scalar
    quantities used for diagnostics; ``record`` returns any array to keep per
    retained draw (may be ``None``).
    """

    def init(self, rng: np.random.Generator, chain: int): ...

    def step(self, state, rng: np.random.Generator): ...

    def monitor(self, state) -> dict[str, float]: ...

    def record(self, state): ...


@dataclass
class Draws:
    """Retained draws: scalars per chain and optional per-draw arrays."""

    scalars: dict[str, np.ndarray]  # name -> (n_chains, keep)
    records: np.ndarray | None = None  # (n_chains, keep, ...) or None
    meta: dict = field(default_factory=dict)

    def flat(self, name: str) -> np.ndarray:
        return self.scalars[name].reshape(-1)

    def flat_records(self) -> np.ndarray | None:
        if self.records is None:
            return None
        return self.records.reshape((-1,) + self.records.shape[2:])

    def to_csv(self, path=None) -> str:
        lines = ["chain,iter,param,value"]
        for name in sorted(self.scalars):
            arr = self.scalars[name]
            for c in range(arr.shape[0]):
                for i in range(arr.shape[1]):
                    lines.append(f"{c},{i},{name},{arr[c, i]:.6f}")
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8", newline="")
        return text

    @classmethod
    def from_csv(cls, text: str) -> "Draws":
        rows = list(csv.reader(text.splitlines()))
        if rows[0] != ["chain", "iter", "param", "value"]:
            raise ValueError("draws CSV must start with 'chain,iter,param,value'")
        acc: dict[str, dict[tuple[int, int], float]] = {}
        for c, i, p, v in rows[1:]:
            acc.setdefault(p, {})[(int(c), int(i))] = float(v)
        scalars = {}
        for p, cells in acc.items():
            m = 1 + max(c for c, _ in cells)
            n = 1 + max(i for _, i in cells)
            arr = np.empty((m, n))
            for (c, i), v in cells.items():
                arr[c, i] = v
            scalars[p] = arr
        return cls(scalars)


def derive_seed(seed, *keys) -> tuple[int, ...]:
    """Flatten a seed (int or int sequence) plus extra integer keys into one entropy tuple."""
    base = tuple(np.atleast_1d(np.asarray(seed, dtype=np.int64)).tolist())
    return base + tuple(int(k) for k in keys)


def chain_rngs(seed, n_chains: int) -> list[np.random.Generator]:
    ss = np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(n_chains)]


def run_chains(kernel: Kernel, config: ChainConfig, seed=None) -> tuple[Draws, ChainDiagnostics]:
    """Run ``config.n_chains`` chains sequentially and diagnose them.

    Each chain owns its generator, spawned from ``seed`` (defaults to
    ``config.seed``), so results do not depend on execution order.
    Non-convergence is flagged in the diagnostics, never raised.
    """
    rngs = chain_rngs(config.seed if seed is None else seed, config.n_chains)
    scalars: dict[str, list[np.ndarray]] = {}
    records = []
    for c, rng in enumerate(rngs):
        state = kernel.init(rng, c)
        for _ in range(config.burn_in):
            state = kernel.step(state, rng)
        chain_scalars: dict[str, np.ndarray] = {}
        chain_records = None
        for i in range(config.keep):
            for _ in range(config.thin):
                state = kernel.step(state, rng)
            mon = kernel.monitor(state)
            for k, v in mon.items():
                chain_scalars.setdefault(k, np.empty(config.keep))[i] = v
            rec = kernel.record(state)
            if rec is not None:
                if chain_records is None:
                    chain_records = np.empty((config.keep,) + np.shape(rec))
                chain_records[i] = rec
        for k, v in chain_scalars.items():
            scalars.setdefault(k, []).append(v)
        records.append(chain_records)
    stacked = {k: np.vstack(v) for k, v in scalars.items()}
    rec_arr = None if records[0] is None else np.stack(records)
    diagnostics = diagnose(stacked, getattr(kernel, "advisory", ()))
    if not diagnostics.converged:
        log.warning("chains not converged: %s", {k: round(v, 3) for k, v in diagnostics.r_hat.items()})
    return Draws(stacked, rec_arr), diagnostics


def geweke_joint_test(
    prior_draw: Callable,
    data_draw: Callable,
    posterior_step: Callable,
    functionals: Callable,
    n_prior: int,
    n_successive: int,
    rng: np.random.Generator,
    batch: int = 50,
):
    """Compare marginal-conditional and successive-conditional simulators.

    ``prior_draw(rng) -> theta``; ``data_draw(theta, rng) -> data``;
    ``posterior_step(theta, data, rng) -> theta`` is the kernel under test;
    ``functionals(theta) -> 1-D array``.  Returns z-scores per functional,
    using batch means for the autocorrelated successive-conditional chain.
    """
    mc = np.array([functionals(prior_draw(rng)) for _ in range(n_prior)])
    theta = prior_draw(rng)
    data = data_draw(theta, rng)
    sc = np.empty((n_successive, mc.shape[1]))
    for i in range(n_successive):
        theta = posterior_step(theta, data, rng)
        data = data_draw(theta, rng)
        sc[i] = functionals(theta)
    nb = n_successive // batch
    bm = sc[: nb * batch].reshape(nb, batch, -1).mean(axis=1)
    se_sc = bm.std(axis=0, ddof=1) / np.sqrt(nb)
    se_mc = mc.std(axis=0, ddof=1) / np.sqrt(n_prior)
    return (sc.mean(axis=0) - mc.mean(axis=0)) / np.sqrt(se_sc**2 + se_mc**2)


def log_gamma_prior(x, shape, rate):
    """Log Gamma(shape, rate) density, up to a constant, for x > 0."""
    return (shape - 1) * np.log(x) - rate * x


__all__ = [
    "ChainConfig",
    "ChainDiagnostics",
    "Draws",
    "Kernel",
    "chain_rngs",
    "derive_seed",
    "diagnose",
    "effective_sample_size",
    "gelman_rubin",
    "geweke_joint_test",
    "gibbs_inverse_gamma_var",
    "gibbs_normal_mean",
    "pv_latent_update",
    "run_chains",
    "slice_sample_1d",
    "truncnorm_sample",
]
