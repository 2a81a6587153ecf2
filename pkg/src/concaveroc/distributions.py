"""Distribution functions used by the ROC models and truth formulas.

Each distribution is a small immutable object exposing ``cdf``, ``quantile``,
``logpdf`` and ``sample``.  All methods broadcast over numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "UnivariateDist",
    "Normal",
    "Gamma",
    "NoncentralChiSq1",
    "FDist",
    "Beta",
    "Uniform",
    "InverseGamma",
    "bracketed_root",
    "ncx1_sqrt_quantile",
    "bvn_cdf",
    "norm_cdf",
    "norm_ppf",
]

norm_cdf = special.ndtr
norm_ppf = special.ndtri


def _check_prob(p):
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0) & (p < 1))):
        raise ValueError("quantile requires probabilities strictly inside (0, 1)")
    return p


def bracketed_root(f, fprime, target, lo, hi, xtol=1e-10, maxiter=200, x0=None):
    """Vectorized safeguarded Newton/bisection for increasing ``f``.

    Solves ``f(x) = target`` elementwise, assuming ``f(lo) <= target <= f(hi)``.
    A Newton step is taken whenever it stays inside the current bracket,
    otherwise the bracket is bisected.
    """
    target = np.asarray(target, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), target.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), target.shape).copy()
    x = 0.5 * (lo + hi) if x0 is None else np.clip(np.broadcast_to(x0, target.shape), lo, hi)
    active = np.ones(target.shape, dtype=bool)
    for _ in range(maxiter):
        fx = f(x) - target
        lo = np.where(fx < 0, x, lo)
        hi = np.where(fx > 0, x, hi)
        d = fprime(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = x - fx / d
        ok = np.isfinite(newton) & (newton > lo) & (newton < hi)
        x_new = np.where(ok, newton, 0.5 * (lo + hi))
        x_new = np.where(fx == 0, x, x_new)
        step = np.abs(x_new - x)
        x = np.where(active, x_new, x)
        active &= (step > xtol * (1.0 + np.abs(x))) & (hi - lo > xtol * (1.0 + np.abs(x)))
        if not active.any():
            break
    return x


def ncx1_sqrt_quantile(p, r):
    """Square root of the noncentral chi-square(1) quantile, broadcasting over ``p`` and ``r``.

    Solves ``Phi(s - r) - Phi(-s - r) = p`` for ``s >= 0`` (``r = sqrt(nc)``).
    """
    p, r = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(r, dtype=float))
    c = 1.0 / np.sqrt(2 * np.pi)

    def f(s):
        return norm_cdf(s - r) - norm_cdf(-s - r)

    def fp(s):
        return c * (np.exp(-0.5 * (s - r) ** 2) + np.exp(-0.5 * (s + r) ** 2))

    # folded-normal guess near r = 0, shifted-normal guess for large r
    x0 = np.maximum(r + norm_ppf(p), norm_ppf((1 + p) / 2))
    return bracketed_root(f, fp, p, 0.0, r + 40.0, x0=x0)


class UnivariateDist:
    """Common interface; subclasses validate their parameters on construction."""

    def cdf(self, x):
        raise NotImplementedError

    def quantile(self, p):
        raise NotImplementedError

    def logpdf(self, x):
        raise NotImplementedError

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if n < 1:
            raise ValueError("n must be at least 1")
        return self._sample(rng, int(n))

    def _sample(self, rng, n):
        return self.quantile(rng.uniform(size=n))


def _positive(name, value):
    if not (np.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class Normal(UnivariateDist):
    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        _positive("sd", self.sd)
        if not np.isfinite(self.mean):
            raise ValueError("mean must be finite")

    def cdf(self, x):
        return norm_cdf((np.asarray(x, dtype=float) - self.mean) / self.sd)

    def quantile(self, p):
        return self.mean + self.sd * norm_ppf(_check_prob(p))

    def logpdf(self, x):
        u = (np.asarray(x, dtype=float) - self.mean) / self.sd
        return -0.5 * u * u - np.log(self.sd) - 0.5 * np.log(2 * np.pi)

    def _sample(self, rng, n):
        return rng.normal(self.mean, self.sd, size=n)


@dataclass(frozen=True)
class Gamma(UnivariateDist):
    """Gamma with shape ``k`` and scale ``phi`` (mean ``k * phi``)."""

    shape: float
    scale: float = 1.0

    def __post_init__(self):
        _positive("shape", self.shape)
        _positive("scale", self.scale)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return special.gammainc(self.shape, np.maximum(x, 0.0) / self.scale)

    def quantile(self, p):
        return self.scale * special.gammaincinv(self.shape, _check_prob(p))

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (
                (self.shape - 1) * np.log(x)
                - x / self.scale
                - special.gammaln(self.shape)
                - self.shape * np.log(self.scale)
            )
        return np.where(x > 0, out, -np.inf)

    def _sample(self, rng, n):
        return rng.gamma(self.shape, self.scale, size=n)


@dataclass(frozen=True)
class NoncentralChiSq1(UnivariateDist):
    """Noncentral chi-square with one degree of freedom: ``(Z + sqrt(nc))**2``."""

    noncentrality: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.noncentrality) and self.noncentrality >= 0):
            raise ValueError("noncentrality must be finite and >= 0")

    def _cdf_sqrt(self, s):
        r = np.sqrt(self.noncentrality)
        return norm_cdf(s - r) - norm_cdf(-s - r)

    def _pdf_sqrt(self, s):
        r = np.sqrt(self.noncentrality)
        c = 1.0 / np.sqrt(2 * np.pi)
        return c * (np.exp(-0.5 * (s - r) ** 2) + np.exp(-0.5 * (s + r) ** 2))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        s = np.sqrt(np.maximum(x, 0.0))
        return np.where(x > 0, self._cdf_sqrt(s), 0.0)

    def quantile(self, p):
        s = ncx1_sqrt_quantile(_check_prob(p), np.sqrt(self.noncentrality))
        return s * s

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.sqrt(x)
            out = np.log(self._pdf_sqrt(s)) - np.log(2 * s)
        return np.where(x > 0, out, -np.inf)

    def _sample(self, rng, n):
        return (rng.standard_normal(n) + np.sqrt(self.noncentrality)) ** 2


@dataclass(frozen=True)
class FDist(UnivariateDist):
    df1: float
    df2: float

    def __post_init__(self):
        _positive("df1", self.df1)
        _positive("df2", self.df2)

    def cdf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        # fdtr returns nan at +inf; the limit is 1
        return np.where(np.isposinf(x), 1.0, special.fdtr(self.df1, self.df2, np.where(np.isposinf(x), 0.0, x)))

    def quantile(self, p):
        return special.fdtri(self.df1, self.df2, _check_prob(p))

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        a, b = self.df1 / 2, self.df2 / 2
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (
                a * np.log(self.df1 / self.df2)
                + (a - 1) * np.log(x)
                - (a + b) * np.log1p(self.df1 * x / self.df2)
                - special.betaln(a, b)
            )
        return np.where(x > 0, out, -np.inf)

    def _sample(self, rng, n):
        return rng.f(self.df1, self.df2, size=n)


@dataclass(frozen=True)
class Beta(UnivariateDist):
    a: float
    b: float

    def __post_init__(self):
        _positive("a", self.a)
        _positive("b", self.b)

    def cdf(self, x):
        return special.betainc(self.a, self.b, np.clip(np.asarray(x, dtype=float), 0, 1))

    def quantile(self, p):
        return special.betaincinv(self.a, self.b, _check_prob(p))

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (
                (self.a - 1) * np.log(x)
                + (self.b - 1) * np.log1p(-x)
                - special.betaln(self.a, self.b)
            )
        return np.where((x > 0) & (x < 1), out, -np.inf)

    def _sample(self, rng, n):
        return rng.beta(self.a, self.b, size=n)


@dataclass(frozen=True)
class Uniform(UnivariateDist):
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.lo < self.hi):
            raise ValueError("Uniform requires finite lo < hi")

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def quantile(self, p):
        return self.lo + (self.hi - self.lo) * _check_prob(p)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.lo) & (x <= self.hi), -np.log(self.hi - self.lo), -np.inf)

    def _sample(self, rng, n):
        return rng.uniform(self.lo, self.hi, size=n)


@dataclass(frozen=True)
class InverseGamma(UnivariateDist):
    """Inverse gamma with ``shape`` and ``rate`` (1/X ~ Gamma(shape, scale=1/rate))."""

    shape: float
    rate: float

    def __post_init__(self):
        _positive("shape", self.shape)
        _positive("rate", self.rate)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(x > 0, special.gammaincc(self.shape, self.rate / np.maximum(x, 1e-300)), 0.0)

    def quantile(self, p):
        return self.rate / special.gammainccinv(self.shape, _check_prob(p))

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (
                self.shape * np.log(self.rate)
                - special.gammaln(self.shape)
                - (self.shape + 1) * np.log(x)
                - self.rate / x
            )
        return np.where(x > 0, out, -np.inf)

    def _sample(self, rng, n):
        return self.rate / rng.gamma(self.shape, 1.0, size=n)


# Gauss-Legendre nodes/weights on (-1, 1) for the bivariate normal integral.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


def bvn_cdf(x, y, rho):
    """Standard bivariate normal CDF ``P(X <= x, Y <= y)`` with correlation ``rho``.

    Uses the Drezner-Wesolowsky / Genz formulation: Plackett's identity
    integrated over the correlation with 20-point Gauss-Legendre for
    ``|rho| < 0.925`` and the Drezner series on the asymptotic remainder
    otherwise.  Accuracy is close to double precision.
    """
    x, y, rho = np.broadcast_arrays(
        np.asarray(x, dtype=float), np.asarray(y, dtype=float), np.asarray(rho, dtype=float)
    )
    if np.any(np.abs(rho) >= 1):
        raise ValueError("bvn_cdf requires |rho| < 1")
    out = np.empty(x.shape)
    flat = zip(x.ravel(), y.ravel(), rho.ravel())
    for i, (xi, yi, ri) in enumerate(flat):
        out.flat[i] = _bvn_scalar(xi, yi, ri)
    return out if out.ndim else float(out)


def _bvn_upper(h, k, r):
    """Genz's BVNU: ``P(X > h, Y > k)`` for finite h, k."""
    hk = h * k
    if abs(r) < 0.925:
        hs = (h * h + k * k) / 2
        asr = np.arcsin(r)
        sn = np.sin(asr * (_GL_X + 1) / 2)
        bvn = np.sum(_GL_W * np.exp((sn * hk - hs) / (1 - sn * sn)))
        bvn = bvn * asr / (4 * np.pi)
        return bvn + norm_cdf(-h) * norm_cdf(-k)

    if r < 0:
        k = -k
        hk = -hk
    bvn = 0.0
    if abs(r) < 1:
        as_ = (1 - r) * (1 + r)
        a = np.sqrt(as_)
        bs = (h - k) ** 2
        c = (4 - hk) / 8
        d = (12 - hk) / 16
        asr = -(bs / as_ + hk) / 2
        if asr > -100:
            bvn = a * np.exp(asr) * (1 - c * (bs - as_) * (1 - d * bs / 5) / 3 + c * d * as_ * as_ / 5)
        if hk > -100:
            b = np.sqrt(bs)
            bvn -= (
                np.exp(-hk / 2)
                * np.sqrt(2 * np.pi)
                * norm_cdf(-b / a)
                * b
                * (1 - c * bs * (1 - d * bs / 5) / 3)
            )
        a = a / 2
        xs = (a * (_GL_X + 1)) ** 2
        rs = np.sqrt(1 - xs)
        asr = -(bs / xs + hk) / 2
        keep = asr > -100
        xs, rs, asr, w = xs[keep], rs[keep], asr[keep], _GL_W[keep]
        terms = a * w * np.exp(asr) * (
            np.exp(-hk * xs / (2 * (1 + rs) ** 2)) / rs - (1 + c * xs * (1 + d * xs))
        )
        bvn += np.sum(terms)
        bvn = -bvn / (2 * np.pi)
    if r > 0:
        bvn += norm_cdf(-max(h, k))
    else:
        bvn = -bvn
        if k > h:
            bvn += norm_cdf(k) - norm_cdf(h)
    return bvn


def _bvn_scalar(x, y, r):
    if np.isnan(x) or np.isnan(y):
        return np.nan
    if x == -np.inf or y == -np.inf:
        return 0.0
    if x == np.inf:
        return float(norm_cdf(y))
    if y == np.inf:
        return float(norm_cdf(x))
    # P(X <= x, Y <= y) = P(-X >= -x, -Y >= -y), same correlation.
    val = _bvn_upper(-x, -y, r)
    return float(min(max(val, 0.0), 1.0))
