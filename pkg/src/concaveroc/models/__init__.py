"""The five ROC models and a single entry point that dispatches between them."""

from __future__ import annotations

from ..errors import InputError
from ..mcmc import ChainConfig, derive_seed
from ..roc import Sample, placement_values
from .base import CONCAVE_MODELS, MODEL_IDS, ModelFit
from .bigamma import BigammaParams, bg_auc, bg_roc_values, fit_bg, positive_shift
from .binormal import BinormalParams, PbnParams, fit_bn, fit_pbn, pbn_auc, pbn_roc_values
from .concave import DEFAULT_PRIORS, Priors, fit_pcn, fit_spcn
from .reference import ReferenceCdf, estimate_reference_cdf

__all__ = [
    "BigammaParams",
    "BinormalParams",
    "CONCAVE_MODELS",
    "DEFAULT_PRIORS",
    "MODEL_IDS",
    "ModelFit",
    "PbnParams",
    "Priors",
    "ReferenceCdf",
    "bg_auc",
    "bg_roc_values",
    "estimate_reference_cdf",
    "fit_bg",
    "fit_bn",
    "fit_model",
    "fit_pbn",
    "fit_pcn",
    "fit_spcn",
    "normalize_model_id",
    "pbn_auc",
    "pbn_roc_values",
    "placement_values_for",
    "positive_shift",
]


def normalize_model_id(name: str) -> str:
    lookup = {m.lower(): m for m in MODEL_IDS}
    try:
        return lookup[name.strip().lower()]
    except KeyError:
        raise InputError(f"unknown model {name!r}; valid models: {', '.join(MODEL_IDS)}") from None


def placement_values_for(sample: Sample, reference_mode: str, cfg: ChainConfig, seed=None):
    """Two-stage PVs: fit the reference CDF, then ``z = 1 - F0_hat(Y1)``."""
    if seed is not None:
        cfg = ChainConfig(cfg.n_chains, cfg.burn_in, cfg.keep, cfg.thin, seed)
    f0 = estimate_reference_cdf(sample.scores0, reference_mode, cfg)
    return placement_values(sample, f0), f0


def fit_model(name: str, sample: Sample, cfg: ChainConfig | None = None, grid=None, reference_mode: str = "parametric", shift_for_bg: bool = False) -> ModelFit:
    """Fit one model by id.  PV models run the two-stage placement-value fit."""
    cfg = cfg or ChainConfig()
    model = normalize_model_id(name)
    if model == "BN":
        return fit_bn(sample, cfg, grid)
    if model == "PBN":
        return fit_pbn(sample, cfg, grid)
    if model == "BG":
        return fit_bg(positive_shift(sample) if shift_for_bg else sample, cfg, grid)
    z, f0 = placement_values_for(sample, reference_mode, cfg, seed=derive_seed(cfg.seed, 99))
    fitter = fit_pcn if model == "pCN" else fit_spcn
    fit = fitter(z, cfg, grid, n0=sample.n0)
    fit.notes.append(f"placement values from {reference_mode} reference fit")
    fit.reference_diagnostics = f0.diagnostics
    return fit
