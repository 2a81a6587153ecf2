import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from concaveroc.errors import FitError, InputError
from concaveroc.mcmc import ChainConfig
from concaveroc.models import (
    MODEL_IDS,
    fit_model,
    normalize_model_id,
)
from concaveroc.models.bigamma import bg_auc, bg_roc_values
from concaveroc.models.binormal import pbn_auc, pbn_roc_values
from concaveroc.models.concave import fit_pcn, fit_spcn
from concaveroc.models.reference import estimate_reference_cdf
from concaveroc.roc import Sample, default_grid, mann_whitney_auc

GRID = default_grid()


def _lr_auc_mc(alpha0, alpha1, rng, n=10**6):
    """AUC of the likelihood-ratio score for Y0 ~ N(0,1), Y1 ~ N(a/b, 1/b^2)."""
    mu, s = alpha0 / alpha1, 1 / alpha1

    def llr(y):
        return -np.log(s) - (y - mu) ** 2 / (2 * s * s) + y * y / 2

    y0 = rng.standard_normal(n)
    y1 = mu + s * rng.standard_normal(n)
    return mann_whitney_auc(llr(y0), llr(y1))


# ----------------------------------------------------------------------------
# closed forms


@pytest.mark.parametrize("a0,a1", [(0.5, 0.7), (0.5, 0.45), (0.5, 0.28), (0.8, 1.6), (0.0, 0.5), (1.0, 2.5)])
def test_pbn_auc_against_likelihood_ratio_monte_carlo(a0, a1, rng):
    assert pbn_auc(a0, a1)[0] == pytest.approx(_lr_auc_mc(a0, a1, rng), abs=3e-3)


@pytest.mark.parametrize("a0,a1", [(0.5, 0.45), (0.8, 1.6)])
def test_pbn_curve_matches_its_auc_and_is_proper(a0, a1):
    v = pbn_roc_values(a0, a1, GRID)[0]
    assert np.trapezoid(v, GRID) == pytest.approx(pbn_auc(a0, a1)[0], abs=1e-3)
    assert np.all(v >= GRID - 1e-12)
    assert np.all(np.diff(v) >= -1e-12)


def test_pbn_branches_agree_across_lambda_one():
    # alpha1 just below, at, and just above 1
    curves = pbn_roc_values([0.7, 0.7, 0.7], [1 - 1e-3, 1.0, 1 + 1e-3], GRID)
    assert np.max(np.abs(curves[0] - curves[1])) < 5e-3
    assert np.max(np.abs(curves[2] - curves[1])) < 5e-3
    aucs = pbn_auc([0.7] * 3, [1 - 1e-3, 1.0, 1 + 1e-3])
    assert np.ptp(aucs) < 1e-3


@settings(max_examples=40)
@given(st.floats(-3, 3), st.floats(0.1, 3.0))
def test_pbn_auc_is_at_least_half(a0, a1):
    v = pbn_auc(a0, a1)[0]
    assert 0.5 - 1e-9 <= v <= 1.0


def test_bg_closed_form_against_monte_carlo(rng):
    for k, p0, p1 in [(1.0, 1.0, 2.0), (2.5, 1.0, 3.5), (0.7, 2.0, 9.0)]:
        y0 = rng.gamma(k, p0, 10**6)
        y1 = rng.gamma(k, p1, 10**6)
        assert float(bg_auc(k, p0, p1)) == pytest.approx(mann_whitney_auc(y0, y1), abs=3e-3)
        v = bg_roc_values(k, p0, p1, GRID)[0]
        assert np.trapezoid(v, GRID) == pytest.approx(float(bg_auc(k, p0, p1)), abs=2e-3)
    assert float(bg_auc(1.0, 1.0, 2.0)) == pytest.approx(2 / 3, abs=1e-12)


# ----------------------------------------------------------------------------
# fitted models


def test_bn_recovers_normal_shift(rng, fast_chains):
    s = Sample(rng.standard_normal(500), 1 + rng.standard_normal(500))
    fit = fit_model("BN", s, fast_chains)
    assert fit.converged
    assert fit.auc_summary()["mean"] == pytest.approx(0.760, abs=0.02)
    assert fit.concavity_violations is None


def test_bn_identical_groups_give_half(rng, fast_chains):
    y = rng.standard_normal(400)
    fit = fit_model("BN", Sample(y, y.copy()), fast_chains)
    assert fit.auc_summary()["mean"] == pytest.approx(0.5, abs=0.02)


def test_bg_recovers_exponential_scale_ratio(rng, fast_chains):
    s = Sample(rng.gamma(1.0, 1.0, 600), rng.gamma(1.0, 2.0, 600))
    fit = fit_model("BG", s, fast_chains)
    assert fit.converged
    assert fit.auc_summary()["mean"] == pytest.approx(2 / 3, abs=0.02)


def test_bg_rejects_nonpositive_scores(fast_chains):
    with pytest.raises(InputError, match="reference"):
        fit_model("BG", Sample([-1.0, 2.0, 3.0], [1.0, 2.0, 4.0]), fast_chains)
    with pytest.raises(InputError, match="affected"):
        fit_model("BG", Sample([1.0, 2.0, 3.0], [0.0, 2.0, 4.0]), fast_chains)
    fit = fit_model("BG", Sample([-1.0, 2.0, 3.0, 0.5], [1.0, 2.0, 4.0, 5.0]), fast_chains, shift_for_bg=True)
    assert 0.5 <= fit.auc_summary()["mean"] <= 1


def test_pbn_fit_recovers_truth(rng, fast_chains):
    a0, a1 = 0.5, 0.45
    y0 = rng.standard_normal(1000)
    y1 = a0 / a1 + rng.standard_normal(1000) / a1
    fit = fit_model("PBN", Sample(y0, y1), fast_chains)
    assert fit.converged
    assert fit.auc_summary()["mean"] == pytest.approx(pbn_auc(a0, a1)[0], abs=0.02)


def _pcn_pv(alpha0, alpha1, n, rng):
    # z = Phi(X), X ~ N(alpha0/alpha1, 1/alpha1^2) truncated to X >= Phi^{-1}(U) via W*V construction
    from concaveroc.distributions import norm_cdf

    w = norm_cdf(alpha0 / alpha1 + rng.standard_normal(n) / alpha1)
    return w * rng.uniform(size=n)


def test_pcn_recovers_medium_scenario(rng, fast_chains):
    from concaveroc.simulation import pcn_closed_form_auc

    z = _pcn_pv(0.1, 3.0, 1000, rng)
    fit = fit_pcn(z, fast_chains, n0=1000)
    assert fit.converged
    assert fit.auc_summary()["mean"] == pytest.approx(pcn_closed_form_auc(0.1, 3.0), abs=0.02)
    assert fit.concavity_violations == 0
    assert np.all((fit.auc_draws >= 0.5) & (fit.auc_draws <= 1.0))


def test_pcn_placement_values_near_one_give_half(fast_chains):
    fit = fit_pcn(np.full(200, 1.0), fast_chains, n0=200)
    assert fit.auc_summary()["mean"] == pytest.approx(0.5, abs=0.02)


def test_spcn_agrees_with_pcn_on_single_normal_latents(rng, fast_chains):
    z = _pcn_pv(1.0, 1.0, 500, rng)
    a = fit_pcn(z, fast_chains, n0=500).auc_summary()["mean"]
    b = fit_spcn(z, fast_chains, n0=500).auc_summary()["mean"]
    assert a == pytest.approx(b, abs=0.01)


def test_spcn_degenerate_equal_placement_values(fast_chains):
    fit = fit_spcn(np.full(100, 0.4), fast_chains, n0=100)
    assert fit.concavity_violations == 0
    assert np.all((fit.auc_draws >= 0.5) & (fit.auc_draws <= 1.0))


def test_concave_models_reject_bad_placement_values(fast_chains):
    with pytest.raises(InputError):
        fit_pcn([0.2, 1.3], fast_chains)
    with pytest.raises(InputError):
        fit_spcn([], fast_chains)


# ----------------------------------------------------------------------------
# reference CDF


def test_parametric_reference_cdf(rng, fast_chains):
    f0 = estimate_reference_cdf(2 + rng.standard_normal(2000), "parametric", fast_chains)
    assert f0(np.array([2.0]))[0] == pytest.approx(0.5, abs=0.03)


def _ks(cdf, y):
    ys = np.sort(y)
    f = cdf(ys)
    e = np.arange(1, ys.size + 1) / ys.size
    return max(np.max(e - f), np.max(f - e + 1 / ys.size))


def test_dpm_reference_beats_parametric_on_bimodal_data(rng, fast_chains):
    y = np.concatenate([rng.normal(-3, 0.7, 400), rng.normal(3, 0.7, 400)])
    par = estimate_reference_cdf(y, "parametric", fast_chains)
    dpm = estimate_reference_cdf(y, "dpm", fast_chains)
    assert _ks(dpm, y) < _ks(par, y)
    assert _ks(dpm, y) < 0.05


def test_reference_cdf_errors(fast_chains):
    with pytest.raises(FitError):
        estimate_reference_cdf([1.0, 2.0], "parametric", fast_chains)
    with pytest.raises(FitError):
        estimate_reference_cdf([1.0, 1.0, 1.0, 1.0], "parametric", fast_chains)
    with pytest.raises(InputError):
        estimate_reference_cdf([1.0, 2.0, 3.0], "kernel", fast_chains)


# ----------------------------------------------------------------------------
# dispatch, errors, serialization


def test_model_ids_are_case_insensitive():
    assert normalize_model_id("pcn") == "pCN"
    assert normalize_model_id(" SPCN ") == "spCN"
    with pytest.raises(InputError, match="valid models"):
        normalize_model_id("roc")


def test_zero_variance_group_is_a_fit_error(fast_chains):
    with pytest.raises(FitError, match="zero variance"):
        fit_model("BN", Sample([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]), fast_chains)


def test_all_models_fit_and_serialize(rng, tmp_path):
    cfg = ChainConfig(n_chains=2, burn_in=100, keep=1000, seed=3)
    s = Sample(np.exp(rng.standard_normal(150)), np.exp(0.8 + rng.standard_normal(150)))
    for m in MODEL_IDS:
        fit = fit_model(m, s, cfg)
        d = json.loads(fit.to_json(tmp_path / f"{m}.json", roc_csv=f"{m}_roc.csv"))
        assert d["model"] == m
        assert d["auc_q025"] <= d["auc_mean"] <= d["auc_q975"]
        assert d["n_draws"] == 2000
        assert set(d) >= {"r_hat", "effective_sample_size", "converged", "concavity_violations", "notes"}
        fit.compact()
        assert fit.roc_draws is None and fit.mean_curve.values.size == GRID.size


def test_fits_are_deterministic_given_seed(rng):
    cfg = ChainConfig(n_chains=2, burn_in=50, keep=1000, seed=5)
    z = _pcn_pv(0.5, 2.0, 200, rng)
    a = fit_spcn(z, cfg, n0=200).auc_draws
    b = fit_spcn(z, cfg, n0=200).auc_draws
    assert np.array_equal(a, b)
