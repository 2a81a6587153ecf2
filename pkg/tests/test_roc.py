import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from concaveroc.distributions import norm_cdf
from concaveroc.errors import InputError
from concaveroc.roc import (
    GRID_SIZE,
    RocCurve,
    Sample,
    auc_from_bounds,
    binormal_auc,
    binormal_roc,
    clamp_placement_values,
    concave_cdf_eval,
    concavity_violations,
    default_grid,
    empirical_pv_cdf,
    empirical_roc,
    emse,
    mann_whitney_auc,
    placement_values,
)

GRID = default_grid()


def test_grid_shape():
    assert GRID.size == GRID_SIZE == 1001
    assert GRID[0] == 0.0 and GRID[-1] == 1.0
    assert np.allclose(np.diff(GRID), 1e-3)


def test_sample_validation():
    with pytest.raises(InputError):
        Sample([], [1.0])
    with pytest.raises(InputError):
        Sample([1.0, np.nan], [1.0])
    s = Sample([1, 2, 3], [4, 5])
    assert (s.n0, s.n1) == (3, 2)


def test_placement_value_examples():
    s = Sample([0.0], [0.0, 50.0])
    z = placement_values(s, norm_cdf)
    assert z[0] == pytest.approx(0.5)
    assert z[1] == pytest.approx(0.0, abs=1e-300)
    uniform = lambda y: np.clip(y, 0, 1)  # noqa: E731
    assert placement_values(Sample([0.5], [0.3]), uniform)[0] == pytest.approx(0.7)


def test_clamp_placement_values():
    z = clamp_placement_values(np.array([0.0, 0.4, 1.0]), 50)
    assert np.allclose(z, [0.01, 0.4, 0.99])


def test_binormal_examples(rng):
    c = binormal_roc(0.0, 1.0)
    assert c.auc == pytest.approx(0.5)
    assert np.allclose(c.values, GRID, atol=1e-12)
    assert binormal_auc(1.2, 0.8) == pytest.approx(norm_cdf(1.2 / np.sqrt(1.64)))
    # a = (mu1 - mu0) / s1, b = s0 / s1 with Y0 ~ N(0,1): Y1 ~ N(a/b, 1/b^2)
    a, b = 1.2, 0.8
    y0 = rng.standard_normal(10**6)
    y1 = a / b + rng.standard_normal(10**6) / b
    assert binormal_auc(a, b) == pytest.approx(np.mean(y1 > y0), abs=2e-3)
    with pytest.raises(ValueError):
        binormal_roc(1.0, 0.0)


def test_binormal_curve_trapezoid_matches_closed_form_auc():
    c = binormal_roc(1.0, 0.7)
    # b < 1 has an infinite slope at t = 0, which costs the trapezoid rule a little
    assert c.trapezoid_auc() == pytest.approx(c.auc, abs=1e-4)
    assert c.values[0] == 0.0 and c.values[-1] == 1.0


def test_concave_cdf_examples():
    assert np.allclose(concave_cdf_eval(np.array([1.0]), GRID), GRID)
    assert concave_cdf_eval(np.array([0.5]), 0.75) == pytest.approx(1.0)
    with pytest.raises(InputError):
        concave_cdf_eval(np.array([0.5, 0.0]), GRID)
    with pytest.raises(InputError):
        concave_cdf_eval(np.array([1.2]), GRID)


def _lemma2_oracle(w_sampler, rng, n=10**5):
    # Z = W V with V ~ U(0, 1) has CDF E[min(t, W) / W]
    w = w_sampler(n)
    z = w * rng.uniform(size=n)
    return w, z


def test_concave_cdf_matches_product_construction(rng):
    w, z = _lemma2_oracle(lambda n: rng.beta(2, 2, n), rng)
    f = concave_cdf_eval(w, GRID)
    emp = empirical_pv_cdf(z, GRID)
    assert np.max(np.abs(f - emp)) < 0.01
    assert auc_from_bounds(w) == pytest.approx(1 - z.mean(), abs=0.005)


def test_auc_from_bounds_examples():
    assert auc_from_bounds(np.ones(10)) == 0.5
    assert auc_from_bounds(np.full(10, 1e-12)) == pytest.approx(1.0)
    with pytest.raises(InputError):
        auc_from_bounds(np.array([]))


def test_empirical_roc_examples():
    s = Sample([1, 2, 3], [2, 3, 4])
    assert empirical_roc(s).auc == pytest.approx(7 / 9)
    same = Sample([1, 2, 2, 5], [5, 2, 1, 2])
    assert empirical_roc(same).auc == pytest.approx(0.5)
    sep = Sample([1, 2, 3], [4, 5])
    r = empirical_roc(sep)
    assert r.auc == 1.0
    assert np.all(r.values[1:] == 1.0)


def test_emse_examples():
    a = RocCurve(GRID, GRID, 0.5)
    b = RocCurve(GRID, GRID**2, 2 / 3)
    assert emse(a, a) == 0.0
    assert emse(a, b) == pytest.approx(1 / 30, abs=1e-7)
    with pytest.raises(InputError):
        emse(a, RocCurve(np.linspace(0, 1, 11), np.linspace(0, 1, 11), 0.5))


def test_csv_round_trip(tmp_path):
    c = binormal_roc(0.8, 1.3)
    path = tmp_path / "roc.csv"
    text = c.to_csv(path)
    assert text.splitlines()[0] == "t,roc"
    assert text.splitlines()[1] == "0.000000,0.000000"
    back = RocCurve.from_csv(path, auc=c.auc)
    assert np.allclose(back.values, c.values, atol=5e-7)
    assert back.to_csv() == text
    with pytest.raises(ValueError):
        RocCurve.from_csv("x,y\n0,0\n")


def test_chance_line_crossing():
    assert binormal_roc(1.0, 2.0).crosses_chance_line()
    assert not binormal_roc(1.0, 1.0).crosses_chance_line()


# ----------------------------------------------------------------------------
# properties

bounds = hnp.arrays(np.float64, st.integers(1, 60), elements=st.floats(1e-3, 1.0))


@given(bounds)
def test_concave_cdf_is_concave_and_monotone(w):
    f = concave_cdf_eval(w, GRID)
    assert concavity_violations(f, GRID) == 0
    assert np.all(np.diff(f) >= -1e-15)
    assert f[0] == 0.0 and f[-1] == pytest.approx(1.0)


@given(bounds)
def test_auc_from_bounds_matches_trapezoid(w):
    f = concave_cdf_eval(w, GRID)
    assert auc_from_bounds(w) == pytest.approx(np.trapezoid(f, GRID), abs=2e-3)
    assert 0.5 <= auc_from_bounds(w) <= 1.0


scores = hnp.arrays(np.float64, st.integers(1, 50), elements=st.integers(-5, 5).map(float))


@given(scores, scores)
def test_mann_whitney_matches_brute_force(y0, y1):
    wins = (y1[:, None] > y0[None, :]).sum() + 0.5 * (y1[:, None] == y0[None, :]).sum()
    assert mann_whitney_auc(y0, y1) == wins / (y0.size * y1.size)
    assert empirical_roc(Sample(y0, y1)).auc == wins / (y0.size * y1.size)


@given(
    hnp.arrays(np.float64, st.integers(2, 80), elements=st.floats(-10, 10)),
    hnp.arrays(np.float64, st.integers(2, 80), elements=st.floats(-10, 10)),
)
def test_placement_values_with_empirical_reference_reproduce_empirical_roc(y0, y1):
    s = Sample(y0, y1)
    s0 = np.sort(y0)

    def f0(y):
        return np.searchsorted(s0, y, side="right") / s0.size

    via_pv = empirical_pv_cdf(placement_values(s, f0), GRID)
    direct = empirical_roc(s).values
    assert np.max(np.abs(via_pv - direct)) < 1 / min(y0.size, y1.size)
