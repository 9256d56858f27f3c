import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from dyngraph.errors import DegenerateInputError, InsufficientDataError
from dyngraph.powerlaw import fit_power_law, ks_distance


def test_recovers_zeta_exponent():
    x = stats.zipf.rvs(2.5, size=100_000, random_state=np.random.default_rng(7))
    fit = fit_power_law(x)
    assert fit.exponent == pytest.approx(2.5, abs=0.05)
    assert fit.n == 100_000
    assert fit.ks < 0.01


def test_xmin_truncates_and_renormalizes():
    x = stats.zipf.rvs(2.2, size=50_000, random_state=np.random.default_rng(3))
    fit = fit_power_law(x, xmin=3)
    assert fit.n == int(np.sum(x >= 3))
    assert fit.exponent == pytest.approx(2.2, abs=0.06)


def test_degenerate_inputs():
    with pytest.raises(DegenerateInputError):
        fit_power_law(np.full(100, 4))
    with pytest.raises(InsufficientDataError):
        fit_power_law(np.arange(1, 50))
    with pytest.raises(ValueError):
        fit_power_law(np.arange(1, 100), xmin=0)


def test_ks_distance_against_scipy_cdf():
    x = stats.zipf.rvs(2.0, size=2000, random_state=np.random.default_rng(1))
    vals = np.unique(x)
    emp = np.array([np.mean(x >= v) for v in vals])
    fitted = stats.zipf.sf(vals - 1, 2.0)
    assert ks_distance(x, 2.0) == pytest.approx(np.max(np.abs(emp - fitted)), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 500), min_size=50, max_size=300).filter(lambda v: len(set(v)) > 1))
def test_fit_is_a_likelihood_maximum(values):
    from scipy.special import zeta
    x = np.array(values)
    a = fit_power_law(x).exponent

    def ll(s):
        return -s * np.log(x).sum() - len(x) * np.log(zeta(s, 1))
    assert ll(a) >= ll(a + 1e-3) - 1e-9
    if a - 1e-3 > 1:
        assert ll(a) >= ll(a - 1e-3) - 1e-9
    assert 0.0 <= ks_distance(x, a) <= 1.0
