import math

import numpy as np
import pytest
from scipy import optimize, stats

from onlinemedian.errors import DomainError
from onlinemedian.quantiles import (
    chi_square_cdf,
    chi_square_quantile,
    chi_square_sf,
    normal_cdf,
    normal_quantile,
)


def _invert(cdf, q, lo, hi):
    return optimize.brentq(lambda v: cdf(v) - q, lo, hi, xtol=1e-14, rtol=1e-15)


def test_normal_quantile_values():
    assert normal_quantile(0.5) == 0.0
    oracle = _invert(lambda v: 0.5 * math.erfc(-v / math.sqrt(2)), 0.975, 0.0, 5.0)
    assert normal_quantile(0.975) == pytest.approx(oracle, abs=1e-12)
    assert normal_quantile(0.975) == pytest.approx(1.959964, abs=1e-6)


@pytest.mark.parametrize("q", [1e-15, 1e-8, 1e-3, 0.02, 0.02425, 0.1, 0.4, 0.6, 0.9, 0.99, 1 - 1e-9])
def test_normal_quantile_against_scipy(q):
    assert normal_quantile(q) == pytest.approx(stats.norm.ppf(q), abs=1e-8)


def test_normal_round_trip(rng):
    for q in rng.uniform(1e-6, 1 - 1e-6, 200):
        assert normal_cdf(normal_quantile(q)) == pytest.approx(q, abs=1e-8)


def test_chi_square_closed_form_two_dof():
    assert chi_square_quantile(0.95, 2) == pytest.approx(-2 * math.log(0.05), abs=1e-10)
    assert chi_square_quantile(0.95, 2) == pytest.approx(5.991465, abs=1e-6)


def test_chi_square_threshold_ten_dof():
    oracle = _invert(lambda v: stats.chi2.cdf(v, 10), 0.95, 1.0, 100.0)
    assert chi_square_quantile(0.95, 10) == pytest.approx(oracle, abs=1e-8)
    assert chi_square_quantile(0.95, 10) == pytest.approx(18.3070, abs=1e-4)


@pytest.mark.parametrize("dof", [1, 2, 3, 7, 10, 25, 100, 1000])
@pytest.mark.parametrize("q", [1e-10, 1e-4, 0.05, 0.5, 0.95, 0.9999, 1 - 1e-10])
def test_chi_square_quantile_against_scipy(dof, q):
    expected = stats.chi2.ppf(q, dof)
    assert chi_square_quantile(q, dof) == pytest.approx(expected, rel=1e-8, abs=1e-8)


def test_chi_square_cdf_against_scipy(rng):
    for dof in (1, 4, 10, 31):
        for x in rng.uniform(0, 4 * dof, 50):
            assert chi_square_cdf(x, dof) == pytest.approx(stats.chi2.cdf(x, dof), abs=1e-13)
            assert chi_square_sf(x, dof) == pytest.approx(stats.chi2.sf(x, dof), rel=1e-10, abs=1e-300)


def test_chi_square_round_trip(rng):
    for q in rng.uniform(1e-6, 1 - 1e-6, 100):
        dof = int(rng.integers(1, 40))
        assert chi_square_cdf(chi_square_quantile(q, dof), dof) == pytest.approx(q, abs=1e-8)


@pytest.mark.parametrize("q", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_domain(q):
    with pytest.raises(DomainError):
        normal_quantile(q)
    with pytest.raises(DomainError):
        chi_square_quantile(q, 3)


def test_bad_dof():
    with pytest.raises(DomainError):
        chi_square_quantile(0.5, 0)


def test_vector_free_scalar_api():
    assert isinstance(normal_quantile(0.3), float)
    assert isinstance(chi_square_quantile(np.float64(0.3), 4), float)
