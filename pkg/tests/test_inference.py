import math

import numpy as np
import pytest
from scipy import optimize

from onlinemedian.errors import DimensionError, InvalidDirectionError, NumericalDegeneracyError
from onlinemedian.inference import OnlineInference, chi_square_test, confidence_interval, wald_statistic
from onlinemedian.quantiles import chi_square_quantile

from conftest import random_spd


def _normal_quantile_oracle(q):
    return optimize.brentq(lambda v: 0.5 * math.erfc(-v / math.sqrt(2)) - q, -10, 10, xtol=1e-15)


class TestConfidenceInterval:
    def test_identity_matrices(self):
        ci = confidence_interval(np.zeros(3), np.eye(3), np.eye(3), np.eye(3)[0], 0.95, 100)
        assert ci.half_width == pytest.approx(_normal_quantile_oracle(0.975) / 10, abs=1e-12)
        assert ci.half_width == pytest.approx(0.19600, abs=1e-5)
        assert ci.center == 0.0 and ci.lower < 0 < ci.upper

    def test_sqrt_n_scaling(self, rng):
        s_inv, sig = random_spd(rng, 4), random_spd(rng, 4)
        m, x0 = rng.standard_normal((2, 4))
        a = confidence_interval(m, s_inv, sig, x0, 0.9, 100)
        b = confidence_interval(m, s_inv, sig, x0, 0.9, 400)
        assert b.half_width == pytest.approx(a.half_width / 2, rel=1e-14)

    def test_homogeneity(self, rng):
        s_inv, sig = random_spd(rng, 4), random_spd(rng, 4)
        m, x0 = rng.standard_normal((2, 4))
        truth = rng.standard_normal(4)
        a = confidence_interval(m, s_inv, sig, x0, 0.95, 50)
        b = confidence_interval(m, s_inv, sig, 2 * x0, 0.95, 50)
        assert b.center == pytest.approx(2 * a.center, rel=1e-14)
        assert b.half_width == pytest.approx(2 * a.half_width, rel=1e-14)
        assert a.contains(x0 @ truth) == b.contains(2 * x0 @ truth)

    def test_errors(self):
        with pytest.raises(InvalidDirectionError):
            confidence_interval(np.zeros(2), np.eye(2), np.eye(2), np.zeros(2), 0.95, 10)
        with pytest.raises(NumericalDegeneracyError):
            confidence_interval(np.zeros(2), np.eye(2), np.diag([0.0, 1.0]), np.array([1.0, 0.0]), 0.95, 10)
        with pytest.raises(DimensionError):
            confidence_interval(np.zeros(2), np.eye(3), np.eye(3), np.ones(2), 0.95, 10)


class TestChiSquareTest:
    def test_zero_at_estimate(self, rng):
        m = rng.standard_normal(10)
        res = chi_square_test(m, random_spd(rng, 10), random_spd(rng, 10), m.copy(), 3000, 0.05)
        assert res.statistic == 0.0 and not res.reject and res.p_value == 1.0 and res.dof == 10

    def test_statistic_formula_and_rule(self, rng):
        p = 6
        h, s_inv = random_spd(rng, p), random_spd(rng, p)
        m, m_test = rng.standard_normal((2, p))
        n = 37
        d = m - m_test
        expected = n * d @ h @ s_inv @ h @ d
        res = chi_square_test(m, h, s_inv, m_test, n, 0.05)
        assert res.statistic == pytest.approx(expected, rel=1e-12)
        assert res.reject == (res.statistic > chi_square_quantile(0.95, p))
        assert 0.0 <= res.p_value <= 1.0

    def test_non_negative(self, rng):
        for _ in range(100):
            p = int(rng.integers(2, 8))
            z = wald_statistic(rng.standard_normal(p), random_spd(rng, p), random_spd(rng, p), rng.standard_normal(p), 10)
            assert z > 0

    def test_rotation_invariance(self, rng):
        p = 5
        q, _ = np.linalg.qr(rng.standard_normal((p, p)))
        h, s_inv = random_spd(rng, p), random_spd(rng, p)
        m, m_test = rng.standard_normal((2, p))
        a = wald_statistic(m, h, s_inv, m_test, 100)
        b = wald_statistic(q @ m, q @ h @ q.T, q @ s_inv @ q.T, q @ m_test, 100)
        assert b == pytest.approx(a, rel=1e-10)


class TestOnlineInference:
    def test_feeds_accumulators(self, rng):
        p = 3
        inf = OnlineInference(p)
        xs, ms, zs = rng.standard_normal((3, 20, p))
        for x, m, z in zip(xs, ms, zs):
            inf.update(x, m, z)
        assert inf.cov.n == inf.plug_in.n == inf.s_acc.n == inf.n == 20
        assert not inf.s_acc.regularize
        ci = inf.confidence_interval(np.zeros(p), np.eye(p)[1], 0.95)
        assert ci.half_width > 0 and ci.n == 20
        res = inf.test(np.zeros(p), np.zeros(p))
        assert res.statistic == 0.0

    def test_without_ci(self, rng):
        inf = OnlineInference(3, track_ci=False)
        inf.update(*rng.standard_normal((2, 3)))
        assert inf.s_acc is None
        with pytest.raises(ValueError):
            inf.confidence_interval(np.zeros(3), np.ones(3))

    def test_ci_coherent_with_test(self):
        # a far-off hypothesis excluded by every basis CI gives a large statistic
        rng = np.random.default_rng(5)
        p = 4
        inf = OnlineInference(p)
        for x, z in zip(rng.standard_normal((3000, p)), rng.standard_normal((3000, p))):
            inf.update(x, np.zeros(p), z)
        m_test = np.full(p, 0.5)
        assert all(not inf.confidence_interval(np.zeros(p), e).contains(e @ m_test) for e in np.eye(p))
        assert inf.test(np.zeros(p), m_test).reject
