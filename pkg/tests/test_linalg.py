import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onlinemedian.errors import DecompositionError, DimensionError, NumericalInputError
from onlinemedian.linalg import cholesky, quad_form, rank_one_inverse_update
from onlinemedian.simulation import CovStructure

from conftest import random_spd


class TestRankOneInverseUpdate:
    def test_identity_unit_vector(self):
        out = rank_one_inverse_update(np.eye(2), np.array([1.0, 0.0]), 1.0)
        np.testing.assert_allclose(out, np.diag([0.5, 1.0]), atol=1e-15)

    def test_identity_ones(self):
        out = rank_one_inverse_update(np.eye(2), np.array([1.0, 1.0]), 1.0)
        expected = np.linalg.inv(np.array([[2.0, 1.0], [1.0, 2.0]]))
        np.testing.assert_allclose(expected, [[2 / 3, -1 / 3], [-1 / 3, 2 / 3]], atol=1e-15)
        np.testing.assert_allclose(out, expected, atol=1e-15)

    def test_sequential_updates_match_direct_inverse(self, rng):
        p = 10
        a = random_spd(rng, p)
        a_inv = np.linalg.inv(a)
        for _ in range(1000):
            u = rng.standard_normal(p)
            c = rng.uniform(0, 10)
            a += c * np.outer(u, u)
            a_inv = rank_one_inverse_update(a_inv, u, c)
        assert np.max(np.abs(a_inv - np.linalg.inv(a))) < 1e-8

    def test_result_is_exactly_symmetric(self, rng):
        a_inv = np.linalg.inv(random_spd(rng, 6))
        for _ in range(50):
            a_inv = rank_one_inverse_update(a_inv, rng.standard_normal(6), rng.uniform(0.1, 5))
            assert np.array_equal(a_inv, a_inv.T)

    def test_batched_matches_loop(self, rng):
        mats = np.stack([np.linalg.inv(random_spd(rng, 4)) for _ in range(5)])
        us = rng.standard_normal((5, 4))
        cs = rng.uniform(0.5, 2.0, 5)
        out = rank_one_inverse_update(mats, us, cs)
        for b in range(5):
            np.testing.assert_allclose(out[b], rank_one_inverse_update(mats[b], us[b], cs[b]), atol=1e-14)

    @pytest.mark.parametrize("bad", [np.nan, np.inf])
    def test_rejects_non_finite(self, bad):
        with pytest.raises(NumericalInputError):
            rank_one_inverse_update(np.eye(2), np.array([bad, 0.0]), 1.0)

    def test_rejects_non_positive_weight(self):
        with pytest.raises(NumericalInputError):
            rank_one_inverse_update(np.eye(2), np.array([1.0, 0.0]), 0.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            rank_one_inverse_update(np.eye(2), np.ones(3), 1.0)

    @settings(max_examples=60, deadline=None)
    @given(
        p=st.integers(2, 8),
        c=st.floats(1e-3, 100.0),
        seed=st.integers(0, 2**32 - 1),
    )
    def test_property_inverse_and_positive_definite(self, p, c, seed):
        rng = np.random.default_rng(seed)
        a = random_spd(rng, p)
        u = rng.standard_normal(p)
        out = rank_one_inverse_update(np.linalg.inv(a), u, c)
        np.testing.assert_allclose(out @ (a + c * np.outer(u, u)), np.eye(p), atol=1e-8)
        assert np.array_equal(out, out.T)
        assert np.all(np.linalg.eigvalsh(out) > 0)


class TestQuadForm:
    def test_trivial(self):
        assert quad_form(np.array([1.0, 0.0]), np.eye(2)) == 1.0
        assert quad_form(np.array([1.0, 1.0]), np.diag([2.0, 3.0])) == 5.0

    def test_matches_double_loop(self, rng):
        for _ in range(20):
            p = rng.integers(2, 12)
            x = rng.standard_normal(p)
            a = rng.standard_normal((p, p))
            naive = sum(x[i] * a[i, j] * x[j] for i in range(p) for j in range(p))
            assert abs(quad_form(x, a) - naive) <= 1e-12 * max(1.0, abs(naive))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            quad_form(np.ones(3), np.eye(2))


class TestCholesky:
    def test_trivial(self):
        np.testing.assert_array_equal(cholesky(np.eye(3)), np.eye(3))
        np.testing.assert_allclose(cholesky(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))

    def test_toeplitz_reconstruction(self):
        a = CovStructure("toeplitz_half", p=10).covariance()
        low = cholesky(a)
        assert np.allclose(low, np.tril(low))
        assert np.max(np.abs(low @ low.T - a)) <= 1e-10 * np.max(np.abs(a))

    @settings(max_examples=30, deadline=None)
    @given(p=st.integers(2, 10), seed=st.integers(0, 2**32 - 1))
    def test_reconstruction_property(self, p, seed):
        a = random_spd(np.random.default_rng(seed), p, cond=1e3)
        low = cholesky(a)
        assert np.max(np.abs(low @ low.T - a)) <= 1e-10 * np.max(np.abs(a))

    def test_not_positive_definite(self):
        with pytest.raises(DecompositionError):
            cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_not_symmetric(self):
        with pytest.raises(DecompositionError):
            cholesky(np.array([[2.0, 1.0], [0.0, 2.0]]))
