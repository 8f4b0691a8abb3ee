import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import bisect

from corrmap.errors import InvalidInput, NotPSD, SingularMatrix
from corrmap.numerics import (
    inv_sqrt_psd,
    random_orthogonal,
    sample_gaussian,
    sqrt_psd,
    sym_eig,
)
from corrmap.rng import RngStream


def _random_sym(order, seed):
    a = np.random.default_rng(seed).standard_normal((order, order))
    return a + a.T


def _random_spd(order, seed):
    a = np.random.default_rng(seed).standard_normal((order, order + 3))
    return a @ a.T / (order + 3) + 0.1 * np.eye(order)


class TestSymEig:
    def test_identity(self):
        np.testing.assert_array_equal(sym_eig(np.eye(3)).values, [1.0, 1.0, 1.0])

    def test_two_by_two_correlation(self):
        np.testing.assert_allclose(sym_eig([[1, 0.7], [0.7, 1]]).values, [1.7, 0.3], atol=1e-12)

    def test_three_set_block_against_bisection(self):
        # largest eigenvalue is 1 + the positive root of -x^3 + 0.97x + 0.36
        def cubic(x):
            return -(x ** 3) + 0.97 * x + 0.36

        root = bisect(cubic, 0.0, 2.0, xtol=1e-15)
        w = sym_eig([[1, 0.5, 0.6], [0.5, 1, 0.6], [0.6, 0.6, 1]]).values
        assert w[0] == pytest.approx(1 + root, abs=1e-12)
        assert w[0] == pytest.approx(2.13459030064771, abs=1e-12)
        assert w[0] == pytest.approx(2.134, abs=1e-3)

    def test_descending_and_paired(self):
        a = _random_sym(12, 3)
        eig = sym_eig(a)
        assert np.all(np.diff(eig.values) <= 0)
        np.testing.assert_allclose(a @ eig.vectors, eig.vectors * eig.values, atol=1e-10)

    def test_deterministic(self):
        a = _random_sym(9, 4)
        e1, e2 = sym_eig(a), sym_eig(a.copy())
        np.testing.assert_array_equal(e1.values, e2.values)
        np.testing.assert_array_equal(e1.vectors, e2.vectors)

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidInput):
            sym_eig([[1.0, np.nan], [np.nan, 1.0]])

    def test_asymmetric_rejected(self):
        with pytest.raises(InvalidInput):
            sym_eig([[1.0, 0.2], [0.5, 1.0]])

    @settings(max_examples=60, deadline=None)
    @given(order=st.integers(1, 40), seed=st.integers(0, 2**32 - 1))
    def test_reconstruction(self, order, seed):
        a = _random_sym(order, seed)
        eig = sym_eig(a)
        assert np.linalg.norm(a - eig.reconstruct()) <= 1e-9 * max(np.linalg.norm(a), 1e-300)
        np.testing.assert_allclose(eig.vectors.T @ eig.vectors, np.eye(order), atol=1e-9)


class TestInvSqrt:
    def test_identity(self):
        np.testing.assert_allclose(inv_sqrt_psd(np.eye(4)), np.eye(4), atol=1e-15)

    def test_diagonal(self):
        np.testing.assert_allclose(inv_sqrt_psd(np.diag([4.0, 9.0])), np.diag([0.5, 1 / 3]), atol=1e-15)

    def test_singular(self):
        with pytest.raises(SingularMatrix):
            inv_sqrt_psd(np.diag([1.0, 0.0]))

    def test_below_relative_threshold(self):
        with pytest.raises(SingularMatrix):
            inv_sqrt_psd(np.diag([1.0, 1e-12]), rel_tol=1e-10)
        inv_sqrt_psd(np.diag([1.0, 1e-12]), rel_tol=1e-13)

    @settings(max_examples=60, deadline=None)
    @given(order=st.integers(1, 20), seed=st.integers(0, 2**32 - 1))
    def test_whitens(self, order, seed):
        a = _random_spd(order, seed)
        b = inv_sqrt_psd(a)
        np.testing.assert_array_equal(b, b.T)
        assert np.linalg.norm(b @ a @ b - np.eye(order)) <= 1e-8

    @settings(max_examples=40, deadline=None)
    @given(order=st.integers(1, 20), seed=st.integers(0, 2**32 - 1))
    def test_spectrum_is_inverse_root(self, order, seed):
        a = _random_spd(order, seed)
        got = np.sort(np.linalg.eigvalsh(inv_sqrt_psd(a)))
        want = np.sort(np.linalg.eigvalsh(a) ** -0.5)
        np.testing.assert_allclose(got, want, rtol=1e-8, atol=1e-8)


class TestSqrt:
    def test_identity(self):
        np.testing.assert_allclose(sqrt_psd(np.eye(3)), np.eye(3), atol=1e-15)

    def test_diagonal_with_zero(self):
        np.testing.assert_allclose(sqrt_psd(np.diag([4.0, 0.0])), np.diag([2.0, 0.0]), atol=1e-15)

    def test_tiny_negative_clamped(self):
        s = sqrt_psd(np.diag([1.0, -1e-13]))
        assert np.all(np.isfinite(s))

    def test_negative_rejected(self):
        with pytest.raises(NotPSD):
            sqrt_psd(np.diag([1.0, -1e-3]))

    @settings(max_examples=40, deadline=None)
    @given(order=st.integers(1, 20), rank=st.integers(1, 20), seed=st.integers(0, 2**32 - 1))
    def test_gram_round_trip(self, order, rank, seed):
        g = np.random.default_rng(seed).standard_normal((order, rank))
        a = g @ g.T
        s = sqrt_psd(a)
        assert np.linalg.norm(s @ s.T - a) <= 1e-8 * max(1.0, np.linalg.norm(a))


class TestRandomOrthogonal:
    def test_order_one(self):
        q = random_orthogonal(1, RngStream(5))
        assert abs(q[0, 0]) == pytest.approx(1.0)

    @settings(max_examples=30, deadline=None)
    @given(order=st.integers(1, 30), seed=st.integers(0, 2**63))
    def test_orthogonal(self, order, seed):
        q = random_orthogonal(order, RngStream(seed))
        assert np.linalg.norm(q.T @ q - np.eye(order)) <= 1e-9
        np.testing.assert_allclose(np.linalg.norm(q, axis=0), 1.0, atol=1e-12)

    def test_first_entry_sign_balanced(self):
        root = RngStream(11)
        signs = np.array([np.sign(random_orthogonal(3, root.child(i))[0, 0]) for i in range(10_000)])
        positive = int(np.sum(signs > 0))
        # binomial(1e4, 1/2) has sd 50; allow 5 sd
        assert abs(positive - 5000) < 250

    def test_reproducible(self):
        np.testing.assert_array_equal(random_orthogonal(5, RngStream(3)), random_orthogonal(5, RngStream(3)))


class TestSampleGaussian:
    def test_identity_covariance(self):
        x = sample_gaussian(np.eye(3), 100_000, RngStream(1))
        assert x.shape == (3, 100_000)
        assert np.max(np.abs(x @ x.T / x.shape[1] - np.eye(3))) < 0.05

    def test_zero_covariance(self):
        x = sample_gaussian(np.zeros((2, 2)), 10, RngStream(1))
        np.testing.assert_array_equal(x, 0.0)

    def test_correlation(self):
        x = sample_gaussian(np.array([[1.0, 0.7], [0.7, 1.0]]), 100_000, RngStream(2))
        assert np.corrcoef(x)[0, 1] == pytest.approx(0.7, abs=0.02)

    def test_not_psd(self):
        with pytest.raises(NotPSD):
            sample_gaussian(np.array([[1.0, 2.0], [2.0, 1.0]]), 5, RngStream(0))
