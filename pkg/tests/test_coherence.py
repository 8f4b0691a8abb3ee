import math

import numpy as np
import pytest
from scipy.linalg import block_diag, sqrtm
from hypothesis import given, settings
from hypothesis import strategies as st

from corrmap import profiles
from corrmap.coherence import (
    coherence_batch,
    coherence_from_stacked,
    partition_eigvec,
    population_coherence,
    sample_coherence,
    subvector_sq_norms,
)
from corrmap.errors import InvalidInput, SingularMatrix
from corrmap.model import CorrelationProfile, random_valid_profile
from corrmap.numerics import random_orthogonal
from corrmap.rng import RngStream
from corrmap.synth import GenConfig, MultiDataset, generate


def _block_spectrum(prof):
    return np.sort(np.concatenate([np.linalg.eigvalsh(b) for b in prof.r_blocks]))[::-1]


class TestSampleCoherence:
    def test_identical_copies(self):
        x = np.random.default_rng(0).standard_normal((3, 200))
        dec = sample_coherence(MultiDataset([x, x, x]))
        np.testing.assert_allclose(dec.values[:3], 3.0, atol=1e-9)
        np.testing.assert_allclose(dec.values[3:], 0.0, atol=1e-9)

    def test_independent_data_near_identity(self):
        rng = np.random.default_rng(1)
        data = MultiDataset([rng.standard_normal((3, 10_000)) for _ in range(3)])
        dec = sample_coherence(data)
        assert np.all(np.abs(dec.values - 1.0) < 0.15)

    def test_example_1_large_sample(self):
        data = generate(GenConfig(profiles.example_1(), math.inf, 50_000, seed=2))
        dec = sample_coherence(data)
        assert np.sum(dec.values > 1.1) == 4

    def test_unit_diagonal_and_trace(self):
        data = generate(GenConfig(profiles.example_3(), 0.0, 300, seed=3))
        dec = sample_coherence(data)
        np.testing.assert_allclose(np.diag(dec.matrix), 1.0, atol=1e-8)
        assert np.trace(dec.matrix) == pytest.approx(dec.order, abs=1e-6)
        assert dec.values.min() > -1e-10
        np.testing.assert_array_equal(dec.matrix, dec.matrix.T)

    def test_matches_direct_formula(self):
        x = np.random.default_rng(4).standard_normal((6, 50))
        r = x @ x.T / 50
        w = block_diag(*[np.linalg.inv(sqrtm(r[k:k + 3, k:k + 3]).real) for k in (0, 3)])
        np.testing.assert_allclose(coherence_from_stacked(x, 2), w @ r @ w, atol=1e-12)

    def test_too_few_samples(self):
        x = np.random.default_rng(5).standard_normal((6, 2))
        with pytest.raises(SingularMatrix):
            sample_coherence(MultiDataset.from_stacked(x, 2))

    def test_non_finite(self):
        x = np.ones((4, 10))
        x[0, 0] = np.inf
        with pytest.raises(InvalidInput):
            sample_coherence(MultiDataset.from_stacked(x, 2))

    def test_centering_flag(self):
        x = np.random.default_rng(6).standard_normal((4, 500)) + 3.0
        data = MultiDataset.from_stacked(x, 2)
        raw = sample_coherence(data).values
        centered = sample_coherence(data, center=True).values
        assert not np.allclose(raw, centered)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(7)
        xb = rng.standard_normal((5, 9, 40))
        cb = coherence_batch(xb, 3)
        for b in range(5):
            np.testing.assert_allclose(cb[b], coherence_from_stacked(xb[b], 3), atol=1e-12)

    def test_converges_to_population(self):
        prof = profiles.example_1()
        pop = population_coherence(prof)
        errs = {m: [] for m in (500, 1000, 2000, 4000)}
        for seed in range(15):
            for m in errs:
                data = generate(GenConfig(prof, math.inf, m, seed=seed, mixing="orthogonal"))
                # map back to identity mixing so the population matrix is comparable
                blocks = [a.T @ x for a, x in zip(data.mixing, data.x_blocks)]
                c = sample_coherence(MultiDataset(blocks)).matrix
                errs[m].append(np.linalg.norm(c - pop.matrix))
        medians = [np.median(errs[m]) for m in sorted(errs)]
        assert all(a > b for a, b in zip(medians, medians[1:]))


class TestPopulationCoherence:
    def test_orthogonal_mixing_spectrum(self):
        prof = profiles.example_2()
        mix = [random_orthogonal(4, RngStream(0, (p,))) for p in range(4)]
        dec = population_coherence(prof, mix)
        np.testing.assert_allclose(dec.values, _block_spectrum(prof), atol=1e-9)

    def test_homogeneous_five_clique(self):
        single = CorrelationProfile(profiles.scenario_iii(0.7).r_blocks[:1])
        w = population_coherence(single).values
        assert w[0] == pytest.approx(3.8, abs=1e-12)
        np.testing.assert_allclose(w[1:], 0.3, atol=1e-12)

    def test_perfect_block(self):
        prof = CorrelationProfile(np.ones((1, 4, 4)))
        w = population_coherence(prof).values
        assert w[0] == pytest.approx(4.0, abs=1e-10)

    def test_rank_deficient_mixing(self):
        prof = profiles.example_1()
        mix = [np.eye(5)] * 3
        mix[1] = np.diag([1.0, 1.0, 1.0, 1.0, 0.0])
        with pytest.raises(SingularMatrix):
            population_coherence(prof, mix)

    def test_wrong_mixing_count(self):
        with pytest.raises(InvalidInput):
            population_coherence(profiles.example_1(), [np.eye(5)])

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 6), st.integers(1, 6), st.integers(0, 2**63), st.booleans())
    def test_spectrum_equals_blocks(self, p_sets, n, seed, gaussian):
        rng = RngStream(seed)
        prof = random_valid_profile(rng.child(0), p_sets, n)
        mix_rng = rng.child(1)
        if gaussian:
            mix = [mix_rng.standard_normal((n, n)) + 3 * np.eye(n) for _ in range(p_sets)]
        else:
            mix = [random_orthogonal(n, mix_rng) for _ in range(p_sets)]
        dec = population_coherence(prof, mix)
        np.testing.assert_allclose(dec.values, _block_spectrum(prof), atol=1e-9)
        np.testing.assert_allclose(np.diag(dec.matrix), 1.0, atol=1e-8)


class TestPartition:
    def test_norms_sum_to_one(self):
        data = generate(GenConfig(profiles.example_2(), 5.0, 200, seed=1))
        dec = sample_coherence(data)
        for i in range(dec.order):
            part = partition_eigvec(dec, i)
            assert part.sq_norms.sum() == pytest.approx(1.0, abs=1e-12)
            np.testing.assert_array_equal(np.concatenate(part.subvectors), dec.vectors[:, i])

    def test_out_of_range(self):
        dec = population_coherence(profiles.example_1())
        with pytest.raises(InvalidInput):
            partition_eigvec(dec, 15)
        with pytest.raises(InvalidInput):
            partition_eigvec(dec, -1)

    def test_perfect_correlation_all_nonzero(self):
        dec = population_coherence(CorrelationProfile(np.ones((2, 3, 3))))
        for i in range(2):
            assert np.all(partition_eigvec(dec, i).sq_norms > 0.1)

    def test_excluded_set_is_zero(self):
        # component 1 of EXAMPLE_2_ROWS is correlated across sets 2..4 only
        prof = profiles.example_2()
        dec = population_coherence(prof)
        top = np.linalg.eigvalsh(prof.r_blocks[0])[-1]
        j = int(np.argmin(np.abs(dec.values - top)))
        norms = np.sqrt(partition_eigvec(dec, j).sq_norms)
        assert norms[0] <= 1e-8
        assert np.all(norms[1:] > 0.1)

    def test_subvector_sq_norms_shape(self):
        v = np.random.default_rng(0).standard_normal((7, 12, 3))
        out = subvector_sq_norms(v, 4)
        assert out.shape == (7, 3, 4)
        assert out[2, 1, 3] == pytest.approx(np.sum(v[2, 9:12, 1] ** 2))
