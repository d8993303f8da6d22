"""Spectral initializer tests: rotation, denoising, layer recovery, and
latent-dimension selection."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import dde
from dde.spectral import (SpectralConfig, denoise_and_linearize, init_layer,
                          varimax, varimax_criterion)


class TestVarimax:
    def test_orthogonal_rotation(self):
        rng = np.random.default_rng(0)
        V = rng.normal(size=(12, 4))
        W, R = varimax(V)
        assert np.allclose(R.T @ R, np.eye(4), atol=1e-10)
        assert np.allclose(V @ R, W, atol=1e-10)

    def test_criterion_not_decreased(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            V = rng.normal(size=(9, 3))
            W, _ = varimax(V)
            assert varimax_criterion(W) >= varimax_criterion(V) - 1e-10

    def test_k1_identity(self):
        V = np.arange(5, dtype=float).reshape(-1, 1)
        W, R = varimax(V)
        assert np.array_equal(W, V) and R == np.eye(1)

    def test_recovers_sparse_axes(self):
        # a rotated sparse loading matrix should rotate back to (signed,
        # permuted) sparsity
        rng = np.random.default_rng(2)
        sparse = np.kron(np.eye(3), np.ones((4, 1)))
        theta = 0.7
        rot = np.array([[np.cos(theta), -np.sin(theta), 0],
                        [np.sin(theta), np.cos(theta), 0], [0, 0, 1.0]])
        W, _ = varimax(sparse @ rot)
        # each recovered column should be supported on one block
        col_support = (np.abs(W) > 0.2)
        assert (col_support.sum(axis=0) == 4).all()


class TestDenoise:
    def test_normal_passthrough(self):
        Y = np.random.default_rng(3).normal(size=(20, 6))
        Z = denoise_and_linearize(Y, 2, dde.NORMAL)
        assert np.array_equal(Z, Y)

    def test_bernoulli_range_clamped(self):
        rng = np.random.default_rng(4)
        Y = (rng.random((50, 8)) < 0.4).astype(float)
        Z = denoise_and_linearize(Y, 2, dde.BERNOULLI)
        eps = SpectralConfig().eps_trunc
        bound = np.log((1 - eps) / eps)
        assert np.isfinite(Z).all() and np.abs(Z).max() <= bound + 1e-9

    def test_poisson_log_scale(self):
        # noiseless rank-1 Poisson means come back as their logs
        mu = np.outer(np.ones(30), np.array([1.0, 2.0, 4.0, 8.0]))
        Z = denoise_and_linearize(mu, 1, dde.POISSON)
        assert np.allclose(Z, np.log(mu), atol=1e-8)


class TestInitLayer:
    def test_recovers_planted_binary_factors(self):
        rng = np.random.default_rng(5)
        N, J, K = 1500, 18, 3
        A = (rng.random((N, K)) < 0.5).astype(float)
        B = np.kron(np.eye(K), np.ones((J // K, 1))) * 4.0
        Z = -1.0 + A @ B.T + rng.normal(0, 0.5, (N, J))
        A_hat, B_hat, G_hat, s = init_layer(Z, K)
        # match columns greedily by overlap, allowing permutation
        hits = 0
        for k in range(K):
            agree = (A_hat == A[:, [k]]).mean(axis=0)
            hits += agree.max() > 0.95
        assert hits == K
        assert s.shape == (min(N, J),)
        # slope columns respect the positive-sum sign convention
        assert (B_hat[:, 1:].sum(axis=0) > 0).all()

    def test_bad_k_rejected(self):
        with pytest.raises(dde.ValidationError):
            init_layer(np.zeros((5, 4)), 5)


class TestSpectralInit:
    def test_benchmark_graph_recovery(self):
        m = dde.make_benchmark_params("strict", 18, [6, 2], dde.NORMAL)
        data, _ = dde.sample(m, 2000, seed=0)
        si = dde.spectral_init(data, [6, 2])
        a = dde.align(si.model0, m)
        acc = dde.accuracy_G(si.G0, dde.graphs_from_coefficients(m), a)
        assert acc[0] >= 0.95
        assert si.model0.gamma is not None and (si.model0.gamma > 0).all()
        assert ((si.model0.p > 0) & (si.model0.p < 1)).all()

    def test_shapes_and_binary_latents(self):
        m = dde.make_benchmark_params("strict", 18, [6, 2], dde.BERNOULLI)
        data, _ = dde.sample(m, 500, seed=1)
        si = dde.spectral_init(data, [6, 2])
        assert [a.shape for a in si.A0.A] == [(500, 6), (500, 2)]
        for a in si.A0.A:
            assert np.isin(a, (0.0, 1.0)).all()
        assert si.model0.B[0].shape == (18, 7)
        assert si.model0.B[1].shape == (6, 3)

    def test_deterministic(self):
        m = dde.make_benchmark_params("strict", 18, [6, 2], dde.POISSON)
        data, _ = dde.sample(m, 400, seed=2)
        s1 = dde.spectral_init(data, [6, 2])
        s2 = dde.spectral_init(data, [6, 2])
        assert np.array_equal(s1.model0.B[0], s2.model0.B[0])
        assert np.array_equal(s1.A0.A[1], s2.A0.A[1])


class TestSelectLatentDims:
    def test_noiseless_rank_exact(self):
        # a noiseless Normal matrix of latent rank 6 has a vanishing 7th
        # centered singular value, so the ratio statistic is infinite at 6
        rng = np.random.default_rng(6)
        A = (rng.random((800, 6)) < 0.5).astype(float)
        B = rng.normal(0, 2, (24, 6))
        Y = dde.Dataset(1.0 + A @ B.T, dde.NORMAL)
        assert dde.select_latent_dims(Y, 1) == [6]

    def test_benchmark_selection(self):
        m = dde.make_benchmark_params("strict", 18, [6, 2], dde.NORMAL)
        data, _ = dde.sample(m, 4000, seed=3)
        assert dde.select_latent_dims(data, 2) == [6, 2]

    def test_small_grid_warns_and_defaults(self):
        Y = dde.Dataset(np.random.default_rng(7).normal(size=(50, 3)),
                        dde.NORMAL)
        with pytest.warns(UserWarning):
            assert dde.select_latent_dims(Y, 1) == [1]

    def test_grid_override(self):
        rng = np.random.default_rng(8)
        A = (rng.random((600, 4)) < 0.5).astype(float)
        B = rng.normal(0, 2, (20, 4))
        Y = dde.Dataset(A @ B.T + rng.normal(0, 0.1, (600, 20)), dde.NORMAL)
        assert dde.select_latent_dims(Y, 1, grid_override=[[2, 3, 4, 5]]) == [4]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_varimax_criterion_invariant_to_column_sign(seed):
    rng = np.random.default_rng(seed)
    V = rng.normal(size=(8, 3))
    flipped = V * np.array([1.0, -1.0, 1.0])
    assert np.isclose(varimax_criterion(V), varimax_criterion(flipped))
