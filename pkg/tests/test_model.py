"""Core model tests: families, sampling, and the enumerated likelihood.

The likelihood recursions are cross-checked against a deliberately naive
oracle that enumerates the joint latent space directly.
"""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

import dde
from dde.model import (emission_log_table, enumerate_configs,
                       first_layer_log_marginal, linear_predictors, softplus,
                       top_log_prior, transition_log_table)


def random_model(rng, J, K, family=dde.BERNOULLI):
    sizes = [J] + list(K)
    B = [np.round(rng.normal(0, 1.2, (sizes[d - 1], sizes[d] + 1)), 3)
         for d in range(1, len(sizes))]
    gamma = (np.round(rng.uniform(0.5, 1.5, J), 3)
             if family.has_dispersion else None)
    return dde.DdeModel(K=list(K), J=J, p=rng.uniform(0.2, 0.8, K[-1]),
                        B=B, family=family, gamma=gamma)


def joint_logprob_oracle(model, y):
    """Brute force: sum the complete-data density over every joint latent
    configuration, one python loop at a time."""
    total = -np.inf
    spaces = [list(itertools.product((0.0, 1.0), repeat=k)) for k in model.K]
    for combo in itertools.product(*spaces):
        lp = 0.0
        a_top = np.array(combo[-1])
        lp += float(np.sum(a_top * np.log(model.p)
                           + (1 - a_top) * np.log1p(-model.p)))
        for d in range(model.D, 1, -1):
            eta = (model.B[d - 1][:, 0]
                   + model.B[d - 1][:, 1:] @ np.array(combo[d - 1]))
            a = np.array(combo[d - 2])
            lp += float(np.sum(a * eta - np.log1p(np.exp(eta))))
        eta = model.B[0][:, 0] + model.B[0][:, 1:] @ np.array(combo[0])
        lp += float(model.family.logpdf(np.asarray(y), eta, model.gamma).sum())
        total = np.logaddexp(total, lp)
    return total


class TestObservedFamily:
    def test_mean_maps(self):
        eta = np.array([-1.0, 0.0, 2.0])
        assert np.allclose(dde.BERNOULLI.mean(eta), expit(eta))
        assert np.allclose(dde.POISSON.mean(eta), np.exp(eta))
        assert np.allclose(dde.NORMAL.mean(eta), eta)

    def test_inverse_mean_round_trip(self):
        for fam in (dde.BERNOULLI, dde.POISSON, dde.NORMAL):
            eta = np.linspace(-3, 3, 7)
            assert np.allclose(fam.inverse_mean(fam.mean(eta)), eta)

    def test_unknown_family_rejected(self):
        with pytest.raises(dde.ValidationError):
            dde.family_from_name("gamma")

    def test_sample_space_validation(self):
        with pytest.raises(dde.ValidationError):
            dde.Dataset(np.array([[0.5]]), dde.BERNOULLI)
        with pytest.raises(dde.ValidationError):
            dde.Dataset(np.array([[-1.0]]), dde.POISSON)
        dde.Dataset(np.array([[-1.5]]), dde.NORMAL)  # fine

    @given(st.floats(-500, 500))
    def test_softplus_stable(self, x):
        v = softplus(np.array([x]))[0]
        assert np.isfinite(v) and v >= max(x, 0.0)


class TestModelValidation:
    def test_shape_mismatch(self):
        m = random_model(np.random.default_rng(0), 4, [2])
        m.B[0] = m.B[0][:, :2]
        with pytest.raises(dde.ShapeError):
            m.validate()

    def test_p_bounds(self):
        m = random_model(np.random.default_rng(0), 4, [2])
        m.p = np.array([0.5, 1.0])
        with pytest.raises(dde.ValidationError):
            m.validate()

    def test_gamma_required_for_normal(self):
        m = random_model(np.random.default_rng(0), 4, [2], dde.NORMAL)
        m.gamma = None
        with pytest.raises(dde.ShapeError):
            m.validate()

    def test_parameter_count(self):
        m = random_model(np.random.default_rng(0), 5, [3, 2], dde.NORMAL)
        expected = 2 + 5 * 4 + 3 * 3 + 5  # p + B1 + B2 + gamma
        assert m.n_parameters() == expected
        assert m.theta_vector().size == expected


class TestSampling:
    def test_deterministic(self):
        m = random_model(np.random.default_rng(1), 6, [3, 2])
        d1, a1 = dde.sample(m, 50, seed=9)
        d2, a2 = dde.sample(m, 50, seed=9)
        assert np.array_equal(d1.Y, d2.Y)
        assert all(np.array_equal(x, y) for x, y in zip(a1.A, a2.A))
        d3, _ = dde.sample(m, 50, seed=10)
        assert not np.array_equal(d1.Y, d3.Y)

    def test_sample_space(self):
        for fam in (dde.BERNOULLI, dde.POISSON, dde.NORMAL):
            m = random_model(np.random.default_rng(2), 5, [2], fam)
            data, latents = dde.sample(m, 40, seed=0)
            assert fam.in_sample_space(data.Y)
            assert latents.A[0].shape == (40, 2)

    def test_top_layer_frequencies(self):
        m = random_model(np.random.default_rng(3), 4, [2])
        m.p = np.array([0.2, 0.8])
        _, latents = dde.sample(m, 20000, seed=4)
        assert np.allclose(latents.A[-1].mean(axis=0), m.p, atol=0.02)


class TestEnumeratedLikelihood:
    def test_pmf_sums_to_one_bernoulli(self):
        # every binary outcome enumerated; total probability must be 1
        rng = np.random.default_rng(5)
        for _ in range(5):
            J = int(rng.integers(2, 5))
            m = random_model(rng, J, [2])
            total = sum(
                np.exp(dde.marginal_logprob(m, np.array(y)))
                for y in itertools.product((0.0, 1.0), repeat=J))
            assert abs(total - 1.0) < 1e-10

    def test_matches_joint_enumeration_oracle(self):
        rng = np.random.default_rng(6)
        for fam in (dde.BERNOULLI, dde.POISSON, dde.NORMAL):
            m = random_model(rng, 4, [2, 2], fam)
            data, _ = dde.sample(m, 6, seed=3)
            got = dde.row_logliks(m, data)
            want = [joint_logprob_oracle(m, y) for y in data.Y]
            assert np.allclose(got, want, atol=1e-9)

    def test_loglik_is_row_sum(self):
        m = random_model(np.random.default_rng(7), 5, [3])
        data, _ = dde.sample(m, 11, seed=0)
        assert np.isclose(dde.loglik(m, data),
                          dde.row_logliks(m, data).sum())

    def test_capacity_cap(self):
        m = random_model(np.random.default_rng(8), 4, [2])
        m.K = [21]
        m.B = [np.zeros((4, 22))]
        m.p = np.full(21, 0.5)
        with pytest.raises(dde.CapacityError):
            dde.loglik(m, dde.Dataset(np.zeros((2, 4)), dde.BERNOULLI))

    def test_transition_table_rows_normalize(self):
        rng = np.random.default_rng(9)
        B = rng.normal(0, 1, (3, 3))
        child = enumerate_configs(3)
        parent = enumerate_configs(2)
        T = transition_log_table(B, child, parent)
        assert np.allclose(np.logaddexp.reduce(T, axis=0), 0.0, atol=1e-10)

    def test_emission_table_matches_logpdf(self):
        rng = np.random.default_rng(10)
        for fam in (dde.BERNOULLI, dde.POISSON, dde.NORMAL):
            m = random_model(rng, 4, [2], fam)
            data, _ = dde.sample(m, 5, seed=1)
            cfgs = enumerate_configs(2)
            table = emission_log_table(data.Y, m, cfgs)
            for i, s in itertools.product(range(5), range(4)):
                eta = m.B[0][:, 0] + m.B[0][:, 1:] @ cfgs[s]
                want = m.family.logpdf(data.Y[i], eta, m.gamma).sum()
                assert np.isclose(table[i, s], want, atol=1e-9)


class TestGraphs:
    def test_zero_slopes_zero_graph(self):
        m = random_model(np.random.default_rng(11), 4, [2])
        m.B[0][:, 1:] = 0.0
        G = dde.graphs_from_coefficients(m)
        assert not G.G[0].any()

    def test_tolerance(self):
        m = random_model(np.random.default_rng(12), 4, [2])
        m.B[0][:, 1:] = 1e-9
        assert dde.graphs_from_coefficients(m).G[0].all()
        assert not dde.graphs_from_coefficients(m, tol=1e-6).G[0].any()


class TestBenchmarkParams:
    def test_strict_shape_and_pure_children(self):
        m = dde.make_benchmark_params("strict", 18, [6, 2], dde.NORMAL)
        G1 = dde.graphs_from_coefficients(m).G[0]
        assert np.array_equal(G1[:6], np.eye(6, dtype=int))
        assert np.array_equal(G1[6:12], np.eye(6, dtype=int))
        assert (G1[12:].sum(axis=1) == 2).all()
        assert np.allclose(m.B[0][:6, 0], -2.0)
        assert np.allclose(m.B[0][6:12, 0], -4.0)
        assert m.gamma is not None and np.allclose(m.gamma, 1.0)
        assert np.allclose(m.p, 0.5)

    def test_generic_lacks_pure_children(self):
        # the banded blocks leave most latent variables without any
        # single-parent child row
        m = dde.make_benchmark_params("generic", 18, [6, 2], dde.NORMAL)
        G1 = dde.graphs_from_coefficients(m).G[0]
        pure_counts = [
            int(((G1.sum(axis=1) == 1) & (G1[:, k] == 1)).sum())
            for k in range(6)]
        assert any(c == 0 for c in pure_counts)
        assert all(c < 2 for c in pure_counts)

    def test_bad_ratio_rejected(self):
        with pytest.raises(dde.ValidationError):
            dde.make_benchmark_params("strict", 18, [5, 2], dde.NORMAL)

    def test_generic_poisson_intercepts_shrunk(self):
        m = dde.make_benchmark_params("generic", 18, [6, 2], dde.POISSON)
        assert (m.B[0][:, 0] <= -5.0).any()
        # rates stay sane under the all-ones parent
        eta_max = m.B[0][:, 0] + m.B[0][:, 1:].sum(axis=1)
        assert (np.exp(eta_max) < 1e4).all()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_linear_predictors_matches_loop(seed):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(3, 4))
    A = (rng.random((5, 3)) < 0.5).astype(float)
    eta = linear_predictors(B, A)
    for i in range(5):
        assert np.allclose(eta[i], B[:, 0] + B[:, 1:] @ A[i])


def test_first_layer_marginal_normalizes():
    m = random_model(np.random.default_rng(13), 4, [2, 2])
    cfgs, logpa = first_layer_log_marginal(m)
    assert cfgs.shape == (4, 2)
    assert abs(np.exp(logpa).sum() - 1.0) < 1e-10


def test_top_log_prior_matches_product():
    m = random_model(np.random.default_rng(14), 4, [3])
    cfgs = enumerate_configs(3)
    lp = top_log_prior(m, cfgs)
    want = [np.prod(np.where(c == 1, m.p, 1 - m.p)) for c in cfgs]
    assert np.allclose(np.exp(lp), want)
