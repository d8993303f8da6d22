"""Identifiability checker tests, cross-checked against brute-force
oracles for matchings and the condition-C partition search."""

import itertools

import numpy as np
import pytest

import dde
from dde.identifiability import (check_condition_A, check_condition_B,
                                 check_condition_C, max_bipartite_matching,
                                 validate_model_assumptions,
                                 verify_certificate)


def brute_matching_size(G):
    """Largest row->column matching by enumerating column subsets."""
    n_rows, n_cols = G.shape
    best = 0
    for size in range(min(n_rows, n_cols), 0, -1):
        for cols in itertools.combinations(range(n_cols), size):
            for rows in itertools.permutations(range(n_rows), size):
                if all(G[r, c] for r, c in zip(rows, cols)):
                    return size
    return best


def brute_condition_C(G):
    """Exhaustive oracle: try every pair of disjoint column-saturating
    SDRs and demand the leftover rows cover all columns."""
    n_rows, K = G.shape
    candidates = [np.flatnonzero(G[:, c]).tolist() for c in range(K)]
    for m1 in itertools.product(*candidates):
        if len(set(m1)) != K:
            continue
        rest = [r for r in range(n_rows) if r not in m1]
        for m2 in itertools.product(*[[r for r in cand if r in rest]
                                      for cand in candidates]):
            if len(set(m2)) != K:
                continue
            left = [r for r in rest if r not in m2]
            if left and (G[left].sum(axis=0) >= 1).all():
                return True
    return False


class TestConditionA:
    def test_strict_benchmark_holds(self):
        m = dde.make_benchmark_params("strict", 18, [6, 2], dde.BERNOULLI)
        G1 = dde.graphs_from_coefficients(m).G[0]
        rep = check_condition_A(G1)
        assert rep.ok
        assert all(len(v) == 2 for v in rep.certificate["pure_children"].values())
        # only two pure children per column, so the three-child variant fails
        assert check_condition_A(G1, min_pure=3).holds == "no"

    def test_generic_benchmark_fails(self):
        m = dde.make_benchmark_params("generic", 18, [6, 2], dde.BERNOULLI)
        G1 = dde.graphs_from_coefficients(m).G[0]
        assert check_condition_A(G1).holds == "no"

    def test_a3_implies_a(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            G = (rng.random((10, 3)) < 0.4).astype(int)
            if check_condition_A(G, min_pure=3).ok:
                assert check_condition_A(G, min_pure=2).ok

    def test_bad_input(self):
        with pytest.raises(dde.ValidationError):
            check_condition_A(np.array([[0.5, 1.0]]))


class TestConditionB:
    def test_full_rank_rows_hold(self):
        B = np.hstack([np.zeros((3, 1)), np.diag([1.0, 2.0, 3.0])])
        rep = check_condition_B(B)
        assert rep.ok
        assert rep.certificate["n_pairs"] == 13

    def test_rank_deficient_fails_with_pair(self):
        # a single summed row cannot tell (1,0) from (0,1)
        B = np.array([[0.0, 1.0, 1.0]])
        rep = check_condition_B(B)
        assert rep.holds == "no"
        a, b = rep.certificate["pair"]
        diff = np.array(a, dtype=float) - np.array(b, dtype=float)
        assert abs(B[:, 1:] @ diff) < 1e-12

    def test_pure_rows_excluded(self):
        # the identity rows would separate everything, but they are pure
        # and must not be used as evidence
        B = np.hstack([np.zeros((3, 1)),
                       np.vstack([np.eye(2), np.ones((1, 2))])])
        rep = check_condition_B(B, pure_rows=(0, 1))
        assert rep.holds == "no"

    def test_witnesses_point_at_separating_rows(self):
        rng = np.random.default_rng(1)
        B = np.hstack([np.zeros((6, 1)), rng.normal(0, 1, (6, 3))])
        rep = check_condition_B(B)
        assert rep.ok
        for delta_str, j in rep.certificate["witness_rows"].items():
            delta = np.array(eval(delta_str), dtype=float)
            assert abs(B[j, 1:] @ delta) > 1e-12


class TestMatching:
    def test_matches_brute_force(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            G = (rng.random((rng.integers(1, 6), rng.integers(1, 5)))
                 < 0.45).astype(int)
            m = max_bipartite_matching(G)
            assert len(m) == brute_matching_size(G)
            for r, c in m.items():
                assert G[r, c] == 1
            assert len(set(m.values())) == len(m)

    def test_perfect_on_identity(self):
        assert max_bipartite_matching(np.eye(4, dtype=int)) == {
            0: 0, 1: 1, 2: 2, 3: 3}


class TestConditionC:
    def test_benchmark_graphs_hold(self):
        for kind in ("strict", "generic"):
            m = dde.make_benchmark_params(kind, 18, [6, 2], dde.BERNOULLI)
            for G in dde.graphs_from_coefficients(m).G:
                rep = check_condition_C(G)
                assert rep.ok, (kind, rep.message)
                assert verify_certificate(rep, G)

    def test_thin_column_fails_fast(self):
        G = np.ones((6, 2), dtype=int)
        G[:, 1] = 0
        G[0, 1] = 1
        rep = check_condition_C(G)
        assert rep.holds == "no" and rep.certificate["column"] == 1

    def test_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(3)
        n_checked = 0
        for _ in range(120):
            n_rows = int(rng.integers(4, 9))
            K = int(rng.integers(2, 4))
            G = (rng.random((n_rows, K)) < 0.5).astype(int)
            rep = check_condition_C(G)
            assert rep.holds in ("yes", "no")
            assert rep.ok == brute_condition_C(G)
            if rep.ok:
                assert verify_certificate(rep, G)
                n_checked += 1
        assert n_checked > 10  # the sample exercised both outcomes

    def test_tampered_certificate_rejected(self):
        m = dde.make_benchmark_params("strict", 18, [6, 2], dde.BERNOULLI)
        G = dde.graphs_from_coefficients(m).G[0]
        rep = check_condition_C(G)
        assert rep.ok and verify_certificate(rep, G)
        rep.certificate["I1"] = rep.certificate["I2"]
        assert not verify_certificate(rep, G)


class TestModelAssumptions:
    def _model(self):
        return dde.make_benchmark_params("strict", 18, [6, 2], dde.NORMAL)

    def test_benchmark_clean(self):
        reports = validate_model_assumptions(self._model())
        assert all(r.ok for r in reports)
        names = [r.condition for r in reports]
        assert names[0] == "assumption-1a"
        assert len(reports) == 1 + 2 * 2

    def test_bad_proportion_flagged(self):
        m = self._model()
        m.p = np.array([0.0, 0.5])
        reports = validate_model_assumptions(m)
        assert reports[0].holds == "no"

    def test_empty_column_flagged(self):
        m = self._model()
        m.B[1][:, 1] = 0.0
        reports = {r.condition: r for r in validate_model_assumptions(m)}
        assert reports["assumption-1b-layer2"].holds == "no"
        assert 0 in reports["assumption-1b-layer2"].certificate["empty_columns"]

    def test_sign_convention_flagged(self):
        m = self._model()
        m.B[0][:, 1] *= -1
        reports = {r.condition: r for r in validate_model_assumptions(m)}
        assert reports["assumption-1c-layer1"].holds == "no"
