"""The four aggregation strategies and the scheme dispatcher."""

import numpy as np
import pytest
import scipy.linalg

from groupsketch.aggregation import (AggregationScheme, RankDeficiencyWarning,
                                     SignatureSet, agg_majority, agg_pinv,
                                     agg_sign_sum, agg_sum,
                                     group_representative)
from groupsketch.embedding import embed, make_transform


def make_set(matrix):
    return SignatureSet(np.asarray(matrix, dtype=float))


class TestSignatureSet:
    def test_properties(self):
        s = make_set(np.ones((3, 2)))
        assert s.dim == 3 and s.count == 2
        np.testing.assert_allclose(s.mean, np.ones(3))

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            make_set(np.ones(3))
        with pytest.raises(ValueError):
            make_set(np.empty((3, 0)))
        with pytest.raises(ValueError):
            make_set(np.array([[np.nan], [0.0]]))


class TestAggSum:
    def test_single_vector(self):
        x = np.array([1.0, -2.0, 3.0])
        np.testing.assert_array_equal(agg_sum(make_set(x[:, None])), x)

    def test_antipodal_pair(self):
        x = np.array([1.0, 2.0])
        g = make_set(np.column_stack([x, -x]))
        np.testing.assert_array_equal(agg_sum(g), np.zeros(2))

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(0)
        g = rng.standard_normal((3, 2))
        oracle = np.zeros(3)
        for j in range(2):
            for i in range(3):
                oracle[i] += g[i, j]
        np.testing.assert_array_equal(agg_sum(make_set(g)), oracle)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(1)
        g = rng.standard_normal((4, 6))
        perm = rng.permutation(6)
        np.testing.assert_allclose(agg_sum(make_set(g)),
                                   agg_sum(make_set(g[:, perm])))


class TestAggPinv:
    def test_single_unit_vector(self):
        x = np.array([0.6, 0.8])
        np.testing.assert_allclose(agg_pinv(make_set(x[:, None])), x, atol=1e-12)

    def test_orthonormal_columns_give_column_sum(self):
        """With orthonormal columns the pseudo-inverse is the transpose."""
        q, _ = np.linalg.qr(np.random.default_rng(2).standard_normal((8, 3)))
        g = make_set(q)
        f = agg_pinv(g)
        np.testing.assert_allclose(f, q.sum(axis=1), atol=1e-10)
        oracle = scipy.linalg.pinv(q).T @ np.ones(3)
        np.testing.assert_allclose(f, oracle, atol=1e-10)

    def test_unit_inner_products(self):
        rng = np.random.default_rng(3)
        g = rng.standard_normal((8, 3))
        f = agg_pinv(make_set(g))
        assert np.abs(g.T @ f - 1.0).max() < 1e-8

    def test_matches_independent_svd_oracle(self):
        rng = np.random.default_rng(4)
        g = rng.standard_normal((12, 5))
        oracle = scipy.linalg.pinv(g).T @ np.ones(5)
        np.testing.assert_allclose(agg_pinv(make_set(g)), oracle, atol=1e-9)

    def test_rank_deficient_warns_minimum_norm(self):
        x = np.array([1.0, 0.0, 0.0])
        g = make_set(np.column_stack([x, x]))  # rank 1, N = 2
        with pytest.warns(RankDeficiencyWarning):
            f = agg_pinv(g)
        # minimum-norm solution still satisfies the constraint on average
        np.testing.assert_allclose(g.matrix.T @ f, np.ones(2), atol=1e-10)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(5)
        g = rng.standard_normal((6, 4))
        perm = rng.permutation(4)
        np.testing.assert_allclose(agg_pinv(make_set(g)),
                                   agg_pinv(make_set(g[:, perm])), atol=1e-10)


class TestCodePooling:
    def test_sign_sum_basics(self):
        codes = [np.array([1, 1, 1], dtype=np.int8),
                 np.array([1, -1, 0], dtype=np.int8),
                 np.array([-1, 0, 0], dtype=np.int8)]
        np.testing.assert_array_equal(agg_sign_sum(codes), [1, 0, 1])

    def test_sign_sum_two_way_cancel(self):
        codes = [np.array([1], dtype=np.int8), np.array([-1], dtype=np.int8)]
        assert agg_sign_sum(codes).tolist() == [0]

    def test_single_code_identity(self):
        c = np.array([1, 0, -1], dtype=np.int8)
        np.testing.assert_array_equal(agg_sign_sum([c]), c)
        np.testing.assert_array_equal(agg_majority([c]), c)

    def test_majority_basics(self):
        codes = [np.array([1, 1, 0], dtype=np.int8),
                 np.array([1, -1, 0], dtype=np.int8),
                 np.array([-1, -1, 1], dtype=np.int8)]
        np.testing.assert_array_equal(agg_majority(codes), [1, -1, 0])

    def test_majority_tie_rules(self):
        # +1/-1 two-way tie falls back to 0
        two = [np.array([1], dtype=np.int8), np.array([-1], dtype=np.int8)]
        assert agg_majority(two).tolist() == [0]
        # tie with zero goes to zero (priority 0 > +1)
        zp = [np.array([0], dtype=np.int8), np.array([1], dtype=np.int8)]
        assert agg_majority(zp).tolist() == [0]
        # three-way tie goes to zero
        three = [np.array([0], dtype=np.int8), np.array([1], dtype=np.int8),
                 np.array([-1], dtype=np.int8)]
        assert agg_majority(three).tolist() == [0]

    def test_majority_all_zero(self):
        codes = [np.zeros(4, dtype=np.int8)] * 3
        assert not np.any(agg_majority(codes))

    def test_negation_antisymmetry(self):
        rng = np.random.default_rng(6)
        codes = rng.integers(-1, 2, size=(9, 16)).astype(np.int8)
        np.testing.assert_array_equal(agg_majority(-codes), -agg_majority(codes))
        np.testing.assert_array_equal(agg_sign_sum(-codes), -agg_sign_sum(codes))

    def test_pooling_permutation_invariant(self):
        rng = np.random.default_rng(7)
        codes = rng.integers(-1, 2, size=(8, 12)).astype(np.int8)
        perm = rng.permutation(8)
        np.testing.assert_array_equal(agg_sign_sum(codes), agg_sign_sum(codes[perm]))
        np.testing.assert_array_equal(agg_majority(codes), agg_majority(codes[perm]))

    def test_mixed_lengths_rejected(self):
        bad = [np.zeros(3, dtype=np.int8), np.zeros(4, dtype=np.int8)]
        with pytest.raises(ValueError):
            agg_sign_sum(bad)
        with pytest.raises(ValueError):
            agg_majority(bad)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            agg_sign_sum([])


class TestGroupRepresentative:
    def test_single_member_all_schemes_agree(self):
        # pinv of a single column is x / ||x||^2, so exact agreement at a
        # fixed threshold needs a unit-norm member (scale-free at lambda=0)
        t = make_transform(16, 16, seed=0)
        x = np.random.default_rng(8).standard_normal(16)
        x /= np.linalg.norm(x)
        g = make_set(x[:, None])
        expected = embed(x, t, 0.1)
        for scheme in AggregationScheme:
            np.testing.assert_array_equal(
                group_representative(scheme, g, t, 0.1), expected)

    def test_single_member_agrees_at_zero_threshold_any_norm(self):
        t = make_transform(16, 16, seed=0)
        x = 7.3 * np.random.default_rng(8).standard_normal(16)
        g = make_set(x[:, None])
        expected = embed(x, t, 0.0)
        for scheme in AggregationScheme:
            np.testing.assert_array_equal(
                group_representative(scheme, g, t, 0.0), expected)

    def test_sum_of_antipodal_pair_is_zero_code(self):
        t = make_transform(8, 8, seed=1)
        x = np.random.default_rng(9).standard_normal(8)
        g = make_set(np.column_stack([x, -x]))
        rep = group_representative(AggregationScheme.HOA_SUM, g, t, 0.3)
        assert not np.any(rep)

    def test_sign_sum_of_copies_is_the_code(self):
        t = make_transform(8, 8, seed=2)
        x = np.random.default_rng(10).standard_normal(8)
        g = make_set(np.column_stack([x, x, x]))
        rep = group_representative(AggregationScheme.AOH_SIGN, g, t, 0.2)
        np.testing.assert_array_equal(rep, embed(x, t, 0.2))

    def test_aoh_per_signature_scale_invariance_at_zero_threshold(self):
        """Sign-only coding ignores per-signature positive scalings."""
        t = make_transform(12, 12, seed=3)
        rng = np.random.default_rng(11)
        g = rng.standard_normal((12, 5))
        scales = rng.uniform(0.1, 10.0, size=5)
        for scheme in (AggregationScheme.AOH_SIGN, AggregationScheme.AOH_MAJORITY):
            base = group_representative(scheme, make_set(g), t, 0.0)
            scaled = group_representative(scheme, make_set(g * scales), t, 0.0)
            np.testing.assert_array_equal(base, scaled)

    def test_hoa_sum_global_scaling_with_rescaled_threshold(self):
        t = make_transform(12, 12, seed=4)
        rng = np.random.default_rng(12)
        g = rng.standard_normal((12, 4))
        lam, c = 0.7, 3.5
        base = group_representative(AggregationScheme.HOA_SUM, make_set(g), t, lam)
        scaled = group_representative(AggregationScheme.HOA_SUM, make_set(c * g),
                                      t, c * lam)
        np.testing.assert_array_equal(base, scaled)

    def test_dimension_mismatch(self):
        t = make_transform(8, 8, seed=5)
        with pytest.raises(ValueError):
            group_representative(AggregationScheme.HOA_SUM,
                                 make_set(np.ones((4, 2))), t, 0.1)
