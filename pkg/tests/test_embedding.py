"""Sparse ternary coding: transform construction, quantization, the
threshold/sparsity mapping and the wire format."""

import math

import numpy as np
import pytest

from groupsketch.embedding import (EmbeddingParams, TransformMatrix,
                                   calibrated_threshold, decode_code, embed,
                                   embed_batch, encode_code,
                                   expected_sparsity, lambda_from_sparsity,
                                   make_transform, quantize)


def bisect_lambda(s_frac, lo=0.0, hi=10.0):
    """Independent oracle: bisection on 2*Phi(-lam) = s using math.erf."""
    def phi(x):
        return 0.5 * (1 + math.erf(x / math.sqrt(2)))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 2 * phi(-mid) > s_frac:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestMakeTransform:
    def test_square_orthonormal(self):
        t = make_transform(4, 4, seed=0)
        assert np.abs(t.matrix @ t.matrix.T - np.eye(4)).max() < 1e-10

    def test_norm_preservation(self):
        t = make_transform(2, 2, seed=7)
        rng = np.random.default_rng(3)
        for _ in range(10):
            x = rng.standard_normal(2)
            assert np.linalg.norm(t.matrix @ x) == pytest.approx(
                np.linalg.norm(x), abs=1e-10)

    def test_deterministic(self):
        a = make_transform(16, 8, seed=42)
        b = make_transform(16, 8, seed=42)
        assert np.array_equal(a.matrix, b.matrix)

    def test_seed_changes_matrix(self):
        a = make_transform(16, 16, seed=1)
        b = make_transform(16, 16, seed=2)
        assert not np.array_equal(a.matrix, b.matrix)

    def test_rectangular_rows_orthonormal(self):
        t = make_transform(32, 5, seed=9)
        assert t.rows == 5 and t.cols == 32
        assert np.abs(t.matrix @ t.matrix.T - np.eye(5)).max() < 1e-10

    @pytest.mark.parametrize("dim,code_len", [(4, 5), (4, 0), (3, -1)])
    def test_bad_shapes(self, dim, code_len):
        with pytest.raises(ValueError):
            make_transform(dim, code_len, seed=0)

    def test_type_rejects_non_orthonormal(self):
        with pytest.raises(ValueError):
            TransformMatrix(matrix=np.ones((2, 3)), seed=0)

    def test_matrix_read_only(self):
        t = make_transform(4, 4, seed=0)
        with pytest.raises(ValueError):
            t.matrix[0, 0] = 5.0


class TestEmbed:
    def test_thresholding_with_identity(self):
        t = TransformMatrix(matrix=np.eye(3), seed=0)
        code = embed(np.array([2.0, -0.5, -3.0]), t, 1.0)
        assert code.tolist() == [1, 0, -1]

    def test_zero_threshold_full_binary(self):
        t = make_transform(64, 64, seed=0)
        rng = np.random.default_rng(1)
        code = embed(rng.standard_normal(64), t, 0.0)
        assert np.all(code != 0)

    def test_zero_vector_all_zero(self):
        t = make_transform(8, 8, seed=0)
        assert not np.any(embed(np.zeros(8), t, 0.5))

    def test_boundary_maps_to_zero(self):
        t = TransformMatrix(matrix=np.eye(2), seed=0)
        assert embed(np.array([1.0, -1.0]), t, 1.0).tolist() == [0, 0]

    def test_sign_antisymmetry(self):
        t = make_transform(32, 32, seed=5)
        rng = np.random.default_rng(11)
        for lam in (0.0, 0.3, 1.0):
            x = rng.standard_normal(32)
            assert np.array_equal(embed(-x, t, lam), -embed(x, t, lam))

    def test_dimension_mismatch(self):
        t = make_transform(8, 8, seed=0)
        with pytest.raises(ValueError):
            embed(np.zeros(9), t, 0.0)

    def test_batch_matches_single(self):
        t = make_transform(16, 16, seed=2)
        rng = np.random.default_rng(4)
        cols = rng.standard_normal((16, 7))
        batch = embed_batch(cols, t, 0.4)
        for j in range(7):
            assert np.array_equal(batch[j], embed(cols[:, j], t, 0.4))


class TestSparsityMapping:
    def test_expected_sparsity_values(self):
        assert expected_sparsity(0.0, 1.0) == pytest.approx(1.0)
        # 55% of symbols non-null around threshold 0.60
        assert expected_sparsity(0.60, 1.0) == pytest.approx(0.5485, abs=5e-4)
        assert expected_sparsity(1.2815515655446004, 1.0) == pytest.approx(0.20, abs=1e-9)

    def test_lambda_from_sparsity_values(self):
        assert lambda_from_sparsity(1.0, 1.0) == 0.0
        # frozen from the bisection oracle, and re-derived here
        oracle = bisect_lambda(0.55)
        assert oracle == pytest.approx(0.5977601260424783, abs=1e-10)
        assert lambda_from_sparsity(0.55, 1.0) == pytest.approx(oracle, abs=1e-9)
        assert lambda_from_sparsity(0.20, 1.0) == pytest.approx(1.2815515655446004, abs=1e-9)

    def test_roundtrip_identity(self):
        for lam in np.linspace(0.0, 4.0, 41):
            s = expected_sparsity(float(lam), 1.0)
            assert lambda_from_sparsity(s, 1.0) == pytest.approx(float(lam), abs=1e-8)

    def test_sigma_scaling(self):
        assert lambda_from_sparsity(0.3, 2.0) == pytest.approx(
            2.0 * lambda_from_sparsity(0.3, 1.0), rel=1e-12)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            lambda_from_sparsity(0.0, 1.0)
        with pytest.raises(ValueError):
            lambda_from_sparsity(1.5, 1.0)
        with pytest.raises(ValueError):
            expected_sparsity(0.5, -1.0)

    def test_empirical_sparsity_matches(self):
        """Non-zero fraction over many embedded Gaussian signatures."""
        t = make_transform(32, 32, seed=3)
        rng = np.random.default_rng(8)
        xs = rng.standard_normal((32, 20000))
        for lam in (0.2, 0.6, 1.5):
            codes = embed_batch(xs, t, lam)
            frac = float(np.mean(codes != 0))
            assert frac == pytest.approx(expected_sparsity(lam, 1.0), abs=0.01)


class TestCalibratedThreshold:
    def test_exact_nonzero_count(self):
        rng = np.random.default_rng(0)
        z = rng.standard_normal(200)
        for s in (0.1, 0.5, 0.85):
            lam = calibrated_threshold(z, s)
            assert int(np.sum(np.abs(z) > lam)) == round(s * z.size)

    def test_full_density(self):
        assert calibrated_threshold(np.array([1.0, -2.0, 0.5]), 1.0) == 0.0

    def test_scale_invariance(self):
        rng = np.random.default_rng(5)
        z = rng.standard_normal(64)
        lam = calibrated_threshold(z, 0.4)
        assert calibrated_threshold(3.0 * z, 0.4) == pytest.approx(3.0 * lam)
        assert np.array_equal(quantize(z, lam), quantize(3.0 * z, 3.0 * lam))


class TestEmbeddingParams:
    def test_consistency_enforced(self):
        p = EmbeddingParams.from_sparsity(0.55, 1.0)
        assert p.target_sparsity == pytest.approx(0.55, abs=1e-12)
        with pytest.raises(ValueError):
            EmbeddingParams(threshold=0.6, sigma_x=1.0, target_sparsity=0.9)

    def test_from_threshold(self):
        p = EmbeddingParams.from_threshold(0.6, 2.0)
        assert p.target_sparsity == pytest.approx(expected_sparsity(0.6, 2.0))


class TestWireFormat:
    def test_roundtrip(self):
        code = np.array([1, 0, -1, -1, 0, 1], dtype=np.int8)
        assert np.array_equal(decode_code(encode_code(code)), code)

    def test_header_and_symbol_bytes(self):
        code = np.array([-1, 0, 1], dtype=np.int8)
        blob = encode_code(code)
        assert len(blob) == 16 + 3
        assert blob[:4] == b"TERN"
        assert blob[16] == 255 and blob[17] == 0 and blob[18] == 1

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            decode_code(b"WAT?" + bytes(12))
        with pytest.raises(ValueError):
            decode_code(encode_code(np.zeros(4, dtype=np.int8))[:-1])
        with pytest.raises(ValueError):
            encode_code(np.array([0, 2, 1]))
