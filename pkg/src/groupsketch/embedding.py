"""Sparse ternary coding of real vectors.

A signature ``x`` in R^d is projected onto the rows of a row-orthonormal
matrix and each projection is quantized to {-1, 0, +1}: components whose
magnitude exceeds a threshold keep their sign, the rest collapse to zero.
For centered Gaussian signatures with component deviation ``sigma`` the
expected fraction of non-zero symbols is ``2 * Phi(-threshold / sigma)``,
which makes the threshold and the sparsity interchangeable parameters.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .numerics import gauss_cdf, gauss_quantile

_MAGIC = b"TERN"
_VERSION = 1
_HEADER = struct.Struct("<4sIQ")  # magic, version, code length


@dataclass(frozen=True)
class TransformMatrix:
    """Row-orthonormal projection, regenerable from ``(shape, seed)``."""

    matrix: np.ndarray
    seed: int

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2:
            raise ValueError("transform must be a 2-D matrix")
        rows, cols = m.shape
        if rows == 0 or rows > cols:
            raise ValueError(f"need 1 <= rows <= cols, got {rows}x{cols}")
        gram = m @ m.T
        if np.max(np.abs(gram - np.eye(rows))) > 1e-10:
            raise ValueError("rows are not orthonormal")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]


def make_transform(dim: int, code_len: int, seed: int) -> TransformMatrix:
    """Build the ternary-coding projection for ``dim``-dimensional inputs.

    A seeded i.i.d. standard Gaussian matrix is QR-orthonormalized (with
    the R-diagonal sign fix so the factorization is unique) and the first
    ``code_len`` rows are kept. Deterministic in ``(dim, code_len, seed)``.
    """
    if code_len < 1 or code_len > dim:
        raise ValueError(f"need 1 <= code_len <= dim, got code_len={code_len} dim={dim}")
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(a)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    q = q * signs
    return TransformMatrix(matrix=q[:code_len, :], seed=seed)


def embed(x: np.ndarray, transform: TransformMatrix, threshold: float) -> np.ndarray:
    """Quantize ``transform @ x`` to a ternary code.

    Symbols are sign(z_i) when |z_i| > threshold (strictly), else 0.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != transform.cols:
        raise ValueError(f"expected vector of dim {transform.cols}, got shape {x.shape}")
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    z = transform.matrix @ x
    return quantize(z, threshold)


def embed_batch(columns: np.ndarray, transform: TransformMatrix,
                threshold: float) -> np.ndarray:
    """Embed every column of a d x n matrix; returns an n x l int8 array."""
    columns = np.asarray(columns, dtype=float)
    if columns.ndim != 2 or columns.shape[0] != transform.cols:
        raise ValueError(f"expected d x n matrix with d={transform.cols}, got {columns.shape}")
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    z = transform.matrix @ columns
    return quantize(z, threshold).T


def quantize(z: np.ndarray, threshold: float) -> np.ndarray:
    """Ternary quantization of raw projection values."""
    return (np.sign(z) * (np.abs(z) > threshold)).astype(np.int8)


def expected_sparsity(threshold: float, sigma_x: float) -> float:
    """Expected non-zero symbol fraction, ``2 * Phi(-threshold / sigma_x)``."""
    if sigma_x <= 0:
        raise ValueError("sigma_x must be positive")
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    return float(2.0 * gauss_cdf(-threshold, sigma_x))


def lambda_from_sparsity(s_frac: float, sigma_x: float) -> float:
    """Threshold achieving a target non-zero fraction in expectation.

    Inverts ``s = 2 * Phi(-lambda / sigma_x)``; s_frac must lie in (0, 1].
    """
    if not 0.0 < s_frac <= 1.0:
        raise ValueError(f"sparsity fraction must be in (0, 1], got {s_frac}")
    if sigma_x <= 0:
        raise ValueError("sigma_x must be positive")
    return float(-gauss_quantile(s_frac / 2.0, sigma_x))


def calibrated_threshold(z: np.ndarray, s_frac: float) -> float:
    """Data-dependent threshold giving exactly round(s_frac * l) non-zeros.

    Used when the vector being coded has an unknown or non-Gaussian scale
    (e.g. an aggregate of several signatures): the threshold is placed
    between the order statistics of |z| so that the strict comparison in
    :func:`quantize` keeps the top ``round(s_frac * l)`` magnitudes.
    """
    if not 0.0 < s_frac <= 1.0:
        raise ValueError(f"sparsity fraction must be in (0, 1], got {s_frac}")
    mags = np.sort(np.abs(np.asarray(z, dtype=float)))
    l = mags.size
    if l == 0:
        raise ValueError("empty projection vector")
    k = int(round(s_frac * l))
    if k >= l:
        return 0.0
    if k == 0:
        return float(mags[-1])
    return float(0.5 * (mags[l - k - 1] + mags[l - k]))


@dataclass(frozen=True)
class EmbeddingParams:
    """Threshold / sparsity pair kept mutually consistent."""

    threshold: float
    sigma_x: float
    target_sparsity: float

    def __post_init__(self):
        expected = expected_sparsity(self.threshold, self.sigma_x)
        if abs(expected - self.target_sparsity) > 1e-9:
            raise ValueError(
                f"threshold {self.threshold} implies sparsity {expected}, "
                f"not {self.target_sparsity}")

    @classmethod
    def from_sparsity(cls, s_frac: float, sigma_x: float) -> "EmbeddingParams":
        lam = lambda_from_sparsity(s_frac, sigma_x)
        return cls(threshold=lam, sigma_x=sigma_x,
                   target_sparsity=expected_sparsity(lam, sigma_x))

    @classmethod
    def from_threshold(cls, threshold: float, sigma_x: float) -> "EmbeddingParams":
        return cls(threshold=threshold, sigma_x=sigma_x,
                   target_sparsity=expected_sparsity(threshold, sigma_x))


def as_ternary(code) -> np.ndarray:
    """Validate and return a 1-D int8 ternary code."""
    arr = np.asarray(code)
    if arr.ndim != 1:
        raise ValueError("ternary code must be one-dimensional")
    arr = arr.astype(np.int8)
    if not np.all((arr == -1) | (arr == 0) | (arr == 1)):
        raise ValueError("code symbols must be in {-1, 0, +1}")
    return arr


def encode_code(code) -> bytes:
    """Serialize a ternary code: 16-byte header then one signed byte per symbol."""
    arr = as_ternary(code)
    return _HEADER.pack(_MAGIC, _VERSION, arr.size) + arr.tobytes()


def decode_code(data: bytes) -> np.ndarray:
    """Inverse of :func:`encode_code`."""
    if len(data) < _HEADER.size:
        raise ValueError("truncated code: missing header")
    magic, version, length = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != _VERSION:
        raise ValueError(f"unsupported version {version}")
    body = data[_HEADER.size:]
    if len(body) != length:
        raise ValueError(f"expected {length} symbols, got {len(body)} bytes")
    return as_ternary(np.frombuffer(body, dtype=np.int8))
