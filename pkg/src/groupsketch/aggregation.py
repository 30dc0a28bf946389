"""Aggregation of enrolled signatures into a single group representative.

Two families exist. Raw-domain aggregation fuses the signatures first and
embeds the result ("hash of aggregation"): plain column sum, or the
pseudo-inverse vector f = (G^+)^T 1 which satisfies x_i^T f = 1 for every
member when G has full column rank. Code-domain aggregation embeds each
signature and pools the ternary codes ("aggregation of hashes"): sign of
the symbol-wise sum, or symbol-wise majority vote.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .embedding import TransformMatrix, as_ternary, embed, embed_batch


class RankDeficiencyWarning(UserWarning):
    """Pseudo-inverse aggregation hit a rank-deficient signature matrix."""


class AggregationScheme(Enum):
    HOA_SUM = "hoa-sum"            # sum raw signatures, then embed
    HOA_PINV = "hoa-pinv"          # pseudo-inverse aggregate, then embed
    AOH_SIGN = "aoh-sign"          # embed each, pool by sign of symbol sum
    AOH_MAJORITY = "aoh-majority"  # embed each, pool by symbol majority


@dataclass(frozen=True)
class SignatureSet:
    """A d x N matrix whose columns are the enrolled signatures."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2:
            raise ValueError("signature matrix must be 2-D (columns are signatures)")
        if m.shape[1] < 1:
            raise ValueError("signature set is empty")
        if not np.all(np.isfinite(m)):
            raise ValueError("signature matrix contains NaN or Inf")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def count(self) -> int:
        return self.matrix.shape[1]

    @property
    def mean(self) -> np.ndarray:
        return self.matrix.mean(axis=1)

    def column(self, j: int) -> np.ndarray:
        return self.matrix[:, j]

    def subset(self, indices) -> "SignatureSet":
        return SignatureSet(self.matrix[:, np.asarray(indices, dtype=int)])


def agg_sum(sigs: SignatureSet) -> np.ndarray:
    """Column sum of the signature matrix."""
    return sigs.matrix.sum(axis=1)


def agg_pinv(sigs: SignatureSet) -> np.ndarray:
    """Pseudo-inverse aggregate f = (G^+)^T 1.

    Computed from the SVD with singular values below
    ``max(d, N) * s_max * 1e-12`` treated as zero. When G is rank
    deficient the minimum-norm solution is returned and a
    :class:`RankDeficiencyWarning` is issued.
    """
    g = sigs.matrix
    u, s, vt = np.linalg.svd(g, full_matrices=False)
    cutoff = max(g.shape) * (s[0] if s.size else 0.0) * 1e-12
    keep = s > cutoff
    if int(keep.sum()) < min(g.shape):
        warnings.warn(
            f"signature matrix is rank deficient (rank {int(keep.sum())} "
            f"< {min(g.shape)}); returning the minimum-norm aggregate",
            RankDeficiencyWarning, stacklevel=2)
    inv_s = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    ones = np.ones(sigs.count)
    # (G^+)^T 1 = U diag(1/s) V^T 1
    return u @ (inv_s * (vt @ ones))


def _stack_codes(codes) -> np.ndarray:
    arrs = [as_ternary(c) for c in codes]
    if not arrs:
        raise ValueError("need at least one code")
    length = arrs[0].size
    if any(a.size != length for a in arrs):
        raise ValueError("codes have mixed lengths")
    return np.stack(arrs)


def agg_sign_sum(codes) -> np.ndarray:
    """Symbol-wise sign of the integer sum; sign(0) = 0 keeps the code ternary."""
    stacked = _stack_codes(codes)
    return np.sign(stacked.sum(axis=0, dtype=np.int64)).astype(np.int8)


def agg_majority(codes) -> np.ndarray:
    """Symbol-wise mode over {-1, 0, +1}.

    Ties are settled with priority 0 > +1 > -1: a +/-1 two-way tie with
    equal counts falls back to 0, as does any tie involving 0, which keeps
    the pooling antisymmetric under global sign flips.
    """
    stacked = _stack_codes(codes)
    n_pos = (stacked == 1).sum(axis=0)
    n_neg = (stacked == -1).sum(axis=0)
    n_zero = stacked.shape[0] - n_pos - n_neg
    lead = np.sign(n_pos - n_neg)
    contested = np.maximum(n_pos, n_neg) <= n_zero
    return np.where(contested, 0, lead).astype(np.int8)


def group_representative(scheme: AggregationScheme, sigs: SignatureSet,
                         transform: TransformMatrix, threshold: float) -> np.ndarray:
    """Aggregate a signature set into one ternary representative.

    Raw-domain schemes embed the aggregated vector with ``threshold``;
    code-domain schemes embed every signature with ``threshold`` and pool
    the codes.
    """
    if sigs.dim != transform.cols:
        raise ValueError(f"signatures have dim {sigs.dim}, transform expects {transform.cols}")
    if scheme is AggregationScheme.HOA_SUM:
        return embed(agg_sum(sigs), transform, threshold)
    if scheme is AggregationScheme.HOA_PINV:
        return embed(agg_pinv(sigs), transform, threshold)
    codes = embed_batch(sigs.matrix, transform, threshold)
    if scheme is AggregationScheme.AOH_SIGN:
        return agg_sign_sum(codes)
    if scheme is AggregationScheme.AOH_MAJORITY:
        return agg_majority(codes)
    raise ValueError(f"unknown scheme {scheme!r}")
