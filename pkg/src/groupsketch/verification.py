"""Score function, threshold test, ROC/AUC machinery and the multi-group
error-rate predictors.

A query code is compared to a representative with the negative Euclidean
distance, so identical codes reach the maximum score 0 and the membership
test is "score > tau". With M groups the system answers positively when
at least one per-group test does, which is equivalent to thresholding the
maximum per-group score; the corresponding global error rates follow from
the per-group operating points by the product formulas implemented in
:func:`predict_multi_group`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import stats

from .embedding import as_ternary

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


class OperatingPoint(NamedTuple):
    tau: float
    p_fp: float
    p_fn: float


@dataclass(frozen=True)
class RocCurve:
    """Operating points ordered by increasing threshold, plus the AUC."""

    tau: np.ndarray
    p_fp: np.ndarray
    p_fn: np.ndarray
    auc: float

    def __post_init__(self):
        for name in ("tau", "p_fp", "p_fn"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.tau.size == self.p_fp.size == self.p_fn.size):
            raise ValueError("mismatched curve arrays")
        if np.any(self.p_fp < 0) or np.any(self.p_fp > 1) \
                or np.any(self.p_fn < 0) or np.any(self.p_fn > 1):
            raise ValueError("probabilities must lie in [0, 1]")
        if np.any(np.diff(self.tau) < 0):
            raise ValueError("thresholds must be non-decreasing")
        if np.any(np.diff(self.p_fp) > 1e-15):
            raise ValueError("p_fp must be non-increasing in tau")
        if not 0.0 <= self.auc <= 1.0:
            raise ValueError("auc must lie in [0, 1]")

    def operating_points(self) -> list[OperatingPoint]:
        return [OperatingPoint(float(t), float(fp), float(fn))
                for t, fp, fn in zip(self.tau, self.p_fp, self.p_fn)]


def score(q, r) -> float:
    """Negative Euclidean distance between two equal-length ternary codes."""
    qa, ra = as_ternary(q), as_ternary(r)
    if qa.size != ra.size:
        raise ValueError(f"code lengths differ: {qa.size} vs {ra.size}")
    diff = qa.astype(np.float64) - ra.astype(np.float64)
    return float(-np.sqrt(np.dot(diff, diff)))


def score_matrix(queries: np.ndarray, reps: np.ndarray) -> np.ndarray:
    """Pairwise scores between n query codes and m representatives.

    Expands the squared distance through a Gram product; all intermediate
    values are small integers so the result is exact and matches
    :func:`score` pair by pair.
    """
    q = np.atleast_2d(np.asarray(queries)).astype(np.float64)
    r = np.atleast_2d(np.asarray(reps)).astype(np.float64)
    if q.shape[1] != r.shape[1]:
        raise ValueError(f"code lengths differ: {q.shape[1]} vs {r.shape[1]}")
    d2 = (q * q).sum(axis=1)[:, None] + (r * r).sum(axis=1)[None, :] - 2.0 * (q @ r.T)
    return -np.sqrt(np.maximum(d2, 0.0))


def decide(s: float, tau: float) -> bool:
    """Membership decision: strictly greater than the threshold."""
    return bool(s > tau)


def roc_curve(pos_scores, neg_scores) -> RocCurve:
    """Empirical ROC over every distinct score threshold.

    The AUC is the Mann-Whitney statistic (ties count one half), which is
    exact for finite samples and needs no binning.
    """
    pos = np.asarray(pos_scores, dtype=float).ravel()
    neg = np.asarray(neg_scores, dtype=float).ravel()
    if pos.size == 0 or neg.size == 0:
        raise ValueError("need at least one score under each hypothesis")

    taus = np.unique(np.concatenate([pos, neg]))
    pos_sorted = np.sort(pos)
    neg_sorted = np.sort(neg)
    p_fp = (neg.size - np.searchsorted(neg_sorted, taus, side="right")) / neg.size
    p_fn = np.searchsorted(pos_sorted, taus, side="right") / pos.size

    ranks = stats.rankdata(np.concatenate([neg, pos]))
    pos_rank_sum = ranks[neg.size:].sum()
    auc = (pos_rank_sum - pos.size * (pos.size + 1) / 2.0) / (pos.size * neg.size)
    return RocCurve(tau=taus, p_fp=p_fp, p_fn=p_fn, auc=float(auc))


def multi_group_score(q, reps) -> float:
    """Best score of a query against a bank of group representatives."""
    reps = list(reps)
    if not reps:
        raise ValueError("need at least one representative")
    return max(score(q, r) for r in reps)


def predict_multi_group(per_group_points, total: int) -> tuple[float, float]:
    """Global (P_fp, P_fn) from per-group operating points.

    ``per_group_points`` is a sequence of (n_k, p_fp_k, p_fn_k). The global
    test is positive when any group test is; a false negative needs the
    home group to miss while every other group stays negative:

        P_fp = 1 - prod_k (1 - p_fp_k)
        P_fn = sum_k (n_k / N) * p_fn_k * prod_{l != k} (1 - p_fp_l)
    """
    points = list(per_group_points)
    if not points:
        raise ValueError("need at least one group")
    sizes = np.array([p[0] for p in points], dtype=float)
    pfp = np.array([p[1] for p in points], dtype=float)
    pfn = np.array([p[2] for p in points], dtype=float)
    if int(sizes.sum()) != total:
        raise ValueError(f"group sizes sum to {int(sizes.sum())}, expected {total}")
    if np.any((pfp < 0) | (pfp > 1) | (pfn < 0) | (pfn > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    global_fp, global_fn = predict_multi_group_curve(
        sizes, pfp[:, None], pfn[:, None])
    return float(global_fp[0]), float(global_fn[0])


def predict_multi_group_curve(sizes, pfp, pfn) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized product formulas over a shared threshold grid.

    ``pfp`` and ``pfn`` are (M, T) arrays of per-group rates at T
    thresholds. Leave-one-out products are built from prefix/suffix
    cumulative products so groups with p_fp = 1 stay well-defined.
    """
    sizes = np.asarray(sizes, dtype=float)
    pfp = np.asarray(pfp, dtype=float)
    pfn = np.asarray(pfn, dtype=float)
    m = sizes.size
    comp = 1.0 - pfp
    prefix = np.ones_like(comp)
    suffix = np.ones_like(comp)
    if m > 1:
        prefix[1:] = np.cumprod(comp[:-1], axis=0)
        suffix[:-1] = np.cumprod(comp[1:][::-1], axis=0)[::-1]
    loo = prefix * suffix
    weights = sizes / sizes.sum()
    global_fp = 1.0 - comp.prod(axis=0)
    global_fn = (weights[:, None] * pfn * loo).sum(axis=0)
    return global_fp, global_fn


def auc_from_curve(p_fp, p_tp) -> float:
    """Trapezoidal area under a swept (p_fp, p_tp) curve.

    Endpoints (0, 0) and (1, 1) are appended before integrating so a
    partial sweep still produces a proper ROC area.
    """
    fp = np.concatenate([[0.0], np.asarray(p_fp, dtype=float), [1.0]])
    tp = np.concatenate([[0.0], np.asarray(p_tp, dtype=float), [1.0]])
    # lexicographic order keeps vertical runs properly stacked, so a
    # staircase ROC integrates to exactly its Mann-Whitney area
    order = np.lexsort((tp, fp))
    return float(_trapezoid(tp[order], fp[order]))


def write_roc_csv(curve: RocCurve, path) -> None:
    """CSV export: tau, p_fp, p_fn rows plus a trailing AUC summary row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tau", "p_fp", "p_fn"])
        for t, fp, fn in zip(curve.tau, curve.p_fp, curve.p_fn):
            writer.writerow([f"{t:.9g}", f"{fp:.9g}", f"{fn:.9g}"])
        writer.writerow(["auc", f"{curve.auc:.9g}", ""])
