"""Reconstruction attacks of an honest-but-curious server.

The server stores only ternary representatives but knows the (square)
projection matrix. Inverting one embedding is a per-symbol conditional
expectation: a zero symbol reconstructs to 0, a +/-1 symbol to the mean
of the corresponding Gaussian tail. The quality of the best possible
reconstruction has a closed form, and packing N signatures behind one
sum-aggregated representative pushes the per-signature error towards the
prior variance - the quantitative security claim this module evaluates.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .aggregation import SignatureSet, agg_sum
from .embedding import TransformMatrix, as_ternary, embed

_SQRT2 = math.sqrt(2.0)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def tail_mean(threshold: float, sigma: float) -> float:
    """E[Z | Z > threshold] for Z ~ N(0, sigma^2).

    Evaluated as sigma * sqrt(2/pi) / erfcx(threshold / (sigma sqrt 2)),
    which stays finite and accurate however far into the tail the
    threshold sits.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    return float(sigma * _SQRT_2_OVER_PI / special.erfcx(threshold / (sigma * _SQRT2)))


def reconstruct(code, transform: TransformMatrix, threshold: float,
                sigma_x: float) -> np.ndarray:
    """Conditional-expectation reconstruction of a signature from its code.

    Requires a square transform so the projection can be inverted exactly;
    symbol 0 maps to 0, symbol +/-1 to +/- the Gaussian tail mean beyond
    the threshold.
    """
    if transform.rows != transform.cols:
        raise ValueError("reconstruction needs a square transform (code length = dim)")
    arr = as_ternary(code)
    if arr.size != transform.rows:
        raise ValueError(f"code length {arr.size} != transform rows {transform.rows}")
    z_hat = arr.astype(float) * tail_mean(threshold, sigma_x)
    return transform.matrix.T @ z_hat


def _mse_unit(t):
    """Normalized reconstruction error 1 - exp(-t^2) / (pi Phi(-t)).

    Written with erfcx so the tail ratio does not underflow:
    exp(-t^2) / Phi(-t) = 2 exp(-t^2 / 2) / erfcx(t / sqrt 2).
    """
    t = np.asarray(t, dtype=float)
    return 1.0 - 2.0 * np.exp(-0.5 * t * t) / (math.pi * special.erfcx(t / _SQRT2))


def mse_closed_form(threshold, sigma_x: float):
    """Per-component error of the optimal single-embedding reconstruction.

    Starts at sigma_x^2 (1 - 2/pi) at threshold 0, dips to about
    0.19 sigma_x^2 near 0.6 sigma_x, and climbs back to sigma_x^2 as the
    code empties out. Accepts a scalar or an array of thresholds.
    """
    if sigma_x <= 0:
        raise ValueError("sigma_x must be positive")
    t = np.asarray(threshold, dtype=float)
    if np.any(t < 0):
        raise ValueError("threshold must be non-negative")
    out = sigma_x * sigma_x * _mse_unit(t / sigma_x)
    return float(out) if out.ndim == 0 else out


def mse_enrolled_closed_form(threshold: float, sigma_x: float, count: int) -> float:
    """Per-signature error when attacking a sum-aggregated group of ``count``.

    sigma_x^2 (1 - (1 - mse(threshold)) / count): non-decreasing in the
    group size, reaching the prior variance in the limit.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    if sigma_x <= 0:
        raise ValueError("sigma_x must be positive")
    return float(sigma_x * sigma_x * (1.0 - (1.0 - _mse_unit(threshold / sigma_x)) / count))


def empirical_mse_e(sigs: SignatureSet, x_hat: np.ndarray) -> float:
    """(dN)^-1 sum_j ||x_j - x_hat||^2 for a candidate reconstruction."""
    x_hat = np.asarray(x_hat, dtype=float)
    if x_hat.ndim != 1 or x_hat.shape[0] != sigs.dim:
        raise ValueError(f"expected reconstruction of dim {sigs.dim}, got {x_hat.shape}")
    diff = sigs.matrix - x_hat[:, None]
    return float((diff * diff).sum() / (sigs.dim * sigs.count))


def scaling_attack_bound(sigs: SignatureSet, direction: np.ndarray) -> tuple[float, float]:
    """Best-case error of a scaled reconstruction along ``direction``.

    Returns ``(lower_bound, kappa_star)``: kappa_star = w.m / ||w||^2 is
    the oracle scaling (it needs the group mean m, which the server cannot
    compute), and the bound is the per-dimension error at that scaling:

        d * MSE_e >= mean_j ||x_j||^2 - (w.m)^2 / ||w||^2

    so any actual scaled estimate does at least this badly.
    """
    w = np.asarray(direction, dtype=float)
    if w.ndim != 1 or w.shape[0] != sigs.dim:
        raise ValueError(f"expected direction of dim {sigs.dim}, got {w.shape}")
    w_norm2 = float(w @ w)
    if w_norm2 == 0.0:
        raise ValueError("direction must be non-zero")
    m = sigs.mean
    proj = float(w @ m)
    kappa_star = proj / w_norm2
    mean_energy = float((sigs.matrix * sigs.matrix).sum() / sigs.count)
    bound = (mean_energy - proj * proj / w_norm2) / sigs.dim
    return bound, kappa_star


def sum_attack_estimate(sigs: SignatureSet, transform: TransformMatrix,
                        threshold: float, sigma_x: float) -> np.ndarray:
    """The server's estimate of one enrolled signature from a sum representative.

    The aggregate of N i.i.d. signatures has component deviation
    sqrt(N) sigma_x, so its embedding uses the threshold scaled by sqrt(N)
    (same sparsity as a single-signature code) and the reconstruction uses
    the matching prior; dividing by N estimates the group mean.
    """
    n = sigs.count
    scale = math.sqrt(n)
    code = embed(agg_sum(sigs), transform, threshold * scale)
    return reconstruct(code, transform, threshold * scale, sigma_x * scale) / n


@dataclass(frozen=True)
class AttackReport:
    """Security figures for one scheme at one operating point."""

    scheme: str
    count: int
    threshold: float
    mse_embedding: float
    mse_enrolled_empirical: float
    mse_enrolled_theory: float  # NaN when no closed form exists
    lower_bound: float
    kappa_star: float


def write_attack_csv(reports, path) -> None:
    """CSV export of attack reports (the oracle-side kappa is omitted)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scheme", "N", "lambda", "mse_embedding",
                         "mse_enrolled_empirical", "mse_enrolled_theory",
                         "lower_bound"])
        for r in reports:
            theory = "" if math.isnan(r.mse_enrolled_theory) else f"{r.mse_enrolled_theory:.9g}"
            writer.writerow([r.scheme, r.count, f"{r.threshold:.9g}",
                             f"{r.mse_embedding:.9g}",
                             f"{r.mse_enrolled_empirical:.9g}", theory,
                             f"{r.lower_bound:.9g}"])
