"""Bloom-filter baseline over ternary codes.

A Bloom filter needs discrete objects, so signatures are ternary-coded
first and the serialized code feeds k keyed hash functions. A noisy query
is only recognized when its code survives the noise unchanged, which
happens per symbol with probability p_s and per code with pi = p_s^l.
The (threshold, code length) pair is therefore tuned to maximize pi
subject to the code entropy exceeding log(l_B) + h (so uniform indexing
into the filter is plausible) and the all-zero code being unlikely for
every enrolled signature (pi0 < eps / N).
"""

from __future__ import annotations

import csv
import hashlib
import math
import struct
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .embedding import as_ternary, encode_code
from .numerics import adaptive_simpson, gauss_cdf

_LN2 = math.log(2.0)


class InfeasibleTuningError(ValueError):
    """No (threshold, code length) pair satisfies the tuning constraints."""


class ChannelStats(NamedTuple):
    entropy: float   # H, in nats
    pi0: float       # Pr(code is all-zero)
    pi: float        # Pr(code survives the noise), p_s^l
    p: float         # per-symbol tail mass Phi_sigma_x(-lambda)
    p_s: float       # per-symbol survival probability


def _xlogx(v: float) -> float:
    return v * math.log(v) if v > 0.0 else 0.0


def symbol_entropy(p: float, ternary: bool = False) -> float:
    """Per-symbol entropy in nats for tail mass ``p``.

    The default is the support-pattern form -2p log(2p) - (1-2p) log(1-2p),
    which values only the zero / non-zero pattern (and vanishes for full
    binary codes at p = 1/2). ``ternary=True`` switches to the alphabet
    entropy -2p log(p) - (1-2p) log(1-2p) for sensitivity checks.
    """
    if not 0.0 <= p <= 0.5:
        raise ValueError("tail mass must lie in [0, 0.5]")
    if ternary:
        return -2.0 * _xlogx(p) - _xlogx(1.0 - 2.0 * p)
    return -_xlogx(2.0 * p) - _xlogx(1.0 - 2.0 * p)


def symbol_survival(threshold: float, sigma_x: float, sigma_n: float,
                    tol: float = 1e-10) -> float:
    """Probability that one symbol is unchanged by additive Gaussian noise.

    Two adaptive-Simpson integrals over the signature density: the tails
    (non-zero symbols keep their sign when the noisy value stays beyond
    the threshold) and the dead zone (zero symbols survive when the noisy
    value stays inside it). The outer integral is truncated at
    threshold + 10 sigma_x + 10 sigma_n.
    """
    if sigma_x <= 0:
        raise ValueError("sigma_x must be positive")
    if sigma_n < 0:
        raise ValueError("sigma_n must be non-negative")
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    if sigma_n == 0.0:
        return 1.0
    lam = threshold
    inv_sx = 1.0 / (sigma_x * math.sqrt(2.0 * math.pi))
    sx2 = 2.0 * sigma_x * sigma_x
    sn_sqrt2 = sigma_n * math.sqrt(2.0)

    def pdf_x(x):
        return inv_sx * math.exp(-x * x / sx2)

    def cdf_n(x):
        return 0.5 * (1.0 + math.erf(x / sn_sqrt2))

    upper = lam + 10.0 * sigma_x + 10.0 * sigma_n
    tails = 2.0 * adaptive_simpson(
        lambda x: pdf_x(x) * (1.0 - cdf_n(lam - x)), lam, upper, tol)
    dead_zone = 0.0
    if lam > 0.0:
        dead_zone = adaptive_simpson(
            lambda x: pdf_x(x) * (cdf_n(lam - x) - cdf_n(-lam - x)), -lam, lam, tol)
    return min(1.0, tails + dead_zone)


def channel_stats(threshold: float, code_len: int, sigma_x: float,
                  sigma_n: float, ternary_entropy: bool = False) -> ChannelStats:
    """Entropy, all-zero probability and survival probability of the code."""
    if code_len < 1:
        raise ValueError("code length must be at least 1")
    p = float(gauss_cdf(-threshold, sigma_x))
    entropy = code_len * symbol_entropy(p, ternary=ternary_entropy)
    pi0 = (1.0 - 2.0 * p) ** code_len
    p_s = symbol_survival(threshold, sigma_x, sigma_n)
    return ChannelStats(entropy=entropy, pi0=pi0, pi=p_s ** code_len, p=p, p_s=p_s)


def bloom_length(count: int, p_fp: float) -> int:
    """Optimal filter length ceil(N |log p_fp| / log(2)^2)."""
    if count < 1:
        raise ValueError("count must be at least 1")
    if not 0.0 < p_fp < 1.0:
        raise ValueError("p_fp must lie in (0, 1)")
    return math.ceil(count * abs(math.log(p_fp)) / (_LN2 * _LN2))


@dataclass(frozen=True)
class BloomParams:
    """Tuned Bloom configuration; the constraints are re-checked on build."""

    threshold: float
    code_len: int
    filter_bits: int
    k_hashes: int
    entropy_margin: float
    epsilon: float
    count: int
    sigma_x: float
    sigma_n: float
    stats: ChannelStats | None = None

    def __post_init__(self):
        if self.filter_bits < 1 or self.k_hashes < 1:
            raise ValueError("filter_bits and k_hashes must be positive")
        stats = self.stats or channel_stats(self.threshold, self.code_len,
                                            self.sigma_x, self.sigma_n)
        object.__setattr__(self, "stats", stats)
        if stats.entropy <= math.log(self.filter_bits) + self.entropy_margin:
            raise ValueError("entropy constraint violated: "
                             f"H={stats.entropy:.4g} <= log(l_B)+h")
        if stats.pi0 >= self.epsilon / self.count:
            raise ValueError("all-zero constraint violated: "
                             f"pi0={stats.pi0:.4g} >= eps/N")


def tune(count: int, p_fp: float, entropy_margin: float = 3.0,
         epsilon: float = 1e-3, sigma_x: float = 1.0, sigma_n: float = 0.1,
         lambda_step: float = 0.005, max_code_len: int = 4096) -> BloomParams:
    """Pick (threshold, code length) maximizing the survival probability.

    Grid search over threshold in [0, 5 sigma_x] (step ``lambda_step`` x
    sigma_x) and code length in {8, ..., max_code_len}. For a fixed
    threshold the survival pi = p_s^l decreases with l, so the shortest
    feasible length is optimal; feasibility in l reduces to two analytic
    cutoffs (entropy grows linearly, pi0 shrinks geometrically).
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    filter_bits = bloom_length(count, p_fp)
    entropy_target = math.log(filter_bits) + entropy_margin
    pi0_target = epsilon / count

    best = None  # (pi, threshold, code_len, stats)
    n_steps = int(round(5.0 / lambda_step))
    for i in range(n_steps + 1):
        lam = i * lambda_step * sigma_x
        p = float(gauss_cdf(-lam, sigma_x))
        e1 = symbol_entropy(p)
        if e1 <= 0.0:
            continue  # p = 1/2 or p = 0: no usable entropy per symbol
        l_entropy = math.floor(entropy_target / e1) + 1
        one_minus = 1.0 - 2.0 * p
        if one_minus <= 0.0:
            l_zero = 1
        elif one_minus ** max_code_len >= pi0_target:
            continue
        else:
            l_zero = math.floor(math.log(pi0_target) / math.log(one_minus)) + 1
        code_len = max(8, l_entropy, l_zero)
        if code_len > max_code_len:
            continue
        p_s = symbol_survival(lam, sigma_x, sigma_n)
        pi = p_s ** code_len
        if best is None or pi > best[0]:
            stats = ChannelStats(entropy=code_len * e1,
                                 pi0=one_minus ** code_len,
                                 pi=pi, p=p, p_s=p_s)
            best = (pi, lam, code_len, stats)
    if best is None:
        raise InfeasibleTuningError(
            f"no feasible (threshold, code length) for N={count}, p_fp={p_fp}, "
            f"h={entropy_margin}, eps={epsilon}")
    _, lam, code_len, stats = best
    k_hashes = max(1, round(filter_bits / count * _LN2))
    return BloomParams(threshold=lam, code_len=code_len, filter_bits=filter_bits,
                       k_hashes=k_hashes, entropy_margin=entropy_margin,
                       epsilon=epsilon, count=count, sigma_x=sigma_x,
                       sigma_n=sigma_n, stats=stats)


@dataclass
class BloomFilter:
    """Plain bit-array Bloom filter fed with serialized ternary codes."""

    bits: np.ndarray
    k_hashes: int
    hash_seed: int
    code_len: int | None = None  # enrollment code length, checked when set

    @classmethod
    def empty(cls, filter_bits: int, k_hashes: int, hash_seed: int = 0,
              code_len: int | None = None) -> "BloomFilter":
        return cls(bits=np.zeros(filter_bits, dtype=bool),
                   k_hashes=k_hashes, hash_seed=hash_seed, code_len=code_len)

    def _indices(self, code) -> list[int]:
        arr = as_ternary(code)
        if self.code_len is not None and arr.size != self.code_len:
            raise ValueError(f"code length {arr.size} != enrollment length {self.code_len}")
        payload = encode_code(arr)
        out = []
        for i in range(self.k_hashes):
            key = struct.pack("<QQ", self.hash_seed, i)
            digest = hashlib.blake2b(payload, key=key, digest_size=8).digest()
            out.append(int.from_bytes(digest, "little") % self.bits.size)
        return out

    def add(self, code) -> None:
        self.bits[self._indices(code)] = True

    def contains(self, code) -> bool:
        return bool(self.bits[self._indices(code)].all())


def bloom_enroll(codes, params: BloomParams, hash_seed: int = 0) -> BloomFilter:
    """Insert every code into a fresh filter sized by ``params``."""
    filt = BloomFilter.empty(params.filter_bits, params.k_hashes, hash_seed,
                             code_len=params.code_len)
    for code in codes:
        filt.add(code)
    return filt


def bloom_query(filt: BloomFilter, code) -> bool:
    """Membership answer: true iff all addressed bits are set."""
    return filt.contains(as_ternary(code))


def write_bloom_params_csv(params: BloomParams, path) -> None:
    """CSV export: lambda, l, l_b, k, H, pi0, pi."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "l", "l_b", "k", "H", "pi0", "pi"])
        writer.writerow([f"{params.threshold:.9g}", params.code_len,
                         params.filter_bits, params.k_hashes,
                         f"{params.stats.entropy:.9g}",
                         f"{params.stats.pi0:.9g}", f"{params.stats.pi:.9g}"])
