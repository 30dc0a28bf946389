"""Synthetic-data experiment harness.

Generates Gaussian signatures, enrolls them under any of the four
aggregation schemes (optionally partitioned into groups), runs related
(H1) and unrelated (H0) queries, and reports verification performance
(AUC, p_tp at a fixed false-positive level, multi-group theory) next to
security figures (embedding MSE, per-signature MSE against the group
representatives, scaling-attack lower bound).

Raw-domain representatives are coded with a per-aggregate calibrated
threshold so the configured sparsity is realized on the representative
itself regardless of the aggregate's scale; queries always use the
analytic threshold for the signature model. Every random draw derives
from a labelled substream of the master seed, so a configuration maps to
byte-identical CSV output.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .aggregation import (AggregationScheme, SignatureSet, agg_majority,
                          agg_pinv, agg_sign_sum, agg_sum)
from .attack import (AttackReport, empirical_mse_e, mse_closed_form,
                     mse_enrolled_closed_form, reconstruct,
                     scaling_attack_bound)
from .bloom import InfeasibleTuningError, bloom_enroll, bloom_query, tune
from .embedding import (TransformMatrix, calibrated_threshold, embed_batch,
                        lambda_from_sparsity, make_transform, quantize)
from .partitioning import GroupAssignment, kmeans_partition, random_partition
from .verification import (auc_from_curve, predict_multi_group_curve,
                           roc_curve, score_matrix)

ALL_SCHEMES = (AggregationScheme.HOA_SUM, AggregationScheme.HOA_PINV,
               AggregationScheme.AOH_SIGN, AggregationScheme.AOH_MAJORITY)

RESULT_COLUMNS = [
    "scheme", "sparsity", "lambda", "dim", "count", "groups", "partitioner",
    "n_min", "trials_pos", "trials_neg", "auc", "auc_theory",
    "p_tp_at_fp_1e2", "mse_embedding", "mse_embedding_rel",
    "mse_enrolled_empirical", "mse_enrolled_rel", "mse_enrolled_theory",
    "lower_bound",
]

BLOOM_COLUMNS = [
    "status", "lambda", "l", "l_b", "k", "H", "pi0", "pi",
    "pi_emp", "pi0_emp", "p_tp_emp", "fp_emp", "fp_target", "trials",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """Knobs of one experiment grid; the grid cells are (scheme, sparsity)."""

    seed: int = 1
    dim: int = 1024
    count: int = 128
    groups: int = 1
    sigma_x: float = 1.0
    sigma_n: float = 0.1
    sparsity_grid: tuple[float, ...] = (0.6,)
    schemes: tuple[AggregationScheme, ...] = ALL_SCHEMES
    partitioner: str = "random"
    trials_pos: int = 2000
    trials_neg: int = 2000
    normalize_signatures: bool = False

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if min(self.dim, self.count, self.groups,
               self.trials_pos, self.trials_neg) < 1:
            raise ValueError("all counts must be at least 1")
        if self.groups > self.count:
            raise ValueError("more groups than signatures")
        if self.sigma_x <= 0 or self.sigma_n < 0:
            raise ValueError("need sigma_x > 0 and sigma_n >= 0")
        if not self.sparsity_grid:
            raise ValueError("empty sparsity grid")
        if any(not 0.0 < s <= 1.0 for s in self.sparsity_grid):
            raise ValueError("sparsity values must lie in (0, 1]")
        if self.partitioner not in ("random", "kmeans"):
            raise ValueError(f"unknown partitioner {self.partitioner!r}")
        schemes = tuple(AggregationScheme(s) for s in self.schemes)
        object.__setattr__(self, "schemes", schemes)
        object.__setattr__(self, "sparsity_grid",
                           tuple(float(s) for s in self.sparsity_grid))


def _rng(seed: int, *path: int) -> np.random.Generator:
    return np.random.default_rng([seed, *path])


def gen_signatures(count: int, dim: int, sigma_x: float, seed) -> SignatureSet:
    """i.i.d. centered Gaussian signatures as columns; deterministic in seed."""
    if count < 1 or dim < 1:
        raise ValueError("count and dim must be at least 1")
    if sigma_x <= 0:
        raise ValueError("sigma_x must be positive")
    rng = np.random.default_rng(seed)
    return SignatureSet(rng.standard_normal((dim, count)) * sigma_x)


def gen_query(x: np.ndarray, sigma_n: float, seed) -> np.ndarray:
    """Noisy version of an enrolled signature (the H1 query model)."""
    if sigma_n < 0:
        raise ValueError("sigma_n must be non-negative")
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(seed)
    return x + rng.standard_normal(x.shape[0]) * sigma_n


@lru_cache(maxsize=8)
def _cached_transform(dim: int, code_len: int, seed: int) -> TransformMatrix:
    return make_transform(dim, code_len, seed)


@dataclass(frozen=True)
class RepresentativeBank:
    """Per-group representatives plus the parameters needed to attack them."""

    codes: np.ndarray            # (M, l) int8
    thresholds: list[float]      # embedding threshold used per group
    priors: list[float]          # component deviation assumed by the attacker
    query_threshold: float


def build_representatives(scheme: AggregationScheme, group_sets,
                          transform: TransformMatrix, sparsity: float,
                          sigma: float, group_codes=None) -> RepresentativeBank:
    """Build one representative per group under the harness conventions.

    Raw-domain aggregates are projected once and thresholded at the value
    that realizes ``sparsity`` on the aggregate itself (its scale depends
    on the group, so the analytic threshold would not); the attack prior
    follows the same calibration. Code-domain schemes pool the member
    codes (``group_codes`` can supply them precomputed).
    """
    lam_q = lambda_from_sparsity(sparsity, sigma)
    codes, thresholds, priors = [], [], []
    if scheme in (AggregationScheme.HOA_SUM, AggregationScheme.HOA_PINV):
        agg = agg_sum if scheme is AggregationScheme.HOA_SUM else agg_pinv
        for g in group_sets:
            z = transform.matrix @ agg(g)
            lam_k = calibrated_threshold(z, sparsity)
            codes.append(quantize(z, lam_k))
            thresholds.append(lam_k)
            if lam_q > 0:
                priors.append(sigma * lam_k / lam_q)
            else:  # full-density cell: fall back to the projection scale
                priors.append(float(np.linalg.norm(z)) / math.sqrt(z.size))
    elif scheme in (AggregationScheme.AOH_SIGN, AggregationScheme.AOH_MAJORITY):
        pool = (agg_sign_sum if scheme is AggregationScheme.AOH_SIGN
                else agg_majority)
        for k, g in enumerate(group_sets):
            member_codes = (group_codes[k] if group_codes is not None
                            else embed_batch(g.matrix, transform, lam_q))
            codes.append(pool(member_codes))
            thresholds.append(lam_q)
            priors.append(sigma)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return RepresentativeBank(codes=np.stack(codes), thresholds=thresholds,
                              priors=priors, query_threshold=lam_q)


def evaluate_attack(scheme: AggregationScheme, group_sets,
                    bank: RepresentativeBank, transform: TransformMatrix,
                    sigma: float) -> AttackReport:
    """Reconstruction attack against every group representative.

    The sum scheme admits the published estimate (invert the embedding,
    divide by the group size) and a closed-form target. The other schemes
    expose no feasible scaling, so their empirical figure is the
    oracle-scaled error, i.e. exactly the scaling-attack lower bound with
    the reconstruction direction. Group figures are size-weighted.
    """
    total = sum(g.count for g in group_sets)
    mse_emp = bound = kappa = 0.0
    theory_known = scheme is AggregationScheme.HOA_SUM
    mse_th = 0.0 if theory_known else math.nan
    for k, g in enumerate(group_sets):
        weight = g.count / total
        w = reconstruct(bank.codes[k], transform, bank.thresholds[k],
                        max(bank.priors[k], 1e-300))
        if not np.any(w):
            # All-zero reconstruction: the attacker's estimate is 0.
            energy = float((g.matrix * g.matrix).sum() / (g.count * g.dim))
            mse_emp += weight * energy
            bound += weight * energy
        else:
            bound_k, kappa_k = scaling_attack_bound(g, w)
            bound += weight * bound_k
            kappa += weight * kappa_k
            if theory_known:
                mse_emp += weight * empirical_mse_e(g, w / g.count)
            else:
                mse_emp += weight * empirical_mse_e(g, kappa_k * w)
        if theory_known:
            mse_th += weight * mse_enrolled_closed_form(
                bank.query_threshold, sigma, g.count)
    return AttackReport(
        scheme=scheme.value, count=total, threshold=bank.query_threshold,
        mse_embedding=mse_closed_form(bank.query_threshold, sigma),
        mse_enrolled_empirical=mse_emp, mse_enrolled_theory=mse_th,
        lower_bound=bound, kappa_star=kappa)


def _partition(config: ExperimentConfig, sigs: SignatureSet) -> GroupAssignment:
    if config.groups == 1:
        return GroupAssignment(labels=np.zeros(config.count, dtype=int), n_groups=1)
    part_seed = int(_rng(config.seed, 3).integers(2 ** 32))
    if config.partitioner == "kmeans":
        return kmeans_partition(sigs, config.groups, seed=part_seed)
    return random_partition(config.count, config.groups, seed=part_seed)


def run_experiment(config: ExperimentConfig) -> list[dict]:
    """One result row per (scheme, sparsity) cell; deterministic in the config."""
    d = config.dim
    sigs = gen_signatures(config.count, d, config.sigma_x,
                          seed=np.random.SeedSequence([config.seed, 0]))
    sigma_eff = config.sigma_x
    if config.normalize_signatures:
        norms = np.linalg.norm(sigs.matrix, axis=0)
        sigs = SignatureSet(sigs.matrix / norms)
        sigma_eff = 1.0 / math.sqrt(d)

    transform = _cached_transform(d, d, config.seed)
    assignment = _partition(config, sigs)
    group_sets = [sigs.subset(assignment.members(k)) for k in range(config.groups)]
    sizes = assignment.sizes

    rng_pos = _rng(config.seed, 1)
    picks = rng_pos.integers(config.count, size=config.trials_pos)
    y_pos = (sigs.matrix[:, picks]
             + rng_pos.standard_normal((d, config.trials_pos)) * config.sigma_n)
    home = assignment.labels[picks]

    rng_neg = _rng(config.seed, 2)
    y_neg = rng_neg.standard_normal((d, config.trials_neg)) * config.sigma_x
    if config.normalize_signatures:
        y_neg = y_neg / np.linalg.norm(y_neg, axis=0)

    needs_codes = any(s in (AggregationScheme.AOH_SIGN,
                            AggregationScheme.AOH_MAJORITY)
                      for s in config.schemes)

    rows = []
    for sparsity in config.sparsity_grid:
        lam_q = lambda_from_sparsity(sparsity, sigma_eff)
        q_pos = embed_batch(y_pos, transform, lam_q)
        q_neg = embed_batch(y_neg, transform, lam_q)
        group_codes = None
        if needs_codes:
            all_codes = embed_batch(sigs.matrix, transform, lam_q)
            group_codes = [all_codes[assignment.members(k)]
                           for k in range(config.groups)]
        for scheme in config.schemes:
            bank = build_representatives(scheme, group_sets, transform,
                                         sparsity, sigma_eff, group_codes)
            row = _evaluate_cell(scheme, config, sparsity, sigma_eff,
                                 transform, group_sets, sizes, bank,
                                 q_pos, q_neg, home)
            row["n_min"] = assignment.n_min
            rows.append(row)
    return rows


def _evaluate_cell(scheme, config, sparsity, sigma_eff, transform,
                   group_sets, sizes, bank, q_pos, q_neg, home) -> dict:
    s_pos = score_matrix(q_pos, bank.codes)
    s_neg = score_matrix(q_neg, bank.codes)
    pos = s_pos.max(axis=1)
    neg = s_neg.max(axis=1)
    curve = roc_curve(pos, neg)
    tau_fp = float(np.quantile(neg, 0.99))
    p_tp = float(np.mean(pos > tau_fp))
    auc_theory = _theory_auc(s_pos, s_neg, home, sizes)
    report = evaluate_attack(scheme, group_sets, bank, transform, sigma_eff)

    var = sigma_eff * sigma_eff
    return {
        "scheme": scheme.value,
        "sparsity": sparsity,
        "lambda": bank.query_threshold,
        "dim": config.dim,
        "count": config.count,
        "groups": config.groups,
        "partitioner": config.partitioner if config.groups > 1 else "none",
        "trials_pos": config.trials_pos,
        "trials_neg": config.trials_neg,
        "auc": curve.auc,
        "auc_theory": auc_theory,
        "p_tp_at_fp_1e2": p_tp,
        "mse_embedding": report.mse_embedding,
        "mse_embedding_rel": report.mse_embedding / var,
        "mse_enrolled_empirical": report.mse_enrolled_empirical,
        "mse_enrolled_rel": report.mse_enrolled_empirical / var,
        "mse_enrolled_theory": report.mse_enrolled_theory,
        "lower_bound": report.lower_bound,
    }


def _theory_auc(s_pos, s_neg, home, sizes) -> float:
    """AUC predicted by the per-group product formulas.

    Per-group false-positive rates come from the H0 scores against each
    group; per-group false-negative rates from H1 queries against their
    home group only. Groups that received no H1 query fall back to the
    pooled home-score distribution.
    """
    m = sizes.size
    home_scores = s_pos[np.arange(home.size), home]
    taus = np.unique(np.concatenate([s_neg.ravel(), home_scores]))
    pfp = np.empty((m, taus.size))
    pfn = np.empty((m, taus.size))
    home_all = np.sort(home_scores)
    for k in range(m):
        neg_sorted = np.sort(s_neg[:, k])
        pfp[k] = (neg_sorted.size
                  - np.searchsorted(neg_sorted, taus, side="right")) / neg_sorted.size
        home_k = np.sort(s_pos[home == k, k])
        if home_k.size:
            pfn[k] = np.searchsorted(home_k, taus, side="right") / home_k.size
        else:
            pfn[k] = np.searchsorted(home_all, taus, side="right") / home_all.size
    global_fp, global_fn = predict_multi_group_curve(sizes, pfp, pfn)
    return auc_from_curve(global_fp, 1.0 - global_fn)


# ---------------------------------------------------------------------------
# Presets reproducing the shipped experiment grids
# ---------------------------------------------------------------------------

PRESET_NAMES = ("fig-compare", "fig-aucn", "fig-theory", "fig-msem",
                "bloom-baseline")


def _scaled(config: ExperimentConfig, scale: float) -> ExperimentConfig:
    if scale == 1.0:
        return config
    if scale <= 0:
        raise ValueError("scale must be positive")
    return replace(
        config,
        count=max(config.groups, round(config.count * scale)),
        trials_pos=max(100, round(config.trials_pos * scale)),
        trials_neg=max(100, round(config.trials_neg * scale)),
    )


def preset_configs(name: str, seed: int = 1,
                   overrides: dict | None = None) -> list[ExperimentConfig]:
    """The config list behind a named preset (before scaling)."""
    base = ExperimentConfig(seed=seed, dim=1024, sigma_x=1.0, sigma_n=0.1,
                            trials_pos=2000, trials_neg=2000)
    if name == "fig-compare":
        configs = [replace(base, count=128, groups=1,
                           sparsity_grid=tuple(round(0.1 * i, 1) for i in range(1, 10)),
                           schemes=ALL_SCHEMES)]
    elif name == "fig-aucn":
        configs = [replace(base, count=n, groups=1, sparsity_grid=(0.6,),
                           schemes=ALL_SCHEMES)
                   for n in (16, 64, 256, 1024)]
    elif name == "fig-theory":
        configs = [replace(base, count=4096, groups=m, partitioner="random",
                           sparsity_grid=(sp,), schemes=(scheme,))
                   for m in (8, 32, 128)
                   for scheme, sp in ((AggregationScheme.HOA_PINV, 0.6),
                                      (AggregationScheme.AOH_SIGN, 0.85))]
    elif name == "fig-msem":
        configs = [replace(base, count=4096, groups=m, partitioner=part,
                           sparsity_grid=(sp,), schemes=(scheme,))
                   for part in ("random", "kmeans")
                   for m in (8, 32, 128, 512)
                   for scheme, sp in ((AggregationScheme.HOA_PINV, 0.6),
                                      (AggregationScheme.AOH_SIGN, 0.85))]
    else:
        raise ValueError(f"unknown preset {name!r} (bloom-baseline is handled separately)")
    if overrides:
        configs = [replace(c, **overrides) for c in configs]
    return configs


def run_preset(name: str, seed: int = 1, scale: float = 1.0,
               overrides: dict | None = None) -> tuple[list[dict], list[str]]:
    """Run a named preset; returns (rows, column names)."""
    if name == "bloom-baseline":
        return _run_bloom_baseline(seed=seed, scale=scale,
                                   overrides=overrides or {}), BLOOM_COLUMNS
    rows = []
    for config in preset_configs(name, seed=seed, overrides=overrides):
        rows.extend(run_experiment(_scaled(config, scale)))
    return rows, RESULT_COLUMNS


def _run_bloom_baseline(seed: int, scale: float, overrides: dict) -> list[dict]:
    """Tune the Bloom baseline and validate it empirically.

    Emits the tuned parameter row together with Monte Carlo estimates of
    the code survival probability, the all-zero probability, the accept
    rate on noisy member queries and the false-positive rate on unrelated
    queries. An infeasible tuning problem is reported in the status
    column instead of raising.
    """
    count = int(overrides.get("count", 128))
    p_fp = float(overrides.get("p_fp", 0.01))
    margin = float(overrides.get("entropy_margin", 3.0))
    epsilon = float(overrides.get("epsilon", 1e-3))
    sigma_x = float(overrides.get("sigma_x", 1.0))
    sigma_n = float(overrides.get("sigma_n", 0.1))
    trials = max(200, round(int(overrides.get("trials", 10000)) * scale))

    try:
        params = tune(count, p_fp, entropy_margin=margin, epsilon=epsilon,
                      sigma_x=sigma_x, sigma_n=sigma_n)
    except InfeasibleTuningError:
        return [{"status": "infeasible", "fp_target": p_fp, "trials": trials}]

    dim = max(64, params.code_len)
    transform = _cached_transform(dim, params.code_len, seed)
    sigs = gen_signatures(count, dim, sigma_x,
                          seed=np.random.SeedSequence([seed, 10]))
    codes = embed_batch(sigs.matrix, transform, params.threshold)
    filt = bloom_enroll(codes, params, hash_seed=seed)

    rng = _rng(seed, 11)
    picks = rng.integers(count, size=trials)
    noisy = sigs.matrix[:, picks] + rng.standard_normal((dim, trials)) * sigma_n
    noisy_codes = embed_batch(noisy, transform, params.threshold)
    accepted = np.fromiter((bloom_query(filt, c) for c in noisy_codes),
                           dtype=bool, count=trials)

    # channel validation on fresh draws (not the enrolled set, whose small
    # size would dominate the variance of the survival estimate)
    ch_rng = _rng(seed, 12)
    ch = ch_rng.standard_normal((dim, trials)) * sigma_x
    ch_noisy = ch + ch_rng.standard_normal((dim, trials)) * sigma_n
    ch_codes = embed_batch(ch, transform, params.threshold)
    survived = np.all(embed_batch(ch_noisy, transform, params.threshold) == ch_codes,
                      axis=1)
    all_zero = ~np.any(ch_codes, axis=1)

    fresh = _rng(seed, 13).standard_normal((dim, trials)) * sigma_x
    fresh_codes = embed_batch(fresh, transform, params.threshold)
    false_pos = np.fromiter((bloom_query(filt, c) for c in fresh_codes),
                            dtype=bool, count=trials)

    return [{
        "status": "ok",
        "lambda": params.threshold,
        "l": params.code_len,
        "l_b": params.filter_bits,
        "k": params.k_hashes,
        "H": params.stats.entropy,
        "pi0": params.stats.pi0,
        "pi": params.stats.pi,
        "pi_emp": float(survived.mean()),
        "pi0_emp": float(all_zero.mean()),
        "p_tp_emp": float(accepted.mean()),
        "fp_emp": float(false_pos.mean()),
        "fp_target": p_fp,
        "trials": trials,
    }]


# ---------------------------------------------------------------------------
# Plain-text config files and CSV output
# ---------------------------------------------------------------------------

_INT_FIELDS = {"seed", "dim", "count", "groups", "trials_pos", "trials_neg"}
_FLOAT_FIELDS = {"sigma_x", "sigma_n"}


def parse_config_text(text: str) -> dict:
    """Parse line-oriented ``key = value`` text into ExperimentConfig fields.

    Lists (sparsity_grid, schemes) are comma separated; booleans accept
    true/false/1/0; ``#`` starts a comment.
    """
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key in _INT_FIELDS:
            values[key] = int(val)
        elif key in _FLOAT_FIELDS:
            values[key] = float(val)
        elif key == "sparsity_grid":
            values[key] = tuple(float(v) for v in val.split(","))
        elif key == "schemes":
            values[key] = tuple(AggregationScheme(v.strip()) for v in val.split(","))
        elif key == "partitioner":
            values[key] = val
        elif key == "normalize_signatures":
            if val.lower() not in ("true", "false", "1", "0"):
                raise ValueError(f"line {lineno}: bad boolean {val!r}")
            values[key] = val.lower() in ("true", "1")
        else:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
    return values


def config_from_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Build a config from ``key = value`` text on top of ``base``."""
    return replace(base or ExperimentConfig(), **parse_config_text(text))


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "" if math.isnan(value) else f"{value:.9g}"
    return str(value)


def write_rows_csv(rows, columns, path) -> None:
    """CSV with a header row; floats printed with 9 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row.get(col)) for col in columns])
