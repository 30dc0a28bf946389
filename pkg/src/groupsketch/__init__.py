"""Privacy-preserving group membership verification with sparse ternary codes.

Signatures are quantized to sparse ternary codes and aggregated into
group representatives; the toolkit measures verification performance
(ROC/AUC, multi-group predictors) and security (reconstruction MSE,
scaling-attack bounds) and ships a tuned Bloom-filter baseline.
"""

from .aggregation import (AggregationScheme, RankDeficiencyWarning,
                          SignatureSet, agg_majority, agg_pinv, agg_sign_sum,
                          agg_sum, group_representative)
from .attack import (AttackReport, empirical_mse_e, mse_closed_form,
                     mse_enrolled_closed_form, reconstruct,
                     scaling_attack_bound, sum_attack_estimate)
from .bloom import (BloomFilter, BloomParams, InfeasibleTuningError,
                    bloom_enroll, bloom_length, bloom_query, channel_stats,
                    tune)
from .embedding import (EmbeddingParams, TransformMatrix,
                        calibrated_threshold, decode_code, embed, embed_batch,
                        encode_code, expected_sparsity, lambda_from_sparsity,
                        make_transform, quantize)
from .experiments import (ExperimentConfig, build_representatives,
                          config_from_text, evaluate_attack, gen_query,
                          gen_signatures, run_experiment, run_preset)
from .partitioning import GroupAssignment, kmeans_partition, random_partition
from .verification import (OperatingPoint, RocCurve, decide,
                           multi_group_score, predict_multi_group, roc_curve,
                           score, score_matrix)

__version__ = "0.1.0"

__all__ = [
    "AggregationScheme", "AttackReport", "BloomFilter", "BloomParams",
    "EmbeddingParams", "ExperimentConfig", "GroupAssignment",
    "InfeasibleTuningError", "OperatingPoint", "RankDeficiencyWarning",
    "RocCurve", "SignatureSet", "TransformMatrix",
    "agg_majority", "agg_pinv", "agg_sign_sum", "agg_sum",
    "bloom_enroll", "bloom_length", "bloom_query", "build_representatives",
    "calibrated_threshold", "channel_stats", "config_from_text", "decide",
    "decode_code", "embed", "embed_batch", "empirical_mse_e", "encode_code",
    "evaluate_attack", "expected_sparsity", "gen_query", "gen_signatures",
    "group_representative", "kmeans_partition", "lambda_from_sparsity",
    "make_transform", "mse_closed_form", "mse_enrolled_closed_form",
    "multi_group_score", "predict_multi_group", "quantize", "random_partition",
    "reconstruct", "roc_curve", "run_experiment", "run_preset", "score",
    "score_matrix", "scaling_attack_bound", "sum_attack_estimate", "tune",
]
