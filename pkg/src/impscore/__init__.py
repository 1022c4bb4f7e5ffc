"""Reference-free implicitness scoring for text.

A projection head maps sentence embeddings into a feature space where the
distance between a text's own features and its explicit counterpart's
features reads out as an implicitness score.  The head is trained
contrastively on (implicit, explicit, unrelated-explicit) triples.
"""

from .analysis import (BinReport, ScoredCorpus, bin_by_implicitness,
                       bin_index, bin_label, pragmatic_diversity,
                       sample_pairs, score_corpus, verdict_accuracy_by_bin)
from .backends import (CachedBackend, EmbeddingBackend, FileBackend,
                       ServiceBackend, ToyHashBackend, cached, embed_unique,
                       protocol_schema, toy_hash_encoder, validate_protocol,
                       write_embeddings_jsonl)
from .checkpoint import (CHECKPOINT_FORMAT_VERSION, head_to_dict,
                         load_checkpoint, save_checkpoint)
from .data import (DatasetStats, PositivePair, SkippedPair, TrainingInstance,
                   dataset_stats, generate_negatives, load_instances,
                   load_pairs, write_instances, write_pairs)
from .evaluation import (ChoiceQuestion, ChoiceReport, RankingQuestion,
                         RankingReport, evaluate_instances, fractional_ranks,
                         implicitness_accuracy, kendall_tau,
                         load_choice_questions, load_ranking_questions,
                         pragmatics_accuracy, rank_from_scores,
                         run_choice_task, run_ranking_task, spearman_rho)
from .exceptions import (BackendError, ConfigError, DimensionError,
                         ImpscoreError, MissingEmbeddingError, SchemaError)
from .model import (FeatureSet, InstanceScores, ModelConfig, ProjectionHead,
                    compared_pair, cosine_similarity, euclidean_distance,
                    implicitness_score, implicitness_scores,
                    pragmatic_distance, pragmatic_distances, project,
                    score_triples, transform_features)
from .synthetic import SyntheticCorpus, make_synthetic_corpus
from .training import (AdamState, EpochRecord, Gradients, TrainConfig,
                       TrainHistory, adam_step, implicitness_loss,
                       init_head, instance_accuracies, loss_gradients,
                       pragmatic_loss, split_dataset, total_loss, train,
                       xavier_init)

__version__ = "0.1.0"

__all__ = [
    "AdamState", "BackendError", "BinReport", "CHECKPOINT_FORMAT_VERSION",
    "CachedBackend", "ChoiceQuestion", "ChoiceReport", "ConfigError",
    "DatasetStats", "DimensionError", "EmbeddingBackend", "EpochRecord",
    "FeatureSet", "FileBackend", "Gradients", "ImpscoreError",
    "InstanceScores", "MissingEmbeddingError", "ModelConfig", "PositivePair",
    "ProjectionHead", "RankingQuestion", "RankingReport", "SchemaError",
    "ScoredCorpus", "ServiceBackend", "SkippedPair", "SyntheticCorpus",
    "ToyHashBackend", "TrainConfig", "TrainHistory", "TrainingInstance",
    "adam_step", "bin_by_implicitness", "bin_index", "bin_label", "cached",
    "compared_pair", "cosine_similarity", "dataset_stats", "embed_unique",
    "euclidean_distance", "evaluate_instances", "fractional_ranks",
    "generate_negatives", "head_to_dict", "implicitness_accuracy",
    "implicitness_loss", "implicitness_score", "implicitness_scores",
    "init_head", "instance_accuracies", "kendall_tau", "load_checkpoint",
    "load_choice_questions", "load_instances", "load_pairs",
    "load_ranking_questions", "loss_gradients", "make_synthetic_corpus",
    "pragmatic_distance", "pragmatic_distances", "pragmatic_diversity",
    "pragmatic_loss", "pragmatics_accuracy", "project", "protocol_schema",
    "rank_from_scores", "run_choice_task", "run_ranking_task",
    "sample_pairs", "save_checkpoint", "score_corpus", "score_triples",
    "spearman_rho", "split_dataset", "total_loss", "toy_hash_encoder",
    "train", "transform_features", "validate_protocol", "write_embeddings_jsonl",
    "write_instances", "write_pairs", "xavier_init",
]
