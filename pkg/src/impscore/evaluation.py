"""Evaluation harness: accuracy metrics, rank correlations, task runners.

Wire formats (UTF-8 JSONL):
    ranking.jsonl  {"group_id": str, "sentences": [str;4], "gold_rank": [int;4]}
    choice.jsonl   {"reference": str, "options": [str;3], "gold_index": 0..2}

Reports serialize to JSON dicts and flat CSV (one row per question).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .backends import EmbeddingBackend, embed_unique
from .data import TrainingInstance, iter_jsonl, require_str
from .exceptions import DimensionError, SchemaError
from .model import (InstanceScores, ProjectionHead, implicitness_scores,
                    pragmatic_distances, score_triples)
from .training import instance_accuracies


@dataclass(frozen=True)
class RankingQuestion:
    """Four sentences of one topic with a gold explicitness ordering.

    gold_rank is a permutation of 1..4; rank 1 marks the most explicit
    sentence.
    """

    group_id: str
    sentences: tuple[str, str, str, str]
    gold_rank: tuple[int, int, int, int]


@dataclass(frozen=True)
class ChoiceQuestion:
    """A reference sentence and three options, one pragmatically closest."""

    reference: str
    options: tuple[str, str, str]
    gold_index: int


@dataclass(frozen=True)
class RankingResult:
    group_id: str
    scores: tuple[float, ...]
    predicted_rank: tuple[int, ...]
    gold_rank: tuple[int, ...]
    tau: float
    rho: float


@dataclass(frozen=True)
class RankingReport:
    results: list[RankingResult]
    avg_tau: float
    avg_rho: float

    def to_dict(self) -> dict:
        return {
            "avg_tau": self.avg_tau,
            "avg_rho": self.avg_rho,
            "questions": [
                {
                    "group_id": r.group_id,
                    "scores": list(r.scores),
                    "predicted_rank": list(r.predicted_rank),
                    "gold_rank": list(r.gold_rank),
                    "tau": r.tau,
                    "rho": r.rho,
                }
                for r in self.results
            ],
        }


@dataclass(frozen=True)
class ChoiceResult:
    reference: str
    distances: tuple[float, float, float]
    predicted_index: int
    gold_index: int
    correct: bool


@dataclass(frozen=True)
class ChoiceReport:
    results: list[ChoiceResult]
    accuracy: float

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "questions": [
                {
                    "reference": r.reference,
                    "distances": list(r.distances),
                    "predicted_index": r.predicted_index,
                    "gold_index": r.gold_index,
                    "correct": r.correct,
                }
                for r in self.results
            ],
        }


def load_ranking_questions(path) -> list[RankingQuestion]:
    questions = []
    for lineno, obj in iter_jsonl(path):
        group_id = require_str(obj, "group_id", path, lineno)
        sentences = obj.get("sentences")
        if (not isinstance(sentences, list) or len(sentences) != 4
                or not all(isinstance(s, str) for s in sentences)):
            raise SchemaError(f"{path}:{lineno}: sentences must be 4 strings")
        gold = obj.get("gold_rank")
        if (not isinstance(gold, list) or len(gold) != 4
                or not all(isinstance(g, int) and not isinstance(g, bool) for g in gold)
                or sorted(gold) != [1, 2, 3, 4]):
            raise SchemaError(f"{path}:{lineno}: gold_rank must be a permutation of 1..4")
        questions.append(RankingQuestion(group_id, tuple(sentences), tuple(gold)))
    return questions


def load_choice_questions(path) -> list[ChoiceQuestion]:
    questions = []
    for lineno, obj in iter_jsonl(path):
        reference = require_str(obj, "reference", path, lineno)
        options = obj.get("options")
        if (not isinstance(options, list) or len(options) != 3
                or not all(isinstance(s, str) for s in options)):
            raise SchemaError(f"{path}:{lineno}: options must be 3 strings")
        gold = obj.get("gold_index")
        if not isinstance(gold, int) or isinstance(gold, bool) or not 0 <= gold <= 2:
            raise SchemaError(f"{path}:{lineno}: gold_index must be 0, 1, or 2")
        questions.append(ChoiceQuestion(reference, tuple(options), gold))
    return questions


# ---------------------------------------------------------------------------
# rank correlations

def _rank_pair(rank_a, rank_b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(rank_a, dtype=np.float64)
    b = np.asarray(rank_b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise DimensionError(1, (a.ndim, b.ndim), "rank vector rank")
    if a.shape[0] != b.shape[0]:
        raise DimensionError(a.shape[0], b.shape[0], "rank vector lengths")
    if a.shape[0] < 2:
        raise ValueError("rank correlation needs at least 2 items")
    return a, b


def kendall_tau(rank_a, rank_b) -> float:
    """Tau-a: (concordant − discordant) / C(n,2); tied pairs count as neither."""
    a, b = _rank_pair(rank_a, rank_b)
    n = a.shape[0]
    concordant = discordant = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            prod = (a[i] - a[j]) * (b[i] - b[j])
            if prod > 0:
                concordant += 1
            elif prod < 0:
                discordant += 1
    return (concordant - discordant) / (n * (n - 1) / 2)


def fractional_ranks(values) -> np.ndarray:
    """Average-rank assignment, 1-based; ties share their mean position."""
    arr = np.asarray(values, dtype=np.float64)
    n = arr.shape[0]
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(n)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        ranks[order[i:j + 1]] = avg
        i = j + 1
    return ranks


def spearman_rho(rank_a, rank_b) -> float:
    """1 − 6Σd²/(n(n²−1)) on distinct ranks; Pearson of midranks under ties."""
    a, b = _rank_pair(rank_a, rank_b)
    n = a.shape[0]
    ra = fractional_ranks(a)
    rb = fractional_ranks(b)
    ties = len(np.unique(a)) < n or len(np.unique(b)) < n
    if not ties:
        d = ra - rb
        return float(1.0 - 6.0 * np.sum(d * d) / (n * (n * n - 1)))
    da = ra - ra.mean()
    db = rb - rb.mean()
    denom = math.sqrt(float(np.sum(da * da)) * float(np.sum(db * db)))
    if denom == 0.0:
        return float("nan")
    return float(np.sum(da * db) / denom)


# ---------------------------------------------------------------------------
# accuracy metrics

def _score_instances(instances: Sequence[TrainingInstance], head: ProjectionHead,
                     backend: EmbeddingBackend) -> InstanceScores:
    texts = []
    for inst in instances:
        texts.extend((inst.implicit, inst.explicit_pos, inst.explicit_neg))
    matrix, row = embed_unique(texts, backend)
    if matrix.shape[1] != head.config.d:
        raise DimensionError(head.config.d, matrix.shape[1], "backend embedding width")
    idx = np.array([[row[i.implicit], row[i.explicit_pos], row[i.explicit_neg]]
                    for i in instances], dtype=np.intp)
    return score_triples(matrix[idx[:, 0]], matrix[idx[:, 1]], matrix[idx[:, 2]], head)


def evaluate_instances(instances: Sequence[TrainingInstance], head: ProjectionHead,
                       backend: EmbeddingBackend) -> dict:
    """Both accuracies over one embedding pass; returns a report dict."""
    instances = list(instances)
    if not instances:
        raise ValueError("accuracy is undefined for an empty instance set")
    imp, prag = instance_accuracies(_score_instances(instances, head, backend))
    return {
        "n_instances": len(instances),
        "implicitness_accuracy": imp,
        "pragmatics_accuracy": prag,
    }


def implicitness_accuracy(instances: Sequence[TrainingInstance],
                          head: ProjectionHead, backend: EmbeddingBackend) -> float:
    """Fraction of strict I(implicit) > I(explicit) wins, two per instance."""
    return evaluate_instances(instances, head, backend)["implicitness_accuracy"]


def pragmatics_accuracy(instances: Sequence[TrainingInstance],
                        head: ProjectionHead, backend: EmbeddingBackend) -> float:
    """Fraction of instances with ΔP(positive) strictly below ΔP(negative)."""
    return evaluate_instances(instances, head, backend)["pragmatics_accuracy"]


# ---------------------------------------------------------------------------
# task runners

def rank_from_scores(scores) -> np.ndarray:
    """1-based ranks, 1 = lowest score; ties keep input order (stable sort)."""
    scores = np.asarray(scores, dtype=np.float64)
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.shape[0], dtype=np.int64)
    ranks[order] = np.arange(1, scores.shape[0] + 1)
    return ranks


def run_ranking_task(questions: Sequence[RankingQuestion], head: ProjectionHead,
                     backend: EmbeddingBackend) -> RankingReport:
    """Score each question's sentences and correlate ranks against gold."""
    questions = list(questions)
    if not questions:
        raise ValueError("no ranking questions")
    texts = [s for q in questions for s in q.sentences]
    matrix, row = embed_unique(texts, backend)
    if matrix.shape[1] != head.config.d:
        raise DimensionError(head.config.d, matrix.shape[1], "backend embedding width")
    results = []
    for q in questions:
        E = matrix[[row[s] for s in q.sentences]]
        scores = implicitness_scores(E, head)
        predicted = rank_from_scores(scores)
        gold = np.asarray(q.gold_rank)
        results.append(RankingResult(
            group_id=q.group_id,
            scores=tuple(float(s) for s in scores),
            predicted_rank=tuple(int(r) for r in predicted),
            gold_rank=tuple(q.gold_rank),
            tau=kendall_tau(predicted, gold),
            rho=spearman_rho(predicted, gold),
        ))
    return RankingReport(
        results=results,
        avg_tau=float(np.mean([r.tau for r in results])),
        avg_rho=float(np.mean([r.rho for r in results])),
    )


def run_choice_task(questions: Sequence[ChoiceQuestion], head: ProjectionHead,
                    backend: EmbeddingBackend) -> ChoiceReport:
    """Pick the pragmatically closest option (argmin; ties to lowest index)."""
    questions = list(questions)
    if not questions:
        raise ValueError("no choice questions")
    texts = []
    for q in questions:
        texts.append(q.reference)
        texts.extend(q.options)
    matrix, row = embed_unique(texts, backend)
    if matrix.shape[1] != head.config.d:
        raise DimensionError(head.config.d, matrix.shape[1], "backend embedding width")
    ref_idx = np.array([row[q.reference] for q in questions for _ in range(3)],
                       dtype=np.intp)
    opt_idx = np.array([row[o] for q in questions for o in q.options], dtype=np.intp)
    dists = pragmatic_distances(matrix[ref_idx], matrix[opt_idx], head).reshape(-1, 3)
    results = []
    for q, row_d in zip(questions, dists):
        predicted = int(np.argmin(row_d))
        results.append(ChoiceResult(
            reference=q.reference,
            distances=tuple(float(d) for d in row_d),
            predicted_index=predicted,
            gold_index=q.gold_index,
            correct=predicted == q.gold_index,
        ))
    accuracy = float(np.mean([r.correct for r in results]))
    return ChoiceReport(results=results, accuracy=accuracy)


def write_ranking_csv(report: RankingReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["group_id",
                         "score_1", "score_2", "score_3", "score_4",
                         "pred_rank_1", "pred_rank_2", "pred_rank_3", "pred_rank_4",
                         "gold_rank_1", "gold_rank_2", "gold_rank_3", "gold_rank_4",
                         "tau", "rho"])
        for r in report.results:
            writer.writerow([r.group_id, *(repr(s) for s in r.scores),
                             *r.predicted_rank, *r.gold_rank,
                             repr(r.tau), repr(r.rho)])


def write_choice_csv(report: ChoiceReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["reference", "dist_0", "dist_1", "dist_2",
                         "predicted_index", "gold_index", "correct"])
        for r in report.results:
            writer.writerow([r.reference, *(repr(d) for d in r.distances),
                             r.predicted_index, r.gold_index, int(r.correct)])
