"""Corpus analytics: whole-corpus scoring, binning, diversity, verdict joins.

Wire formats:
    verdicts.jsonl  {"text": str, "flagged": bool, "model": str}
    report.csv      bin, count, accuracy columns (accuracy blank when absent)
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .backends import EmbeddingBackend, embed_unique
from .data import iter_jsonl, require_str
from .exceptions import DimensionError, SchemaError
from .model import ProjectionHead, implicitness_scores, pragmatic_distances

N_BINS = 8
BIN_WIDTH = 0.25
BIN_EDGES = tuple(i * BIN_WIDTH for i in range(N_BINS + 1))  # 0.0 .. 2.0


@dataclass(frozen=True)
class ScoredCorpus:
    """Texts with their implicitness scores, in input order."""

    texts: tuple[str, ...]
    scores: np.ndarray
    checkpoint_id: str = ""
    backend_id: str = ""

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.shape != (len(self.texts),):
            raise DimensionError((len(self.texts),), scores.shape, "corpus scores")
        scores = scores.copy()
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)

    @property
    def mean(self) -> float:
        return float(np.mean(self.scores))

    @property
    def std(self) -> float:
        # population standard deviation
        return float(np.std(self.scores))

    def summary(self) -> dict:
        return {
            "n_texts": len(self.texts),
            "mean_score": self.mean,
            "std_score": self.std,
            "checkpoint_id": self.checkpoint_id,
            "backend_id": self.backend_id,
        }


def score_corpus(texts: Sequence[str], head: ProjectionHead,
                 backend: EmbeddingBackend, checkpoint_id: str = "") -> ScoredCorpus:
    """Score every text, order preserved; embeds each distinct text once."""
    texts = list(texts)
    if not texts:
        raise ValueError("cannot score an empty corpus")
    matrix, row = embed_unique(texts, backend)
    if matrix.shape[1] != head.config.d:
        raise DimensionError(head.config.d, matrix.shape[1], "backend embedding width")
    idx = np.fromiter((row[t] for t in texts), dtype=np.intp, count=len(texts))
    scores = implicitness_scores(matrix[idx], head)
    return ScoredCorpus(texts=tuple(texts), scores=scores,
                        checkpoint_id=checkpoint_id,
                        backend_id=getattr(backend, "ident", type(backend).__name__))


def bin_label(index: int) -> str:
    lo = BIN_EDGES[index]
    hi = BIN_EDGES[index + 1]
    close = "]" if index == N_BINS - 1 else ")"
    return f"[{lo:.2f}, {hi:.2f}{close}"


def bin_index(score: float) -> int:
    """Bin for one score: half-open [k·0.25, (k+1)·0.25), last bin closed at 2."""
    if not 0.0 <= score <= 2.0:
        raise ValueError(
            f"score {score} outside [0, 2]; binning requires a cosine-metric head")
    return min(int(score / BIN_WIDTH), N_BINS - 1)


@dataclass(frozen=True)
class BinReport:
    """Counts (and optional accuracies) over the 8 implicitness bins."""

    counts: tuple[int, ...]
    accuracies: tuple[Optional[float], ...] = (None,) * N_BINS
    edges: tuple[float, ...] = BIN_EDGES

    def __post_init__(self):
        if len(self.counts) != N_BINS:
            raise DimensionError(N_BINS, len(self.counts), "bin counts")
        if len(self.accuracies) != N_BINS:
            raise DimensionError(N_BINS, len(self.accuracies), "bin accuracies")

    def to_dict(self) -> dict:
        return {
            "edges": list(self.edges),
            "bins": [
                {"bin": bin_label(i), "count": self.counts[i],
                 "accuracy": self.accuracies[i]}
                for i in range(N_BINS)
            ],
        }


def bin_by_implicitness(scores) -> BinReport:
    """Histogram of scores over the 8 fixed bins."""
    arr = np.asarray(scores, dtype=np.float64).ravel()
    idx = [bin_index(float(s)) for s in arr]
    counts = np.bincount(idx, minlength=N_BINS) if idx else np.zeros(N_BINS, int)
    return BinReport(counts=tuple(int(c) for c in counts))


def sample_pairs(n: int, n_samples: int, seed: int) -> list[tuple[int, int]]:
    """min(n_samples, C(n,2)) distinct unordered index pairs, seeded.

    When every pair fits the budget, all pairs are returned in
    lexicographic order; otherwise pairs are drawn uniformly without
    replacement.
    """
    if n < 2:
        raise ValueError("need at least 2 items to form pairs")
    total = n * (n - 1) // 2
    if total <= n_samples:
        return [(i, j) for i in range(n - 1) for j in range(i + 1, n)]
    # pairs before row i: i·(n−1) − i·(i−1)/2
    i_vals = np.arange(n - 1, dtype=np.int64)
    rowstart = i_vals * (n - 1) - i_vals * (i_vals - 1) // 2
    rng = np.random.default_rng(seed)
    chosen: dict[int, None] = {}
    while len(chosen) < n_samples:
        need = n_samples - len(chosen)
        for k in rng.integers(0, total, size=max(need * 2, 16)):
            chosen.setdefault(int(k), None)
            if len(chosen) == n_samples:
                break
    pairs = []
    for k in chosen:
        i = int(np.searchsorted(rowstart, k, side="right")) - 1
        j = k - int(rowstart[i]) + i + 1
        pairs.append((i, j))
    return pairs


def pragmatic_diversity(texts: Sequence[str], head: ProjectionHead,
                        backend: EmbeddingBackend, n_samples: int = 2000,
                        seed: int = 0) -> np.ndarray:
    """Pragmatic distances over a seeded sample of distinct text pairs."""
    texts = list(texts)
    if len(texts) < 2:
        raise ValueError("pragmatic diversity needs at least 2 texts")
    pairs = sample_pairs(len(texts), n_samples, seed)
    matrix, row = embed_unique(texts, backend)
    if matrix.shape[1] != head.config.d:
        raise DimensionError(head.config.d, matrix.shape[1], "backend embedding width")
    ia = np.fromiter((row[texts[i]] for i, _ in pairs), dtype=np.intp, count=len(pairs))
    ib = np.fromiter((row[texts[j]] for _, j in pairs), dtype=np.intp, count=len(pairs))
    return pragmatic_distances(matrix[ia], matrix[ib], head)


def load_verdicts(path) -> dict[str, bool]:
    """Read verdicts.jsonl into a text → flagged map (later lines win)."""
    verdicts: dict[str, bool] = {}
    for lineno, obj in iter_jsonl(path):
        text = require_str(obj, "text", path, lineno, allow_empty=True)
        if "flagged" not in obj:
            raise SchemaError(f"{path}:{lineno}: missing field 'flagged'")
        flagged = obj["flagged"]
        if not isinstance(flagged, bool):
            raise SchemaError(f"{path}:{lineno}: field 'flagged' must be a boolean")
        verdicts[text] = flagged
    return verdicts


def verdict_accuracy_by_bin(scored: ScoredCorpus,
                            verdicts: Mapping[str, bool]) -> BinReport:
    """Per-bin fraction of flagged texts; empty bins report accuracy absent."""
    counts = [0] * N_BINS
    flagged = [0] * N_BINS
    for text, score in zip(scored.texts, scored.scores):
        if text not in verdicts:
            shown = text if len(text) <= 80 else text[:77] + "..."
            raise ValueError(f"no verdict for text: {shown!r}")
        b = bin_index(float(score))
        counts[b] += 1
        if verdicts[text]:
            flagged[b] += 1
    accuracies = tuple(flagged[i] / counts[i] if counts[i] else None
                       for i in range(N_BINS))
    return BinReport(counts=tuple(counts), accuracies=accuracies)


def diversity_summary(distances: np.ndarray) -> dict:
    distances = np.asarray(distances, dtype=np.float64)
    return {
        "n_pairs": int(distances.shape[0]),
        "mean_distance": float(np.mean(distances)) if distances.size else None,
        "std_distance": float(np.std(distances)) if distances.size else None,
        "distances": [float(d) for d in distances],
    }


def write_bin_csv(report: BinReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bin", "count", "accuracy"])
        for i in range(N_BINS):
            acc = report.accuracies[i]
            writer.writerow([bin_label(i), report.counts[i],
                             "" if acc is None else repr(acc)])
