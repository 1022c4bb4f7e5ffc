"""Training-data pipeline: positive pairs, negative sampling, corpus stats.

Wire formats (UTF-8 JSONL, LF terminators):
    pairs.jsonl      {"implicit": str, "explicit": str, "source": str}
    instances.jsonl  {"implicit": str, "explicit_pos": str, "explicit_neg": str,
                      "source": str}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .exceptions import SchemaError


@dataclass(frozen=True)
class PositivePair:
    """An implicit sentence with an explicit sentence of the same pragmatics."""

    implicit: str
    explicit: str
    source: str


@dataclass(frozen=True)
class TrainingInstance:
    """Anchor implicit sentence with positive and negative explicit sentences."""

    implicit: str
    explicit_pos: str
    explicit_neg: str
    source: str


@dataclass(frozen=True)
class SkippedPair:
    """A positive pair that could not be given a negative."""

    index: int
    source: str
    reason: str


@dataclass(frozen=True)
class DatasetStats:
    n_pos_pairs: int
    n_neg_pairs: int
    avg_len_implicit: float
    std_len_implicit: float
    avg_len_explicit: float
    std_len_explicit: float

    def to_dict(self) -> dict:
        return {
            "n_pos_pairs": self.n_pos_pairs,
            "n_neg_pairs": self.n_neg_pairs,
            "avg_len_implicit": self.avg_len_implicit,
            "std_len_implicit": self.std_len_implicit,
            "avg_len_explicit": self.avg_len_explicit,
            "std_len_explicit": self.std_len_explicit,
        }


def iter_jsonl(path) -> Iterator[tuple[int, dict]]:
    """Yield (line number, object) for each nonblank line of a JSONL file."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: malformed JSON: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise SchemaError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, obj


def require_str(obj: dict, key: str, path, lineno: int, allow_empty=False) -> str:
    if key not in obj:
        raise SchemaError(f"{path}:{lineno}: missing field {key!r}")
    value = obj[key]
    if not isinstance(value, str):
        raise SchemaError(f"{path}:{lineno}: field {key!r} must be a string")
    if not value and not allow_empty:
        raise SchemaError(f"{path}:{lineno}: field {key!r} must be nonempty")
    return value


def load_pairs(path) -> list[PositivePair]:
    """Read pairs.jsonl, preserving file order."""
    pairs = []
    for lineno, obj in iter_jsonl(path):
        pairs.append(PositivePair(
            implicit=require_str(obj, "implicit", path, lineno),
            explicit=require_str(obj, "explicit", path, lineno),
            source=require_str(obj, "source", path, lineno),
        ))
    return pairs


def write_pairs(path, pairs: Iterable[PositivePair]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in pairs:
            fh.write(json.dumps(
                {"implicit": p.implicit, "explicit": p.explicit, "source": p.source},
                ensure_ascii=False))
            fh.write("\n")


def load_instances(path) -> list[TrainingInstance]:
    """Read instances.jsonl, enforcing the explicit_neg ≠ explicit_pos invariant."""
    instances = []
    for lineno, obj in iter_jsonl(path):
        inst = TrainingInstance(
            implicit=require_str(obj, "implicit", path, lineno),
            explicit_pos=require_str(obj, "explicit_pos", path, lineno),
            explicit_neg=require_str(obj, "explicit_neg", path, lineno),
            source=require_str(obj, "source", path, lineno),
        )
        if inst.explicit_neg == inst.explicit_pos:
            raise SchemaError(
                f"{path}:{lineno}: explicit_neg equals explicit_pos")
        instances.append(inst)
    return instances


def write_instances(path, instances: Iterable[TrainingInstance]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for inst in instances:
            fh.write(json.dumps(
                {"implicit": inst.implicit, "explicit_pos": inst.explicit_pos,
                 "explicit_neg": inst.explicit_neg, "source": inst.source},
                ensure_ascii=False))
            fh.write("\n")


def generate_negatives(pairs: Sequence[PositivePair], seed: int
                       ) -> tuple[list[TrainingInstance], list[SkippedPair]]:
    """Build training instances by inner-dataset replacement.

    Each pair's negative is the explicit sentence of a uniformly drawn
    other pair with the same source tag; draws equal to the positive
    explicit text are retried up to the group size.  Pairs that cannot
    form a negative (singleton sources, or duplicate explicits defeating
    every redraw) are skipped and reported.
    """
    rng = np.random.default_rng(seed)
    groups: dict[str, list[int]] = {}
    for idx, pair in enumerate(pairs):
        groups.setdefault(pair.source, []).append(idx)

    instances: list[TrainingInstance] = []
    skipped: list[SkippedPair] = []
    for idx, pair in enumerate(pairs):
        group = groups[pair.source]
        candidates = [j for j in group if j != idx]
        if not candidates:
            skipped.append(SkippedPair(idx, pair.source, "only pair in source"))
            continue
        chosen = None
        for _ in range(len(group)):
            j = candidates[int(rng.integers(len(candidates)))]
            if pairs[j].explicit != pair.explicit:
                chosen = pairs[j].explicit
                break
        if chosen is None:
            skipped.append(SkippedPair(
                idx, pair.source, "no distinct explicit text after redraws"))
            continue
        instances.append(TrainingInstance(
            implicit=pair.implicit, explicit_pos=pair.explicit,
            explicit_neg=chosen, source=pair.source))
    return instances, skipped


def dataset_stats(instances: Sequence[TrainingInstance]) -> DatasetStats:
    """Character-length statistics (population std); zeros on empty input."""
    if not instances:
        return DatasetStats(0, 0, 0.0, 0.0, 0.0, 0.0)
    imp_lens = np.array([len(i.implicit) for i in instances], dtype=np.float64)
    exp_lens = np.array([len(i.explicit_pos) for i in instances], dtype=np.float64)
    n = len(instances)
    return DatasetStats(
        n_pos_pairs=n,
        n_neg_pairs=n,
        avg_len_implicit=float(np.mean(imp_lens)),
        std_len_implicit=float(np.std(imp_lens)),
        avg_len_explicit=float(np.mean(exp_lens)),
        std_len_explicit=float(np.std(exp_lens)),
    )
