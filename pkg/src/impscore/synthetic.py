"""Synthetic separable corpus: cluster geometry that training must solve.

Each instance's positive explicit embedding sits near one of a few
pragmatic cluster centers, its negative near a different center, and its
implicit embedding near the anchor center plus a fixed offset along a
global "implicitness direction".  Pragmatic separation therefore comes
from the cluster geometry and implicitness separation from the shared
offset, so a correctly implemented trainer can push both held-out
accuracies toward 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backends import write_embeddings_jsonl
from .data import TrainingInstance, write_instances

SOURCE_TAG = "synthetic"


@dataclass(frozen=True)
class SyntheticCorpus:
    instances: list[TrainingInstance]
    embeddings: dict[str, np.ndarray]
    dim: int

    def write(self, embeddings_path, instances_path) -> None:
        write_embeddings_jsonl(embeddings_path, self.embeddings)
        write_instances(instances_path, self.instances)


def make_synthetic_corpus(n_instances: int = 2000, n_clusters: int = 20,
                          dim: int = 96, seed: int = 0,
                          center_scale: float = 1.0, noise_scale: float = 0.05,
                          offset_scale: float = 2.0) -> SyntheticCorpus:
    """Build instances plus a text → embedding table for the file backend."""
    if n_instances < 1:
        raise ValueError("n_instances must be >= 1")
    if n_clusters < 2:
        raise ValueError("n_clusters must be >= 2 (negatives need another cluster)")
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((n_clusters, dim)) * center_scale
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)

    instances = []
    embeddings: dict[str, np.ndarray] = {}
    for i in range(n_instances):
        cluster = i % n_clusters
        other = (cluster + 1 + int(rng.integers(n_clusters - 1))) % n_clusters
        e_imp = (centers[cluster] + rng.standard_normal(dim) * noise_scale
                 + offset_scale * direction)
        e_pos = centers[cluster] + rng.standard_normal(dim) * noise_scale
        e_neg = centers[other] + rng.standard_normal(dim) * noise_scale
        t_imp = f"imp-{i:05d}"
        t_pos = f"pos-{i:05d}"
        t_neg = f"neg-{i:05d}"
        embeddings[t_imp] = e_imp
        embeddings[t_pos] = e_pos
        embeddings[t_neg] = e_neg
        instances.append(TrainingInstance(
            implicit=t_imp, explicit_pos=t_pos, explicit_neg=t_neg,
            source=SOURCE_TAG))
    return SyntheticCorpus(instances=instances, embeddings=embeddings, dim=dim)
