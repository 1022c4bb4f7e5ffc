"""Contrastive training of the projection head.

Per instance (s1 implicit, s2 explicit positive, s3 explicit negative),
with implicitness scores I and pragmatic distances ΔP:

    loss = max(0, γ1 − (I(s1) − I(s2)))
         + max(0, γ1 − (I(s1) − I(s3)))
         + α · max(0, γ2 − (ΔP(s1,s3) − ΔP(s1,s2)))

Gradients are analytic (no autodiff), summed over the batch, and applied
with bias-corrected Adam.  The epoch loop reshuffles with a seeded
generator, evaluates on the validation split, and keeps the head from
the epoch with the highest validation implicitness accuracy (ties go to
the earliest epoch).  Everything is a pure function of the inputs and
seed, so repeated runs are bitwise identical.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .backends import CachedBackend, EmbeddingBackend, cached
from .data import TrainingInstance
from .exceptions import ConfigError, DimensionError
from .model import InstanceScores, ModelConfig, ProjectionHead, score_triples

log = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# epsilon guarding floor(n * ratio) against float artifacts (0.7*10 = 6.999...)
_SPLIT_EPS = 1e-9


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters."""

    gamma1: float = 0.5   # implicitness margin, must fit the [0, 2) cosine range
    gamma2: float = 0.7   # pragmatic margin
    alpha: float = 1.0    # pragmatic-loss weight
    lr: float = 0.01
    batch_size: int = 8192
    epochs: int = 30
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma1 < 2.0:
            raise ConfigError(f"gamma1 must be in [0, 2), got {self.gamma1!r}")
        if self.gamma2 < 0.0:
            raise ConfigError(f"gamma2 must be >= 0, got {self.gamma2!r}")
        if self.alpha < 0.0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha!r}")
        if not self.lr > 0.0:
            raise ConfigError(f"lr must be > 0, got {self.lr!r}")
        if not isinstance(self.batch_size, int) or self.batch_size < 1:
            raise ConfigError(f"batch_size must be a positive integer, got {self.batch_size!r}")
        if not isinstance(self.epochs, int) or self.epochs < 0:
            raise ConfigError(f"epochs must be a non-negative integer, got {self.epochs!r}")
        split = tuple(float(r) for r in self.split)
        if len(split) != 3 or any(r < 0.0 for r in split):
            raise ConfigError(f"split must be three non-negative ratios, got {self.split!r}")
        if abs(sum(split) - 1.0) > 1e-9:
            raise ConfigError(f"split ratios must sum to 1, got {self.split!r}")
        object.__setattr__(self, "split", split)
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")


def xavier_init(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform Xavier draw on [−√6/√(rows+cols), +√6/√(rows+cols)]."""
    if rows < 1 or cols < 1:
        raise ConfigError(f"matrix dims must be >= 1, got {rows}x{cols}")
    bound = math.sqrt(6.0) / math.sqrt(rows + cols)
    return rng.uniform(-bound, bound, size=(rows, cols))


def init_head(config: ModelConfig, rng: np.random.Generator) -> ProjectionHead:
    """Xavier-initialize a head.

    Draw order is fixed: W_p, W_s, then W_t (or W_t1 then W_t2).
    """
    W_p = xavier_init(config.d, config.l, rng)
    W_s = xavier_init(config.d, config.l, rng)
    if config.transform == "third_space":
        W_t1 = xavier_init(config.l, config.l, rng)
        W_t2 = xavier_init(config.l, config.l, rng)
        return ProjectionHead(config=config, W_p=W_p, W_s=W_s, W_t1=W_t1, W_t2=W_t2)
    W_t = xavier_init(config.l, config.l, rng)
    return ProjectionHead(config=config, W_p=W_p, W_s=W_s, W_t=W_t)


def implicitness_loss(i_implicit: float, i_explicit: float, gamma1: float) -> float:
    """Hinge pushing the implicit sentence's score above the explicit one's."""
    return max(0.0, gamma1 - (i_implicit - i_explicit))


def pragmatic_loss(dp_pos: float, dp_neg: float, gamma2: float) -> float:
    """Hinge pushing the negative pair farther apart than the positive pair."""
    return max(0.0, gamma2 - (dp_neg - dp_pos))


def total_loss(scores: InstanceScores, cfg: TrainConfig) -> float:
    """Per-instance loss; fields may be scalars or aligned arrays (summed)."""
    i1 = np.asarray(scores.i_implicit, dtype=np.float64)
    i2 = np.asarray(scores.i_pos, dtype=np.float64)
    i3 = np.asarray(scores.i_neg, dtype=np.float64)
    dpp = np.asarray(scores.dp_pos, dtype=np.float64)
    dpn = np.asarray(scores.dp_neg, dtype=np.float64)
    loss = (np.maximum(cfg.gamma1 - (i1 - i2), 0.0)
            + np.maximum(cfg.gamma1 - (i1 - i3), 0.0)
            + cfg.alpha * np.maximum(cfg.gamma2 - (dpn - dpp), 0.0))
    return float(np.sum(loss))


@dataclass(frozen=True)
class Gradients:
    """Summed batch loss and its gradients, keyed like the head weights."""

    loss: float
    W_p: np.ndarray
    W_s: np.ndarray
    W_t: Optional[np.ndarray] = None
    W_t1: Optional[np.ndarray] = None
    W_t2: Optional[np.ndarray] = None

    def by_name(self) -> dict[str, np.ndarray]:
        if self.W_t is not None:
            return {"W_p": self.W_p, "W_s": self.W_s, "W_t": self.W_t}
        return {"W_p": self.W_p, "W_s": self.W_s,
                "W_t1": self.W_t1, "W_t2": self.W_t2}


def loss_gradients(E1, E2, E3, head: ProjectionHead, cfg: TrainConfig) -> Gradients:
    """Analytic gradients of the summed batch loss.

    E1, E2, E3 are aligned (n, d) embedding batches for the implicit,
    explicit-positive, and explicit-negative sentences.
    """
    E1 = np.ascontiguousarray(np.asarray(E1, dtype=np.float64))
    if E1.ndim != 2 or E1.shape[0] == 0:
        raise ValueError("batch must be a nonempty (n, d) array")
    wp, ws, wa, wb, tcode, icode, pcode = head._kernel_args()
    loss, gWp, gWs, gWa, gWb = kernels.loss_and_grads(
        E1, E2, E3, wp, ws, wa, wb, tcode, icode, pcode,
        cfg.gamma1, cfg.gamma2, cfg.alpha)
    if head.config.transform == "third_space":
        return Gradients(loss=loss, W_p=gWp, W_s=gWs, W_t1=gWa, W_t2=gWb)
    return Gradients(loss=loss, W_p=gWp, W_s=gWs, W_t=gWa)


@dataclass(frozen=True)
class AdamState:
    """Bias-corrected Adam moment accumulators."""

    t: int
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def for_head(cls, head: ProjectionHead) -> "AdamState":
        names = head.weights()
        return cls(t=0,
                   m={k: np.zeros_like(w) for k, w in names.items()},
                   v={k: np.zeros_like(w) for k, w in names.items()})


def adam_step(head: ProjectionHead, grads: Gradients, state: AdamState,
              lr: float) -> tuple[ProjectionHead, AdamState]:
    """One Adam update; returns a fresh head and state."""
    t = state.t + 1
    new_m, new_v, new_w = {}, {}, {}
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    grad_map = grads.by_name()
    for name, w in head.weights().items():
        g = grad_map[name]
        if g.shape != w.shape:
            raise DimensionError(w.shape, g.shape, f"gradient for {name}")
        m = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)
        new_m[name] = m
        new_v[name] = v
        new_w[name] = w - lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    new_head = ProjectionHead(config=head.config, **new_w)
    new_state = AdamState(t=t, m=new_m, v=new_v,
                          beta1=state.beta1, beta2=state.beta2, eps=state.eps)
    return new_head, new_state


def split_dataset(instances: Sequence, cfg: TrainConfig) -> tuple[list, list, list]:
    """Seeded shuffle, then contiguous train/val/test partition.

    Val and test sizes are floor(n·ratio); the remainder goes to train.
    """
    items = list(instances)
    n = len(items)
    if n == 0:
        return [], [], []
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(n)
    n_val = int(math.floor(n * cfg.split[1] + _SPLIT_EPS))
    n_test = int(math.floor(n * cfg.split[2] + _SPLIT_EPS))
    n_train = n - n_val - n_test
    train = [items[i] for i in order[:n_train]]
    val = [items[i] for i in order[n_train:n_train + n_val]]
    test = [items[i] for i in order[n_train + n_val:]]
    return train, val, test


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    mean_batch_loss: float
    val_imp_acc: float
    val_prag_acc: float


@dataclass(frozen=True)
class TrainHistory:
    """Per-epoch summaries plus the index of the best epoch (-1 if none)."""

    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1

    def best_record(self) -> Optional[EpochRecord]:
        if 0 <= self.best_epoch < len(self.records):
            return self.records[self.best_epoch]
        return None

    def to_dict(self) -> dict:
        def clean(x: float):
            return x if math.isfinite(x) else None

        return {
            "best_epoch": self.best_epoch,
            "epochs": [
                {
                    "epoch": r.epoch,
                    "mean_batch_loss": clean(r.mean_batch_loss),
                    "val_imp_acc": clean(r.val_imp_acc),
                    "val_prag_acc": clean(r.val_prag_acc),
                }
                for r in self.records
            ],
        }


def instance_accuracies(scores: InstanceScores) -> tuple[float, float]:
    """(implicitness accuracy, pragmatics accuracy) from aligned score arrays.

    Implicitness counts two strict comparisons per instance; pragmatics
    counts one. Ties fail.
    """
    i1 = np.asarray(scores.i_implicit)
    n = i1.shape[0]
    if n == 0:
        raise ValueError("accuracy is undefined for an empty instance set")
    imp_correct = int(np.sum(i1 > scores.i_pos)) + int(np.sum(i1 > scores.i_neg))
    prag_correct = int(np.sum(np.asarray(scores.dp_pos) < np.asarray(scores.dp_neg)))
    return imp_correct / (2 * n), prag_correct / n


def _embed_instances(instances: Sequence[TrainingInstance],
                     backend: EmbeddingBackend, d: int):
    """Embed every distinct sentence once, then assemble aligned triples."""
    texts: list[str] = []
    seen: set[str] = set()
    for inst in instances:
        for t in (inst.implicit, inst.explicit_pos, inst.explicit_neg):
            if t not in seen:
                seen.add(t)
                texts.append(t)
    source = backend if isinstance(backend, CachedBackend) else cached(backend)
    matrix = np.asarray(source.embed(texts), dtype=np.float64)
    if matrix.shape[1] != d:
        raise DimensionError(d, matrix.shape[1], "backend embedding width")
    row = {t: i for i, t in enumerate(texts)}

    def triples(subset: Sequence[TrainingInstance]):
        idx1 = np.fromiter((row[i.implicit] for i in subset), dtype=np.intp,
                           count=len(subset))
        idx2 = np.fromiter((row[i.explicit_pos] for i in subset), dtype=np.intp,
                           count=len(subset))
        idx3 = np.fromiter((row[i.explicit_neg] for i in subset), dtype=np.intp,
                           count=len(subset))
        return matrix[idx1], matrix[idx2], matrix[idx3]

    return triples


def train(instances: Sequence[TrainingInstance], backend: EmbeddingBackend,
          model_cfg: ModelConfig, train_cfg: TrainConfig
          ) -> tuple[ProjectionHead, TrainHistory]:
    """Full training run; returns the best-validation head and the history."""
    instances = list(instances)
    if not instances:
        raise ValueError("cannot train on an empty instance list")

    tr, va, _ = split_dataset(instances, train_cfg)
    triples = _embed_instances(instances, backend, model_cfg.d)
    E1, E2, E3 = triples(tr)
    if va:
        V1, V2, V3 = triples(va)

    rng = np.random.default_rng(train_cfg.seed)
    head = init_head(model_cfg, rng)
    if train_cfg.epochs == 0:
        return head, TrainHistory(records=[], best_epoch=-1)

    adam = AdamState.for_head(head)
    records: list[EpochRecord] = []
    best_head = head
    best_epoch = -1
    best_acc = -1.0
    n_train = len(tr)

    for epoch in range(train_cfg.epochs):
        order = rng.permutation(n_train)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n_train, train_cfg.batch_size):
            idx = order[start:start + train_cfg.batch_size]
            grads = loss_gradients(E1[idx], E2[idx], E3[idx], head, train_cfg)
            head, adam = adam_step(head, grads, adam, train_cfg.lr)
            epoch_loss += grads.loss
            n_batches += 1
        mean_loss = epoch_loss / n_batches if n_batches else float("nan")
        if va:
            val_imp, val_prag = instance_accuracies(score_triples(V1, V2, V3, head))
        else:
            val_imp = val_prag = float("nan")
        records.append(EpochRecord(epoch, mean_loss, val_imp, val_prag))
        log.info("epoch %d: mean_batch_loss=%.6f val_imp=%.4f val_prag=%.4f",
                 epoch, mean_loss, val_imp, val_prag)
        if best_epoch < 0 or val_imp > best_acc:
            best_head = head
            best_epoch = epoch
            best_acc = val_imp
    return best_head, TrainHistory(records=records, best_epoch=best_epoch)
