"""Projection-head model: configuration, weights, and scoring operations.

A sentence embedding e (length d) is projected into a pragmatic feature
h_p = e·W_p and a semantic feature h_s = e·W_s (both length l).  A linear
transform places the two features in a common comparison space, and the
implicitness score is the divergence between the compared pair:
1 − cosine similarity (range [0, 2]) or the euclidean distance (≥ 0).
Pragmatic distance between two sentences is the distance between their
pragmatic features.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np
from numpy.typing import NDArray

from . import kernels
from .exceptions import ConfigError, DimensionError

F64 = NDArray[np.float64]

IMP_METRICS = ("cosine", "euclidean")
PRAG_METRICS = ("cosine", "euclidean")
TRANSFORMS = ("p_to_s", "s_to_p", "third_space")

DEFAULT_EMBED_DIM = 768   # width of the sentence-encoder output
DEFAULT_FEATURE_DIM = 64  # projection width, kept well below the embed dim

_METRIC_CODE = {"cosine": kernels.METRIC_COSINE, "euclidean": kernels.METRIC_EUCLIDEAN}
_TRANSFORM_CODE = {
    "p_to_s": kernels.TRANSFORM_P_TO_S,
    "s_to_p": kernels.TRANSFORM_S_TO_P,
    "third_space": kernels.TRANSFORM_THIRD,
}

# read-only placeholder passed to kernels for the unused second transform
_DUMMY = np.zeros((1, 1))
_DUMMY.setflags(write=False)


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and metric choices for one scoring head."""

    d: int = DEFAULT_EMBED_DIM
    l: int = DEFAULT_FEATURE_DIM
    imp_metric: str = "cosine"
    prag_metric: str = "euclidean"
    transform: str = "p_to_s"

    def __post_init__(self):
        if not isinstance(self.d, int) or isinstance(self.d, bool) or self.d < 1:
            raise ConfigError(f"d must be a positive integer, got {self.d!r}")
        if not isinstance(self.l, int) or isinstance(self.l, bool) or self.l < 1:
            raise ConfigError(f"l must be a positive integer, got {self.l!r}")
        if not self.l < self.d:
            raise ConfigError(f"l must be smaller than d, got l={self.l}, d={self.d}")
        if self.imp_metric not in IMP_METRICS:
            raise ConfigError(
                f"imp_metric must be one of {IMP_METRICS}, got {self.imp_metric!r}"
            )
        if self.prag_metric not in PRAG_METRICS:
            raise ConfigError(
                f"prag_metric must be one of {PRAG_METRICS}, got {self.prag_metric!r}"
            )
        if self.transform not in TRANSFORMS:
            raise ConfigError(
                f"transform must be one of {TRANSFORMS}, got {self.transform!r}"
            )

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "l": self.l,
            "imp_metric": self.imp_metric,
            "prag_metric": self.prag_metric,
            "transform": self.transform,
        }


def _own_matrix(value, shape, name: str) -> F64:
    arr = np.array(value, dtype=np.float64, order="C")
    if arr.shape != shape:
        raise DimensionError(shape, arr.shape, name)
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ProjectionHead:
    """Learned projection weights. Immutable; safe to share across threads.

    W_t is present for the p_to_s and s_to_p transforms; W_t1 and W_t2
    replace it for third_space.
    """

    config: ModelConfig
    W_p: F64
    W_s: F64
    W_t: Optional[F64] = None
    W_t1: Optional[F64] = None
    W_t2: Optional[F64] = None

    def __post_init__(self):
        d, l = self.config.d, self.config.l
        object.__setattr__(self, "W_p", _own_matrix(self.W_p, (d, l), "W_p"))
        object.__setattr__(self, "W_s", _own_matrix(self.W_s, (d, l), "W_s"))
        if self.config.transform == "third_space":
            if self.W_t is not None:
                raise ConfigError("third_space heads use W_t1/W_t2, not W_t")
            if self.W_t1 is None or self.W_t2 is None:
                raise ConfigError("third_space heads require both W_t1 and W_t2")
            object.__setattr__(self, "W_t1", _own_matrix(self.W_t1, (l, l), "W_t1"))
            object.__setattr__(self, "W_t2", _own_matrix(self.W_t2, (l, l), "W_t2"))
        else:
            if self.W_t1 is not None or self.W_t2 is not None:
                raise ConfigError(
                    f"{self.config.transform} heads use W_t, not W_t1/W_t2"
                )
            if self.W_t is None:
                raise ConfigError(f"{self.config.transform} heads require W_t")
            object.__setattr__(self, "W_t", _own_matrix(self.W_t, (l, l), "W_t"))

    def weights(self) -> dict[str, F64]:
        """Weight matrices keyed by canonical name, in fixed order."""
        if self.config.transform == "third_space":
            return {"W_p": self.W_p, "W_s": self.W_s,
                    "W_t1": self.W_t1, "W_t2": self.W_t2}
        return {"W_p": self.W_p, "W_s": self.W_s, "W_t": self.W_t}

    def _kernel_args(self):
        cfg = self.config
        if cfg.transform == "third_space":
            wa, wb = self.W_t1, self.W_t2
        else:
            wa, wb = self.W_t, _DUMMY
        return (self.W_p, self.W_s, wa, wb,
                _TRANSFORM_CODE[cfg.transform],
                _METRIC_CODE[cfg.imp_metric],
                _METRIC_CODE[cfg.prag_metric])


@dataclass(frozen=True)
class FeatureSet:
    """Projected features for one embedding.

    h_hat is the transformed feature for p_to_s / s_to_p heads; h_tp and
    h_ts are the two third-space images.
    """

    h_p: F64
    h_s: F64
    h_hat: Optional[F64] = None
    h_tp: Optional[F64] = None
    h_ts: Optional[F64] = None


class InstanceScores(NamedTuple):
    """Scores for aligned (implicit, explicit_pos, explicit_neg) triples."""

    i_implicit: np.ndarray
    i_pos: np.ndarray
    i_neg: np.ndarray
    dp_pos: np.ndarray
    dp_neg: np.ndarray


def _as_vector(value, name: str) -> F64:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(1, arr.ndim, f"rank of {name}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _check_batch(E, d: int, name: str = "embedding batch") -> F64:
    arr = np.ascontiguousarray(np.asarray(E, dtype=np.float64))
    if arr.ndim != 2:
        raise DimensionError(2, arr.ndim, f"rank of {name}")
    if arr.shape[1] != d:
        raise DimensionError(d, arr.shape[1], f"width of {name}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def cosine_similarity(u, v) -> float:
    """Cosine similarity clamped to [-1, 1]; 0 when either norm is 0."""
    u = _as_vector(u, "u")
    v = _as_vector(v, "v")
    if u.shape[0] != v.shape[0]:
        raise DimensionError(u.shape[0], v.shape[0], "cosine_similarity inputs")
    den = max(float(np.linalg.norm(u)) * float(np.linalg.norm(v)), kernels.COS_EPS)
    return float(np.clip(float(u @ v) / den, -1.0, 1.0))


def euclidean_distance(u, v) -> float:
    """‖u − v‖₂."""
    u = _as_vector(u, "u")
    v = _as_vector(v, "v")
    if u.shape[0] != v.shape[0]:
        raise DimensionError(u.shape[0], v.shape[0], "euclidean_distance inputs")
    return float(np.linalg.norm(u - v))


def project(e, head: ProjectionHead) -> FeatureSet:
    """Project an embedding into pragmatic and semantic features.

    The transformed comparison features are filled in as well, so the
    result is ready for scoring.
    """
    e = _as_vector(e, "embedding")
    if e.shape[0] != head.config.d:
        raise DimensionError(head.config.d, e.shape[0], "embedding length")
    base = FeatureSet(h_p=e @ head.W_p, h_s=e @ head.W_s)
    return transform_features(base, head)


def transform_features(features: FeatureSet, head: ProjectionHead) -> FeatureSet:
    """Fill the comparison-space features for a projected FeatureSet."""
    cfg = head.config
    if cfg.transform == "p_to_s":
        return replace(features, h_hat=features.h_p @ head.W_t)
    if cfg.transform == "s_to_p":
        return replace(features, h_hat=features.h_s @ head.W_t)
    return replace(features,
                   h_tp=features.h_p @ head.W_t1,
                   h_ts=features.h_s @ head.W_t2)


def compared_pair(features: FeatureSet, head: ProjectionHead) -> tuple[F64, F64]:
    """The two vectors whose divergence is the implicitness score."""
    cfg = head.config
    if cfg.transform == "p_to_s":
        return features.h_s, features.h_hat
    if cfg.transform == "s_to_p":
        return features.h_p, features.h_hat
    return features.h_tp, features.h_ts


def implicitness_scores(E, head: ProjectionHead) -> np.ndarray:
    """Implicitness score for each row of an embedding batch."""
    E = _check_batch(E, head.config.d)
    wp, ws, wa, wb, tcode, icode, _ = head._kernel_args()
    return kernels.imp_scores(E, wp, ws, wa, wb, tcode, icode)


def implicitness_score(e, head: ProjectionHead) -> float:
    """Implicitness score of one embedding."""
    e = _as_vector(e, "embedding")
    if e.shape[0] != head.config.d:
        raise DimensionError(head.config.d, e.shape[0], "embedding length")
    return float(implicitness_scores(e[None, :], head)[0])


def pragmatic_distances(EA, EB, head: ProjectionHead) -> np.ndarray:
    """Pragmatic distance for each aligned row pair of two batches."""
    EA = _check_batch(EA, head.config.d, "first batch")
    EB = _check_batch(EB, head.config.d, "second batch")
    if EA.shape[0] != EB.shape[0]:
        raise DimensionError(EA.shape[0], EB.shape[0], "paired batch lengths")
    wp, _, _, _, _, _, pcode = head._kernel_args()
    return kernels.prag_distances(EA, EB, wp, pcode)


def pragmatic_distance(e_a, e_b, head: ProjectionHead) -> float:
    """Pragmatic distance between two embeddings."""
    e_a = _as_vector(e_a, "e_a")
    e_b = _as_vector(e_b, "e_b")
    if e_a.shape[0] != head.config.d:
        raise DimensionError(head.config.d, e_a.shape[0], "e_a length")
    if e_b.shape[0] != head.config.d:
        raise DimensionError(head.config.d, e_b.shape[0], "e_b length")
    return float(pragmatic_distances(e_a[None, :], e_b[None, :], head)[0])


def score_triples(E1, E2, E3, head: ProjectionHead) -> InstanceScores:
    """All five per-instance scores for aligned embedding triples."""
    E1 = _check_batch(E1, head.config.d, "implicit batch")
    E2 = _check_batch(E2, head.config.d, "explicit_pos batch")
    E3 = _check_batch(E3, head.config.d, "explicit_neg batch")
    if not (E1.shape[0] == E2.shape[0] == E3.shape[0]):
        raise DimensionError(E1.shape[0], (E2.shape[0], E3.shape[0]),
                             "triple batch lengths")
    return InstanceScores(
        i_implicit=implicitness_scores(E1, head),
        i_pos=implicitness_scores(E2, head),
        i_neg=implicitness_scores(E3, head),
        dp_pos=pragmatic_distances(E1, E2, head),
        dp_neg=pragmatic_distances(E1, E3, head),
    )
