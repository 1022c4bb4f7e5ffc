import numpy as np
import pytest

from impscore import ModelConfig, ProjectionHead, init_head


def pick_head(d=3, l=2, imp_metric="cosine", prag_metric="euclidean",
              transform="p_to_s"):
    """Head whose W_p selects coordinates 0..l-1 and W_s selects 1..l.

    Transform matrices are identity, so compared features are plain
    coordinate slices of the input embedding. Keeps expected values
    computable by hand.
    """
    cfg = ModelConfig(d=d, l=l, imp_metric=imp_metric,
                      prag_metric=prag_metric, transform=transform)
    W_p = np.zeros((d, l))
    W_s = np.zeros((d, l))
    for j in range(l):
        W_p[j, j] = 1.0
        W_s[j + 1, j] = 1.0
    eye = np.eye(l)
    if transform == "third_space":
        return ProjectionHead(cfg, W_p=W_p, W_s=W_s, W_t1=eye, W_t2=eye)
    return ProjectionHead(cfg, W_p=W_p, W_s=W_s, W_t=eye)


def random_head(d, l, imp_metric="cosine", prag_metric="euclidean",
                transform="p_to_s", seed=0):
    cfg = ModelConfig(d=d, l=l, imp_metric=imp_metric,
                      prag_metric=prag_metric, transform=transform)
    return init_head(cfg, np.random.default_rng(seed))


ALL_VARIANTS = [(t, im, pm)
                for t in ("p_to_s", "s_to_p", "third_space")
                for im in ("cosine", "euclidean")
                for pm in ("cosine", "euclidean")]


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
