"""Analytic gradients checked against central finite differences."""

import numpy as np
import pytest

from impscore import ModelConfig, ProjectionHead, TrainConfig, score_triples, total_loss
from impscore.training import loss_gradients

from conftest import ALL_VARIANTS, random_head


def numeric_gradients(E1, E2, E3, head, cfg, step=1e-5):
    """Central finite differences of the batch loss, weight by weight."""
    out = {}
    weights = head.weights()
    for name, W in weights.items():
        G = np.zeros_like(W)
        for i in range(W.shape[0]):
            for j in range(W.shape[1]):
                plus = {k: v.copy() for k, v in weights.items()}
                minus = {k: v.copy() for k, v in weights.items()}
                plus[name][i, j] += step
                minus[name][i, j] -= step
                head_p = ProjectionHead(head.config, **plus)
                head_m = ProjectionHead(head.config, **minus)
                lp = total_loss(score_triples(E1, E2, E3, head_p), cfg)
                lm = total_loss(score_triples(E1, E2, E3, head_m), cfg)
                G[i, j] = (lp - lm) / (2.0 * step)
        out[name] = G
    return out


def max_relative_error(analytic, numeric):
    worst = 0.0
    for name, a in analytic.items():
        n = numeric[name]
        scale = max(float(np.abs(a).max()), float(np.abs(n).max()), 1e-8)
        worst = max(worst, float(np.abs(a - n).max()) / scale)
    return worst


class TestGradientOracle:
    @pytest.mark.parametrize("transform,imp_metric,prag_metric", ALL_VARIANTS)
    def test_matches_finite_differences(self, transform, imp_metric, prag_metric):
        rng = np.random.default_rng(hash((transform, imp_metric, prag_metric)) % 2**32)
        head = random_head(8, 4, imp_metric=imp_metric, prag_metric=prag_metric,
                           transform=transform, seed=17)
        E1 = rng.standard_normal((3, 8))
        E2 = rng.standard_normal((3, 8))
        E3 = rng.standard_normal((3, 8))
        cfg = TrainConfig()
        grads = loss_gradients(E1, E2, E3, head, cfg)
        numeric = numeric_gradients(E1, E2, E3, head, cfg)
        assert max_relative_error(grads.by_name(), numeric) < 1e-6

    def test_nondefault_margins_and_alpha(self):
        rng = np.random.default_rng(23)
        head = random_head(6, 3, seed=23)
        E1, E2, E3 = (rng.standard_normal((4, 6)) for _ in range(3))
        cfg = TrainConfig(gamma1=0.9, gamma2=0.1, alpha=2.5)
        grads = loss_gradients(E1, E2, E3, head, cfg)
        numeric = numeric_gradients(E1, E2, E3, head, cfg)
        assert max_relative_error(grads.by_name(), numeric) < 1e-6


class TestHingeStructure:
    def test_inactive_loss_is_exactly_zero(self):
        # scores engineered directly: I1 - I2 and I1 - I3 exceed gamma1,
        # dp_neg - dp_pos exceeds gamma2 -> all three hinges off
        cfg = ModelConfig(d=3, l=2, imp_metric="euclidean",
                          prag_metric="euclidean")
        W_p = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        W_s = np.zeros((3, 2))
        head = ProjectionHead(cfg, W_p=W_p, W_s=W_s, W_t=np.eye(2))
        # h_s = 0 always, so I(e) = |h_p| and dp = |h_p(a) - h_p(b)|
        E1 = np.array([[2.0, 0.0, 0.0]])   # I1 = 2
        E2 = np.array([[2.0, 0.3, 0.0]])   # I2 ~ 2.02? gap negative...
        E2 = np.array([[1.0, 0.0, 0.0]])   # I2 = 1, gap 1 > 0.5; dp_pos = 1
        E3 = np.array([[-1.0, 0.0, 0.0]])  # I3 = 1, gap 1 > 0.5; dp_neg = 3
        tcfg = TrainConfig()                # dp gap 2 > 0.7
        g = loss_gradients(E1, E2, E3, head, tcfg)
        assert g.loss == 0.0
        for arr in g.by_name().values():
            assert np.all(arr == 0.0)

    def test_duplicate_instance_doubles_gradient(self, rng):
        head = random_head(6, 3, seed=31)
        E1 = rng.standard_normal((1, 6))
        E2 = rng.standard_normal((1, 6))
        E3 = rng.standard_normal((1, 6))
        cfg = TrainConfig()
        single = loss_gradients(E1, E2, E3, head, cfg)
        double = loss_gradients(np.vstack([E1, E1]), np.vstack([E2, E2]),
                                np.vstack([E3, E3]), head, cfg)
        assert double.loss == pytest.approx(2.0 * single.loss, rel=1e-12)
        for name, g in single.by_name().items():
            np.testing.assert_allclose(double.by_name()[name], 2.0 * g,
                                       rtol=1e-10, atol=1e-14)

    def test_alpha_zero_removes_pragmatic_gradient(self, rng):
        # with alpha = 0 the loss ignores pragmatic distances entirely;
        # for p_to_s the semantic weights still matter, W_p only via scores
        head = random_head(6, 3, seed=37)
        E1, E2, E3 = (rng.standard_normal((5, 6)) for _ in range(3))
        with_prag = loss_gradients(E1, E2, E3, head, TrainConfig(alpha=1.0))
        without = loss_gradients(E1, E2, E3, head, TrainConfig(alpha=0.0))
        assert without.loss <= with_prag.loss

    def test_empty_batch_rejected(self):
        head = random_head(6, 3, seed=41)
        empty = np.zeros((0, 6))
        with pytest.raises(ValueError):
            loss_gradients(empty, empty, empty, head, TrainConfig())

    def test_misaligned_batches_rejected(self, rng):
        head = random_head(6, 3, seed=43)
        with pytest.raises(Exception):
            loss_gradients(rng.standard_normal((2, 6)),
                           rng.standard_normal((3, 6)),
                           rng.standard_normal((3, 6)), head, TrainConfig())
