import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from impscore import (ConfigError, DimensionError, ModelConfig,
                      ProjectionHead, compared_pair, cosine_similarity,
                      euclidean_distance, implicitness_score,
                      implicitness_scores, pragmatic_distance,
                      pragmatic_distances, project, score_triples)

from conftest import pick_head, random_head

finite_floats = st.floats(min_value=-1e6, max_value=1e6,
                          allow_nan=False, allow_infinity=False)


def vec(n):
    return st.lists(finite_floats, min_size=n, max_size=n)


class TestModelConfig:
    def test_defaults(self):
        cfg = ModelConfig()
        assert (cfg.d, cfg.l) == (768, 64)
        assert cfg.imp_metric == "cosine"
        assert cfg.prag_metric == "euclidean"
        assert cfg.transform == "p_to_s"

    def test_to_dict_round_trip(self):
        cfg = ModelConfig(d=10, l=3, imp_metric="euclidean",
                          prag_metric="cosine", transform="third_space")
        assert ModelConfig(**cfg.to_dict()) == cfg

    @pytest.mark.parametrize("kwargs", [
        dict(d=0), dict(d=-3), dict(l=0), dict(d=4, l=4), dict(d=4, l=5),
        dict(imp_metric="manhattan"), dict(prag_metric=""),
        dict(transform="p2s"), dict(d=2.0), dict(d=True), dict(l=True),
    ])
    def test_rejects_bad_config(self, kwargs):
        with pytest.raises(ConfigError):
            ModelConfig(**kwargs)


class TestProjectionHead:
    def test_weight_names_by_transform(self):
        assert list(pick_head(transform="p_to_s").weights()) == ["W_p", "W_s", "W_t"]
        assert list(pick_head(transform="s_to_p").weights()) == ["W_p", "W_s", "W_t"]
        assert list(pick_head(transform="third_space").weights()) == [
            "W_p", "W_s", "W_t1", "W_t2"]

    def test_weights_are_read_only_copies(self):
        W = np.zeros((3, 2))
        head = ProjectionHead(ModelConfig(d=3, l=2), W_p=W, W_s=W, W_t=np.eye(2))
        W[0, 0] = 99.0
        assert head.W_p[0, 0] == 0.0
        with pytest.raises(ValueError):
            head.W_p[0, 0] = 1.0

    def test_shape_mismatch(self):
        cfg = ModelConfig(d=3, l=2)
        good = np.zeros((3, 2))
        with pytest.raises(DimensionError):
            ProjectionHead(cfg, W_p=np.zeros((2, 2)), W_s=good, W_t=np.eye(2))
        with pytest.raises(DimensionError):
            ProjectionHead(cfg, W_p=good, W_s=good, W_t=np.eye(3))

    def test_transform_weight_contract(self):
        cfg = ModelConfig(d=3, l=2)
        W = np.zeros((3, 2))
        eye = np.eye(2)
        with pytest.raises(ConfigError):
            ProjectionHead(cfg, W_p=W, W_s=W)  # W_t missing
        with pytest.raises(ConfigError):
            ProjectionHead(cfg, W_p=W, W_s=W, W_t1=eye, W_t2=eye)
        cfg3 = ModelConfig(d=3, l=2, transform="third_space")
        with pytest.raises(ConfigError):
            ProjectionHead(cfg3, W_p=W, W_s=W, W_t=eye)
        with pytest.raises(ConfigError):
            ProjectionHead(cfg3, W_p=W, W_s=W, W_t1=eye)  # W_t2 missing

    def test_non_finite_rejected(self):
        cfg = ModelConfig(d=3, l=2)
        bad = np.zeros((3, 2))
        bad[1, 1] = np.nan
        with pytest.raises(ValueError):
            ProjectionHead(cfg, W_p=bad, W_s=np.zeros((3, 2)), W_t=np.eye(2))


class TestCosineSimilarity:
    def test_frozen_values(self):
        assert cosine_similarity([1, 0], [1, 0]) == 1.0
        assert cosine_similarity([1, 0], [0, 1]) == 0.0
        assert cosine_similarity([1, 0], [-1, 0]) == -1.0
        assert cosine_similarity([2, 0], [5, 0]) == 1.0

    def test_zero_norm_maps_to_zero(self):
        assert cosine_similarity([0, 0], [1, 2]) == 0.0
        assert cosine_similarity([0, 0], [0, 0]) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            cosine_similarity([1, 0], [1, 0, 0])

    @given(vec(3), vec(3))
    def test_symmetry_and_range(self, u, v):
        a = cosine_similarity(u, v)
        assert a == cosine_similarity(v, u)
        assert -1.0 <= a <= 1.0

    @given(vec(4), st.floats(min_value=0.01, max_value=100.0))
    def test_scale_invariance(self, u, c):
        # the tiny-norm guard region is exempt from scale invariance
        assume(np.linalg.norm(u) > 1e-6)
        v = [1.0, -2.0, 0.5, 3.0]
        base = cosine_similarity(u, v)
        scaled = cosine_similarity([c * x for x in u], v)
        assert scaled == pytest.approx(base, abs=1e-9)


class TestEuclideanDistance:
    def test_frozen_values(self):
        assert euclidean_distance([0, 0], [3, 4]) == 5.0
        assert euclidean_distance([1, 1], [1, 1]) == 0.0
        assert euclidean_distance([1, 0], [0, 1]) == pytest.approx(math.sqrt(2))

    @given(vec(3), vec(3), vec(3))
    def test_triangle_inequality(self, a, b, c):
        ab = euclidean_distance(a, b)
        bc = euclidean_distance(b, c)
        ac = euclidean_distance(a, c)
        assert ac <= ab + bc + 1e-7

    @given(vec(3), vec(3))
    def test_symmetric_nonnegative(self, a, b):
        assert euclidean_distance(a, b) == euclidean_distance(b, a) >= 0.0


class TestImplicitnessScore:
    # pick_head slices: h_p = e[0:2], h_s = e[1:3], transform = identity.

    def test_orthogonal_features_cosine(self):
        head = pick_head(imp_metric="cosine")
        assert implicitness_score(np.array([1.0, 0.0, 1.0]), head) == 1.0

    def test_orthogonal_features_euclidean(self):
        head = pick_head(imp_metric="euclidean")
        score = implicitness_score(np.array([1.0, 0.0, 1.0]), head)
        # compares [1,0] (pragmatic) with [0,1] (semantic)
        assert score == pytest.approx(math.sqrt(2))

    def test_identical_features_score_zero(self):
        for metric in ("cosine", "euclidean"):
            head = pick_head(imp_metric=metric)
            e = np.array([2.0, 2.0, 2.0])  # h_p = h_s = [2, 2]
            assert implicitness_score(e, head) == pytest.approx(0.0)

    def test_opposed_features_cosine_max(self):
        cfg = ModelConfig(d=3, l=2, imp_metric="cosine")
        W_p = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        W_s = -W_p
        head = ProjectionHead(cfg, W_p=W_p, W_s=W_s, W_t=np.eye(2))
        assert implicitness_score(np.array([1.0, 1.0, 0.0]), head) == 2.0

    def test_zero_embedding_cosine_scores_one(self):
        head = pick_head(imp_metric="cosine")
        assert implicitness_score(np.zeros(3), head) == 1.0

    def test_batch_matches_single(self, rng):
        for transform, im, pm in [("p_to_s", "cosine", "euclidean"),
                                  ("s_to_p", "euclidean", "cosine"),
                                  ("third_space", "cosine", "cosine")]:
            head = random_head(6, 3, imp_metric=im, prag_metric=pm,
                               transform=transform, seed=3)
            E = rng.standard_normal((5, 6))
            batch = implicitness_scores(E, head)
            singles = [implicitness_score(e, head) for e in E]
            np.testing.assert_allclose(batch, singles, rtol=0, atol=1e-12)

    def test_cosine_scores_in_range(self, rng):
        head = random_head(8, 4, imp_metric="cosine", seed=1)
        E = rng.standard_normal((200, 8)) * 10
        scores = implicitness_scores(E, head)
        assert np.all(scores >= 0.0) and np.all(scores <= 2.0)

    def test_cosine_scale_invariant(self, rng):
        head = random_head(8, 4, imp_metric="cosine", seed=2)
        E = rng.standard_normal((50, 8))
        base = implicitness_scores(E, head)
        for c in (0.01, 100.0):
            np.testing.assert_allclose(implicitness_scores(c * E, head), base,
                                       rtol=1e-9, atol=1e-12)

    def test_width_mismatch(self):
        head = pick_head()
        with pytest.raises(DimensionError):
            implicitness_score(np.zeros(4), head)
        with pytest.raises(DimensionError):
            implicitness_scores(np.zeros((2, 4)), head)

    def test_swapping_transform_direction_changes_side(self):
        # p_to_s transforms the pragmatic feature; s_to_p the semantic one.
        # With a non-identity W_t the two directions disagree in general.
        cfg_ps = ModelConfig(d=3, l=2, imp_metric="euclidean", transform="p_to_s")
        cfg_sp = ModelConfig(d=3, l=2, imp_metric="euclidean", transform="s_to_p")
        W_p = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        W_s = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        W_t = np.array([[2.0, 0.0], [0.0, 1.0]])
        e = np.array([1.0, 2.0, 3.0])
        ps = implicitness_score(e, ProjectionHead(cfg_ps, W_p=W_p, W_s=W_s, W_t=W_t))
        sp = implicitness_score(e, ProjectionHead(cfg_sp, W_p=W_p, W_s=W_s, W_t=W_t))
        # h_p=[1,2], h_s=[2,3]: p_to_s compares [2,2] vs [2,3] -> 1
        #                       s_to_p compares [1,2] vs [4,3] -> sqrt(10)
        assert ps == pytest.approx(1.0)
        assert sp == pytest.approx(math.sqrt(10.0))


class TestThirdSpace:
    def test_two_maps_applied_to_their_sides(self):
        cfg = ModelConfig(d=3, l=2, imp_metric="euclidean",
                          transform="third_space")
        W_p = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        W_s = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        W_t1 = 2.0 * np.eye(2)
        W_t2 = np.array([[0.0, 1.0], [1.0, 0.0]])
        head = ProjectionHead(cfg, W_p=W_p, W_s=W_s, W_t1=W_t1, W_t2=W_t2)
        e = np.array([1.0, 2.0, 3.0])
        # h_tp = 2*[1,2] = [2,4]; h_ts = swap([2,3]) = [3,2]
        assert implicitness_score(e, head) == pytest.approx(
            math.hypot(2.0 - 3.0, 4.0 - 2.0))


class TestPragmaticDistance:
    def test_identical_inputs_distance_zero(self):
        for metric in ("cosine", "euclidean"):
            head = pick_head(prag_metric=metric)
            e = np.array([1.0, 2.0, 3.0])
            assert pragmatic_distance(e, e, head) == 0.0

    def test_euclidean_3_4_5(self):
        head = pick_head(prag_metric="euclidean")
        a = np.array([3.0, 4.0, 0.0])   # h_p = [3, 4]
        b = np.array([0.0, 0.0, 7.0])   # h_p = [0, 0]
        assert pragmatic_distance(a, b, head) == 5.0

    def test_uses_pragmatic_features_only(self):
        head = pick_head(prag_metric="euclidean")
        a = np.array([1.0, 2.0, 100.0])
        b = np.array([1.0, 2.0, -100.0])  # differs only in the W_s-only coord
        assert pragmatic_distance(a, b, head) == 0.0

    def test_batch_matches_single(self, rng):
        head = random_head(6, 3, prag_metric="cosine", seed=5)
        A = rng.standard_normal((7, 6))
        B = rng.standard_normal((7, 6))
        batch = pragmatic_distances(A, B, head)
        singles = [pragmatic_distance(a, b, head) for a, b in zip(A, B)]
        np.testing.assert_allclose(batch, singles, rtol=0, atol=1e-12)

    def test_batch_length_mismatch(self, rng):
        head = pick_head()
        with pytest.raises(DimensionError):
            pragmatic_distances(rng.standard_normal((3, 3)),
                                rng.standard_normal((4, 3)), head)


class TestProject:
    def test_feature_shapes(self):
        head = pick_head(transform="p_to_s")
        feats = project(np.array([1.0, 2.0, 3.0]), head)
        assert feats.h_p.shape == feats.h_s.shape == (2,)
        assert feats.h_hat is not None and feats.h_tp is None

        head3 = pick_head(transform="third_space")
        feats3 = project(np.array([1.0, 2.0, 3.0]), head3)
        assert feats3.h_hat is None
        assert feats3.h_tp is not None and feats3.h_ts is not None

    def test_compared_pair_matches_score(self, rng):
        for transform in ("p_to_s", "s_to_p", "third_space"):
            head = random_head(6, 3, imp_metric="euclidean",
                               transform=transform, seed=9)
            e = rng.standard_normal(6)
            left, right = compared_pair(project(e, head), head)
            assert euclidean_distance(left, right) == pytest.approx(
                implicitness_score(e, head))


class TestScoreTriples:
    def test_matches_componentwise_ops(self, rng):
        head = random_head(6, 3, seed=11)
        E1 = rng.standard_normal((4, 6))
        E2 = rng.standard_normal((4, 6))
        E3 = rng.standard_normal((4, 6))
        s = score_triples(E1, E2, E3, head)
        np.testing.assert_allclose(s.i_implicit, implicitness_scores(E1, head),
                                   atol=1e-12)
        np.testing.assert_allclose(s.i_pos, implicitness_scores(E2, head),
                                   atol=1e-12)
        np.testing.assert_allclose(s.i_neg, implicitness_scores(E3, head),
                                   atol=1e-12)
        np.testing.assert_allclose(s.dp_pos, pragmatic_distances(E1, E2, head),
                                   atol=1e-12)
        np.testing.assert_allclose(s.dp_neg, pragmatic_distances(E1, E3, head),
                                   atol=1e-12)
