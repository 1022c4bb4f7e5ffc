import itertools
import json
import math

import numpy as np
import pytest
import scipy.stats

from impscore import (ChoiceQuestion, DimensionError, RankingQuestion,
                      SchemaError, evaluate_instances, fractional_ranks,
                      kendall_tau, load_choice_questions,
                      load_ranking_questions, rank_from_scores,
                      run_choice_task, run_ranking_task, spearman_rho,
                      write_embeddings_jsonl)
from impscore.backends import FileBackend, ToyHashBackend
from impscore.data import TrainingInstance
from impscore.model import score_triples
from impscore.training import instance_accuracies

from conftest import pick_head


def brute_force_tau(a, b):
    """Tau-a by direct pair counting; ties are neither concordant nor discordant."""
    n = len(a)
    concordant = discordant = 0
    for i, j in itertools.combinations(range(n), 2):
        prod = (a[i] - a[j]) * (b[i] - b[j])
        if prod > 0:
            concordant += 1
        elif prod < 0:
            discordant += 1
    return (concordant - discordant) / (n * (n - 1) / 2)


def d2_formula_rho(a, b):
    """Spearman rho via the rank-difference formula (distinct ranks only)."""
    n = len(a)
    ra = {v: r for r, v in enumerate(sorted(a), start=1)}
    rb = {v: r for r, v in enumerate(sorted(b), start=1)}
    d2 = sum((ra[x] - rb[y]) ** 2 for x, y in zip(a, b))
    return 1.0 - 6.0 * d2 / (n * (n * n - 1))


class TestKendallTau:
    def test_identity_and_reversal(self):
        for n in range(2, 7):
            seq = list(range(n))
            assert kendall_tau(seq, seq) == 1.0
            assert kendall_tau(seq, seq[::-1]) == -1.0

    def test_frozen_single_swap(self):
        assert kendall_tau([1, 2, 3, 4], [1, 2, 4, 3]) == pytest.approx(4 / 6)

    def test_matches_brute_force_with_ties(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(2, 8))
            a = rng.integers(0, 4, size=n).astype(float)
            b = rng.integers(0, 4, size=n).astype(float)
            assert kendall_tau(a, b) == pytest.approx(brute_force_tau(a, b))

    def test_matches_scipy_without_ties(self):
        # scipy's default tau-b equals tau-a when no ties are present
        rng = np.random.default_rng(1)
        for _ in range(50):
            n = int(rng.integers(3, 10))
            a = rng.permutation(n).astype(float)
            b = rng.permutation(n).astype(float)
            expected = scipy.stats.kendalltau(a, b).statistic
            assert kendall_tau(a, b) == pytest.approx(expected)

    def test_too_short(self):
        with pytest.raises(ValueError):
            kendall_tau([1.0], [1.0])

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            kendall_tau([1.0, 2.0], [1.0, 2.0, 3.0])


class TestSpearmanRho:
    def test_identity_and_reversal(self):
        for n in range(2, 7):
            seq = list(range(n))
            assert spearman_rho(seq, seq) == 1.0
            assert spearman_rho(seq, seq[::-1]) == -1.0

    def test_frozen_values(self):
        assert spearman_rho([1, 2, 3, 4], [2, 1, 3, 4]) == pytest.approx(0.8)
        assert spearman_rho([1, 2, 3, 4, 5], [1, 2, 3, 5, 4]) == pytest.approx(0.9)

    def test_matches_d2_formula_on_distinct_ranks(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            n = int(rng.integers(2, 9))
            a = rng.permutation(n).astype(float)
            b = rng.permutation(n).astype(float)
            assert spearman_rho(a, b) == pytest.approx(d2_formula_rho(list(a), list(b)))

    @pytest.mark.filterwarnings("ignore::scipy.stats.ConstantInputWarning")
    def test_ties_match_scipy(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            n = int(rng.integers(3, 10))
            a = rng.integers(0, 4, size=n).astype(float)
            b = rng.integers(0, 4, size=n).astype(float)
            expected = scipy.stats.spearmanr(a, b).statistic
            got = spearman_rho(a, b)
            if math.isnan(expected):
                assert math.isnan(got)
            else:
                assert got == pytest.approx(expected)

    def test_zero_variance_is_nan(self):
        assert math.isnan(spearman_rho([1, 1, 1], [1, 2, 3]))


class TestFractionalRanks:
    def test_midranks(self):
        np.testing.assert_array_equal(fractional_ranks([10, 20, 20, 30]),
                                      [1.0, 2.5, 2.5, 4.0])

    def test_all_tied(self):
        np.testing.assert_array_equal(fractional_ranks([5, 5, 5]),
                                      [2.0, 2.0, 2.0])

    def test_distinct_values_get_ordinal_ranks(self):
        np.testing.assert_array_equal(fractional_ranks([0.3, 0.1, 0.2]),
                                      [3.0, 1.0, 2.0])


class TestRankFromScores:
    def test_lowest_score_gets_rank_one(self):
        np.testing.assert_array_equal(rank_from_scores([0.5, 0.2, 0.9]),
                                      [2, 1, 3])

    def test_ties_break_by_position(self):
        np.testing.assert_array_equal(rank_from_scores([0.5, 0.5, 0.1]),
                                      [2, 3, 1])

    def test_permutation_output(self):
        rng = np.random.default_rng(4)
        scores = rng.standard_normal(6)
        assert sorted(rank_from_scores(scores)) == [1, 2, 3, 4, 5, 6]


def perfect_fixture(tmp_path, n_questions=3):
    """Head + file backend where scores strictly follow the gold order.

    The pick_head slices give I(e) = distance([e0, e1], [e1, e2]); with
    e = [t, 0, 0] (euclidean) the score grows monotonically with t.
    """
    head = pick_head(imp_metric="euclidean", prag_metric="euclidean")
    vectors = {}
    questions = []
    for q in range(n_questions):
        sentences = []
        for level in range(4):
            text = f"q{q} level{level}"
            vectors[text] = [float(level + 1), 0.0, 0.0]
            sentences.append(text)
        # shuffle presentation order; gold rank follows the levels
        order = [(q + k) % 4 for k in range(4)]
        shuffled = [sentences[i] for i in order]
        gold = [order.index(i) + 1 for i in range(4)]
        gold_by_position = [sum(1 for j in order if j < i) + 1 for i in order]
        questions.append(RankingQuestion(
            group_id=f"g{q}", sentences=tuple(shuffled),
            gold_rank=tuple(gold_by_position)))
    path = tmp_path / "emb.jsonl"
    write_embeddings_jsonl(path, vectors)
    return head, FileBackend(path), questions


class TestRankingTask:
    def test_perfect_head_gets_perfect_correlations(self, tmp_path):
        head, backend, questions = perfect_fixture(tmp_path)
        report = run_ranking_task(questions, head, backend)
        assert report.avg_tau == 1.0 and report.avg_rho == 1.0
        for res in report.results:
            assert res.tau == 1.0 and res.rho == 1.0
            assert res.predicted_rank == res.gold_rank

    def test_reversed_gold_gives_negative_tau(self, tmp_path):
        head, backend, questions = perfect_fixture(tmp_path, n_questions=1)
        q = questions[0]
        flipped = RankingQuestion(q.group_id, q.sentences,
                                  tuple(5 - r for r in q.gold_rank))
        report = run_ranking_task([flipped], head, backend)
        assert report.avg_tau == -1.0 and report.avg_rho == -1.0

    def test_report_dict_shape(self, tmp_path):
        head, backend, questions = perfect_fixture(tmp_path)
        d = run_ranking_task(questions, head, backend).to_dict()
        assert len(d["questions"]) == 3
        assert d["avg_tau"] == 1.0 and d["avg_rho"] == 1.0


class TestChoiceTask:
    def test_nearest_option_wins(self, tmp_path):
        head = pick_head(prag_metric="euclidean")
        vectors = {
            "ref": [0.0, 0.0, 0.0],
            "near": [0.1, 0.0, 0.0],
            "mid": [1.0, 0.0, 0.0],
            "far": [5.0, 0.0, 0.0],
        }
        path = tmp_path / "emb.jsonl"
        write_embeddings_jsonl(path, vectors)
        backend = FileBackend(path)
        q = ChoiceQuestion(reference="ref", options=("far", "near", "mid"),
                           gold_index=1)
        report = run_choice_task([q], head, backend)
        assert report.accuracy == 1.0
        assert report.results[0].predicted_index == 1

    def test_distance_ties_pick_lowest_index(self, tmp_path):
        head = pick_head(prag_metric="euclidean")
        vectors = {"ref": [0.0, 0.0, 0.0], "a": [1.0, 0.0, 0.0],
                   "b": [1.0, 0.0, 0.0], "c": [1.0, 0.0, 0.0]}
        path = tmp_path / "emb.jsonl"
        write_embeddings_jsonl(path, vectors)
        q = ChoiceQuestion(reference="ref", options=("a", "b", "c"),
                           gold_index=2)
        report = run_choice_task([q], head, FileBackend(path))
        assert report.results[0].predicted_index == 0
        assert report.accuracy == 0.0


class TestQuestionLoaders:
    def test_ranking_round_trip(self, tmp_path):
        path = tmp_path / "rank.jsonl"
        row = {"group_id": "g1", "sentences": ["a", "b", "c", "d"],
               "gold_rank": [2, 1, 4, 3]}
        path.write_text(json.dumps(row) + "\n")
        qs = load_ranking_questions(path)
        assert qs == [RankingQuestion("g1", ("a", "b", "c", "d"), (2, 1, 4, 3))]

    @pytest.mark.parametrize("gold", [[1, 2, 3], [1, 2, 3, 3], [0, 1, 2, 3],
                                      [1, 2, 3, 5], [True, 2, 3, 4]])
    def test_ranking_bad_gold_rejected(self, tmp_path, gold):
        path = tmp_path / "rank.jsonl"
        row = {"group_id": "g", "sentences": ["a", "b", "c", "d"],
               "gold_rank": gold}
        path.write_text(json.dumps(row) + "\n")
        with pytest.raises(SchemaError):
            load_ranking_questions(path)

    def test_choice_round_trip(self, tmp_path):
        path = tmp_path / "choice.jsonl"
        row = {"reference": "r", "options": ["x", "y", "z"], "gold_index": 2}
        path.write_text(json.dumps(row) + "\n")
        qs = load_choice_questions(path)
        assert qs == [ChoiceQuestion("r", ("x", "y", "z"), 2)]

    @pytest.mark.parametrize("row", [
        {"reference": "r", "options": ["x", "y"], "gold_index": 0},
        {"reference": "r", "options": ["x", "y", "z"], "gold_index": 3},
        {"reference": "r", "options": ["x", "y", "z"], "gold_index": -1},
        {"reference": "r", "options": ["x", "y", "z"]},
    ])
    def test_choice_bad_rows_rejected(self, tmp_path, row):
        path = tmp_path / "choice.jsonl"
        path.write_text(json.dumps(row) + "\n")
        with pytest.raises(SchemaError):
            load_choice_questions(path)


class TestEvaluateInstances:
    def test_matches_direct_accuracy_computation(self):
        backend = ToyHashBackend(dim=8, seed=0)
        head = pick_head(d=8, l=3)
        instances = [TrainingInstance(f"i{k}", f"p{k}", f"n{k}", "s")
                     for k in range(6)]
        report = evaluate_instances(instances, head, backend)
        M = np.asarray(backend.embed(
            [t for i in instances
             for t in (i.implicit, i.explicit_pos, i.explicit_neg)]))
        E1, E2, E3 = M[0::3], M[1::3], M[2::3]
        imp, prag = instance_accuracies(score_triples(E1, E2, E3, head))
        assert report == {"n_instances": 6, "implicitness_accuracy": imp,
                          "pragmatics_accuracy": prag}

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            evaluate_instances([], pick_head(d=8, l=3), ToyHashBackend(dim=8))
