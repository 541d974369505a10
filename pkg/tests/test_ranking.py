# -*- coding: utf-8 -*-
"""
Tests for batch weights, rank normalization and mentor selection.
"""
import math

import numpy as np
import pytest

from classroom_kd.errors import InvalidArgumentError, NumericalError
from classroom_kd.models import RankingConfig
from classroom_kd.numeric import cross_entropy
from classroom_kd.ranking import (
    ClassroomOutputs,
    RankTable,
    batch_weight,
    check_rank_order,
    classroom_weights,
    correct_class_prob,
    rank_classroom,
    rank_scores,
    rank_scores_method_b,
    select_active,
    select_all,
)


class TestBatchWeight:
    """Tests for correct-class probabilities and batch weights."""

    def test_correct_class_prob(self):
        """Should return softmax probability of the label."""
        logits = np.array([[0.0, 0.0], [math.log(3.0), 0.0]])

        probs = correct_class_prob(logits, [0, 0])

        assert np.allclose(probs, [0.5, 0.75])

    def test_weight_is_mean(self):
        """Should average the true-class probabilities."""
        assert batch_weight([0.2, 0.4, 0.9]) == pytest.approx(0.5)

    def test_weight_in_unit_interval(self, rng):
        """Should stay within [0, 1]."""
        p = correct_class_prob(rng.normal(size=(8, 5)) * 10, rng.integers(0, 5, size=8))

        assert 0.0 <= batch_weight(p) <= 1.0

    def test_empty_batch(self):
        """Should reject an empty batch."""
        with pytest.raises(InvalidArgumentError):
            batch_weight([])

    def test_classroom_weights_order(self):
        """Should keep classroom order."""
        outputs = ClassroomOutputs(
            {"student": np.zeros((2, 3)), "teacher": np.eye(3)[:2] * 5, "peer1": np.zeros((2, 3))}
        )

        weights = classroom_weights(outputs, [0, 1])

        assert list(weights) == ["student", "teacher", "peer1"]
        assert weights["teacher"] > weights["student"]

    def test_outputs_shape_mismatch(self):
        """Should reject logits of different shapes."""
        with pytest.raises(InvalidArgumentError):
            ClassroomOutputs({"student": np.zeros((2, 3)), "teacher": np.zeros((2, 4))})


class TestRankScores:
    """Tests for rank normalization (method A)."""

    def test_ranks_sum_to_scale(self):
        """Should produce ranks summing to the scale."""
        table = rank_scores({"student": 0.2, "teacher": 0.5, "peer1": 0.3}, scale=3.0)

        assert table.rank_sum() == pytest.approx(3.0)
        assert table.ranks["teacher"] == pytest.approx(1.5)

    def test_order_preserved(self, rng):
        """Should never rank a heavier model below a lighter one."""
        weights = {f"m{i}": float(w) for i, w in enumerate(rng.uniform(0.01, 1, size=6))}

        table = rank_scores(weights, 6.0)

        for a in weights:
            for b in weights:
                if weights[a] > weights[b]:
                    assert table.ranks[a] > table.ranks[b]

    def test_zero_total(self):
        """Should reject an all-zero weight vector."""
        with pytest.raises(InvalidArgumentError, match="zero total"):
            rank_scores({"student": 0.0, "teacher": 0.0}, 2.0)

    def test_negative_weight(self):
        """Should reject a negative weight."""
        with pytest.raises(InvalidArgumentError):
            rank_scores({"student": -0.1, "teacher": 0.5}, 2.0)

    def test_rank_classroom_default_scale(self):
        """Should use lambda = peers + 1 by default for method A."""
        weights = {"student": 0.1, "teacher": 0.4, "peer1": 0.2, "peer2": 0.3}

        table = rank_classroom(weights, RankingConfig(), peer_count=2)

        assert table.scale == 3.0
        assert table.rank_sum() == pytest.approx(3.0)


class TestMethodB:
    """Tests for uniformly spaced ranks (method B)."""

    def test_spacing(self):
        """Should give 0.1, 0.2, 0.3 by ascending weight."""
        table = rank_scores_method_b({"student": 0.5, "teacher": 0.9, "peer1": 0.1})

        assert table.ranks == pytest.approx({"peer1": 0.1, "student": 0.2, "teacher": 0.3})

    def test_ties_broken_by_id(self):
        """Should order equal weights by model id."""
        table = rank_scores_method_b({"teacher": 0.5, "peer1": 0.5, "student": 0.1})

        assert table.ranks["peer1"] < table.ranks["teacher"]

    def test_rank_classroom_dispatch(self):
        """Should dispatch to method B from the config."""
        table = rank_classroom(
            {"student": 0.2, "teacher": 0.4}, RankingConfig(method="method-b"), peer_count=0
        )

        assert table.ranks == pytest.approx({"student": 0.1, "teacher": 0.2})


class TestSelection:
    """Tests for active mentor selection."""

    def _table(self):
        return rank_scores({"student": 0.3, "teacher": 0.6, "peer1": 0.1, "peer2": 0.3}, 3.0)

    def test_strictly_above_student(self):
        """Should keep only mentors ranked strictly above the student."""
        active = select_active(self._table())

        assert active.ids == ["teacher"]
        assert "peer2" not in active

    def test_gap(self):
        """Should compute (r_m - r_s) / r_m."""
        table = self._table()
        active = select_active(table)

        expected = (table.ranks["teacher"] - table.ranks["student"]) / table.ranks["teacher"]
        assert active.gaps["teacher"] == pytest.approx(expected)
        assert 0 < active.gaps["teacher"] <= 1

    def test_empty_when_student_best(self):
        """Should select nobody when the student leads."""
        table = rank_scores({"student": 0.9, "teacher": 0.5}, 2.0)

        assert len(select_active(table)) == 0

    def test_select_all_caps_gap(self):
        """Should keep every mentor and cap gaps at 1."""
        table = self._table()
        active = select_all(table)

        assert active.ids == ["teacher", "peer1", "peer2"]
        assert active.gaps["peer1"] == 1.0
        assert active.gaps["peer2"] == 0.0

    def test_select_all_zero_rank(self):
        """Should give a zero-ranked mentor a zero gap."""
        table = RankTable(
            {"student": 0.5, "teacher": 0.0}, {"student": 2.0, "teacher": 0.0}, 2.0
        )

        assert select_all(table).gaps["teacher"] == 0.0

    def test_missing_student(self):
        """Should reject a table without the student."""
        table = rank_scores({"teacher": 0.5}, 1.0)

        with pytest.raises(InvalidArgumentError):
            select_active(table)


class TestRankOrder:
    """Tests for the order consistency check."""

    def test_consistent_table_passes(self):
        """Should accept ranks from rank_scores."""
        check_rank_order(rank_scores({"student": 0.1, "teacher": 0.5}, 2.0))

    def test_reversal_detected(self):
        """Should raise when a heavier model ranks lower."""
        table = RankTable({"student": 0.1, "teacher": 0.5}, {"student": 1.5, "teacher": 0.5}, 2.0)

        with pytest.raises(NumericalError, match="rank order"):
            check_rank_order(table)


class TestRandomClassrooms:
    """Rank algebra on 1,000 random classrooms of 3 to 7 models."""

    ROWS = (1, 8, 64)
    CLASSES = (3, 10, 100)

    @pytest.fixture(scope="class")
    def classrooms(self):
        rng = np.random.default_rng(2024)
        cases = []
        for _ in range(1000):
            models = int(rng.integers(3, 8))
            rows = int(rng.choice(self.ROWS))
            classes = int(rng.choice(self.CLASSES))
            labels = rng.integers(0, classes, size=rows)
            ids = ["student", "teacher", *(f"peer{i + 1}" for i in range(models - 2))]
            logits = {}
            for model_id in ids:
                boost = rng.uniform(0, 4) * np.eye(classes)[labels]
                logits[model_id] = rng.normal(scale=2.0, size=(rows, classes)) + boost
            cases.append((ClassroomOutputs(logits), labels))
        return cases

    def test_grid_covered(self, classrooms):
        """Should draw every model count, batch size and class count."""
        sizes = {len(outputs.model_ids) for outputs, _ in classrooms}
        shapes = {outputs.student.shape for outputs, _ in classrooms}

        assert sizes == {3, 4, 5, 6, 7}
        assert {rows for rows, _ in shapes} == set(self.ROWS)
        assert {classes for _, classes in shapes} == set(self.CLASSES)

    def test_ranks_sum_to_scale(self, classrooms):
        """Should sum method-A ranks to lambda = peers + 1 within 1e-9."""
        for outputs, labels in classrooms:
            weights = classroom_weights(outputs, labels)
            config = RankingConfig()
            peers = len(outputs.mentor_ids) - 1

            table = rank_classroom(weights, config, peer_count=peers)

            assert abs(table.rank_sum() - (peers + 1)) <= 1e-9

    def test_rank_order_follows_weights(self, classrooms):
        """Should order ranks exactly as the batch weights."""
        for outputs, labels in classrooms:
            weights = classroom_weights(outputs, labels)
            table = rank_scores(weights, float(len(weights) - 1))

            check_rank_order(table)
            by_weight = sorted(weights, key=lambda m: (weights[m], m))
            by_rank = sorted(table.ranks, key=lambda m: (table.ranks[m], m))
            assert by_rank == by_weight

    def test_active_set_is_heavier_mentors(self, classrooms):
        """Should activate exactly the mentors whose weight beats the student's."""
        for outputs, labels in classrooms:
            weights = classroom_weights(outputs, labels)
            table = rank_scores(weights, float(len(weights) - 1))

            active = select_active(table)

            expected = [m for m in outputs.mentor_ids if weights[m] > weights["student"]]
            assert active.ids == expected

    def test_correct_class_prob_matches_cross_entropy(self, classrooms):
        """Should equal 1 / exp(per-sample cross-entropy) within 1e-12."""
        for outputs, labels in classrooms:
            for logits in outputs.logits.values():
                per_sample, _ = cross_entropy(logits, labels)

                np.testing.assert_allclose(
                    correct_class_prob(logits, labels), 1.0 / np.exp(per_sample), rtol=0, atol=1e-12
                )

    def test_method_b_multiset(self, classrooms):
        """Should hand out 0.1, 0.2, ..., 0.1 * |C| on every classroom."""
        for outputs, labels in classrooms:
            weights = classroom_weights(outputs, labels)

            ranks = sorted(rank_scores_method_b(weights).ranks.values())

            assert ranks == pytest.approx([0.1 * (i + 1) for i in range(len(weights))], abs=1e-12)
