# -*- coding: utf-8 -*-
"""
Tests for synthetic datasets, CSV loading, splitting and batching.
"""
import numpy as np
import pytest

from classroom_kd.datasets import (
    BatchPlan,
    Dataset,
    batch_order,
    batch_slices,
    generate_blobs,
    generate_blobs_spirals,
    generate_spirals,
    iterate_batches,
    load_csv,
    save_csv,
    split,
)
from classroom_kd.errors import DatasetFormatError, InvalidArgumentError


class TestGenerators:
    """Tests for the synthetic generators."""

    def test_blobs_shape_and_balance(self):
        """Should produce a balanced dataset with the requested shape."""
        data = generate_blobs(class_count=5, samples_per_class=20, dim=3, spread=0.5, seed=1)

        assert data.features.shape == (100, 3)
        assert list(data.class_counts()) == [20] * 5

    def test_blobs_deterministic(self):
        """Should be bit-identical for the same seed and differ for another."""
        a = generate_blobs(3, 10, 2, 0.5, seed=9)
        b = generate_blobs(3, 10, 2, 0.5, seed=9)
        c = generate_blobs(3, 10, 2, 0.5, seed=10)

        assert a.features.tobytes() == b.features.tobytes()
        assert a.features.tobytes() != c.features.tobytes()

    def test_blobs_mostly_nearest_mean(self):
        """Should assign almost every point to its own class mean."""
        data = generate_blobs(6, 30, 2, spread=0.5, seed=2)
        means = np.stack([data.features[data.labels == c].mean(axis=0) for c in range(6)])

        distances = np.linalg.norm(data.features[:, None, :] - means[None], axis=2)

        assert np.mean(np.argmin(distances, axis=1) == data.labels) >= 0.9

    def test_spirals_radius(self):
        """Should keep noiseless spiral points within radius [0.15, 1]."""
        data = generate_spirals(3, 50, noise=0.0, seed=0)
        radius = np.linalg.norm(data.features, axis=1)

        assert data.features.shape == (150, 2)
        assert radius.min() >= 0.15 - 1e-9
        assert radius.max() <= 1.0 + 1e-9

    def test_blobs_spirals_mix(self):
        """Should put the spiral classes inside and the blob classes outside."""
        data = generate_blobs_spirals(10, 40, spread=0.1, noise=0.0, seed=7)
        radius = np.linalg.norm(data.features, axis=1)

        assert data.class_count == 10
        assert radius[data.labels < 5].max() <= 1.0 + 1e-9
        assert radius[data.labels >= 5].mean() > 1.5

    def test_rejects_zero_classes(self):
        """Should reject a class count of zero."""
        with pytest.raises(InvalidArgumentError):
            generate_blobs(0, 10, 2, 0.5, seed=0)

    def test_dataset_is_read_only(self, blobs):
        """Should expose read-only arrays."""
        with pytest.raises(ValueError):
            blobs.features[0, 0] = 1.0


class TestCsv:
    """Tests for CSV save/load."""

    def test_round_trip(self, tmp_path, blobs):
        """Should load back exactly what was saved."""
        path = save_csv(blobs, tmp_path / "data.csv")

        loaded = load_csv(path, class_count=4)

        assert np.array_equal(loaded.features, blobs.features)
        assert np.array_equal(loaded.labels, blobs.labels)

    def test_infers_class_count(self, tmp_path):
        """Should infer max label + 1 when no class count is declared."""
        path = tmp_path / "data.csv"
        path.write_text("f0,f1,label\n0.1,0.2,0\n0.3,0.4,2\n")

        assert load_csv(path).class_count == 3

    def test_bad_header(self, tmp_path):
        """Should name the wrong header column."""
        path = tmp_path / "data.csv"
        path.write_text("x,f1,label\n0.1,0.2,0\n")

        with pytest.raises(DatasetFormatError, match="header column 0"):
            load_csv(path)

    def test_non_numeric_feature_names_line(self, tmp_path):
        """Should report the 1-based line of a non-numeric feature."""
        path = tmp_path / "data.csv"
        path.write_text("f0,label\n0.5,0\nabc,1\n")

        with pytest.raises(DatasetFormatError, match="line 3"):
            load_csv(path)

    def test_negative_label(self, tmp_path):
        """Should reject a negative label."""
        path = tmp_path / "data.csv"
        path.write_text("f0,label\n0.5,-1\n")

        with pytest.raises(DatasetFormatError, match="line 2"):
            load_csv(path)

    def test_non_ascii_digit_label(self, tmp_path):
        """Should reject a Unicode digit label with the line number."""
        path = tmp_path / "data.csv"
        path.write_text("f0,label\n0.5,1\n0.2,\u00b2\n", encoding="utf-8")

        with pytest.raises(DatasetFormatError, match="line 3: label"):
            load_csv(path)

    def test_label_above_declared_count(self, tmp_path):
        """Should reject a label >= the declared class count."""
        path = tmp_path / "data.csv"
        path.write_text("f0,label\n0.5,0\n0.7,5\n")

        with pytest.raises(DatasetFormatError, match="declared class count"):
            load_csv(path, class_count=3)

    def test_missing_file(self, tmp_path):
        """Should raise DatasetFormatError for a missing file."""
        with pytest.raises(DatasetFormatError, match="not found"):
            load_csv(tmp_path / "nope.csv")


class TestSplit:
    """Tests for the stratified split."""

    def test_stratified_counts(self, blobs):
        """Should put round(0.8 * 40) = 32 samples per class in train."""
        train, test = split(blobs, 0.8, seed=0)

        assert list(train.class_counts()) == [32] * 4
        assert list(test.class_counts()) == [8] * 4

    def test_deterministic(self, blobs):
        """Should give the same split for the same seed."""
        a, _ = split(blobs, 0.8, seed=5)
        b, _ = split(blobs, 0.8, seed=5)

        assert np.array_equal(a.features, b.features)

    def test_rejects_bad_fraction(self, blobs):
        """Should reject a train fraction outside (0, 1)."""
        with pytest.raises(InvalidArgumentError):
            split(blobs, 1.0, seed=0)


class TestBatching:
    """Tests for the seeded batch order."""

    def test_order_is_permutation(self):
        """Should visit every index once per epoch."""
        order = batch_order(50, BatchPlan(batch_size=8, shuffle_seed=1, epoch=0))

        assert sorted(order) == list(range(50))

    def test_order_depends_on_seed_and_epoch(self):
        """Should be a pure function of (seed, epoch)."""
        first = batch_order(30, BatchPlan(8, 1, 0))

        assert np.array_equal(first, batch_order(30, BatchPlan(8, 1, 0)))
        assert not np.array_equal(first, batch_order(30, BatchPlan(8, 1, 1)))
        assert not np.array_equal(first, batch_order(30, BatchPlan(8, 2, 0)))

    def test_final_short_batch_kept(self):
        """Should keep the last short batch."""
        sizes = [len(b) for b in batch_slices(10, BatchPlan(4, 0, 0))]

        assert sizes == [4, 4, 2]

    def test_iterate_batches_slices_arrays(self, blobs):
        """Should slice features and labels by the same indices."""
        batch = next(iterate_batches(blobs, BatchPlan(5, 0, 0)))

        assert np.array_equal(batch.features, blobs.features[batch.indices])
        assert np.array_equal(batch.labels, blobs.labels[batch.indices])

    def test_rejects_zero_batch_size(self):
        """Should reject batch_size < 1."""
        with pytest.raises(InvalidArgumentError):
            BatchPlan(0, 0, 0)

    def test_dataset_rejects_label_mismatch(self):
        """Should reject labels that do not match the row count."""
        with pytest.raises(InvalidArgumentError):
            Dataset(np.zeros((3, 2)), np.zeros(2, dtype=int), 2)
