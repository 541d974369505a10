# -*- coding: utf-8 -*-
"""
Tests for run artifacts, SVG plots and the report builder.
"""
import shutil

import numpy as np
import pytest

from classroom_kd.errors import InvalidArgumentError, LogFormatError, MissingArtifactError
from classroom_kd.experiments import run_distill, run_pretrain
from classroom_kd.models import MentoringConfig
from classroom_kd.reporting import (
    CLASSROOM_SPLIT,
    EPOCH_COLUMNS,
    EPOCH_LOG,
    SUMMARY,
    bar_chart_svg,
    build_report,
    epoch_log_frame,
    line_chart_svg,
    load_run,
    read_epoch_log,
    read_summary,
)
from classroom_kd.trainer import gain_from_accuracies
from tests.conftest import TINY_EXPERIMENT

EPOCHS = TINY_EXPERIMENT.distill.optimizer.total_epochs


def _with_mode(mode):
    distill = TINY_EXPERIMENT.distill
    return TINY_EXPERIMENT.model_copy(
        update={"distill": distill.model_copy(update={"mentoring": MentoringConfig(mode=mode)})}
    )


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    """A nokd and a classroom run sharing pretrained mentors."""
    root = tmp_path_factory.mktemp("out")
    run_pretrain(TINY_EXPERIMENT, root)
    nokd = run_distill(_with_mode("nokd"), root, seed=0)
    classroom = run_distill(_with_mode("classroom-adaptive"), root, seed=0)
    return nokd, classroom


class TestEpochLog:
    """Tests for the long-format epoch log."""

    def test_columns_and_rows(self, runs):
        """Should write train/test rows plus one classroom row per model."""
        _, classroom = runs

        frame = epoch_log_frame(classroom.result)

        assert list(frame.columns) == EPOCH_COLUMNS
        assert len(frame) == EPOCHS * (2 + 4)
        ranked = frame[frame["split"] == CLASSROOM_SPLIT]
        assert set(ranked["model_id"]) == {"student", "teacher", "peer1", "peer2"}
        per_epoch = ranked.groupby("epoch")["rank"].sum()
        assert np.allclose(per_epoch, 3.0)

    def test_nokd_has_no_classroom_rows(self, runs):
        """Should log only student accuracy without mentoring."""
        nokd, _ = runs

        frame = epoch_log_frame(nokd.result)

        assert len(frame) == EPOCHS * 2
        assert CLASSROOM_SPLIT not in set(frame["split"])

    @pytest.mark.filterwarnings("error::FutureWarning")
    def test_read_back(self, runs):
        """Should read the written log with numeric columns and no pandas FutureWarning."""
        _, classroom = runs

        frame = read_epoch_log(classroom.run_dir / EPOCH_LOG)

        assert frame["epoch"].max() == EPOCHS - 1
        assert frame["top5"].isna().all()

    def test_bad_value_names_line(self, runs, tmp_path):
        """Should name the line of a non-numeric value."""
        _, classroom = runs
        lines = (classroom.run_dir / EPOCH_LOG).read_text().splitlines()
        fields = lines[3].split(",")
        fields[0] = "three"
        lines[3] = ",".join(fields)
        path = tmp_path / EPOCH_LOG
        path.write_text("\n".join(lines) + "\n")

        with pytest.raises(LogFormatError, match="line 4: column 'epoch'"):
            read_epoch_log(path)

    def test_missing_column(self, tmp_path):
        """Should reject a log without the expected header."""
        path = tmp_path / EPOCH_LOG
        path.write_text("epoch,top1\n0,50\n")

        with pytest.raises(LogFormatError, match="missing columns"):
            read_epoch_log(path)

    def test_missing_file(self, tmp_path):
        """Should raise MissingArtifactError."""
        with pytest.raises(MissingArtifactError):
            read_epoch_log(tmp_path / EPOCH_LOG)


class TestSummary:
    """Tests for the key = value summary."""

    def test_fields(self, runs):
        """Should record mode, seed and accuracies without wall-clock time."""
        _, classroom = runs

        summary = read_summary(classroom.run_dir / SUMMARY)

        assert summary["mode"] == "classroom-adaptive"
        assert summary["seed"] == "0"
        assert summary["experiment"] == "tiny"
        assert "wall_seconds" not in summary
        assert float(summary["final_test_top1"]) == classroom.result.final_test.top1

    def test_bad_line(self, tmp_path):
        """Should name the malformed line."""
        path = tmp_path / SUMMARY
        path.write_text("mode = nokd\nbroken\n")

        with pytest.raises(LogFormatError, match="line 2"):
            read_summary(path)


class TestSvg:
    """Tests for the SVG charts."""

    def test_line_chart_series(self):
        """Should draw one polyline per series and drop NaN points."""
        svg = line_chart_svg(
            "Rank",
            {"teacher": [(0, 1.0), (1, 1.2)], "peer1": [(0, 0.8), (1, float("nan"))]},
            "epoch",
            "rank",
        )

        assert svg.count('class="series"') == 2
        assert 'data-model="peer1"' in svg
        assert "generated" not in svg

    def test_escapes_names(self):
        """Should escape model ids in XML."""
        svg = line_chart_svg("a<b", {"x&y": [(0, 1.0)]}, "epoch", "rank")

        assert "x&amp;y" in svg
        assert "a&lt;b" in svg

    def test_timestamp_only_when_enabled(self, embed_timestamp):
        """Should embed a generation time only when asked."""
        svg = line_chart_svg("Rank", {"teacher": [(0, 1.0)]}, "epoch", "rank")

        assert "<!-- generated" in svg

    def test_bar_chart(self):
        """Should draw one bar per class and the gain counts."""
        gain = gain_from_accuracies([50.0, 60.0, 70.0], [55.0, 60.0, 65.0])

        svg = bar_chart_svg("Gain", gain)

        assert svg.count('class="bar"') == 3
        assert "improved 1 / degraded 1 / unchanged 1" in svg

    def test_deterministic(self):
        """Should render identical bytes for identical input."""
        series = {"teacher": [(0, 1.0), (1, 2.0)]}

        assert line_chart_svg("R", series, "e", "r") == line_chart_svg("R", series, "e", "r")


class TestBuildReport:
    """Tests for the report over several runs."""

    def test_outputs(self, runs, tmp_path):
        """Should write the combined CSV, trajectories and per-class gain."""
        nokd, classroom = runs

        result = build_report([nokd.run_dir, classroom.run_dir], tmp_path / "report")

        names = sorted(p.name for p in result.files)
        assert names == [
            "combined.csv",
            "per_class_gain.csv",
            "per_class_gain.svg",
            "rank_trajectories.svg",
            "temperature_trajectories.svg",
        ]
        assert all(p.is_file() for p in result.files)
        rank_svg = (tmp_path / "report" / "rank_trajectories.svg").read_text()
        assert rank_svg.count('class="series"') == 4
        temperature_svg = (tmp_path / "report" / "temperature_trajectories.svg").read_text()
        assert 'data-model="student"' not in temperature_svg

    def test_gain_against_nokd(self, runs, tmp_path):
        """Should compare the classroom run with the nokd run of the same seed."""
        nokd, classroom = runs

        result = build_report([nokd.run_dir, classroom.run_dir], tmp_path / "report")

        gain = result.gains[classroom.run_dir.name]
        assert gain.improved + gain.degraded + gain.unchanged == 4
        nokd_accuracy = load_run(nokd.run_dir).per_class["accuracy"].to_numpy()
        classroom_accuracy = load_run(classroom.run_dir).per_class["accuracy"].to_numpy()
        assert np.allclose(gain.deltas, classroom_accuracy - nokd_accuracy)

    def test_same_directory_names(self, runs, tmp_path):
        """Should prefix the parent directory when run names collide."""
        nokd, classroom = runs
        a = shutil.copytree(nokd.run_dir, tmp_path / "a" / "s0")
        b = shutil.copytree(classroom.run_dir, tmp_path / "b" / "s0")

        result = build_report([a, b], tmp_path / "report")

        assert set(result.gains) == {"a/s0", "b/s0"}

    def test_empty(self, tmp_path):
        """Should reject an empty run list."""
        with pytest.raises(InvalidArgumentError):
            build_report([], tmp_path)

    def test_missing_run(self, tmp_path):
        """Should raise MissingArtifactError for a directory without a log."""
        with pytest.raises(MissingArtifactError):
            build_report([tmp_path / "nothing"], tmp_path / "report")
