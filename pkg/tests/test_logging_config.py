# -*- coding: utf-8 -*-
"""
Tests for structured logging and run-id correlation.
"""
import json
import logging

import pytest

from classroom_kd.context import get_run_id, run_context
from classroom_kd.logging_config import setup_logging


@pytest.fixture
def restore_root_logger():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


class TestRunContext:
    """Tests for the run-id context."""

    def test_nested(self):
        """Should restore the outer id on exit."""
        assert get_run_id() is None
        with run_context("outer"):
            with run_context("inner"):
                assert get_run_id() == "inner"
            assert get_run_id() == "outer"
        assert get_run_id() is None


class TestSetupLogging:
    """Tests for the JSON formatter."""

    def test_json_record_carries_run_id(self, restore_root_logger, capsys):
        """Should emit one JSON object per record with level and run id."""
        setup_logging("INFO", json_output=True)

        with run_context("tiny/s0"):
            logging.getLogger("classroom_kd.test").info("Epoch complete", extra={"epoch": 3})

        record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert record["message"] == "Epoch complete"
        assert record["level"] == "INFO"
        assert record["run_id"] == "tiny/s0"
        assert record["epoch"] == 3

    def test_level_filters(self, restore_root_logger, capsys):
        """Should drop records below the configured level."""
        setup_logging("WARNING", json_output=False)

        logging.getLogger("classroom_kd.test").info("hidden")

        assert "hidden" not in capsys.readouterr().err

    def test_quiets_dependencies_only(self, restore_root_logger):
        """Should lower numexpr to WARNING without configuring loggers of packages not installed."""
        setup_logging("DEBUG", json_output=False)

        assert logging.getLogger("numexpr").level == logging.WARNING
        assert logging.getLogger("matplotlib").level == logging.NOTSET
