# -*- coding: utf-8 -*-
"""
Structured logging for training runs.

Records go to stderr so that ``ckd preset`` and friends can keep stdout for
their own output. Every record carries the id of the run that emitted it.
"""
import logging
import sys

from pythonjsonlogger.json import JsonFormatter

from .config import settings
from .context import get_run_id

_JSON_FIELDS = "%(timestamp)s %(level)s %(name)s %(run_id)s %(message)s"
_TEXT_FIELDS = "%(asctime)s %(levelname)-7s %(name)s [%(run_id)s] %(message)s"

# Third-party loggers that are too chatty at INFO
_QUIET = ("numexpr",)


class RunIdFilter(logging.Filter):
    """Stamp ``record.run_id`` from the active run context ("-" outside one)."""

    def filter(self, record: logging.LogRecord) -> bool:
        record.run_id = get_run_id() or "-"
        return True


class RunJsonFormatter(JsonFormatter):
    def add_fields(self, log_record, record, message_dict):
        super().add_fields(log_record, record, message_dict)
        log_record["level"] = record.levelname
        log_record["logger"] = record.name
        log_record.setdefault("run_id", getattr(record, "run_id", "-"))


def _formatter(json_output: bool) -> logging.Formatter:
    if not json_output:
        return logging.Formatter(_TEXT_FIELDS)
    return RunJsonFormatter(
        fmt=_JSON_FIELDS,
        rename_fields={"timestamp": "@timestamp", "levelname": "level"},
        timestamp=True,
    )


def setup_logging(level: str | None = None, json_output: bool | None = None) -> logging.Logger:
    """
    Replace the root handlers with a single stderr handler.

    Args:
        level: overrides CKD_LOG_LEVEL
        json_output: overrides CKD_LOG_JSON
    """
    level = (level or settings.LOG_LEVEL).upper()
    json_output = settings.LOG_JSON if json_output is None else json_output

    root = logging.getLogger()
    root.setLevel(level)
    for existing in list(root.handlers):
        root.removeHandler(existing)

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_formatter(json_output))
    handler.addFilter(RunIdFilter())
    root.addHandler(handler)

    for name in _QUIET:
        logging.getLogger(name).setLevel(logging.WARNING)

    return root
