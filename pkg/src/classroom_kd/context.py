# -*- coding: utf-8 -*-
"""
Run identifier tracking for log correlation.
"""
from collections.abc import Iterator
from contextlib import contextmanager
from contextvars import ContextVar

# Context variable for run ID (follows the current thread/process)
run_id_ctx: ContextVar[str | None] = ContextVar("run_id", default=None)


def get_run_id() -> str | None:
    """Get current run ID from context."""
    return run_id_ctx.get()


@contextmanager
def run_context(run_id: str) -> Iterator[str]:
    """Tag every log record emitted inside the block with ``run_id``."""
    token = run_id_ctx.set(run_id)
    try:
        yield run_id
    finally:
        run_id_ctx.reset(token)
