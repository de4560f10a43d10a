"""Structured logging configuration for solver runs."""

import json
import logging
import sys
from contextlib import contextmanager
from contextvars import ContextVar
from datetime import datetime, timezone
from typing import Any, Dict, Iterator, Optional

# Context variables identifying the current solve
run_id_var: ContextVar[Optional[str]] = ContextVar("run_id", default=None)
solver_var: ContextVar[Optional[str]] = ContextVar("solver", default=None)
instance_var: ContextVar[Optional[str]] = ContextVar(
    "instance", default=None
)


class StructuredFormatter(logging.Formatter):
    """JSON formatter for structured logging."""

    def format(self, record: logging.LogRecord) -> str:
        """Format log record as JSON."""
        log_data: Dict[str, Any] = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }

        run_id = run_id_var.get()
        if run_id:
            log_data["run_id"] = run_id

        solver = solver_var.get()
        if solver:
            log_data["solver"] = solver

        instance = instance_var.get()
        if instance:
            log_data["instance"] = instance

        if hasattr(record, "extra_fields"):
            log_data.update(record.extra_fields)

        if record.exc_info:
            log_data["exception"] = self.formatException(record.exc_info)

        log_data["source"] = {
            "file": record.pathname,
            "line": record.lineno,
            "function": record.funcName,
        }

        return json.dumps(log_data, default=str)


class StructuredLogger(logging.LoggerAdapter):
    """Logger adapter that adds structured context."""

    def process(
        self, msg: str, kwargs: Dict[str, Any]
    ) -> tuple[str, Dict[str, Any]]:
        """Merge adapter context and call-site extras into extra_fields."""
        extra = dict(self.extra or {})
        extra.update(kwargs.get("extra") or {})
        kwargs["extra"] = {"extra_fields": extra}
        return msg, kwargs


def setup_logging(
    level: str = "INFO",
    json_format: bool = True,
    log_file: Optional[str] = None,
) -> None:
    """
    Configure structured logging for the process.

    Args:
        level: Log level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        json_format: Use JSON formatting if True, plain text if False
        log_file: Optional file path for file logging
    """
    log_level = getattr(logging, level.upper(), logging.INFO)

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)
    root_logger.handlers.clear()

    # Log lines go to stderr; stdout carries command results
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(log_level)

    if json_format:
        console_handler.setFormatter(StructuredFormatter())
    else:
        console_handler.setFormatter(
            logging.Formatter(
                "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
            )
        )

    root_logger.addHandler(console_handler)

    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(log_level)
        file_handler.setFormatter(StructuredFormatter())
        root_logger.addHandler(file_handler)

    logging.getLogger("asyncio").setLevel(logging.WARNING)


def get_logger(name: str, **context: Any) -> StructuredLogger:
    """
    Get a structured logger with context.

    Args:
        name: Logger name (usually __name__)
        **context: Additional context fields

    Returns:
        StructuredLogger instance
    """
    return StructuredLogger(logging.getLogger(name), context)


def set_run_context(
    run_id: Optional[str] = None,
    solver: Optional[str] = None,
    instance: Optional[str] = None,
) -> None:
    """Set context variables for the current solve."""
    if run_id:
        run_id_var.set(run_id)
    if solver:
        solver_var.set(solver)
    if instance:
        instance_var.set(instance)


def clear_run_context() -> None:
    """Clear all run context variables."""
    run_id_var.set(None)
    solver_var.set(None)
    instance_var.set(None)


@contextmanager
def run_context(
    run_id: Optional[str] = None,
    solver: Optional[str] = None,
    instance: Optional[str] = None,
) -> Iterator[None]:
    """Scope run context variables to a block, restoring them afterwards."""
    tokens = [
        (var, var.set(value))
        for var, value in (
            (run_id_var, run_id),
            (solver_var, solver),
            (instance_var, instance),
        )
        if value
    ]
    try:
        yield
    finally:
        for var, token in reversed(tokens):
            var.reset(token)
