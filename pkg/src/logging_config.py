"""Structured logging configuration for PRAC runs."""
import logging
import json
import sys
from datetime import datetime
from typing import Any


class JSONFormatter(logging.Formatter):
    """Custom JSON formatter for structured logging."""

    def format(self, record: logging.LogRecord) -> str:
        """Format log record as JSON."""
        log_data = {
            "timestamp": datetime.utcnow().isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "module": record.module,
            "function": record.funcName,
            "line": record.lineno,
        }

        # Add extra fields if present
        if hasattr(record, "extra_data"):
            log_data.update(record.extra_data)

        return json.dumps(log_data, default=str)


def setup_logging(log_level: str = "INFO", json_output: bool = True):
    """Configure logging for the toolkit.

    Logs go to stderr so that CSV written to stdout stays clean.
    """
    handler = logging.StreamHandler(sys.stderr)
    if json_output:
        handler.setFormatter(JSONFormatter())
    else:
        handler.setFormatter(logging.Formatter("%(levelname)s:%(name)s:%(message)s"))
    handler.setLevel(log_level)

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)
    # Repeated CLI invocations in one process (tests) must not stack handlers
    for existing in list(root_logger.handlers):
        if getattr(existing, "_prac_handler", False):
            root_logger.removeHandler(existing)
    handler._prac_handler = True
    root_logger.addHandler(handler)

    logging.getLogger("asyncio").setLevel(logging.WARNING)


def log_prac_operation(
    logger: logging.Logger,
    operation: str,
    round_index: int | None = None,
    details: dict[str, Any] | None = None,
):
    """
    Log protocol milestones with structured data.

    Args:
        logger: Logger instance
        operation: Operation name (e.g., "decode_complete", "stop_broadcast")
        round_index: Round index if applicable
        details: Additional operation details
    """
    log_data = {
        "operation": operation,
        "round": round_index,
        "details": details or {},
    }

    extra = {"extra_data": log_data}
    logger.info(f"PRAC operation: {operation}", extra=extra)
