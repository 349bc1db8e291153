"""
Monitoring & Observability
Structured logging and latency measurement
"""
import logging
import sys
import time
from functools import wraps

import structlog


def configure_logging(level: str = "WARNING", json: bool = True) -> None:
    """Configure structlog on top of stdlib logging (stderr only, stdout carries results)"""
    logging.basicConfig(
        level=getattr(logging, level),
        format="%(message)s",
        stream=sys.stderr,
        force=True
    )

    renderer = structlog.processors.JSONRenderer() if json else structlog.dev.ConsoleRenderer()
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.stdlib.add_log_level,
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            renderer
        ],
        wrapper_class=structlog.stdlib.BoundLogger,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )


def measure_latency(func):
    """Decorator to log function latency"""
    logger = structlog.get_logger(func.__module__)

    @wraps(func)
    def wrapper(*args, **kwargs):
        start = time.perf_counter()
        result = func(*args, **kwargs)
        latency_ms = (time.perf_counter() - start) * 1000
        logger.debug("latency", operation=func.__name__, latency_ms=round(latency_ms, 2))
        return result

    return wrapper
