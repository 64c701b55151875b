"""Logging setup for command-line use."""
import logging
from typing import Optional

from rich.console import Console
from rich.logging import RichHandler


def configure_logging(level: int = logging.WARNING, console: Optional[Console] = None) -> None:
    """
    Attach a rich handler to the package logger.

    Library modules only create loggers; handlers are installed here,
    once, by the CLI.

    Args:
        level: Logging level for the ``cife`` logger
        console: Console to render to (stderr console by default)
    """
    logger = logging.getLogger("cife")
    logger.setLevel(level)
    for handler in list(logger.handlers):
        if isinstance(handler, RichHandler):
            logger.removeHandler(handler)
    handler = RichHandler(
        console=console or Console(stderr=True),
        show_path=False,
        rich_tracebacks=False,
    )
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    logger.propagate = False
