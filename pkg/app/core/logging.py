"""
Centralized logging configuration module.
Provides consistent logging setup across the library and the CLI.
"""

import logging
import sys

_level = logging.INFO


def set_level(level: int) -> None:
    """
    Change the level of every logger created through this module.

    Args:
        level: A logging level such as logging.DEBUG
    """
    global _level
    _level = level
    for name in list(logging.root.manager.loggerDict):
        if name == "app" or name.startswith("app."):
            logging.getLogger(name).setLevel(level)


def setup_logger(name: str) -> logging.Logger:
    """
    Configure and return a logger with consistent formatting.

    Args:
        name: The name of the logger (typically __name__ from calling module)

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)
    logger.setLevel(_level)

    # One handler per named logger, stdout is reserved for the CLI summary lines
    if not logger.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("      %(levelname)-5s  %(message)s"))
        logger.addHandler(handler)
        logger.propagate = False

    return logger


def get_logger(name: str) -> logging.Logger:
    """Get or create a logger with the standard configuration."""
    return setup_logger(name)
