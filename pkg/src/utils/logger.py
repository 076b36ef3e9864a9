"""Logging configuration for the urban change agent."""
import logging
import os
from datetime import datetime

from rich.logging import RichHandler

LOG_DIR = os.environ.get("URBAN_AGENT_LOG_DIR", "logs")
LOG_LEVEL = os.environ.get("URBAN_AGENT_LOG_LEVEL", "INFO")
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

_loggers = {}
_state = {"log_dir": LOG_DIR, "console_level": logging.WARNING}


def _file_handler(log_dir):
    os.makedirs(log_dir, exist_ok=True)
    current_date = datetime.now().strftime('%Y-%m-%d')
    handler = logging.FileHandler(os.path.join(log_dir, f'urban-agent-{current_date}.log'), delay=True)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    return handler


def _console_handler(level):
    handler = RichHandler(show_path=False, rich_tracebacks=False, markup=False)
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter('%(name)s - %(message)s'))
    return handler


def setup_logger(name):
    """Return the module logger, attaching a dated file handler and a rich console handler once."""
    logger = logging.getLogger(name)
    if name in _loggers:
        return logger
    logger.setLevel(LOG_LEVEL)
    logger.addHandler(_file_handler(_state["log_dir"]))
    logger.addHandler(_console_handler(_state["console_level"]))
    logger.propagate = False
    _loggers[name] = logger
    return logger


def configure_logging(log_dir=None, console_level=None):
    """Point every logger created so far (and later) at a new log directory or console level."""
    if log_dir is not None:
        _state["log_dir"] = log_dir
    if console_level is not None:
        _state["console_level"] = console_level
    for logger in _loggers.values():
        for handler in list(logger.handlers):
            logger.removeHandler(handler)
            handler.close()
        logger.addHandler(_file_handler(_state["log_dir"]))
        logger.addHandler(_console_handler(_state["console_level"]))
    return dict(_state)
