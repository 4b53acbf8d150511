import logging
import os
import colorlog

LOGGER_NAME = "truncvar"

# Levels accepted from TRUNCVAR_LOG_LEVEL and --log-level
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")
DEFAULT_LEVEL = "INFO"


def setup_logger(name: str = LOGGER_NAME):
    """Set up a single logger for all modules."""

    # Logs to console; colorlog's handler writes to stderr, so CLI stdout stays machine-readable
    console_log_handler = colorlog.StreamHandler()
    console_log_handler.setFormatter(
        colorlog.ColoredFormatter(
            "%(log_color)s%(asctime)s - %(levelname)s - %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
            log_colors={
                "DEBUG": "cyan",
                "INFO": "green",
                "WARNING": "yellow",
                "ERROR": "red",
                "CRITICAL": "red,bg_white",
            },
        )
    )
    logger = colorlog.getLogger(name)

    # Log config
    if not logger.hasHandlers():
        logger.addHandler(console_log_handler)  # Console
    _apply_level(logger, os.environ.get("TRUNCVAR_LOG_LEVEL", DEFAULT_LEVEL))

    return logger


def _apply_level(logger: logging.Logger, level_name: str) -> None:
    name = level_name.strip().upper()
    if name not in LOG_LEVELS:
        logger.setLevel(DEFAULT_LEVEL)
        logger.warning(f"Unknown log level {level_name!r}, using {DEFAULT_LEVEL}")
        return
    logger.setLevel(name)


def set_level(level_name: str) -> None:
    """Change the level of the shared logger, e.g. from a --log-level flag or .env.local."""
    _apply_level(log, level_name)


# Create a global logger instance
log = setup_logger()
