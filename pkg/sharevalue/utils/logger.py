import sys
from pathlib import Path
from typing import Optional

from loguru import logger


# Configure Loguru
def setup_logger(
    log_level: str = "INFO",
    log_file: Optional[str] = None,
    json_logs: bool = False,
    rotation: str = "10 MB",
    retention: str = "30 days",
    compression: str = "zip"
):
    """
    Setup Loguru logger for command line runs.

    Library modules only emit records; sinks are installed here, once, by
    the entry point.

    Args:
        log_level: Minimum log level to display
        log_file: Path to log file (if None, only console logging)
        json_logs: Whether to serialize file records as JSON
        rotation: Log rotation policy
        retention: Log retention policy
        compression: Log compression format
    """
    # Remove default handler
    logger.remove()

    log_format = (
        "<green>{time:YYYY-MM-DD HH:mm:ss.SSS}</green> | "
        "<level>{level: <8}</level> | "
        "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> | "
        "<level>{message}</level>"
    )

    # Console handler (stderr keeps stdout free for command output)
    logger.add(
        sys.stderr,
        format=log_format,
        level=log_level.upper(),
        colorize=sys.stderr.isatty(),
        backtrace=False,
        diagnose=False
    )

    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)

        logger.add(
            log_path,
            format="{time:YYYY-MM-DD HH:mm:ss.SSS} | {level} | {name}:{function}:{line} | {message} | {extra}",
            level=log_level.upper(),
            rotation=rotation,
            retention=retention,
            compression=compression,
            backtrace=True,
            diagnose=False,
            serialize=json_logs
        )

    logger.debug("Logging configured at level {}", log_level.upper())
