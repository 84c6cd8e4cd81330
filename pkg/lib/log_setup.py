import logging
from logging.handlers import RotatingFileHandler
import os
import sys

# Create a custom logger
logger = logging.getLogger("fkm")

logger.setLevel(logging.INFO)
logger.propagate = False

formatter = logging.Formatter('[%(asctime)s] %(levelname)s - %(message)s',
                              datefmt='%Y-%m-%d %H:%M:%S')

# stdout is reserved for command summaries
console_handler = logging.StreamHandler(sys.stderr)
console_handler.setLevel(logging.DEBUG)
console_handler.setFormatter(formatter)
logger.addHandler(console_handler)

file_handler = None


def set_level(level):
    """Accepts a level name ("DEBUG", "info", ...) or a logging constant."""
    if isinstance(level, str):
        resolved = logging.getLevelName(level.upper())
        if not isinstance(resolved, int):
            logger.warning(f"Unknown log level '{level}', keeping {logging.getLevelName(logger.level)}")
            return
        level = resolved
    logger.setLevel(level)


def add_file_handler(path):
    global file_handler

    if not path:
        return
    if file_handler is not None:
        if file_handler.baseFilename == os.path.abspath(path):
            return
        logger.removeHandler(file_handler)
        file_handler.close()

    file_handler = RotatingFileHandler(path, maxBytes=500000, backupCount=10)
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(formatter)
    logger.addHandler(file_handler)


add_file_handler(os.environ.get("FKM_LOG_FILE"))


# Custom exception handler to log unhandled exceptions
def log_unhandled_exception(exc_type, exc_value, exc_traceback):
    if issubclass(exc_type, KeyboardInterrupt):
        sys.__excepthook__(exc_type, exc_value, exc_traceback)
        return
    logger.error("Unhandled Exception: ", exc_info=(exc_type, exc_value, exc_traceback))


sys.excepthook = log_unhandled_exception
