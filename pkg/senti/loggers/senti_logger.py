import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path

from appdirs import user_data_dir
from rich.console import Console
from rich.logging import RichHandler

LOG_FILE = Path(user_data_dir()) / "senti" / "logs" / "senti.log"
FILE_FORMAT = "%(asctime)s %(levelname)s %(message)s"


def configure_logging(verbose: bool = False, log_file: Path | None = LOG_FILE) -> logging.Logger:
    """Root logger writing to a rotating log file and to stderr through rich.

    The file always records INFO and up; the console shows WARNING and up, or
    everything with `verbose`. Calling it again replaces the handlers.
    """
    logger = logging.getLogger()
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    for handler in list(logger.handlers):
        if getattr(handler, "_senti", False):
            logger.removeHandler(handler)
            handler.close()

    console = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=True)
    console.setLevel(logging.DEBUG if verbose else logging.WARNING)
    console._senti = True
    logger.addHandler(console)

    if log_file is not None:
        try:
            log_file.parent.mkdir(parents=True, exist_ok=True)
            handler = RotatingFileHandler(filename=log_file, maxBytes=100_000, backupCount=2, encoding="utf-8")
        except OSError as error:
            logger.warning(f"logging to the console only, cannot open {log_file}: {error}")
        else:
            handler.setFormatter(logging.Formatter(FILE_FORMAT))
            handler.setLevel(logging.DEBUG if verbose else logging.INFO)
            handler._senti = True
            logger.addHandler(handler)
    return logger
