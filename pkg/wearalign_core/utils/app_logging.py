import logging
import os

ROOT_LOGGER = "wearalign"


def setup_logger(name: str = ROOT_LOGGER, level: str | int | None = None) -> logging.Logger:
    root = logging.getLogger(ROOT_LOGGER)
    if not root.handlers:
        handler = logging.StreamHandler()
        fmt = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"
        handler.setFormatter(logging.Formatter(fmt))
        root.addHandler(handler)
        root.setLevel(os.getenv("WEARALIGN_LOG_LEVEL", "INFO").upper())
        root.propagate = False
    if level is not None:
        root.setLevel(level.upper() if isinstance(level, str) else level)
    if name == ROOT_LOGGER or name.startswith(ROOT_LOGGER + "."):
        return logging.getLogger(name)
    # module names like wearalign_core.data.cleaning -> wearalign.data.cleaning
    return logging.getLogger(f"{ROOT_LOGGER}.{name.split('.', 1)[-1]}")


def log_kv(logger: logging.Logger, event: str, level: int = logging.INFO, **kv) -> None:
    logger.log(level, event + ("" if not kv else " " + " ".join(f"{k}={v}" for k, v in kv.items())))


def progress_disabled() -> bool:
    return logging.getLogger(ROOT_LOGGER).getEffectiveLevel() > logging.INFO
