# wearalign_core/config/path_utils.py
import re
from pathlib import Path, PurePosixPath

_UNSAFE = re.compile(r"[^A-Za-z0-9._-]")


def project_root() -> Path:
    # .../wearalign_core/config/path_utils.py -> parents[2]
    return Path(__file__).resolve().parents[2]


def as_project_relative(p: str | None, default_rel: str) -> str:
    """POSIX path relative to the project root, as stored in CONFIG["paths"]."""
    cand = (p or default_rel).strip().replace("\\", "/").lstrip("/")
    return str(PurePosixPath(cand))


def to_abs(p: str | Path) -> Path:
    """
    Filesystem path for a CONFIG or CLI path: absolute paths pass through,
    relative ones hang off the project root. Never written back into CONFIG.
    """
    path = Path(p).expanduser()
    return path if path.is_absolute() else project_root() / path


def safe_filename(name: str, suffix: str = "") -> str:
    """User and window ids come from raw file names; keep them usable as file names."""
    return _UNSAFE.sub("_", name) + suffix
