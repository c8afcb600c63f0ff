# wearalign_core/utils/errors.py
from __future__ import annotations

from typing import Any, Optional


class WearAlignError(Exception):
    pass


# ---------- data pipeline ----------
class ChannelAllInvalid(WearAlignError, ValueError):
    def __init__(self, channel: int, n_valid: int):
        super().__init__(f"channel {channel} has {n_valid} valid entries (need >= 2)")
        self.channel = channel
        self.n_valid = n_valid


class ShapeMismatch(WearAlignError, ValueError):
    pass


class EmptyInput(WearAlignError, ValueError):
    pass


class MissingStats(WearAlignError, ValueError):
    pass


class InvalidGeometry(WearAlignError, ValueError):
    pass


class MissingFile(WearAlignError, FileNotFoundError):
    pass


class FormatError(WearAlignError, ValueError):
    def __init__(self, message: str, file: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[int] = None):
        where = " ".join(
            f"{k}={v}" for k, v in (("file", file), ("line", line), ("column", column)) if v is not None
        )
        super().__init__(f"{message}" + (f" [{where}]" if where else ""))
        self.file = file
        self.line = line
        self.column = column


class InvalidConfig(WearAlignError, ValueError):
    pass


class UnknownUser(WearAlignError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown user"


class SingleUserDataset(WearAlignError, ValueError):
    pass


# ---------- model / training ----------
class GeometryError(WearAlignError, ValueError):
    pass


class UnlabeledSample(WearAlignError, ValueError):
    pass


class MissingSourceLabels(WearAlignError, ValueError):
    pass


class SingleSourceBatch(WearAlignError, ValueError):
    pass


class NonFiniteLoss(WearAlignError, ArithmeticError):
    def __init__(self, step: str, iteration: int, value: Any):
        super().__init__(f"non-finite loss in {step} at iteration {iteration}: {value}")
        self.step = step
        self.iteration = iteration
        self.value = value


class UnknownVariant(WearAlignError, ValueError):
    pass


# ---------- evaluation ----------
class LengthMismatch(WearAlignError, ValueError):
    pass


class IndexOutOfRange(WearAlignError, IndexError):
    pass


class VariantWithoutAttention(WearAlignError, ValueError):
    pass


class ProtocolViolation(WearAlignError, AssertionError):
    pass


class LouoAborted(WearAlignError, RuntimeError):
    """Raised when a fold fails; `report` holds the folds completed so far."""

    def __init__(self, message: str, report: Any):
        super().__init__(message)
        self.report = report


# ---------- cli ----------
class RunDirectoryExists(WearAlignError, FileExistsError):
    pass


class StoreExists(WearAlignError, FileExistsError):
    pass
