"""Exception hierarchy shared by all flow stages."""

from __future__ import annotations


class UlbmapError(Exception):
    """Base class for every error raised by the mapping flow."""


class QasmError(UlbmapError):
    def __init__(self, message: str, lineno: int | None = None) -> None:
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class MalformedLine(QasmError):
    pass


class UnknownOpcode(QasmError):
    pass


class UndeclaredQubit(QasmError):
    pass


class ArityMismatch(QasmError):
    pass


class DuplicateQubit(QasmError):
    pass


class LayoutError(UlbmapError):
    """Template layout table is malformed or disconnected."""


class UnknownWell(UlbmapError):
    pass


class CycleDetected(UlbmapError):
    pass


class Infeasible(UlbmapError):
    pass


class TooLarge(UlbmapError):
    pass


class SingularSystem(UlbmapError):
    pass


class Overcapacity(UlbmapError):
    pass


class NoCreationWell(UlbmapError):
    pass


class HorizonExceeded(UlbmapError):
    """Deferral loop pushed the schedule past its level cap."""


class Deadlock(UlbmapError):
    pass


class NoFeasibleSize(UlbmapError):
    pass


class CommandFormatError(UlbmapError):
    pass
