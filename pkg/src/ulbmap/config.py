"""Technology parameters and config-file loading."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .qasm import DurationClass, lookup_opcode


@dataclass(frozen=True)
class FabricConfig:
    """Fabric geometry and trapped-ion timing (delays in microseconds)."""

    ulb_n: int = 1
    template_rows: int = 11
    template_cols: int = 11
    well_capacity: int = 5
    channel_capacity: int = 5
    move_delay: int = 10
    one_qubit_delay: int = 50
    two_qubit_delay: int = 100
    create_delay: int = 0
    layout: str | None = None  # path to a template layout file; None = built-in

    def __post_init__(self) -> None:
        for name in ("ulb_n", "template_rows", "template_cols", "well_capacity",
                     "channel_capacity", "move_delay", "one_qubit_delay", "two_qubit_delay"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.well_capacity < 2:
            raise ValueError("well_capacity must be >= 2 (two-qubit ops need co-residency)")
        if self.create_delay < 0:
            raise ValueError("create_delay must be >= 0")

    def duration(self, opcode: str) -> int:
        info = lookup_opcode(opcode)
        if info is None:
            raise KeyError(opcode)
        if info.duration_class is DurationClass.ONE_QUBIT:
            return self.one_qubit_delay
        return self.two_qubit_delay

    @property
    def fastest_instruction(self) -> int:
        return min(self.one_qubit_delay, self.two_qubit_delay)


def _coerce(value: str, like: Any) -> Any:
    if isinstance(like, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    if isinstance(like, tuple):
        return tuple(float(v) for v in value.replace(",", " ").split())
    return value.strip()


def _guess(value: str) -> Any:
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value.strip()


def read_key_values(path: str | Path) -> dict[str, str]:
    """Read a ``key = value`` file; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def apply_overrides(obj, values: Mapping[str, Any]):
    """Return a copy of dataclass ``obj`` with matching keys replaced.

    String values are coerced to the type of the existing field value; unknown
    keys are ignored so one file can configure several stages.
    """
    changes = {}
    for f in dataclasses.fields(obj):
        if f.name in values and values[f.name] is not None:
            v = values[f.name]
            current = getattr(obj, f.name)
            if isinstance(v, str) and current is not None and not isinstance(current, str):
                v = _coerce(v, current)
            elif isinstance(v, str) and current is None:
                v = _guess(v)
            changes[f.name] = v
    return dataclasses.replace(obj, **changes)
