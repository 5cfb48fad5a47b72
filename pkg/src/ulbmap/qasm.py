"""Reader/writer for the flat QASM dialect used by FT-operation circuits.

A file is a block of ``QUBIT <name>, <0|1|+|-> [io]`` declarations followed by
one instruction per line (``<OPCODE> <q>[, <q>]``).  For two-qubit opcodes the
first operand is the control and the second the target.  Qubits without the
``io`` flag are ancillas.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable

from .errors import (
    ArityMismatch,
    DuplicateQubit,
    MalformedLine,
    UndeclaredQubit,
    UnknownOpcode,
)


class InitialState(enum.Enum):
    ZERO = "0"
    ONE = "1"
    PLUS = "+"
    MINUS = "-"


class QubitKind(enum.Enum):
    IO = "io"
    ANCILLA = "ancilla"


class DurationClass(enum.Enum):
    ONE_QUBIT = "one_qubit"
    TWO_QUBIT = "two_qubit"


@dataclass(frozen=True)
class OpcodeInfo:
    name: str
    arity: int
    duration_class: DurationClass


_REGISTRY: dict[str, OpcodeInfo] = {}


def register_opcode(name: str, arity: int, duration_class: DurationClass | None = None) -> OpcodeInfo:
    """Add an opcode to the registry (lookup is case-insensitive)."""
    if arity not in (1, 2):
        raise ValueError(f"arity must be 1 or 2, got {arity}")
    if duration_class is None:
        duration_class = DurationClass.ONE_QUBIT if arity == 1 else DurationClass.TWO_QUBIT
    info = OpcodeInfo(name, arity, duration_class)
    _REGISTRY[name.upper()] = info
    return info


def lookup_opcode(name: str) -> OpcodeInfo | None:
    return _REGISTRY.get(name.upper())


for _name in ("H", "X", "Y", "Z", "S", "Sdag", "T", "Tdag"):
    register_opcode(_name, 1)
for _name in ("CNOT", "CZ", "CY"):
    register_opcode(_name, 2)


@dataclass(frozen=True)
class QubitDecl:
    name: str
    initial_state: InitialState = InitialState.ZERO
    kind: QubitKind = QubitKind.ANCILLA


@dataclass(frozen=True)
class RawInstruction:
    index: int  # 1-based, file order
    opcode: str
    operands: tuple[str, ...]
    lineno: int = field(default=0, compare=False)

    @property
    def arity(self) -> int:
        return len(self.operands)


_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_\[\]\.]*$")
_SPLIT = re.compile(r"[,\s]+")


def _tokens(rest: str) -> list[str]:
    return [t for t in _SPLIT.split(rest.strip()) if t]


def parse(text: str) -> tuple[list[QubitDecl], list[RawInstruction]]:
    """Parse QASM text into declarations and instructions.

    Raises one of the :class:`~ulbmap.errors.QasmError` subclasses, each
    carrying the offending line number.
    """
    decls: list[QubitDecl] = []
    declared: dict[str, QubitDecl] = {}
    instrs: list[RawInstruction] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, rest = re.match(r"(\S+)\s*(.*)", line).groups()
        if head.upper() == "QUBIT":
            if instrs:
                raise MalformedLine("declaration after first instruction", lineno)
            toks = _tokens(rest)
            if len(toks) not in (2, 3):
                raise MalformedLine(f"expected 'QUBIT <name>, <state> [io]', got {raw.strip()!r}", lineno)
            name, state = toks[0], toks[1]
            if not _IDENT.match(name):
                raise MalformedLine(f"bad qubit name {name!r}", lineno)
            try:
                init = InitialState(state)
            except ValueError:
                raise MalformedLine(f"bad initial state {state!r}", lineno) from None
            kind = QubitKind.ANCILLA
            if len(toks) == 3:
                if toks[2].lower() != "io":
                    raise MalformedLine(f"unknown declaration flag {toks[2]!r}", lineno)
                kind = QubitKind.IO
            if name in declared:
                raise DuplicateQubit(f"qubit {name!r} declared twice", lineno)
            decl = QubitDecl(name, init, kind)
            declared[name] = decl
            decls.append(decl)
            continue

        info = lookup_opcode(head)
        if info is None:
            raise UnknownOpcode(f"unknown opcode {head!r}", lineno)
        operands = _tokens(rest)
        if len(operands) != info.arity:
            raise ArityMismatch(
                f"{info.name} takes {info.arity} operand(s), got {len(operands)}", lineno
            )
        for q in operands:
            if q not in declared:
                raise UndeclaredQubit(f"qubit {q!r} is not declared", lineno)
        if len(set(operands)) != len(operands):
            raise ArityMismatch(f"{info.name} repeats an operand", lineno)
        instrs.append(RawInstruction(len(instrs) + 1, info.name, tuple(operands), lineno))

    return decls, instrs


def parse_file(path) -> tuple[list[QubitDecl], list[RawInstruction]]:
    with open(path, encoding="ascii") as fh:
        return parse(fh.read())


def dumps(decls: Iterable[QubitDecl], instrs: Iterable[RawInstruction]) -> str:
    lines = []
    for d in decls:
        suffix = " io" if d.kind is QubitKind.IO else ""
        lines.append(f"QUBIT {d.name}, {d.initial_state.value}{suffix}")
    for ins in instrs:
        lines.append(f"{ins.opcode} {', '.join(ins.operands)}")
    return "\n".join(lines) + ("\n" if lines else "")
