"""Replay a command stream against the fabric rules.

This checker is written separately from the router on purpose and shares
none of its bookkeeping, so it can catch router or placer mistakes.
"""

from __future__ import annotations

import json
import re
from collections import defaultdict
from dataclasses import asdict, dataclass, field

from .errors import CommandFormatError, UnknownWell
from .fabric import FabricGraph, WellKind
from .qasm import QubitKind
from .qidg import Qidg

_POS = r"\((\d+),(\d+)\)"
_MOVE = re.compile(rf"^(\d+)\s+MOVE\s+q(\d+)\s+{_POS}\s*->\s*{_POS}$")
_CREATE = re.compile(rf"^(\d+)\s+CREATE\s+q(\d+)\s+{_POS}$")
_OP = re.compile(rf"^(\d+)\s+OP\s+(\S+)\s+I(\d+)\s+{_POS}((?:\s+q\d+)+)$")


@dataclass(frozen=True)
class Cmd:
    time: int
    kind: str
    qubits: tuple[int, ...]
    src: tuple[int, int] | None
    dst: tuple[int, int]
    instr: int | None = None
    opcode: str | None = None
    text: str = ""


def parse_stream(text: str) -> list[Cmd]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if m := _MOVE.match(line):
            t, q, r0, c0, r1, c1 = map(int, m.groups())
            out.append(Cmd(t, "MOVE", (q,), (r0, c0), (r1, c1), text=line))
        elif m := _CREATE.match(line):
            t, q, r, c = map(int, m.groups())
            out.append(Cmd(t, "CREATE", (q,), None, (r, c), text=line))
        elif m := _OP.match(line):
            t, opcode, k, r, c, qs = m.groups()
            qubits = tuple(int(x[1:]) for x in qs.split())
            out.append(Cmd(int(t), "OP", qubits, None, (int(r), int(c)), int(k), opcode, line))
        else:
            raise CommandFormatError(f"line {lineno}: cannot parse {line!r}")
    return out


@dataclass
class Violation:
    time: int
    rule: str
    command: str
    detail: str = ""


@dataclass
class Report:
    ok: bool
    total_latency: int
    violations: list[Violation] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    def to_text(self) -> str:
        lines = [f"ok: {str(self.ok).lower()}", f"total_latency_us: {self.total_latency}"]
        for v in self.violations:
            lines.append(f"{v.time} {v.rule} {v.command} {v.detail}".rstrip())
        return "\n".join(lines) + "\n"


def validate(stream, fabric: FabricGraph, g: Qidg) -> Report:
    """Check a stream (text or parsed commands) and recompute its latency."""
    cmds = parse_stream(stream) if isinstance(stream, str) else list(stream)
    cfg = fabric.config
    names = [d.name for d in g.decls]
    kinds = [d.kind for d in g.decls]
    ports = set(fabric.ports)
    bad: list[Violation] = []

    def flag(c: Cmd, rule: str, detail: str = "") -> None:
        bad.append(Violation(c.time, rule, c.text or c.kind, detail))

    def well_id(c: Cmd, pos) -> int | None:
        try:
            return fabric.well_at(*pos)
        except UnknownWell:
            flag(c, "UnknownWell", str(pos))
            return None

    uses: dict[int, int] = defaultdict(int)  # instructions per qubit
    for n in g.nodes.values():
        for q in n.operands:
            uses[names.index(q)] += 1
    last_cmd: dict[int, int] = {}
    for pos, c in enumerate(cmds):
        for q in c.qubits:
            last_cmd[q] = pos

    loc: dict[int, int] = {}          # present qubits -> well
    busy_until: dict[int, int] = defaultdict(int)
    done_ops: dict[int, int] = defaultdict(int)  # per qubit
    occupancy: dict[int, int] = defaultdict(int)
    reserved: dict[int, int] = defaultdict(int)  # well -> reserved until
    in_flight: list[tuple[int, int, int, int, int]] = []  # end, q, a, b, cmd pos
    running: list[tuple[int, int]] = []  # end, instr
    finished: dict[int, int] = {}
    started: set[int] = set()
    seen: set[int] = set()            # qubits that ever appeared
    latest = 0

    def retire(now: int) -> None:
        nonlocal in_flight, running
        for end, q, a, b, pos in sorted(x for x in in_flight if x[0] <= now):
            loc[q] = b
            if kinds[q] is QubitKind.IO and last_cmd.get(q) == pos and b in ports \
                    and done_ops[q] == uses[q]:
                occupancy[b] -= 1
                del loc[q]
        in_flight = [x for x in in_flight if x[0] > now]
        for end, i in sorted(x for x in running if x[0] <= now):
            finished[i] = end
            for name in g.nodes[i].operands:
                q = names.index(name)
                done_ops[q] += 1
                if kinds[q] is QubitKind.ANCILLA and done_ops[q] == uses[q] and q in loc:
                    occupancy[loc[q]] -= 1
                    del loc[q]
        running = [x for x in running if x[0] > now]

    def touching(w: int, now: int) -> bool:
        return any(end > now and w in (a, b) for end, _, a, b, _ in in_flight)

    # within one instant: creations, then every departure, then arrivals and
    # operations, so a qubit leaving a well frees its slot for one entering
    rank = {"CREATE": 0, "MOVE": 1, "OP": 2}
    ordered = sorted(enumerate(cmds), key=lambda pc: (pc[1].time, rank[pc[1].kind], pc[0]))
    moves_at: dict[int, list[tuple[int, Cmd]]] = defaultdict(list)
    for p2, c2 in ordered:
        if c2.kind == "MOVE":
            moves_at[c2.time].append((p2, c2))
    departed: set[int] = set()
    current = None
    for pos, c in ordered:
        now = c.time
        if now != current:
            current = now
            retire(now)
            departed = set()
            for p2, c2 in moves_at.get(now, ()):
                q2 = c2.qubits[0]
                try:
                    a2 = fabric.well_at(*c2.src)
                except UnknownWell:
                    continue
                if loc.get(q2) == a2 and busy_until[q2] <= now and p2 not in departed:
                    occupancy[a2] -= 1
                    departed.add(p2)
        if any(q >= len(names) for q in c.qubits):
            flag(c, "UnknownQubit")
            continue
        if c.kind == "CREATE":
            q = c.qubits[0]
            w = well_id(c, c.dst)
            if w is None:
                continue
            if fabric.kind(w) is not WellKind.CREATION:
                flag(c, "CreateNotAtCreationWell")
            if kinds[q] is not QubitKind.ANCILLA:
                flag(c, "CreateIOQubit")
            if q in seen:
                flag(c, "DuplicateCreate")
            if reserved[w] > now or touching(w, now):
                flag(c, "ReservedWell")
            seen.add(q)
            loc[q] = w
            occupancy[w] += 1
            if occupancy[w] > cfg.well_capacity:
                flag(c, "CapacityExceeded", f"{occupancy[w]} in {c.dst}")
            reserved[w] = max(reserved[w], now + cfg.create_delay)
            busy_until[q] = now + cfg.create_delay
            latest = max(latest, now + cfg.create_delay)
        elif c.kind == "MOVE":
            q = c.qubits[0]
            a, b = well_id(c, c.src), well_id(c, c.dst)
            if a is None or b is None:
                continue
            if not fabric.adjacent(a, b):
                flag(c, "NonAdjacentMove")
            entering = False
            if q not in loc:
                if q in seen:
                    flag(c, "OperandNotPresent", "qubit no longer on the fabric")
                elif kinds[q] is QubitKind.IO:
                    if a not in ports:
                        flag(c, "NotAPort")
                    entering = True
                else:
                    flag(c, "OperandNotPresent", "ancilla never created")
                seen.add(q)
            elif loc[q] != a:
                flag(c, "WrongLocation", f"qubit is at {fabric.well(loc[q]).pos}")
            if busy_until[q] > now:
                flag(c, "QubitBusy")
            if reserved[a] > now or reserved[b] > now:
                flag(c, "ReservedWell")
            same = [x for x in in_flight if x[0] > now and {x[2], x[3]} == {a, b}]
            if any(x[2] != a for x in same):
                flag(c, "HalfDuplex")
            if len(same) >= cfg.channel_capacity:
                flag(c, "ChannelCapacity")
            if not entering and q in loc and pos not in departed:
                occupancy[loc[q]] -= 1
            occupancy[b] += 1
            if occupancy[b] > cfg.well_capacity:
                flag(c, "CapacityExceeded", f"{occupancy[b]} in {c.dst}")
            loc[q] = a  # in the channel until arrival
            in_flight.append((now + cfg.move_delay, q, a, b, pos))
            busy_until[q] = now + cfg.move_delay
            latest = max(latest, now + cfg.move_delay)
        else:
            i = c.instr
            w = well_id(c, c.dst)
            if w is None:
                continue
            node = g.nodes.get(i)
            if node is None:
                flag(c, "UnknownInstruction")
                continue
            if i in started:
                flag(c, "DuplicateOp")
            started.add(i)
            want = tuple(names.index(n) for n in node.operands)
            if c.opcode.upper() != node.opcode.upper() or c.qubits != want:
                flag(c, "OperandMismatch", f"expected {node.opcode} {want}")
            if fabric.kind(w) is not WellKind.INTERACTION:
                flag(c, "OpNotAtInteractionWell")
            for p in g.parents[i]:
                if p not in finished or finished[p] > now:
                    flag(c, "DependencyViolation", f"parent {p} not finished")
            for q in want:
                if loc.get(q) != w or busy_until[q] > now:
                    flag(c, "OperandNotPresent", f"q{q}")
            if reserved[w] > now or touching(w, now):
                flag(c, "ReservedWell")
            end = now + node.duration
            reserved[w] = end
            for q in want:
                busy_until[q] = end
            running.append((end, i))
            latest = max(latest, end)
    retire(latest)
    for i in sorted(g.nodes):
        if i not in started:
            bad.append(Violation(latest, "MissingOp", f"I{i}"))
    return Report(not bad, latest, bad)
