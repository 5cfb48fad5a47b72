"""Static shortest-path routes and a greedy discrete-event router.

The router replays the placed circuit in time.  Each qubit walks the BFS
path to the well of its next instruction, one channel hop per move, and
stalls whenever the next hop would break a fabric rule:

* a well never holds more than ``well_capacity`` qubits (a qubit counts in
  its destination from the moment it enters the channel);
* a channel carries traffic in one direction at a time and at most
  ``channel_capacity`` qubits at once;
* nothing moves into or out of a well while it runs an operation or a
  creation.

Instructions at one well execute in (level, index) order.  A qubit enters
the well of its next instruction only once that instruction is next in
line there; before that it waits one hop short.  Qubits that are not
headed for a next-in-line instruction also leave ``head_reserve`` slots free
in every well they enter, which keeps a path open for the qubits that are.
"""

from __future__ import annotations

import heapq
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .errors import Deadlock
from .fabric import FabricGraph
from .placer import PlacementState, qubit_sequences
from .qasm import QubitKind
from .qidg import Qidg, levelize

CREATE, MOVE, OP = "CREATE", "MOVE", "OP"
_KIND_RANK = {CREATE: 0, MOVE: 1, OP: 2}


@dataclass(frozen=True)
class Command:
    time: int
    kind: str
    qubits: tuple[int, ...]            # declaration indices
    src: tuple[int, int] | None = None  # well position (row, col)
    dst: tuple[int, int] | None = None
    instr: int | None = None
    opcode: str | None = None

    @property
    def sort_key(self):
        return (self.time, _KIND_RANK[self.kind], self.instr or 0, self.qubits)

    def format(self) -> str:
        if self.kind == MOVE:
            (r0, c0), (r1, c1) = self.src, self.dst
            return f"{self.time} MOVE q{self.qubits[0]} ({r0},{c0})->({r1},{c1})"
        if self.kind == CREATE:
            r, c = self.dst
            return f"{self.time} CREATE q{self.qubits[0]} ({r},{c})"
        r, c = self.dst
        ops = " ".join(f"q{q}" for q in self.qubits)
        return f"{self.time} OP {self.opcode} I{self.instr} ({r},{c}) {ops}"


def format_stream(commands: Iterable[Command]) -> str:
    return "".join(c.format() + "\n" for c in sorted(commands, key=lambda c: c.sort_key))


@dataclass
class RouteResult:
    commands: list[Command]
    start: dict[int, int]
    finish: dict[int, int]
    total_latency: int
    stalls: int = 0

    def stream(self) -> str:
        return format_stream(self.commands)


def static_routes(g: Qidg, placement: PlacementState, fabric: FabricGraph) -> dict[str, list[list[int]]]:
    """Per qubit, the BFS path of every leg: origin -> uses -> exit port."""
    out: dict[str, list[list[int]]] = {}
    for q, users in qubit_sequences(g, placement.schedule.level).items():
        stops = [_origin(q, placement)] + [placement.assignment[i] for i in users]
        if q in placement.port_binding:
            stops.append(placement.port_binding[q][1])
        out[q] = [fabric.shortest_path(a, b) for a, b in zip(stops, stops[1:])]
    return out


def _origin(q: str, placement: PlacementState) -> int:
    if q in placement.port_binding:
        return placement.port_binding[q][0]
    return placement.qubit_origin[q]


@dataclass
class _Qubit:
    name: str
    idx: int
    io: bool
    plan: list[int]            # instructions in order
    k: int = 0                 # next instruction in plan
    loc: int | None = None     # current well (None: not yet present / gone)
    free_at: int = 0           # time the qubit becomes idle
    busy: bool = False         # in an operation, a create, or a channel
    path: list[int] = field(default_factory=list)
    pos: int = 0
    gone: bool = False
    park: int | None = None    # temporary step aside to make room
    held: bool = False         # sidestepped; stays put until an operation ends


def dynamic_route(
    g: Qidg,
    placement: PlacementState,
    fabric: FabricGraph,
    head_reserve: int = 1,
) -> RouteResult:
    """Simulate the mapped circuit and emit its command stream."""
    cfg = fabric.config
    cap, ch_cap, mv = cfg.well_capacity, cfg.channel_capacity, cfg.move_delay
    level = placement.schedule.level
    lv = levelize(g.copy(), placement.schedule.deferral_floor, placement.schedule.num_levels)
    slack = {i: lv.alap[i] - lv.asap[i] for i in g.nodes}
    prio = {i: (slack[i], level[i], i) for i in g.nodes}
    kind = g.qubit_kind
    qidx = g.qubit_index
    seqs = qubit_sequences(g, level)
    where = placement.assignment

    queue: dict[int, list[int]] = defaultdict(list)  # well -> instructions
    for i in sorted(g.nodes, key=lambda k: (level[k], k)):
        queue[where[i]].append(i)
    head = {w: 0 for w in queue}

    qubits: dict[str, _Qubit] = {}
    for q, plan in seqs.items():
        qubits[q] = _Qubit(q, qidx[q], kind[q] is QubitKind.IO, plan)

    occ: dict[int, int] = defaultdict(int)
    reserved_until: dict[int, int] = {}
    channel: dict[tuple[int, int], tuple[int, int]] = {}  # key -> (direction src, count)
    touching: dict[int, int] = defaultdict(int)  # in-flight moves per endpoint well
    commands: list[Command] = []
    start: dict[int, int] = {}
    finish: dict[int, int] = {}
    events: list[tuple[int, int, str, object]] = []  # (time, seq, kind, payload)
    counter = 0
    stalls = 0
    sidesteps, max_sidesteps = 0, 4 * len(g.nodes) + 16

    def push(t: int, what: str, payload) -> None:
        nonlocal counter
        heapq.heappush(events, (t, counter, what, payload))
        counter += 1

    def target(q: _Qubit) -> int | None:
        if q.park is not None:
            return q.park
        if q.k < len(q.plan):
            return where[q.plan[q.k]]
        if q.io:
            return placement.port_binding[q.name][1]
        return None

    def head_bound(q: _Qubit) -> bool:
        if q.k >= len(q.plan):
            return True  # exiting frees space
        i = q.plan[q.k]
        w = where[i]
        return head[w] < len(queue[w]) and queue[w][head[w]] == i

    # creation and entry at t = 0
    for q in sorted(qubits.values(), key=lambda q: q.idx):
        if q.io:
            q.loc = placement.port_binding[q.name][0]
            q.path = []
        else:
            c = placement.qubit_origin[q.name]
            q.loc = c
            occ[c] += 1
            commands.append(Command(0, CREATE, (q.idx,), dst=fabric.well(c).pos))
            if cfg.create_delay:
                q.busy = True
                reserved_until[c] = cfg.create_delay
                push(cfg.create_delay, "create", q.name)

    remaining = len(g.nodes)
    t = 0
    outside = {q.name for q in qubits.values() if q.io}  # waiting at an entry port

    def try_start_ops(now: int) -> bool:
        started = False
        ready = []
        for w, lst in queue.items():
            if head[w] >= len(lst):
                continue
            i = lst[head[w]]
            if reserved_until.get(w, -1) > now or touching[w]:
                continue
            node = g.nodes[i]
            ok = all(p in finish and finish[p] <= now for p in g.parents[i])
            for name in node.operands:
                q = qubits[name]
                if q.busy or q.loc != w or name in outside or q.plan[q.k] != i:
                    ok = False
            if ok:
                ready.append((prio[i], w, i))
        for _, w, i in sorted(ready):
            node = g.nodes[i]
            end = now + node.duration
            start[i] = now
            reserved_until[w] = end
            head[w] += 1
            for name in node.operands:
                qubits[name].busy = True
            commands.append(Command(now, OP, tuple(qidx[n] for n in node.operands),
                                    dst=fabric.well(w).pos, instr=i, opcode=node.opcode))
            push(end, "op", i)
            started = True
        return started

    def heading_to(q: _Qubit, w: int) -> bool:
        return q.loc == w or (q.busy and q.pos < len(q.path) and q.path[q.pos] == w)

    def make_room(now: int, reserve: int) -> None:
        # residents waiting for a later instruction step aside when the
        # operands of the next-in-line instruction cannot get in
        for q in qubits.values():
            if not q.busy:
                q.park = None
        for w, lst in queue.items():
            if head[w] >= len(lst) or reserved_until.get(w, -1) > now:
                continue
            ops = g.nodes[lst[head[w]]].operands
            need = sum(1 for n in ops if not heading_to(qubits[n], w) or n in outside)
            short = need - (cap - occ[w])
            if short <= 0:
                continue
            residents = [
                q for q in qubits.values()
                if q.loc == w and not q.busy and not q.gone and q.name not in ops
                and q.name not in outside and q.park is None and target(q) == w
            ]
            residents.sort(key=lambda q: (level[q.plan[q.k]], q.plan[q.k], q.idx), reverse=True)
            for q in residents[:short]:
                spots = [b for b in fabric.neighbors(w)
                         if occ[b] < cap - reserve and reserved_until.get(b, -1) <= now]
                if spots:
                    q.park = min(spots, key=lambda b: (occ[b], b))

    def try_moves(now: int, reserve: int) -> bool:
        nonlocal stalls
        moved = False
        cands = []
        for q in qubits.values():
            if q.busy or q.gone or q.held:
                continue
            dest = target(q)
            if dest is None or (q.loc == dest and q.name not in outside):
                continue
            if (not q.path or q.path[-1] != dest or q.pos >= len(q.path)
                    or q.path[q.pos] != q.loc):
                q.path = fabric.shortest_path(q.loc, dest)
                q.pos = 0
            hb = head_bound(q)
            nxt_i = q.plan[q.k] if q.k < len(q.plan) else None
            key = (0 if hb else 1,) + (prio[nxt_i] if nxt_i is not None else (-1, -1, -1)) + (q.idx,)
            cands.append((key, q))
        for _, q in sorted(cands, key=lambda kv: kv[0]):
            a = q.loc
            b = q.path[q.pos + 1]
            dest = q.path[-1]
            hb = head_bound(q)
            if b == dest and q.k < len(q.plan) and not hb and q.park is None:
                continue  # wait one hop short until the instruction is next in line
            if reserved_until.get(a, -1) > now or reserved_until.get(b, -1) > now:
                stalls += 1
                continue
            key = (min(a, b), max(a, b))
            direction, count = channel.get(key, (a, 0))
            if count and direction != a:
                stalls += 1
                continue
            if count >= ch_cap:
                stalls += 1
                continue
            limit = cap if hb else cap - reserve
            if occ[b] + 1 > limit:
                stalls += 1
                continue
            depart(q, a, b, now)
            q.pos += 1
            moved = True
        return moved

    def depart(q: _Qubit, a: int, b: int, now: int) -> None:
        key = (min(a, b), max(a, b))
        count = channel.get(key, (a, 0))[1]
        if q.name in outside:
            outside.discard(q.name)
        else:
            occ[a] -= 1
        occ[b] += 1
        channel[key] = (a, count + 1)
        touching[a] += 1
        touching[b] += 1
        q.busy = True
        commands.append(Command(now, MOVE, (q.idx,), src=fabric.well(a).pos, dst=fabric.well(b).pos))
        push(now + mv, "move", (q.name, a, b))

    def sidestep(now: int) -> bool:
        # nothing is in flight: move one blocked qubit off its path into a
        # free neighbouring well so the qubits it blocks can advance; qubits
        # sitting in a full well go first since their departure opens a slot
        movable = [q for q in qubits.values() if q.loc is not None]
        for q in sorted(movable, key=lambda q: (occ[q.loc] < cap, q.idx)):
            if q.busy or q.gone or q.name in outside or q.loc is None:
                continue
            dest = target(q)
            if dest is None or dest == q.loc:
                continue
            nxt = fabric.shortest_path(q.loc, dest)[1]
            if occ[nxt] < cap:
                continue
            spots = [b for b in fabric.neighbors(q.loc)
                     if b != nxt and occ[b] < cap and reserved_until.get(b, -1) <= now]
            if spots:
                b = min(spots, key=lambda b: (occ[b], b))
                depart(q, q.loc, b, now)
                q.path, q.pos = [q.loc, b], 1
                q.held = True
                return True
        return False

    while True:
        # completions at time t
        while events and events[0][0] == t:
            _, _, what, payload = heapq.heappop(events)
            if what == "move":
                name, a, b = payload
                q = qubits[name]
                key = (min(a, b), max(a, b))
                direction, count = channel[key]
                channel[key] = (direction, count - 1)
                if count - 1 == 0:
                    del channel[key]
                touching[a] -= 1
                touching[b] -= 1
                q.busy = False
                q.loc = b
                if q.park == b:
                    q.park = None
                if q.k >= len(q.plan) and q.io and b == q.path[-1]:
                    q.gone = True
                    occ[b] -= 1
            elif what == "op":
                i = payload
                for q in qubits.values():
                    q.held = False
                finish[i] = t
                remaining -= 1
                for name in g.nodes[i].operands:
                    q = qubits[name]
                    q.busy = False
                    q.k += 1
                    if q.k >= len(q.plan) and not q.io:
                        q.gone = True  # ancilla measured out
                        occ[q.loc] -= 1
            elif what == "create":
                qubits[payload].busy = False
        try_start_ops(t)
        # repeat so a slot freed by a departure can be taken in the same instant;
        # residents are only asked to step aside once ordinary moves are done
        while try_moves(t, head_reserve):
            pass
        make_room(t, head_reserve)
        while try_moves(t, head_reserve):
            pass
        if not events and remaining:
            # stuck under the headroom rule: let any qubit use the last slots
            make_room(t, 0)
            while try_moves(t, 0):
                pass
        if not events and remaining and any(q.held for q in qubits.values()):
            for q in qubits.values():
                q.held = False
            make_room(t, 0)
            while try_moves(t, 0):
                pass
        if not events and remaining and sidesteps < max_sidesteps and sidestep(t):
            sidesteps += 1
        if not events:
            if remaining == 0 and all(q.gone or not q.io for q in qubits.values()):
                break
            stuck = [
                f"{q.name}@{fabric.well(q.loc).pos}->{fabric.well(target(q)).pos if target(q) is not None else '-'}"
                for q in qubits.values() if not q.gone
            ]
            exc = Deadlock(f"no progress possible at t={t}; waiting qubits: {', '.join(stuck)}")
            exc.partial_stream = format_stream(commands)
            raise exc
        t = events[0][0]

    total = max([finish[i] for i in finish] + [0])
    for c in commands:
        if c.kind == MOVE:
            total = max(total, c.time + mv)
        elif c.kind == CREATE:
            total = max(total, c.time + cfg.create_delay)
    commands.sort(key=lambda c: c.sort_key)
    return RouteResult(commands, start, finish, total, stalls)
