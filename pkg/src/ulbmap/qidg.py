"""Quantum instruction dependency graph (QIDG).

Nodes are native instructions keyed by their 1-based file index.  A two-qubit
instruction reads its control qubit and writes its target; a one-qubit
instruction writes its only operand.  Per qubit, only adjacent accesses are
joined by edges, which keeps the edge count linear while preserving
reachability.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .config import FabricConfig
from .errors import CycleDetected, UndeclaredQubit
from .qasm import QubitDecl, QubitKind, RawInstruction

M_SAT = 1e6

RAW, WAW, WAR, AUX = "RAW", "WAW", "WAR", "AUX"


class ControlOrder(enum.Enum):
    """Which operand of a two-qubit instruction is the control."""

    FIRST = "first"    # the written QASM convention
    SECOND = "second"  # how the Steane encoder figure draws its CNOTs


@dataclass
class Node:
    index: int
    opcode: str
    operands: tuple[str, ...]
    duration: int
    control: str | None
    target: str

    def accesses(self) -> list[tuple[str, bool]]:
        """``(qubit, writes)`` pairs in operand order."""
        out = []
        for q in self.operands:
            out.append((q, q == self.target))
        return out


@dataclass
class Qidg:
    decls: list[QubitDecl]
    nodes: dict[int, Node]
    control_order: ControlOrder = ControlOrder.FIRST
    edges: dict[tuple[int, int], set[str]] = field(default_factory=dict)
    parents: dict[int, set[int]] = field(default_factory=dict)
    children: dict[int, set[int]] = field(default_factory=dict)
    siblings: dict[int, set[int]] = field(default_factory=dict)
    asap: dict[int, int] = field(default_factory=dict)
    alap: dict[int, int] = field(default_factory=dict)
    mobility: dict[int, float] = field(default_factory=dict)
    num_levels: int = 0
    _reach: dict[int, int] | None = field(default=None, repr=False)

    # -- structure -----------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def qubit_kind(self) -> dict[str, QubitKind]:
        return {d.name: d.kind for d in self.decls}

    @property
    def qubit_index(self) -> dict[str, int]:
        return {d.name: i for i, d in enumerate(self.decls)}

    def add_edge(self, u: int, v: int, tag: str) -> None:
        if u == v:
            raise CycleDetected(f"self loop on instruction {u}")
        reach = self._reach
        if reach is not None and reach[v] >> u & 1:
            raise CycleDetected(f"edge {u}->{v} closes a cycle")
        tags = self.edges.setdefault((u, v), set())
        tags.add(tag)
        self.parents[v].add(u)
        self.children[u].add(v)
        if reach is not None:
            gained = reach[v] | (1 << v)
            bit_u = 1 << u
            for x in reach:
                if x == u or reach[x] & bit_u:
                    reach[x] |= gained

    def edges_tagged(self, tag: str) -> list[tuple[int, int]]:
        return sorted(e for e, tags in self.edges.items() if tag in tags)

    def qubit_accesses(self) -> dict[str, list[int]]:
        """Instructions touching each qubit, in file order."""
        acc: dict[str, list[int]] = defaultdict(list)
        for i in sorted(self.nodes):
            for q in self.nodes[i].operands:
                acc[q].append(i)
        return dict(acc)

    def topo_order(self) -> list[int]:
        """Kahn order with lowest index first among ready nodes."""
        import heapq

        indeg = {i: len(self.parents[i]) for i in self.nodes}
        ready = [i for i, d in indeg.items() if d == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            u = heapq.heappop(ready)
            order.append(u)
            for v in self.children[u]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    heapq.heappush(ready, v)
        if len(order) != len(self.nodes):
            raise CycleDetected("dependency graph contains a cycle")
        return order

    def reach(self) -> dict[int, int]:
        """Descendant bitsets: bit ``j`` of ``reach()[i]`` is set iff i ->* j."""
        if self._reach is None:
            reach = {i: 0 for i in self.nodes}
            for u in reversed(self.topo_order()):
                acc = 0
                for v in self.children[u]:
                    acc |= reach[v] | (1 << v)
                reach[u] = acc
            self._reach = reach
        return self._reach

    def reaches(self, u: int, v: int) -> bool:
        return bool(self.reach()[u] >> v & 1)

    def ordered(self, u: int, v: int) -> bool:
        return self.reaches(u, v) or self.reaches(v, u)

    def copy(self) -> "Qidg":
        g = Qidg(
            decls=list(self.decls),
            nodes=dict(self.nodes),
            control_order=self.control_order,
            edges={e: set(t) for e, t in self.edges.items()},
            parents={i: set(p) for i, p in self.parents.items()},
            children={i: set(c) for i, c in self.children.items()},
            siblings={i: set(s) for i, s in self.siblings.items()},
            asap=dict(self.asap),
            alap=dict(self.alap),
            mobility=dict(self.mobility),
            num_levels=self.num_levels,
        )
        return g

    def dump_dot(self) -> str:
        lines = ["digraph qidg {"]
        for i in sorted(self.nodes):
            n = self.nodes[i]
            label = f"{i}: {n.opcode} {','.join(n.operands)}"
            lines.append(f'  n{i} [label="{label}"];')
        for (u, v) in sorted(self.edges):
            tags = "/".join(sorted(self.edges[(u, v)]))
            style = ' style="dashed"' if AUX in self.edges[(u, v)] else ""
            lines.append(f'  n{u} -> n{v} [label="{tags}"{style}];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def build(
    decls: Iterable[QubitDecl],
    instructions: Iterable[RawInstruction],
    config: FabricConfig | None = None,
    control_order: ControlOrder = ControlOrder.FIRST,
) -> Qidg:
    """Build the dependency graph with RAW/WAW/WAR edges from file order."""
    config = config or FabricConfig()
    decls = list(decls)
    declared = {d.name for d in decls}
    nodes: dict[int, Node] = {}
    for ins in instructions:
        for q in ins.operands:
            if q not in declared:
                raise UndeclaredQubit(f"qubit {q!r} is not declared", ins.lineno or None)
        if len(ins.operands) == 2:
            c_pos = 0 if control_order is ControlOrder.FIRST else 1
            control, target = ins.operands[c_pos], ins.operands[1 - c_pos]
        else:
            control, target = None, ins.operands[0]
        nodes[ins.index] = Node(ins.index, ins.opcode, tuple(ins.operands),
                                config.duration(ins.opcode), control, target)

    g = Qidg(decls=decls, nodes=nodes, control_order=control_order)
    g.parents = {i: set() for i in nodes}
    g.children = {i: set() for i in nodes}
    g.siblings = {i: set() for i in nodes}

    last_writer: dict[str, int] = {}
    readers: dict[str, list[int]] = defaultdict(list)
    for i in sorted(nodes):
        for q, writes in nodes[i].accesses():
            w = last_writer.get(q)
            if not writes:
                if w is not None:
                    g.add_edge(w, i, RAW)
                readers[q].append(i)
            else:
                if readers[q]:
                    for r in readers[q]:
                        g.add_edge(r, i, WAR)
                elif w is not None:
                    g.add_edge(w, i, WAW)
                last_writer[q] = i
                readers[q] = []
    return g


def sibling_sets(g: Qidg) -> Qidg:
    """Fill ``g.siblings``: instructions sharing a qubit with no order between them."""
    g.siblings = {i: set() for i in g.nodes}
    for q, users in g.qubit_accesses().items():
        for a_pos, a in enumerate(users):
            for b in users[a_pos + 1:]:
                if not g.ordered(a, b):
                    g.siblings[a].add(b)
                    g.siblings[b].add(a)
    return g


def levelize(
    g: Qidg,
    floors: Mapping[int, int] | None = None,
    horizon: int | None = None,
) -> Qidg:
    """Compute ASAP/ALAP levels and mobility in unit levels.

    ``floors`` clamps ASAP levels from below; ``horizon`` widens the level count
    beyond the critical path.
    """
    floors = floors or {}
    order = g.topo_order()
    asap: dict[int, int] = {}
    for i in order:
        lvl = floors.get(i, 0)
        for p in g.parents[i]:
            lvl = max(lvl, asap[p] + 1)
        asap[i] = lvl
    num_levels = max(asap.values()) + 1 if asap else 0
    if horizon is not None:
        num_levels = max(num_levels, horizon)
    alap: dict[int, int] = {}
    for i in reversed(order):
        lvl = num_levels - 1
        for c in g.children[i]:
            lvl = min(lvl, alap[c] - 1)
        alap[i] = lvl
    g.asap, g.alap, g.num_levels = asap, alap, num_levels
    g.mobility = {i: mobility(asap[i], alap[i]) for i in order}
    return g


def mobility(asap: int, alap: int) -> float:
    slack = alap - asap
    return M_SAT if slack <= 0 else 1.0 / slack


def from_qasm(text: str, config: FabricConfig | None = None,
              control_order: ControlOrder = ControlOrder.FIRST) -> Qidg:
    """Parse, build, compute siblings and levelize in one call."""
    from .qasm import parse

    decls, instrs = parse(text)
    g = build(decls, instrs, config, control_order)
    sibling_sets(g)
    levelize(g)
    return g


def unordered_co_access(g: Qidg, exclude_tags: Iterable[str] = (AUX,)) -> set[tuple[int, int]]:
    """Pairs ``(a, b)``, ``a < b``, sharing a qubit with no path between them.

    Reachability is taken over edges that carry at least one tag outside
    ``exclude_tags``; with the default this recovers the sibling relation of
    the graph as built, regardless of auxiliary edges added later.
    """
    excluded = set(exclude_tags)
    children: dict[int, list[int]] = {i: [] for i in g.nodes}
    for (u, v), tags in g.edges.items():
        if tags - excluded:
            children[u].append(v)
    reach: dict[int, int] = {}
    for u in reversed(g.topo_order()):
        acc = 0
        for v in children[u]:
            acc |= reach[v] | (1 << v)
        reach[u] = acc
    pairs = set()
    for users in g.qubit_accesses().values():
        for pos, a in enumerate(users):
            for b in users[pos + 1:]:
                if not (reach[a] >> b & 1 or reach[b] >> a & 1):
                    pairs.add((min(a, b), max(a, b)))
    return pairs
