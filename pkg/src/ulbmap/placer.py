"""Timing-driven instruction placement with level-by-level deferral.

Each scheduling level is placed in turn: a quadratic solve over all
unfinalized instructions, per-level spreading into interaction-well bins,
then greedy nearest-well assignment for the current level.  Instructions
whose predicted start misses the level's threshold get their level floor
raised and the scheduler is re-run before the level is frozen.
"""

from __future__ import annotations

import bisect
import random
import statistics
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import HorizonExceeded, NoCreationWell
from .fabric import FabricGraph
from .qasm import QubitKind
from .qidg import Qidg, levelize
from .quadratic import Anchor, BinGrid, Net, Point, QuadraticSystem, net_weight, solve, spread
from .scheduler import Schedule, SchedulerConfig, fds_schedule


@dataclass
class PlacerConfig:
    m_max: int = 100
    pseudo_weight: float = 0.2       # first pseudo-net weight, relative to the mean net weight
    pseudo_growth: float = 1.5       # per-iteration multiplier
    cg_tolerance: float = 1e-6
    max_global_iters: int = 50
    converge_tol: float = 0.5        # stop once spreading moves nothing farther
    slot_duration: int | None = None  # defaults to the fastest instruction
    bins_per_tile: int = 2
    horizon_factor: int = 4
    seed: int = 0
    jitter: float = 0.25


@dataclass
class PlacementState:
    schedule: Schedule
    coords: dict[int, Point] = field(default_factory=dict)
    assignment: dict[int, int] = field(default_factory=dict)
    anchors: dict[int, tuple[Point, float]] = field(default_factory=dict)
    qubit_origin: dict[str, int] = field(default_factory=dict)
    port_binding: dict[str, tuple[int, int]] = field(default_factory=dict)  # entry, exit
    predicted_start: dict[int, int] = field(default_factory=dict)
    thresholds: dict[int, float] = field(default_factory=dict)
    deferrals: int = 0

    def dump(self, g: Qidg) -> str:
        rows = ["instruction level well x y t_min"]
        for i in sorted(self.assignment):
            x, y = self.coords.get(i, (float("nan"), float("nan")))
            rows.append(
                f"{i} {self.schedule.level[i]} {self.assignment[i]} "
                f"{x:.3f} {y:.3f} {self.predicted_start.get(i, 0)}"
            )
        return "\n".join(rows) + "\n"


# -- building blocks --------------------------------------------------------------------


def qubit_sequences(g: Qidg, level: Mapping[int, int]) -> dict[str, list[int]]:
    """Instructions touching each qubit, ordered by (level, index)."""
    seq: dict[str, list[int]] = {}
    for i in sorted(g.nodes, key=lambda k: (level[k], k)):
        for q in g.nodes[i].operands:
            seq.setdefault(q, []).append(i)
    return seq


def instruction_nets(g: Qidg, schedule: Schedule, m_max=100) -> list[Net]:
    """One net per qubit hop between consecutive uses, weighted by slack."""
    lv = levelize(g.copy(), schedule.deferral_floor, schedule.num_levels)
    weights: dict[tuple[int, int], float] = {}
    for users in qubit_sequences(g, schedule.level).values():
        for j, i in zip(users, users[1:]):
            w = net_weight(lv.asap[i], lv.alap[i], schedule.level[i], schedule.level[j], m_max)
            weights[(j, i)] = weights.get((j, i), 0.0) + float(w)
    return [(j, i, w) for (j, i), w in sorted(weights.items())]


def port_nets(g: Qidg, schedule: Schedule, bindings: Mapping[str, tuple[int, int]],
              m_max=100) -> list[Net]:
    lv = levelize(g.copy(), schedule.deferral_floor, schedule.num_levels)
    seq = qubit_sequences(g, schedule.level)
    nets = []
    for q, (entry, exit_) in sorted(bindings.items()):
        users = seq.get(q)
        if not users:
            continue
        first, last = users[0], users[-1]
        # the port sits one level before the first use and one after the last
        nets.append((("port", entry), first, float(net_weight(lv.asap[first], lv.alap[first], 1, 0, m_max))))
        nets.append((last, ("port", exit_), float(net_weight(lv.asap[last], lv.alap[last], 1, 0, m_max))))
    return nets


def well_point(fabric: FabricGraph, wid: int) -> Point:
    w = fabric.well(wid)
    return (float(w.col), float(w.row))


def bin_grid(fabric: FabricGraph, bins_per_tile: int = 2) -> BinGrid:
    cfg = fabric.config
    bw = cfg.template_cols / bins_per_tile
    bh = cfg.template_rows / bins_per_tile
    nx = max(1, round(fabric.cols / bw))
    ny = max(1, round(fabric.rows / bh))
    cap = [[0] * nx for _ in range(ny)]
    grid = BinGrid(-0.5, -0.5, bw, bh, tuple(tuple(r) for r in cap))
    for wid in fabric.interaction_wells:
        ix, iy = grid.bin_of(well_point(fabric, wid))
        cap[iy][ix] += 1
    return BinGrid(-0.5, -0.5, bw, bh, tuple(tuple(r) for r in cap))


def rough_legalize(
    coords: Mapping[int, Point],
    level: Mapping[int, int],
    fabric: FabricGraph,
    grid: BinGrid | None = None,
) -> dict[int, Point]:
    """Spread each level's instructions independently over the well bins."""
    grid = grid or bin_grid(fabric)
    by_level: dict[int, dict[int, Point]] = {}
    for i, p in coords.items():
        by_level.setdefault(level[i], {})[i] = p
    out: dict[int, Point] = {}
    for lvl in sorted(by_level):
        out.update(spread(by_level[lvl], grid))
    return out


def finalize_level(coords: Mapping[int, Point], members: Iterable[int],
                   fabric: FabricGraph) -> dict[int, int]:
    """Greedy nearest-well assignment, one instruction per well."""
    pairs = []
    for i in members:
        x, y = coords[i]
        for wid in fabric.interaction_wells:
            w = fabric.well(wid)
            pairs.append((abs(x - w.col) + abs(y - w.row), i, wid))
    pairs.sort()
    out: dict[int, int] = {}
    used: set[int] = set()
    for _, i, wid in pairs:
        if i not in out and wid not in used:
            out[i] = wid
            used.add(wid)
    return out


@dataclass
class _Timing:
    """Predicted finish times and qubit locations of frozen instructions."""

    start: dict[int, int] = field(default_factory=dict)
    finish: dict[int, int] = field(default_factory=dict)
    well_free: dict[int, int] = field(default_factory=dict)


def origin_latency(g: Qidg, q: str, well: int, fabric: FabricGraph,
                   bindings: Mapping[str, tuple[int, int]]) -> int:
    """Time for qubit ``q``'s first trip to ``well``."""
    if q in bindings:
        return fabric.static_latency(bindings[q][0], well)
    if not fabric.creation_wells:
        raise NoCreationWell("fabric has no creation wells")
    c = fabric.nearest(well, fabric.creation_wells)
    return fabric.config.create_delay + fabric.static_latency(c, well)


def predict_start_times(
    g: Qidg,
    members: Iterable[int],
    assignment: Mapping[int, int],
    prev_use: Mapping[tuple[int, str], int | None],
    timing: _Timing,
    fabric: FabricGraph,
    bindings: Mapping[str, tuple[int, int]],
) -> tuple[dict[int, int], list[int]]:
    """Earliest start of each member, and the hop latencies feeding them."""
    out: dict[int, int] = {}
    hops: list[int] = []
    for i in members:
        w = assignment[i]
        t = timing.well_free.get(w, 0)
        for p in g.parents[i]:
            t = max(t, timing.finish[p])
        for q in g.nodes[i].operands:
            j = prev_use[(i, q)]
            if j is None:
                lat = origin_latency(g, q, w, fabric, bindings)
                arrive = lat
            else:
                lat = fabric.static_latency(assignment[j], w)
                arrive = timing.finish[j] + lat
            hops.append(lat)
            t = max(t, arrive)
        out[i] = t
    return out, hops


def assign_ancillas(g: Qidg, assignment: Mapping[int, int], start: Mapping[int, int],
                    fabric: FabricGraph) -> dict[str, int]:
    """Each ancilla gets the free creation well closest to its first use."""
    kind = g.qubit_kind
    first: dict[str, int] = {}
    for i in sorted(g.nodes, key=lambda k: (start.get(k, 0), k)):
        for q in g.nodes[i].operands:
            if kind[q] is QubitKind.ANCILLA and q not in first:
                first[q] = i
    check_creation_capacity(g, fabric)
    free = set(fabric.creation_wells)
    origin: dict[str, int] = {}
    for q, i in sorted(first.items(), key=lambda kv: (start.get(kv[1], 0), kv[1], kv[0])):
        c = fabric.nearest(assignment[i], free)
        origin[q] = c
        free.discard(c)
    return origin


def used_ancillas(g: Qidg) -> list[str]:
    kind = g.qubit_kind
    used = {q for n in g.nodes.values() for q in n.operands}
    return [d.name for d in g.decls if kind[d.name] is QubitKind.ANCILLA and d.name in used]


def check_creation_capacity(g: Qidg, fabric: FabricGraph) -> None:
    n = len(used_ancillas(g))
    if n > len(fabric.creation_wells):
        raise NoCreationWell(
            f"{n} ancillas need creation wells but the fabric has {len(fabric.creation_wells)}"
        )


# -- the placement loop -----------------------------------------------------------------


class _Placer:
    def __init__(self, g: Qidg, schedule: Schedule, fabric: FabricGraph,
                 cfg: PlacerConfig, defer: bool):
        self.g = g
        self.fabric = fabric
        self.cfg = cfg
        self.defer = defer
        self.n_cap = schedule.n_cap
        self.horizon = cfg.horizon_factor * max(1, schedule.num_levels)
        self.grid = bin_grid(fabric, cfg.bins_per_tile)
        self.state = PlacementState(schedule=schedule)
        self.timing = _Timing()
        self.frozen: dict[int, int] = {}
        self.slot = cfg.slot_duration or fabric.config.fastest_instruction
        cx, cy = fabric.center
        self._fallback: dict[int, Point] = {}
        for i in g.nodes:
            rng = random.Random(cfg.seed * 1_000_003 + i)
            self._fallback[i] = (cx + rng.uniform(-cfg.jitter, cfg.jitter),
                                 cy + rng.uniform(-cfg.jitter, cfg.jitter))

    # global placement with anchoring iterations; returns legalized coordinates
    def _global(self) -> dict[int, Point]:
        st, fab, cfg = self.state, self.fabric, self.cfg
        free = [i for i in sorted(self.g.nodes) if i not in self.frozen]
        fixed: dict = {i: well_point(fab, st.assignment[i]) for i in self.frozen}
        for entry, exit_ in st.port_binding.values():
            fixed[("port", entry)] = well_point(fab, entry)
            fixed[("port", exit_)] = well_point(fab, exit_)
        nets = instruction_nets(self.g, st.schedule, cfg.m_max)
        nets += port_nets(self.g, st.schedule, st.port_binding, cfg.m_max)
        system = QuadraticSystem(free, nets, fixed, cfg.cg_tolerance, self._fallback.__getitem__)
        coords = system.solve()
        level = st.schedule.level
        legal = coords
        anchors: list[Anchor] = []
        base = cfg.pseudo_weight * (sum(w for *_, w in nets) / len(nets) if nets else 1.0)
        for k in range(cfg.max_global_iters):
            legal = rough_legalize(coords, level, fab, self.grid)
            moved = max((abs(legal[i][0] - coords[i][0]) + abs(legal[i][1] - coords[i][1])
                         for i in free), default=0.0)
            if moved <= cfg.converge_tol:
                break
            w = base * cfg.pseudo_growth ** k
            anchors = [(i, legal[i], w) for i in free]
            coords = system.solve(anchors)
        st.anchors = {i: (p, w) for i, p, w in anchors}
        return legal

    def _bind_ports(self) -> None:
        kind = self.g.qubit_kind
        io = [q for q, k in kind.items() if k is QubitKind.IO]
        if not io or not self.fabric.ports:
            return
        coords = solve(sorted(self.g.nodes),
                       instruction_nets(self.g, self.state.schedule, self.cfg.m_max),
                       {}, (), self.cfg.cg_tolerance, self._fallback.__getitem__)
        seq = qubit_sequences(self.g, self.state.schedule.level)
        for q in io:
            users = seq.get(q)
            if not users:
                continue
            ends = []
            for i in (users[0], users[-1]):
                x, y = coords[i]
                ends.append(min(self.fabric.ports, key=lambda p: (
                    abs(self.fabric.well(p).col - x) + abs(self.fabric.well(p).row - y), p)))
            self.state.port_binding[q] = (ends[0], ends[1])

    def _prev_use(self) -> dict[tuple[int, str], int | None]:
        prev: dict[tuple[int, str], int | None] = {}
        for q, users in qubit_sequences(self.g, self.state.schedule.level).items():
            for k, i in enumerate(users):
                prev[(i, q)] = users[k - 1] if k else None
        return prev

    def _reschedule(self, level: int) -> None:
        st = self.state
        floors = dict(st.schedule.deferral_floor)
        pinned = {i: max(floors.get(i, 0), level) for i in self.g.nodes if i not in self.frozen}
        sched = fds_schedule(self.g, SchedulerConfig(n_max=self.n_cap), self.n_cap,
                             floors=pinned, fixed=self.frozen)
        st.schedule = Schedule(sched.level, sched.num_levels, self.n_cap, floors)

    def run(self) -> PlacementState:
        st, fab = self.state, self.fabric
        check_creation_capacity(self.g, fab)
        self._bind_ports()
        es = 0.0
        lvl = 0
        while lvl < st.schedule.num_levels:
            while True:
                members = st.schedule.members(lvl)
                if not members:
                    break
                legal = self._global()
                assign = finalize_level(legal, members, fab)
                merged = {**st.assignment, **assign}
                t_min, hops = predict_start_times(
                    self.g, members, merged, self._prev_use(), self.timing, fab, st.port_binding)
                dur = max(self.g.nodes[i].duration for i in members)
                d_l = max(self.slot, dur + (statistics.median(hops) if hops else 0))
                threshold = es + 0.5 * d_l
                late = [i for i in members if t_min[i] > threshold]
                if self.defer and late:
                    keep = min(members, key=lambda i: (t_min[i], i))
                    late = [i for i in late if i != keep]
                if not (self.defer and late):
                    break
                floors = dict(st.schedule.deferral_floor)
                for i in late:
                    floors[i] = lvl + 1
                    if floors[i] >= self.horizon:
                        raise HorizonExceeded(
                            f"instruction {i} deferred past level cap {self.horizon}")
                st.deferrals += len(late)
                st.schedule = Schedule(st.schedule.level, st.schedule.num_levels,
                                       self.n_cap, floors)
                self._reschedule(lvl)
            if members:
                for i in members:
                    st.coords[i] = legal[i]
                    st.assignment[i] = assign[i]
                    st.predicted_start[i] = t_min[i]
                    fin = t_min[i] + self.g.nodes[i].duration
                    self.timing.finish[i] = fin
                    self.timing.well_free[assign[i]] = max(
                        self.timing.well_free.get(assign[i], 0), fin)
                    self.frozen[i] = lvl
                st.thresholds[lvl] = threshold
                es += d_l
            lvl += 1
        # drop trailing or interior empty levels left behind by deferrals
        used = sorted(set(st.schedule.level.values()))
        remap = {old: new for new, old in enumerate(used)}
        st.schedule = Schedule(
            {i: remap[l] for i, l in st.schedule.level.items()}, len(used), self.n_cap,
            {i: bisect.bisect_left(used, f) for i, f in st.schedule.deferral_floor.items()},
        )
        st.thresholds = {remap[l]: t for l, t in st.thresholds.items() if l in remap}
        st.qubit_origin = assign_ancillas(self.g, st.assignment, st.predicted_start, fab)
        return st


def place_with_deferral(
    g: Qidg,
    schedule: Schedule,
    fabric: FabricGraph,
    cfg: PlacerConfig | None = None,
    defer: bool = True,
) -> PlacementState:
    """Place a preprocessed graph level by level.

    With ``defer=False`` levels are taken as scheduled (fixed-level
    placement).  The returned state carries the final schedule.
    """
    return _Placer(g, schedule, fabric, cfg or PlacerConfig(), defer).run()


def place_fixed(g: Qidg, schedule: Schedule, fabric: FabricGraph,
                cfg: PlacerConfig | None = None) -> PlacementState:
    return place_with_deferral(g, schedule, fabric, cfg, defer=False)
