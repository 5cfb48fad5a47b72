"""Loose instruction scheduling onto unit-length levels.

Two stages: :func:`preprocess` totally orders instructions that contend for a
qubit by inserting auxiliary edges (a list-scheduling pass driven by
mobility), then :func:`fds_schedule` runs latency-constrained force-directed
scheduling with a hard per-level cap.  :func:`exact_oracle` solves the same
problem exhaustively for small graphs and exists to check the heuristic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

from .errors import Infeasible, TooLarge
from .qidg import AUX, M_SAT, Qidg, levelize, sibling_sets, unordered_co_access

DEFAULT_ALPHAS = (1.0, 0.8, 0.6, 0.4, 0.2)


@dataclass
class SchedulerConfig:
    n_max: int | None = None  # defaults to the fabric's interaction-well count
    alpha_set: tuple[float, ...] = DEFAULT_ALPHAS
    witness_trials: int = 8  # force-ranked candidates tried before falling back


@dataclass
class Schedule:
    level: dict[int, int]
    num_levels: int
    n_cap: int
    deferral_floor: dict[int, int] = field(default_factory=dict)

    @property
    def per_level_count(self) -> list[int]:
        counts = [0] * self.num_levels
        for lvl in self.level.values():
            counts[lvl] += 1
        return counts

    def members(self, lvl: int) -> list[int]:
        return sorted(i for i, l in self.level.items() if l == lvl)

    def dump_table(self) -> str:
        rows = ["instruction level n_cap"]
        for i in sorted(self.level):
            rows.append(f"{i} {self.level[i]} {self.n_cap}")
        return "\n".join(rows) + "\n"


# -- preprocessing ------------------------------------------------------------------


def preprocess(g: Qidg) -> int:
    """Order every sibling set with AUX edges; returns the number of edges added.

    Works level by level on ASAP: the lowest-ASAP instruction with pending
    siblings and its same-ASAP siblings compete, the most critical one (highest
    mobility value; ties to lower ASAP, then lower index) becomes the parent of
    all its remaining siblings.  Levels are recomputed after every choice.
    """
    if not any(g.siblings.values()):
        sibling_sets(g)
    levelize(g)
    pending = {i: set(s) for i, s in g.siblings.items()}
    added = 0
    while True:
        for i in pending:
            if pending[i]:
                pending[i] = {j for j in pending[i] if not g.ordered(i, j)}
        active = [i for i in pending if pending[i]]
        if not active:
            break
        i = min(active, key=lambda k: (g.asap[k], k))
        group = [i] + [j for j in pending[i] if g.asap[j] == g.asap[i]]
        star = max(group, key=lambda k: (g.mobility[k], -g.asap[k], -k))
        for j in sorted(pending[star]):
            if not g.ordered(star, j):
                g.add_edge(star, j, AUX)
                added += 1
            pending[j].discard(star)
        pending[star] = set()
        levelize(g)
    g.siblings = {i: set() for i in g.nodes}
    return added


# -- force-directed scheduling --------------------------------------------------------


class _Frames:
    """Feasible level ranges under fixed assignments, cap and floors."""

    def __init__(self, g: Qidg, order: list[int], floors: Mapping[int, int], cap: int):
        self.g = g
        self.order = order
        self.floors = floors
        self.cap = cap

    def compute(self, fixed: Mapping[int, int], counts: Sequence[int], horizon: int):
        parents, children, cap = self.g.parents, self.g.children, self.cap
        lo: dict[int, int] = {}
        for i in self.order:
            if i in fixed:
                lo[i] = fixed[i]
                continue
            l = self.floors.get(i, 0)
            for p in parents[i]:
                l = max(l, lo[p] + 1)
            while l < horizon and counts[l] >= cap:
                l += 1
            lo[i] = l
        hi: dict[int, int] = {}
        for i in reversed(self.order):
            if i in fixed:
                hi[i] = fixed[i]
                continue
            h = horizon - 1
            for c in children[i]:
                h = min(h, hi[c] - 1)
            while h >= 0 and counts[h] >= cap:
                h -= 1
            hi[i] = h
        for i in self.order:
            if i not in fixed and lo[i] > hi[i]:
                return None
        return lo, hi

    def witness(self, fixed, counts, horizon, lo, hi) -> dict[int, int] | None:
        """Greedy list-schedule completion, deadline (``hi``) first."""
        parents, cap = self.g.parents, self.cap
        placed = dict(fixed)
        todo = [i for i in self.order if i not in fixed]
        remaining = set(todo)
        for l in range(horizon):
            if not remaining:
                break
            if any(hi[i] < l for i in remaining):
                return None
            free = cap - counts[l]
            if free <= 0:
                continue
            ready = [
                i for i in todo
                if i in remaining and lo[i] <= l
                and all(p in placed and placed[p] < l for p in parents[i])
            ]
            ready.sort(key=lambda i: (hi[i], i))
            for i in ready[:free]:
                placed[i] = l
                remaining.discard(i)
        return None if remaining else placed


def _spread(lo: int, hi: int, counts: Sequence[int], cap: int) -> list[int]:
    return [l for l in range(lo, hi + 1) if counts[l] < cap]


def fds_schedule(
    g: Qidg,
    cfg: SchedulerConfig | None = None,
    n_m: int | None = None,
    floors: Mapping[int, int] | None = None,
    fixed: Mapping[int, int] | None = None,
) -> Schedule:
    """Force-directed scheduling with at most ``n_m`` instructions per level.

    ``floors`` gives minimum levels (deferrals); ``fixed`` pins instructions that
    are already frozen.  The level count starts at the critical-path / capacity
    bound and grows by one while no complete schedule fits.  During assignment a
    greedy completion is kept as a witness so the loop never paints itself into
    a corner: a force-ranked candidate is accepted only if a completion still
    exists, and the witness's own choice is the fallback.
    """
    cfg = cfg or SchedulerConfig()
    floors = dict(floors or {})
    fixed_in = dict(fixed or {})
    cap = n_m if n_m is not None else cfg.n_max
    if cap is None:
        cap = max(1, len(g))
    if cfg.n_max is not None:
        cap = min(cap, cfg.n_max)
    if cap < 1:
        raise Infeasible(f"per-level cap must be >= 1, got {cap}")
    if not g.nodes:
        return Schedule({}, 0, cap, floors)

    order = g.topo_order()
    frames = _Frames(g, order, floors, cap)

    depth: dict[int, int] = {}
    for i in order:
        d = fixed_in.get(i, floors.get(i, 0))
        for p in g.parents[i]:
            d = max(d, depth[p] + 1)
        depth[i] = d
    horizon = max(max(depth.values()) + 1, math.ceil(len(g) / cap))
    limit = horizon + len(g) + max(floors.values(), default=0) + 1

    def base_counts(h: int) -> list[int]:
        c = [0] * h
        for i, l in fixed_in.items():
            c[l] += 1
        return c

    while True:
        counts = base_counts(horizon)
        fr = frames.compute(fixed_in, counts, horizon)
        witness = None
        if fr is not None:
            witness = frames.witness(fixed_in, counts, horizon, *fr)
        if witness is not None:
            break
        horizon += 1
        if horizon > limit:
            raise Infeasible("no schedule fits the cap and floors")

    fixed = dict(fixed_in)
    while len(fixed) < len(g):
        lo, hi = frames.compute(fixed, counts, horizon)
        free_nodes = [i for i in order if i not in fixed]
        prob: dict[int, dict[int, float]] = {}
        dg = [float(c) for c in counts]
        for i in free_nodes:
            levels = _spread(lo[i], hi[i], counts, cap)
            p = 1.0 / len(levels)
            prob[i] = {l: p for l in levels}
            for l in levels:
                dg[l] += p

        def frame_force(j: int, new_lo: int, new_hi: int) -> float | None:
            levels = _spread(new_lo, new_hi, counts, cap)
            if not levels:
                return None
            p = 1.0 / len(levels)
            return sum(dg[l] * p for l in levels) - sum(dg[l] * q for l, q in prob[j].items())

        ranked = []
        for i in free_nodes:
            slack = hi[i] - lo[i]
            prio = M_SAT if slack <= 0 else 1.0 / slack
            for l in prob[i]:
                force = frame_force(i, l, l)
                ok = True
                for c in g.children[i]:
                    if c in fixed or lo[c] > l:
                        continue
                    f = frame_force(c, l + 1, hi[c])
                    if f is None:
                        ok = False
                        break
                    force += f
                if ok:
                    for p_ in g.parents[i]:
                        if p_ in fixed or hi[p_] < l:
                            continue
                        f = frame_force(p_, lo[p_], l - 1)
                        if f is None:
                            ok = False
                            break
                        force += f
                if ok:
                    ranked.append((round(force, 9), -prio, lo[i], i, l))
        ranked.sort()

        chosen = None
        for _, _, _, i, l in ranked[: cfg.witness_trials]:
            trial = dict(fixed)
            trial[i] = l
            counts[l] += 1
            fr = frames.compute(trial, counts, horizon)
            w = frames.witness(trial, counts, horizon, *fr) if fr is not None else None
            counts[l] -= 1
            if w is not None:
                chosen, witness = (i, l), w
                break
        if chosen is None:
            # the witness is a valid completion, so any of its choices is safe
            for _, _, _, i, l in ranked:
                if witness.get(i) == l:
                    chosen = (i, l)
                    break
            else:
                i = free_nodes[0]
                chosen = (i, witness[i])
        i, l = chosen
        fixed[i] = l
        counts[l] += 1

    used = max(fixed.values()) + 1
    return Schedule(dict(fixed), used, cap, floors)


# -- N^m enumeration ------------------------------------------------------------------


@dataclass
class Candidate:
    alpha: float
    n_cap: int
    schedule: Schedule


def widest_asap_level(g: Qidg) -> int:
    widths: dict[int, int] = {}
    for lvl in g.asap.values():
        widths[lvl] = widths.get(lvl, 0) + 1
    return max(widths.values(), default=0)


def cap_set(g: Qidg, cfg: SchedulerConfig) -> list[tuple[float, int]]:
    if cfg.n_max is None:
        raise ValueError("SchedulerConfig.n_max is required for cap enumeration")
    n_ma = min(cfg.n_max, widest_asap_level(g))
    return [(a, max(1, math.ceil(a * n_ma - 1e-9))) for a in cfg.alpha_set]


def schedule_enumerated(
    g: Qidg,
    cfg: SchedulerConfig,
    floors: Mapping[int, int] | None = None,
) -> tuple[list[Candidate], Candidate]:
    """Run FDS once per cap ``ceil(alpha * N^ma)``.

    Returns every candidate (one per alpha, identical caps share a run) and a
    default pick: fewest levels, then smallest peak level population.
    """
    if not g.nodes:
        empty = Candidate(cfg.alpha_set[0] if cfg.alpha_set else 1.0, 0, Schedule({}, 0, 0))
        return [empty], empty
    if not g.asap:
        levelize(g)
    runs: dict[int, Schedule] = {}
    out = []
    for alpha, cap in cap_set(g, cfg):
        if cap not in runs:
            runs[cap] = fds_schedule(g, cfg, cap, floors)
        out.append(Candidate(alpha, cap, runs[cap]))
    best = min(out, key=lambda c: (c.schedule.num_levels, max(c.schedule.per_level_count)))
    return out, best


# -- exact oracle and validator --------------------------------------------------------


def exact_oracle(g: Qidg, n_max: int, max_nodes: int = 14) -> int:
    """Minimum level count over all assignments satisfying the QISP constraints.

    Sibling exclusion uses the pairs that are unordered in ``g`` itself, so a
    raw graph is solved with exclusion and a preprocessed one without.
    Only maximal level fillings are enumerated: with unit-length instructions
    any schedule can be compacted into one that leaves no eligible
    instruction idle.
    """
    n = len(g)
    if n > max_nodes:
        raise TooLarge(f"exact oracle limited to {max_nodes} nodes, got {n}")
    if n == 0:
        return 0
    if n_max < 1:
        raise Infeasible("n_max must be >= 1")
    nodes = sorted(g.nodes)
    pos = {i: k for k, i in enumerate(nodes)}
    parent_mask = [0] * n
    for (u, v) in g.edges:
        parent_mask[pos[v]] |= 1 << pos[u]
    conflict = [0] * n
    for a, b in unordered_co_access(g, exclude_tags=()):
        conflict[pos[a]] |= 1 << pos[b]
        conflict[pos[b]] |= 1 << pos[a]
    height = {}
    for i in reversed(g.topo_order()):
        height[i] = max((height[c] + 1 for c in g.children[i]), default=0)
    heights = [height[i] for i in nodes]
    depth = {}
    for i in g.topo_order():
        depth[i] = max((depth[p] + 1 for p in g.parents[i]), default=0)
    full = (1 << n) - 1
    lower = max(max(depth.values()) + 1, math.ceil(n / n_max))

    def feasible(L: int) -> bool:
        @lru_cache(maxsize=None)
        def rec(l: int, mask: int) -> bool:
            if mask == full:
                return True
            if l == L:
                return False
            avail = []
            must = 0
            for k in range(n):
                if mask >> k & 1:
                    continue
                deadline = L - 1 - heights[k]
                if deadline < l:
                    return False
                if parent_mask[k] & ~mask == 0:
                    avail.append(k)
                    if deadline == l:
                        must |= 1 << k
            size = min(n_max, len(avail))
            for r in range(size, 0, -1):
                for combo in itertools.combinations(avail, r):
                    sel = 0
                    ok = True
                    for k in combo:
                        if conflict[k] & sel:
                            ok = False
                            break
                        sel |= 1 << k
                    if not ok or must & ~sel:
                        continue
                    if r < n_max and any(
                        not (sel >> k & 1) and not (conflict[k] & sel) for k in avail
                    ):
                        continue  # not maximal
                    if rec(l + 1, mask | sel):
                        return True
            return False

        return rec(0, 0)

    for L in range(lower, n + 1):
        if feasible(L):
            return L
    raise Infeasible("no schedule found")  # unreachable for n_max >= 1


def validate_schedule(
    g: Qidg,
    schedule: Schedule,
    n_cap: int | None = None,
    floors: Mapping[int, int] | None = None,
) -> list[str]:
    """Check a schedule against the QISP constraints; returns violation messages.

    Sibling exclusion is checked against the co-access pairs of the graph
    without its auxiliary edges, i.e. the relation before preprocessing.
    """
    problems = []
    cap = n_cap if n_cap is not None else schedule.n_cap
    floors = floors if floors is not None else schedule.deferral_floor
    for i in g.nodes:
        if i not in schedule.level:
            problems.append(f"single-level: instruction {i} unscheduled")
    for i, l in schedule.level.items():
        if i not in g.nodes:
            problems.append(f"single-level: unknown instruction {i}")
        elif not (isinstance(l, int) and 0 <= l < schedule.num_levels):
            problems.append(f"horizon: instruction {i} at level {l} outside 0..{schedule.num_levels - 1}")
    lv = schedule.level
    for (u, v) in sorted(g.edges):
        if u in lv and v in lv and not lv[v] - lv[u] >= 1:
            problems.append(f"precedence: {u}@{lv[u]} -> {v}@{lv[v]}")
    for a, b in sorted(unordered_co_access(g)):
        if a in lv and b in lv and lv[a] == lv[b]:
            problems.append(f"sibling: {a} and {b} share level {lv[a]}")
    counts: dict[int, int] = {}
    for l in lv.values():
        counts[l] = counts.get(l, 0) + 1
    for l, c in sorted(counts.items()):
        if c > cap:
            problems.append(f"cap: level {l} holds {c} > {cap}")
    for i, f in floors.items():
        if i in lv and lv[i] < f:
            problems.append(f"floor: instruction {i} at {lv[i]} below {f}")
    return problems
