"""Contention-free timing model of a placed circuit, used as a test oracle.

Built only from the placement and the fabric's shortest paths, without any
router state.  ``lower_bound`` is a latency no valid execution of the
placement can beat; ``conflicts`` lists the ways the corresponding ideal
move timeline would break a fabric rule.  When that list is empty the
router has no reason to stall, so its latency must equal the bound.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field


@dataclass
class Ideal:
    start: dict[int, int] = field(default_factory=dict)
    finish: dict[int, int] = field(default_factory=dict)
    total: int = 0
    # (depart time, qubit, from well, to well)
    moves: list[tuple[int, str, int, int]] = field(default_factory=list)
    # qubit -> (appear time, vanish time or None)
    life: dict[str, tuple[int, int | None]] = field(default_factory=dict)


def _order(placement):
    lv = placement.schedule.level
    return sorted(placement.assignment, key=lambda i: (lv[i], i))


def ideal_timeline(g, placement, fabric) -> Ideal:
    cfg = fabric.config
    mv = cfg.move_delay
    where = placement.assignment
    out = Ideal()
    last_q: dict[str, int] = {}
    last_w: dict[int, int] = {}
    legs = []  # (qubit, source well, dest well, ready time, must arrive no earlier than)
    for i in _order(placement):
        w = where[i]
        node = g.nodes[i]
        t = max((out.finish[p] for p in g.parents[i]), default=0)
        pw = last_w.get(w)
        if pw is not None:
            t = max(t, out.finish[pw])
        for q in node.operands:
            j = last_q.get(q)
            if j is not None:
                src, ready = where[j], out.finish[j]
            elif q in placement.port_binding:
                src, ready = placement.port_binding[q][0], 0
                out.life[q] = (0, None)
            else:
                src, ready = placement.qubit_origin[q], cfg.create_delay
                out.life[q] = (0, None)
            hops = fabric.physical_distance(src, w)
            arrive = ready + hops * mv
            # a well hosting an operation admits nobody until it ends
            if hops and pw is not None:
                arrive = max(arrive, out.finish[pw] + mv)
            legs.append((q, src, w, ready, arrive))
            t = max(t, arrive)
        out.start[i] = t
        out.finish[i] = t + node.duration
        last_w[w] = i
        for q in node.operands:
            last_q[q] = i
    out.total = max(out.finish.values(), default=0)
    for q, j in last_q.items():
        if q in placement.port_binding:
            exit_ = placement.port_binding[q][1]
            hops = fabric.physical_distance(where[j], exit_)
            legs.append((q, where[j], exit_, out.finish[j], out.finish[j] + hops * mv))
            out.total = max(out.total, out.finish[j] + hops * mv)
            out.life[q] = (out.life[q][0], out.finish[j] + hops * mv)
        else:
            out.life[q] = (out.life[q][0], out.finish[j])
    for q, src, dst, ready, arrive in legs:
        path = fabric.shortest_path(src, dst)
        n = len(path) - 1
        for k in range(n):
            # all hops as early as possible, the last one timed to land on arrival
            t = ready + k * mv if k < n - 1 else arrive - mv
            out.moves.append((t, q, path[k], path[k + 1]))
    return out


def lower_bound(g, placement, fabric) -> int:
    return ideal_timeline(g, placement, fabric).total


def conflicts(g, placement, fabric) -> list[str]:
    """Rule breaks in the ideal timeline (empty means contention-free)."""
    ideal = ideal_timeline(g, placement, fabric)
    cfg = fabric.config
    mv = cfg.move_delay
    found: list[str] = []

    # channels: direction and capacity over overlapping flights
    by_channel = defaultdict(list)
    for t, q, a, b in ideal.moves:
        by_channel[frozenset((a, b))].append((t, q, a))
    for key, flights in by_channel.items():
        for idx, (t1, q1, a1) in enumerate(flights):
            overlapping = [f for f in flights if abs(f[0] - t1) < mv]
            if any(f[1] != q1 for f in overlapping):
                found.append(f"channel {sorted(key)} shared at {t1}")
                break

    # reservations: no move may touch a well while an operation runs there
    ops_on = defaultdict(list)
    for i, s in ideal.start.items():
        ops_on[placement.assignment[i]].append((s, ideal.finish[i], i))
    for t, q, a, b in ideal.moves:
        for w in (a, b):
            for s, e, i in ops_on[w]:
                if s - mv < t < e:
                    found.append(f"move of {q} at {t} touches well {w} during I{i}")

    # creation wells are reserved while qubits are created
    if cfg.create_delay:
        for q, c in placement.qubit_origin.items():
            for t, _, a, b in ideal.moves:
                if c in (a, b) and t < cfg.create_delay:
                    found.append(f"move touches creation well {c} during creation")

    # occupancy: a qubit counts in its destination from departure
    stay = {}
    for q, (appear, vanish) in ideal.life.items():
        stay[q] = (appear, vanish)
    where_at = defaultdict(list)  # qubit -> [(from time, well)]
    for q in ideal.life:
        if q in placement.port_binding:
            continue
        where_at[q].append((0, placement.qubit_origin[q]))
    for t, q, a, b in sorted(ideal.moves):
        where_at[q].append((t, b))
    times = sorted({0} | {t for t, *_ in ideal.moves} | set(ideal.finish.values()))
    for t in times:
        occ = defaultdict(int)
        for q, seq in where_at.items():
            appear, vanish = stay[q]
            if vanish is not None and t >= vanish:
                continue
            cur = [w for since, w in seq if since <= t]
            if cur:
                occ[cur[-1]] += 1
        for w, n in occ.items():
            if n > cfg.well_capacity:
                found.append(f"well {w} holds {n} at {t}")
    return found
