"""ULB size exploration and the Toffoli workload model."""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .config import FabricConfig
from .errors import NoCreationWell, NoFeasibleSize, UlbmapError


@dataclass
class OpLatencyTable:
    """Best validated latency per operation and ULB size; ``None`` = infeasible."""

    sizes: list[int]
    latency: dict[str, dict[int, int | None]] = field(default_factory=dict)
    notes: dict[tuple[str, int], str] = field(default_factory=dict)

    def feasible(self, n: int) -> bool:
        return all(row.get(n) is not None for row in self.latency.values())

    def to_csv(self) -> str:
        ops = sorted(self.latency)
        lines = ["n," + ",".join(ops)]
        for n in self.sizes:
            cells = [str(self.latency[o].get(n)) if self.latency[o].get(n) is not None else "infeasible"
                     for o in ops]
            lines.append(f"{n}," + ",".join(cells))
        return "\n".join(lines) + "\n"


@dataclass
class WorkloadModel:
    weights: dict[str, float]
    d_r_avg: float
    l_r1: float | None = None  # None: one template edge of moves

    def __post_init__(self) -> None:
        if any(w < 0 for w in self.weights.values()) or self.d_r_avg < 0:
            raise ValueError("workload weights and D_r_avg must be non-negative")


TOFFOLI_WORKLOAD = WorkloadModel({"T": 2, "Tdag": 2, "CNOT": 6, "H": 1}, 13)


def default_l_r1(cfg: FabricConfig | None = None) -> float:
    """Move time across one 1x1 ULB edge."""
    cfg = cfg or FabricConfig()
    return cfg.template_cols * cfg.move_delay


def size_objective(table: OpLatencyTable, w: WorkloadModel, n: int, l_r1: float) -> float:
    total = n * l_r1 * w.d_r_avg
    for op, weight in w.weights.items():
        if weight == 0:
            continue
        lat = table.latency.get(op, {}).get(n)
        if lat is None:
            raise NoFeasibleSize(f"no latency for {op} at n={n}")
        total += weight * lat
    return total


def best_size(table: OpLatencyTable, w: WorkloadModel, sizes: Sequence[int] | None = None,
              l_r1: float | None = None) -> tuple[int, dict[int, float]]:
    """Size minimising inter-ULB routing plus weighted operation latency.

    Sizes where a weighted operation has no mapping are skipped; ties go to
    the smaller size.
    """
    sizes = list(sizes if sizes is not None else table.sizes)
    l_r1 = l_r1 if l_r1 is not None else (w.l_r1 if w.l_r1 is not None else default_l_r1())
    values: dict[int, float] = {}
    for n in sizes:
        try:
            values[n] = size_objective(table, w, n, l_r1)
        except NoFeasibleSize:
            continue
    if not values:
        raise NoFeasibleSize("no candidate size has a mapping for every weighted operation")
    best = min(values, key=lambda n: (values[n], n))
    return best, values


# -- Toffoli accounting -------------------------------------------------------------------


@dataclass(frozen=True)
class LedgerRow:
    slot: str
    opcode: str
    qubits: tuple[str, ...]
    ulb: int                       # 1 top-left, 2 top-right, 3 bottom-left, 4 bottom-right
    begin: tuple[int, int, int]    # ULB of q0, q1, q2 before the operation
    end: tuple[int, int, int]
    routing_hops: int              # inter-ULB hops charged to this row
    critical: bool

    def cost(self, latency: Mapping[str, float], n: int, l_r1: float) -> float:
        if not self.critical:
            return 0
        return latency[self.opcode] + self.routing_hops * n * l_r1

    def formula(self) -> str:
        hops = {0: "", 1: " + n*L_r1"}.get(self.routing_hops, f" + {self.routing_hops}n*L_r1")
        return f"L_{self.opcode}(n){hops}"


TOFFOLI_LEDGER: tuple[LedgerRow, ...] = (
    LedgerRow("1", "H", ("q2",), 3, (1, 2, 3), (1, 2, 3), 0, True),
    LedgerRow("2", "CNOT", ("q1", "q2"), 2, (1, 2, 3), (1, 2, 2), 2, True),
    LedgerRow("3", "Tdag", ("q2",), 4, (1, 2, 2), (1, 2, 4), 1, True),
    LedgerRow("4", "CNOT", ("q0", "q2"), 1, (1, 2, 4), (1, 2, 1), 2, True),
    LedgerRow("5", "T", ("q2",), 3, (1, 2, 1), (1, 2, 3), 1, True),
    LedgerRow("6", "CNOT", ("q1", "q2"), 2, (1, 2, 3), (1, 2, 2), 2, True),
    LedgerRow("7.a", "Tdag", ("q2",), 4, (1, 2, 2), (1, 2, 4), 1, True),
    LedgerRow("7.b", "T", ("q1",), 2, (1, 2, 2), (1, 2, 4), 0, False),
    LedgerRow("8", "CNOT", ("q0", "q2"), 4, (1, 2, 4), (4, 2, 4), 1, True),
    LedgerRow("9.a", "T", ("q2",), 3, (4, 2, 4), (2, 2, 3), 1, False),
    LedgerRow("9.b", "CNOT", ("q0", "q1"), 4, (4, 2, 4), (2, 2, 3), 1, True),
    LedgerRow("10.a", "H", ("q2",), 3, (2, 2, 3), (1, 2, 3), 0, False),
    LedgerRow("10.b", "T", ("q0",), 1, (2, 2, 3), (1, 2, 3), 1, True),
    LedgerRow("10.c", "Tdag", ("q1",), 2, (2, 2, 3), (1, 2, 3), 0, False),
    LedgerRow("11", "CNOT", ("q0", "q1"), 1, (1, 2, 3), (1, 1, 3), 1, True),
)


def toffoli_ledger(latency: Mapping[str, float], n: int, l_r1: float) -> list[tuple[LedgerRow, float]]:
    return [(row, row.cost(latency, n, l_r1)) for row in TOFFOLI_LEDGER]


def toffoli_cost(latency: Mapping[str, float], n: int, l_r1: float) -> float:
    """Critical-path latency of the two-control Toffoli on a 2x2 ULB mesh."""
    return (2 * latency["T"] + 2 * latency["Tdag"] + 6 * latency["CNOT"] + latency["H"]
            + 13 * n * l_r1)


# -- profiling ---------------------------------------------------------------------------


def _profile_one(args) -> tuple[str, int, int | None, str]:
    from .flow import FlowConfig, map_circuit

    op, text, n, base = args
    cfg = dataclasses.replace(base, fabric=dataclasses.replace(base.fabric, ulb_n=n), workers=1)
    try:
        res = map_circuit(text, cfg)
    except NoCreationWell as exc:
        return op, n, None, f"NoCreationWell: {exc}"
    except UlbmapError as exc:
        return op, n, None, f"{type(exc).__name__}: {exc}"
    return op, n, res.best.latency, ""


def profile_sizes(op_circuits: Mapping[str, str | Path], sizes: Sequence[int], cfg=None,
                  workers: int = 1) -> OpLatencyTable:
    """Map every operation circuit on every ULB size and keep the best latency.

    ``op_circuits`` maps an operation name to a QASM path or QASM text.
    """
    from .flow import FlowConfig

    cfg = cfg or FlowConfig()
    jobs = []
    for op in sorted(op_circuits):
        src = op_circuits[op]
        text = Path(src).read_text() if isinstance(src, Path) or "\n" not in str(src) else str(src)
        for n in sizes:
            jobs.append((op, text, n, cfg))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_profile_one, jobs))
    else:
        results = [_profile_one(j) for j in jobs]
    table = OpLatencyTable(sorted(sizes))
    for op, n, lat, note in sorted(results, key=lambda r: (r[0], r[1])):
        table.latency.setdefault(op, {})[n] = lat
        if note:
            table.notes[(op, n)] = note
    return table
