"""End-to-end mapping: parse, schedule, place, route, validate."""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from . import fabric as fabric_mod
from .config import FabricConfig
from .emulator import Report, validate
from .errors import UlbmapError
from .fabric import FabricGraph
from .placer import PlacementState, PlacerConfig, check_creation_capacity, place_with_deferral
from .qidg import ControlOrder, Qidg, from_qasm
from .router import RouteResult, dynamic_route
from .scheduler import Schedule, SchedulerConfig, preprocess, schedule_enumerated


@dataclass
class FlowConfig:
    fabric: FabricConfig = field(default_factory=FabricConfig)
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    placer: PlacerConfig = field(default_factory=PlacerConfig)
    control_order: ControlOrder = ControlOrder.FIRST
    defer: bool = True
    fast: bool = False   # carry only the default cap through placement and routing
    workers: int = 1


@dataclass
class CandidateResult:
    alpha: float
    n_cap: int
    levels: int = 0
    latency: int | None = None
    deferrals: int = 0
    error: str | None = None
    stream: str = ""
    report: Report | None = None
    placement: PlacementState | None = None
    route: RouteResult | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.report is not None and self.report.ok


@dataclass
class FlowResult:
    graph: Qidg
    fabric: FabricGraph
    candidates: list[CandidateResult]
    best: CandidateResult


def prepare(text: str, cfg: FlowConfig) -> tuple[Qidg, FabricGraph, SchedulerConfig]:
    fab = fabric_mod.build(cfg.fabric)
    g = from_qasm(text, cfg.fabric, cfg.control_order)
    check_creation_capacity(g, fab)
    preprocess(g)
    scfg = cfg.scheduler
    if scfg.n_max is None:
        scfg = dataclasses.replace(scfg, n_max=len(fab.interaction_wells))
    return g, fab, scfg


def run_candidate(g: Qidg, schedule: Schedule, fab: FabricGraph, cfg: FlowConfig,
                  alpha: float) -> CandidateResult:
    res = CandidateResult(alpha, schedule.n_cap)
    try:
        placement = place_with_deferral(g, schedule, fab, cfg.placer, defer=cfg.defer)
        route = dynamic_route(g, placement, fab)
    except UlbmapError as exc:
        res.error = f"{type(exc).__name__}: {exc}"
        return res
    res.placement, res.route = placement, route
    res.levels = placement.schedule.num_levels
    res.deferrals = placement.deferrals
    res.stream = route.stream()
    res.report = validate(res.stream, fab, g)
    res.latency = res.report.total_latency
    if not res.report.ok:
        res.error = "validation failed: " + "; ".join(v.rule for v in res.report.violations[:5])
    return res


def _worker(args) -> CandidateResult:
    text, cfg, alpha, n_cap = args
    g, fab, scfg = prepare(text, cfg)
    from .scheduler import fds_schedule

    schedule = fds_schedule(g, scfg, n_cap)
    res = run_candidate(g, schedule, fab, cfg, alpha)
    res.placement = res.route = None  # keep the payload small
    return res


def map_circuit(text: str, cfg: FlowConfig | None = None) -> FlowResult:
    """Map a QASM circuit; the best candidate has the lowest validated latency."""
    cfg = cfg or FlowConfig()
    g, fab, scfg = prepare(text, cfg)
    cands, default = schedule_enumerated(g, scfg)
    if cfg.fast:
        cands = [default]
    seen: dict[int, CandidateResult] = {}
    results: list[CandidateResult] = []
    if cfg.workers > 1 and len({c.n_cap for c in cands}) > 1:
        unique = sorted({c.n_cap: c for c in cands}.values(), key=lambda c: -c.n_cap)
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            done = list(pool.map(_worker, [(text, cfg, c.alpha, c.n_cap) for c in unique]))
        seen = {r.n_cap: r for r in done}
    for c in cands:
        if c.n_cap not in seen:
            seen[c.n_cap] = run_candidate(g, c.schedule, fab, cfg, c.alpha)
        base = seen[c.n_cap]
        results.append(dataclasses.replace(base, alpha=c.alpha))
    good = [r for r in results if r.ok]
    if not good:
        raise UlbmapError("no candidate mapped successfully: " +
                          "; ".join(f"alpha={r.alpha}: {r.error}" for r in results))
    best = min(good, key=lambda r: r.latency)
    return FlowResult(g, fab, results, best)
