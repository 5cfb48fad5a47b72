"""Command-line driver: ``ulbmap <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from pathlib import Path

from . import fabric as fabric_mod
from .config import FabricConfig, apply_overrides, read_key_values
from .emulator import validate
from .errors import UlbmapError
from .flow import FlowConfig, map_circuit, prepare, run_candidate
from .placer import PlacerConfig
from .qidg import ControlOrder, from_qasm
from .scheduler import (
    DEFAULT_ALPHAS,
    SchedulerConfig,
    exact_oracle,
    preprocess,
    schedule_enumerated,
    validate_schedule,
)
from .sizer import TOFFOLI_WORKLOAD, WorkloadModel, best_size, default_l_r1, profile_sizes


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value file (fabric, scheduler, placer keys)")
    common.add_argument("--format", choices=("json", "csv", "text"), default="text")
    common.add_argument("--ulb-n", type=int, help="ULB size n (n x n templates)")
    common.add_argument("--layout", type=Path, help="template layout file")
    common.add_argument("--control", choices=[c.value for c in ControlOrder], default=None,
                        help="which operand of a two-qubit gate is the control")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--nmax", type=int, help="per-level instruction cap (default: interaction wells)")
    common.add_argument("--alpha-set", type=_floats, help="comma-separated alpha values")

    p = argparse.ArgumentParser(prog="ulbmap", description="Trapped-ion ULB mapping toolchain")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("parse", parents=[common], help="QASM -> dependency graph dump")
    s.add_argument("circuit", type=Path)
    s.add_argument("--dot", action="store_true", help="emit Graphviz instead of a table")

    s = sub.add_parser("schedule", parents=[common], help="graph -> schedule table")
    s.add_argument("circuit", type=Path)
    s.add_argument("--oracle", action="store_true", help="also report the exact minimum level count")

    s = sub.add_parser("map", parents=[common], help="full flow -> command stream")
    s.add_argument("circuit", type=Path)
    s.add_argument("--fast", action="store_true", help="carry only the default cap through routing")
    s.add_argument("--no-defer", action="store_true", help="fixed-level placement")
    s.add_argument("-o", "--out", type=Path, help="command stream file (default: <circuit>.cmds)")

    s = sub.add_parser("validate", parents=[common], help="replay a command stream")
    s.add_argument("stream", type=Path)
    s.add_argument("--circuit", type=Path, required=True)

    s = sub.add_parser("size", parents=[common], help="pick the best ULB size")
    s.add_argument("ops", type=Path, help="directory of <operation>.qasm files")
    s.add_argument("--workload", default="toffoli",
                   help="'toffoli' or a key = value file (w_<op>, d_r_avg, l_r1)")
    s.add_argument("--sizes", type=_ints, default=[1, 2, 3])
    s.add_argument("--fast", action="store_true")

    s = sub.add_parser("plotdata", parents=[common], help="CSV for alpha or size sweeps")
    s.add_argument("circuit", type=Path)
    s.add_argument("--sweep", choices=("alpha", "n"), default="alpha")
    s.add_argument("--sizes", type=_ints, default=[1, 2, 3])
    return p


def flow_config(args) -> FlowConfig:
    values: dict = {}
    if args.config:
        values.update(read_key_values(args.config))
    flags = {
        "ulb_n": args.ulb_n,
        "layout": str(args.layout) if args.layout else None,
        "seed": args.seed,
        "n_max": args.nmax,
        "alpha_set": args.alpha_set,
    }
    values.update({k: v for k, v in flags.items() if v is not None})
    fab = apply_overrides(FabricConfig(), values)
    sched = apply_overrides(SchedulerConfig(), values)
    if isinstance(sched.alpha_set, str):
        sched = dataclasses.replace(sched, alpha_set=_floats(sched.alpha_set))
    placer = apply_overrides(PlacerConfig(), values)
    control = args.control or values.get("control", ControlOrder.FIRST.value)
    return FlowConfig(
        fabric=fab, scheduler=sched, placer=placer, control_order=ControlOrder(control),
        defer=not getattr(args, "no_defer", False), fast=getattr(args, "fast", False),
        workers=args.workers,
    )


def emit(rows: list[dict], fmt: str, out=None, extra: dict | None = None) -> None:
    out = out or sys.stdout
    if fmt == "json":
        payload = {"rows": rows, **(extra or {})}
        out.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    elif fmt == "csv":
        if rows:
            w = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    else:
        if rows:
            keys = list(rows[0])
            out.write(" ".join(keys) + "\n")
            for r in rows:
                out.write(" ".join(str(r[k]) for k in keys) + "\n")
        for k, v in (extra or {}).items():
            out.write(f"{k}: {v}\n")


def cmd_parse(args, cfg: FlowConfig) -> int:
    g = from_qasm(args.circuit.read_text(), cfg.fabric, cfg.control_order)
    if args.dot:
        sys.stdout.write(g.dump_dot())
        return 0
    rows = []
    for i in sorted(g.nodes):
        n = g.nodes[i]
        rows.append({
            "instruction": i, "opcode": n.opcode, "operands": " ".join(n.operands),
            "parents": " ".join(map(str, sorted(g.parents[i]))) or "-",
            "siblings": " ".join(map(str, sorted(g.siblings[i]))) or "-",
            "asap": g.asap[i], "alap": g.alap[i],
        })
    emit(rows, args.format, extra={"qubits": len(g.decls), "edges": len(g.edges)})
    return 0


def cmd_schedule(args, cfg: FlowConfig) -> int:
    g, fab, scfg = prepare(args.circuit.read_text(), cfg)
    cands, default = schedule_enumerated(g, scfg)
    rows = []
    for c in cands:
        problems = validate_schedule(g, c.schedule)
        for i in sorted(c.schedule.level):
            rows.append({"alpha": c.alpha, "n_cap": c.n_cap, "instruction": i,
                         "level": c.schedule.level[i], "valid": not problems})
    extra = {"default_alpha": default.alpha, "default_levels": default.schedule.num_levels}
    if args.oracle:
        raw = from_qasm(args.circuit.read_text(), cfg.fabric, cfg.control_order)
        extra["oracle_levels"] = exact_oracle(raw, default.n_cap)
    emit(rows, args.format, extra=extra)
    return 0


def cmd_map(args, cfg: FlowConfig) -> int:
    res = map_circuit(args.circuit.read_text(), cfg)
    out = args.out or args.circuit.with_suffix(".cmds")
    out.write_text(res.best.stream)
    rows = [{"alpha": c.alpha, "n_cap": c.n_cap, "levels": c.levels, "deferrals": c.deferrals,
             "latency_us": c.latency if c.latency is not None else "-",
             "status": "ok" if c.ok else c.error} for c in res.candidates]
    emit(rows, args.format, extra={"best_alpha": res.best.alpha, "total_latency_us": res.best.latency,
                                   "stream": str(out)})
    return 0


def cmd_validate(args, cfg: FlowConfig) -> int:
    fab = fabric_mod.build(cfg.fabric)
    g = from_qasm(args.circuit.read_text(), cfg.fabric, cfg.control_order)
    preprocess(g)
    report = validate(args.stream.read_text(), fab, g)
    if args.format == "json":
        sys.stdout.write(report.to_json() + "\n")
    elif args.format == "csv":
        emit([dataclasses.asdict(v) for v in report.violations], "csv")
    else:
        sys.stdout.write(report.to_text())
    return 0 if report.ok else 1


def load_workload(source: str) -> WorkloadModel:
    if source == "toffoli":
        return TOFFOLI_WORKLOAD
    kv = read_key_values(source)
    weights = {k[2:]: float(v) for k, v in kv.items() if k.startswith("w_")}
    l_r1 = float(kv["l_r1"]) if "l_r1" in kv else None
    return WorkloadModel(weights, float(kv.get("d_r_avg", 0)), l_r1)


def cmd_size(args, cfg: FlowConfig) -> int:
    w = load_workload(args.workload)
    ops = {p.stem: p for p in sorted(args.ops.glob("*.qasm")) if p.stem in w.weights}
    missing = sorted(set(o for o, x in w.weights.items() if x) - set(ops))
    if missing:
        raise UlbmapError(f"no circuit for weighted operation(s): {', '.join(missing)}")
    table = profile_sizes(ops, args.sizes, cfg, workers=args.workers)
    l_r1 = w.l_r1 if w.l_r1 is not None else default_l_r1(cfg.fabric)
    n_best, values = best_size(table, w, args.sizes, l_r1)
    rows = []
    for n in args.sizes:
        row = {"n": n}
        for op in sorted(table.latency):
            lat = table.latency[op].get(n)
            row[op] = lat if lat is not None else "infeasible"
        row["objective"] = values.get(n, "infeasible")
        rows.append(row)
    emit(rows, args.format, extra={"n_best": n_best, "l_r1": l_r1})
    return 0


def cmd_plotdata(args, cfg: FlowConfig) -> int:
    text = args.circuit.read_text()
    rows = []
    if args.sweep == "alpha":
        res = map_circuit(text, cfg)
        for c in res.candidates:
            rows.append({"alpha": c.alpha, "n_cap": c.n_cap,
                         "latency_us": c.latency if c.ok else "failed"})
    else:
        for n in args.sizes:
            sub = dataclasses.replace(cfg, fabric=dataclasses.replace(cfg.fabric, ulb_n=n))
            try:
                lat = map_circuit(text, sub).best.latency
            except UlbmapError as exc:
                lat = type(exc).__name__
            rows.append({"n": n, "latency_us": lat})
    emit(rows, "json" if args.format == "json" else "csv")
    return 0


COMMANDS = {
    "parse": cmd_parse, "schedule": cmd_schedule, "map": cmd_map,
    "validate": cmd_validate, "size": cmd_size, "plotdata": cmd_plotdata,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = flow_config(args)
        return COMMANDS[args.cmd](args, cfg)
    except (UlbmapError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
