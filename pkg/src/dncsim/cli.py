"""Command-line front end: single runs, load sweeps, topology validation.

Subcommands::

    dncsim run      --topology T --scenario S --out DIR [--debug-invariants]
    dncsim sweep    --topology T --sweep W --out DIR [--workers N]
                                                     [--debug-invariants]
    dncsim validate --topology T

``run`` writes ``clients.csv`` (one row per client) and ``summary.json``;
``sweep`` writes ``sweep.csv`` with one row per (load, mode, seed) in that
sorted order.  All floating-point output uses 9 significant digits, UTF-8,
LF line endings, so identical inputs reproduce identical bytes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .engine import RunSummary, run
from .network import Topology, TopologyError, load_topology
from .workload import (MODES, Scenario, ScenarioError, parse_kv_document,
                       parse_scenario, scenario_from_mapping)

__all__ = ["main", "cmd_run", "cmd_sweep", "cmd_validate", "SweepSpec"]

CLIENTS_HEADER = ("client_id,arrival_s,duration_s,access_switch,accepted,"
                  "quality_bps,path,cumulative_rebuffering_s")
SWEEP_HEADER = ("load,mode,seed,rejection_probability,mean_quality_bps,"
                "q05_bps,q95_bps,max_client_rebuffering_s,"
                "total_rebuffering_s")

DEFAULT_LOADS = tuple(float(x) for x in range(20, 201, 20))
DEFAULT_SWEEP_MODES = ("dnc-paper", "fairshare")
DEFAULT_SEEDS = (1, 2, 3)


def default_topology_path() -> str:
    """Path of the packaged default topology document."""
    return os.path.join(os.path.dirname(__file__), "data", "default.topo")


# ---------------------------------------------------------------------------
# deterministic formatting
# ---------------------------------------------------------------------------

def fmt_float(x: float) -> str:
    """9-significant-digit decimal form used in every output file."""
    return format(float(x), ".9g")


def _fmt_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return fmt_float(value)
    return str(value)


def json_dumps(obj, indent: int = 0) -> str:
    """JSON with fixed key order and 9-significant-digit floats."""
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            f"{pad}  {json.dumps(str(k))}: {json_dumps(v, indent + 1)}"
            for k, v in obj.items())
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = ",\n".join(f"{pad}  {json_dumps(v, indent + 1)}"
                           for v in obj)
        return "[\n" + items + "\n" + pad + "]"
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt_float(obj)
    return json.dumps(str(obj))


def summary_mapping(summary: RunSummary) -> dict:
    """RunSummary as a plain mapping, mirrored one-to-one into JSON."""
    return {
        "scenario": summary.scenario.document_mapping(),
        "accepted": summary.accepted,
        "rejected": summary.rejected,
        "rejection_probability": summary.rejection_probability,
        "mean_quality_bps": summary.mean_quality_bps,
        "q05_bps": summary.q05_bps,
        "q95_bps": summary.q95_bps,
        "total_time_s": summary.total_time_s,
        "clients": [
            {
                "client_id": r.client_id,
                "arrival_s": r.arrival_s,
                "duration_s": r.duration_s,
                "access_switch": r.access_switch,
                "accepted": r.accepted,
                "quality_bps": r.quality_bps,
                "path": list(r.path),
                "cumulative_rebuffering_s": r.cumulative_rebuffering_s,
            }
            for r in summary.records
        ],
    }


def clients_csv_lines(summary: RunSummary) -> List[str]:
    lines = [CLIENTS_HEADER]
    for r in summary.records:
        lines.append(",".join([
            str(r.client_id),
            fmt_float(r.arrival_s),
            fmt_float(r.duration_s),
            r.access_switch,
            "1" if r.accepted else "0",
            fmt_float(r.quality_bps),
            "|".join(r.path),
            fmt_float(r.cumulative_rebuffering_s),
        ]))
    return lines


def _write_text(path: str, lines: Sequence[str]):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# sweep configuration
# ---------------------------------------------------------------------------

@dataclass
class SweepSpec:
    loads: Tuple[float, ...]
    modes: Tuple[str, ...]
    seeds: Tuple[int, ...]
    base: Dict[str, tuple]   # raw scenario keys shared by all points

    def points(self) -> List[Tuple[float, str, int]]:
        out = [(load, mode, seed) for load in self.loads
               for mode in self.modes for seed in self.seeds]
        out.sort()
        return out

    def scenario_for(self, load: float, mode: str, seed: int) -> Scenario:
        values = dict(self.base)
        values["target_avg_clients"] = (0, repr(load))
        values["mode"] = (0, mode)
        values["seed"] = (0, str(seed))
        return scenario_from_mapping(values, source="sweep")


def parse_sweep(text: str) -> SweepSpec:
    """Parse a sweep document: ``loads``, ``modes``, ``seeds`` plus any
    scenario keys shared by every point."""
    values = parse_kv_document(text)
    for forbidden in ("target_avg_clients", "mode", "seed"):
        if forbidden in values:
            lineno = values[forbidden][0]
            raise ScenarioError(
                f"line {lineno}: {forbidden!r} is set per sweep point, "
                f"not in the sweep document")

    def _pop_list(key, default, conv):
        if key not in values:
            return default
        lineno, raw = values.pop(key)
        try:
            items = tuple(conv(v) for v in raw.split(",") if v.strip())
        except ValueError:
            raise ScenarioError(
                f"line {lineno}: bad value {raw!r} for {key!r}") from None
        if not items:
            raise ScenarioError(f"line {lineno}: {key!r} must not be empty")
        return items

    loads = _pop_list("loads", DEFAULT_LOADS, float)
    modes = _pop_list("modes", DEFAULT_SWEEP_MODES, str)
    seeds = _pop_list("seeds", DEFAULT_SEEDS, int)
    for mode in modes:
        if mode not in MODES:
            raise ScenarioError(f"unknown mode {mode!r} in sweep modes")
    if any(load <= 0 for load in loads):
        raise ScenarioError("sweep loads must be positive")
    return SweepSpec(loads, modes, seeds, values)


def sweep_row(load: float, mode: str, seed: int,
              summary: RunSummary) -> dict:
    rebuf = [r.cumulative_rebuffering_s for r in summary.records
             if r.accepted]
    return {
        "load": load,
        "mode": mode,
        "seed": seed,
        "rejection_probability": summary.rejection_probability,
        "mean_quality_bps": summary.mean_quality_bps,
        "q05_bps": summary.q05_bps,
        "q95_bps": summary.q95_bps,
        "max_client_rebuffering_s": max(rebuf) if rebuf else 0.0,
        "total_rebuffering_s": sum(rebuf) if rebuf else 0.0,
    }


def run_sweep(topology_path: str, spec: SweepSpec, workers: int = 1,
              debug_invariants: bool = False,
              progress=None) -> List[dict]:
    """Execute every sweep point; rows come back sorted by
    (load, mode, seed) regardless of execution order."""
    points = spec.points()
    rows = []
    if workers <= 1:
        with open(topology_path, encoding="utf-8") as fh:
            topology = load_topology(fh.read())
        for i, (load, mode, seed) in enumerate(points, 1):
            scenario = spec.scenario_for(load, mode, seed)
            summary = run(scenario, topology, debug_invariants)
            rows.append(sweep_row(load, mode, seed, summary))
            if progress:
                progress(i, len(points), load, mode, seed)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_sweep_point, topology_path,
                            spec.scenario_for(load, mode, seed),
                            debug_invariants)
                for load, mode, seed in points
            ]
            for i, ((load, mode, seed), fut) in enumerate(
                    zip(points, futures), 1):
                rows.append(sweep_row(load, mode, seed, fut.result()))
                if progress:
                    progress(i, len(points), load, mode, seed)
    return rows


def _sweep_point(topology_path: str, scenario: Scenario,
                 debug_invariants: bool) -> RunSummary:
    with open(topology_path, encoding="utf-8") as fh:
        topology = load_topology(fh.read())
    return run(scenario, topology, debug_invariants)


def sweep_csv_lines(rows: List[dict]) -> List[str]:
    lines = [SWEEP_HEADER]
    for row in rows:
        lines.append(",".join(_fmt_cell(row[key])
                              for key in SWEEP_HEADER.split(",")))
    return lines


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from None


def cmd_run(topology_path: str, scenario_path: str, out_dir: str,
            debug_invariants: bool = False) -> int:
    try:
        topology = load_topology(_read(topology_path))
    except (TopologyError, ScenarioError) as exc:
        print(f"error: {topology_path}: {exc}", file=sys.stderr)
        return 1
    try:
        scenario = parse_scenario(_read(scenario_path))
    except ScenarioError as exc:
        print(f"error: {scenario_path}: {exc}", file=sys.stderr)
        return 1
    summary = run(scenario, topology, debug_invariants)
    os.makedirs(out_dir, exist_ok=True)
    _write_text(os.path.join(out_dir, "clients.csv"),
                clients_csv_lines(summary))
    _write_text(os.path.join(out_dir, "summary.json"),
                [json_dumps(summary_mapping(summary))])
    return 0


def cmd_sweep(topology_path: str, sweep_path: str, out_dir: str,
              workers: int = 1, debug_invariants: bool = False) -> int:
    try:
        load_topology(_read(topology_path))   # fail fast with a diagnostic
    except (TopologyError, ScenarioError) as exc:
        print(f"error: {topology_path}: {exc}", file=sys.stderr)
        return 1
    try:
        spec = parse_sweep(_read(sweep_path))
        # validate the per-point scenarios before spending any time
        for load, mode, seed in spec.points():
            spec.scenario_for(load, mode, seed)
    except ScenarioError as exc:
        print(f"error: {sweep_path}: {exc}", file=sys.stderr)
        return 1

    def progress(i, n, load, mode, seed):
        print(f"[{i}/{n}] load={fmt_float(load)} mode={mode} seed={seed}",
              file=sys.stderr)

    rows = run_sweep(topology_path, spec, workers, debug_invariants,
                     progress)
    os.makedirs(out_dir, exist_ok=True)
    _write_text(os.path.join(out_dir, "sweep.csv"), sweep_csv_lines(rows))
    return 0


def cmd_validate(topology_path: str) -> int:
    try:
        topology = load_topology(_read(topology_path))
    except (TopologyError, ScenarioError) as exc:
        print(f"error: {topology_path}: {exc}", file=sys.stderr)
        return 1
    hosts = sum(1 for n in topology.nodes.values() if n.role == "host")
    switches = len(topology.nodes) - hosts
    print(f"nodes: {len(topology.nodes)} ({switches} switches, "
          f"{hosts} hosts)")
    print(f"edges: {len(topology.edges())}")
    print(f"server: {topology.server}")
    print(f"access switches: {' '.join(topology.access_switches) or '-'}")
    print("ok")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="dncsim",
        description="Admission-control simulator with deterministic "
                    "network-calculus delay guarantees")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario")
    p_run.add_argument("--topology", required=True)
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--debug-invariants", action="store_true")

    p_sweep = sub.add_parser("sweep", help="run a load sweep")
    p_sweep.add_argument("--topology", required=True)
    p_sweep.add_argument("--sweep", required=True)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.add_argument("--debug-invariants", action="store_true")

    p_val = sub.add_parser("validate", help="validate a topology document")
    p_val.add_argument("--topology", required=True)

    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args.topology, args.scenario, args.out,
                       args.debug_invariants)
    if args.command == "sweep":
        return cmd_sweep(args.topology, args.sweep, args.out, args.workers,
                         args.debug_invariants)
    return cmd_validate(args.topology)


if __name__ == "__main__":
    sys.exit(main())
