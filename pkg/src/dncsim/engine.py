"""Discrete-event simulation loop and run metrics.

One run processes a seeded arrival sequence against a topology: each
arrival attaches a client host, runs the scenario's admission policy and,
if accepted, schedules a departure; each departure releases the flow and,
in fair-share mode, reallocates the survivors.  Ties in event time break
as (time, arrivals before departures, client id).

Between events every live client's worst-case chunk delay is piecewise
constant, so the engine tracks it as a per-client step function and sums
the per-chunk deadline excess at departure.  The delay bounds recorded for
rebuffering always use the closed-form ("paper") residual model, whichever
mode made the admission decisions.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from . import kernels
from .admission import (RepresentationLadder, dnc_admit, fairshare_admit,
                        fairshare_reallocate)
from .network import EdgeState, Topology
from .workload import Scenario, attachment_generator, generate_arrivals

__all__ = [
    "ClientRecord",
    "RunSummary",
    "InvariantViolation",
    "run",
    "accumulate_rebuffering",
    "moving_average_quality",
    "quality_percentile",
]


class InvariantViolation(AssertionError):
    """A debug-mode sweep found a broken run invariant."""


@dataclass
class ClientRecord:
    client_id: int
    arrival_s: float
    duration_s: float
    access_switch: str
    accepted: bool
    quality_bps: float
    path: Tuple[str, ...]
    cumulative_rebuffering_s: float


@dataclass
class RunSummary:
    scenario: Scenario
    accepted: int
    rejected: int
    rejection_probability: float
    mean_quality_bps: Optional[float]
    q05_bps: Optional[float]
    q95_bps: Optional[float]
    total_time_s: float
    records: List[ClientRecord]


@dataclass
class _Session:
    client_id: int
    host: str
    arrival: float
    duration: float
    access_switch: str
    quality: float
    path_nodes: Tuple[str, ...]
    times: List[float]
    bounds: List[float]
    last: Optional[float] = None


def accumulate_rebuffering(arrival_s: float, duration_s: float, tau_s: float,
                           times: np.ndarray, bounds: np.ndarray,
                           unbounded_cap_s: float) -> float:
    """Total deadline excess over a session's chunks.

    The session plays ``ceil(duration/tau)`` chunks starting at
    ``arrival + (k-1)*tau``; each chunk's worst-case download delay is the
    step function ``(times, bounds)`` sampled at the chunk start.  A finite
    delay d contributes ``max(0, d - tau)``; an unbounded delay (inf)
    contributes ``unbounded_cap_s``.
    """
    n_chunks = math.ceil(duration_s / tau_s)
    times = np.ascontiguousarray(times, dtype=np.float64)
    bounds = np.ascontiguousarray(bounds, dtype=np.float64)
    return kernels.chunk_excess(times, bounds, arrival_s, n_chunks, tau_s,
                                unbounded_cap_s)


def moving_average_quality(qualities, window: int) -> np.ndarray:
    """Sliding mean over accepted clients' qualities in arrival order.

    Output length is ``len(qualities) - window + 1`` (empty when there are
    fewer values than the window).
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    values = np.asarray(qualities, dtype=np.float64)
    if values.size < window:
        return np.empty(0, dtype=np.float64)
    kernel = np.full(window, 1.0 / window)
    return np.convolve(values, kernel, mode="valid")


def quality_percentile(qualities, p: float) -> Optional[float]:
    """Nearest-rank percentile of the accepted qualities (None if empty)."""
    if not 0 <= p <= 100:
        raise ValueError(f"percentile {p} outside [0, 100]")
    values = np.sort(np.asarray(qualities, dtype=np.float64))
    if values.size == 0:
        return None
    rank = max(1, math.ceil(p / 100.0 * values.size))
    return float(values[rank - 1])


def run(scenario: Scenario, topology: Topology,
        debug_invariants: bool = False) -> RunSummary:
    """Simulate one scenario on ``topology`` and return the summary.

    The topology is used in place (clients attach and detach on it) and is
    back to its pre-run state when the call returns.
    """
    ladder = RepresentationLadder(scenario.ladder_bps)
    if topology.server is None:
        raise ValueError("topology has no server")
    if not topology.access_switches:
        raise ValueError("topology declares no access switches")
    n_nodes_before = len(topology.nodes)
    fairshare = scenario.mode == "fairshare"
    dnc_mode = "exact" if scenario.mode == "dnc-exact" else "paper"
    tau = scenario.tau_s

    times, durations = generate_arrivals(scenario)
    picks = attachment_generator(scenario.seed).integers(
        0, len(topology.access_switches), size=scenario.total_clients)

    state = EdgeState(topology, max_path_edges=max(scenario.max_hops, 2))
    events = [(float(times[i]), 0, i + 1)
              for i in range(scenario.total_clients)]
    heapq.heapify(events)
    live = {}
    records: List[Optional[ClientRecord]] = [None] * scenario.total_clients
    last_time = 0.0

    def refresh_bounds(now: float):
        if not state.flows:
            return
        rows = state.live_rows()
        topo = state.topology
        vals = kernels.flow_bounds(topo.cap, topo.theta, state.rate_sum,
                                   state.burst_sum, state.paths_mat,
                                   state.plen, rows, state.enc, state.burst,
                                   exact=False)
        for flow, value in zip(state.flows.values(), vals):
            sess = live[flow.flow_id]
            value = float(value)
            if sess.last != value:
                sess.times.append(now)
                sess.bounds.append(value)
                sess.last = value

    def check_invariants():
        state.check_consistent()
        topo = state.topology
        for slot, members in enumerate(state.per_edge):
            if not members:
                continue
            if fairshare:
                if state.rate_sum[slot] > topo.cap[slot]:
                    raise InvariantViolation(
                        f"edge slot {slot}: allocated rate "
                        f"{state.rate_sum[slot]} exceeds capacity")
            elif state.rate_sum[slot] >= topo.cap[slot]:
                raise InvariantViolation(
                    f"edge slot {slot}: allocated rate "
                    f"{state.rate_sum[slot]} not strictly under capacity")
        if not fairshare:
            for sess in live.values():
                if sess.last is not None and sess.last > tau:
                    raise InvariantViolation(
                        f"client {sess.client_id}: delay bound "
                        f"{sess.last} exceeds the chunk duration {tau}")

    while events:
        now, kind, cid = heapq.heappop(events)
        last_time = now
        if kind == 0:
            idx = cid - 1
            switch = topology.access_switches[picks[idx]]
            host = topology.attach_client(cid, switch,
                                          scenario.last_mile_bps,
                                          scenario.last_mile_delay_s)
            state.sync()
            if fairshare:
                decision = fairshare_admit(host, topology, state, ladder,
                                           tau, scenario.max_hops)
            else:
                decision = dnc_admit(host, topology, state, ladder, tau,
                                     scenario.max_hops, dnc_mode)
            duration = float(durations[idx])
            if decision.accepted:
                live[host] = _Session(cid, host, now, duration, switch,
                                      decision.encoding_rate,
                                      decision.path.nodes, [], [])
                heapq.heappush(events, (now + duration, 1, cid))
                refresh_bounds(now)
                if debug_invariants:
                    check_invariants()
            else:
                records[idx] = ClientRecord(cid, now, duration, switch,
                                            False, 0.0, (), 0.0)
                topology.detach_client(host)
        else:
            host = f"h{cid}"
            sess = live.pop(host)
            rebuf = accumulate_rebuffering(
                sess.arrival, sess.duration, tau,
                np.asarray(sess.times), np.asarray(sess.bounds),
                scenario.unbounded_chunk_cap_s)
            records[cid - 1] = ClientRecord(cid, sess.arrival, sess.duration,
                                            sess.access_switch, True,
                                            sess.quality, sess.path_nodes,
                                            rebuf)
            state.release(host)
            topology.detach_client(host)
            if fairshare:
                fairshare_reallocate(topology, state, ladder, tau)
            refresh_bounds(now)
            if debug_invariants:
                check_invariants()

    if state.flows or len(topology.nodes) != n_nodes_before:
        raise InvariantViolation("run finished with residual state")
    if any(r is None for r in records):
        raise InvariantViolation("run finished with unresolved clients")

    accepted_q = np.asarray([r.quality_bps for r in records if r.accepted])
    accepted = int(accepted_q.size)
    rejected = scenario.total_clients - accepted
    return RunSummary(
        scenario=scenario,
        accepted=accepted,
        rejected=rejected,
        rejection_probability=rejected / scenario.total_clients,
        mean_quality_bps=float(accepted_q.mean()) if accepted else None,
        q05_bps=quality_percentile(accepted_q, 5) if accepted else None,
        q95_bps=quality_percentile(accepted_q, 95) if accepted else None,
        total_time_s=last_time,
        records=records,
    )
