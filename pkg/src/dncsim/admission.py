"""Admission policies operating on shared edge state.

Two policies are provided:

* :func:`dnc_admit` -- the delay-guaranteeing policy.  It picks the path
  with the highest residual bottleneck, then walks the representation
  ladder downward from the highest rate strictly below that bottleneck
  until it finds a rate whose worst-case chunk delay fits inside the chunk
  duration *and* whose admission leaves every cross flow's own bound
  intact.  Rejection is a value, never an exception, and a rejecting call
  leaves the state untouched.

* :func:`fairshare_admit` / :func:`fairshare_reallocate` -- the baseline.
  Clients take the fewest-hop path and every edge is split equally among
  the flows crossing it; each flow plays the highest ladder rate at or
  below its equal split, and all rates are recomputed after every arrival
  and departure.  A newcomer is rejected only when its own split would
  fall below the lowest ladder rate.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from . import kernels
from .delay import FlowSpec, e2e_delay_bound
from .network import EdgeState, Path, Topology

__all__ = [
    "RepresentationLadder",
    "AdmissionDecision",
    "dnc_admit",
    "has_impact_on_other_clients",
    "fairshare_admit",
    "fairshare_reallocate",
]


class RepresentationLadder:
    """Strictly increasing, nonempty list of encoding rates (bit/s)."""

    def __init__(self, rates: Sequence[float]):
        rates = tuple(float(r) for r in rates)
        if not rates:
            raise ValueError("representation ladder must not be empty")
        if rates[0] <= 0:
            raise ValueError("ladder rates must be positive")
        if any(b <= a for a, b in zip(rates, rates[1:])):
            raise ValueError(f"ladder must be strictly increasing: {rates}")
        self.rates = rates

    def __iter__(self):
        return iter(self.rates)

    def __len__(self):
        return len(self.rates)

    @property
    def lowest(self) -> float:
        return self.rates[0]

    def floor(self, x: float) -> Optional[float]:
        """Highest rate <= x, or None."""
        i = bisect.bisect_right(self.rates, x) - 1
        return self.rates[i] if i >= 0 else None

    def highest_below(self, x: float) -> Optional[float]:
        """Highest rate strictly < x, or None."""
        i = bisect.bisect_left(self.rates, x) - 1
        return self.rates[i] if i >= 0 else None


@dataclass(frozen=True)
class AdmissionDecision:
    accepted: bool
    path: Optional[Path] = None
    encoding_rate: float = 0.0
    max_rate: float = 0.0
    chunk_bits: float = 0.0


_REJECTED = AdmissionDecision(False)


def _client_route_menu(client: str, topology: Topology, state: EdgeState,
                       max_hops: int):
    """Candidate suffixes from the client's access switch plus the
    last-mile slot; shared by both policies."""
    state.sync()
    sw = topology.host_switch(client)
    lm_slot = topology.edge_slot(client, sw)
    suffixes, matrix, plen = topology.switch_to_server_suffixes(
        sw, max_hops - 1)
    return sw, lm_slot, suffixes, matrix, plen


def dnc_admit(client: str, topology: Topology, state: EdgeState,
              ladder: RepresentationLadder, tau: float,
              max_hops: int = 8, mode: str = "paper") -> AdmissionDecision:
    """Widest-path, highest-feasible-quality admission.

    On acceptance the flow is allocated in ``state`` with its end-to-end
    max rate frozen to the selected path's residual bottleneck; on
    rejection the state is untouched.
    """
    _, lm_slot, suffixes, matrix, plen = _client_route_menu(
        client, topology, state, max_hops)
    if not suffixes:
        return _REJECTED
    lm_resid = float(topology.cap[lm_slot] - state.rate_sum[lm_slot])
    bottlenecks = np.minimum(state.bottlenecks(matrix, plen), lm_resid)
    best = int(np.argmax(bottlenecks))        # first occurrence wins ties
    phi = float(bottlenecks[best])
    if phi <= 0.0:
        return _REJECTED
    top = ladder.highest_below(phi)
    if top is None:
        return _REJECTED
    nodes, slots = suffixes[best]
    path = Path((client,) + nodes, (lm_slot,) + slots)
    for rate in reversed([r for r in ladder.rates if r <= top]):
        candidate = FlowSpec(client, rate, phi, rate * tau, path)
        if e2e_delay_bound(candidate, state, mode) > tau:
            continue
        if has_impact_on_other_clients(candidate, state, tau, mode):
            continue
        state.allocate(candidate)
        return AdmissionDecision(True, path, rate, phi, candidate.chunk_bits)
    return _REJECTED


def has_impact_on_other_clients(candidate: FlowSpec, state: EdgeState,
                                tau: float, mode: str = "paper") -> bool:
    """Would admitting ``candidate`` push any cross flow's delay bound
    past ``tau``?  Evaluated on a tentative copy; the state is never
    modified."""
    state.sync()
    others = state.cross_flows(candidate.path)
    if not others:
        return False
    rate_sum = state.rate_sum.copy()
    burst_sum = state.burst_sum.copy()
    slots = candidate.path.slot_array
    rate_sum[slots] += candidate.encoding_rate
    burst_sum[slots] += candidate.burst
    rows = np.fromiter((f.row for f in others), dtype=np.int64,
                       count=len(others))
    topo = state.topology
    bounds = kernels.flow_bounds(topo.cap, topo.theta, rate_sum, burst_sum,
                                 state.paths_mat, state.plen, rows,
                                 state.enc, state.burst,
                                 exact=(mode == "exact"))
    return bool(np.any(bounds > tau))


def fairshare_admit(client: str, topology: Topology, state: EdgeState,
                    ladder: RepresentationLadder, tau: float,
                    max_hops: int = 8) -> AdmissionDecision:
    """Shortest-path, equal-split admission (baseline policy)."""
    _, lm_slot, suffixes, matrix, plen = _client_route_menu(
        client, topology, state, max_hops)
    if not suffixes:
        return _REJECTED
    best = int(np.argmin(plen))               # fewest hops, ties in order
    nodes, slots = suffixes[best]
    path = Path((client,) + nodes, (lm_slot,) + slots)
    fair = min(float(topology.cap[s]) / (float(state.count[s]) + 1.0)
               for s in path.slots)
    if fair < ladder.lowest:
        return _REJECTED
    enc = ladder.floor(fair)
    flow = FlowSpec(client, enc, fair, enc * tau, path)
    state.allocate(flow)
    fairshare_reallocate(topology, state, ladder, tau)
    return AdmissionDecision(True, path, flow.encoding_rate, flow.max_rate,
                             flow.chunk_bits)


def fairshare_reallocate(topology: Topology, state: EdgeState,
                         ladder: RepresentationLadder,
                         tau: float) -> Dict[object, float]:
    """Recompute every flow's equal split and snap its encoding rate to
    the highest ladder rate at or below it.  Idempotent between events."""
    state.sync()
    out: Dict[object, float] = {}
    if not state.flows:
        return out
    rows = state.live_rows()
    fair = kernels.fair_rates(topology.cap, state.count, state.paths_mat,
                              state.plen, rows)
    for (fid, flow), share in zip(state.flows.items(), fair):
        share = float(share)
        enc = ladder.floor(share)
        if enc is None:
            # admission keeps every split at or above the lowest rung;
            # stay playable if a custom state violates that
            enc = ladder.lowest
        flow.set_rates(enc, max(share, enc), enc * tau)
        out[fid] = enc
    state.refresh_flow_vectors()
    return out
