"""Forwarding graph, per-edge allocation state and path enumeration.

The topology is an undirected graph of hosts and switches read from a
line-oriented document (see :func:`load_topology`).  Every host hangs off
exactly one switch; one host is the content server.  Client hosts and
their last-mile edges are attached and detached dynamically as sessions
come and go.

Edges live in flat "slot" arrays (capacity, per-hop latency) so the hot
admission kernels can gather per-edge state without touching Python
objects; :class:`EdgeState` keeps the matching per-slot allocation totals.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels

__all__ = [
    "TopologyError",
    "Node",
    "Edge",
    "Path",
    "Topology",
    "EdgeState",
    "load_topology",
    "enumerate_paths",
]

HOST = "host"
SWITCH = "switch"


class TopologyError(ValueError):
    """Raised for malformed or invariant-violating topology documents."""


@dataclass(frozen=True)
class Node:
    node_id: str
    role: str


@dataclass(frozen=True)
class Edge:
    a: str
    b: str
    capacity: float   # bit/s
    delay: float      # s
    slot: int


class Path:
    """Simple client-to-server path: node sequence plus edge slots."""

    __slots__ = ("nodes", "slots", "slot_array")

    def __init__(self, nodes: Sequence[str], slots: Sequence[int]):
        self.nodes = tuple(nodes)
        self.slots = tuple(slots)
        self.slot_array = np.asarray(self.slots, dtype=np.int64)

    def __len__(self):
        return len(self.slots)

    def __eq__(self, other):
        return isinstance(other, Path) and self.nodes == other.nodes

    def __hash__(self):
        return hash(self.nodes)

    def __repr__(self):
        return f"Path({'-'.join(self.nodes)})"

    def validate(self, topology: "Topology"):
        """Check the stored-path invariants against ``topology``."""
        if len(self.nodes) < 2 or len(self.slots) != len(self.nodes) - 1:
            raise TopologyError(f"{self!r}: malformed node/edge sequence")
        if len(set(self.nodes)) != len(self.nodes):
            raise TopologyError(f"{self!r}: repeated node")
        first, last = self.nodes[0], self.nodes[-1]
        if topology.nodes[first].role != HOST:
            raise TopologyError(f"{self!r}: does not start at a host")
        if last != topology.server:
            raise TopologyError(f"{self!r}: does not end at the server")
        for i, slot in enumerate(self.slots):
            expect = topology.edge_slot(self.nodes[i], self.nodes[i + 1])
            if expect != slot:
                raise TopologyError(
                    f"{self!r}: slot {slot} does not join "
                    f"{self.nodes[i]}-{self.nodes[i + 1]}")


class Topology:
    """Hosts, switches and links; mutated only by attach/detach."""

    def __init__(self):
        self.nodes: Dict[str, Node] = {}
        self.adj: Dict[str, List[str]] = {}
        self.server: Optional[str] = None
        self.access_switches: List[str] = []
        self.cap = np.zeros(16, dtype=np.float64)
        self.theta = np.zeros(16, dtype=np.float64)
        self.n_slots = 0
        self._edge_slot: Dict[Tuple[str, str], int] = {}
        self._edge_ends: List[Optional[Tuple[str, str]]] = []
        self._free_slots: List[int] = []
        self._doc_edges: List[int] = []
        self._suffix_cache: Dict[Tuple[str, int], tuple] = {}

    # -- construction -----------------------------------------------------

    def add_node(self, node_id: str, role: str):
        if node_id in self.nodes:
            raise TopologyError(f"duplicate node id {node_id!r}")
        if role not in (HOST, SWITCH):
            raise TopologyError(f"unknown role {role!r} for node {node_id!r}")
        self.nodes[node_id] = Node(node_id, role)
        self.adj[node_id] = []

    def add_edge(self, a: str, b: str, capacity: float, delay: float,
                 _doc: bool = True) -> int:
        for n in (a, b):
            if n not in self.nodes:
                raise TopologyError(f"edge references unknown node {n!r}")
        if a == b:
            raise TopologyError(f"self-loop on node {a!r}")
        key = (a, b) if a < b else (b, a)
        if key in self._edge_slot:
            raise TopologyError(f"duplicate edge {a!r}-{b!r}")
        if capacity <= 0:
            raise TopologyError(f"edge {a!r}-{b!r}: capacity must be > 0")
        if delay < 0:
            raise TopologyError(f"edge {a!r}-{b!r}: delay must be >= 0")
        slot = self._new_slot(capacity, delay)
        self._edge_slot[key] = slot
        self._edge_ends[slot] = (a, b)
        bisect.insort(self.adj[a], b)
        bisect.insort(self.adj[b], a)
        if _doc:
            self._doc_edges.append(slot)
        return slot

    def _new_slot(self, capacity: float, delay: float) -> int:
        if self._free_slots:
            slot = self._free_slots.pop()
        else:
            slot = self.n_slots
            self.n_slots += 1
            self._edge_ends.append(None)
            if slot >= self.cap.shape[0]:
                grown = max(32, 2 * self.cap.shape[0])
                self.cap = np.resize(self.cap, grown)
                self.theta = np.resize(self.theta, grown)
        self.cap[slot] = capacity
        self.theta[slot] = delay
        return slot

    # -- queries ----------------------------------------------------------

    def edge_slot(self, a: str, b: str) -> int:
        key = (a, b) if a < b else (b, a)
        try:
            return self._edge_slot[key]
        except KeyError:
            raise TopologyError(f"no edge {a!r}-{b!r}") from None

    def edge(self, a: str, b: str) -> Edge:
        slot = self.edge_slot(a, b)
        return Edge(a, b, float(self.cap[slot]), float(self.theta[slot]),
                    slot)

    def edges(self) -> List[Edge]:
        """Static (document) edges in document order."""
        out = []
        for slot in self._doc_edges:
            ends = self._edge_ends[slot]
            if ends is not None:
                out.append(Edge(ends[0], ends[1], float(self.cap[slot]),
                                float(self.theta[slot]), slot))
        return out

    def host_switch(self, host_id: str) -> str:
        node = self.nodes.get(host_id)
        if node is None or node.role != HOST:
            raise TopologyError(f"{host_id!r} is not a host")
        return self.adj[host_id][0]

    # -- dynamic clients --------------------------------------------------

    def attach_client(self, client_id, access_switch: str,
                      capacity: float, delay: float) -> str:
        """Add a client host plus its last-mile edge; returns the host id."""
        sw = self.nodes.get(access_switch)
        if sw is None or sw.role != SWITCH:
            raise TopologyError(
                f"cannot attach client to {access_switch!r}: not a switch")
        host_id = client_id if isinstance(client_id, str) else f"h{client_id}"
        self.add_node(host_id, HOST)
        self.add_edge(host_id, access_switch, capacity, delay, _doc=False)
        return host_id

    def detach_client(self, host_id: str):
        """Remove a previously attached client host and its edge."""
        node = self.nodes.get(host_id)
        if node is None or node.role != HOST or host_id == self.server:
            raise TopologyError(f"cannot detach {host_id!r}")
        sw = self.adj[host_id][0]
        key = (host_id, sw) if host_id < sw else (sw, host_id)
        slot = self._edge_slot.pop(key)
        self._edge_ends[slot] = None
        self._free_slots.append(slot)
        self.adj[sw].remove(host_id)
        del self.adj[host_id]
        del self.nodes[host_id]

    # -- path enumeration -------------------------------------------------

    def switch_to_server_suffixes(self, switch: str, budget: int):
        """All simple switch paths from ``switch`` to the server host using
        at most ``budget`` edges, lexicographic by node sequence.

        Cached: attach/detach only ever add or remove hosts, which are
        never interior nodes, so the switch-level suffixes are stable.
        Returns ``(suffixes, matrix, plen)`` where each suffix is a
        ``(nodes, slots)`` pair ending at the server host and the matrix
        stacks the slot sequences zero-padded to ``budget`` columns.
        """
        key = (switch, budget)
        cached = self._suffix_cache.get(key)
        if cached is not None:
            return cached
        if self.server is None:
            raise TopologyError("topology has no server")
        server_sw = self.host_switch(self.server)
        server_slot = self.edge_slot(self.server, server_sw)
        suffixes: List[Tuple[Tuple[str, ...], Tuple[int, ...]]] = []

        def dfs(node, nodes, slots, left):
            if node == server_sw:
                # a simple path cannot leave and re-enter the server
                # switch, so every useful suffix stops here
                suffixes.append((tuple(nodes) + (self.server,),
                                 tuple(slots) + (server_slot,)))
                return
            if left == 0:
                return
            for nxt in self.adj[node]:
                if self.nodes[nxt].role != SWITCH or nxt in nodes:
                    continue
                nodes.append(nxt)
                slots.append(self.edge_slot(node, nxt))
                dfs(nxt, nodes, slots, left - 1)
                nodes.pop()
                slots.pop()

        if budget >= 1:
            dfs(switch, [switch], [], budget - 1)
        width = max(1, budget)
        matrix = np.zeros((len(suffixes), width), dtype=np.int64)
        plen = np.zeros(len(suffixes), dtype=np.int64)
        for i, (_, slots) in enumerate(suffixes):
            plen[i] = len(slots)
            matrix[i, :len(slots)] = slots
        result = (suffixes, matrix, plen)
        self._suffix_cache[key] = result
        return result

    # -- validation -------------------------------------------------------

    def validate(self):
        """Raise :class:`TopologyError` on any violated graph invariant."""
        if self.server is None:
            raise TopologyError("no server declared")
        server_node = self.nodes.get(self.server)
        if server_node is None:
            raise TopologyError(f"server {self.server!r} is not a node")
        if server_node.role != HOST:
            raise TopologyError(f"server {self.server!r} is not a host")
        for node in self.nodes.values():
            if node.role != HOST:
                continue
            neighbours = self.adj[node.node_id]
            if len(neighbours) != 1:
                raise TopologyError(
                    f"host {node.node_id!r} must attach to exactly one "
                    f"switch, has {len(neighbours)} edges")
            if self.nodes[neighbours[0]].role != SWITCH:
                raise TopologyError(
                    f"host {node.node_id!r} attaches to a non-switch")
        for sw in self.access_switches:
            node = self.nodes.get(sw)
            if node is None or node.role != SWITCH:
                raise TopologyError(f"access point {sw!r} is not a switch")
        if self.nodes:
            seen = {self.server}
            stack = [self.server]
            while stack:
                for nxt in self.adj[stack.pop()]:
                    if nxt not in seen:
                        seen.add(nxt)
                        stack.append(nxt)
            missing = [n for n in self.nodes if n not in seen]
            if missing:
                raise TopologyError(
                    f"graph is not connected: {missing[0]!r} unreachable "
                    f"from the server")


def load_topology(text: str) -> Topology:
    """Parse and validate a topology document.

    Format (whitespace separated, ``#`` starts a comment)::

        node <id> host|switch
        edge <idA> <idB> <capacity_mbps> <delay_ms>
        server <id>
        access <id>

    Capacities convert as ``mbps * 1e6`` bit/s, delays as ``ms * 1e-3`` s.
    Node and edge iteration order is the document order.
    """
    topo = Topology()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            kind = parts[0]
            if kind == "node":
                if len(parts) != 3:
                    raise TopologyError("expected: node <id> host|switch")
                topo.add_node(parts[1], parts[2])
            elif kind == "edge":
                if len(parts) != 5:
                    raise TopologyError(
                        "expected: edge <idA> <idB> <mbps> <ms>")
                try:
                    mbps = float(parts[3])
                    ms = float(parts[4])
                except ValueError:
                    raise TopologyError(
                        f"non-numeric edge parameters {parts[3]!r} "
                        f"{parts[4]!r}") from None
                topo.add_edge(parts[1], parts[2], mbps * 1e6, ms * 1e-3)
            elif kind == "server":
                if len(parts) != 2:
                    raise TopologyError("expected: server <id>")
                if topo.server is not None:
                    raise TopologyError(
                        f"second server declaration {parts[1]!r} "
                        f"(already {topo.server!r})")
                if parts[1] not in topo.nodes:
                    raise TopologyError(f"unknown server node {parts[1]!r}")
                topo.server = parts[1]
            elif kind == "access":
                if len(parts) != 2:
                    raise TopologyError("expected: access <id>")
                if parts[1] in topo.access_switches:
                    raise TopologyError(
                        f"duplicate access declaration {parts[1]!r}")
                topo.access_switches.append(parts[1])
            else:
                raise TopologyError(f"unknown directive {kind!r}")
        except TopologyError as exc:
            raise TopologyError(f"line {lineno}: {exc}") from None
    topo.validate()
    return topo


def enumerate_paths(topology: Topology, src: str, dst: str,
                    max_hops: int) -> List[Path]:
    """All simple host-to-host paths with at most ``max_hops`` edges.

    Interior nodes are switches (hosts terminate traffic).  Paths come out
    in lexicographic order of their node sequences, which a depth-first
    walk with sorted neighbour expansion produces directly.
    """
    if src == dst:
        raise ValueError("src and dst must differ")
    if max_hops < 1:
        raise ValueError("max_hops must be >= 1")
    for h in (src, dst):
        if topology.nodes.get(h) is None or topology.nodes[h].role != HOST:
            raise TopologyError(f"{h!r} is not a host")
    out: List[Path] = []

    def dfs(node, nodes, slots, left):
        if left == 0:
            return
        for nxt in topology.adj[node]:
            if nxt == dst:
                out.append(Path(nodes + [nxt],
                                slots + [topology.edge_slot(node, nxt)]))
                continue
            if topology.nodes[nxt].role != SWITCH or nxt in nodes:
                continue
            dfs(nxt, nodes + [nxt], slots + [topology.edge_slot(node, nxt)],
                left - 1)

    dfs(src, [src], [], max_hops)
    return out


class EdgeState:
    """Per-edge allocation bookkeeping for one simulation run.

    Holds the allocated flows (insertion-ordered), per-edge flow sets, and
    the flat per-slot totals (``rate_sum``, ``burst_sum``, ``count``) the
    kernels gather from.  A parallel flow table (padded path matrix plus
    rate/burst vectors, one row per live flow) backs the batched bound
    evaluations.

    Burst totals are always the in-order fold of the per-edge flow sets,
    so a tentative "add one candidate on top" matches what a fresh
    recomputation after the allocation would produce bit for bit.
    """

    def __init__(self, topology: Topology, max_path_edges: int = 16):
        self.topology = topology
        self.flows: Dict[object, object] = {}
        self.per_edge: List[Dict[object, object]] = []
        size = topology.cap.shape[0]
        self.rate_sum = np.zeros(size, dtype=np.float64)
        self.burst_sum = np.zeros(size, dtype=np.float64)
        self.count = np.zeros(size, dtype=np.float64)
        self._width = max_path_edges
        rows = 64
        self.paths_mat = np.zeros((rows, self._width), dtype=np.int64)
        self.plen = np.zeros(rows, dtype=np.int64)
        self.enc = np.zeros(rows, dtype=np.float64)
        self.burst = np.zeros(rows, dtype=np.float64)
        self._free_rows: List[int] = []
        self._next_row = 0
        self.sync()

    # -- sizing -----------------------------------------------------------

    def sync(self):
        """Grow per-slot arrays to cover all topology edge slots."""
        size = self.topology.cap.shape[0]
        if self.rate_sum.shape[0] < size:
            pad = size - self.rate_sum.shape[0]
            self.rate_sum = np.concatenate([self.rate_sum, np.zeros(pad)])
            self.burst_sum = np.concatenate([self.burst_sum, np.zeros(pad)])
            self.count = np.concatenate([self.count, np.zeros(pad)])
        while len(self.per_edge) < self.topology.n_slots:
            self.per_edge.append({})

    def _take_row(self) -> int:
        if self._free_rows:
            return self._free_rows.pop()
        row = self._next_row
        self._next_row += 1
        if row >= self.paths_mat.shape[0]:
            grown = 2 * self.paths_mat.shape[0]
            self.paths_mat = np.resize(self.paths_mat,
                                       (grown, self._width))
            self.paths_mat[row:] = 0
            self.plen = np.resize(self.plen, grown)
            self.enc = np.resize(self.enc, grown)
            self.burst = np.resize(self.burst, grown)
        return row

    # -- allocation -------------------------------------------------------

    def allocate(self, flow):
        """Register ``flow`` on every edge of its path."""
        if flow.flow_id in self.flows:
            raise ValueError(f"flow id {flow.flow_id!r} already allocated")
        flow.path.validate(self.topology)
        if len(flow.path) > self._width:
            raise ValueError(
                f"path of {len(flow.path)} edges exceeds the flow table "
                f"width {self._width}")
        self.sync()
        row = self._take_row()
        flow.row = row
        self.paths_mat[row, :] = 0
        self.paths_mat[row, :len(flow.path)] = flow.path.slot_array
        self.plen[row] = len(flow.path)
        self.enc[row] = flow.encoding_rate
        self.burst[row] = flow.burst
        self.flows[flow.flow_id] = flow
        for slot in flow.path.slots:
            self.per_edge[slot][flow.flow_id] = flow
            self.rate_sum[slot] += flow.encoding_rate
            self.burst_sum[slot] += flow.burst
            self.count[slot] += 1.0
        return flow

    def release(self, flow_id):
        """Remove a flow from every edge of its path; returns the flow."""
        flow = self.flows.pop(flow_id, None)
        if flow is None:
            raise ValueError(f"unknown flow id {flow_id!r}")
        for slot in flow.path.slots:
            del self.per_edge[slot][flow_id]
            self.rate_sum[slot] -= flow.encoding_rate
            self.count[slot] -= 1.0
            # refold so the total matches a from-scratch recomputation
            self.burst_sum[slot] = self._fold_burst(slot)
        self._free_rows.append(flow.row)
        flow.row = None
        return flow

    def _fold_burst(self, slot: int) -> float:
        total = 0.0
        for f in self.per_edge[slot].values():
            total += f.burst
        return total

    def refresh_flow_vectors(self):
        """Rebuild rate/burst vectors and per-slot totals after flows
        changed their rates in place (fair-share reallocation)."""
        for flow in self.flows.values():
            self.enc[flow.row] = flow.encoding_rate
            self.burst[flow.row] = flow.burst
        self.rate_sum[:] = 0.0
        self.burst_sum[:] = 0.0
        for slot, members in enumerate(self.per_edge):
            rate = 0.0
            burst = 0.0
            for f in members.values():
                rate += f.encoding_rate
                burst += f.burst
            self.rate_sum[slot] = rate
            self.burst_sum[slot] = burst

    # -- queries ----------------------------------------------------------

    def live_rows(self) -> np.ndarray:
        return np.fromiter((f.row for f in self.flows.values()),
                           dtype=np.int64, count=len(self.flows))

    def cross_flows(self, path: Path) -> List[object]:
        """Allocated flows sharing at least one edge with ``path``, each
        exactly once, in first-seen (edge, then allocation) order."""
        self.sync()
        seen = set()
        out = []
        for slot in path.slots:
            for fid, flow in self.per_edge[slot].items():
                if fid not in seen:
                    seen.add(fid)
                    out.append(flow)
        return out

    def path_bottleneck(self, path: Path) -> float:
        """Lowest residual capacity along ``path`` (may be <= 0)."""
        self.sync()
        return float(min(self.topology.cap[s] - self.rate_sum[s]
                         for s in path.slots))

    def bottlenecks(self, matrix: np.ndarray, plen: np.ndarray) -> np.ndarray:
        self.sync()
        return kernels.path_bottlenecks(self.topology.cap, self.rate_sum,
                                        matrix, plen)

    # -- integrity --------------------------------------------------------

    def recomputed_totals(self):
        """Per-slot totals recomputed from the flow sets (reference for
        consistency checks)."""
        n = len(self.per_edge)
        rate = np.zeros(n, dtype=np.float64)
        burst = np.zeros(n, dtype=np.float64)
        count = np.zeros(n, dtype=np.float64)
        for slot, members in enumerate(self.per_edge):
            r = 0.0
            b = 0.0
            for f in members.values():
                r += f.encoding_rate
                b += f.burst
            rate[slot] = r
            burst[slot] = b
            count[slot] = float(len(members))
        return rate, burst, count

    def check_consistent(self):
        rate, burst, count = self.recomputed_totals()
        n = len(self.per_edge)
        if not (np.array_equal(rate, self.rate_sum[:n])
                and np.array_equal(burst, self.burst_sum[:n])
                and np.array_equal(count, self.count[:n])):
            raise AssertionError("edge totals diverged from flow sets")
