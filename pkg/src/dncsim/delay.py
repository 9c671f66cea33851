"""End-to-end worst-case chunk delay for a flow over its path.

Composes the per-edge residual service left by cross traffic along the
flow's path and takes the horizontal deviation against the flow's own
download envelope.  Two residual models are supported:

* ``paper`` -- residual modelled as a rate-latency curve with rate
  ``C_e - sum(cross rates)`` and latency ``theta_e + sum(cross bursts)/C_e``
  (the closed form the admission logic optimises against);
* ``exact`` -- true blind-multiplexing residual ``max(0, beta - alpha)``
  per edge, then min-plus concatenation.  Never smaller than the paper
  form, so it is the conservative cross-check.

``math.inf`` means "no finite bound" (some edge leaves the flow no spare
rate); callers treat it as infeasible, not as an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

from . import kernels
from .network import EdgeState, Path

__all__ = ["FlowSpec", "e2e_delay_bound", "cross_flows", "MODES"]

MODES = ("paper", "exact")


@dataclass
class FlowSpec:
    """A client's allocated (or candidate) download.

    ``encoding_rate`` is the sustained playback rate, ``max_rate`` the
    fastest the client can drain a chunk end to end, ``chunk_bits`` the
    chunk size.  ``burst`` is the token-bucket slack those leave:
    ``chunk_bits * (1 - encoding_rate / max_rate)``.
    """

    flow_id: object
    encoding_rate: float
    max_rate: float
    chunk_bits: float
    path: Path
    row: Optional[int] = field(default=None, compare=False)

    def __post_init__(self):
        self._check_rates()

    def _check_rates(self):
        if self.encoding_rate <= 0 or self.chunk_bits <= 0:
            raise ValueError(
                f"flow {self.flow_id!r}: encoding rate and chunk size must "
                f"be positive")
        if self.encoding_rate > self.max_rate:
            raise ValueError(
                f"flow {self.flow_id!r}: encoding rate "
                f"{self.encoding_rate} exceeds max rate {self.max_rate}")

    @property
    def burst(self) -> float:
        return self.chunk_bits * (1.0 - self.encoding_rate / self.max_rate)

    def set_rates(self, encoding_rate: float, max_rate: float,
                  chunk_bits: float):
        """Reassign rates (fair-share reallocation); validates like init."""
        self.encoding_rate = encoding_rate
        self.max_rate = max_rate
        self.chunk_bits = chunk_bits
        self._check_rates()


def e2e_delay_bound(flow: FlowSpec, state: EdgeState,
                    mode: str = "paper") -> float:
    """Worst-case delay to download one chunk of ``flow`` over its path.

    Cross traffic on every edge is whatever ``state`` currently has
    allocated there, minus the flow itself if it is already allocated
    (a flow never competes with itself).  Returns ``inf`` when any edge's
    residual rate does not exceed the flow's encoding rate.
    """
    if mode not in MODES:
        raise ValueError(f"unknown delay mode {mode!r}")
    state.sync()
    allocated = state.flows.get(flow.flow_id) is flow
    fn = kernels.bound_exact if mode == "exact" else kernels.bound_paper
    return fn(state.topology.cap, state.topology.theta, state.rate_sum,
              state.burst_sum, flow.path.slot_array, flow.encoding_rate,
              flow.burst, allocated)


def cross_flows(state: EdgeState, path: Path) -> List[FlowSpec]:
    """Allocated flows sharing at least one edge with ``path``, each once."""
    return state.cross_flows(path)
