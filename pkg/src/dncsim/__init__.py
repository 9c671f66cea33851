"""dncsim: deterministic-network-calculus admission control for chunked
video streaming, with a discrete-event simulator and a fair-share baseline.
"""

from .minplus import (AffineArrivalCurve, RateLatencyCurve,
                      aggregate_arrivals, convolve, eval_arrival,
                      eval_service, horizontal_deviation, make_flow_arrival,
                      residual_service_exact, residual_service_paper)
from .network import (EdgeState, Path, Topology, TopologyError,
                      enumerate_paths, load_topology)
from .delay import FlowSpec, cross_flows, e2e_delay_bound
from .admission import (AdmissionDecision, RepresentationLadder, dnc_admit,
                        fairshare_admit, fairshare_reallocate,
                        has_impact_on_other_clients)
from .workload import (Scenario, ScenarioError, generate_arrivals,
                       little_law_rate, parse_scenario)
from .engine import (ClientRecord, RunSummary, accumulate_rebuffering,
                     moving_average_quality, quality_percentile, run)
from .cli import default_topology_path

__version__ = "0.1.0"
