import math

import numpy as np
import pytest

import dncsim
from dncsim.cli import json_dumps, summary_mapping
from dncsim.engine import (accumulate_rebuffering, moving_average_quality,
                           quality_percentile, run)
from dncsim.network import EdgeState, load_topology
from dncsim.workload import Scenario

SMALL_TOPO = """
node s1 switch
node srv host
edge srv s1 10 0
server srv
access s1
"""


def default_topology():
    return load_topology(open(dncsim.default_topology_path()).read())


class TestRebufferingAccounting:
    def test_constant_excess(self):
        # bound pinned at 1.2 s for a 10 s session of 1 s chunks
        got = accumulate_rebuffering(
            arrival_s=5.0, duration_s=10.0, tau_s=1.0,
            times=np.array([5.0]), bounds=np.array([1.2]),
            unbounded_cap_s=10.0)
        assert got == pytest.approx(2.0, rel=1e-12)

    def test_unbounded_chunks_contribute_the_cap(self):
        got = accumulate_rebuffering(
            arrival_s=0.0, duration_s=3.0, tau_s=1.0,
            times=np.array([0.0]), bounds=np.array([math.inf]),
            unbounded_cap_s=10.0)
        assert got == 30.0

    def test_within_deadline_contributes_nothing(self):
        got = accumulate_rebuffering(
            arrival_s=0.0, duration_s=7.3, tau_s=1.0,
            times=np.array([0.0]), bounds=np.array([0.999]),
            unbounded_cap_s=10.0)
        assert got == 0.0

    def test_step_change_mid_session(self):
        # 1.5 s bound for chunks starting in [0, 2), back to 0.5 after
        got = accumulate_rebuffering(
            arrival_s=0.0, duration_s=4.0, tau_s=1.0,
            times=np.array([0.0, 2.0]), bounds=np.array([1.5, 0.5]),
            unbounded_cap_s=10.0)
        assert got == pytest.approx(1.0, rel=1e-12)


class TestSeriesMetrics:
    def test_moving_average_examples(self):
        assert list(moving_average_quality([5, 5, 5], 3)) == [5.0]
        assert list(moving_average_quality([1, 3, 5], 1)) == [1, 3, 5]
        assert np.allclose(moving_average_quality([1, 2, 3, 4], 2),
                           [1.5, 2.5, 3.5])
        assert moving_average_quality([1, 2], 3).size == 0
        with pytest.raises(ValueError):
            moving_average_quality([1], 0)

    def test_percentile_examples(self):
        assert quality_percentile([5e6] * 10, 95) == 5e6
        ladder = [i * 1e6 for i in range(1, 101)]
        assert quality_percentile(ladder, 5) == 5e6
        assert quality_percentile(ladder, 95) == 95e6
        assert quality_percentile([], 95) is None
        with pytest.raises(ValueError):
            quality_percentile([1.0], 101)


class TestSingleClientRun:
    def test_uncontended_client_gets_top_quality(self):
        scenario = Scenario(target_avg_clients=1, mode="dnc-paper",
                            total_clients=1, seed=5)
        summary = run(scenario, default_topology())
        assert summary.accepted == 1 and summary.rejected == 0
        assert summary.rejection_probability == 0.0
        record = summary.records[0]
        assert record.accepted and record.quality_bps == 5e6
        assert record.cumulative_rebuffering_s == 0.0
        assert record.path[0] == "h1" and record.path[-1] == "srv"
        assert summary.mean_quality_bps == 5e6
        assert summary.q05_bps == summary.q95_bps == 5e6
        assert summary.total_time_s == pytest.approx(
            record.arrival_s + record.duration_s)

    def test_topology_restored_after_run(self):
        topo = default_topology()
        nodes_before = set(topo.nodes)
        scenario = Scenario(target_avg_clients=30, mode="dnc-paper",
                            total_clients=40, seed=6)
        run(scenario, topo)
        assert set(topo.nodes) == nodes_before


class TestRunBehaviour:
    def test_event_conservation_and_record_order(self):
        scenario = Scenario(target_avg_clients=50, mode="fairshare",
                            total_clients=120, seed=9)
        summary = run(scenario, default_topology())
        assert summary.accepted + summary.rejected == 120
        assert [r.client_id for r in summary.records] == list(range(1, 121))
        for r in summary.records:
            if not r.accepted:
                assert r.quality_bps == 0.0
                assert r.cumulative_rebuffering_s == 0.0
                assert r.path == ()
            else:
                assert r.quality_bps in scenario.ladder_bps

    def test_dnc_runs_have_zero_rebuffering(self):
        scenario = Scenario(target_avg_clients=6, mode="dnc-paper",
                            total_clients=150, seed=10)
        summary = run(scenario, load_topology(SMALL_TOPO),
                      debug_invariants=True)
        for r in summary.records:
            assert r.cumulative_rebuffering_s == 0.0
        assert summary.rejected > 0        # the 10 Mbps link is contended

    def test_fairshare_equal_split_stalls_on_a_tight_link(self):
        # two concurrent 5 Mbps clients split the 10 Mbps link exactly;
        # the residual left to each equals its own rate, so the worst-case
        # delay is unbounded and chunks miss their deadline
        scenario = Scenario(target_avg_clients=3, mode="fairshare",
                            total_clients=150, seed=11)
        summary = run(scenario, load_topology(SMALL_TOPO))
        stalled = [r for r in summary.records
                   if r.cumulative_rebuffering_s > 0]
        assert stalled
        assert summary.rejection_probability >= 0.0

    def test_dnc_exact_mode_is_at_least_as_strict(self):
        topo = default_topology()
        base = dict(target_avg_clients=80, total_clients=300, seed=12)
        acc_paper = run(Scenario(mode="dnc-paper", **base), topo).accepted
        acc_exact = run(Scenario(mode="dnc-exact", **base), topo).accepted
        assert acc_exact <= acc_paper

    def test_replays_serialize_identically(self):
        scenario = Scenario(target_avg_clients=40, mode="fairshare",
                            total_clients=100, seed=13)
        one = json_dumps(summary_mapping(run(scenario, default_topology())))
        two = json_dumps(summary_mapping(run(scenario, default_topology())))
        assert one == two

    def test_missing_access_switches_rejected_before_the_loop(self):
        doc = "node s1 switch\nnode srv host\nedge srv s1 10 0\nserver srv\n"
        scenario = Scenario(target_avg_clients=1, mode="dnc-paper",
                            total_clients=1)
        with pytest.raises(ValueError, match="access"):
            run(scenario, load_topology(doc))

    def test_debug_mode_catches_corrupted_state(self):
        # the same consistency check the engine sweeps with
        topo = load_topology(SMALL_TOPO)
        state = EdgeState(topo)
        host = topo.attach_client(1, "s1", 1e7, 0.0)
        from dncsim.delay import FlowSpec
        from dncsim.network import enumerate_paths
        state.allocate(FlowSpec(host, 5e6, 1e7, 5e6,
                                enumerate_paths(topo, host, "srv", 8)[0]))
        state.rate_sum[0] += 1.0
        with pytest.raises(AssertionError):
            state.check_consistent()
