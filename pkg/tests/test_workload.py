import numpy as np
import pytest

from dncsim.workload import (Scenario, ScenarioError, generate_arrivals,
                             little_law_rate, parse_scenario)

DOC = """
# load point
target_avg_clients = 160
total_clients = 50
mean_duration_s = 231
tau_s = 1
seed = 7
mode = dnc-paper
max_hops = 8
duration_distribution = exponential
ladder_mbps = 1,2,3,4,5
last_mile_mbps = 10
last_mile_delay_ms = 1
"""


class TestLittleLaw:
    def test_values(self):
        assert little_law_rate(20, 231) == pytest.approx(20 / 231)
        assert little_law_rate(200, 231) == pytest.approx(200 / 231)
        assert little_law_rate(231, 231) == 1.0

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            little_law_rate(0, 231)
        with pytest.raises(ValueError):
            little_law_rate(20, -1)


class TestScenarioDocument:
    def test_round_trip(self):
        sc = parse_scenario(DOC)
        assert sc.target_avg_clients == 160
        assert sc.total_clients == 50
        assert sc.seed == 7
        assert sc.mode == "dnc-paper"
        assert sc.ladder_bps == (1e6, 2e6, 3e6, 4e6, 5e6)
        assert sc.last_mile_bps == 10e6
        assert sc.last_mile_delay_s == 1e-3
        assert sc.unbounded_chunk_cap_s == 10.0        # 10 * tau default

    def test_unknown_key_has_line_number(self):
        with pytest.raises(ScenarioError, match="line 2.*bogus"):
            parse_scenario("mode = fairshare\nbogus = 1\n"
                           "target_avg_clients = 5\n")

    def test_missing_required_keys(self):
        with pytest.raises(ScenarioError, match="target_avg_clients"):
            parse_scenario("mode = fairshare\n")
        with pytest.raises(ScenarioError, match="mode"):
            parse_scenario("target_avg_clients = 5\n")

    def test_bad_values(self):
        with pytest.raises(ScenarioError, match="line 1"):
            parse_scenario("target_avg_clients = many\nmode = fairshare\n")
        with pytest.raises(ScenarioError, match="mode"):
            Scenario(target_avg_clients=5, mode="nope")
        with pytest.raises(ScenarioError, match="ladder"):
            Scenario(target_avg_clients=5, mode="fairshare",
                     ladder_bps=(2e6, 1e6))
        with pytest.raises(ScenarioError, match="total_clients"):
            Scenario(target_avg_clients=5, mode="fairshare",
                     total_clients=0)
        with pytest.raises(ScenarioError, match="duration_distribution"):
            Scenario(target_avg_clients=5, mode="fairshare",
                     duration_distribution="uniform")


class TestGeneration:
    def test_deterministic_by_seed(self):
        sc = parse_scenario(DOC)
        t1, d1 = generate_arrivals(sc)
        t2, d2 = generate_arrivals(sc)
        assert t1.tobytes() == t2.tobytes()
        assert d1.tobytes() == d2.tobytes()

    def test_different_seeds_differ(self):
        sc1 = Scenario(target_avg_clients=100, mode="fairshare", seed=1)
        sc2 = Scenario(target_avg_clients=100, mode="fairshare", seed=2)
        assert not np.array_equal(generate_arrivals(sc1)[0],
                                  generate_arrivals(sc2)[0])

    def test_counts_and_positivity(self):
        sc = Scenario(target_avg_clients=100, mode="fairshare",
                      total_clients=5000, seed=3)
        times, durations = generate_arrivals(sc)
        assert len(times) == len(durations) == 5000
        assert np.all(np.diff(times) >= 0)
        assert np.all(durations > 0)

    def test_exponential_statistics_converge(self):
        sc = Scenario(target_avg_clients=100, mode="fairshare",
                      total_clients=1_000_000, seed=11)
        times, durations = generate_arrivals(sc)
        gaps = np.diff(np.concatenate([[0.0], times]))
        assert gaps.mean() == pytest.approx(231 / 100, rel=0.01)
        assert durations.mean() == pytest.approx(231.0, rel=0.01)

    def test_lognormal_mean_matches(self):
        sc = Scenario(target_avg_clients=100, mode="fairshare",
                      total_clients=1_000_000, seed=12,
                      duration_distribution="lognormal",
                      lognormal_sigma=1.0)
        _, durations = generate_arrivals(sc)
        assert durations.mean() == pytest.approx(231.0, rel=0.01)
        assert np.all(durations > 0)
