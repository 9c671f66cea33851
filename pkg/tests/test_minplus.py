import math

import numpy as np
import pytest

from dncsim.minplus import (AffineArrivalCurve, RateLatencyCurve,
                            aggregate_arrivals, convolve, eval_arrival,
                            eval_service, horizontal_deviation,
                            make_flow_arrival, residual_service_exact,
                            residual_service_paper)

from oracles import (numeric_convolution, numeric_horizontal_deviation,
                     on_off_cumulative, service_value)


def random_rate_latency(rng):
    return RateLatencyCurve(rng.uniform(1e6, 1e9),
                            rng.uniform(0.0, 0.05))


def random_arrival(rng, below_rate=None):
    rate = rng.uniform(0.0, below_rate * 0.95 if below_rate else 5e7)
    return AffineArrivalCurve(rate, rng.uniform(0.0, 1e7))


class TestFlowArrival:
    def test_burst_vanishes_when_encoding_fills_the_pipe(self):
        curve = make_flow_arrival(5e6, 5e6, 5e6)
        assert (curve.rate, curve.burst) == (5e6, 0.0)

    def test_half_rate_download(self):
        curve = make_flow_arrival(5e6, 1e7, 5e6)
        assert curve.rate == 5e6
        assert curve.burst == 2.5e6

    def test_one_tenth_encoding(self):
        curve = make_flow_arrival(1e6, 1e7, 1e6)
        assert curve.rate == 1e6
        assert curve.burst == pytest.approx(9e5, rel=1e-12)

    @pytest.mark.parametrize("enc,rate,chunk", [(5e6, 1e7, 5e6),
                                                (1e6, 1e7, 1e6),
                                                (3e6, 4.5e6, 7e6)])
    def test_envelope_bounds_on_off_download_tightly(self, enc, rate, chunk):
        # greedy per-chunk downloader: chunk every chunk/enc seconds,
        # drained at the max end-to-end rate
        curve = make_flow_arrival(enc, rate, chunk)
        period = chunk / enc
        ts = np.linspace(0.0, 12 * period, 4001)
        # chunk completion instants, where the envelope should touch
        ts = np.sort(np.concatenate(
            [ts, period * np.arange(12) + chunk / rate]))
        cum = on_off_cumulative(chunk, rate, period, ts)
        envelope = curve.rate * ts + curve.burst
        gap = envelope - cum
        assert gap.min() >= -1e-6          # never undershoots the traffic
        assert gap.min() <= 1e-6           # and touches it (tight burst)

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            make_flow_arrival(2e6, 1e6, 1e6)      # enc > max rate
        for bad in [(0, 1e6, 1e6), (1e6, -1, 1e6), (1e6, 1e6, 0)]:
            with pytest.raises(ValueError):
                make_flow_arrival(*bad)


class TestAggregate:
    def test_empty(self):
        assert aggregate_arrivals([]) == AffineArrivalCurve(0.0, 0.0)

    def test_singleton(self):
        one = AffineArrivalCurve(5e6, 2.5e6)
        assert aggregate_arrivals([one]) == one

    def test_componentwise_sum(self):
        agg = aggregate_arrivals([AffineArrivalCurve(5e6, 2.5e6),
                                  AffineArrivalCurve(1e6, 9e5)])
        assert (agg.rate, agg.burst) == (6e6, 3.4e6)
        # pointwise check against adding the sampled curves
        ts = np.linspace(0, 3, 100)
        assert np.allclose(agg.rate * ts + agg.burst,
                           (5e6 * ts + 2.5e6) + (1e6 * ts + 9e5), rtol=1e-12)


class TestConvolve:
    def test_zero_latency_operand(self):
        out = convolve(RateLatencyCurve(1e7, 0.0),
                       RateLatencyCurve(1e7, 0.003))
        assert (out.rate, out.latency) == (1e7, 0.003)

    def test_min_rate_sum_latency(self):
        out = convolve(RateLatencyCurve(1e7, 0.001),
                       RateLatencyCurve(5e8, 0.002))
        assert (out.rate, out.latency) == (1e7, 0.003)

    def test_fold_of_three(self):
        curves = [RateLatencyCurve(1e7, 0.001), RateLatencyCurve(5e8, 0.001),
                  RateLatencyCurve(1e9, 0.001)]
        out = curves[0]
        for c in curves[1:]:
            out = convolve(out, c)
        assert (out.rate, out.latency) == (1e7, 0.003)
        # fold order must not matter
        rev = curves[2]
        for c in [curves[1], curves[0]]:
            rev = convolve(rev, c)
        assert rev.rate == out.rate
        assert rev.latency == pytest.approx(out.latency, rel=1e-12)

    def test_matches_numeric_min_plus_convolution(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            a = random_rate_latency(rng)
            b = random_rate_latency(rng)
            out = convolve(a, b)
            ts = np.linspace(0.0, 0.4, 1001)
            numeric = numeric_convolution(a.rate, a.latency, b.rate,
                                          b.latency, ts)
            closed = service_value(out.rate, out.latency, ts)
            scale = np.maximum(1.0, np.abs(numeric))
            assert np.all(np.abs(closed - numeric) <= 1e-9 * scale)

    def test_commutative(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            a = random_rate_latency(rng)
            b = random_rate_latency(rng)
            assert convolve(a, b) == convolve(b, a)


class TestHorizontalDeviation:
    def test_empty_flow_instant_server(self):
        assert horizontal_deviation(AffineArrivalCurve(0, 0),
                                    RateLatencyCurve(1e7, 0)) == 0.0

    def test_burst_drain_plus_latency(self):
        d = horizontal_deviation(AffineArrivalCurve(5e6, 2.5e6),
                                 RateLatencyCurve(1e7, 0.001))
        assert d == pytest.approx(0.251, rel=1e-12)

    def test_rate_match_is_unbounded(self):
        d = horizontal_deviation(AffineArrivalCurve(1e7, 1.0),
                                 RateLatencyCurve(1e7, 0.0))
        assert d == math.inf

    def test_matches_numeric_search(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            service = random_rate_latency(rng)
            arrival = random_arrival(rng, below_rate=service.rate)
            closed = horizontal_deviation(arrival, service)
            ts = np.linspace(0.0, 0.2, 1001)
            numeric = numeric_horizontal_deviation(
                arrival.rate, arrival.burst, service.rate, service.latency,
                ts)
            assert closed == pytest.approx(numeric, rel=1e-9, abs=1e-12)


class TestResidualPaper:
    def test_no_multiplexing(self):
        link = RateLatencyCurve(1e7, 0.001)
        assert residual_service_paper(link, []) == link

    def test_single_cross_flow(self):
        out = residual_service_paper(RateLatencyCurve(1e7, 0.001),
                                     [(5e6, 1e7, 5e6)])
        assert out.rate == 5e6
        assert out.latency == pytest.approx(0.251, rel=1e-12)

    def test_two_cross_flows(self):
        out = residual_service_paper(RateLatencyCurve(1e7, 0.0),
                                     [(5e6, 1e7, 5e6), (4e6, 1e7, 4e6)])
        assert out.rate == pytest.approx(1e6, rel=1e-12)
        assert out.latency == pytest.approx(0.49, rel=1e-12)

    def test_saturated_link(self):
        out = residual_service_paper(RateLatencyCurve(1e7, 0.0),
                                     [(5e6, 1e7, 5e6), (5e6, 1e7, 5e6)])
        assert out is None


class TestResidualExact:
    def test_zero_cross(self):
        link = RateLatencyCurve(1e7, 0.001)
        assert residual_service_exact(link, AffineArrivalCurve(0, 0)) == link

    def test_rate_and_burst(self):
        out = residual_service_exact(RateLatencyCurve(1e7, 0.001),
                                     AffineArrivalCurve(5e6, 2.5e6))
        assert out.rate == 5e6
        assert out.latency == pytest.approx(0.502, rel=1e-12)

    def test_burst_only(self):
        out = residual_service_exact(RateLatencyCurve(1e7, 0.0),
                                     AffineArrivalCurve(0.0, 2.5e6))
        assert (out.rate, out.latency) == (1e7, 0.25)

    def test_saturated(self):
        assert residual_service_exact(RateLatencyCurve(1e7, 0.0),
                                      AffineArrivalCurve(1e7, 0.0)) is None

    def test_pointwise_positive_part(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            link = random_rate_latency(rng)
            cross = random_arrival(rng, below_rate=link.rate)
            out = residual_service_exact(link, cross)
            ts = np.linspace(0.0, 0.5, 2001)
            direct = np.maximum(
                0.0, service_value(link.rate, link.latency, ts)
                - (cross.rate * ts + cross.burst))
            composed = service_value(out.rate, out.latency, ts)
            scale = np.maximum(1.0, direct)
            assert np.all(np.abs(composed - direct) <= 1e-9 * scale)


class TestOrderingProperties:
    def test_exact_is_more_pessimistic_than_paper(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            link = random_rate_latency(rng)
            enc = rng.uniform(1e5, link.rate * 0.4)
            max_rate = enc * rng.uniform(1.0, 4.0)
            chunk = rng.uniform(1e5, 1e7)
            paper = residual_service_paper(link, [(enc, max_rate, chunk)])
            flow = make_flow_arrival(enc, max_rate, chunk)
            exact = residual_service_exact(link, flow)
            assert exact.rate == pytest.approx(paper.rate, rel=1e-12)
            assert exact.latency >= paper.latency * (1 - 1e-12)
            if flow.rate > 0 and (link.latency > 0 or flow.burst > 0):
                assert exact.latency > paper.latency * (1 - 1e-12)

    def test_extra_cross_flow_never_helps(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            link = random_rate_latency(rng)
            base = [(1e6, 2e6, 1e6)]
            extra = base + [(rng.uniform(1e5, 1e6), 2e6, 1e6)]
            p0 = residual_service_paper(link, base)
            p1 = residual_service_paper(link, extra)
            assert p1.rate <= p0.rate and p1.latency >= p0.latency
            e0 = residual_service_exact(link, aggregate_arrivals(
                [make_flow_arrival(*c) for c in base]))
            e1 = residual_service_exact(link, aggregate_arrivals(
                [make_flow_arrival(*c) for c in extra]))
            assert e1.rate <= e0.rate and e1.latency >= e0.latency


class TestEval:
    def test_arrival_intercept(self):
        assert eval_arrival(AffineArrivalCurve(5e6, 2.5e6), 0.0) == 2.5e6

    def test_service_knee(self):
        assert eval_service(RateLatencyCurve(1e7, 0.003), 0.003) == 0.0

    def test_service_past_knee(self):
        assert eval_service(RateLatencyCurve(1e7, 0.003), 0.004) \
            == pytest.approx(1e4, rel=1e-12)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            eval_arrival(AffineArrivalCurve(1.0, 1.0), -1e-9)
        with pytest.raises(ValueError):
            eval_service(RateLatencyCurve(1.0, 0.0), -1.0)

    def test_invalid_curves_rejected(self):
        with pytest.raises(ValueError):
            AffineArrivalCurve(-1.0, 0.0)
        with pytest.raises(ValueError):
            RateLatencyCurve(0.0, 0.0)
        with pytest.raises(ValueError):
            RateLatencyCurve(1.0, -0.1)
