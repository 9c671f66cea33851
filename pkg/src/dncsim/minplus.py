"""Min-plus primitives: affine arrival curves, rate-latency service curves,
delay bounds, blind multiplexing and tandem concatenation.

Everything here is a pure function over two immutable curve types.  Two
conventions keep the calling code free of special cases:

* an unbounded delay (arrival rate at or above the service rate) is the
  value ``math.inf``, never an exception;
* a saturated link (cross traffic at or above the link rate) makes the
  residual-service constructors return ``None``.

Invalid parameters (negative rates, bursts, times) raise ``ValueError``.
Units are bits, bits/second and seconds throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

__all__ = [
    "AffineArrivalCurve",
    "RateLatencyCurve",
    "make_flow_arrival",
    "aggregate_arrivals",
    "convolve",
    "horizontal_deviation",
    "residual_service_paper",
    "residual_service_exact",
    "eval_arrival",
    "eval_service",
]


@dataclass(frozen=True)
class AffineArrivalCurve:
    """Token-bucket envelope ``A(t) = rate * t + burst`` on cumulative
    traffic (``t >= 0``)."""

    rate: float
    burst: float

    def __post_init__(self):
        if self.rate < 0 or self.burst < 0:
            raise ValueError(
                f"arrival curve needs rate >= 0 and burst >= 0, got "
                f"({self.rate}, {self.burst})")

    def value_at(self, t: float) -> float:
        if t < 0:
            raise ValueError(f"arrival curve evaluated at t={t} < 0")
        return self.rate * t + self.burst


@dataclass(frozen=True)
class RateLatencyCurve:
    """Service guarantee ``beta(t) = max(0, rate * (t - latency))``."""

    rate: float
    latency: float

    def __post_init__(self):
        if self.rate <= 0 or self.latency < 0:
            raise ValueError(
                f"service curve needs rate > 0 and latency >= 0, got "
                f"({self.rate}, {self.latency})")

    def value_at(self, t: float) -> float:
        if t < 0:
            raise ValueError(f"service curve evaluated at t={t} < 0")
        return max(0.0, self.rate * (t - self.latency))


def eval_arrival(curve: AffineArrivalCurve, t: float) -> float:
    """Cumulative-traffic envelope at time ``t >= 0``, in bits."""
    return curve.value_at(t)


def eval_service(curve: RateLatencyCurve, t: float) -> float:
    """Guaranteed cumulative service at time ``t >= 0``, in bits."""
    return curve.value_at(t)


def make_flow_arrival(encoding_rate: float, max_rate: float,
                      chunk_bits: float) -> AffineArrivalCurve:
    """Arrival envelope of a chunked download.

    A client that plays at ``encoding_rate`` but may fetch each chunk of
    ``chunk_bits`` bits at up to ``max_rate`` produces at most
    ``encoding_rate * t + chunk_bits * (1 - encoding_rate / max_rate)``
    bits in any window of length ``t``.
    """
    if encoding_rate <= 0 or max_rate <= 0 or chunk_bits <= 0:
        raise ValueError(
            "encoding rate, max rate and chunk size must be positive, got "
            f"({encoding_rate}, {max_rate}, {chunk_bits})")
    if encoding_rate > max_rate:
        raise ValueError(
            f"encoding rate {encoding_rate} exceeds max download rate "
            f"{max_rate}")
    burst = chunk_bits * (1.0 - encoding_rate / max_rate)
    return AffineArrivalCurve(encoding_rate, burst)


def aggregate_arrivals(
        curves: Iterable[AffineArrivalCurve]) -> AffineArrivalCurve:
    """Envelope of the superposition: rates and bursts add."""
    rate = 0.0
    burst = 0.0
    for c in curves:
        rate += c.rate
        burst += c.burst
    return AffineArrivalCurve(rate, burst)


def convolve(a: RateLatencyCurve, b: RateLatencyCurve) -> RateLatencyCurve:
    """Min-plus convolution of two rate-latency curves.

    The tandem of two rate-latency servers is again rate-latency with the
    smaller rate and the summed latencies.
    """
    return RateLatencyCurve(min(a.rate, b.rate), a.latency + b.latency)


def horizontal_deviation(arrival: AffineArrivalCurve,
                         service: RateLatencyCurve) -> float:
    """Worst-case delay: the largest horizontal gap between the arrival
    envelope and the service guarantee.

    Returns ``inf`` when the arrival rate reaches the service rate (the
    backlog can then grow without bound).
    """
    if arrival.rate >= service.rate:
        return math.inf
    return service.latency + arrival.burst / service.rate


def residual_service_paper(
        link: RateLatencyCurve,
        cross: Sequence[Tuple[float, float, float]]) -> Optional[RateLatencyCurve]:
    """Residual rate-latency parameters left on a link by cross traffic.

    ``cross`` lists the competing flows as ``(encoding_rate, max_rate,
    chunk_bits)`` triples.  The residual keeps the link rate minus the
    cross encoding rates, and adds each cross flow's burst drained at the
    full link rate to the latency.  This is the affine relaxation used by
    the admission closed form; see :func:`residual_service_exact` for the
    exact (more pessimistic) residual.

    Returns ``None`` when the cross rates saturate the link.
    """
    rate_total = 0.0
    lat = link.latency
    for enc, max_rate, chunk_bits in cross:
        flow = make_flow_arrival(enc, max_rate, chunk_bits)
        rate_total += flow.rate
        lat += flow.burst / link.rate
    if rate_total >= link.rate:
        return None
    return RateLatencyCurve(link.rate - rate_total, lat)


def residual_service_exact(
        link: RateLatencyCurve,
        cross_aggregate: AffineArrivalCurve) -> Optional[RateLatencyCurve]:
    """Exact blind-multiplexing residual ``max(0, beta - alpha)``.

    For a rate-latency ``beta`` and an affine ``alpha`` the positive part
    is again rate-latency: rate ``C - rho`` and latency
    ``(C * theta + sigma) / (C - rho)``.  Returns ``None`` when the cross
    rate saturates the link.
    """
    if cross_aggregate.rate >= link.rate:
        return None
    rate = link.rate - cross_aggregate.rate
    latency = (link.rate * link.latency + cross_aggregate.burst) / rate
    return RateLatencyCurve(rate, latency)
