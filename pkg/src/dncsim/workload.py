"""Scenario configuration and seeded client-arrival generation.

Arrivals follow a Poisson process whose rate is derived from the target
number of concurrently connected clients via Little's law; session
durations are drawn from a configurable distribution with a configurable
mean (exponential by default, lognormal as a shape-sensitivity
alternative).

Randomness comes from numpy's Philox generator, a counter-based generator
with a published algorithm, so a given seed reproduces the same workload
bit for bit on any platform.  Stream split: ``Philox(seed)`` drives the
workload draws, ``Philox(seed).jumped(1)`` drives the access-switch
assignment inside the simulation engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

__all__ = [
    "ScenarioError",
    "Scenario",
    "MODES",
    "DURATION_DISTRIBUTIONS",
    "parse_scenario",
    "little_law_rate",
    "generate_arrivals",
    "attachment_generator",
]

MODES = ("dnc-paper", "dnc-exact", "fairshare")
DURATION_DISTRIBUTIONS = ("exponential", "lognormal")


class ScenarioError(ValueError):
    """Raised for malformed or inconsistent scenario documents."""


@dataclass
class Scenario:
    """One simulation configuration; all values in SI units."""

    target_avg_clients: float
    mode: str
    total_clients: int = 1000
    mean_duration_s: float = 231.0
    tau_s: float = 1.0
    seed: int = 1
    max_hops: int = 8
    duration_distribution: str = "exponential"
    lognormal_sigma: float = 1.0
    ladder_bps: Tuple[float, ...] = (1e6, 2e6, 3e6, 4e6, 5e6)
    last_mile_bps: float = 10e6
    last_mile_delay_s: float = 1e-3
    unbounded_chunk_cap_s: Optional[float] = None

    def __post_init__(self):
        if self.unbounded_chunk_cap_s is None:
            self.unbounded_chunk_cap_s = 10.0 * self.tau_s
        if self.target_avg_clients <= 0:
            raise ScenarioError("target_avg_clients must be positive")
        if self.total_clients < 1:
            raise ScenarioError("total_clients must be >= 1")
        for name in ("mean_duration_s", "tau_s", "lognormal_sigma",
                     "last_mile_bps", "unbounded_chunk_cap_s"):
            if getattr(self, name) <= 0:
                raise ScenarioError(f"{name} must be positive")
        if self.last_mile_delay_s < 0:
            raise ScenarioError("last_mile_delay_ms must be >= 0")
        if self.max_hops < 1:
            raise ScenarioError("max_hops must be >= 1")
        if self.mode not in MODES:
            raise ScenarioError(
                f"mode must be one of {', '.join(MODES)}, got {self.mode!r}")
        if self.duration_distribution not in DURATION_DISTRIBUTIONS:
            raise ScenarioError(
                f"duration_distribution must be one of "
                f"{', '.join(DURATION_DISTRIBUTIONS)}, got "
                f"{self.duration_distribution!r}")
        if any(b <= a for a, b in zip(self.ladder_bps, self.ladder_bps[1:])) \
                or not self.ladder_bps or self.ladder_bps[0] <= 0:
            raise ScenarioError(
                f"ladder_mbps must be positive and strictly increasing, "
                f"got {self.ladder_bps}")

    def document_mapping(self) -> dict:
        """Scenario echo in document units and key names."""
        return {
            "target_avg_clients": self.target_avg_clients,
            "total_clients": self.total_clients,
            "mean_duration_s": self.mean_duration_s,
            "tau_s": self.tau_s,
            "seed": self.seed,
            "mode": self.mode,
            "max_hops": self.max_hops,
            "duration_distribution": self.duration_distribution,
            "lognormal_sigma": self.lognormal_sigma,
            "ladder_mbps": [r / 1e6 for r in self.ladder_bps],
            "last_mile_mbps": self.last_mile_bps / 1e6,
            "last_mile_delay_ms": self.last_mile_delay_s * 1e3,
            "unbounded_chunk_cap_s": self.unbounded_chunk_cap_s,
        }


_INT_KEYS = ("total_clients", "seed", "max_hops")
_FLOAT_KEYS = ("target_avg_clients", "mean_duration_s", "tau_s",
               "lognormal_sigma", "last_mile_mbps", "last_mile_delay_ms",
               "unbounded_chunk_cap_s")
_STR_KEYS = ("mode", "duration_distribution")
_LIST_KEYS = ("ladder_mbps",)


def parse_kv_document(text: str) -> dict:
    """Parse a ``key = value`` document ('#' comments) into raw strings."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ScenarioError(f"line {lineno}: expected key = value")
        if key in values:
            raise ScenarioError(f"line {lineno}: duplicate key {key!r}")
        values[key] = (lineno, value)
    return values


def scenario_from_mapping(values: dict, source: str = "scenario") -> Scenario:
    """Build a Scenario from raw document values ({key: (line, str)})."""
    kwargs = {}
    for key, (lineno, value) in values.items():
        if key not in _INT_KEYS + _FLOAT_KEYS + _STR_KEYS + _LIST_KEYS:
            raise ScenarioError(f"{source} line {lineno}: unknown key "
                                f"{key!r}")
        try:
            if key in _INT_KEYS:
                kwargs[key] = int(value)
            elif key in _FLOAT_KEYS:
                kwargs[key] = float(value)
            elif key in _STR_KEYS:
                kwargs[key] = value
            else:
                kwargs[key] = [float(v) for v in value.split(",") if v.strip()]
        except ValueError:
            raise ScenarioError(
                f"{source} line {lineno}: bad value {value!r} for "
                f"{key!r}") from None
    return _scenario_from_kwargs(kwargs, source)


def _scenario_from_kwargs(kwargs: dict, source: str) -> Scenario:
    if "target_avg_clients" not in kwargs:
        raise ScenarioError(f"{source}: missing required key "
                            f"target_avg_clients")
    if "mode" not in kwargs:
        raise ScenarioError(f"{source}: missing required key mode")
    if "ladder_mbps" in kwargs:
        kwargs["ladder_bps"] = tuple(r * 1e6 for r in
                                     kwargs.pop("ladder_mbps"))
    if "last_mile_mbps" in kwargs:
        kwargs["last_mile_bps"] = kwargs.pop("last_mile_mbps") * 1e6
    if "last_mile_delay_ms" in kwargs:
        kwargs["last_mile_delay_s"] = kwargs.pop("last_mile_delay_ms") * 1e-3
    return Scenario(**kwargs)


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document."""
    return scenario_from_mapping(parse_kv_document(text))


def little_law_rate(target_avg_clients: float,
                    mean_duration: float) -> float:
    """Poisson arrival rate sustaining ``target_avg_clients`` concurrent
    sessions of mean length ``mean_duration`` (L = lambda * W)."""
    if target_avg_clients <= 0 or mean_duration <= 0:
        raise ValueError("target_avg_clients and mean_duration must be "
                         "positive")
    return target_avg_clients / mean_duration


def generate_arrivals(scenario: Scenario) -> Tuple[np.ndarray, np.ndarray]:
    """Seeded arrival times and session durations.

    Returns ``(times, durations)`` with exactly ``total_clients`` entries
    each; inter-arrival gaps are exponential with the Little's-law rate,
    durations follow the configured distribution with the configured mean.
    """
    rng = np.random.Generator(np.random.Philox(scenario.seed))
    rate = little_law_rate(scenario.target_avg_clients,
                           scenario.mean_duration_s)
    n = scenario.total_clients
    gaps = rng.exponential(1.0 / rate, size=n)
    times = np.cumsum(gaps)
    if scenario.duration_distribution == "exponential":
        durations = rng.exponential(scenario.mean_duration_s, size=n)
    else:
        sigma = scenario.lognormal_sigma
        mu = math.log(scenario.mean_duration_s) - 0.5 * sigma * sigma
        durations = rng.lognormal(mu, sigma, size=n)
    return times, durations


def attachment_generator(seed: int) -> np.random.Generator:
    """Independent stream for access-switch assignment (jumped Philox)."""
    return np.random.Generator(np.random.Philox(seed).jumped(1))
