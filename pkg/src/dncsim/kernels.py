"""Hot numeric kernels: numba-compiled fast path with a pure-numpy fallback.

The admission scans and the per-chunk deadline accounting evaluate the same
small closed forms millions of times per simulation, so they are kept as
flat-array kernels.  Two interchangeable implementations exist:

* ``numba`` -- scalar loops compiled with ``@njit`` (default when numba
  imports cleanly),
* ``numpy`` -- vectorised fallback with identical semantics.

The active backend is picked at import time from the environment variable
``DNCSIM_KERNEL_BACKEND`` (``auto``/unset, ``numba``, or ``numpy``).  Both
implementations stay importable through ``NUMPY_IMPLS`` / ``NUMBA_IMPLS`` so
tests and ``benchmarks/bench_kernels.py`` can compare them directly.

Array conventions, shared by all kernels:

``cap``, ``theta``
    per-edge-slot capacity (bit/s) and fixed per-hop latency (s)
``rate_sum``, ``burst_sum``, ``count``
    per-edge-slot totals over the currently allocated flows: sustained
    rate (bit/s), burst allowance (bits), and flow count
``paths``, ``plen``
    per-flow-row edge slots as a zero-padded int64 matrix plus the row's
    real path length
``enc``, ``burst``
    per-flow-row encoding rate (bit/s) and burst allowance (bits)

A flow's worst-case chunk delay over a tandem of links is its burst drained
at the tightest residual rate plus the per-link latency terms; ``inf``
encodes "no finite bound" (residual rate not above the flow's own rate).
"""

from __future__ import annotations

import math
import os

import numpy as np

__all__ = [
    "BACKEND",
    "NUMPY_IMPLS",
    "NUMBA_IMPLS",
    "bound_paper",
    "bound_exact",
    "flow_bounds",
    "path_bottlenecks",
    "fair_rates",
    "chunk_excess",
]

_INF = math.inf


# ---------------------------------------------------------------------------
# scalar-loop reference implementations (numba-compilable as written)
# ---------------------------------------------------------------------------

def _bound_paper_loop(cap, theta, rate_sum, burst_sum, edges, n_edges,
                      enc, burst, allocated):
    own_rate = enc if allocated else 0.0
    own_burst = burst if allocated else 0.0
    min_resid = _INF
    lat = 0.0
    for k in range(n_edges):
        e = edges[k]
        resid = cap[e] - (rate_sum[e] - own_rate)
        if resid < min_resid:
            min_resid = resid
        lat += theta[e] + (burst_sum[e] - own_burst) / cap[e]
    if min_resid <= enc:
        return _INF
    return burst / min_resid + lat


def _bound_exact_loop(cap, theta, rate_sum, burst_sum, edges, n_edges,
                      enc, burst, allocated):
    own_rate = enc if allocated else 0.0
    own_burst = burst if allocated else 0.0
    min_rate = _INF
    lat = 0.0
    for k in range(n_edges):
        e = edges[k]
        rate = cap[e] - (rate_sum[e] - own_rate)
        if rate <= 0.0:
            return _INF
        if rate < min_rate:
            min_rate = rate
        lat += (cap[e] * theta[e] + (burst_sum[e] - own_burst)) / rate
    if enc >= min_rate:
        return _INF
    return burst / min_rate + lat


def _path_bottlenecks_loop(cap, rate_sum, paths, plen, out):
    for r in range(paths.shape[0]):
        low = _INF
        for k in range(plen[r]):
            e = paths[r, k]
            resid = cap[e] - rate_sum[e]
            if resid < low:
                low = resid
        out[r] = low
    return out


def _fair_rates_loop(cap, count, paths, plen, rows, out):
    for i in range(rows.shape[0]):
        r = rows[i]
        low = _INF
        for k in range(plen[r]):
            e = paths[r, k]
            share = cap[e] / count[e]
            if share < low:
                low = share
        out[i] = low
    return out


def _chunk_excess_loop(times, bounds, arrival, n_chunks, tau, cap):
    total = 0.0
    idx = 0
    last = times.shape[0] - 1
    for k in range(n_chunks):
        t = arrival + k * tau
        while idx < last and times[idx + 1] <= t:
            idx += 1
        d = bounds[idx]
        if d == _INF:
            total += cap
        elif d > tau:
            total += d - tau
    return total


# ---------------------------------------------------------------------------
# vectorised numpy fallback
# ---------------------------------------------------------------------------

def _flow_bounds_numpy(cap, theta, rate_sum, burst_sum, paths, plen, rows,
                       enc, burst, exact, out):
    if rows.shape[0] == 0:
        return out
    sub = paths[rows]
    mask = np.arange(paths.shape[1])[None, :] < plen[rows][:, None]
    own_rate = enc[rows][:, None]
    own_burst = burst[rows][:, None]
    cap_g = cap[sub]
    theta_g = theta[sub]
    cross_rate = rate_sum[sub] - own_rate
    cross_burst = burst_sum[sub] - own_burst
    if exact:
        rate = cap_g - cross_rate
        saturated = ((rate <= 0.0) & mask).any(axis=1)
        safe_rate = np.where(rate > 0.0, rate, 1.0)
        lat = np.where(mask, (cap_g * theta_g + cross_burst) / safe_rate, 0.0)
        min_rate = np.where(mask, rate, _INF).min(axis=1)
        vals = burst[rows] / min_rate + lat.sum(axis=1)
        vals = np.where(saturated | (enc[rows] >= min_rate), _INF, vals)
    else:
        resid = cap_g - cross_rate
        min_resid = np.where(mask, resid, _INF).min(axis=1)
        lat = np.where(mask, theta_g + cross_burst / cap_g, 0.0).sum(axis=1)
        vals = np.where(min_resid <= enc[rows], _INF,
                        burst[rows] / min_resid + lat)
    out[:] = vals
    return out


def _path_bottlenecks_numpy(cap, rate_sum, paths, plen, out):
    if paths.shape[0] == 0:
        return out
    mask = np.arange(paths.shape[1])[None, :] < plen[:, None]
    resid = cap[paths] - rate_sum[paths]
    out[:] = np.where(mask, resid, _INF).min(axis=1)
    return out


def _fair_rates_numpy(cap, count, paths, plen, rows, out):
    if rows.shape[0] == 0:
        return out
    sub = paths[rows]
    mask = np.arange(paths.shape[1])[None, :] < plen[rows][:, None]
    counts = count[sub]
    share = cap[sub] / np.where(counts > 0, counts, 1.0)
    out[:] = np.where(mask, share, _INF).min(axis=1)
    return out


def _chunk_excess_numpy(times, bounds, arrival, n_chunks, tau, cap):
    if n_chunks == 0:
        return 0.0
    starts = arrival + tau * np.arange(n_chunks)
    idx = np.searchsorted(times, starts, side="right") - 1
    idx = np.clip(idx, 0, len(times) - 1)
    d = bounds[idx]
    contrib = np.where(np.isinf(d), cap, np.maximum(d - tau, 0.0))
    return float(contrib.sum())


NUMPY_IMPLS = {
    "bound_paper": _bound_paper_loop,
    "bound_exact": _bound_exact_loop,
    "flow_bounds": _flow_bounds_numpy,
    "path_bottlenecks": _path_bottlenecks_numpy,
    "fair_rates": _fair_rates_numpy,
    "chunk_excess": _chunk_excess_numpy,
}


# ---------------------------------------------------------------------------
# backend selection
# ---------------------------------------------------------------------------

def _compile_numba():
    from numba import njit

    jit = njit(cache=True)
    bound_paper = jit(_bound_paper_loop)
    bound_exact = jit(_bound_exact_loop)

    @njit(cache=True)
    def flow_bounds(cap, theta, rate_sum, burst_sum, paths, plen, rows,
                    enc, burst, exact, out):
        for i in range(rows.shape[0]):
            r = rows[i]
            if exact:
                out[i] = bound_exact(cap, theta, rate_sum, burst_sum,
                                     paths[r], plen[r], enc[r], burst[r],
                                     True)
            else:
                out[i] = bound_paper(cap, theta, rate_sum, burst_sum,
                                     paths[r], plen[r], enc[r], burst[r],
                                     True)
        return out

    return {
        "bound_paper": bound_paper,
        "bound_exact": bound_exact,
        "flow_bounds": flow_bounds,
        "path_bottlenecks": jit(_path_bottlenecks_loop),
        "fair_rates": jit(_fair_rates_loop),
        "chunk_excess": jit(_chunk_excess_loop),
    }


def _select_backend():
    choice = os.environ.get("DNCSIM_KERNEL_BACKEND", "auto").strip().lower()
    if choice in ("", "auto"):
        try:
            return "numba", _compile_numba()
        except ImportError:
            return "numpy", NUMPY_IMPLS
    if choice == "numba":
        return "numba", _compile_numba()
    if choice == "numpy":
        return "numpy", NUMPY_IMPLS
    raise ValueError(
        f"DNCSIM_KERNEL_BACKEND={choice!r} (expected auto, numba or numpy)")


BACKEND, _IMPLS = _select_backend()
try:
    NUMBA_IMPLS = _IMPLS if BACKEND == "numba" else _compile_numba()
except ImportError:  # pragma: no cover - numba is a hard dependency
    NUMBA_IMPLS = None


# ---------------------------------------------------------------------------
# public wrappers
# ---------------------------------------------------------------------------

def bound_paper(cap, theta, rate_sum, burst_sum, edges, enc, burst,
                allocated):
    """Worst-case chunk delay over ``edges`` under the rate-latency
    parameter form of the residual service (affine relaxation)."""
    return float(_IMPLS["bound_paper"](cap, theta, rate_sum, burst_sum,
                                       edges, len(edges), enc, burst,
                                       allocated))


def bound_exact(cap, theta, rate_sum, burst_sum, edges, enc, burst,
                allocated):
    """Same as :func:`bound_paper` but with the exact blind-multiplexing
    residual ``max(0, beta - alpha)`` on every edge."""
    return float(_IMPLS["bound_exact"](cap, theta, rate_sum, burst_sum,
                                       edges, len(edges), enc, burst,
                                       allocated))


def flow_bounds(cap, theta, rate_sum, burst_sum, paths, plen, rows,
                enc, burst, exact=False):
    """Delay bounds for the allocated flows in ``rows`` (batch)."""
    out = np.empty(len(rows), dtype=np.float64)
    return _IMPLS["flow_bounds"](cap, theta, rate_sum, burst_sum, paths,
                                 plen, rows, enc, burst, exact, out)


def path_bottlenecks(cap, rate_sum, paths, plen):
    """Residual bottleneck (min over edges of capacity minus allocated
    rate) for every row of a path matrix."""
    out = np.empty(paths.shape[0], dtype=np.float64)
    return _IMPLS["path_bottlenecks"](cap, rate_sum, paths, plen, out)


def fair_rates(cap, count, paths, plen, rows):
    """Per-flow equal-split rate: min over the flow's edges of
    capacity / flow count."""
    out = np.empty(len(rows), dtype=np.float64)
    return _IMPLS["fair_rates"](cap, count, paths, plen, rows, out)


def chunk_excess(times, bounds, arrival, n_chunks, tau, cap):
    """Total deadline excess over a session's chunks.

    ``times``/``bounds`` describe the client's piecewise-constant delay
    bound (value ``bounds[i]`` holds from ``times[i]`` on).  Chunk ``k``
    starts at ``arrival + k*tau``; a finite bound contributes
    ``max(0, bound - tau)``, an infinite bound contributes ``cap``.
    """
    return float(_IMPLS["chunk_excess"](times, bounds, arrival, n_chunks,
                                        tau, cap))
