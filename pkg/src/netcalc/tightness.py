"""Worst-case lower bounds and the arrival scenario that attains them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bounds import deterministic_bounds
from .minplus import INF, Curve
from .netservice import stability_check
from .scheduler import DeltaNode, PathSpec, neg, pos
from .simulator import Trace, _node
from .traffic import RateBurst


def latency_lh(node: DeltaNode) -> float:
    """Latency a through burst provably suffers at ``node`` in the adversarial scenario."""
    if not isinstance(node.cross, RateBurst):
        raise TypeError("latency needs a rate-burst cross descriptor")
    C, rho, sigma, d = node.capacity, node.rho, node.cross.sigma, node.delta
    if not C > rho:
        raise ValueError("cross rate must be below capacity")
    # pos/neg map +inf to +inf and -inf to 0 / +inf; inf - inf cannot occur
    return min(sigma / (C - rho), pos(sigma + rho * pos(d) - C * neg(d)) / C)


@dataclass(frozen=True)
class LowerBounds:
    backlog: float
    delay: float
    latencies: tuple[float, ...]


def lower_bounds(path: PathSpec) -> LowerBounds:
    stability_check(path)
    L = tuple(latency_lh(n) for n in path.nodes)
    s0, r0 = path.through.sigma, path.through.rho
    return LowerBounds(s0 + r0 * sum(L), s0 / min(n.capacity for n in path.nodes) + sum(L), L)


@dataclass(frozen=True)
class AdversarialScenario:
    """Arrivals in simulation time; the through burst enters right after ``origin``."""

    nu: float
    slot: float
    origin: float
    through_arrivals: Curve
    cross_arrivals: tuple[Curve, ...]
    latencies: tuple[float, ...]
    through: Trace
    cross: tuple[Trace, ...]


def _sample(curve: Curve, horizon: int, slot: float) -> Trace:
    """Per-slot amounts that enter at slot starts without exceeding ``curve``."""
    edges = curve.right_limit(np.arange(horizon) * slot)
    return Trace(np.maximum(np.diff(edges, prepend=0.0), 0.0), slot)


def adversarial_traces(path: PathSpec, slot: float = 1e-3, horizon: Optional[int] = None) -> AdversarialScenario:
    """Slot-sampled arrivals of the lower-bound construction.

    The through flow sends its envelope from ``origin``.  Cross flow ``h``
    bursts right before the through traffic reaches node ``h``, moved earlier
    by ``[Delta_h]_-``.  The nodes are run in order so each burst is placed
    at the slot where through traffic actually first arrives in the slotted
    system; slot arrivals enter at the slot start and equal tags go to the
    cross flow, so a burst sharing that slot is still served first.
    ``nu`` records this one-slot timing resolution.
    """
    if not slot > 0:
        raise ValueError("slot must be positive")
    L = lower_bounds(path).latencies
    lead = max((neg(n.delta) for n in path.nodes if math.isfinite(n.delta)), default=0.0)
    origin = slot * math.ceil(lead / slot - 1e-9)
    if horizon is None:
        span = deterministic_bounds(path).delay + sum(L)
        horizon = int(math.ceil((origin + 3.0 * span) / slot)) + 20
    through = Curve.rate_burst(path.through.rho, path.through.sigma).shifted(origin)
    thr = _sample(through, horizon, slot)
    x = thr.amounts
    curves, traces = [], []
    for n in path.nodes:
        first = int(np.argmax(x > 0)) if np.any(x > 0) else horizon - 1
        back = neg(n.delta) / slot if math.isfinite(n.delta) else 0.0
        start = slot * max(math.floor(first - back + 1e-9), 0)
        c = Curve.rate_burst(n.rho, n.cross.sigma).shifted(start)
        tr = _sample(c, horizon, slot)
        curves.append(c)
        traces.append(tr)
        x, _ = _node(x, tr.amounts, n.capacity * slot, n.delta / slot)
    return AdversarialScenario(slot, slot, origin, through, tuple(curves), L, thr, tuple(traces))
