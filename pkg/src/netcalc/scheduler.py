"""Delta-schedulers and per-node leftover service curves.

A Delta-scheduler serves a through bit arriving at ``a`` before a cross bit
arriving at ``b`` iff ``b > a + delta``.  ``delta = 0`` is FIFO, ``+inf``
gives the through flow low priority and ``-inf`` high priority.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

from .minplus import INF, Curve, from_lines
from .traffic import EbbFlow, RateBurst, SamplePathEnvelope

Descriptor = Union[EbbFlow, RateBurst]


def pos(x: float) -> float:
    """``[x]_+`` with ``[+inf]_+ = +inf`` and ``[-inf]_+ = 0``."""
    return x if x > 0 else 0.0


def neg(x: float) -> float:
    """``[x]_- = max(-x, 0)`` with ``[-inf]_- = +inf``."""
    return -x if x < 0 else 0.0


def mul(a: float, b: float) -> float:
    """Product with ``0 * inf = 0``."""
    if a == 0 or b == 0:
        return 0.0
    return a * b


def delta_clip(theta: float, delta: float) -> float:
    """``min(theta, delta)``."""
    if theta < 0:
        raise ValueError("theta must be non-negative")
    return min(theta, delta)


@dataclass(frozen=True)
class DeltaNode:
    capacity: float
    delta: float
    cross: Descriptor

    def __post_init__(self):
        if not self.capacity > 0:
            raise ValueError("capacity must be positive")
        if math.isnan(self.delta):
            raise ValueError("delta must not be NaN")

    @property
    def rho(self) -> float:
        return self.cross.rho

    @property
    def deterministic(self) -> bool:
        return isinstance(self.cross, RateBurst)


@dataclass(frozen=True)
class PathSpec:
    nodes: tuple[DeltaNode, ...]
    through: Descriptor

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if len(self.nodes) < 1:
            raise ValueError("a path needs at least one node")

    @classmethod
    def homogeneous(cls, H: int, capacity: float, delta: float, cross: Descriptor,
                    through: Descriptor) -> "PathSpec":
        return cls(tuple(DeltaNode(capacity, delta, cross) for _ in range(H)), through)

    @property
    def H(self) -> int:
        return len(self.nodes)

    @property
    def deterministic(self) -> bool:
        return isinstance(self.through, RateBurst) and all(n.deterministic for n in self.nodes)

    def with_deltas(self, deltas: Sequence[float]) -> "PathSpec":
        return PathSpec(tuple(DeltaNode(n.capacity, d, n.cross) for n, d in zip(self.nodes, deltas)),
                        self.through)

    def extended(self, node: DeltaNode) -> "PathSpec":
        return PathSpec(self.nodes + (node,), self.through)


def _offset(theta: float, delta: float) -> float:
    """``theta - Delta(theta)``: where the cross envelope argument turns positive."""
    return theta - delta_clip(theta, delta)


def leftover_curve(node: DeltaNode, env: Union[SamplePathEnvelope, Curve], theta: float,
                   sigma: float = 0.0) -> Curve:
    """Leftover service ``[C t - G_c(t - theta + Delta(theta); sigma)]_+ 1{t > theta}``.

    ``env`` is either a statistical sample-path envelope (evaluated at
    ``sigma``) or a deterministic envelope curve.  The raw expression may
    dip after the cross burst enters; the returned curve is its largest
    nondecreasing minorant, which is still a service curve.
    """
    g = env.curve(sigma) if isinstance(env, SamplePathEnvelope) else env
    C = node.capacity
    c = _offset(theta, node.delta)
    pts = {0.0, theta}
    if math.isfinite(c):
        pts.update(c + b for b in g.times)
    pts = sorted(pts)
    lines = []
    for t0, t1 in zip(pts, pts[1:] + [INF]):
        m = t0 + 1.0 if math.isinf(t1) else 0.5 * (t0 + t1)
        if m <= theta:
            lines.append((t0, 0.0, 0.0))
        elif math.isinf(c) or m - c <= 0:
            lines.append((t0, C * t0, C))
        else:
            gv, gs = g.line_at(m - c, t0 - c)
            lines.append((t0, C * t0 - gv, C - gs))
    return from_lines(lines)


def node_curve_ebb(node: DeltaNode, gamma: float, theta: float, sigma: float) -> Curve:
    """Per-node curve ``[C t - [(rho+gamma)(t - theta + Delta(theta)) + sigma]_+]_+ 1{t>theta}``.

    Concave and increasing once positive; a lower bound of
    :func:`leftover_curve` with the EBB sample-path envelope.
    """
    C, r = node.capacity, node.rho + gamma
    c = _offset(theta, node.delta)
    # inner bracket turns positive at tz
    if math.isinf(c):
        tz = INF
    elif r == 0:
        tz = -INF
    else:
        tz = c - sigma / r
    pts = sorted({0.0, theta} | ({tz} if theta < tz < INF else set()))
    lines = []
    for t0, t1 in zip(pts, pts[1:] + [INF]):
        m = t0 + 1.0 if math.isinf(t1) else 0.5 * (t0 + t1)
        if m <= theta:
            lines.append((t0, 0.0, 0.0))
        elif m < tz:
            lines.append((t0, C * t0, C))
        else:
            lines.append((t0, C * t0 - r * (t0 - c) - sigma, C - r))
    return from_lines(lines)


def node_curve_old(node: DeltaNode, gamma: float, theta: float, sigma: float = 0.0) -> Curve:
    """Per-node curve with the burst outside: ``[C t - (rho+gamma)[t - theta + Delta(theta)]_+ - sigma]_+ 1{t>theta}``."""
    C, r = node.capacity, node.rho + gamma
    c = _offset(theta, node.delta)
    pts = sorted({0.0, theta} | ({c} if theta < c < INF else set()))
    lines = []
    for t0, t1 in zip(pts, pts[1:] + [INF]):
        m = t0 + 1.0 if math.isinf(t1) else 0.5 * (t0 + t1)
        if m <= theta:
            lines.append((t0, 0.0, 0.0))
        elif math.isinf(c) or m <= c:
            lines.append((t0, C * t0 - sigma, C))
        else:
            lines.append((t0, C * t0 - r * (t0 - c) - sigma, C - r))
    return from_lines(lines)
