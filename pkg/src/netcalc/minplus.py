"""
Piecewise-linear min-plus calculus.

A :class:`Curve` is a nondecreasing, left-continuous function on ``t >= 0``
with ``f(t) = 0`` for ``t <= 0``.  It is stored as a list of segments
``(start_time, right_limit_value, slope)``; a segment starting at ``t_i``
describes ``f`` on ``(t_i, t_{i+1}]``.  The curve may become ``+inf`` after
``inf_from`` (the shape of the burst-delay function ``delta_a``).

Units are whatever the caller uses; the rest of the package uses bits,
seconds and bits/second.

Convolution, deconvolution and pointwise minima are exact: on every interval
between candidate breakpoints the result is the lower (or upper) envelope of
a finite set of lines, which is computed directly.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

INF = math.inf

# breakpoints closer than this are merged
MERGE_TOL = 1e-12
# default step of the grid oracles (0.01 ms)
GRID_STEP = 1e-5


class UnstableDeconvolution(ValueError):
    """The deconvolution (or deviation) is unbounded: the arrival slope is not
    below the service slope."""


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class Curve:
    times: tuple[float, ...]
    values: tuple[float, ...]
    slopes: tuple[float, ...]
    inf_from: float = INF

    def __post_init__(self):
        n = len(self.times)
        if n == 0 or len(self.values) != n or len(self.slopes) != n:
            raise ValueError("times, values and slopes must be non-empty and of equal length")
        if self.times[0] != 0.0:
            raise ValueError("first segment must start at t=0")
        for a, b in zip(self.times, self.times[1:]):
            if not b > a:
                raise ValueError("segment start times must be strictly increasing")
        if not self.inf_from >= self.times[-1]:
            raise ValueError("inf_from must not precede the last segment")
        if any(not (s >= 0.0) or math.isinf(s) for s in self.slopes):
            raise ValueError("slopes must be finite and non-negative")
        if any(not (v >= 0.0) or math.isinf(v) for v in self.values):
            raise ValueError("values must be finite and non-negative")
        for i in range(n - 1):
            left = self.values[i] + self.slopes[i] * (self.times[i + 1] - self.times[i])
            if self.values[i + 1] < left - 1e-9 * max(1.0, abs(left)):
                raise ValueError("curve must be nondecreasing")

    # -- construction -----------------------------------------------------

    @classmethod
    def zero(cls) -> "Curve":
        return cls((0.0,), (0.0,), (0.0,))

    @classmethod
    def rate_burst(cls, rate: float, burst: float) -> "Curve":
        """``rate * t + burst`` for ``t > 0``."""
        return cls((0.0,), (float(burst),), (float(rate),))

    @classmethod
    def rate_latency(cls, rate: float, latency: float) -> "Curve":
        """``rate * [t - latency]_+``."""
        if latency <= 0:
            return cls((0.0,), (0.0,), (float(rate),))
        return cls((0.0, float(latency)), (0.0, 0.0), (0.0, float(rate)))

    @classmethod
    def delta(cls, a: float) -> "Curve":
        """Burst-delay function: 0 for ``t <= a`` and ``+inf`` afterwards."""
        if a < 0:
            raise ValueError("delta requires a >= 0")
        return cls((0.0,), (0.0,), (0.0,), float(a))

    @classmethod
    def from_segments(cls, segments: Iterable[tuple[float, float, float]],
                      inf_from: float = INF) -> "Curve":
        """Build a curve from ``(start, right_limit, slope)`` triples.

        Near-duplicate breakpoints and collinear neighbours are merged and
        round-off level monotonicity violations are repaired.
        """
        return _canonical(list(segments), inf_from)

    # -- inspection -------------------------------------------------------

    @property
    def segments(self) -> list[tuple[float, float, float]]:
        return list(zip(self.times, self.values, self.slopes))

    @property
    def origin_jump(self) -> float:
        return self.values[0]

    @property
    def tail_slope(self) -> float:
        return self.slopes[-1] if math.isinf(self.inf_from) else INF

    @property
    def breakpoints(self) -> list[float]:
        pts = list(self.times)
        if not math.isinf(self.inf_from) and self.inf_from > pts[-1]:
            pts.append(self.inf_from)
        return pts

    @cached_property
    def _arrays(self):
        return (np.asarray(self.times), np.asarray(self.values), np.asarray(self.slopes))

    def __call__(self, t):
        """Left-continuous evaluation; works on scalars and arrays."""
        times, values, slopes = self._arrays
        ta = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(times, ta, side="left") - 1, 0, None)
        out = values[idx] + slopes[idx] * (ta - times[idx])
        out = np.where(ta <= 0.0, 0.0, out)
        out = np.where(ta > self.inf_from, INF, out)
        return float(out) if out.ndim == 0 else out

    def right_limit(self, t):
        """``f(t+)``; equals ``origin_jump`` at ``t = 0``."""
        times, values, slopes = self._arrays
        ta = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(times, ta, side="right") - 1, 0, None)
        out = values[idx] + slopes[idx] * (ta - times[idx])
        out = np.where(ta < 0.0, 0.0, out)
        out = np.where(ta >= self.inf_from, INF, out)
        return float(out) if out.ndim == 0 else out

    def segment_index(self, t: float) -> int:
        """Index of the segment whose open interval contains ``t`` (``t > 0``)."""
        return max(0, bisect.bisect_left(self.times, t) - 1)

    def line_at(self, t: float, origin: float) -> tuple[float, float]:
        """Value at ``origin`` and slope of the segment that contains ``t``."""
        i = self.segment_index(t)
        return self.values[i] + self.slopes[i] * (origin - self.times[i]), self.slopes[i]

    def shifted(self, a: float) -> "Curve":
        """``f(t - a)``, i.e. convolution with ``delta_a``."""
        if a < 0:
            raise ValueError("shift must be non-negative")
        if a == 0:
            return self
        segs = [(0.0, 0.0, 0.0)] + [(t + a, v, s) for t, v, s in self.segments]
        return _canonical(segs, self.inf_from + a)

    def minus_clipped(self, k: float) -> "Curve":
        """``[f(t) - k]_+`` for ``t > 0``."""
        return from_lines([(t, v - k, s) for t, v, s in self.segments], self.inf_from)

    def plus_rate(self, rate: float) -> "Curve":
        """``f(t) + rate * t``."""
        return _canonical([(t, v + rate * t, s + rate) for t, v, s in self.segments], self.inf_from)

    def __repr__(self):
        body = ", ".join(f"({t:.6g}, {v:.6g}, {s:.6g})" for t, v, s in self.segments)
        tail = "" if math.isinf(self.inf_from) else f", inf_from={self.inf_from:.6g}"
        return f"Curve([{body}]{tail})"


# -- canonical form -----------------------------------------------------------

def _canonical(segs: list[tuple[float, float, float]], inf_from: float = INF) -> Curve:
    segs = sorted(((float(t), float(v), float(s)) for t, v, s in segs if t < inf_from or t == 0.0),
                  key=lambda p: p[0])
    if not segs or segs[0][0] > 0.0:
        segs.insert(0, (0.0, 0.0, 0.0))
    scale = max([1.0] + [abs(t) for t, _, _ in segs if math.isfinite(t)])
    merged: list[list[float]] = []
    for t, v, s in segs:
        if merged and t - merged[-1][0] <= MERGE_TOL * scale:
            merged[-1] = [merged[-1][0], v, s]
            continue
        merged.append([t, v, s])
    out: list[list[float]] = []
    for t, v, s in merged:
        s = 0.0 if abs(s) < 1e-14 * max(1.0, abs(s)) else max(s, 0.0)
        v = max(v, 0.0)
        if out:
            pt, pv, ps = out[-1]
            left = pv + ps * (t - pt)
            vtol = 1e-12 * max(1.0, abs(left))
            if left - 1e-9 * max(1.0, abs(left)) <= v < left:
                v = left
            if abs(v - left) <= vtol and abs(s - ps) <= 1e-12 * max(1.0, abs(s), abs(ps)):
                continue
            if abs(v - left) <= vtol:
                v = left
        out.append([t, v, s])
    times, values, slopes = zip(*out)
    if inf_from < times[-1]:
        inf_from = times[-1]
    return Curve(tuple(times), tuple(values), tuple(slopes), inf_from)


def from_lines(lines: Sequence[tuple[float, float, float]], inf_from: float = INF) -> Curve:
    """Build a curve from possibly negative / decreasing line pieces.

    Each piece ``(start, value_at_start_plus, slope)`` holds until the next
    start.  The result is ``[.]_+`` of the pieces, replaced by its largest
    nondecreasing minorant ``inf_{u >= t} f(u)`` so that it is a valid
    service curve.
    """
    lines = sorted(lines, key=lambda p: p[0])
    ends = [l[0] for l in lines[1:]] + [inf_from]
    pieces: list[tuple[float, float, float]] = []
    for (t0, v, s), t1 in zip(lines, ends):
        if v >= 0 and s >= 0:
            pieces.append((t0, v, s))
            continue
        if s > 0:
            x = t0 - v / s
            if x < t1:
                pieces.append((t0, 0.0, 0.0))
                pieces.append((x, 0.0, s))
            else:
                pieces.append((t0, 0.0, 0.0))
            continue
        if v <= 0:
            pieces.append((t0, 0.0, 0.0))
            continue
        # positive, decreasing piece: hits zero inside or stays positive
        x = t0 + v / (-s)
        if x < t1:
            pieces.append((t0, v, s))
            pieces.append((x, 0.0, 0.0))
        else:
            pieces.append((t0, v, s))
    return _canonical(_nondecreasing_closure(pieces, inf_from), inf_from)


def _nondecreasing_closure(pieces, inf_from):
    """Largest nondecreasing minorant of non-negative line pieces."""
    ends = [p[0] for p in pieces[1:]] + [inf_from]
    out = []
    running = INF
    for (t0, v, s), t1 in reversed(list(zip(pieces, ends))):
        if s < 0:
            end_val = v + s * (t1 - t0) if math.isfinite(t1) else 0.0
            c = min(end_val, running)
            out.append((t0, c, 0.0))
            running = c
            continue
        if v + s * ((t1 - t0) if math.isfinite(t1) else 0.0) <= running or math.isinf(running):
            out.append((t0, v, s))
            running = min(running, v)
            continue
        # line rises above the running minimum before t1
        if v >= running:
            out.append((t0, running, 0.0))
        else:
            x = t0 + (running - v) / s
            out.append((x, running, 0.0))
            out.append((t0, v, s))
            running = v
    out.reverse()
    return out


# -- envelopes ---------------------------------------------------------------

def _envelope(lines: list[tuple[float, float]], x0: float, x1: float, lower: bool):
    """Lower/upper envelope of lines ``v + s (x - x0)`` on ``[x0, x1)``.

    Returns ``(start, value_at_start, slope)`` pieces.
    """
    if lower:
        cur = min(lines, key=lambda l: (l[0], l[1]))
    else:
        cur = max(lines, key=lambda l: (l[0], l[1]))
    x = x0
    out = [(x0, cur[0], cur[1])]
    while True:
        vc = cur[0] + cur[1] * (x - x0)
        best_x, best = INF, None
        for v, s in lines:
            if (lower and s < cur[1]) or (not lower and s > cur[1]):
                gap = (v + s * (x - x0)) - vc
                xc = x + gap / (cur[1] - s)
                if xc < x:
                    xc = x
                if xc < best_x or (xc == best_x and best is not None
                                   and ((lower and s < best[1]) or (not lower and s > best[1]))):
                    best_x, best = xc, (v, s)
        if best is None or best_x >= x1:
            return out
        x = best_x
        cur = best
        out.append((x, cur[0] + cur[1] * (x - x0), cur[1]))


def _merge_points(pts: Iterable[float]) -> list[float]:
    pts = sorted(p for p in pts if math.isfinite(p))
    out: list[float] = []
    scale = max([1.0] + [abs(p) for p in pts])
    for p in pts:
        if not out or p - out[-1] > MERGE_TOL * scale:
            out.append(p)
    return out


def _probe(t0: float, t1: float) -> float:
    if math.isinf(t1):
        return t0 + max(1.0, abs(t0))
    return 0.5 * (t0 + t1)


# -- operations --------------------------------------------------------------

def conv(f: Curve, g: Curve) -> Curve:
    """Min-plus convolution ``inf_{0<=s<=t} f(s) + g(t-s)``."""
    bf, bg = f.breakpoints, g.breakpoints
    end = f.inf_from + g.inf_from
    pts = _merge_points([a + b for a in bf for b in bg if a + b < end] + [0.0])
    bounds = pts + [end]
    fa = [float(v) for v in f(np.asarray(bf))]
    gb = [float(v) for v in g(np.asarray(bg))]
    pieces: list[tuple[float, float, float]] = []
    for t0, t1 in zip(bounds, bounds[1:]):
        if t1 <= t0:
            continue
        m = _probe(t0, t1)
        lines = []
        for a, va in zip(bf, fa):
            x = m - a
            if 0.0 <= x <= g.inf_from:
                gv, gs = g.line_at(x, t0 - a)
                lines.append((va + gv, gs))
        for b, vb in zip(bg, gb):
            x = m - b
            if 0.0 <= x <= f.inf_from:
                fv, fs = f.line_at(x, t0 - b)
                lines.append((fv + vb, fs))
        if not lines:
            break
        pieces.extend(_envelope(lines, t0, t1, lower=True))
    return _canonical(pieces, end)


def deconv_at(f: Curve, g: Curve, t: float) -> float:
    """``sup_{s>=0} f(t+s) - g(s)`` evaluated exactly at one ``t >= 0``."""
    _check_deconv(f, g)
    cands = {0.0}
    cands.update(a - t for a in f.times if a - t >= 0.0)
    cands.update(b for b in g.breakpoints)
    best = -INF
    for u in cands:
        if u > g.inf_from:
            continue
        best = max(best, f(t + u) - g(u))
        if u < g.inf_from:
            best = max(best, f.right_limit(t + u) - g.right_limit(u))
    return best


def _check_deconv(f: Curve, g: Curve):
    if not math.isinf(f.inf_from):
        raise UnstableDeconvolution("deconvolution of a curve with an infinite tail")
    if math.isinf(g.inf_from) and f.tail_slope > g.tail_slope:
        raise UnstableDeconvolution(
            f"arrival slope {f.tail_slope:g} is not below service slope {g.tail_slope:g}")


def deconv(f: Curve, g: Curve) -> Curve:
    """Min-plus deconvolution ``sup_{s>=0} f(t+s) - g(s)`` as a curve.

    The value at ``t = 0`` is 0 by the curve convention.  The vertical
    deviation is the supremum at ``t = 0`` itself (:func:`v_dev`), which can
    be smaller than ``deconv(f, g)(0+)`` when ``g`` jumps at the origin.
    """
    _check_deconv(f, g)
    bg = g.breakpoints
    pts = _merge_points([0.0] + [a - b for a in f.times for b in bg if a - b > 0.0])
    bounds = pts + [INF]
    pieces: list[tuple[float, float, float]] = []
    for t0, t1 in zip(bounds, bounds[1:]):
        m = _probe(t0, t1)
        lines = []
        for b in bg:
            if b <= g.inf_from:
                fv, fs = f.line_at(m + b, t0 + b)
                lines.append((fv - g(b), fs))
        for a in f.times:
            x = a - m
            if 0.0 <= x <= g.inf_from and a > 0.0:
                gv, gs = g.line_at(x, a - t0)
                lines.append((f.right_limit(a) - gv, gs))
        pieces.extend(_envelope(lines, t0, t1, lower=False))
    return _canonical(pieces)


def pointwise_min(cs: Sequence[Curve]) -> Curve:
    if not cs:
        raise EmptyInput("pointwise_min needs at least one curve")
    if len(cs) == 1:
        return cs[0]
    end = max(c.inf_from for c in cs)
    pts = _merge_points([p for c in cs for p in c.breakpoints if p < end] + [0.0])
    bounds = pts + [end]
    pieces = []
    for t0, t1 in zip(bounds, bounds[1:]):
        m = _probe(t0, t1)
        lines = [c.line_at(m, t0) for c in cs if m <= c.inf_from]
        pieces.extend(_envelope(lines, t0, t1, lower=True))
    return _canonical(pieces, end)


def _inverse(s: Curve, y: float, strict: bool) -> float:
    """``inf{u : s(u) >= y}`` (or ``> y`` when ``strict``)."""
    if y < 0 or (y == 0 and not strict):
        return 0.0
    n = len(s.times)
    for i in range(n):
        t, v, sl = s.times[i], s.values[i], s.slopes[i]
        end = s.times[i + 1] if i + 1 < n else s.inf_from
        if (y < v) or (y == v and not strict):
            return t
        if sl > 0:
            x = t + (y - v) / sl
            if x < end or (x == end and not strict):
                return x
    if math.isfinite(s.inf_from):
        return s.inf_from
    return INF


def h_dev(g: Curve, s: Curve) -> float:
    """Horizontal deviation: smallest ``d >= 0`` with ``s(t+d) >= g(t)`` for all t."""
    if math.isinf(s.inf_from):
        _check_deconv(g, s)
    ys = set(s.values)
    for i in range(len(s.times) - 1):
        ys.add(s.values[i] + s.slopes[i] * (s.times[i + 1] - s.times[i]))
    best = 0.0
    n = len(g.times)
    for i in range(n):
        t0, v, sl = g.times[i], g.values[i], g.slopes[i]
        t1 = g.times[i + 1] if i + 1 < n else g.inf_from
        # value at the right end of the previous segment is covered by t0 itself
        cands = [t0]
        if sl > 0:
            for y in ys:
                x = t0 + (y - v) / sl
                if t0 < x < t1:
                    cands.append(x)
        if i + 1 < n:
            cands.append(t1)
        for x in cands:
            if x > 0:
                best = max(best, _inverse(s, float(g(x)), False) - x)
            if x < t1:
                yr = v + sl * (x - t0)
                best = max(best, _inverse(s, yr, sl > 0) - x)
    return best


def v_dev(g: Curve, s: Curve) -> float:
    """Vertical deviation ``deconv(g, s)(0)``."""
    return deconv_at(g, s, 0.0)


# -- grid oracles --------------------------------------------------------------

def conv_grid(f: Callable, g: Callable, t, step: float = GRID_STEP) -> np.ndarray:
    """Grid fallback for convolution of arbitrary nondecreasing functions.

    The split point runs over a uniform grid, so the result over-estimates
    the true infimum by at most ``step`` times the larger slope.
    """
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(ts)
    for k, tk in enumerate(ts):
        if tk <= 0:
            out[k] = 0.0
            continue
        u = np.append(np.arange(0.0, tk, step), tk)
        with np.errstate(invalid="ignore"):
            out[k] = np.min(np.asarray(f(u)) + np.asarray(g(tk - u)))
    return out


def deconv_grid(f: Callable, g: Callable, t, horizon: float, step: float = GRID_STEP) -> np.ndarray:
    """Grid fallback for deconvolution, supremum over ``s`` in ``[0, horizon]``."""
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    u = np.append(np.arange(0.0, horizon, step), horizon)
    with np.errstate(invalid="ignore"):
        return np.array([np.max(np.asarray(f(tk + u)) - np.asarray(g(u))) for tk in ts])
