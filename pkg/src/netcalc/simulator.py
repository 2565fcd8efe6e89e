"""Discrete-time fluid simulation of a tandem of Delta-scheduled links."""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.stats import binomtest

from .scheduler import PathSpec
from .traffic import MmooSource


class TraceMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Trace:
    """Per-slot arrival amounts in bits."""

    amounts: np.ndarray
    slot: float = 1e-3

    def __post_init__(self):
        a = np.asarray(self.amounts, dtype=float)
        if a.ndim != 1:
            raise ValueError("trace amounts must be one-dimensional")
        if not (np.all(np.isfinite(a)) and np.all(a >= 0)):
            raise ValueError("trace amounts must be finite and non-negative")
        if not self.slot > 0:
            raise ValueError("slot must be positive")
        object.__setattr__(self, "amounts", a)

    @property
    def horizon(self) -> int:
        return len(self.amounts)

    def cumulative(self) -> np.ndarray:
        """``A(k slot)`` for ``k = 0..horizon``; ``A(0) = 0``."""
        return np.concatenate(([0.0], np.cumsum(self.amounts)))

    @classmethod
    def zeros(cls, horizon: int, slot: float = 1e-3) -> "Trace":
        return cls(np.zeros(horizon), slot)


@dataclass(frozen=True)
class SimMetrics:
    """Backlog and virtual delay of the through traffic, one sample per slot.

    Arrivals of a slot enter at its start and service runs at constant rate
    through the slot, so ``backlog[k] = A((k+1) slot) - D(k slot)`` and
    ``delay[k]`` are the largest values within slot ``k``.  ``delay[k]`` is
    NaN when those bits have not all left within the horizon.
    """

    backlog: np.ndarray
    delay: np.ndarray
    departures: np.ndarray  # through departures per node, shape (H, horizon)
    cross_departures: np.ndarray
    slot: float

    @property
    def B_max(self) -> float:
        return float(np.max(self.backlog))

    @property
    def W_max(self) -> float:
        w = self.delay[np.isfinite(self.delay)]
        return float(np.max(w)) if len(w) else 0.0

    def tail(self, thresholds: Sequence[float], which: str = "delay") -> dict[float, float]:
        """Fraction of sampled boundaries whose value exceeds each threshold."""
        x = self.delay if which == "delay" else self.backlog
        x = x[np.isfinite(x)]
        return {float(t): float(np.mean(x > t)) if len(x) else 0.0 for t in thresholds}


def _node(thr_in: np.ndarray, cr_in: np.ndarray, cap: float, dslots: float):
    """One Delta-scheduled link; returns per-slot through and cross departures."""
    n = len(thr_in)
    out_t = np.zeros(n)
    out_c = np.zeros(n)
    qt: deque = deque()
    qc: deque = deque()
    for k in range(n):
        if thr_in[k] > 0:
            qt.append([k + dslots, thr_in[k]])
        if cr_in[k] > 0:
            qc.append([k, cr_in[k]])
        left = cap
        while left > 0 and (qt or qc):
            # strict inequality: equal tags go to the cross flow
            if qt and (not qc or qt[0][0] < qc[0][0]):
                q, o = qt, out_t
            else:
                q, o = qc, out_c
            amt = q[0][1]
            if amt <= left:
                left -= amt
                o[k] += amt
                q.popleft()
            else:
                q[0][1] = amt - left
                o[k] += left
                left = 0.0
    return out_t, out_c


def virtual_delay(A: np.ndarray, D: np.ndarray, slot: float, rate: float) -> np.ndarray:
    """Delay of the bits that entered by the start of each slot.

    ``A`` and ``D`` are cumulative at boundaries (length ``n + 1``).  Slot
    ``k``'s arrivals land at its start, so the delay sampled in slot ``k`` is
    ``inf{w >= 0 : D(k slot + w) >= A((k+1) slot)}``.  Within a slot the
    link sends at line ``rate`` from the slot start until its share is out.
    This is the largest virtual delay inside the slot.
    """
    n = len(A) - 1
    target = A[1:]
    tol = 1e-9 * max(float(A[-1]), 1.0)
    k = np.arange(n)
    j = np.maximum(np.searchsorted(D, target - tol, side="left"), k)
    w = np.full(n, np.nan)
    ok = j <= n
    w[ok & (j == k)] = 0.0
    mid = ok & (j > k)
    jm = j[mid]
    part = np.clip((target[mid] - D[jm - 1]) / rate, 0.0, slot)
    w[mid] = (jm - 1 - k[mid]) * slot + part
    return w


def simulate_tandem(path: PathSpec, through: Trace, cross: Sequence[Trace]) -> SimMetrics:
    """Feed ``through`` across all nodes; ``cross[h]`` enters node ``h`` only.

    Departures of a node reach the next node within the same slot.
    """
    if len(cross) != path.H:
        raise TraceMismatch(f"need {path.H} cross traces, got {len(cross)}")
    for c in cross:
        if c.slot != through.slot or c.horizon != through.horizon:
            raise TraceMismatch("traces must share slot length and horizon")
    slot = through.slot
    H, n = path.H, through.horizon
    deps = np.zeros((H, n))
    cdeps = np.zeros((H, n))
    x = through.amounts
    for h, (node, c) in enumerate(zip(path.nodes, cross)):
        x, cdeps[h] = _node(x, c.amounts, node.capacity * slot, node.delta / slot)
        deps[h] = x
    A = through.cumulative()
    D = np.concatenate(([0.0], np.cumsum(deps[-1])))
    return SimMetrics(A[1:] - D[:-1], virtual_delay(A, D, slot, path.nodes[-1].capacity), deps, cdeps, slot)


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def gen_mmoo_traces(src: MmooSource, n_flows: int, horizon: int,
                    seed: Union[int, np.random.SeedSequence, np.random.Generator]) -> Trace:
    """Aggregate of ``n_flows`` independent on-off chains started in stationarity.

    Sojourn times are geometric, so each chain is drawn as alternating runs.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least one slot")
    rng = _as_rng(seed)
    diff = np.zeros(horizon + 1, dtype=np.int64)
    on0 = rng.random(n_flows) < src.p_on
    pairs = int(horizon * src.p_on * src.p_on_to_off) + 8
    for on in on0:
        starts, ends = [], []
        t, state = 0, bool(on)
        while t < horizon:
            on_len = rng.geometric(src.p_on_to_off, size=pairs)
            off_len = rng.geometric(src.p_off_to_on, size=pairs)
            runs = np.empty(2 * pairs, dtype=np.int64)
            if state:
                runs[0::2], runs[1::2] = on_len, off_len
            else:
                runs[0::2], runs[1::2] = off_len, on_len
            edges = t + np.concatenate(([0], np.cumsum(runs)))
            first_on = 0 if state else 1
            starts.append(edges[first_on:-1:2])
            ends.append(edges[first_on + 1::2])
            t = int(edges[-1])
            # run count is even, so the next batch starts in the same state
        s = np.minimum(np.concatenate(starts), horizon)
        e = np.minimum(np.concatenate(ends)[:len(s)], horizon)
        np.add.at(diff, s, 1)
        np.add.at(diff, e, -1)
    on_count = np.cumsum(diff[:-1])
    return Trace(on_count * (src.peak * src.slot), src.slot)


@dataclass(frozen=True)
class TailEstimate:
    threshold: float
    exceed: int
    samples: int
    ci: tuple[float, float]

    @property
    def frequency(self) -> float:
        return self.exceed / self.samples if self.samples else 0.0


@dataclass(frozen=True)
class MonteCarloResult:
    delay: list[TailEstimate]
    backlog: list[TailEstimate]
    runs: list[SimMetrics] = field(repr=False)


def _estimates(values: np.ndarray, thresholds: Sequence[float], level: float) -> list[TailEstimate]:
    out = []
    for t in thresholds:
        k, n = int(np.sum(values > t)), len(values)
        ci = binomtest(k, n).proportion_ci(level, method="wilson") if n else None
        out.append(TailEstimate(float(t), k, n, (ci.low, ci.high) if ci else (0.0, 1.0)))
    return out


def replication_seed(seed: int, rep: int, group: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, rep, group])


def monte_carlo(path: PathSpec, through: tuple[MmooSource, int],
                cross: Sequence[tuple[MmooSource, int]], reps: int, seed: int, horizon: int,
                delay_thresholds: Sequence[float] = (), backlog_thresholds: Sequence[float] = (),
                warmup: int = 0, level: float = 0.95, keep_runs: bool = False) -> MonteCarloResult:
    """Empirical violation frequencies of delay/backlog thresholds.

    ``cross[h]`` is ``(source, flow count)`` at node ``h``.  Every slot
    boundary from ``warmup`` on is one sample; replication ``r`` draws group
    ``g`` from ``SeedSequence([seed, r, g])``, so results do not depend on
    the order in which replications run.
    """
    if reps < 1:
        raise ValueError("need at least one replication")
    if len(cross) != path.H:
        raise TraceMismatch(f"need {path.H} cross sources, got {len(cross)}")
    ws, bs, runs = [], [], []
    for r in range(reps):
        thr = gen_mmoo_traces(through[0], through[1], horizon, replication_seed(seed, r, 0))
        cr = [gen_mmoo_traces(s, n, horizon, replication_seed(seed, r, g + 1))
              for g, (s, n) in enumerate(cross)]
        m = simulate_tandem(path, thr, cr)
        w = m.delay[warmup:horizon]
        ws.append(w[np.isfinite(w)])
        bs.append(m.backlog[warmup:horizon])
        if keep_runs:
            runs.append(m)
    w, b = np.concatenate(ws), np.concatenate(bs)
    return MonteCarloResult(_estimates(w, delay_thresholds, level),
                            _estimates(b, backlog_thresholds, level), runs)


def write_traces(fname, traces: dict[str, Trace]) -> None:
    with open(fname, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot_index", "flow_id", "bits"])
        for fid in sorted(traces):
            for k, v in enumerate(traces[fid].amounts):
                w.writerow([k, fid, f"{v:.17g}"])


def read_traces(fname, slot: float = 1e-3) -> dict[str, Trace]:
    rows: dict[str, dict[int, float]] = {}
    with open(fname, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.setdefault(row["flow_id"], {})[int(row["slot_index"])] = float(row["bits"])
    out = {}
    for fid, m in rows.items():
        a = np.zeros(max(m) + 1)
        for k, v in m.items():
            a[k] = v
        out[fid] = Trace(a, slot)
    return out


def write_metrics(fname, m: SimMetrics) -> None:
    with open(fname, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot_index", "backlog_bits", "delay_s"])
        for k, (b, d) in enumerate(zip(m.backlog, m.delay)):
            w.writerow([k, f"{b:.9g}", f"{d:.9g}" if np.isfinite(d) else ""])
        w.writerow(["summary", f"{m.B_max:.9g}", f"{m.W_max:.9g}"])
