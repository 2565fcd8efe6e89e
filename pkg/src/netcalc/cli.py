"""Command-line front end: scenario configs in, CSV tables out.

Usage: ``netcalc <subcommand> --config <file> [--out <dir>] [--epsilon <val>] [--seed <int>]``
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
from scipy.optimize import brentq

from .bounds import (NoStableDecay, choose_alpha, closed_form_bounds, delay_optimized, deterministic_bounds,
                     old_baseline_delay, sigma_for_epsilon)
from .minplus import INF
from .netservice import Unstable, deterministic_params, net_params
from .scheduler import DeltaNode, PathSpec
from .simulator import monte_carlo, simulate_tandem
from .tightness import adversarial_traces, lower_bounds
from .traffic import CONTINUOUS, DISCRETE, MmooSource, RateBurst, aggregate_iid_ebb

EXIT_OK, EXIT_CONFIG, EXIT_UNSTABLE = 0, 2, 3

UNITS = {
    "bits": {"b": 1.0, "bit": 1.0, "Kb": 1e3, "Mb": 1e6, "Gb": 1e9},
    "rate": {"bps": 1.0, "Kbps": 1e3, "Mbps": 1e6, "Gbps": 1e9},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6},
}
_QTY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z]+)\s*$")


class ConfigError(ValueError):
    pass


def parse_quantity(value: Any, kind: str, name: str) -> float:
    """Convert ``"100 Mbps"``-style strings to base units; ``"+inf"``/``"-inf"`` pass through."""
    if isinstance(value, str):
        v = value.strip().lower()
        if v in ("inf", "+inf"):
            return INF
        if v == "-inf":
            return -INF
        if v in ("0", "0.0"):
            return 0.0
        m = _QTY.match(value)
        if not m or m.group(2) not in UNITS[kind]:
            raise ConfigError(f"{name}: expected a number with a {kind} unit "
                              f"({', '.join(UNITS[kind])}), got {value!r}")
        return float(m.group(1)) * UNITS[kind][m.group(2)]
    if isinstance(value, (int, float)) and value == 0:
        return 0.0
    raise ConfigError(f"{name}: quantities need a unit string, got {value!r}")


@dataclass
class Scenario:
    stochastic: bool
    capacity: float
    through: dict
    cross: dict
    mmoo: Optional[MmooSource]
    H: list[int]
    deltas: list[float]
    epsilon: float
    time_model: str
    slot: float
    gamma: Optional[float]
    alpha: Optional[float]
    seed: int
    thresholds: list[float] = field(default_factory=list)
    simulate: dict = field(default_factory=dict)


def _req(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"{key}: missing required field")
    return cfg[key]


def _flows(cfg: dict, name: str, stochastic: bool) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError(f"{name}: expected an object")
    if stochastic:
        n = _req(cfg, "flows")
        if not (isinstance(n, int) and n >= 1):
            raise ConfigError(f"{name}.flows: expected a positive integer")
        return {"flows": n}
    return {"rate": parse_quantity(_req(cfg, "rate"), "rate", f"{name}.rate"),
            "burst": parse_quantity(_req(cfg, "burst"), "bits", f"{name}.burst")}


def load_config(text: str, epsilon: Optional[float] = None, seed: Optional[int] = None) -> Scenario:
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    kind = cfg.get("traffic", "deterministic")
    if kind not in ("deterministic", "statistical"):
        raise ConfigError("traffic: expected 'deterministic' or 'statistical'")
    stochastic = kind == "statistical"
    mmoo = None
    if stochastic:
        m = _req(cfg, "mmoo")
        slot_m = parse_quantity(m.get("slot", "1 ms"), "time", "mmoo.slot")
        try:
            mmoo = MmooSource(float(_req(m, "p_on_to_off")), float(_req(m, "p_off_to_on")),
                              parse_quantity(_req(m, "peak"), "rate", "mmoo.peak"), slot_m)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"mmoo: {e}") from None
    H = _req(cfg, "H")
    Hs = list(range(H[0], H[1] + 1)) if isinstance(H, list) else [H]
    if not Hs or any(not isinstance(h, int) or h < 1 for h in Hs):
        raise ConfigError("H: expected a positive integer or an inclusive [first, last] range")
    raw = cfg.get("delta", "0")
    raw = raw if isinstance(raw, list) else [raw]
    deltas = [parse_quantity(d, "time", "delta") for d in raw]
    eps = epsilon if epsilon is not None else float(cfg.get("epsilon", 1e-9))
    if not 0 < eps < 1:
        raise ConfigError("epsilon: expected a probability in (0, 1)")
    tm = cfg.get("time_model", CONTINUOUS)
    if tm not in (CONTINUOUS, DISCRETE):
        raise ConfigError("time_model: expected 'continuous' or 'discrete'")
    g = cfg.get("gamma", "auto")
    a = cfg.get("alpha", "auto")
    try:
        alpha = None if a == "auto" else float(a)
    except (TypeError, ValueError):
        raise ConfigError("alpha: expected 'auto' or a number in 1/bit") from None
    return Scenario(
        stochastic=stochastic,
        capacity=parse_quantity(_req(cfg, "capacity"), "rate", "capacity"),
        through=_flows(_req(cfg, "through"), "through", stochastic),
        cross=_flows(_req(cfg, "cross"), "cross", stochastic),
        mmoo=mmoo, H=Hs, deltas=deltas, epsilon=eps, time_model=tm,
        slot=parse_quantity(cfg.get("slot", "1 ms"), "time", "slot"),
        gamma=None if g == "auto" else parse_quantity(g, "rate", "gamma"),
        alpha=alpha,
        seed=int(seed if seed is not None else cfg.get("seed", 0)),
        thresholds=[parse_quantity(b, "bits", "backlog_thresholds")
                    for b in cfg.get("backlog_thresholds", [])],
        simulate=dict(cfg.get("simulate", {})),
    )


def build_path(sc: Scenario, H: int, delta: float, alpha: Optional[float] = None) -> PathSpec:
    if sc.stochastic:
        thr = aggregate_iid_ebb(sc.mmoo, sc.through["flows"], alpha)
        cr = aggregate_iid_ebb(sc.mmoo, sc.cross["flows"], alpha)
    else:
        thr = RateBurst(sc.through["rate"], sc.through["burst"])
        cr = RateBurst(sc.cross["rate"], sc.cross["burst"])
    return PathSpec.homogeneous(H, sc.capacity, delta, cr, thr)


def _resolve(sc: Scenario, H: int, delta: float, objective: str = "delay"):
    """Return ``(path, params, sigma, alpha)`` for one sweep point."""
    if not sc.stochastic:
        path = build_path(sc, H, delta)
        return path, deterministic_params(path), 0.0, math.nan
    build = lambda a: build_path(sc, H, delta, a)
    if sc.alpha is not None:
        path = build(sc.alpha)
        params = net_params(path, sc.gamma, sc.time_model, sc.slot)
        return path, params, sigma_for_epsilon(params.M_net, params.alpha_net, sc.epsilon), sc.alpha
    a, params, sigma = choose_alpha(build, sc.epsilon, time_model=sc.time_model, slot=sc.slot,
                                    gamma=sc.gamma, objective=objective)
    return build(a), params, sigma, a


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return ""
    if math.isinf(v):
        return "+inf" if v > 0 else "-inf"
    return f"{v:.9g}"


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    rows = sorted(rows, key=lambda r: tuple(_sortkey(x) for x in r[:2]))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


def _sortkey(x):
    return (0, float(x)) if isinstance(x, (int, float, np.floating, np.integer)) else (1, str(x))


# the earlier method's own tuning is not reproduced, only its stated curve form
OLD_NOTE = "stated-form approximation"


def cmd_bounds(sc: Scenario, out: Path) -> None:
    rows = []
    for H in sc.H:
        for d in sc.deltas:
            path, params, sigma, alpha = _resolve(sc, H, d)
            cf = closed_form_bounds(path, params, sigma)
            opt = delay_optimized(path, params, sigma).delay
            old = old_baseline_delay(path, params, sigma)
            eps = cf.violation
            for kind, method, val in (("output", "closed_form", cf.output_burst),
                                      ("backlog", "closed_form", cf.backlog),
                                      ("delay", "closed_form", cf.delay),
                                      ("delay", "optimized", opt),
                                      ("delay", "old_baseline", old)):
                note = OLD_NOTE if method == "old_baseline" else ""
                rows.append([H, d, kind, method, val, sigma, eps, params.gamma, alpha, note])
            if not sc.stochastic:
                lb = lower_bounds(path)
                rows.append([H, d, "backlog", "lower_bound", lb.backlog, 0.0, 0.0, 0.0, alpha, ""])
                rows.append([H, d, "delay", "lower_bound", lb.delay, 0.0, 0.0, 0.0, alpha, ""])
    write_csv(out / "bounds.csv",
              ["H", "delta_s", "kind", "method", "value", "sigma_bits", "violation", "gamma_bps",
               "alpha_per_bit", "note"], rows)


def cmd_delay_sweep(sc: Scenario, out: Path) -> None:
    rows = []
    for H in sc.H:
        for d in sc.deltas:
            path, params, sigma, alpha = _resolve(sc, H, d)
            cf = closed_form_bounds(path, params, sigma).delay
            opt = delay_optimized(path, params, sigma).delay
            lb = math.nan if sc.stochastic else lower_bounds(path).delay
            old = old_baseline_delay(path, params, sigma)
            rows.append([H, d, cf, opt, lb, old, params.gamma, alpha, OLD_NOTE])
    write_csv(out / "delay_sweep.csv",
              ["H", "delta_s", "closed_form", "optimized", "lower_bound", "old_baseline",
               "gamma_bps", "alpha_per_bit", "old_baseline_note"], rows)


ALPHA_GRID = tuple(np.logspace(-7, -3, 50))


def backlog_violation(sc: Scenario, H: int, delta: float, b: float) -> tuple[float, float, float]:
    """Smallest violation bound of ``backlog > b`` over the decay grid: ``(eps, alpha, gamma)``."""
    best = (1.0, math.nan, math.nan)
    alphas = [sc.alpha] if sc.alpha is not None else ALPHA_GRID
    for a in alphas:
        try:
            path = build_path(sc, H, delta, a)
            params = net_params(path, sc.gamma, sc.time_model, sc.slot)
        except ValueError:
            continue
        f = lambda s: closed_form_bounds(path, params, s).backlog - b
        if f(0.0) >= 0:
            continue
        hi = 1.0 / params.alpha_net
        while f(hi) < 0:
            hi *= 2.0
        s = brentq(f, 0.0, hi, xtol=1e-9 * hi)
        eps = params.M_net * math.exp(-params.alpha_net * s)
        if eps < best[0]:
            best = (eps, a, params.gamma)
    return best


def cmd_backlog_tail(sc: Scenario, out: Path) -> None:
    if not sc.stochastic:
        raise ConfigError("traffic: backlog-tail needs statistical traffic")
    if not sc.thresholds:
        raise ConfigError("backlog_thresholds: at least one threshold is required")
    rows = []
    for H in sc.H:
        for d in sc.deltas:
            for b in sc.thresholds:
                eps, a, g = backlog_violation(sc, H, d, b)
                rows.append([b, d, H, eps, g, a])
    write_csv(out / "backlog_tail.csv",
              ["threshold_bits", "delta_s", "H", "violation_bound", "gamma_bps", "alpha_per_bit"], rows)


def cmd_output_burst(sc: Scenario, out: Path) -> None:
    rows = []
    for H in sc.H:
        for d in sc.deltas:
            path, params, sigma, alpha = _resolve(sc, H, d, objective="backlog")
            cf = closed_form_bounds(path, params, sigma)
            rows.append([d, H, cf.output_burst, path.through.rho + params.gamma, sigma, params.gamma, alpha])
    write_csv(out / "output_burst.csv",
              ["delta_s", "H", "burst_bits", "rate_bps", "sigma_bits", "gamma_bps", "alpha_per_bit"], rows)


def cmd_lower_bound(sc: Scenario, out: Path) -> None:
    if sc.stochastic:
        raise ConfigError("traffic: lower bounds need deterministic traffic")
    rows = []
    for H in sc.H:
        for d in sc.deltas:
            path = build_path(sc, H, d)
            lb = lower_bounds(path)
            ub = deterministic_bounds(path)
            rows.append([H, d, lb.backlog, lb.delay, ub.backlog, ub.delay])
    write_csv(out / "lower_bound.csv",
              ["H", "delta_s", "backlog_lb_bits", "delay_lb_s", "backlog_ub_bits", "delay_ub_s"], rows)


def cmd_simulate(sc: Scenario, out: Path) -> None:
    rows = []
    if not sc.stochastic:
        for H in sc.H:
            for d in sc.deltas:
                path = build_path(sc, H, d)
                scn = adversarial_traces(path, sc.slot)
                m = simulate_tandem(path, scn.through, list(scn.cross))
                lb, ub = lower_bounds(path), deterministic_bounds(path)
                rows.append([H, d, "adversarial", m.B_max, m.W_max, lb.backlog, lb.delay,
                             ub.backlog, ub.delay, 0.0, math.nan])
        write_csv(out / "simulate.csv",
                  ["H", "delta_s", "mode", "B_max_bits", "W_max_s", "backlog_lb_bits", "delay_lb_s",
                   "backlog_ub_bits", "delay_ub_s", "gamma_bps", "alpha_per_bit"], rows)
        return
    reps = int(sc.simulate.get("reps", 100))
    horizon = int(sc.simulate.get("horizon", 1000))
    warmup = int(sc.simulate.get("warmup", 0))
    for H in sc.H:
        for d in sc.deltas:
            path, params, sigma, alpha = _resolve(sc, H, d)
            cf = closed_form_bounds(path, params, sigma)
            res = monte_carlo(path, (sc.mmoo, sc.through["flows"]), [(sc.mmoo, sc.cross["flows"])] * H,
                              reps, sc.seed, horizon, [cf.delay], [cf.backlog], warmup)
            for kind, est in (("delay", res.delay[0]), ("backlog", res.backlog[0])):
                rows.append([H, d, kind, est.threshold, est.exceed, est.samples, est.frequency,
                             est.ci[0], est.ci[1], sc.epsilon, params.gamma, alpha])
    write_csv(out / "simulate.csv",
              ["H", "delta_s", "kind", "threshold", "exceed", "samples", "frequency", "ci_low",
               "ci_high", "epsilon", "gamma_bps", "alpha_per_bit"], rows)


COMMANDS = {
    "bounds": cmd_bounds,
    "delay-sweep": cmd_delay_sweep,
    "backlog-tail": cmd_backlog_tail,
    "output-burst": cmd_output_burst,
    "simulate": cmd_simulate,
    "lower-bound": cmd_lower_bound,
}


def main(argv: Optional[list[str]] = None) -> int:
    ap = argparse.ArgumentParser(prog="netcalc", description="End-to-end bounds for Delta-scheduler tandems.")
    ap.add_argument("subcommand", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, type=Path)
    ap.add_argument("--out", type=Path, default=Path("."))
    ap.add_argument("--epsilon", type=float)
    ap.add_argument("--seed", type=int)
    args = ap.parse_args(argv)
    try:
        sc = load_config(args.config.read_text(), args.epsilon, args.seed)
        args.out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.subcommand](sc, args.out)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (Unstable, NoStableDecay) as e:
        print(f"unstable: {e}", file=sys.stderr)
        return EXIT_UNSTABLE
    except (TypeError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
