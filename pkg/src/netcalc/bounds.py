"""End-to-end output, backlog and delay bounds for a tandem of Delta-schedulers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .minplus import INF, Curve, h_dev
from .netservice import (NetParams, deterministic_params, net_params, old_conv_baseline,
                         stability_check, theta_u_star)
from .scheduler import PathSpec
from .traffic import CONTINUOUS, EbbFlow

KINDS = ("output", "backlog", "delay")


class EpsilonOutOfRange(ValueError):
    pass


class MixedSigns(ValueError):
    pass


class NoStableDecay(ValueError):
    pass


@dataclass(frozen=True)
class BoundReport:
    """A bound as a function of ``sigma``, with its violation probability."""

    kind: str
    method: str
    sigmas: np.ndarray
    values: np.ndarray
    violation: np.ndarray
    M_net: float = 0.0
    alpha_net: float = INF

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown bound kind {self.kind!r}")

    @property
    def value(self) -> float:
        """Single value for reports built at one ``sigma``."""
        if len(self.values) != 1:
            raise ValueError("report holds more than one sigma")
        return float(self.values[0])

    def sigma_at(self, epsilon: float) -> float:
        return sigma_for_epsilon(self.M_net, self.alpha_net, epsilon)


@dataclass(frozen=True)
class ClosedForm:
    """Closed-form values at a single ``sigma``."""

    sigma: float
    output_burst: float
    backlog: float
    delay: float
    thetas: tuple[float, ...]
    us: tuple[float, ...]
    violation: float
    output_flow: Optional[EbbFlow] = None


def sigma_for_epsilon(M_net: float, alpha_net: float, epsilon: float) -> float:
    """Invert ``M_net exp(-alpha_net sigma) = epsilon``."""
    if not 0 < epsilon <= M_net:
        raise EpsilonOutOfRange(f"epsilon={epsilon:g} outside (0, {M_net:g}]")
    return math.log(M_net / epsilon) / alpha_net


def _core(path: PathSpec, params: NetParams, sigma: float):
    sig = params.sigmas(sigma)
    H, g, tau = path.H, params.gamma, params.tau_net
    stars = [theta_u_star(n, g, s, H) for n, s in zip(path.nodes, sig[1:])]
    thetas = tuple(t for t, _ in stars)
    us = tuple(u for _, u in stars)
    K = sig[0] + (H - 1) * g * tau
    rho0 = path.through.rho
    burst = (rho0 + H * g) * tau + sig[0] + (rho0 + g) * sum(thetas)
    inner = max(max(K / (n.capacity - (H - 1) * g), (K - u) / (n.capacity - n.rho - H * g))
                for n, u in zip(path.nodes, us))
    delay = tau + inner + sum(thetas)
    return burst, delay, thetas, us


def closed_form_bounds(path: PathSpec, params: NetParams, sigma: float) -> ClosedForm:
    """Output burst, backlog and delay at ``sigma``, all violated w.p. at most ``M_net e^{-alpha_net sigma}``."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    stability_check(path)
    burst, delay, thetas, us = _core(path, params, sigma)
    if params.bursts is not None:
        return ClosedForm(sigma, burst, burst, delay, thetas, us, 0.0)
    eps = min(params.M_net * math.exp(-params.alpha_net * sigma), params.M_net)
    out = EbbFlow(path.through.rho + params.gamma, params.alpha_net, params.M_net)
    return ClosedForm(sigma, burst, burst, delay, thetas, us, eps, out)


def bound_reports(path: PathSpec, params: NetParams, sigmas: Sequence[float],
                  method: str = "closed_form") -> dict[str, BoundReport]:
    """Output/backlog/delay reports over a ``sigma`` grid."""
    sigmas = np.asarray(sigmas, dtype=float)
    cfs = [closed_form_bounds(path, params, s) for s in sigmas]
    viol = np.array([c.violation for c in cfs])
    vals = {"output": [c.output_burst for c in cfs], "backlog": [c.backlog for c in cfs],
            "delay": [c.delay for c in cfs]}
    if method == "optimized":
        vals["delay"] = [delay_optimized(path, params, s).delay for s in sigmas]
    elif method == "old_baseline":
        vals["delay"] = [old_baseline_delay(path, params, s) for s in sigmas]
    elif method != "closed_form":
        raise ValueError(f"unknown method {method!r}")
    return {k: BoundReport(k, method, sigmas, np.asarray(v, dtype=float), viol,
                           params.M_net, params.alpha_net) for k, v in vals.items()}


@dataclass(frozen=True)
class OptimizedDelay:
    delay: float
    X: float
    thetas: tuple[float, ...]


def _node_lines(node, g, H, sig_h, K):
    """Lines ``(value at X=0, slope)`` whose maximum is the smallest feasible ``theta_h(X)``.

    The constraint ``R X + U_h(theta) >= K`` contributes the minimum of
    ``lower`` lines; ``U_h`` is convex increasing, so its inverse is concave.
    """
    Cp = node.capacity - (H - 1) * g
    R = node.capacity - node.rho - H * g
    theta_star, _ = theta_u_star(node, g, sig_h, H)
    upper = [(theta_star, 0.0), (K / Cp, -1.0)]
    lower = []
    d = node.delta
    if d > 0:
        lower.append(((K + sig_h) / R, -1.0))
    if math.isfinite(d):
        lower.append(((K + (node.rho + g) * d + sig_h) / Cp, -R / Cp))
    return upper, lower


def _theta_at(upper, lower, X):
    v = max(a + s * X for a, s in upper)
    if lower:
        v = max(v, min(a + s * X for a, s in lower))
    return v


def delay_optimized(path: PathSpec, params: NetParams, sigma: float) -> OptimizedDelay:
    """Minimise ``tau_net + X + sum(theta_h)`` exactly.

    For fixed ``X`` each ``theta_h`` has a closed-form minimum, so the
    objective is piecewise linear in ``X``; its minimum sits at ``X = 0`` or
    at a breakpoint of some ``theta_h(X)``, and all are enumerated.
    """
    stability_check(path)
    sig = params.sigmas(sigma)
    H, g = path.H, params.gamma
    K = sig[0] + (H - 1) * g * params.tau_net
    nodes = [_node_lines(n, g, H, s, K) for n, s in zip(path.nodes, sig[1:])]
    cands = {0.0}
    for up, lo in nodes:
        ls = up + lo
        for i, (a1, s1) in enumerate(ls):
            for a2, s2 in ls[i + 1:]:
                if s1 != s2:
                    x = (a2 - a1) / (s1 - s2)
                    if x > 0 and math.isfinite(x):
                        cands.add(x)
    best = None
    for X in sorted(cands):
        ths = tuple(_theta_at(up, lo, X) for up, lo in nodes)
        d = params.tau_net + X + sum(ths)
        if best is None or d < best.delay:
            best = OptimizedDelay(d, X, ths)
    assert best is not None and math.isfinite(best.delay), "delay problem infeasible"
    return best


def deterministic_bounds(path: PathSpec) -> ClosedForm:
    """Worst-case bounds with ``gamma = tau_net = 0`` and the descriptors' bursts."""
    return closed_form_bounds(path, deterministic_params(path), 0.0)


def priority_bounds(path: PathSpec) -> ClosedForm:
    """Strict-priority closed forms for a path whose ``Delta`` are all ``+inf`` or all ``-inf``."""
    if not path.deterministic:
        raise TypeError("priority bounds need rate-burst descriptors")
    stability_check(path)
    signs = {n.delta for n in path.nodes}
    s0, r0 = path.through.sigma, path.through.rho
    if signs == {-INF}:
        return ClosedForm(0.0, s0, s0, s0 / min(n.capacity for n in path.nodes),
                          (0.0,) * path.H, (INF,) * path.H, 0.0)
    if signs == {INF}:
        thetas = tuple(n.cross.sigma / (n.capacity - n.rho) for n in path.nodes)
        delay = s0 / min(n.capacity - n.rho for n in path.nodes) + sum(thetas)
        b = s0 + r0 * sum(thetas)
        return ClosedForm(0.0, b, b, delay, thetas, (0.0,) * path.H, 0.0)
    raise MixedSigns("priority bounds need every Delta equal to +inf, or every Delta equal to -inf")


OLD_THETA_SCALES = tuple(np.linspace(0.0, 2.0, 41))


def old_baseline_delay(path: PathSpec, params: NetParams, sigma: float,
                       scales: Sequence[float] = OLD_THETA_SCALES) -> float:
    """Delay from the burst-outside network curve, best over ``theta_h = s * theta*_h``."""
    sig = params.sigmas(sigma)
    H = path.H
    stars = [theta_u_star(n, params.gamma, s, H)[0] for n, s in zip(path.nodes, sig[1:])]
    env = Curve.rate_burst(path.through.rho + params.gamma, sig[0])
    best = INF
    for s in scales:
        curve, _ = old_conv_baseline(path, params, sigma, [s * t for t in stars])
        best = min(best, h_dev(env, curve))
    return best


def choose_alpha(build: Callable[[float], PathSpec], epsilon: float,
                 alphas: Sequence[float] = tuple(np.logspace(-7, -3, 50)),
                 time_model: str = CONTINUOUS, slot: float = 1e-3,
                 gamma: Optional[float] = None,
                 objective: str = "delay") -> tuple[float, NetParams, float]:
    """Pick the decay ``alpha`` minimising the closed-form delay (or backlog) at ``epsilon``.

    ``build(alpha)`` returns the path with EBB descriptors at that decay.
    Unstable or out-of-range points are skipped.  Returns ``(alpha, params, sigma)``.
    """
    best = None
    for a in alphas:
        try:
            path = build(float(a))
            params = net_params(path, gamma, time_model, slot)
            sigma = sigma_for_epsilon(params.M_net, params.alpha_net, epsilon)
            cf = closed_form_bounds(path, params, sigma)
        except ValueError:
            continue
        d = cf.delay if objective == "delay" else cf.backlog
        if best is None or d < best[0]:
            best = (d, float(a), params, sigma)
    if best is None:
        raise NoStableDecay("no stable decay parameter in the search grid")
    return best[1], best[2], best[3]
