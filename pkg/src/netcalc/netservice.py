"""Statistical network service curve for a tandem of Delta-schedulers.

The path-level construction chains per-node EBB service curves with
rate relaxation ``gamma`` and time-discretisation ``tau_net``; each node's
curve, shifted by ``theta_h``, becomes a concave two-piece curve ``S~_h``
and the network curve is their pointwise minimum, shifted by
``tau_net + sum(theta_h)`` and lowered by ``(H-1) gamma tau_net``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .minplus import INF, Curve, conv, from_lines, pointwise_min
from .scheduler import DeltaNode, PathSpec, delta_clip, mul, neg, node_curve_ebb, node_curve_old, pos
from .traffic import CONTINUOUS, DISCRETE, EbbFlow


class Unstable(ValueError):
    def __init__(self, node: int, rho0: float, slack: float):
        self.node = node
        super().__init__(f"unstable path: through rate {rho0:g} b/s is not below "
                         f"leftover capacity {slack:g} b/s at node {node}")


class GammaOutOfRange(ValueError):
    pass


class ThetaBelowStar(ValueError):
    pass


def stability_check(path: PathSpec) -> None:
    """Raise :class:`Unstable` unless ``rho_0 < min_h (C_h - rho_h)``."""
    slacks = [n.capacity - n.rho for n in path.nodes]
    h = int(np.argmin(slacks))
    if not path.through.rho < slacks[h]:
        raise Unstable(h + 1, path.through.rho, slacks[h])


def gamma_range(path: PathSpec) -> tuple[float, float]:
    """Open interval of admissible rate relaxations: ``0 < (H+1) gamma < slack``.

    The through envelope grows at ``rho_0 + gamma`` and the network curve at
    ``min(C_h - rho_h) - H gamma``; finite backlog and delay need the former
    strictly smaller.
    """
    slack = min(n.capacity - n.rho for n in path.nodes) - path.through.rho
    return 0.0, slack / (path.H + 1)


def default_gamma(path: PathSpec) -> float:
    return 0.5 * gamma_range(path)[1]


@dataclass(frozen=True)
class NetParams:
    gamma: float
    tau_net: float
    alpha_net: float
    C_net: float
    M_net: float
    alphas: tuple[float, ...]  # alpha_0 .. alpha_H
    time_model: str = CONTINUOUS
    slot: float = 1e-3
    bursts: Optional[tuple[float, ...]] = None  # fixed sigma_0..sigma_H (worst-case analysis)

    @property
    def H(self) -> int:
        return len(self.alphas) - 1

    def sigmas(self, sigma: float) -> tuple[float, ...]:
        """Split ``sigma`` into ``sigma_h = (alpha_net / alpha_h) sigma``, h = 0..H."""
        if self.bursts is not None:
            return self.bursts
        return tuple(self.alpha_net / a * sigma for a in self.alphas)

    def taus(self) -> tuple[float, ...]:
        """Per-node ``tau_h``, h = 1..H-1, proportional to ``1/alpha_h``."""
        inv = [1.0 / a for a in self.alphas[1:-1]]
        tot = sum(inv)
        return tuple(x / tot * self.tau_net for x in inv) if inv else ()


def _ebb(d, what: str) -> EbbFlow:
    if not isinstance(d, EbbFlow):
        raise TypeError(f"{what} must be an EBB descriptor for statistical analysis")
    return d


def _envelope_factor(flow: EbbFlow, gamma: float, time_model: str, slot: float) -> float:
    if time_model == CONTINUOUS:
        return flow.M * math.e * (1.0 + flow.rho / gamma)
    return flow.M / -math.expm1(-flow.alpha * gamma * slot)


def net_params(path: PathSpec, gamma: Optional[float] = None, time_model: str = CONTINUOUS,
               slot: float = 1e-3) -> NetParams:
    """Derived constants of the statistical analysis.

    ``gamma=None`` selects the midpoint of the admissible interval.
    """
    stability_check(path)
    through = _ebb(path.through, "through traffic")
    cross = [_ebb(n.cross, f"cross traffic at node {h + 1}") for h, n in enumerate(path.nodes)]
    lo, hi = gamma_range(path)
    if gamma is None:
        gamma = 0.5 * hi
    if not lo < gamma < hi:
        raise GammaOutOfRange(f"gamma={gamma:g} outside admissible interval ({lo:g}, {hi:g})")
    if time_model not in (CONTINUOUS, DISCRETE):
        raise ValueError(f"unknown time model {time_model!r}")
    alphas = (through.alpha,) + tuple(c.alpha for c in cross)
    alpha_net = 1.0 / sum(1.0 / a for a in alphas)
    C_net = min(n.capacity for n in path.nodes)
    H = path.H
    if time_model == CONTINUOUS:
        tau = 1.0 / (alpha_net * C_net)
        M = (_envelope_factor(through, gamma, time_model, slot)
             + _envelope_factor(cross[-1], gamma, time_model, slot)
             + C_net / gamma * sum(_envelope_factor(c, gamma, time_model, slot) for c in cross[:-1]))
    else:
        tau = 0.0
        M = (_envelope_factor(through, gamma, time_model, slot)
             + _envelope_factor(cross[-1], gamma, time_model, slot)
             + sum(c.M / math.expm1(-c.alpha * gamma * slot) ** 2 for c in cross[:-1]))
    return NetParams(gamma, tau, alpha_net, C_net, M, alphas, time_model, slot)


def deterministic_params(path: PathSpec) -> NetParams:
    """``gamma = tau_net = 0``: the worst-case specialisation.

    The bursts are the descriptors' own; ``sigma`` arguments are ignored.
    """
    if not path.deterministic:
        raise TypeError("worst-case analysis needs rate-burst descriptors on every flow")
    stability_check(path)
    H = path.H
    bursts = (path.through.sigma,) + tuple(n.cross.sigma for n in path.nodes)
    return NetParams(0.0, 0.0, INF, min(n.capacity for n in path.nodes), 0.0, (INF,) * (H + 1),
                     bursts=bursts)


def theta_u_star(node: DeltaNode, gamma: float, sigma_h: float, H: int) -> tuple[float, float]:
    """Smallest admissible ``theta_h`` and the matching offset ``U_h``."""
    Cp = node.capacity - (H - 1) * gamma
    R = node.capacity - node.rho - H * gamma
    if not (Cp > 0 and R > 0):
        raise GammaOutOfRange(f"gamma={gamma:g} leaves no capacity at a node")
    inner = sigma_h + mul(node.rho + gamma, node.delta)
    theta = min(sigma_h / R, pos(inner) / Cp)
    return theta, neg(inner)


def u_of_theta(node: DeltaNode, gamma: float, sigma_h: float, H: int, theta: float) -> float:
    """``U_h(theta) = (C_h - (H-1) gamma) theta - ((rho_h + gamma) Delta(theta) + sigma_h)``.

    The offset stays unclipped: for ``Delta < 0`` the node curve keeps slope
    ``C_h - (H-1) gamma`` until the cross backlog catches up, which is what
    ``U*_h = [sigma_h + (rho_h + gamma) Delta]_-`` expresses.
    """
    Cp = node.capacity - (H - 1) * gamma
    return Cp * theta - (mul(node.rho + gamma, delta_clip(theta, node.delta)) + sigma_h)


def tilde_curve(node: DeltaNode, gamma: float, H: int, theta: float, U: float) -> Curve:
    """``min{(C-(H-1)gamma)(t+theta), (C-rho-H gamma) t + U} 1{t>0}``."""
    Cp = node.capacity - (H - 1) * gamma
    R = node.capacity - node.rho - H * gamma
    first = Curve.rate_burst(Cp, Cp * theta)
    if math.isinf(U):
        return first
    return pointwise_min([first, Curve.rate_burst(R, max(U, 0.0))])


def _thetas(path, params, sigmas, thetas):
    H = path.H
    stars = [theta_u_star(n, params.gamma, s, H) for n, s in zip(path.nodes, sigmas[1:])]
    if thetas is None:
        return [t for t, _ in stars], [u for _, u in stars]
    thetas = list(thetas)
    for h, (th, (ts, _)) in enumerate(zip(thetas, stars)):
        if th < ts - 1e-12 * max(1.0, ts):
            raise ThetaBelowStar(f"theta_{h + 1}={th:g} below theta*={ts:g}")
    us = [u_of_theta(n, params.gamma, s, H, th) for n, s, th in zip(path.nodes, sigmas[1:], thetas)]
    return thetas, us


def tilde_net_curve(path: PathSpec, params: NetParams, sigma: float,
                    thetas: Optional[Sequence[float]] = None):
    """Return ``(S~_net, shift, drop)`` with ``S_net(t) >= S~_net(t - shift) - drop``."""
    sig = params.sigmas(sigma)
    ths, us = _thetas(path, params, sig, thetas)
    H = path.H
    curves = [tilde_curve(n, params.gamma, H, th, u) for n, th, u in zip(path.nodes, ths, us)]
    shift = params.tau_net + sum(ths)
    drop = (H - 1) * params.gamma * params.tau_net
    return pointwise_min(curves), shift, drop


def network_curve(path: PathSpec, params: NetParams, sigma: float,
                  thetas: Optional[Sequence[float]] = None) -> Curve:
    """Lower bound ``[S~_net(t - shift) - drop]_+`` on the network service curve."""
    tilde, shift, drop = tilde_net_curve(path, params, sigma, thetas)
    return tilde.shifted(shift).minus_clipped(drop)


def composed_network_curve(path: PathSpec, params: NetParams, sigma: float,
                           thetas: Optional[Sequence[float]] = None) -> Curve:
    """``[S_1 * ... * S_H (t - tau_net) - (H-1) gamma t]_+`` by exact convolution.

    Same per-node curves and bounding function as :func:`network_curve`.
    The closed form clips every factor ``[S_h - (H-1) gamma t]_+`` before
    composing, so it can exceed this curve by at most
    ``(H-1) gamma sum(theta_h)``; this one needs no such step.
    """
    sig = params.sigmas(sigma)
    ths, _ = _thetas(path, params, sig, thetas)
    net = None
    for n, th, s in zip(path.nodes, ths, sig[1:]):
        c = node_curve_ebb(n, params.gamma, th, s)
        net = c if net is None else conv(net, c)
    net = net.shifted(params.tau_net)
    g = (path.H - 1) * params.gamma
    return from_lines([(t, v - g * t, sl - g) for t, v, sl in net.segments])


def epsilon_net(path: PathSpec, params: NetParams, sigma: float) -> float:
    """Bounding function of the network service curve at split ``sigma``."""
    if params.bursts is not None:
        return 0.0
    g, slot = params.gamma, params.slot
    sig = params.sigmas(sigma)
    cross = [n.cross for n in path.nodes]
    last = cross[-1]
    if params.time_model == CONTINUOUS:
        eps = _envelope_factor(last, g, CONTINUOUS, slot) * math.exp(-last.alpha * sig[-1])
        if path.H > 1:
            w = sum(1.0 / c.alpha for c in cross[:-1]) / (g * params.tau_net)
            eps += w * sum(_envelope_factor(c, g, CONTINUOUS, slot) * math.exp(-c.alpha * s)
                           for c, s in zip(cross[:-1], sig[1:-1]))
        return eps
    eps = _envelope_factor(last, g, DISCRETE, slot) * math.exp(-last.alpha * sig[-1])
    eps += sum(c.M * math.exp(-c.alpha * s) / math.expm1(-c.alpha * g * slot) ** 2
               for c, s in zip(cross[:-1], sig[1:-1]))
    return eps


def epsilon_through(path: PathSpec, params: NetParams, sigma: float) -> float:
    f = path.through
    return _envelope_factor(f, params.gamma, params.time_model, params.slot) * \
        math.exp(-f.alpha * params.sigmas(sigma)[0])


def node_curve_values(node: DeltaNode, gamma: float, theta: float, t, sigma) -> np.ndarray:
    """Vectorised per-node EBB service curve; broadcasts over ``t`` and ``sigma``."""
    t = np.asarray(t, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    C, r = node.capacity, node.rho + gamma
    dth = delta_clip(theta, node.delta)
    if math.isinf(dth):
        inner = np.zeros(np.broadcast(t, sigma).shape)
    else:
        inner = np.maximum(r * (t - theta + dth) + sigma, 0.0)
    return np.where(t > theta, np.maximum(C * t - inner, 0.0), 0.0)


def pair_conv_split_bursts(s1: Callable, s2: Callable, tau1: float, gamma1: float, sigma1: float,
                           sigma2: float, t, step: float = 5e-5) -> np.ndarray:
    """Grid evaluation of the two-node curve whose upstream burst grows with the split.

    ``S_12(t) = inf_{x1 + x2 = t - tau1} S_2(x2; sigma2) + S_1(x1; sigma1 + gamma1 (tau1 + x2))``
    with ``S_12(t) = 0`` for ``t <= tau1``.  ``s1``/``s2`` are vectorised
    families ``(x, sigma) -> values``.  The split runs over a uniform grid of
    width ``step`` (plus both end points), so the result is an upper
    approximation of the infimum.
    """
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros_like(ts)
    for k, tk in enumerate(ts):
        span = tk - tau1
        if span <= 0:
            continue
        x2 = np.append(np.arange(0.0, span, step), span)
        x1 = span - x2
        with np.errstate(invalid="ignore"):
            vals = np.asarray(s2(x2, sigma2)) + np.asarray(s1(x1, sigma1 + gamma1 * (tau1 + x2)))
        out[k] = np.min(vals)
    return out


def pair_conv_grid(s1: Callable, s2: Callable, tau1: float, gamma1: float, sigma1: float,
                   sigma2: float, t, step: float = 5e-5) -> np.ndarray:
    """Grid evaluation of ``[S_1 * S_2 * delta_tau1 (t) - gamma1 t]_+`` at fixed bursts.

    This is the two-node network service curve as composed, with no factor
    clipped at zero.  The split ``x1 + x2 = t - tau1`` runs over a uniform
    grid of width ``step``.
    """
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros_like(ts)
    for k, tk in enumerate(ts):
        span = tk - tau1
        if span <= 0:
            continue
        x2 = np.append(np.arange(0.0, span, step), span)
        vals = np.asarray(s2(x2, sigma2)) + np.asarray(s1(span - x2, sigma1))
        out[k] = max(float(np.min(vals)) - gamma1 * tk, 0.0)
    return out


def old_conv_baseline(path: PathSpec, params: NetParams, sigma: float,
                      thetas: Optional[Sequence[float]] = None) -> tuple[Curve, float]:
    """Network service curve with per-node bursts moved outside the convolution.

    Convolves the burst-free parts ``[C t - (rho+gamma)[t - theta + Delta(theta)]_+]_+ 1{t>theta}``,
    shifts by ``tau_net`` and subtracts ``(H-1) gamma t + sum(sigma_h)``.  This
    reconstructs only the stated form of the earlier method, not its tuning
    of ``theta_h``; the bounding function reuses :func:`epsilon_net`.
    Default ``theta_h`` are the ``theta*_h`` of the new construction.
    """
    sig = params.sigmas(sigma)
    H = path.H
    if thetas is None:
        thetas = [theta_u_star(n, params.gamma, s, H)[0] for n, s in zip(path.nodes, sig[1:])]
    net = node_curve_old(path.nodes[0], params.gamma, thetas[0])
    for n, th in zip(path.nodes[1:], thetas[1:]):
        net = conv(net, node_curve_old(n, params.gamma, th))
    net = net.shifted(params.tau_net)
    g = (H - 1) * params.gamma
    total = sum(sig[1:])
    curve = from_lines([(t, v - g * t - total, s - g) for t, v, s in net.segments])
    return curve, epsilon_net(path, params, sigma)
