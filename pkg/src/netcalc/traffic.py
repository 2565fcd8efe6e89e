"""Traffic descriptors: leaky-bucket envelopes, EBB flows, MMOO sources."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .minplus import Curve

CONTINUOUS = "continuous"
DISCRETE = "discrete"


@dataclass(frozen=True)
class RateBurst:
    """Deterministic envelope ``E(t) = rho * t + sigma`` (bits/s, bits)."""

    rho: float
    sigma: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not self.sigma >= 0:
            raise ValueError("sigma must be non-negative")

    def scaled(self, n: int) -> "RateBurst":
        """Aggregate of ``n`` identical flows (no multiplexing gain)."""
        return RateBurst(n * self.rho, n * self.sigma)


@dataclass(frozen=True)
class EbbFlow:
    """EBB flow: ``P(A(s,t) - rho (t-s) > sigma) <= M exp(-alpha sigma)``."""

    rho: float
    alpha: float
    M: float = 1.0

    def __post_init__(self):
        if not (self.rho > 0 and self.alpha > 0 and self.M > 0):
            raise ValueError("EBB parameters must be positive")

    def epsilon(self, sigma: float) -> float:
        return self.M * math.exp(-self.alpha * sigma)


@dataclass(frozen=True)
class SamplePathEnvelope:
    """Statistical sample-path envelope ``G(t; sigma) = (rho + gamma) t + sigma``.

    The violation probability is ``prefactor * exp(-decay * sigma)``.
    """

    rho: float
    gamma: float
    prefactor: float
    decay: float

    @property
    def rate(self) -> float:
        return self.rho + self.gamma

    def curve(self, sigma: float) -> Curve:
        return Curve.rate_burst(self.rate, sigma)

    def __call__(self, t, sigma: float):
        t = np.asarray(t, dtype=float)
        out = np.where(t > 0, self.rate * t + sigma, 0.0)
        return float(out) if out.ndim == 0 else out

    def epsilon(self, sigma: float) -> float:
        return self.prefactor * math.exp(-self.decay * sigma)


def det_envelope(rb: RateBurst) -> Curve:
    return Curve.rate_burst(rb.rho, rb.sigma)


def ebb_sample_path(f: EbbFlow, gamma: float, time_model: str = CONTINUOUS,
                    slot: float = 1e-3) -> SamplePathEnvelope:
    """Union-bound sample-path envelope of an EBB flow.

    In continuous time the prefactor is ``M e (1 + rho/gamma)``.  In discrete
    time (step ``slot``) summing over slots gives ``M / (1 - exp(-alpha gamma slot))``.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if time_model == CONTINUOUS:
        pre = f.M * math.e * (1.0 + f.rho / gamma)
    elif time_model == DISCRETE:
        pre = f.M / -math.expm1(-f.alpha * gamma * slot)
    else:
        raise ValueError(f"unknown time model {time_model!r}")
    return SamplePathEnvelope(f.rho, gamma, pre, f.alpha)


@dataclass(frozen=True)
class MmooSource:
    """Discrete-time Markov-modulated on-off source.

    Emits ``peak * slot`` bits in every slot spent in the On state.
    """

    p_on_to_off: float
    p_off_to_on: float
    peak: float
    slot: float = 1e-3

    def __post_init__(self):
        for p in (self.p_on_to_off, self.p_off_to_on):
            if not 0 < p < 1:
                raise ValueError("transition probabilities must lie in (0, 1)")
        if not (self.peak > 0 and self.slot > 0):
            raise ValueError("peak rate and slot must be positive")

    @property
    def p_on(self) -> float:
        return self.p_off_to_on / (self.p_off_to_on + self.p_on_to_off)

    @property
    def mean_rate(self) -> float:
        return self.peak * self.p_on

    @property
    def transition_matrix(self) -> np.ndarray:
        p01, p10 = self.p_off_to_on, self.p_on_to_off
        return np.array([[1 - p01, p01], [p10, 1 - p10]])


def mmoo_log_mgf(src: MmooSource, alpha: float) -> float:
    """Per-slot log spectral radius of ``P diag(1, exp(alpha * peak * slot))``."""
    a = alpha * src.peak * src.slot
    p01, p10 = src.p_off_to_on, src.p_on_to_off
    p00, p11 = 1 - p01, 1 - p10
    # scale the matrix by exp(-a) when the exponent is large
    if a > 30.0:
        z, shift = math.exp(-a), a
        tr = p00 * z + p11
        det = (p00 * p11 - p01 * p10) * z
    else:
        z, shift = math.exp(a), 0.0
        tr = p00 + p11 * z
        det = (p00 * p11 - p01 * p10) * z
    lam = 0.5 * (tr + math.sqrt(max(tr * tr - 4.0 * det, 0.0)))
    return math.log(lam) + shift


def mmoo_effective_bandwidth(src: MmooSource, alpha: float) -> float:
    """Effective bandwidth ``eb(alpha)`` in bits/second (``alpha`` in 1/bit)."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return mmoo_log_mgf(src, alpha) / (alpha * src.slot)


def aggregate_iid_ebb(src: MmooSource, n: int, alpha: float) -> EbbFlow:
    """EBB descriptor of ``n`` independent copies of ``src`` at decay ``alpha``."""
    if n < 1:
        raise ValueError("need at least one flow")
    return EbbFlow(n * mmoo_effective_bandwidth(src, alpha), alpha, 1.0)
