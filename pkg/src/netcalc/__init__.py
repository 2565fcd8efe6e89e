"""Network calculus bounds for tandems of Delta-schedulers."""

from .bounds import (BoundReport, ClosedForm, EpsilonOutOfRange, MixedSigns, NoStableDecay,
                     bound_reports, choose_alpha, closed_form_bounds, delay_optimized,
                     deterministic_bounds, old_baseline_delay, priority_bounds, sigma_for_epsilon)
from .minplus import INF, Curve, conv, deconv, h_dev, pointwise_min, v_dev
from .netservice import (GammaOutOfRange, NetParams, ThetaBelowStar, Unstable, composed_network_curve,
                         deterministic_params,
                         epsilon_net, net_params, network_curve, theta_u_star, tilde_net_curve)
from .scheduler import DeltaNode, PathSpec, leftover_curve, node_curve_ebb
from .simulator import SimMetrics, Trace, TraceMismatch, gen_mmoo_traces, monte_carlo, simulate_tandem
from .tightness import adversarial_traces, latency_lh, lower_bounds
from .traffic import (CONTINUOUS, DISCRETE, EbbFlow, MmooSource, RateBurst, aggregate_iid_ebb,
                      ebb_sample_path, mmoo_effective_bandwidth)

__all__ = [n for n in dir() if not n.startswith("_")]
