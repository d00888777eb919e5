"""Per-slot solver: closed-form CPU scaling, alternating transmission
optimization, and the server scheduling rule.

The per-slot problem separates into three blocks given the queue state:
local frequencies (per-device cubic), transmit power and bandwidth for the
devices whose device backlog exceeds their server backlog (jointly convex,
solved by alternating a closed-form power step with a Lagrangian bandwidth
bisection), and server core frequencies plus the served device (closed
form after a max-ratio argmax).
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import SlotDecision

LN2 = math.log(2.0)

TOL_GS = 1e-8        # relative objective change that stops the alternation
MAX_ITER_GS = 100    # alternation sweep cap
XI = 1e-7            # bandwidth budget residual tolerance
I_MAX_BW = 200       # multiplier bisection iteration cap
VARSIGMA = 1e-10     # relative width target of the inner root bisection


@dataclass
class OffloaderPartition:
    """Devices split by whether offloading can reduce the drift."""

    offloaders: np.ndarray      # indices with Q > T
    non_offloaders: np.ndarray  # indices with Q <= T, get p=0 and the floor

    def bandwidth_budget(self, cfg):
        """Bandwidth left for the offloading set after the floors."""
        return 1.0 - self.non_offloaders.size * cfg.eps_a


@dataclass
class GaussSeidelTrace:
    iterations: int
    objective_history: np.ndarray
    converged: bool
    bw_converged: bool = True

    def __post_init__(self):
        self.objective_history = np.asarray(self.objective_history, dtype=np.float64)


def solve_sp1(q_bits, cfg):
    """Local CPU frequencies minimizing -Q*D_l + V*w*p_l per device."""
    q = np.asarray(q_bits, dtype=np.float64)
    f = np.empty_like(q)
    zero_w = cfg.weight <= 0.0
    f[zero_w] = cfg.f_max_hz[zero_w]
    pos = ~zero_w
    if np.any(pos):
        opt = np.sqrt(q[pos] * cfg.slot_seconds
                      / (3.0 * cfg.kappa_mob[pos] * cfg.weight[pos]
                         * cfg.control_v * cfg.cycles_per_bit[pos]))
        f[pos] = np.minimum(cfg.f_max_hz[pos], opt)
    return f


def partition_offloaders(state, cfg):
    """Split on Q > T: only those devices gain from spending uplink power."""
    mask = state.q_bits > state.t_bits
    idx = np.arange(cfg.n_devices)
    return OffloaderPartition(offloaders=idx[mask], non_offloaders=idx[~mask])


def solve_power_given_bandwidth(alpha, delta, gain, weight, p_max, cfg):
    """Closed-form optimal transmit power per offloader for a fixed split.

    Arguments are arrays over the offloading set; delta is Q - T. Weight
    zero means transmit power is free and the cap is optimal; a dead
    channel with positive weight gets zero power.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    gain = np.asarray(gain, dtype=np.float64)
    p = np.empty(alpha.size)
    _kernels.p_star(alpha, delta, gain, np.asarray(weight, dtype=np.float64),
                    np.asarray(p_max, dtype=np.float64), cfg.control_v,
                    cfg.bandwidth_hz, cfg.slot_seconds,
                    cfg.noise_psd_w_per_hz, p)
    return p


def solve_bandwidth_given_power(p, delta, gain, cfg, budget):
    """Optimal bandwidth split for fixed powers via multiplier bisection.

    Returns (alpha, outer_iterations, converged). Devices whose rate is
    identically zero sit at the floor eps_a; the rest follow the common
    multiplier, clamped below by eps_a.
    """
    p = np.asarray(p, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    gain = np.asarray(gain, dtype=np.float64)
    cs = gain * p / (cfg.noise_psd_w_per_hz * cfg.bandwidth_hz)
    dcoefs = delta * cfg.bandwidth_hz * cfg.slot_seconds / LN2
    alpha = np.empty(p.size)
    iters, converged = _kernels.bw_lagrangian(cs, dcoefs, cfg.eps_a, budget,
                                              XI, I_MAX_BW, VARSIGMA, alpha)
    return alpha, iters, converged


def sp2_objective(p, alpha, delta, gain, weight, cfg):
    """Transmission block objective V*w*p - delta*rate, summed."""
    return float(_kernels.sp2_objective(
        np.asarray(p, dtype=np.float64), np.asarray(alpha, dtype=np.float64),
        np.asarray(delta, dtype=np.float64), np.asarray(gain, dtype=np.float64),
        np.asarray(weight, dtype=np.float64), cfg.control_v, cfg.bandwidth_hz,
        cfg.slot_seconds, cfg.noise_psd_w_per_hz))


def solve_sp2(state, env, cfg):
    """Transmit power and bandwidth for all devices.

    Non-offloaders are fixed at p=0, alpha=eps_a before the alternation
    starts. Returns (p, alpha, partition, trace) with full-length arrays.
    """
    part = partition_offloaders(state, cfg)
    p = np.zeros(cfg.n_devices)
    alpha = np.full(cfg.n_devices, cfg.eps_a)
    off = part.offloaders
    if off.size == 0:
        return p, alpha, part, GaussSeidelTrace(0, np.empty(0), True)

    budget = part.bandwidth_budget(cfg)
    delta = state.q_bits[off] - state.t_bits[off]
    gain = env.channel_gain[off]
    p_off = np.empty(off.size)
    a_off = np.empty(off.size)
    hist = np.empty(MAX_ITER_GS)
    sweeps, converged, n_hist, bw_ok = _kernels.gs_solve(
        delta, gain, cfg.weight[off], cfg.p_max_w[off], cfg.eps_a, budget,
        cfg.control_v, cfg.bandwidth_hz, cfg.slot_seconds,
        cfg.noise_psd_w_per_hz, TOL_GS, MAX_ITER_GS, XI, I_MAX_BW, VARSIGMA,
        p_off, a_off, hist)
    p[off] = p_off
    alpha[off] = a_off
    return p, alpha, part, GaussSeidelTrace(sweeps, hist[:n_hist].copy(),
                                            converged, bw_ok)


def solve_sp2_equal_bandwidth(state, env, cfg):
    """Fixed equal split baseline: alpha = 1/N, one closed-form power pass."""
    part = partition_offloaders(state, cfg)
    p = np.zeros(cfg.n_devices)
    alpha = np.full(cfg.n_devices, 1.0 / cfg.n_devices)
    off = part.offloaders
    if off.size == 0:
        return p, alpha, part, GaussSeidelTrace(0, np.empty(0), True)
    delta = state.q_bits[off] - state.t_bits[off]
    gain = env.channel_gain[off]
    p_off = np.empty(off.size)
    _kernels.p_star(alpha[off], delta, gain, cfg.weight[off], cfg.p_max_w[off],
                    cfg.control_v, cfg.bandwidth_hz, cfg.slot_seconds,
                    cfg.noise_psd_w_per_hz, p_off)
    p[off] = p_off
    obj = sp2_objective(p_off, alpha[off], delta, gain, cfg.weight[off], cfg)
    return p, alpha, part, GaussSeidelTrace(0, np.array([obj]), True)


def solve_sp3(t_bits, cfg):
    """Server core frequencies and the single served device.

    All cycle supply goes to the device maximizing T/L (ties to the lowest
    index); each core then solves a scalar cubic with that device's weight.
    """
    t = np.asarray(t_bits, dtype=np.float64)
    ratio = t / cfg.cycles_per_bit
    i_max = int(np.argmax(ratio))
    if cfg.server_weight > 0.0:
        opt = np.sqrt(t[i_max] * cfg.slot_seconds
                      / (3.0 * cfg.control_v * cfg.server_weight
                         * cfg.cycles_per_bit[i_max] * cfg.kappa_ser))
        f_c = np.minimum(cfg.fc_max_hz, opt)
    else:
        f_c = cfg.fc_max_hz.copy()
    d_s = np.zeros(cfg.n_devices)
    d_s[i_max] = float(np.sum(f_c) * cfg.slot_seconds) / cfg.cycles_per_bit[i_max]
    return f_c, d_s


def solve_per_slot(state, env, cfg, equal_bandwidth=False):
    """Full per-slot decision for the given queue state and channel draw."""
    f = solve_sp1(state.q_bits, cfg)
    if equal_bandwidth:
        p, alpha, part, trace = solve_sp2_equal_bandwidth(state, env, cfg)
    else:
        p, alpha, part, trace = solve_sp2(state, env, cfg)
    f_c, d_s = solve_sp3(state.t_bits, cfg)
    decision = SlotDecision(f_hz=f, p_w=p, alpha=alpha, f_c_hz=f_c, d_s_bits=d_s)
    return decision, trace
