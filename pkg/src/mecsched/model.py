"""Physical model: queues, per-slot environment, decisions, outcomes.

Conventions: per-device arrays are float64 of shape (N,), per-core arrays
shape (M,). Bits are real-valued. A decision fixes, for one slot, the local
CPU frequencies, transmit powers, bandwidth fractions, server core
frequencies and the per-device scheduled server departures.
"""

import math
from dataclasses import dataclass, field

import numpy as np

LN2 = math.log(2.0)


@dataclass
class QueueState:
    """Task buffers: q_bits is the device backlog, t_bits the server backlog."""

    q_bits: np.ndarray
    t_bits: np.ndarray

    def __post_init__(self):
        self.q_bits = np.asarray(self.q_bits, dtype=np.float64)
        self.t_bits = np.asarray(self.t_bits, dtype=np.float64)
        if self.q_bits.shape != self.t_bits.shape:
            raise ValueError("q_bits and t_bits must have the same shape")
        if np.any(self.q_bits < 0) or np.any(self.t_bits < 0):
            raise ValueError("queue lengths cannot be negative")

    @classmethod
    def zeros(cls, n_devices):
        return cls(np.zeros(n_devices), np.zeros(n_devices))

    def copy(self):
        return QueueState(self.q_bits.copy(), self.t_bits.copy())


@dataclass
class SlotEnvironment:
    """Random state revealed at the start of a slot."""

    gamma: np.ndarray          # unit-mean fading draws, (N,)
    channel_gain: np.ndarray   # Gamma_i = gamma_i * g0 * (d0/d_i)^theta, (N,)
    arrivals_bits: np.ndarray  # (N,)

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=np.float64)
        self.channel_gain = np.asarray(self.channel_gain, dtype=np.float64)
        self.arrivals_bits = np.asarray(self.arrivals_bits, dtype=np.float64)
        if np.any(self.gamma < 0) or np.any(self.channel_gain < 0):
            raise ValueError("channel gains cannot be negative")
        if np.any(self.arrivals_bits < 0):
            raise ValueError("arrivals cannot be negative")


@dataclass
class SlotDecision:
    """One slot's control: (f, p, alpha, f_C, d_s)."""

    f_hz: np.ndarray       # local CPU frequencies, (N,)
    p_w: np.ndarray        # transmit powers, (N,)
    alpha: np.ndarray      # bandwidth fractions, (N,)
    f_c_hz: np.ndarray     # server core frequencies, (M,)
    d_s_bits: np.ndarray   # scheduled server departures, (N,)

    def __post_init__(self):
        for name in ("f_hz", "p_w", "alpha", "f_c_hz", "d_s_bits"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))

    def validate(self, cfg, rel=1e-9):
        """Raise if the decision violates the per-slot feasible set."""
        if np.any(self.f_hz < 0) or np.any(self.f_hz > cfg.f_max_hz * (1 + rel)):
            raise ValueError("local frequency out of range")
        if np.any(self.p_w < 0) or np.any(self.p_w > cfg.p_max_w * (1 + rel)):
            raise ValueError("transmit power out of range")
        if np.any(self.alpha < cfg.eps_a * (1 - rel)):
            raise ValueError("bandwidth fraction below floor")
        if self.alpha.sum() > 1 + rel:
            raise ValueError("bandwidth fractions exceed the band")
        if np.any(self.f_c_hz < 0) or np.any(self.f_c_hz > cfg.fc_max_hz * (1 + rel)):
            raise ValueError("server core frequency out of range")
        if np.any(self.d_s_bits < 0):
            raise ValueError("negative server departure")
        budget = float(np.sum(self.f_c_hz) * cfg.slot_seconds)
        spent = float(np.sum(self.d_s_bits * cfg.cycles_per_bit))
        if spent > budget * (1 + rel) + 1e-9:
            raise ValueError("server schedule exceeds the cycle budget")


@dataclass
class SlotOutcome:
    """Realized departures and powers for one slot."""

    d_l_bits: np.ndarray          # local departures, (N,)
    d_r_nominal_bits: np.ndarray  # channel capacity of the uplink, (N,)
    d_r_effective_bits: np.ndarray  # offloaded bits actually entering T, (N,)
    d_s_applied_bits: np.ndarray  # server departures applied to the real T, (N,)
    p_local_w: np.ndarray         # local compute power, (N,)
    device_power_w: np.ndarray    # p_tx + p_local per device, (N,)
    mobile_power_w: float         # sum of device_power_w
    server_power_w: float
    weighted_power_w: float       # objective power P_Sigma
    gs_iterations: int = 0
    gs_converged: bool = True


# --- physics ----------------------------------------------------------------

def local_departure(f_hz, cfg):
    """Bits served locally in one slot: tau * f / L."""
    return cfg.slot_seconds * np.asarray(f_hz) / cfg.cycles_per_bit


def offload_rate(alpha, p_w, channel_gain, cfg):
    """Uplink bits per slot: alpha*omega*tau*log2(1 + Gamma*p/(alpha*N0*omega)).

    alpha = 0 is the continuous limit 0. Scalar or vector arguments.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    p_w = np.asarray(p_w, dtype=np.float64)
    channel_gain = np.asarray(channel_gain, dtype=np.float64)
    denom = alpha * cfg.noise_psd_w_per_hz * cfg.bandwidth_hz
    snr = np.divide(channel_gain * p_w, denom,
                    out=np.zeros(np.broadcast(alpha, p_w, channel_gain).shape),
                    where=denom > 0)
    rate = alpha * cfg.bandwidth_hz * cfg.slot_seconds * np.log1p(snr) / LN2
    return rate


def mobile_compute_power(f_hz, cfg):
    """Dynamic CPU power kappa * f^3 per device."""
    return cfg.kappa_mob * np.asarray(f_hz) ** 3


def server_power(f_c_hz, cfg):
    """Total server CPU power sum_m kappa_ser_m * f_m^3."""
    return float(np.sum(cfg.kappa_ser * np.asarray(f_c_hz) ** 3))


def weighted_power(p_w, f_hz, f_c_hz, cfg):
    """Objective power: sum_i w_i (p_tx,i + p_l,i) + w_ser * p_ser."""
    mob = p_w + mobile_compute_power(f_hz, cfg)
    return float(np.sum(cfg.weight * mob) + cfg.server_weight * server_power(f_c_hz, cfg))


# --- randomness -------------------------------------------------------------

def environment_streams(cfg):
    """One counter-based stream per device, keyed (seed, device).

    Streams are independent of n_devices and of the engine mode, so runs
    that share a seed see identical fading and arrivals device by device.
    """
    return [np.random.Generator(np.random.Philox(key=[cfg.rng_seed, i]))
            for i in range(cfg.n_devices)]


def draw_environment(streams, cfg):
    """Advance each device stream by one slot and return the draws.

    Per device and slot: one uniform for the fading (unit-mean exponential
    via inverse CDF) and one for the arrival (uniform on [0, A_max]).
    """
    n = cfg.n_devices
    gamma = np.empty(n)
    arrivals = np.empty(n)
    for i, gen in enumerate(streams):
        u = gen.random(2)
        gamma[i] = -math.log1p(-u[0])
        arrivals[i] = cfg.arrival_max_bits[i] * u[1]
    return SlotEnvironment(gamma=gamma,
                           channel_gain=gamma * cfg.channel_const,
                           arrivals_bits=arrivals)
