"""Run metrics, Little's law delay, and the drift bound constants.

Averages follow the usual time-average definition: queue states are
sampled at slot starts (so the empty initial state counts), powers are the
per-slot spends. The sum backlog of a device is Q_i + T_i. Metrics can
additionally be reported over a post-warm-up window; the default window of
zero reproduces the plain all-slot averages.
"""

import math
from dataclasses import dataclass

import numpy as np

LN2 = math.log(2.0)


@dataclass
class RunMetrics:
    mode: str
    n_slots: int
    control_v: float
    server_weight: float
    rng_seed: int
    avg_weighted_power_w: float
    avg_mobile_power_w: float
    avg_server_power_w: float
    avg_device_power_w: np.ndarray            # mean p_tx,i + p_l,i, (N,)
    avg_sum_queue_bits: float                 # sum over devices of mean(Q+T)
    avg_queue_bits_per_device: np.ndarray     # mean(Q_i + T_i), (N,)
    avg_exec_delay_slots: float
    exec_delay_ms: float
    final_queue_over_t: float                 # (sum_i Q_i(T)+T_i(T)) / T
    gs_nonconverged_slots: int
    c_bits2: float
    warmup_slots: int = 0
    post_warmup: dict = None

    def to_dict(self):
        d = self.__dict__.copy()
        for key in ("avg_queue_bits_per_device", "avg_device_power_w"):
            d[key] = [float(x) for x in d[key]]
        return d


class _Sums:
    def __init__(self, n_devices):
        self.count = 0
        self.queue = np.zeros(n_devices)
        self.device_power = np.zeros(n_devices)
        self.weighted_power = 0.0
        self.mobile_power = 0.0
        self.server_power = 0.0

    def add(self, q_bits, t_bits, outcome, decision_power):
        self.count += 1
        self.queue += q_bits + t_bits
        self.device_power += decision_power
        self.weighted_power += outcome.weighted_power_w
        self.mobile_power += outcome.mobile_power_w
        self.server_power += outcome.server_power_w


class MetricsAccumulator:
    """Streaming sums over slots; equals batch means of the trace."""

    def __init__(self, cfg, mode, warmup_slots=0):
        self.cfg = cfg
        self.mode = mode
        self.warmup_slots = int(warmup_slots)
        self.all = _Sums(cfg.n_devices)
        self.tail = _Sums(cfg.n_devices) if self.warmup_slots > 0 else None
        self.gs_nonconverged = 0

    def add(self, q_bits, t_bits, outcome):
        self.all.add(q_bits, t_bits, outcome, outcome.device_power_w)
        if self.tail is not None and self.all.count > self.warmup_slots:
            self.tail.add(q_bits, t_bits, outcome, outcome.device_power_w)
        if not outcome.gs_converged:
            self.gs_nonconverged += 1

    def _averages(self, sums):
        n = max(sums.count, 1)
        per_device = sums.queue / n
        total = float(per_device.sum())
        rate = float(self.cfg.arrival_mean_bits.sum())
        delay_slots = total / rate if rate > 0 else float("nan")
        return {
            "avg_weighted_power_w": sums.weighted_power / n,
            "avg_mobile_power_w": sums.mobile_power / n,
            "avg_server_power_w": sums.server_power / n,
            "avg_device_power_w": sums.device_power / n,
            "avg_sum_queue_bits": total,
            "avg_queue_bits_per_device": per_device,
            "avg_exec_delay_slots": delay_slots,
            "exec_delay_ms": delay_slots * self.cfg.slot_seconds * 1e3,
        }

    def finalize(self, engine):
        cfg = self.cfg
        main = self._averages(self.all)
        final_sum = float(engine.actual.q_bits.sum() + engine.actual.t_bits.sum())
        post = None
        if self.tail is not None:
            post = {k: (list(map(float, v)) if isinstance(v, np.ndarray) else float(v))
                    for k, v in self._averages(self.tail).items()}
            post["n_slots"] = self.tail.count
        return RunMetrics(
            mode=self.mode,
            n_slots=self.all.count,
            control_v=cfg.control_v,
            server_weight=cfg.server_weight,
            rng_seed=cfg.rng_seed,
            final_queue_over_t=final_sum / max(self.all.count, 1),
            gs_nonconverged_slots=self.gs_nonconverged,
            c_bits2=drift_constant_c(cfg),
            warmup_slots=self.warmup_slots,
            post_warmup=post,
            **main,
        )


def littles_law_delay(metrics, cfg):
    """Average execution delay in slots: total mean backlog over inflow."""
    rate = float(cfg.arrival_mean_bits.sum())
    if rate <= 0:
        raise ValueError("total arrival rate must be positive")
    return metrics.avg_sum_queue_bits / rate


def drift_constant_c(cfg):
    """Constant of the quadratic drift bound, in bits^2.

    Per device: half of A_max^2 plus the squared one-slot service limits of
    both buffers, plus a fading-independent cap on the uplink cross terms
    eta_i * (f_max/L + 2*omega/ln2) with
    eta_i = 2*g0*p_max*d0^theta*tau^2 / (ln2*N0*d_i^theta), unit mean fading.
    """
    tau = cfg.slot_seconds
    serve_server = float(np.sum(cfg.fc_max_hz)) * tau / cfg.cycles_per_bit
    serve_local = cfg.f_max_hz * tau / cfg.cycles_per_bit
    eta = (2.0 * cfg.pathloss_const * cfg.p_max_w
           * cfg.ref_distance_m ** cfg.pathloss_exp * tau * tau
           / (LN2 * cfg.noise_psd_w_per_hz * cfg.distance_m ** cfg.pathloss_exp))
    per_device = (cfg.arrival_max_bits ** 2 + serve_server ** 2 + serve_local ** 2
                  + eta * (cfg.f_max_hz / cfg.cycles_per_bit
                           + 2.0 * cfg.bandwidth_hz / LN2))
    return float(0.5 * per_device.sum())


def theorem1_power_bound(p_opt_estimate, cfg):
    """Upper bound on the achieved average weighted power: P_opt + C/V.

    p_opt_estimate stands in for the unknown optimum; any upper proxy (for
    example the smallest power observed across a V sweep) keeps the bound
    direction valid.
    """
    if p_opt_estimate < 0:
        raise ValueError("p_opt_estimate must be non-negative")
    return p_opt_estimate + drift_constant_c(cfg) / cfg.control_v


def theorem1_queue_bound(psi_eps, eps_bits, p_opt_estimate, cfg):
    """Backlog bound (C + V*(psi - P_opt)) / eps for a Slater point.

    psi_eps is the average power of some stationary policy whose service
    outpaces arrivals by eps_bits per slot on every buffer. Both are
    user-supplied: the analysis only needs such a policy to exist, so no
    simulation output can stand in for them.
    """
    if eps_bits <= 0:
        raise ValueError("the Slater margin must be positive")
    if psi_eps < p_opt_estimate:
        raise ValueError("psi_eps cannot undercut the optimal power estimate")
    return (drift_constant_c(cfg)
            + cfg.control_v * (psi_eps - p_opt_estimate)) / eps_bits
