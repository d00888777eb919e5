"""Slot-by-slot simulation engine.

Three modes share one code path:

  baseline_alg1        solve on the actual queues, apply the schedule as is
  delay_improved_alg3  solve on virtual server queues, then repack the cycle
                       supply across devices by actual backlog
  equal_bandwidth      fixed alpha = 1/N, closed-form power only

The virtual server queues evolve exactly like the baseline's actual server
queues, so runs with matched seeds draw identical environments and spend
identical power; only the realized server backlog differs.
"""

from dataclasses import dataclass

import numpy as np

from .metrics import MetricsAccumulator
from .model import (QueueState, SlotOutcome, draw_environment,
                    environment_streams, local_departure,
                    mobile_compute_power, offload_rate, server_power)
from .solver import solve_per_slot

MODES = ("baseline_alg1", "delay_improved_alg3", "equal_bandwidth")

TRACE_SCHEMA = "mecsched-trace-v1"
TRACE_COLUMNS = ("slot", "device", "Q_bits", "T_act_bits", "T_vir_bits",
                 "f_hz", "p_tx_w", "alpha", "d_l", "d_r_nominal",
                 "d_r_effective", "d_s", "f_c_sum_hz", "weighted_power_w",
                 "gs_iterations", "gs_converged")


@dataclass
class EngineState:
    slot_index: int
    actual: QueueState
    virtual_t: np.ndarray   # tracks actual t in modes without the repacking
    streams: list
    mode: str


def make_engine(cfg, mode):
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}, pick one of {MODES}")
    return EngineState(slot_index=0,
                       actual=QueueState.zeros(cfg.n_devices),
                       virtual_t=np.zeros(cfg.n_devices),
                       streams=environment_streams(cfg),
                       mode=mode)


def update_local_queue(q_bits, d_sigma_bits, arrivals_bits):
    """Device buffer recursion; departures may exceed the backlog."""
    return np.maximum(q_bits - d_sigma_bits, 0.0) + arrivals_bits


def update_server_queue(t_bits, d_s_bits, q_bits, d_l_bits, d_r_bits):
    """Server buffer recursion; only bits actually leaving the device count."""
    effective = np.minimum(np.maximum(q_bits - d_l_bits, 0.0), d_r_bits)
    return np.maximum(t_bits - d_s_bits, 0.0) + effective


def delay_improved_schedule(d_s_star, f_c_star, actual_t, virtual_t, cfg):
    """Repack the slot's cycle supply across devices by actual backlog.

    Keeps the solved schedule whenever the supply cannot even clear the
    actual backlog of the virtually-picked device. Otherwise devices are
    served in descending virtual T/L order, each up to its actual backlog,
    and the residual cycles land on the last device reached.
    """
    ell = cfg.cycles_per_bit
    budget = float(np.sum(f_c_star)) * cfg.slot_seconds
    i_max = int(np.argmax(virtual_t / ell))
    if budget <= actual_t[i_max] * ell[i_max]:
        return d_s_star.copy()
    n = cfg.n_devices
    order = np.lexsort((np.arange(n), -(virtual_t / ell)))
    cycles = actual_t[order] * ell[order]
    csum = np.cumsum(cycles)
    if csum[-1] > budget:
        n_ser = int(np.argmax(csum > budget)) + 1
    else:
        n_ser = n
    d = np.zeros(n)
    head = order[:n_ser - 1]
    d[head] = actual_t[head]
    last = order[n_ser - 1]
    spent = csum[n_ser - 2] if n_ser >= 2 else 0.0
    d[last] = (budget - spent) / ell[last]
    return d


def step(engine, cfg):
    """Advance one slot: draw, solve, apply, update queues."""
    env = draw_environment(engine.streams, cfg)
    improved = engine.mode == "delay_improved_alg3"
    if improved:
        dec_state = QueueState(engine.actual.q_bits, engine.virtual_t)
    else:
        dec_state = engine.actual
    decision, trace = solve_per_slot(
        dec_state, env, cfg, equal_bandwidth=engine.mode == "equal_bandwidth")

    q = engine.actual.q_bits
    t_act = engine.actual.t_bits
    d_l = local_departure(decision.f_hz, cfg)
    d_r_nom = offload_rate(decision.alpha, decision.p_w, env.channel_gain, cfg)
    d_r_eff = np.minimum(np.maximum(q - d_l, 0.0), d_r_nom)
    if improved:
        d_applied = delay_improved_schedule(decision.d_s_bits, decision.f_c_hz,
                                            t_act, engine.virtual_t, cfg)
    else:
        d_applied = decision.d_s_bits

    p_local = mobile_compute_power(decision.f_hz, cfg)
    p_ser = server_power(decision.f_c_hz, cfg)
    device_power = decision.p_w + p_local
    mobile = float(np.sum(device_power))
    weighted = float(np.sum(cfg.weight * device_power)
                     + cfg.server_weight * p_ser)

    new_q = update_local_queue(q, d_l + d_r_nom, env.arrivals_bits)
    new_t = np.maximum(t_act - d_applied, 0.0) + d_r_eff
    if improved:
        engine.virtual_t = np.maximum(engine.virtual_t - decision.d_s_bits, 0.0) + d_r_eff
    else:
        engine.virtual_t = new_t
    engine.actual = QueueState(new_q, new_t)
    engine.slot_index += 1

    outcome = SlotOutcome(d_l_bits=d_l, d_r_nominal_bits=d_r_nom,
                          d_r_effective_bits=d_r_eff, d_s_applied_bits=d_applied,
                          p_local_w=p_local, device_power_w=device_power,
                          mobile_power_w=mobile, server_power_w=p_ser,
                          weighted_power_w=weighted,
                          gs_iterations=trace.iterations,
                          gs_converged=bool(trace.converged and trace.bw_converged))
    return engine, outcome, decision


def run(cfg, mode, n_slots, trace_path=None, state_hook=None, warmup_slots=0):
    """Simulate n_slots from empty queues and return run metrics.

    state_hook(t, q, t_act, t_vir) is called with the state at the start
    of each slot, before the decision, for tests and plotting. A positive
    warmup_slots adds a post-warm-up metrics block alongside the all-slot
    averages.
    """
    engine = make_engine(cfg, mode)
    acc = MetricsAccumulator(cfg, mode, warmup_slots)
    fh = open(trace_path, "w", newline="") if trace_path else None
    try:
        if fh:
            fh.write(f"# schema: {TRACE_SCHEMA}\n")
            fh.write(",".join(TRACE_COLUMNS) + "\n")
        for t in range(n_slots):
            q0 = engine.actual.q_bits.copy()
            t0 = engine.actual.t_bits.copy()
            v0 = engine.virtual_t.copy()
            if state_hook is not None:
                state_hook(t, q0, t0, v0)
            engine, outcome, decision = step(engine, cfg)
            acc.add(q0, t0, outcome)
            if fh:
                _write_slot(fh, cfg, t, q0, t0, v0, decision, outcome)
        return acc.finalize(engine)
    finally:
        if fh:
            fh.close()


def _write_slot(fh, cfg, t, q0, t0, v0, decision, outcome):
    f_c_sum = float(np.sum(decision.f_c_hz))
    conv = int(outcome.gs_converged)
    for i in range(cfg.n_devices):
        row = (t, i, q0[i], t0[i], v0[i], decision.f_hz[i], decision.p_w[i],
               decision.alpha[i], outcome.d_l_bits[i],
               outcome.d_r_nominal_bits[i], outcome.d_r_effective_bits[i],
               outcome.d_s_applied_bits[i], f_c_sum, outcome.weighted_power_w,
               outcome.gs_iterations, conv)
        fh.write(",".join(repr(float(x)) if isinstance(x, float) else str(x)
                          for x in row))
        fh.write("\n")
