import numpy as np
import pytest

from mecsched.config import config_from_dict
from mecsched.engine import run, update_local_queue, update_server_queue
from mecsched.metrics import (drift_constant_c, littles_law_delay,
                              theorem1_power_bound, theorem1_queue_bound)
from mecsched.model import (draw_environment, environment_streams,
                            local_departure, offload_rate)


def test_littles_law_delay(default_cfg):
    m = run(default_cfg, "baseline_alg1", 300)
    expect = m.avg_sum_queue_bits / (5 * 4000.0)
    np.testing.assert_allclose(littles_law_delay(m, default_cfg), expect,
                               rtol=1e-12)
    np.testing.assert_allclose(m.avg_exec_delay_slots, expect, rtol=1e-12)
    np.testing.assert_allclose(m.exec_delay_ms, expect * 1.0, rtol=1e-12)


def test_littles_law_rejects_zero_inflow():
    cfg = config_from_dict({"arrival_max_bits": 0.0})
    m = run(cfg, "baseline_alg1", 10)
    with pytest.raises(ValueError, match="arrival rate"):
        littles_law_delay(m, cfg)


# --- drift bound constant -----------------------------------------------------

def test_drift_constant_reference_value(default_cfg):
    np.testing.assert_allclose(drift_constant_c(default_cfg),
                               7409419824.677042, rtol=1e-12)
    m = run(default_cfg, "baseline_alg1", 5)
    assert m.c_bits2 == drift_constant_c(default_cfg)


def test_drift_constant_vanishes_with_the_caps(default_cfg):
    """All one-slot extremes scaled down together drive C to zero."""
    base = drift_constant_c(default_cfg)
    prev = base
    for s in (1e-2, 1e-4, 1e-6):
        cfg = default_cfg.replace(arrival_max_bits=8000.0 * s,
                                  f_max_hz=1e9 * s, fc_max_hz=2.5e9 * s,
                                  p_max_w=0.5 * s)
        c = drift_constant_c(cfg)
        assert 0 < c < prev
        assert c <= 3 * s * base
        prev = c


def test_drift_constant_arrival_quadratic(default_cfg):
    """Doubling A_max adds exactly 1.5 * sum(A_max^2) to C."""
    doubled = default_cfg.replace(arrival_max_bits=16000.0)
    gap = drift_constant_c(doubled) - drift_constant_c(default_cfg)
    np.testing.assert_allclose(gap, 1.5 * 5 * 8000.0 ** 2, rtol=1e-12)


def test_drift_constant_monotone_in_caps(default_cfg):
    base = drift_constant_c(default_cfg)
    for kw in ({"arrival_max_bits": 9000.0}, {"f_max_hz": 2e9},
               {"fc_max_hz": 3e9}, {"p_max_w": 1.0},
               {"bandwidth_hz": 2e7}):
        assert drift_constant_c(default_cfg.replace(**kw)) > base


def test_drift_constant_independent_of_control(default_cfg):
    assert drift_constant_c(default_cfg.replace(control_v=7e9)) == \
        drift_constant_c(default_cfg)


# --- tradeoff bounds ------------------------------------------------------------

def test_power_bound_shape(default_cfg):
    c = drift_constant_c(default_cfg)
    got = theorem1_power_bound(0.3, default_cfg)
    np.testing.assert_allclose(got, 0.3 + c / default_cfg.control_v, rtol=1e-12)
    # 1/V decay of the overshoot
    tight = theorem1_power_bound(0.3, default_cfg.replace(control_v=1e14))
    assert tight - 0.3 < 1e-4
    loose = theorem1_power_bound(0.3, default_cfg.replace(control_v=1e6))
    assert loose > got
    with pytest.raises(ValueError):
        theorem1_power_bound(-0.1, default_cfg)


def test_queue_bound_shape(default_cfg):
    c = drift_constant_c(default_cfg)
    base = theorem1_queue_bound(0.3, 1000.0, 0.3, default_cfg)
    np.testing.assert_allclose(base, c / 1000.0, rtol=1e-12)
    v2 = default_cfg.replace(control_v=2 * default_cfg.control_v)
    grow = (theorem1_queue_bound(0.5, 1000.0, 0.3, v2)
            - theorem1_queue_bound(0.5, 1000.0, 0.3, default_cfg))
    np.testing.assert_allclose(grow, default_cfg.control_v * 0.2 / 1000.0,
                               rtol=1e-9)
    with pytest.raises(ValueError):
        theorem1_queue_bound(0.5, 0.0, 0.3, default_cfg)
    with pytest.raises(ValueError):
        theorem1_queue_bound(0.2, 1000.0, 0.3, default_cfg)


def _fixed_policy_slack(cfg, n_slots=3000):
    """Run an always-on policy and measure its Slater margin and power.

    f = f_max, p = p_max, alpha = 1/N, all server cycles round-robin. The
    margin is the worst buffer's mean service minus mean inflow.
    """
    n = cfg.n_devices
    streams = environment_streams(cfg)
    q = np.zeros(n)
    t = np.zeros(n)
    d_l = local_departure(cfg.f_max_hz, cfg)
    serve_q = np.zeros(n)
    inflow_t = np.zeros(n)
    serve_t = np.zeros(n)
    supply = float(np.sum(cfg.fc_max_hz)) * cfg.slot_seconds
    for k in range(n_slots):
        env = draw_environment(streams, cfg)
        d_r = offload_rate(np.full(n, 1.0 / n), cfg.p_max_w,
                           env.channel_gain, cfg)
        d_s = np.zeros(n)
        d_s[k % n] = supply / cfg.cycles_per_bit[k % n]
        eff = np.minimum(np.maximum(q - d_l, 0.0), d_r)
        serve_q += d_l + d_r
        inflow_t += eff
        serve_t += d_s
        q = update_local_queue(q, d_l + d_r, env.arrivals_bits)
        t = update_server_queue(t, d_s, q, d_l, d_r)
    eps = min(np.min(serve_q / n_slots - cfg.arrival_mean_bits),
              np.min((serve_t - inflow_t) / n_slots))
    psi = float(np.sum(cfg.weight * (cfg.p_max_w + cfg.kappa_mob
                                     * cfg.f_max_hz ** 3))
                + cfg.server_weight
                * np.sum(cfg.kappa_ser * cfg.fc_max_hz ** 3))
    return eps, psi


def test_queue_bound_holds_empirically(default_cfg):
    """A measured Slater point turns the bound into a checkable number."""
    eps, psi = _fixed_policy_slack(default_cfg)
    assert eps > 0, "the always-on policy must outpace arrivals"
    bound = theorem1_queue_bound(psi, eps, 0.0, default_cfg)
    m = run(default_cfg, "baseline_alg1", 5000)
    assert m.avg_sum_queue_bits <= bound


def test_power_bound_holds_empirically(default_cfg):
    """The achieved average power sits below P_opt_proxy + C/V.

    The best average power seen across a coarse V sweep upper-bounds the
    optimum, so the bound built from it must still clear the run.
    """
    proxies = []
    for v in (1e8, 1e9, 7e9):
        m = run(default_cfg.replace(control_v=v), "baseline_alg1", 3000)
        proxies.append(m.avg_weighted_power_w)
    m = run(default_cfg, "baseline_alg1", 3000)
    bound = theorem1_power_bound(min(proxies), default_cfg)
    assert m.avg_weighted_power_w <= bound
