import numpy as np
import pytest

import mecsched.oracles as oracles
from mecsched.config import config_from_dict
from mecsched.oracles import (exhaustive_sp3, gauss_seidel_sp2,
                              grid_oracle_scalar, projected_gradient_sp2,
                              run_suites, verify_power_step, verify_sp1,
                              verify_sp2, verify_sp3)
from mecsched.solver import solve_sp3


def test_grid_oracle_scalar_basics():
    x, v = grid_oracle_scalar(lambda x: np.full_like(x, 2.0), 0.0, 1.0, 11)
    assert (x, v) == (0.0, 2.0)  # constant: first point wins
    x, v = grid_oracle_scalar(lambda x: (x - 0.35) ** 2, 0.0, 1.0, 101)
    assert abs(x - 0.35) <= 0.005 + 1e-12
    with pytest.raises(ValueError):
        grid_oracle_scalar(lambda x: x, 1.0, 0.0, 10)
    with pytest.raises(ValueError):
        grid_oracle_scalar(lambda x: x, 0.0, 1.0, 1)


def test_small_suites_all_pass():
    for fn, kwargs in ((verify_sp1, {}), (verify_power_step, {}),
                       (verify_sp3, {}), (verify_sp2, {"iters": 100_000})):
        reports = fn(n_cases=12, seed=0, **kwargs)
        assert len(reports) >= 12
        bad = [r for r in reports if not r.passed]
        assert not bad, bad[:2]
        d = reports[0].to_dict()
        assert set(d) >= {"case_id", "abs_gap", "rel_gap", "passed"}


def test_run_suites_aggregates():
    reports, ok = run_suites(["sp1", "sp3"], cases=6, seed=1)
    assert ok
    assert len(reports) == 12
    assert {r.case_id[:3] for r in reports} == {"sp1", "sp3"}
    with pytest.raises(KeyError):
        run_suites(["nope"], cases=2)


def test_exhaustive_sp3_agrees_with_closed_form():
    cfg = config_from_dict({"n_devices": 2, "n_cores": 2, "control_v": 1e9})
    t = np.array([1e5, 2e5])
    f_closed, d_closed = solve_sp3(t, cfg)
    f_grid, d_grid, obj, best_probe = exhaustive_sp3(t, cfg,
                                                     grid_points=20_001)
    np.testing.assert_allclose(f_grid, f_closed, rtol=1e-3)
    assert np.argmax(d_grid) == np.argmax(d_closed)
    # splitting the cycle supply across devices never improves on one winner
    assert best_probe >= obj - 1e-6 * max(abs(obj), 1.0)


def test_perturbed_closed_form_is_caught():
    """A 1% distortion of any block must fail its oracle suite."""
    try:
        oracles.PERTURB_CLOSED_FORM = lambda x: x * 1.01
        for fn in (verify_sp1, verify_power_step, verify_sp3):
            reports = fn(n_cases=30, seed=0)
            assert any(not r.passed for r in reports), fn.__name__
    finally:
        oracles.PERTURB_CLOSED_FORM = None


def test_gradient_oracle_matches_alternation_on_fresh_instances():
    cfg = config_from_dict({"n_devices": 3, "control_v": 5e8})
    rng = np.random.default_rng(3)
    for _ in range(3):
        delta = 10.0 ** rng.uniform(2, 6, 3)
        gain = rng.exponential(1.0, 3) * cfg.channel_const
        p_gs, a_gs, j_gs, hist, ok = gauss_seidel_sp2(
            delta, gain, np.ones(3), cfg.p_max_w, cfg, 1.0)
        assert ok and hist.size >= 1
        p_pg, a_pg, j_pg = projected_gradient_sp2(
            delta, gain, np.ones(3), cfg.p_max_w, cfg, 1.0, iters=200_000)
        assert abs(j_gs - j_pg) <= 1e-4 * max(abs(j_gs), 1.0)
        assert abs(a_gs.sum() - 1.0) < 1e-6
        assert a_pg.sum() <= 1.0 + 1e-9


def test_gradient_oracle_symmetric_instance():
    cfg = config_from_dict({"n_devices": 2, "control_v": 1e9})
    delta = np.array([5e4, 5e4])
    gain = np.full(2, 2e-13)
    p, alpha, _ = projected_gradient_sp2(delta, gain, np.ones(2),
                                         cfg.p_max_w, cfg, 1.0,
                                         iters=400_000)
    assert abs(alpha[0] - alpha[1]) < 1e-5
    assert abs(p[0] - p[1]) < 1e-5


def test_gradient_oracle_rejects_large_instances():
    cfg = config_from_dict({"n_devices": 6, "eps_a": 1e-4})
    with pytest.raises(ValueError, match="N <= 5"):
        projected_gradient_sp2(np.ones(6), np.ones(6) * 1e-13, np.ones(6),
                               cfg.p_max_w, cfg, 1.0, iters=100)


def test_forcing_power_on_balanced_device_never_helps():
    """Perturbation probe for the partition rule: p>0 when Q<=T only hurts."""
    from mecsched.model import QueueState
    from mecsched.solver import sp2_objective
    cfg = config_from_dict({"n_devices": 2, "control_v": 1e8})
    rng = np.random.default_rng(7)
    for _ in range(50):
        t = rng.uniform(1e3, 1e5)
        q = t * rng.uniform(0.0, 1.0)  # Q <= T: pure downstream backlog
        delta = np.array([q - t])
        gain = np.array([rng.exponential(2e-13)])
        idle = sp2_objective(np.array([0.0]), np.array([cfg.eps_a]), delta,
                             gain, np.ones(1), cfg)
        forced = sp2_objective(np.array([0.1]), np.array([0.5]), delta,
                               gain, np.ones(1), cfg)
        assert idle <= forced + 1e-12
