import numpy as np
import pytest

from mecsched.config import config_from_dict
from mecsched.engine import run
from mecsched.oracles import gauss_seidel_sp2, projected_gradient_sp2


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the jitted solver paths once so timing tests measure steady state."""
    cfg = config_from_dict({"n_devices": 2, "control_v": 1e8, "rng_seed": 123})
    run(cfg, "baseline_alg1", 3)
    delta = np.array([1e4, 2e4])
    gain = np.full(2, 1e-13)
    gauss_seidel_sp2(delta, gain, np.ones(2), cfg.p_max_w, cfg, 1.0)
    projected_gradient_sp2(delta, gain, np.ones(2), cfg.p_max_w, cfg, 1.0,
                           iters=200, phases=1)


@pytest.fixture(scope="session")
def default_cfg():
    return config_from_dict({})


@pytest.fixture()
def two_device_cfg():
    return config_from_dict({"n_devices": 2, "rng_seed": 7})
