"""Discrete-slot simulator and per-slot solver for multi-user edge offloading.

The per-slot controller trades average power against queue backlog through
a single control parameter V: local CPU speeds, transmit powers, bandwidth
fractions and server core speeds all come out of closed forms or a small
convex alternation, so slots solve in microseconds and long horizons are
cheap to simulate.
"""

from .config import DEFAULTS, SystemConfig, config_from_dict, load_config
from .engine import (MODES, EngineState, delay_improved_schedule, make_engine,
                     run, step, update_local_queue, update_server_queue)
from .metrics import (RunMetrics, drift_constant_c, littles_law_delay,
                      theorem1_power_bound, theorem1_queue_bound)
from .model import (QueueState, SlotDecision, SlotEnvironment, SlotOutcome,
                    draw_environment, environment_streams, local_departure,
                    mobile_compute_power, offload_rate, server_power,
                    weighted_power)
from .solver import (GaussSeidelTrace, OffloaderPartition, partition_offloaders,
                     solve_bandwidth_given_power, solve_per_slot,
                     solve_power_given_bandwidth, solve_sp1, solve_sp2,
                     solve_sp3, sp2_objective)

__version__ = "0.1.0"
