"""System configuration for the multi-user edge offloading simulator.

All internal quantities are SI: Hz, W, W/Hz, seconds, bits, meters.
Config files may give the noise PSD in dBm/Hz and the reference path
loss in dB; both are converted to linear units at load time.
"""

import copy
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

# Defaults mirror the evaluation setup used throughout the experiments:
# 5 devices at 150 m, 10 MHz shared uplink, 1 ms slots, Rayleigh fading
# with unit-mean channel gain, 8-core edge server.
DEFAULTS = {
    "n_devices": 5,
    "n_cores": 8,
    "bandwidth_hz": 1.0e7,
    "slot_seconds": 1.0e-3,
    "noise_psd_dbm_per_hz": -174.0,
    "pathloss_const_db": -40.0,
    "pathloss_exp": 4.0,
    "ref_distance_m": 1.0,
    "distance_m": 150.0,
    "cycles_per_bit": 737.5,
    "kappa_mob": 1.0e-27,
    "f_max_hz": 1.0e9,
    "p_max_w": 0.5,
    "weight": 1.0,
    "arrival_max_bits": 8000.0,
    "kappa_ser": 1.0e-27,
    "fc_max_hz": 2.5e9,
    "server_weight": 0.02,
    "control_v": 1.0e8,
    "eps_a": 1.0e-4,
    "rng_seed": 1,
}

_PER_DEVICE = ("distance_m", "cycles_per_bit", "kappa_mob", "f_max_hz",
               "p_max_w", "weight", "arrival_max_bits")
_PER_CORE = ("kappa_ser", "fc_max_hz")


def dbm_per_hz_to_w_per_hz(dbm):
    return 1e-3 * 10.0 ** (dbm / 10.0)


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


@dataclass
class SystemConfig:
    """Immutable-by-convention bundle of all physical and control parameters."""

    n_devices: int
    n_cores: int
    bandwidth_hz: float            # total uplink bandwidth omega
    slot_seconds: float            # slot length tau
    noise_psd_w_per_hz: float      # N0, linear
    pathloss_const: float          # g0 at ref_distance_m, linear
    pathloss_exp: float            # theta
    ref_distance_m: float          # d0
    distance_m: np.ndarray         # (N,)
    cycles_per_bit: np.ndarray     # (N,) L_i
    kappa_mob: np.ndarray          # (N,) effective switched capacitance
    f_max_hz: np.ndarray           # (N,)
    p_max_w: np.ndarray            # (N,) transmit power cap
    weight: np.ndarray             # (N,) w_i >= 0 in the power objective
    arrival_max_bits: np.ndarray   # (N,) arrivals uniform on [0, A_max]
    kappa_ser: np.ndarray          # (M,)
    fc_max_hz: np.ndarray          # (M,)
    server_weight: float           # w_{N+1}
    control_v: float               # V, bits^2/W
    eps_a: float                   # minimum bandwidth fraction per device
    rng_seed: int
    source: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.n_devices < 1 or self.n_cores < 1:
            raise ValueError("need at least one device and one core")
        for name in _PER_DEVICE:
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (self.n_devices,):
                raise ValueError(f"{name} must have shape ({self.n_devices},)")
            setattr(self, name, arr)
        for name in _PER_CORE:
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (self.n_cores,):
                raise ValueError(f"{name} must have shape ({self.n_cores},)")
            setattr(self, name, arr)
        if not (self.bandwidth_hz > 0 and self.slot_seconds > 0
                and self.noise_psd_w_per_hz > 0 and self.pathloss_const > 0
                and self.ref_distance_m > 0):
            raise ValueError("bandwidth, slot length, noise PSD, path loss and "
                             "reference distance must be positive")
        if np.any(self.distance_m <= 0) or np.any(self.cycles_per_bit <= 0):
            raise ValueError("distances and cycle counts must be positive")
        if np.any(self.kappa_mob <= 0) or np.any(self.kappa_ser <= 0):
            raise ValueError("switched capacitances must be positive")
        if np.any(self.f_max_hz <= 0) or np.any(self.fc_max_hz <= 0):
            raise ValueError("frequency caps must be positive")
        if np.any(self.p_max_w <= 0):
            raise ValueError("transmit power caps must be positive")
        if np.any(self.weight < 0) or self.server_weight < 0:
            raise ValueError("power weights must be non-negative")
        if np.any(self.arrival_max_bits < 0):
            raise ValueError("arrival bounds must be non-negative")
        if self.control_v <= 0:
            raise ValueError("control_v must be positive")
        # the bandwidth floors must leave room for the residual allocation
        if not 0 < self.eps_a * self.n_devices < 1:
            raise ValueError("need 0 < n_devices * eps_a < 1")

    # --- derived quantities -------------------------------------------------

    @property
    def channel_const(self):
        """Per-device deterministic channel factor g0*(d0/d)^theta; Gamma_i is
        this times the unit-mean fading draw."""
        return self.pathloss_const * (self.ref_distance_m / self.distance_m) ** self.pathloss_exp

    @property
    def arrival_mean_bits(self):
        return 0.5 * self.arrival_max_bits

    def canonical_dict(self):
        """Plain-JSON form with linear units, used for hashing and echoing."""
        d = {
            "n_devices": self.n_devices,
            "n_cores": self.n_cores,
            "bandwidth_hz": self.bandwidth_hz,
            "slot_seconds": self.slot_seconds,
            "noise_psd_w_per_hz": self.noise_psd_w_per_hz,
            "pathloss_const": self.pathloss_const,
            "pathloss_exp": self.pathloss_exp,
            "ref_distance_m": self.ref_distance_m,
            "server_weight": self.server_weight,
            "control_v": self.control_v,
            "eps_a": self.eps_a,
            "rng_seed": self.rng_seed,
        }
        for name in _PER_DEVICE + _PER_CORE:
            d[name] = [float(x) for x in getattr(self, name)]
        return d

    def sha256(self):
        blob = json.dumps(self.canonical_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def replace(self, **kw):
        d = self.canonical_dict()
        d.update(kw)
        return config_from_dict(d)


def _broadcast(value, n, name):
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"{name}: expected scalar or length-{n} list")
    return arr


def config_from_dict(raw):
    """Build a SystemConfig from a plain dict, filling defaults.

    Accepts either linear keys (noise_psd_w_per_hz, pathloss_const) or the
    dB conveniences (noise_psd_dbm_per_hz, pathloss_const_db), not both.
    """
    d = dict(DEFAULTS)
    d.update(raw)
    unknown = set(d) - set(DEFAULTS) - {"noise_psd_w_per_hz", "pathloss_const"}
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")

    if "noise_psd_w_per_hz" in d:
        if "noise_psd_dbm_per_hz" in raw:
            raise ValueError("give noise PSD in dBm/Hz or W/Hz, not both")
        n0 = float(d["noise_psd_w_per_hz"])
    else:
        n0 = dbm_per_hz_to_w_per_hz(float(d["noise_psd_dbm_per_hz"]))
    if "pathloss_const" in d:
        if "pathloss_const_db" in raw:
            raise ValueError("give path loss in dB or linear, not both")
        g0 = float(d["pathloss_const"])
    else:
        g0 = db_to_linear(float(d["pathloss_const_db"]))

    n = int(d["n_devices"])
    m = int(d["n_cores"])
    kw = {
        "n_devices": n,
        "n_cores": m,
        "bandwidth_hz": float(d["bandwidth_hz"]),
        "slot_seconds": float(d["slot_seconds"]),
        "noise_psd_w_per_hz": n0,
        "pathloss_const": g0,
        "pathloss_exp": float(d["pathloss_exp"]),
        "ref_distance_m": float(d["ref_distance_m"]),
        "server_weight": float(d["server_weight"]),
        "control_v": float(d["control_v"]),
        "eps_a": float(d["eps_a"]),
        "rng_seed": int(d["rng_seed"]),
    }
    for name in _PER_DEVICE:
        kw[name] = _broadcast(d[name], n, name)
    for name in _PER_CORE:
        kw[name] = _broadcast(d[name], m, name)
    return SystemConfig(source=copy.deepcopy(raw), **kw)


def load_config(path=None, overrides=None):
    """Load JSON config (or defaults when path is None) and apply overrides.

    overrides is a list of "key=value" strings; values parse as JSON when
    possible, else stay strings. Keys must be top-level config fields.
    """
    raw = {}
    if path is not None:
        with open(path) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ValueError("config file must hold a JSON object")
    applied = {}
    for item in overrides or []:
        if "=" not in item:
            raise ValueError(f"override {item!r} is not key=value")
        key, _, text = item.partition("=")
        key = key.strip()
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        raw[key] = value
        applied[key] = value
    cfg = config_from_dict(raw)
    return cfg, applied
