"""System configuration for the D2D offloading model.

Config files are flat ``key = value`` text (``#`` starts a comment).  Keys use
the measurement units the scenario is naturally quoted in (mAh, dBm, MBytes,
mW); validation converts everything to SI once so the rest of the package
never touches unit conversions.  Each converted quantity also accepts an SI
key (e.g. ``noise_w`` instead of ``noise_dbm``), which is what ``save_config``
emits so that a save/load round trip reproduces the record bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace


class ConfigError(ValueError):
    """Raised for unknown keys, bad values, or inconsistent settings."""


@dataclass(frozen=True)
class SystemConfig:
    """Validated scenario description, SI units throughout."""

    user_density: float          # lambda, users per m^2
    collab_distance: float       # r_c, max D2D link length in m
    battery_fraction: float      # rho, battery share a helper spends per request
    bandwidth: float             # W in Hz
    noise_power: float           # sigma^2 in W
    pathloss_exponent: float     # alpha >= 2
    pathloss_gain: float         # K, linear gain at 1 m reference distance
    file_size: float             # F in bits (all files equal size)
    catalog_size: int            # N_f files
    zipf_exponent: float         # beta >= 0
    max_tx_power: float          # P_max in W
    tx_circuit_power: float      # P_c in W, while transmitting
    idle_power: float            # P_cI in W, while muted in a TDMA frame
    pa_efficiency: float         # eta in (0, 1]
    battery_capacity: float      # Q in coulomb
    operating_voltage: float     # V_0 in V
    cell_side: float             # square cell edge in m
    interference_truncation: float  # r_max in m, LOS interference cutoff
    cache_slots: int             # M files per device cache

    @property
    def battery_joules(self) -> float:
        """Total battery energy Q*V_0 in J."""
        return self.battery_capacity * self.operating_voltage

    @property
    def budget_joules(self) -> float:
        """Per-request energy allowance rho*Q*V_0 in J."""
        return self.battery_fraction * self.battery_joules

    @property
    def cell_area(self) -> float:
        return self.cell_side * self.cell_side


@dataclass(frozen=True)
class DerivedQuantities:
    """Frequently used combinations, computed once per operating point."""

    sigma0_sq: float             # sigma^2 / (P_t K), noise after channel normalization
    budget_joules: float         # rho*Q*V_0
    rate_exponent_coeff: float   # a = F ln2 / (W rho Q V_0 eta), 1/W
    cell_area: float             # m^2


# (field, natural-unit key, SI key, natural->SI). Conversion of None means the
# natural key already is SI.
_KEY_TABLE = [
    ("user_density", "user_density", None, None),
    ("collab_distance", "collab_distance_m", None, None),
    ("battery_fraction", "battery_fraction", None, None),
    ("bandwidth", "bandwidth_hz", None, None),
    ("noise_power", "noise_dbm", "noise_w", lambda v: 10.0 ** ((v - 30.0) / 10.0)),
    ("pathloss_exponent", "pathloss_exponent", None, None),
    ("pathloss_gain", "pathloss_gain_db", "pathloss_gain", lambda v: 10.0 ** (v / 10.0)),
    ("file_size", "file_size_mbytes", "file_size_bits", lambda v: v * 8e6),
    ("catalog_size", "catalog_size", None, None),
    ("zipf_exponent", "zipf_exponent", None, None),
    ("max_tx_power", "max_tx_power_mw", "max_tx_power_w", lambda v: v / 1e3),
    ("tx_circuit_power", "tx_circuit_power_mw", "tx_circuit_power_w", lambda v: v / 1e3),
    ("idle_power", "idle_power_mw", "idle_power_w", lambda v: v / 1e3),
    ("pa_efficiency", "pa_efficiency", None, None),
    ("battery_capacity", "battery_mah", "battery_coulomb", lambda v: v * 3.6),
    ("operating_voltage", "operating_voltage_v", None, None),
    ("cell_side", "cell_side_m", None, None),
    ("interference_truncation", "interference_truncation_m", None, None),
    ("cache_slots", "cache_slots", None, None),
]

_INT_FIELDS = {"catalog_size", "cache_slots"}

# Urban-macro style defaults: 500 m cell, 0.01 users/m^2, 20 MHz, -100 dBm
# noise, 200 mW power cap, 115.9/25 mW circuit/idle draw, 1800 mAh at 4 V,
# 1000-file catalog of 30 MByte items, Zipf 1.0, NLOS exponent 3.68 with
# -37.6 dB gain at 1 m.
DEFAULTS: dict[str, float] = {
    "user_density": 0.01,
    "collab_distance_m": 100.0,
    "battery_fraction": 0.01,
    "bandwidth_hz": 20e6,
    "noise_dbm": -100.0,
    "pathloss_exponent": 3.68,
    "pathloss_gain_db": -37.6,
    "file_size_mbytes": 30.0,
    "catalog_size": 1000,
    "zipf_exponent": 1.0,
    "max_tx_power_mw": 200.0,
    "tx_circuit_power_mw": 115.9,
    "idle_power_mw": 25.0,
    "pa_efficiency": 0.5,
    "battery_mah": 1800.0,
    "operating_voltage_v": 4.0,
    "cell_side_m": 500.0,
    "interference_truncation_m": 100.0,
    "cache_slots": 1,
}


def validate(raw: dict) -> SystemConfig:
    """Convert a raw key/value mapping into a checked :class:`SystemConfig`.

    Unknown keys, duplicate natural/SI keys for one field, missing fields and
    out-of-range values all raise :class:`ConfigError`.
    """
    known = {}
    for field, nat_key, si_key, conv in _KEY_TABLE:
        known[nat_key] = (field, conv)
        if si_key is not None:
            known[si_key] = (field, None)

    values: dict[str, float] = {}
    seen: dict[str, str] = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"unknown config key: {key!r}")
        field, conv = known[key]
        if field in seen:
            raise ConfigError(f"both {seen[field]!r} and {key!r} set {field}")
        seen[field] = key
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: not a number: {value!r}") from None
        values[field] = conv(value) if conv is not None else value

    missing = [f.name for f in fields(SystemConfig) if f.name not in values]
    if missing:
        raise ConfigError(f"missing config fields: {', '.join(missing)}")

    for name in _INT_FIELDS:
        if values[name] != int(values[name]):
            raise ConfigError(f"{name} must be an integer, got {values[name]}")
        values[name] = int(values[name])

    cfg = SystemConfig(**values)
    _check_ranges(cfg)
    return cfg


def _check_ranges(cfg: SystemConfig) -> None:
    positive = [
        "user_density", "collab_distance", "battery_fraction", "bandwidth",
        "noise_power", "pathloss_gain", "file_size", "max_tx_power",
        "tx_circuit_power", "pa_efficiency", "battery_capacity",
        "operating_voltage", "cell_side", "interference_truncation",
    ]
    for name in positive:
        if not getattr(cfg, name) > 0.0:
            raise ConfigError(f"{name} must be > 0, got {getattr(cfg, name)}")
    if cfg.idle_power < 0.0:
        raise ConfigError("idle_power must be >= 0")
    if cfg.zipf_exponent < 0.0:
        raise ConfigError("zipf_exponent must be >= 0")
    if cfg.pathloss_exponent < 2.0:
        raise ConfigError("pathloss_exponent must be >= 2")
    if cfg.pa_efficiency > 1.0:
        raise ConfigError("pa_efficiency must be <= 1")
    if cfg.catalog_size < 1:
        raise ConfigError("catalog_size must be >= 1")
    if not 1 <= cfg.cache_slots:
        raise ConfigError("cache_slots must be >= 1")
    if not all(math.isfinite(getattr(cfg, f.name)) for f in fields(SystemConfig)):
        raise ConfigError("all config values must be finite")


def derived(cfg: SystemConfig, tx_power: float,
            battery_fraction: float | None = None) -> DerivedQuantities:
    """Per-operating-point derived quantities for transmit power ``tx_power``.

    ``battery_fraction`` overrides ``cfg.battery_fraction`` (used by sweeps
    over rho).
    """
    if not tx_power > 0.0:
        raise ConfigError(f"tx_power must be > 0, got {tx_power}")
    rho = cfg.battery_fraction if battery_fraction is None else battery_fraction
    if not rho > 0.0:
        raise ConfigError(f"battery_fraction must be > 0, got {rho}")
    budget = rho * cfg.battery_joules
    a = cfg.file_size * math.log(2.0) / (cfg.bandwidth * budget * cfg.pa_efficiency)
    return DerivedQuantities(
        sigma0_sq=cfg.noise_power / (tx_power * cfg.pathloss_gain),
        budget_joules=budget,
        rate_exponent_coeff=a,
        cell_area=cfg.cell_area,
    )


def urban_defaults(**overrides) -> SystemConfig:
    """The default urban scenario, optionally with raw-key overrides."""
    raw = dict(DEFAULTS)
    raw.update(overrides)
    return validate(raw)


def with_updates(cfg: SystemConfig, **si_fields) -> SystemConfig:
    """Replace already-validated SI fields, re-running the range checks."""
    for name in _INT_FIELDS & si_fields.keys():
        value = si_fields[name]
        if value != int(value):
            raise ConfigError(f"{name} must be an integer, got {value}")
        si_fields[name] = int(value)
    new = replace(cfg, **si_fields)
    _check_ranges(new)
    return new


def load_config(path: str) -> dict:
    """Read a flat ``key = value`` file into a raw dict (values are strings)."""
    raw: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            if key in raw:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            raw[key] = value.strip()
    return raw


def save_config(cfg: SystemConfig, path: str) -> None:
    """Write ``cfg`` so that ``validate(load_config(path))`` reproduces it."""
    lines = []
    for field, nat_key, si_key, conv in _KEY_TABLE:
        key = si_key if conv is not None else nat_key
        value = getattr(cfg, field)
        text = str(int(value)) if field in _INT_FIELDS else repr(float(value))
        lines.append(f"{key} = {text}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def apply_overrides(raw: dict, assignments: list[str]) -> dict:
    """Apply ``key=value`` strings (CLI ``--set``) on top of a raw mapping."""
    out = dict(raw)
    for item in assignments:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        out[key.strip()] = value.strip()
    return out
