"""System parameters for the cell-free V-CRAN planner.

Every field name carries its unit (``_hz``, ``_s``, ``_w``, ``_m``, ``_db``,
``_gops``, ``_bps``).  Defaults reproduce the small-scale simulation setup:
16 APs with 4 antennas, 8 UEs, 4 DUs, 20 MHz OFDM and the pico-cell power
figures.  Values the model needs but which have no published number
(noise figure, pathloss constants, "other" GOPS) are marked as assumptions.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Raised when a configuration fails to parse or validate."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


@dataclass(frozen=True)
class SystemConfig:
    # network size
    L: int = 16
    K: int = 8
    N: int = 4
    W: int = 4

    # OFDM numerology
    fs_hz: float = 30.72e6
    bandwidth_hz: float = 20e6
    n_dft: int = 2048
    n_used: int = 1200
    symbol_time_s: float = 71.4e-6
    n_smooth: int = 12
    n_slot: int = 16
    tau_p: int = 8
    area_side_m: float = 1000.0

    # radio site
    p_ap0_per_antenna_w: float = 6.8
    delta_tr: float = 4.0
    p_max_w: float = 1.0
    p_pilot_w: float = 0.1
    p_onu_w: float = 7.7

    # DU cloud
    p_disp_w: float = 120.0
    sigma_cool: float = 0.9
    p_olt_w: float = 20.0
    p_proc0_w: float = 20.8
    delta_proc_w: float = 74.0
    c_max_gops: float = 180.0
    r_max_bps: float = 10e9
    n_bits: int = 12

    # assumption: order-of-magnitude placeholders
    c_other_ap_gops: float = 10.0
    c_other_ue_gops: float = 1.0
    f_fixed_gops: float = 20.0

    # noise; noise_power_w overrides the thermal computation when set
    noise_psd_dbm_hz: float = -174.0
    noise_figure_db: float = 7.0
    noise_power_w: float | None = None

    # channel model (assumption: 3GPP-style micro-cell constants)
    pathloss_ref_db: float = -30.5
    pathloss_slope_db: float = 36.7
    height_diff_m: float = 10.0
    shadowing_std_db: float = 4.0
    angular_std_deg: float = 15.0
    min_distance_m: float = 1.0

    # LP-MMSE regularization weight; None means p_pilot_w
    p_ul_w: float | None = None

    # rate = SE * B, optionally derated by n_used / n_dft
    derate_bandwidth: bool = False

    mc_realizations: int = 1000
    rng_seed: int = 0

    def __post_init__(self):
        validate(self)

    @property
    def tau_c(self) -> int:
        return self.n_smooth * self.n_slot

    @property
    def tau_d(self) -> int:
        return self.tau_c - self.tau_p

    @property
    def p_ap0_w(self) -> float:
        return self.p_ap0_per_antenna_w * self.N

    @property
    def sigma2(self) -> float:
        """Receiver noise power in W."""
        if self.noise_power_w is not None:
            return float(self.noise_power_w)
        dbm = self.noise_psd_dbm_hz + 10 * math.log10(self.bandwidth_hz) + self.noise_figure_db
        return 10 ** ((dbm - 30) / 10)

    @property
    def p_ul(self) -> float:
        return self.p_pilot_w if self.p_ul_w is None else float(self.p_ul_w)

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


_NONNEG = (
    "p_ap0_per_antenna_w", "delta_tr", "p_max_w", "p_pilot_w", "p_onu_w",
    "p_disp_w", "p_olt_w", "p_proc0_w", "delta_proc_w",
    "c_other_ap_gops", "c_other_ue_gops", "f_fixed_gops",
    "shadowing_std_db", "angular_std_deg", "height_diff_m",
)
_POSITIVE = (
    "L", "K", "N", "W", "fs_hz", "bandwidth_hz", "n_dft", "n_used", "symbol_time_s",
    "n_smooth", "n_slot", "tau_p", "area_side_m", "c_max_gops", "r_max_bps",
    "n_bits", "mc_realizations", "min_distance_m",
)


def validate(cfg: SystemConfig) -> None:
    for name in _POSITIVE:
        if not getattr(cfg, name) > 0:
            raise ConfigError("must be positive", name)
    for name in _NONNEG:
        if not getattr(cfg, name) >= 0:
            raise ConfigError("must be nonnegative", name)
    if not 0 < cfg.sigma_cool <= 1:
        raise ConfigError("must lie in (0, 1]", "sigma_cool")
    if cfg.n_used > cfg.n_dft:
        raise ConfigError("exceeds n_dft", "n_used")
    if cfg.tau_p >= cfg.tau_c:
        raise ConfigError(f"must be below tau_c={cfg.tau_c} so that tau_d > 0", "tau_p")
    if cfg.noise_power_w is not None and not cfg.noise_power_w > 0:
        raise ConfigError("must be positive", "noise_power_w")
    if cfg.p_ul_w is not None and not cfg.p_ul_w > 0:
        raise ConfigError("must be positive", "p_ul_w")
    if cfg.r_max_bps < fronthaul_rate_bps(cfg):
        raise ConfigError("a single AP's fronthaul rate exceeds the wavelength capacity", "r_max_bps")


_FIELDS = {f.name: f for f in dataclasses.fields(SystemConfig)}


def config_from_dict(data: dict[str, Any]) -> SystemConfig:
    unknown = sorted(set(data) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown field(s) {unknown}")
    kwargs = {}
    for name, value in data.items():
        kind = _FIELDS[name].type
        if value is None:
            if "None" not in str(kind):
                raise ConfigError("may not be null", name)
        elif kind == "int":
            if isinstance(value, bool) or not float(value).is_integer():
                raise ConfigError(f"expected an integer, got {value!r}", name)
            value = int(value)
        elif kind == "bool":
            if not isinstance(value, bool):
                raise ConfigError(f"expected a boolean, got {value!r}", name)
        else:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"expected a number, got {value!r}", name)
            value = float(value)
        kwargs[name] = value
    return SystemConfig(**kwargs)


def load_config(path: str | Path) -> SystemConfig:
    """Read a JSON config file; missing fields take the default values.

    An empty file (or ``{}``) yields the default configuration.
    """
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        return SystemConfig()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return config_from_dict(data)


def save_config(cfg: SystemConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


def fronthaul_rate_bps(cfg: SystemConfig) -> float:
    """Per-AP fronthaul rate under the RF/PHY split: 2 * f_s * N_bits * N."""
    return 2.0 * cfg.fs_hz * cfg.n_bits * cfg.N


@dataclass(frozen=True)
class DerivedParams:
    tau_c: int
    tau_d: int
    R_fronthaul: float
    W_max: int
    Z_coeff: float
    X_coeff: float
    F_coeff: float
    P_l: float


def derive(cfg: SystemConfig) -> DerivedParams:
    from cfvcran.cost_models import gops_coefficients

    r_fh = fronthaul_rate_bps(cfg)
    w_max = math.floor(cfg.r_max_bps / r_fh)
    Z, X, F = gops_coefficients(cfg)
    P_l = cfg.p_ap0_w + cfg.p_onu_w + cfg.delta_proc_w * Z / (cfg.c_max_gops * cfg.sigma_cool)
    return DerivedParams(
        tau_c=cfg.tau_c,
        tau_d=cfg.tau_d,
        R_fronthaul=r_fh,
        W_max=w_max,
        Z_coeff=Z,
        X_coeff=X,
        F_coeff=F,
        P_l=P_l,
    )
