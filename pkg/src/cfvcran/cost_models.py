"""Cloud GOPS and network power models.

All GOPS figures are in giga-operations per second and powers in watts.
The per-AP precoding load is affine in the number of UEs the AP serves,
which is what makes the cloud load linear in the binary activity
variables: ``Z * sum(z) + X * sum(x) + F``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def filter_gops(cfg) -> float:
    """Polyphase baseband filtering (10 taps) for one AP."""
    return 40.0 * cfg.N * cfg.fs_hz / 1e9


def dft_gops(cfg) -> float:
    n_dft = cfg.n_dft
    if n_dft < 1 or n_dft & (n_dft - 1):
        raise ValueError(f"n_dft must be a power of two, got {n_dft}")
    return 8.0 * cfg.N * n_dft * math.log2(n_dft) / (cfg.symbol_time_s * 1e9)


def _kappa(cfg) -> float:
    return cfg.n_used / (cfg.symbol_time_s * cfg.tau_c * 1e9)


@dataclass
class PrecodingGops:
    channel_estimation: float
    precoding: float
    reciprocity: float
    computation: float

    @property
    def total(self) -> float:
        return self.channel_estimation + self.precoding + self.reciprocity + self.computation


def precoding_gops(cfg, served_count: int) -> PrecodingGops:
    """LP-MMSE precoding load of one AP serving ``served_count`` UEs.

    Four terms: channel estimation, precoding application (scaled by the
    downlink share of the coherence block), reciprocity calibration and
    precoder computation.
    """
    if not 0 <= served_count <= cfg.K:
        raise ValueError(f"served_count must lie in [0, {cfg.K}], got {served_count}")
    N, tp, s = cfg.N, cfg.tau_p, served_count
    kappa = _kappa(cfg)
    return PrecodingGops(
        channel_estimation=kappa * (8 * N * tp**2 + 8 * N**2 * (tp + s)),
        precoding=kappa * cfg.tau_d * 8 * N * s,
        reciprocity=kappa * 8 * N * s,
        computation=kappa * ((4 * N**2 + 4 * N) * tp + 8 * N**2 * s + 8 * (N**3 - N) / 3),
    )


def gops_coefficients(cfg) -> tuple[float, float, float]:
    """Return (Z, X, F): load per active AP, per served UE-AP pair, fixed."""
    base = precoding_gops(cfg, 0).total
    per_ue = precoding_gops(cfg, 1).total - base if cfg.K >= 1 else 0.0
    Z = filter_gops(cfg) + dft_gops(cfg) + cfg.c_other_ap_gops + base
    X = per_ue + cfg.c_other_ue_gops
    return Z, X, cfg.f_fixed_gops


@dataclass
class GopsBreakdown:
    filter: np.ndarray
    dft: np.ndarray
    prec_channel_est: np.ndarray
    prec_apply: np.ndarray
    prec_reciprocity: np.ndarray
    prec_compute: np.ndarray
    other_ap: np.ndarray
    other_ue: np.ndarray  # (K, L)
    fixed: float
    total: float = field(init=False)

    def __post_init__(self):
        self.total = float(
            sum(
                np.sum(part)
                for part in (
                    self.filter, self.dft, self.prec_channel_est, self.prec_apply,
                    self.prec_reciprocity, self.prec_compute, self.other_ap, self.other_ue,
                )
            )
            + self.fixed
        )


def cloud_gops(cfg, x, z) -> GopsBreakdown:
    """Term-by-term cloud load for activity pattern ``x`` (K x L) and ``z`` (L,)."""
    x = np.asarray(x, dtype=float).reshape(cfg.K, cfg.L)
    z = np.asarray(z, dtype=float).reshape(cfg.L)
    served = np.rint(x.sum(axis=0)).astype(int)
    parts = [precoding_gops(cfg, int(s)) for s in served]
    return GopsBreakdown(
        filter=z * filter_gops(cfg),
        dft=z * dft_gops(cfg),
        prec_channel_est=z * np.array([p.channel_estimation for p in parts]),
        prec_apply=z * np.array([p.precoding for p in parts]),
        prec_reciprocity=z * np.array([p.reciprocity for p in parts]),
        prec_compute=z * np.array([p.computation for p in parts]),
        other_ap=z * cfg.c_other_ap_gops,
        other_ue=x * cfg.c_other_ue_gops,
        fixed=float(cfg.f_fixed_gops),
    )


def ap_power(z_l, rho_row, cfg) -> float:
    rho_row = np.asarray(rho_row, dtype=float)
    return float(z_l) * cfg.p_ap0_w + cfg.delta_tr * float(np.sum(rho_row**2))


class CapacityError(ValueError):
    pass


def cloud_power(l_active, d_active, gops_total, cfg) -> float:
    """DU cloud power: dispatcher, line cards, DU idle and load-dependent parts."""
    if gops_total > cfg.W * cfg.c_max_gops * (1 + 1e-12) or gops_total < 0:
        raise CapacityError(
            f"cloud load {gops_total:.6g} GOPS outside [0, {cfg.W * cfg.c_max_gops:g}]"
        )
    if not (0 <= l_active <= cfg.W and 0 <= d_active <= cfg.W):
        raise CapacityError(f"active LC/DU counts ({l_active}, {d_active}) outside [0, {cfg.W}]")
    return (
        cfg.p_disp_w
        + cfg.p_olt_w * l_active
        + cfg.p_proc0_w * d_active
        + cfg.delta_proc_w * gops_total / cfg.c_max_gops
    ) / cfg.sigma_cool


@dataclass
class PowerBreakdown:
    ran: float
    fronthaul: float
    cloud_processing: float
    dispatcher: float

    @property
    def total(self) -> float:
        return self.ran + self.fronthaul + self.cloud_processing + self.dispatcher

    @property
    def cloud(self) -> float:
        """Cloud share as plotted in the breakdown figure (dispatcher included)."""
        return self.cloud_processing + self.dispatcher

    def rows(self) -> list[tuple[str, float]]:
        return [
            ("ran", self.ran),
            ("fronthaul", self.fronthaul),
            ("cloud_processing", self.cloud_processing),
            ("dispatcher", self.dispatcher),
            ("total", self.total),
        ]


def total_power(plan, cfg) -> PowerBreakdown:
    """Network power of a plan, evaluated term by term.

    ``plan`` needs ``x`` (K x L), ``z`` (L,), ``ell`` and ``d`` (W,) and
    ``rho`` (K x L).  The cloud load is the direct per-AP sum, not the
    Z/X/F shortcut.
    """
    x = np.asarray(plan.x, dtype=float)
    z = np.asarray(plan.z, dtype=float)
    rho = np.asarray(plan.rho, dtype=float)
    w = np.arange(1, cfg.W + 1)
    n_lc = float(w @ np.asarray(plan.ell, dtype=float))
    n_du = float(w @ np.asarray(plan.d, dtype=float))
    gops = cloud_gops(cfg, x, z).total
    ran = sum(ap_power(z[l], rho[:, l], cfg) for l in range(cfg.L))
    dispatcher = cfg.p_disp_w / cfg.sigma_cool
    cloud_power(n_lc, n_du, gops, cfg)  # capacity check
    cloud = (cfg.p_proc0_w * n_du + cfg.delta_proc_w * gops / cfg.c_max_gops) / cfg.sigma_cool
    return PowerBreakdown(
        ran=ran,
        fronthaul=cfg.p_onu_w * float(z.sum()) + cfg.p_olt_w * n_lc / cfg.sigma_cool,
        cloud_processing=cloud,
        dispatcher=dispatcher,
    )
