"""Topologies, large-scale fading, spatial correlation and MMSE estimation.

Channels follow correlated Rayleigh fading, h_kl ~ CN(0, R_kl), independent
across UE-AP pairs.  R_kl comes from a Gaussian local-scattering model on a
half-wavelength uniform linear array and is scaled so that
trace(R_kl) / N equals the large-scale gain beta_kl.

Array conventions (k = UE, l = AP, m = realization, n = antenna):
    R      (K, L, N, N) complex
    beta   (K, L)       linear gain
    h      (M, K, L, N) complex
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

PSD_CLIP_RTOL = 1e-10


@dataclass(frozen=True)
class Topology:
    ap_positions: np.ndarray  # (L, 2) metres
    ue_positions: np.ndarray  # (K, 2) metres
    seed: int


@dataclass(frozen=True)
class CorrelationSet:
    R: np.ndarray
    beta: np.ndarray

    @property
    def K(self) -> int:
        return self.R.shape[0]

    @property
    def L(self) -> int:
        return self.R.shape[1]

    @property
    def N(self) -> int:
        return self.R.shape[2]


@dataclass(frozen=True)
class PilotAssignment:
    pilot_of: np.ndarray  # (K,) ints in [0, tau_p)
    tau_p: int

    def sharers(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.pilot_of == self.pilot_of[k])


@dataclass(frozen=True)
class ChannelBatch:
    h: np.ndarray  # (M, K, L, N)
    seed: int

    @property
    def M(self) -> int:
        return self.h.shape[0]


@dataclass(frozen=True)
class EstimateBatch:
    hhat: np.ndarray  # (M, K, L, N)
    C_err: np.ndarray  # (K, L, N, N)


def generate_topology(cfg, seed: int) -> Topology:
    rng = np.random.default_rng(seed)
    side = cfg.area_side_m
    aps = rng.uniform(0.0, side, size=(cfg.L, 2))
    ues = rng.uniform(0.0, side, size=(cfg.K, 2))
    return Topology(ap_positions=aps, ue_positions=ues, seed=seed)


def distances(topo: Topology, height_diff_m: float, min_distance_m: float = 1.0) -> np.ndarray:
    """3-D UE-AP distances (K, L) with a floor at ``min_distance_m``."""
    diff = topo.ue_positions[:, None, :] - topo.ap_positions[None, :, :]
    d = np.sqrt(np.sum(diff**2, axis=-1) + height_diff_m**2)
    return np.maximum(d, min_distance_m)


def pathloss_db(d, cfg) -> np.ndarray:
    return cfg.pathloss_ref_db - cfg.pathloss_slope_db * np.log10(d)


def large_scale(topo: Topology, cfg, rng: np.random.Generator | None = None) -> np.ndarray:
    """Channel gains beta (K, L) in dB: pathloss plus independent log-normal shadowing."""
    d = distances(topo, cfg.height_diff_m, cfg.min_distance_m)
    gain_db = pathloss_db(d, cfg)
    if cfg.shadowing_std_db > 0:
        if rng is None:
            rng = np.random.default_rng([topo.seed, 1])
        gain_db = gain_db + cfg.shadowing_std_db * rng.standard_normal(gain_db.shape)
    return gain_db


def steering_vector(theta: float, N: int) -> np.ndarray:
    return np.exp(1j * np.pi * np.arange(N) * np.sin(theta))


_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite.hermgauss(200)


def correlation_matrix(nominal_angle: float, angular_std: float, N: int, beta: float) -> np.ndarray:
    """Gaussian local-scattering correlation matrix of a half-wavelength ULA.

    [R]_{m,n} = beta * E{exp(j*pi*(m - n)*sin(theta + delta))},
    delta ~ N(0, angular_std^2), evaluated with Gauss-Hermite quadrature.
    """
    if angular_std == 0:
        a = steering_vector(nominal_angle, N)
        return beta * np.outer(a, a.conj())
    delta = np.sqrt(2.0) * angular_std * _GH_NODES
    weights = _GH_WEIGHTS / np.sqrt(np.pi)
    lags = np.arange(N)
    # first column of the Toeplitz matrix: lag m - n >= 0
    col = np.exp(1j * np.pi * lags[:, None] * np.sin(nominal_angle + delta)[None, :]) @ weights
    idx = lags[:, None] - lags[None, :]
    R = np.where(idx >= 0, col[np.abs(idx)], col[np.abs(idx)].conj())
    R = 0.5 * (R + R.conj().T)
    return beta * R / np.real(R[0, 0])


def correlation_set(topo: Topology, cfg, gain_db: np.ndarray | None = None) -> CorrelationSet:
    if gain_db is None:
        gain_db = large_scale(topo, cfg)
    beta = 10 ** (gain_db / 10)
    diff = topo.ue_positions[:, None, :] - topo.ap_positions[None, :, :]
    angles = np.arctan2(diff[..., 1], diff[..., 0])
    std = np.deg2rad(cfg.angular_std_deg)
    K, L = beta.shape
    R = np.empty((K, L, cfg.N, cfg.N), dtype=complex)
    for k in range(K):
        for l in range(L):
            R[k, l] = correlation_matrix(angles[k, l], std, cfg.N, beta[k, l])
    beta = np.real(np.trace(R, axis1=-2, axis2=-1)) / cfg.N
    return CorrelationSet(R=R, beta=beta)


def assign_pilots(K: int, tau_p: int) -> PilotAssignment:
    if tau_p < 1:
        raise ValueError("tau_p must be at least 1")
    return PilotAssignment(pilot_of=np.arange(K) % tau_p, tau_p=tau_p)


def psd_sqrt(R: np.ndarray) -> np.ndarray:
    """Hermitian square root with negative eigenvalues clipped to zero."""
    vals, vecs = np.linalg.eigh(R)
    floor = PSD_CLIP_RTOL * max(vals.max(initial=0.0), 0.0)
    vals = np.where(vals < floor, 0.0, vals)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_channels(corr: CorrelationSet, M: int, seed: int) -> ChannelBatch:
    rng = np.random.default_rng([seed, 2])
    K, L, N = corr.K, corr.L, corr.N
    g = complex_normal(rng, (M, K, L, N))
    sq = np.array([[psd_sqrt(corr.R[k, l]) for l in range(L)] for k in range(K)])
    h = np.einsum("klab,mklb->mkla", sq, g)
    return ChannelBatch(h=h, seed=seed)


def mmse_estimate(
    batch: ChannelBatch,
    pilots: PilotAssignment,
    corr: CorrelationSet,
    p_pilot: float,
    tau_p: int,
    noise_power: float,
    seed: int | None = None,
) -> EstimateBatch:
    """MMSE estimates from the received pilot signals.

    At AP l, pilot t: y = sum_{i on t} sqrt(p) * tau_p * h_il + n with
    n ~ CN(0, tau_p * sigma^2 I), and hhat_kl = sqrt(p) R_kl Psi^{-1} y with
    Psi = sum_{i on t} p * tau_p * R_il + sigma^2 I.
    """
    assert noise_power > 0, "MMSE estimation needs a positive noise power"
    M, K, L, N = batch.h.shape
    rng = np.random.default_rng([batch.seed if seed is None else seed, 3])
    noise = np.sqrt(tau_p * noise_power) * complex_normal(rng, (M, tau_p, L, N))
    hhat = np.zeros_like(batch.h)
    C_err = np.zeros((K, L, N, N), dtype=complex)
    eye = np.eye(N)
    sp = np.sqrt(p_pilot)
    for t in range(tau_p):
        users = np.flatnonzero(pilots.pilot_of == t)
        if users.size == 0:
            continue
        y = sp * tau_p * batch.h[:, users].sum(axis=1) + noise[:, t]  # (M, L, N)
        for l in range(L):
            Psi = p_pilot * tau_p * corr.R[users, l].sum(axis=0) + noise_power * eye
            Psi_inv = np.linalg.inv(Psi)
            for k in users:
                RPsi = corr.R[k, l] @ Psi_inv
                hhat[:, k, l] = sp * y[:, l] @ RPsi.T
                C = corr.R[k, l] - p_pilot * tau_p * RPsi @ corr.R[k, l]
                C_err[k, l] = 0.5 * (C + C.conj().T)
    return EstimateBatch(hhat=hhat, C_err=C_err)


def dump_topology_csv(topo: Topology, beta_db: np.ndarray, path: str | Path) -> None:
    """Rows: kind (ap|ue), index, x_m, y_m, then beta_db to every AP for UE rows."""
    path = Path(path)
    L = topo.ap_positions.shape[0]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "index", "x_m", "y_m"] + [f"beta_db_ap{l}" for l in range(L)])
        for l, (x, y) in enumerate(topo.ap_positions):
            writer.writerow(["ap", l, repr(float(x)), repr(float(y))] + [""] * L)
        for k, (x, y) in enumerate(topo.ue_positions):
            writer.writerow(["ue", k, repr(float(x)), repr(float(y))] + [repr(float(v)) for v in beta_db[k]])


def load_topology_csv(path: str | Path, seed: int = -1) -> tuple[Topology, np.ndarray]:
    aps, ues, beta = [], [], []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            point = (float(row["x_m"]), float(row["y_m"]))
            if row["kind"] == "ap":
                aps.append(point)
            else:
                ues.append(point)
                beta.append([float(v) for k, v in row.items() if k.startswith("beta_db_ap")])
    topo = Topology(ap_positions=np.array(aps), ue_positions=np.array(ues), seed=seed)
    return topo, np.array(beta)
