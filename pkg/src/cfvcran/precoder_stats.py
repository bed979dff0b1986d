"""LP-MMSE precoding and the Monte Carlo SINR coefficients.

The downlink signal at UE k is sum_l h_kl^T x_l.  A precoder w_il is
therefore the complex conjugate of the LP-MMSE combining vector v_il, so
that h_kl^T w_kl is coherent and its mean is real and nonnegative.

With rho_k the vector of square-root powers of UE k over the APs,

    SINR_k = (b_k^T rho_k)^2 / (sum_i rho_i^T C_ki rho_i + sigma^2)

where b_k[l] = E{h_kl^T w_kl} and
C_ki[l, r] = E{h_kl^T w_il (h_kr^T w_ir)^*} - [i == k] b_k[l] b_k[r].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from cfvcran.propagation import ChannelBatch, CorrelationSet, EstimateBatch, PilotAssignment


@dataclass(frozen=True)
class PrecoderBatch:
    w: np.ndarray  # (M, K, L, N): precoder of UE i at AP l per realization
    norm2: np.ndarray  # (K, L): E{||v_il||^2} used for the normalization
    usable: np.ndarray  # (K, L) bool: False when v_il vanished in every realization


@dataclass
class PrecoderStatistics:
    b: np.ndarray  # (K, L) real, >= 0
    C: np.ndarray  # (K, K, L, L) real symmetric PSD, C[k, i]
    noise_power: float
    M: int = 0
    b_imag: np.ndarray | None = None  # imaginary residue of the raw means
    b_stderr: np.ndarray | None = None
    repair: np.ndarray | None = field(default=None, repr=False)  # (K, K) relative Frobenius change

    @property
    def K(self) -> int:
        return self.b.shape[0]

    @property
    def L(self) -> int:
        return self.b.shape[1]

    def scaled(self, alpha: float) -> "PrecoderStatistics":
        return PrecoderStatistics(b=alpha * self.b, C=alpha**2 * self.C, noise_power=self.noise_power, M=self.M)

    def save(self, path: str | Path) -> None:
        """Write an ``.npz`` archive with arrays b, C, noise_power and M."""
        np.savez(Path(path), b=self.b, C=self.C, noise_power=self.noise_power, M=self.M)

    @classmethod
    def load(cls, path: str | Path) -> "PrecoderStatistics":
        with np.load(Path(path)) as data:
            return cls(b=data["b"], C=data["C"], noise_power=float(data["noise_power"]), M=int(data["M"]))


def strongest_per_pilot(beta: np.ndarray, pilots: PilotAssignment) -> list[np.ndarray]:
    """For each AP, the UE with the largest gain on every used pilot."""
    K, L = beta.shape
    sets = []
    for l in range(L):
        chosen = []
        for t in np.unique(pilots.pilot_of):
            users = np.flatnonzero(pilots.pilot_of == t)
            chosen.append(users[np.argmax(beta[users, l])])
        sets.append(np.array(sorted(chosen)))
    return sets


def lpmmse_precoders(
    est: EstimateBatch,
    corr: CorrelationSet,
    pilots: PilotAssignment,
    p_ul: float,
    noise_power: float,
) -> PrecoderBatch:
    assert noise_power > 0, "regularized inverse needs a positive noise power"
    hhat = est.hhat
    M, K, L, N = hhat.shape
    S = strongest_per_pilot(corr.beta, pilots)
    v = np.zeros_like(hhat)
    eye = np.eye(N)
    for l in range(L):
        for i in range(K):
            group = np.union1d(S[l], [i])
            H = hhat[:, group, l, :]  # (M, |group|, N)
            A = p_ul * np.einsum("mga,mgb->mab", H, H.conj())
            A += p_ul * est.C_err[group, l].sum(axis=0) + noise_power * eye
            v[:, i, l] = np.linalg.solve(A, hhat[:, i, l, :, None])[..., 0]
    norm2 = np.mean(np.sum(np.abs(v) ** 2, axis=-1), axis=0)
    usable = norm2 > 0
    scale = np.where(usable, 1.0 / np.sqrt(np.where(usable, norm2, 1.0)), 0.0)
    w = v.conj() * scale[None, :, :, None]
    return PrecoderBatch(w=w, norm2=norm2, usable=usable)


def _psd_repair(S: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(S)
    vals = np.clip(vals, 0.0, None)
    out = (vecs * vals) @ vecs.T
    return 0.5 * (out + out.T)


def estimate_stats(batch: ChannelBatch, prec: PrecoderBatch, noise_power: float) -> PrecoderStatistics:
    h, w = batch.h, prec.w
    if h.shape != w.shape:
        raise ValueError(f"channel batch {h.shape} and precoder batch {w.shape} are not aligned")
    M, K, L, _ = h.shape
    # g[m, k, i, l] = h_kl^T w_il
    g = np.einsum("mkla,mila->mkil", h, w)
    diag = g[:, np.arange(K), np.arange(K), :]  # (M, K, L)
    b_raw = diag.mean(axis=0)
    b = np.clip(b_raw.real, 0.0, None)
    # E{g_l g_r^*} over realizations
    second = np.einsum("mkil,mkir->kilr", g, g.conj()) / M
    second[np.arange(K), np.arange(K)] -= np.einsum("kl,kr->klr", b_raw, b_raw.conj())
    C = np.empty((K, K, L, L))
    repair = np.zeros((K, K))
    for k in range(K):
        for i in range(K):
            sym = (0.5 * (second[k, i] + second[k, i].conj().T)).real
            fixed = _psd_repair(sym)
            nrm = np.linalg.norm(sym)
            repair[k, i] = np.linalg.norm(fixed - sym) / nrm if nrm > 0 else 0.0
            C[k, i] = fixed
    stderr = diag.real.std(axis=0, ddof=1) / math.sqrt(M) if M > 1 else None
    return PrecoderStatistics(
        b=b, C=C, noise_power=noise_power, M=M, b_imag=b_raw.imag, b_stderr=stderr, repair=repair
    )


def sinr_value(stats: PrecoderStatistics, rho: np.ndarray, k: int) -> float:
    """SINR of UE k for square-root powers ``rho`` (K x L)."""
    rho = np.asarray(rho, dtype=float)
    signal = float(stats.b[k] @ rho[k]) ** 2
    interference = float(np.einsum("il,ilr,ir->", rho, stats.C[k], rho))
    return signal / (interference + stats.noise_power)


def se_value(sinr: float, tau_d: int, tau_c: int) -> float:
    if sinr < 0:
        raise ValueError("SINR must be nonnegative")
    return tau_d / tau_c * math.log2(1.0 + sinr)


def sinr_target(se: float, tau_d: int, tau_c: int) -> float:
    """Inverse of se_value: the SINR that yields spectral efficiency ``se``."""
    if se < 0:
        raise ValueError("SE target must be nonnegative")
    return 2.0 ** (se * tau_c / tau_d) - 1.0


def compute_statistics(cfg, topo, M: int | None = None, seed: int | None = None):
    """Run the full physical-layer chain for one setup.

    Returns (corr, stats).
    """
    from cfvcran import propagation as prop

    M = cfg.mc_realizations if M is None else M
    seed = topo.seed if seed is None else seed
    corr = prop.correlation_set(topo, cfg)
    pilots = prop.assign_pilots(cfg.K, cfg.tau_p)
    batch = prop.sample_channels(corr, M, seed)
    est = prop.mmse_estimate(batch, pilots, corr, cfg.p_pilot_w, cfg.tau_p, cfg.sigma2)
    prec = lpmmse_precoders(est, corr, pilots, cfg.p_ul, cfg.sigma2)
    return corr, estimate_stats(batch, prec, cfg.sigma2)
