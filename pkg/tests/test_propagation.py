import numpy as np
import pytest
from scipy import integrate

from cfvcran import propagation as prop
from cfvcran.sysconfig import SystemConfig

CFG = SystemConfig(L=6, K=4, N=4, tau_p=4)


def test_topology_support_and_determinism():
    a = prop.generate_topology(CFG, 11)
    b = prop.generate_topology(CFG, 11)
    c = prop.generate_topology(CFG, 12)
    assert a.ap_positions.shape == (6, 2) and a.ue_positions.shape == (4, 2)
    for pts in (a.ap_positions, a.ue_positions):
        assert np.all((pts >= 0) & (pts <= 1000))
    np.testing.assert_array_equal(a.ap_positions, b.ap_positions)
    np.testing.assert_array_equal(a.ue_positions, b.ue_positions)
    assert not np.array_equal(a.ap_positions, c.ap_positions)


def test_pathloss_values():
    assert prop.pathloss_db(1.0, CFG) == pytest.approx(-30.5)
    assert prop.pathloss_db(100.0, CFG) == pytest.approx(-103.9)


def test_large_scale_without_shadowing_is_pathloss():
    cfg = CFG.replace(shadowing_std_db=0.0)
    topo = prop.generate_topology(cfg, 3)
    g1 = prop.large_scale(topo, cfg)
    g2 = prop.large_scale(topo, cfg, rng=np.random.default_rng(99))
    np.testing.assert_array_equal(g1, g2)
    d = prop.distances(topo, 10.0)
    np.testing.assert_allclose(g1, -30.5 - 36.7 * np.log10(d), rtol=0, atol=1e-12)


def test_distance_floor():
    topo = prop.Topology(np.zeros((1, 2)), np.zeros((1, 2)), 0)
    assert prop.distances(topo, 0.0, 1.0)[0, 0] == 1.0
    assert prop.distances(topo, 10.0, 1.0)[0, 0] == 10.0


def test_shadowing_statistics():
    cfg = SystemConfig(L=40, K=50)
    topo = prop.generate_topology(cfg, 1)
    shadow = prop.large_scale(topo, cfg) - prop.large_scale(topo, cfg.replace(shadowing_std_db=0.0))
    assert abs(shadow.mean()) < 5 * 4 / np.sqrt(shadow.size)
    assert shadow.std() == pytest.approx(4.0, rel=0.05)


def test_correlation_trace_and_hermitian():
    R = prop.correlation_matrix(0.4, np.deg2rad(15), 6, 2.5)
    assert np.allclose(R, R.conj().T, atol=1e-12)
    assert np.trace(R).real == pytest.approx(6 * 2.5, rel=1e-12)
    assert np.linalg.eigvalsh(R).min() > -1e-10


def test_correlation_single_path():
    theta = 0.3
    R = prop.correlation_matrix(theta, 0.0, 4, 2.0)
    a = np.exp(1j * np.pi * np.arange(4) * np.sin(theta))
    np.testing.assert_allclose(R, 2.0 * np.outer(a, a.conj()), atol=1e-12)
    assert np.linalg.matrix_rank(R, tol=1e-9) == 1


def test_correlation_against_direct_integration():
    theta, std, N = np.deg2rad(30), np.deg2rad(15), 4
    R = prop.correlation_matrix(theta, std, N, 1.0)
    oracle = np.empty((N, N), dtype=complex)
    for m in range(N):
        for n in range(N):
            def density(d, part):
                val = np.exp(1j * np.pi * (m - n) * np.sin(theta + d))
                pdf = np.exp(-d * d / (2 * std**2)) / (np.sqrt(2 * np.pi) * std)
                return (val.real if part == 0 else val.imag) * pdf
            re = integrate.quad(density, -20 * std, 20 * std, args=(0,), limit=200)[0]
            im = integrate.quad(density, -20 * std, 20 * std, args=(1,), limit=200)[0]
            oracle[m, n] = re + 1j * im
    np.testing.assert_allclose(R, oracle, atol=1e-10)
    np.testing.assert_allclose(np.linalg.eigvalsh(R), np.linalg.eigvalsh(oracle), atol=1e-10)


def test_wide_spread_decorrelates():
    # off-diagonal magnitudes shrink as the angular spread grows
    narrow = prop.correlation_matrix(0.0, np.deg2rad(5), 4, 1.0)
    wide = prop.correlation_matrix(0.0, np.deg2rad(60), 4, 1.0)
    assert np.abs(wide[0, 1]) < np.abs(narrow[0, 1])
    assert np.abs(wide[0, 2]) < 0.3


def test_pilots():
    assert list(prop.assign_pilots(8, 8).pilot_of) == list(range(8))
    p = prop.assign_pilots(8, 4)
    assert [sorted(p.sharers(k)) for k in range(4)] == [[0, 4], [1, 5], [2, 6], [3, 7]]
    assert list(prop.assign_pilots(1, 8).pilot_of) == [0]
    with pytest.raises(ValueError):
        prop.assign_pilots(3, 0)


def _corr(R):
    R = np.asarray(R, dtype=complex)
    return prop.CorrelationSet(R=R, beta=np.real(np.trace(R, axis1=-2, axis2=-1)) / R.shape[-1])


def test_zero_correlation_gives_zero_channels():
    corr = _corr(np.zeros((1, 1, 3, 3)))
    assert np.all(prop.sample_channels(corr, 10, 0).h == 0)


def test_identity_sample_covariance():
    M = 20000
    corr = _corr(np.eye(3)[None, None])
    h = prop.sample_channels(corr, M, 5).h[:, 0, 0]
    cov = h.T @ h.conj() / M
    assert np.max(np.abs(cov - np.eye(3))) < 5 / np.sqrt(M)
    assert np.max(np.abs(h.mean(axis=0))) < 5 / np.sqrt(M)


def test_channel_determinism():
    topo = prop.generate_topology(CFG, 2)
    corr = prop.correlation_set(topo, CFG)
    a = prop.sample_channels(corr, 50, 9).h
    b = prop.sample_channels(corr, 50, 9).h
    assert np.array_equal(a, b)
    assert np.allclose(corr.beta, np.trace(corr.R, axis1=-2, axis2=-1).real / CFG.N, rtol=0, atol=0)


def _setup(seed, M, cfg=CFG):
    topo = prop.generate_topology(cfg, seed)
    corr = prop.correlation_set(topo, cfg)
    pilots = prop.assign_pilots(cfg.K, cfg.tau_p)
    batch = prop.sample_channels(corr, M, seed)
    est = prop.mmse_estimate(batch, pilots, corr, cfg.p_pilot_w, cfg.tau_p, cfg.sigma2)
    return corr, batch, est


def test_mmse_identity_and_psd():
    corr, _, est = _setup(0, 10)
    for k in range(CFG.K):
        for l in range(CFG.L):
            R, C = corr.R[k, l], est.C_err[k, l]
            np.testing.assert_allclose((R - C) + C, R, rtol=0, atol=1e-10 * np.abs(R).max())
            scale = np.abs(R).max()
            assert np.linalg.eigvalsh(R - C).min() > -1e-9 * scale
            assert np.linalg.eigvalsh(C).min() > -1e-9 * scale


def test_mmse_noiseless_is_exact():
    cfg = CFG.replace(noise_power_w=1e-30)
    corr, batch, est = _setup(1, 20, cfg)
    scale = np.sqrt(corr.beta.max())
    assert np.max(np.abs(est.hhat - batch.h)) < 1e-6 * scale


def test_mmse_zero_correlation_gives_zero_estimate():
    corr, batch, _ = _setup(2, 20)
    R = corr.R.copy()
    R[1] = 0
    corr0 = prop.CorrelationSet(R=R, beta=corr.beta)
    batch0 = prop.sample_channels(corr0, 20, 2)
    est = prop.mmse_estimate(batch0, prop.assign_pilots(CFG.K, CFG.tau_p), corr0, 0.1, CFG.tau_p, CFG.sigma2)
    assert np.all(est.hhat[:, 1] == 0)


def mmse_moment_errors(seed, M, cfg=CFG):
    """Worst normalized errors of the error covariance and the estimate/error correlation."""
    corr, batch, est = _setup(seed, M, cfg)
    err = batch.h - est.hhat
    worst_cov, worst_cross = 0.0, 0.0
    for k in range(cfg.K):
        for l in range(cfg.L):
            scale = corr.beta[k, l]
            e, hh = err[:, k, l], est.hhat[:, k, l]
            cov = e.T @ e.conj() / M
            cross = hh.T @ e.conj() / M
            worst_cov = max(worst_cov, np.abs(cov - est.C_err[k, l]).max() / scale)
            worst_cross = max(worst_cross, np.abs(cross).max() / scale)
    return worst_cov, worst_cross


def test_mmse_monte_carlo_moments():
    M = 10000
    cov, cross = mmse_moment_errors(3, M)
    assert cov < 5 / np.sqrt(M)
    assert cross < 5 / np.sqrt(M)


def test_pilot_sharers_have_parallel_estimates():
    cfg = SystemConfig(L=2, K=2, N=4, tau_p=1)
    R = prop.correlation_matrix(0.2, np.deg2rad(10), 4, 1e-10)
    Rs = np.array([[R, 2 * R], [3 * R, 0.5 * R]])
    corr = _corr(Rs)
    batch = prop.sample_channels(corr, 30, 4)
    est = prop.mmse_estimate(batch, prop.assign_pilots(2, 1), corr, 0.1, 1, cfg.sigma2)
    for l in range(2):
        a, b = est.hhat[:, 0, l], est.hhat[:, 1, l]
        cos = np.abs(np.sum(a.conj() * b, axis=1)) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        assert np.all(cos > 1 - 1e-9)


def test_topology_csv_round_trip(tmp_path):
    topo = prop.generate_topology(CFG, 8)
    gain = prop.large_scale(topo, CFG)
    path = tmp_path / "topo.csv"
    prop.dump_topology_csv(topo, gain, path)
    back, gain2 = prop.load_topology_csv(path, seed=8)
    np.testing.assert_array_equal(back.ap_positions, topo.ap_positions)
    np.testing.assert_array_equal(back.ue_positions, topo.ue_positions)
    np.testing.assert_array_equal(gain2, gain)
