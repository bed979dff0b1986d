import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfvcran.cost_models import (
    CapacityError, ap_power, cloud_gops, cloud_power, dft_gops, filter_gops, gops_coefficients,
    precoding_gops, total_power,
)
from cfvcran.planner import NetworkPlan, PlanningInstance, objective_value
from cfvcran.precoder_stats import PrecoderStatistics
from cfvcran.sysconfig import SystemConfig

CFG = SystemConfig()
KAPPA = 8.753501400560224e-05


def test_filter_gops():
    assert filter_gops(CFG) == pytest.approx(4.9152, rel=1e-12)
    assert filter_gops(CFG.replace(fs_hz=2 * CFG.fs_hz)) == pytest.approx(2 * 4.9152, rel=1e-12)


def test_dft_gops():
    assert dft_gops(CFG) == pytest.approx(10.096582633053222, rel=1e-12)
    assert dft_gops(CFG.replace(n_dft=2, n_used=2)) == pytest.approx(8 * 4 * 2 / (71.4e-6 * 1e9), rel=1e-12)
    assert dft_gops(CFG.replace(N=8)) == pytest.approx(2 * dft_gops(CFG), rel=1e-12)
    with pytest.raises(ValueError):
        dft_gops(CFG.replace(n_dft=1536))


def test_precoding_terms_at_zero_load():
    p = precoding_gops(CFG, 0)
    assert p.channel_estimation == pytest.approx(KAPPA * (2048 + 1024), rel=1e-12)
    assert p.computation == pytest.approx(KAPPA * (640 + 160), rel=1e-12)
    assert p.precoding == 0 and p.reciprocity == 0
    assert p.total == pytest.approx(0.3389355742296919, rel=1e-12)


def test_precoding_degenerate_single_antenna():
    cfg = SystemConfig(N=1, K=1, tau_p=1)
    # tau_p = 1 leaves only the pilot terms; check their exact size
    p = precoding_gops(cfg, 0)
    kappa = cfg.n_used / (cfg.symbol_time_s * cfg.tau_c * 1e9)
    assert p.total == pytest.approx(kappa * (8 + 8 + 8), rel=1e-12)
    assert p.computation == pytest.approx(kappa * 8, rel=1e-12)


def test_precoding_increment():
    N, td = CFG.N, CFG.tau_d
    step = KAPPA * (8 * N**2 + 8 * N * td + 8 * N + 8 * N**2)
    for s in range(CFG.K):
        diff = precoding_gops(CFG, s + 1).total - precoding_gops(CFG, s).total
        assert diff == pytest.approx(step, rel=1e-10)
    with pytest.raises(ValueError):
        precoding_gops(CFG, CFG.K + 1)


def test_coefficients():
    Z, X, F = gops_coefficients(CFG.replace(c_other_ap_gops=0.0, c_other_ue_gops=0.0))
    assert Z == pytest.approx(15.350718207282915, rel=1e-12)
    assert X == pytest.approx(0.5406162464985994, rel=1e-12)
    assert F == CFG.f_fixed_gops
    Z1, X1, _ = gops_coefficients(CFG)
    assert Z1 == pytest.approx(Z + 10.0) and X1 == pytest.approx(X + 1.0)


def test_all_off_load_is_fixed_part():
    x = np.zeros((CFG.K, CFG.L))
    z = np.zeros(CFG.L)
    assert cloud_gops(CFG, x, z).total == CFG.f_fixed_gops


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.booleans(), min_size=16 * 8, max_size=16 * 8),
    st.floats(0, 50), st.floats(0, 5), st.floats(0, 100),
)
def test_decomposition_identity(bits, other_ap, other_ue, fixed):
    cfg = CFG.replace(c_other_ap_gops=other_ap, c_other_ue_gops=other_ue, f_fixed_gops=fixed)
    x = np.array(bits, dtype=float).reshape(cfg.K, cfg.L)
    z = (x.sum(axis=0) > 0).astype(float)
    Z, X, F = gops_coefficients(cfg)
    direct = cloud_gops(cfg, x, z)
    assert Z * z.sum() + X * x.sum() + F == pytest.approx(direct.total, rel=1e-9)


def test_breakdown_parts_sum():
    rng = np.random.default_rng(3)
    x = (rng.random((CFG.K, CFG.L)) < 0.3).astype(float)
    z = (x.sum(axis=0) > 0).astype(float)
    g = cloud_gops(CFG, x, z)
    parts = [g.filter, g.dft, g.prec_channel_est, g.prec_apply, g.prec_reciprocity, g.prec_compute, g.other_ap, g.other_ue]
    assert all(np.all(p >= 0) for p in parts)
    assert g.total == pytest.approx(sum(p.sum() for p in parts) + g.fixed, rel=1e-12)


def test_monotone_in_activity():
    rng = np.random.default_rng(4)
    for _ in range(50):
        x = (rng.random((CFG.K, CFG.L)) < 0.3).astype(float)
        z = (x.sum(axis=0) > 0).astype(float)
        base = cloud_gops(CFG, x, z).total
        k, l = rng.integers(CFG.K), rng.integers(CFG.L)
        x2, z2 = x.copy(), z.copy()
        x2[k, l] = 1.0
        z2[l] = 1.0
        assert cloud_gops(CFG, x2, z2).total >= base


def test_ap_power():
    assert ap_power(0, np.zeros(8), CFG) == 0.0
    assert ap_power(1, np.zeros(8), CFG) == pytest.approx(27.2)
    assert ap_power(1, np.r_[1.0, np.zeros(7)], CFG) == pytest.approx(31.2)


def test_cloud_power():
    assert cloud_power(0, 0, 0.0, CFG) == pytest.approx(133.33333333333334)
    assert cloud_power(1, 1, 90.0, CFG) == pytest.approx(197.8 / 0.9)
    free = CFG.replace(sigma_cool=1.0, p_disp_w=0.0)
    assert cloud_power(0, 0, 0.0, free) == 0.0
    with pytest.raises(CapacityError):
        cloud_power(1, 1, 4 * 180.0 + 1, CFG)
    with pytest.raises(CapacityError):
        cloud_power(5, 1, 0.0, CFG)


def _plan(x, z, ell, d, rho):
    return NetworkPlan(x=x, z=z, ell=ell, d=d, rho=rho, objective=0.0)


def test_total_power_hand_example():
    cfg = SystemConfig(L=2, K=1, W=2, c_other_ap_gops=0.0, c_other_ue_gops=0.0, f_fixed_gops=0.0)
    x = np.array([[1.0, 0.0]])
    z = np.array([1.0, 0.0])
    rho = np.array([[0.5, 0.0]])
    plan = _plan(x, z, np.array([1.0, 0.0]), np.array([1.0, 0.0]), rho)
    bd = total_power(plan, cfg)
    gops = 4.9152 + 10.096582633053222 + precoding_gops(cfg, 1).total
    assert bd.ran == pytest.approx(27.2 + 4 * 0.25)
    assert bd.fronthaul == pytest.approx(7.7 + 20 / 0.9)
    assert bd.cloud_processing == pytest.approx((20.8 + 74 * gops / 180) / 0.9)
    assert bd.dispatcher == pytest.approx(120 / 0.9)
    assert bd.total == pytest.approx(bd.ran + bd.fronthaul + bd.cloud_processing + bd.dispatcher, rel=1e-12)
    assert bd.cloud == pytest.approx(bd.cloud_processing + bd.dispatcher)


def test_total_power_equals_objective_regrouping():
    rng = np.random.default_rng(5)
    cfg = SystemConfig(L=6, K=3, W=2)
    stats = PrecoderStatistics(b=np.ones((3, 6)), C=np.zeros((3, 3, 6, 6)), noise_power=1.0)
    inst = PlanningInstance(stats=stats, cfg=cfg, gamma=np.zeros(3))
    for _ in range(200):
        x = (rng.random((3, 6)) < 0.4).astype(float)
        z = (x.sum(axis=0) > 0).astype(float)
        rho = rng.random((3, 6)) * x
        ell, d = np.eye(2)[rng.integers(2)], np.eye(2)[1]
        plan = _plan(x, z, ell, d, rho)
        assert total_power(plan, cfg).total == pytest.approx(objective_value(inst, x, z, ell, d, rho), rel=1e-9)


def test_empty_plan_baseline():
    cfg = SystemConfig(L=2, K=1, W=1)
    plan = _plan(np.zeros((1, 2)), np.zeros(2), np.array([1.0]), np.array([1.0]), np.zeros((1, 2)))
    bd = total_power(plan, cfg)
    assert bd.ran == 0
    expected = (120 + 20 + 20.8 + 74 * cfg.f_fixed_gops / 180) / 0.9
    assert bd.total == pytest.approx(expected)
