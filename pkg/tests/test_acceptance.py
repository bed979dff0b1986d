"""Acceptance suite: one PASS/FAIL line per criterion, repeated in the run summary.

The reduced-scale experiment is the slow part (several minutes on one core).
"""

import math
import sys

import numpy as np
import pytest

from conftest import record
from socp_gen import kkt_socp
from test_propagation import mmse_moment_errors

from cfvcran import conic_solver as cs
from cfvcran import harness
from cfvcran import planner as pl
from cfvcran.cost_models import cloud_gops, dft_gops, filter_gops, gops_coefficients
from cfvcran.precoder_stats import compute_statistics, sinr_value
from cfvcran import propagation as prop
from cfvcran.sysconfig import SystemConfig, derive

ORACLE_CFG = SystemConfig(L=3, K=2, N=2, W=2, tau_p=2, area_side_m=300, mc_realizations=2000)
ORACLE_SE = [0.5, 1.0, 1.5, 2.0, 3.0]
REDUCED_CFG = SystemConfig(L=8, K=4, N=2, W=2, tau_p=4, area_side_m=500, mc_realizations=5000)
REDUCED_SE = [0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5]
MID_RANGE = (0.5, 1.75)


@pytest.fixture(scope="module")
def oracle_suite():
    """20 small setups, alternating modes, each solved by B&B and by enumeration."""
    out = []
    for i in range(20):
        topo = prop.generate_topology(ORACLE_CFG, 1000 + i)
        _, stats = compute_statistics(ORACLE_CFG, topo)
        mode = "CellFree" if i % 2 == 0 else "SmallCell"
        inst = pl.PlanningInstance.from_se(stats, ORACLE_CFG, ORACLE_SE[(i // 2) % 5], mode)
        out.append((inst, pl.branch_and_bound(inst), pl.brute_force(inst)))
    return out


def test_oracle_optimality(oracle_suite):
    bad, worst, n_opt = [], 0.0, 0
    for i, (inst, rep, ref) in enumerate(oracle_suite):
        if rep.status != ref.status:
            bad.append(f"#{i} {rep.status.value}/{ref.status.value}")
            continue
        if rep.status == pl.BnBStatus.OPTIMAL:
            n_opt += 1
            rel = abs(rep.objective - ref.objective) / abs(ref.objective)
            worst = max(worst, rel)
            if rel > 1e-6:
                bad.append(f"#{i} rel {rel:.2e}")
    ok = not bad and n_opt > 0
    record("oracle optimality", ok, f"20 instances, {n_opt} optimal, worst rel diff {worst:.1e} {bad}")
    assert ok


def test_soc_equivalence(oracle_suite):
    worst, checked = math.inf, 0
    for inst, rep, _ in oracle_suite:
        if rep.status != pl.BnBStatus.OPTIMAL:
            continue
        for k in range(inst.cfg.K):
            if inst.gamma[k] > 0:
                ratio = sinr_value(inst.stats, rep.incumbent.rho, k) / inst.gamma[k]
                worst = min(worst, ratio)
                checked += 1
    ok = checked > 0 and worst >= 1 - 1e-5
    record("SOC equivalence", ok, f"{checked} UE constraints, min SINR/target {worst:.9f}")
    assert ok


def test_gops_identity():
    cfg = SystemConfig()
    Z, X, F = gops_coefficients(cfg)
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(1000):
        x = (rng.random((cfg.K, cfg.L)) < rng.random()).astype(float)
        z = (x.sum(axis=0) > 0).astype(float)
        g = cloud_gops(cfg, x, z)
        terms = [g.filter, g.dft, g.prec_channel_est, g.prec_apply, g.prec_reciprocity,
                 g.prec_compute, g.other_ap, g.other_ue]
        direct = sum(float(np.sum(t)) for t in terms) + g.fixed
        worst = max(worst, abs(Z * z.sum() + X * x.sum() + F - direct) / direct)
    ok = worst <= 1e-9
    record("GOPS identity", ok, f"1000 patterns, worst rel diff {worst:.1e}")
    assert ok


def test_derived_constants():
    cfg = SystemConfig()
    d = derive(cfg)
    got = (d.W_max, filter_gops(cfg), dft_gops(cfg), d.tau_d)
    ok = (got[0] == 3 and got[1] == pytest.approx(4.9152, rel=1e-12)
          and got[2] == pytest.approx(10.0966, abs=5e-5) and got[3] == 184)
    record("derived constants", ok, f"W_max={got[0]} C_filter={got[1]!r} C_DFT={got[2]!r} tau_d={got[3]}")
    assert ok


@pytest.fixture(scope="module")
def reduced():
    spec = harness.SweepSpec(se_grid=REDUCED_SE, setups=10, seed=100)
    sweep = harness.run_sweep(spec, REDUCED_CFG)
    rates = harness.run_maxrate(spec, REDUCED_CFG, tol_bits=0.05)
    return sweep, rates


def _by_setup(points):
    table = {}
    for p in points:
        table.setdefault(p.seed, {})[(p.se, p.mode)] = p
    return table


@pytest.mark.slow
def test_restriction_dominance_and_rate_ordering(reduced):
    sweep, rates = reduced
    table = _by_setup(sweep.points)
    violations, unresolved = [], 0
    for seed, pts in table.items():
        for se in REDUCED_SE:
            cf, sc = pts[(se, "CellFree")], pts[(se, "SmallCell")]
            unresolved += (cf.status == harness.UNRESOLVED) + (sc.status == harness.UNRESOLVED)
            if cf.status == sc.status == harness.FEASIBLE and sc.total_w < cf.total_w * (1 - 1e-7):
                violations.append((seed, se))
            if sc.status == harness.FEASIBLE and cf.status == harness.INFEASIBLE:
                violations.append((seed, se, "cf infeasible"))
    mr = {(r.seed, r.mode): r for r in rates.maxrate}
    rate_bad = [s for s in table if mr[(s, "CellFree")].max_se < mr[(s, "SmallCell")].max_se]
    ok = len(table) >= 10 and not violations and not rate_bad and unresolved == 0
    record("restriction dominance and rate ordering", ok,
           f"{len(table)} setups, power violations {violations}, rate violations {rate_bad}, unresolved {unresolved}")
    assert ok


@pytest.mark.slow
def test_qualitative_claims(reduced):
    sweep, rates = reduced
    table = _by_setup(sweep.points)
    saving, earlier = 0, 0
    for pts in table.values():
        mid = [se for se in REDUCED_SE if MID_RANGE[0] <= se <= MID_RANGE[1]]
        if any(pts[(se, "CellFree")].status == pts[(se, "SmallCell")].status == harness.FEASIBLE
               and pts[(se, "SmallCell")].total_w - pts[(se, "CellFree")].total_w > 1e-6 * pts[(se, "CellFree")].total_w
               for se in mid):
            saving += 1

        def onset(mode):
            bad = [se for se in REDUCED_SE if pts[(se, mode)].status == harness.INFEASIBLE]
            return min(bad) if bad else math.inf

        if onset("SmallCell") < onset("CellFree"):
            earlier += 1
    summary = {r["mode"]: r for r in harness.maxrate_summary(rates.maxrate)}
    ratio = summary["CellFree"]["mean_rate_mbps"] / summary["SmallCell"]["mean_rate_mbps"]
    n = len(table)
    ok = saving >= n / 2 and earlier >= n / 2 and ratio > 1
    epb = {m: summary[m]["mean_energy_per_bit_j"] for m in summary}
    record("qualitative claims", ok,
           f"saving on {saving}/{n}, earlier small-cell infeasibility on {earlier}/{n}, "
           f"max-rate ratio {ratio:.3f}, energy/bit CF {epb['CellFree']:.3e} SC {epb['SmallCell']:.3e} J")
    assert ok


def test_channel_estimation_statistics():
    M = 10_000
    cfg = SystemConfig(L=6, K=4, N=4, tau_p=4)
    worst = (0.0, 0.0)
    for seed in range(5):
        cov, cross = mmse_moment_errors(seed, M, cfg)
        worst = (max(worst[0], cov), max(worst[1], cross))
    ok = max(worst) < 5 / math.sqrt(M)
    record("channel-estimation statistics", ok,
           f"5 seeds, M={M}, cov err {worst[0]:.4f}, cross {worst[1]:.4f}, bound {5 / math.sqrt(M):.4f}")
    assert ok


def test_conic_solver_suite():
    worst_res = 0.0
    for a, b in [(3.0, 4.0), (5.0, 12.0), (-8.0, 15.0), (0.0, 2.0)]:
        G = np.array([[-1.0], [0.0], [0.0]])
        prob = cs.ConicProblem(c=[1.0], G=G, h=[0.0, a, b], cones=[("q", 3)])
        sol = cs.solve(prob)
        worst_res = max(worst_res, abs(sol.x[0] / math.hypot(a, b) - 1), *sol.residuals.values())
    rng = np.random.default_rng(2024)
    worst_obj = 0.0
    for _ in range(50):
        prob, opt, _ = kkt_socp(rng)
        sol = cs.solve(prob)
        rel = abs(sol.objective - opt) / max(1.0, abs(opt)) if sol.status == cs.Status.OPTIMAL else math.inf
        worst_obj = max(worst_obj, rel)
    ok = worst_res <= 1e-8 and worst_obj <= 1e-6
    record("conic solver suite", ok, f"analytic worst residual {worst_res:.1e}, 50 KKT problems worst rel {worst_obj:.1e}")
    assert ok


def test_determinism(tmp_path):
    cfg = ORACLE_CFG.replace(mc_realizations=500)
    spec = harness.SweepSpec(se_grid=[0.0, 1.0, 2.0], setups=3, seed=42)
    a, b = tmp_path / "a", tmp_path / "b"
    files_a = harness.emit_report(harness.run_sweep(spec, cfg), a)
    harness.emit_report(harness.run_sweep(spec, cfg), b)
    diff = [p.name for p in files_a if p.read_bytes() != (b / p.name).read_bytes()]
    ok = not diff and len(files_a) >= 5
    record("determinism", ok, f"{len(files_a)} files compared, differing {diff}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
