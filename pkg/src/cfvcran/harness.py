"""End-to-end experiments: SE sweeps, max-rate search and report files.

Every number written by ``emit_report`` is a function of the configuration
and the seeds only.  Wall times are kept out of the CSV files.
"""

from __future__ import annotations

import csv
import json
import math
import platform
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from cfvcran import __version__
from cfvcran import planner as pl
from cfvcran import propagation as prop
from cfvcran.precoder_stats import PrecoderStatistics, compute_statistics
from cfvcran.sysconfig import SystemConfig

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
UNRESOLVED = "unresolved"
PLOT_THRESHOLD = 0.5


@dataclass
class SweepSpec:
    se_grid: list[float]
    setups: int = 1
    modes: tuple[str, ...] = ("CellFree", "SmallCell")
    seed: int = 0
    node_budget: int | None = None
    time_budget: float | None = None
    mc: int | None = None

    def __post_init__(self):
        self.se_grid = [float(v) for v in self.se_grid]
        self.modes = tuple(pl.Mode(m).value for m in self.modes)
        if any(v < 0 or not math.isfinite(v) for v in self.se_grid):
            raise ValueError("SE grid values must be finite and nonnegative")
        if self.setups < 1:
            raise ValueError("setups must be at least 1")

    @property
    def seeds(self) -> list[int]:
        return [self.seed + i for i in range(self.setups)]


@dataclass
class PointResult:
    seed: int
    se: float
    mode: str
    status: str
    total_w: float = math.nan
    ran_w: float = math.nan
    fronthaul_w: float = math.nan
    cloud_processing_w: float = math.nan
    dispatcher_w: float = math.nan
    active_aps: int = -1
    active_dus: int = -1
    active_lcs: int = -1
    nodes: int = 0

    def key(self):
        return (self.seed, self.se, self.mode)


@dataclass
class MaxRateResult:
    seed: int
    mode: str
    status: str
    max_se: float
    rate_bps: float
    total_w: float
    energy_per_bit_j: float


@dataclass
class ExperimentReport:
    cfg: SystemConfig
    spec: SweepSpec
    points: list[PointResult] = field(default_factory=list)
    maxrate: list[MaxRateResult] = field(default_factory=list)

    def aggregate(self) -> list[dict]:
        return aggregate(self.points)


def setup_statistics(cfg: SystemConfig, seed: int, mc: int | None = None) -> PrecoderStatistics:
    topo = prop.generate_topology(cfg, seed)
    _, stats = compute_statistics(cfg, topo, M=mc)
    return stats


def solve_point(stats, cfg, se, mode, node_budget=None, time_budget=None, seed=-1) -> tuple[PointResult, pl.BnBReport]:
    inst = pl.PlanningInstance.from_se(stats, cfg, se, mode)
    rep = pl.branch_and_bound(inst, node_limit=node_budget, time_limit=time_budget)
    res = PointResult(seed=seed, se=float(se), mode=inst.mode.value, status=INFEASIBLE, nodes=rep.nodes)
    if rep.status == pl.BnBStatus.TIMED_OUT:
        res.status = UNRESOLVED
    elif rep.status == pl.BnBStatus.OPTIMAL:
        plan = rep.incumbent
        bd = plan.breakdown
        res.status = FEASIBLE
        res.total_w = bd.total
        res.ran_w, res.fronthaul_w = bd.ran, bd.fronthaul
        res.cloud_processing_w, res.dispatcher_w = bd.cloud_processing, bd.dispatcher
        res.active_aps, res.active_dus, res.active_lcs = plan.active_aps, plan.active_dus, plan.active_lcs
    return res, rep


def _sweep_setup(args) -> list[PointResult]:
    cfg, spec, seed = args
    stats = setup_statistics(cfg, seed, spec.mc)
    out = []
    for se in spec.se_grid:
        for mode in spec.modes:
            res, _ = solve_point(stats, cfg, se, mode, spec.node_budget, spec.time_budget, seed)
            out.append(res)
    return out


def _map(fn, jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(job) for job in jobs]


def run_sweep(spec: SweepSpec, cfg: SystemConfig, workers: int = 1) -> ExperimentReport:
    results = _map(_sweep_setup, [(cfg, spec, s) for s in spec.seeds], workers)
    points = sorted((p for chunk in results for p in chunk), key=PointResult.key)
    return ExperimentReport(cfg=cfg, spec=spec, points=points)


def aggregate(points: list[PointResult]) -> list[dict]:
    """Per (SE, mode) statistics; power and counts are averaged over feasible setups."""
    groups: dict[tuple, list[PointResult]] = {}
    for p in points:
        groups.setdefault((p.se, p.mode), []).append(p)
    rows = []
    for (se, mode), pts in sorted(groups.items()):
        feas = [p for p in pts if p.status == FEASIBLE]
        n_inf = sum(p.status == INFEASIBLE for p in pts)
        n_unres = sum(p.status == UNRESOLVED for p in pts)
        decided = len(feas) + n_inf
        ratio = len(feas) / decided if decided else math.nan

        def mean(attr):
            return float(np.mean([getattr(p, attr) for p in feas])) if feas else math.nan

        rows.append({
            "se": se,
            "mode": mode,
            "feasible": len(feas),
            "infeasible": n_inf,
            "unresolved": n_unres,
            "feasibility_ratio": ratio,
            "mean_total_w": mean("total_w"),
            "mean_active_aps": mean("active_aps"),
            "mean_active_dus": mean("active_dus"),
            "mean_ran_w": mean("ran_w"),
            "mean_fronthaul_w": mean("fronthaul_w"),
            "mean_cloud_processing_w": mean("cloud_processing_w"),
            "mean_dispatcher_w": mean("dispatcher_w"),
            "plotted": bool(ratio > PLOT_THRESHOLD),
        })
    return rows


# ---------------------------------------------------------------------------
# maximum common rate


def rate_bps(se: float, cfg: SystemConfig) -> float:
    bw = cfg.bandwidth_hz * (cfg.n_used / cfg.n_dft if cfg.derate_bandwidth else 1.0)
    return se * bw


def max_rate_search(
    cfg: SystemConfig,
    stats: PrecoderStatistics,
    mode: str,
    tol_bits: float = 0.01,
    node_budget: int | None = None,
    time_budget: float | None = None,
    seed: int = -1,
    se_cap: float = 64.0,
) -> MaxRateResult:
    """Largest common SE target that admits a feasible plan, by bracketing and bisection.

    Feasibility only needs one integral plan, so probes stop at the first
    incumbent; the optimal power is then computed once at the final SE.
    """
    unresolved = False

    def feasible(se):
        nonlocal unresolved
        inst = pl.PlanningInstance.from_se(stats, cfg, se, mode)
        rep = pl.branch_and_bound(inst, node_limit=node_budget, time_limit=time_budget, stop_at_first=True)
        if rep.status == pl.BnBStatus.TIMED_OUT and rep.incumbent is None:
            unresolved = True
        return rep.incumbent is not None

    lo, hi = 0.0, 1.0
    while feasible(hi):
        lo, hi = hi, 2 * hi
        if hi > se_cap:
            raise RuntimeError(f"SE above {se_cap} still feasible; check the configuration")
    while hi - lo > tol_bits:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    res, _ = solve_point(stats, cfg, lo, mode, node_budget, time_budget, seed)
    rate = rate_bps(lo, cfg)
    status = UNRESOLVED if unresolved or res.status == UNRESOLVED else FEASIBLE
    epb = res.total_w / (cfg.K * rate) if rate > 0 else math.inf
    return MaxRateResult(seed=seed, mode=pl.Mode(mode).value, status=status, max_se=lo,
                         rate_bps=rate, total_w=res.total_w, energy_per_bit_j=epb)


def _maxrate_setup(args) -> list[MaxRateResult]:
    cfg, spec, seed, tol = args
    stats = setup_statistics(cfg, seed, spec.mc)
    return [max_rate_search(cfg, stats, m, tol, spec.node_budget, spec.time_budget, seed) for m in spec.modes]


def run_maxrate(spec: SweepSpec, cfg: SystemConfig, tol_bits: float = 0.01, workers: int = 1) -> ExperimentReport:
    results = _map(_maxrate_setup, [(cfg, spec, s, tol_bits) for s in spec.seeds], workers)
    rows = sorted((r for chunk in results for r in chunk), key=lambda r: (r.seed, r.mode))
    return ExperimentReport(cfg=cfg, spec=spec, maxrate=rows)


def maxrate_summary(rows: list[MaxRateResult]) -> list[dict]:
    out = []
    for mode in sorted({r.mode for r in rows}):
        res = [r for r in rows if r.mode == mode and r.status == FEASIBLE]
        rates = [r.rate_bps / 1e6 for r in res]
        epb = [r.energy_per_bit_j for r in res if math.isfinite(r.energy_per_bit_j)]
        out.append({
            "mode": mode,
            "count": len(res),
            "unresolved": sum(r.mode == mode and r.status == UNRESOLVED for r in rows),
            "mean_rate_mbps": statistics.fmean(rates) if rates else math.nan,
            "median_rate_mbps": statistics.median(rates) if rates else math.nan,
            "mean_energy_per_bit_j": statistics.fmean(epb) if epb else math.nan,
            "median_energy_per_bit_j": statistics.median(epb) if epb else math.nan,
        })
    return out


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, header: list[str], rows: list[dict]) -> None:
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(row[h]) for h in header])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


RAW_COLUMNS = list(PointResult.__dataclass_fields__)
AGG_COLUMNS = [
    "se", "mode", "feasible", "infeasible", "unresolved", "feasibility_ratio",
    "mean_total_w", "mean_active_aps", "mean_active_dus", "mean_ran_w",
    "mean_fronthaul_w", "mean_cloud_processing_w", "mean_dispatcher_w", "plotted",
]
PLOT_COLUMNS = ["se", "mode", "feasibility_ratio", "mean_total_w", "mean_active_aps", "mean_active_dus"]
BREAKDOWN_COLUMNS = ["se", "mode", "ran_w", "fronthaul_w", "cloud_w", "total_w"]
MAXRATE_COLUMNS = list(MaxRateResult.__dataclass_fields__)
MAXRATE_SUMMARY_COLUMNS = [
    "mode", "count", "unresolved", "mean_rate_mbps", "median_rate_mbps",
    "mean_energy_per_bit_j", "median_energy_per_bit_j",
]


def manifest(report: ExperimentReport) -> dict:
    return {
        "package_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "config": report.cfg.to_dict(),
        "config_sha256": report.cfg.digest(),
        "spec": {**asdict(report.spec), "modes": list(report.spec.modes)},
        "seeds": report.spec.seeds,
    }


def emit_report(report: ExperimentReport, out_dir: str | Path) -> list[Path]:
    """Write the CSV files and manifest.json into ``out_dir``; returns the paths written."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    if report.points or not report.maxrate:
        agg = report.aggregate()
        files = {
            "raw.csv": (RAW_COLUMNS, [asdict(p) for p in report.points]),
            "aggregate.csv": (AGG_COLUMNS, agg),
            "plot.csv": (PLOT_COLUMNS, [r for r in agg if r["plotted"]]),
            "breakdown.csv": (BREAKDOWN_COLUMNS, [
                {"se": r["se"], "mode": r["mode"], "ran_w": r["mean_ran_w"],
                 "fronthaul_w": r["mean_fronthaul_w"],
                 "cloud_w": r["mean_cloud_processing_w"] + r["mean_dispatcher_w"],
                 "total_w": r["mean_total_w"]}
                for r in agg if r["plotted"]
            ]),
        }
        for name, (cols, rows) in files.items():
            _write_csv(out / name, cols, rows)
            written.append(out / name)
    if report.maxrate:
        _write_csv(out / "maxrate.csv", MAXRATE_COLUMNS, [asdict(r) for r in report.maxrate])
        _write_csv(out / "maxrate_summary.csv", MAXRATE_SUMMARY_COLUMNS, maxrate_summary(report.maxrate))
        written += [out / "maxrate.csv", out / "maxrate_summary.csv"]
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest(report), indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written
