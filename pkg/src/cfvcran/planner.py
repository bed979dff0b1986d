"""Joint AP selection, DU/line-card dimensioning and power allocation.

The planning problem is a mixed-binary SOCP over

    x[k, l]  UE k served by AP l          (binary)
    z[l]     AP l active                  (binary)
    ell[w]   w line cards active          (binary, one-hot)
    d[w]     w DUs active                 (binary, one-hot)
    rho[k,l] square root of the power AP l spends on UE k
    q        epigraph of sum(rho^2)

It is solved to global optimality by best-first branch-and-bound over
interior-point relaxations.  ``brute_force`` enumerates the binaries and
solves an independently written SOCP in rho for each pattern; it serves as
an oracle for small instances.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from cfvcran import conic_solver as cs
from cfvcran.cost_models import PowerBreakdown, cloud_gops, total_power
from cfvcran.precoder_stats import PrecoderStatistics, sinr_target, sinr_value
from cfvcran.sysconfig import DerivedParams, SystemConfig, derive

INT_TOL = 1e-6
PRUNE_RTOL = 1e-9
GAP_RTOL = 1e-6
SINR_RTOL = 1e-6


class Mode(str, enum.Enum):
    CELL_FREE = "CellFree"
    SMALL_CELL = "SmallCell"


class BnBStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    TIMED_OUT = "TimedOut"


@dataclass
class PlanningInstance:
    stats: PrecoderStatistics
    cfg: SystemConfig
    gamma: np.ndarray
    mode: Mode = Mode.CELL_FREE
    derived: DerivedParams = None

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float).reshape(self.cfg.K)
        if np.any(self.gamma < 0):
            raise ValueError("SINR targets must be nonnegative")
        self.mode = Mode(self.mode)
        if self.derived is None:
            self.derived = derive(self.cfg)
        if self.stats.b.shape != (self.cfg.K, self.cfg.L):
            raise ValueError("statistics do not match the configured K and L")

    @classmethod
    def from_se(cls, stats, cfg, se, mode=Mode.CELL_FREE) -> "PlanningInstance":
        se = np.broadcast_to(np.asarray(se, dtype=float), (cfg.K,))
        gamma = np.array([sinr_target(v, cfg.tau_d, cfg.tau_c) for v in se])
        return cls(stats=stats, cfg=cfg, gamma=gamma, mode=mode)


@dataclass
class NetworkPlan:
    x: np.ndarray
    z: np.ndarray
    ell: np.ndarray
    d: np.ndarray
    rho: np.ndarray
    objective: float
    sinr: np.ndarray | None = None
    breakdown: PowerBreakdown | None = None

    @property
    def active_aps(self) -> int:
        return int(round(self.z.sum()))

    @property
    def active_dus(self) -> int:
        return int(np.arange(1, self.d.size + 1) @ np.rint(self.d))

    @property
    def active_lcs(self) -> int:
        return int(np.arange(1, self.ell.size + 1) @ np.rint(self.ell))

    def to_dict(self) -> dict:
        out = {
            "x": np.rint(self.x).astype(int).tolist(),
            "z": np.rint(self.z).astype(int).tolist(),
            "ell": np.rint(self.ell).astype(int).tolist(),
            "d": np.rint(self.d).astype(int).tolist(),
            "rho": self.rho.tolist(),
            "objective_w": self.objective,
        }
        if self.sinr is not None:
            out["sinr"] = self.sinr.tolist()
        if self.breakdown is not None:
            out["breakdown_w"] = dict(self.breakdown.rows())
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkPlan":
        return cls(
            x=np.array(data["x"], dtype=float),
            z=np.array(data["z"], dtype=float),
            ell=np.array(data["ell"], dtype=float),
            d=np.array(data["d"], dtype=float),
            rho=np.array(data["rho"], dtype=float),
            objective=float(data["objective_w"]),
            sinr=np.array(data["sinr"]) if "sinr" in data else None,
        )


@dataclass
class BnBReport:
    status: BnBStatus
    incumbent: NetworkPlan | None
    lower_bound: float
    nodes: int
    wall_time: float
    numerical_failures: int = 0

    @property
    def objective(self) -> float:
        return self.incumbent.objective if self.incumbent is not None else math.inf


# ---------------------------------------------------------------------------
# model construction


@dataclass(frozen=True)
class Layout:
    K: int
    L: int
    W: int

    @property
    def n(self) -> int:
        return 2 * self.K * self.L + self.L + 2 * self.W + 1

    def x(self, k, l):
        return k * self.L + l

    def z(self, l):
        return self.K * self.L + l

    def ell(self, w):  # w = 1..W
        return self.K * self.L + self.L + w - 1

    def d(self, w):
        return self.K * self.L + self.L + self.W + w - 1

    def rho(self, k, l):
        return self.K * self.L + self.L + 2 * self.W + k * self.L + l

    @property
    def q(self):
        return self.n - 1

    def binary_groups(self) -> list[np.ndarray]:
        """Binary indices in branching priority order: z, x, ell, d."""
        K, L, W = self.K, self.L, self.W
        return [
            np.arange(K * L, K * L + L),
            np.arange(0, K * L),
            np.arange(K * L + L, K * L + L + W),
            np.arange(K * L + L + W, K * L + L + 2 * W),
        ]

    def names(self) -> list[str]:
        K, L, W = self.K, self.L, self.W
        out = [f"x[{k},{l}]" for k in range(K) for l in range(L)]
        out += [f"z[{l}]" for l in range(L)]
        out += [f"ell[{w}]" for w in range(1, W + 1)]
        out += [f"d[{w}]" for w in range(1, W + 1)]
        out += [f"rho[{k},{l}]" for k in range(K) for l in range(L)]
        return out + ["q"]


def _factor_rows(C: np.ndarray) -> np.ndarray:
    """Rows F with F^T F = C for a PSD matrix (zero directions dropped)."""
    vals, vecs = np.linalg.eigh(0.5 * (C + C.T))
    top = max(vals.max(initial=0.0), 0.0)
    keep = vals > 1e-12 * top
    assert np.all(vals >= -1e-9 * max(top, 1e-300)), "interference matrix is not PSD"
    return (vecs[:, keep] * np.sqrt(vals[keep])).T


def build_sinr_cone(stats: PrecoderStatistics, gamma_k: float, k: int, lay: Layout):
    """SOC block b_k^T rho_k >= sqrt(gamma_k) * ||(A_k1 rho_1, ..., A_kK rho_K, sigma)||.

    Everything is divided by sigma; returns (G rows, h) with s = h - G v.
    """
    sigma = math.sqrt(stats.noise_power)
    g = math.sqrt(gamma_k)
    blocks = []
    for i in range(lay.K):
        F = _factor_rows(stats.C[k, i])
        if F.shape[0]:
            rows = np.zeros((F.shape[0], lay.n))
            rows[:, [lay.rho(i, l) for l in range(lay.L)]] = -g * F / sigma
            blocks.append(rows)
    head = np.zeros((1, lay.n))
    head[0, [lay.rho(k, l) for l in range(lay.L)]] = -stats.b[k] / sigma
    tail = np.zeros((1, lay.n))
    G = np.vstack([head] + blocks + [tail])
    h = np.zeros(G.shape[0])
    h[-1] = g
    return G, h


def build_model(inst: PlanningInstance) -> cs.ConicProblem:
    cfg, der = inst.cfg, inst.derived
    K, L, W = cfg.K, cfg.L, cfg.W
    lay = Layout(K, L, W)
    n = lay.n
    sc = cfg.sigma_cool
    ws = np.arange(1, W + 1)
    sqp = math.sqrt(cfg.p_max_w)

    c = np.zeros(n)
    c[[lay.z(l) for l in range(L)]] = der.P_l
    c[: K * L] = cfg.delta_proc_w * der.X_coeff / (sc * cfg.c_max_gops)
    c[[lay.ell(w) for w in ws]] = cfg.p_olt_w * ws / sc
    c[[lay.d(w) for w in ws]] = cfg.p_proc0_w * ws / sc
    c[lay.q] = cfg.delta_tr
    offset = cfg.p_disp_w / sc + cfg.delta_proc_w * der.F_coeff / (sc * cfg.c_max_gops)

    lp_rows, lp_h = [], []

    def row(entries, rhs):
        r = np.zeros(n)
        for idx, val in entries:
            r[idx] += val
        lp_rows.append(r)
        lp_h.append(rhs)

    zs = [lay.z(l) for l in range(L)]
    row([(j, 1.0) for j in zs], der.W_max * W)
    for l in range(L):
        xs = [lay.x(k, l) for k in range(K)]
        row([(j, 1.0 / K) for j in xs] + [(lay.z(l), -1.0)], 0.0)
        row([(lay.z(l), 1.0)] + [(j, -1.0) for j in xs], 0.0)
    row([(lay.ell(w), w - 1.0) for w in ws] + [(j, -1.0 / der.W_max) for j in zs], 0.0)
    row([(j, 1.0 / der.W_max) for j in zs] + [(lay.ell(w), -float(w)) for w in ws], 0.0)
    row(
        [(j, der.Z_coeff) for j in zs]
        + [(j, der.X_coeff) for j in range(K * L)]
        + [(lay.d(w), -cfg.c_max_gops * w) for w in ws],
        -der.F_coeff,
    )
    row([(lay.ell(w), float(w)) for w in ws] + [(lay.d(w), -float(w)) for w in ws], 0.0)
    for k in range(K):
        for l in range(L):
            row([(lay.rho(k, l), 1.0), (lay.x(k, l), -sqp)], 0.0)

    G_parts = [np.array(lp_rows)]
    h_parts = [np.array(lp_h)]
    cones = [("l", len(lp_rows))]

    # per-AP transmit power
    for l in range(L):
        blk = np.zeros((K + 1, n))
        blk[0, lay.z(l)] = -sqp
        for k in range(K):
            blk[k + 1, lay.rho(k, l)] = -1.0
        G_parts.append(blk)
        h_parts.append(np.zeros(K + 1))
        cones.append(("q", K + 1))

    # SINR targets
    for k in range(K):
        if inst.gamma[k] > 0:
            Gk, hk = build_sinr_cone(inst.stats, inst.gamma[k], k, lay)
            G_parts.append(Gk)
            h_parts.append(hk)
            cones.append(("q", Gk.shape[0]))

    # q >= sum rho^2 as (q, 1/2, rho) in the rotated cone
    blk = np.zeros((2 + K * L, n))
    blk[0, lay.q] = -1.0
    for k in range(K):
        for l in range(L):
            blk[2 + k * L + l, lay.rho(k, l)] = -1.0
    hq = np.zeros(2 + K * L)
    hq[1] = 0.5
    G_parts.append(blk)
    h_parts.append(hq)
    cones.append(("r", 2 + K * L))

    A_rows, b = [], []
    r = np.zeros(n)
    r[[lay.ell(w) for w in ws]] = 1.0
    A_rows.append(r)
    b.append(1.0)
    r = np.zeros(n)
    r[[lay.d(w) for w in ws]] = 1.0
    A_rows.append(r)
    b.append(1.0)
    if inst.mode == Mode.SMALL_CELL:
        for k in range(K):
            r = np.zeros(n)
            r[[lay.x(k, l) for l in range(L)]] = 1.0
            A_rows.append(r)
            b.append(1.0)

    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    binary = np.concatenate(lay.binary_groups())
    ub[binary] = 1.0
    lb[lay.q] = -np.inf  # implied by the rotated cone
    return cs.ConicProblem(
        c=c, G=np.vstack(G_parts), h=np.concatenate(h_parts), cones=cones,
        A=np.array(A_rows), b=np.array(b), lb=lb, ub=ub, binary=binary,
        offset=offset, names=lay.names(),
    )


# ---------------------------------------------------------------------------
# substitution of fixed variables


def fix_variables(prob: cs.ConicProblem, fixed: dict[int, float]):
    """Substitute fixed values and drop the corresponding columns.

    Returns (reduced problem, kept column indices), or (None, None) when a
    constraint is violated by the fixed values alone.
    """
    if not fixed:
        return prob, np.arange(prob.n)
    idx = np.array(sorted(fixed))
    vals = np.array([fixed[i] for i in idx])
    keep = np.setdiff1d(np.arange(prob.n), idx)
    h = prob.h - prob.G[:, idx] @ vals
    b = prob.b - prob.A[:, idx] @ vals
    G, A = prob.G[:, keep], prob.A[:, keep]
    offset = prob.offset + float(prob.c[idx] @ vals)

    # constant orthant rows and equality rows
    tol = 1e-9
    keep_rows, cones = [], []
    start = 0
    for kind, dim in prob.cones:
        rows = np.arange(start, start + dim)
        start += dim
        if kind == "l":
            empty = ~np.any(G[rows] != 0, axis=1)
            if np.any(h[rows][empty] < -tol):
                return None, None
            rows = rows[~empty]
            if rows.size:
                keep_rows.append(rows)
                cones.append(("l", rows.size))
        else:
            keep_rows.append(rows)
            cones.append((kind, dim))
    rows = np.concatenate(keep_rows) if keep_rows else np.zeros(0, dtype=int)
    eq_empty = ~np.any(A != 0, axis=1)
    if np.any(np.abs(b[eq_empty]) > tol):
        return None, None
    A, b = A[~eq_empty], b[~eq_empty]
    binary = np.flatnonzero(np.isin(keep, prob.binary))
    reduced = cs.ConicProblem(
        c=prob.c[keep], G=G[rows], h=h[rows], cones=cones, A=A, b=b,
        lb=prob.lb[keep], ub=prob.ub[keep], binary=binary, offset=offset,
        names=[prob.names[i] for i in keep] if prob.names else None,
    )
    return reduced, keep


def propagate(fixed: dict[int, float], lay: Layout, mode: Mode) -> dict[int, float] | None:
    """Close a partial binary assignment under the logical implications of
    the activation, power-bound and one-hot constraints.

    Returns None on contradiction.
    """
    fixed = dict(fixed)
    changed = True

    def setv(j, v):
        nonlocal changed
        if j in fixed:
            return fixed[j] == v
        fixed[j] = v
        changed = True
        return True

    while changed:
        changed = False
        for l in range(lay.L):
            zl = fixed.get(lay.z(l))
            xs = [fixed.get(lay.x(k, l)) for k in range(lay.K)]
            if zl == 0.0:
                for k in range(lay.K):
                    if not setv(lay.x(k, l), 0.0):
                        return None
            if any(v == 1.0 for v in xs) and not setv(lay.z(l), 1.0):
                return None
            if all(v == 0.0 for v in xs) and not setv(lay.z(l), 0.0):
                return None
        for k in range(lay.K):
            for l in range(lay.L):
                if fixed.get(lay.x(k, l)) == 0.0 and not setv(lay.rho(k, l), 0.0):
                    return None
        groups = [[lay.ell(w) for w in range(1, lay.W + 1)], [lay.d(w) for w in range(1, lay.W + 1)]]
        if mode == Mode.SMALL_CELL:
            groups += [[lay.x(k, l) for l in range(lay.L)] for k in range(lay.K)]
        for grp in groups:
            vals = [fixed.get(j) for j in grp]
            ones = sum(v == 1.0 for v in vals)
            if ones > 1:
                return None
            if ones == 1:
                for j in grp:
                    if j not in fixed and not setv(j, 0.0):
                        return None
            free = [j for j, v in zip(grp, vals) if v is None]
            if ones == 0 and not free:
                return None
            if ones == 0 and len(free) == 1 and not setv(free[0], 1.0):
                return None
    return fixed


# ---------------------------------------------------------------------------


def _plan_from_vector(v: np.ndarray, inst: PlanningInstance, lay: Layout) -> NetworkPlan:
    K, L, W = lay.K, lay.L, lay.W
    x = np.rint(v[: K * L]).reshape(K, L)
    z = np.rint(v[K * L : K * L + L])
    ell = np.rint(v[K * L + L : K * L + L + W])
    d = np.rint(v[K * L + L + W : K * L + L + 2 * W])
    rho = np.clip(v[K * L + L + 2 * W : K * L + L + 2 * W + K * L].reshape(K, L), 0.0, None) * x
    return finalize_plan(inst, x, z, ell, d, rho)


def objective_value(inst: PlanningInstance, x, z, ell, d, rho) -> float:
    """The planning objective: total network power regrouped by variable."""
    cfg, der = inst.cfg, inst.derived
    sc = cfg.sigma_cool
    ws = np.arange(1, cfg.W + 1)
    return float(
        cfg.p_disp_w / sc
        + der.P_l * np.sum(z)
        + cfg.delta_tr * np.sum(rho**2)
        + cfg.p_olt_w / sc * (ws @ ell)
        + cfg.p_proc0_w / sc * (ws @ d)
        + cfg.delta_proc_w * der.X_coeff / (sc * cfg.c_max_gops) * np.sum(x)
        + cfg.delta_proc_w * der.F_coeff / (sc * cfg.c_max_gops)
    )


def finalize_plan(inst, x, z, ell, d, rho) -> NetworkPlan:
    sinr = np.array([sinr_value(inst.stats, rho, k) for k in range(inst.cfg.K)])
    plan = NetworkPlan(
        x=np.asarray(x, float), z=np.asarray(z, float), ell=np.asarray(ell, float),
        d=np.asarray(d, float), rho=np.asarray(rho, float),
        objective=objective_value(inst, x, z, ell, d, rho), sinr=sinr,
    )
    plan.breakdown = total_power(plan, inst.cfg)
    return plan


@dataclass(order=True)
class _Node:
    key: tuple
    bound: float = field(compare=False)
    fixed: dict = field(compare=False)
    depth: int = field(compare=False, default=0)


def branch_and_bound(
    inst: PlanningInstance,
    model: cs.ConicProblem | None = None,
    node_limit: int | None = None,
    time_limit: float | None = None,
    stop_at_first: bool = False,
    tol: float = cs.DEFAULT_TOL,
) -> BnBReport:
    """Best-first branch-and-bound on the relaxed planning model.

    Branches on the most fractional binary (ties: z, x, ell, d, then lowest
    index).  With ``stop_at_first`` the search dives depth-first and ends at
    the first incumbent, which answers the feasibility question only.
    """
    t0 = time.perf_counter()
    model = build_model(inst) if model is None else model
    lay = Layout(inst.cfg.K, inst.cfg.L, inst.cfg.W)
    priority = {}
    for g, idx in enumerate(lay.binary_groups()):
        for j in idx:
            priority[int(j)] = (g, int(j))

    incumbent: NetworkPlan | None = None
    best = math.inf
    failures = 0
    nodes = 0
    pruned_bound = math.inf
    seq = itertools.count()
    heap: list[_Node] = []
    root = propagate({}, lay, inst.mode)
    if root is not None:
        heapq.heappush(heap, _Node((-math.inf, next(seq)), -math.inf, root))

    def limit_hit():
        if node_limit is not None and nodes >= node_limit:
            return True
        return time_limit is not None and time.perf_counter() - t0 > time_limit

    while heap:
        if limit_hit():
            lb = min(min(node.bound for node in heap), best, pruned_bound)
            return BnBReport(BnBStatus.TIMED_OUT, incumbent, lb, nodes, time.perf_counter() - t0, failures)
        node = heapq.heappop(heap)
        if node.bound >= best * (1 - PRUNE_RTOL) and math.isfinite(best):
            pruned_bound = min(pruned_bound, node.bound)
            continue
        nodes += 1
        reduced, keep = fix_variables(model, node.fixed)
        if reduced is None:
            continue
        sol = cs.solve(reduced, tol=tol)
        if sol.status == cs.Status.NUMERICAL_FAILURE:
            sol = _retry(reduced, sol, tol)
        if sol.status == cs.Status.INFEASIBLE:
            continue
        full = np.zeros(model.n)
        for j, v in node.fixed.items():
            full[j] = v
        if sol.status == cs.Status.OPTIMAL:
            bound = max(sol.primal_objective, node.bound)
            full[keep] = sol.x
        else:
            # no trustworthy bound: keep the parent's and split on the first free binary
            failures += 1
            bound = node.bound
            if sol.x is not None:
                full[keep] = sol.x
        if bound >= best * (1 - PRUNE_RTOL) and math.isfinite(best):
            pruned_bound = min(pruned_bound, bound)
            continue
        free = [j for j in model.binary if j not in node.fixed]
        if sol.status == cs.Status.OPTIMAL:
            frac = {j: min(full[j], 1 - full[j]) for j in free}
            branch = [j for j in free if frac[j] > INT_TOL]
        else:
            frac = {j: 0.0 for j in free}
            branch = free
        if not branch:
            if sol.status != cs.Status.OPTIMAL:
                continue
            plan = _plan_from_vector(full, inst, lay)
            if plan.objective < best:
                best, incumbent = plan.objective, plan
                if stop_at_first:
                    return BnBReport(BnBStatus.OPTIMAL, incumbent, -math.inf, nodes, time.perf_counter() - t0, failures)
            continue
        j = min(branch, key=lambda j: (-round(frac[j], 12), priority[j]))
        for val in (1.0, 0.0) if full[j] >= 0.5 else (0.0, 1.0):
            child = propagate({**node.fixed, int(j): val}, lay, inst.mode)
            if child is not None:
                key = (-(node.depth + 1), next(seq)) if stop_at_first else (bound, next(seq))
                heapq.heappush(heap, _Node(key, bound, child, node.depth + 1))

    elapsed = time.perf_counter() - t0
    if incumbent is None:
        return BnBReport(BnBStatus.INFEASIBLE, None, math.inf, nodes, elapsed, failures)
    return BnBReport(BnBStatus.OPTIMAL, incumbent, min(best, pruned_bound), nodes, elapsed, failures)


def _retry(prob, sol, tol):
    for t in (10 * tol, 100 * tol):
        again = cs.solve(prob, tol=t, max_iter=400)
        if again.status != cs.Status.NUMERICAL_FAILURE:
            return again
    return sol


# ---------------------------------------------------------------------------
# brute-force oracle


BRUTE_FORCE_MAX_BINARIES = 16


def _rho_socp(inst: PlanningInstance, x: np.ndarray):
    """Minimum transmit power for a fixed serving pattern.

    Written independently of build_model: variables are the served rho
    entries plus t >= sum(rho^2) via ||(2 rho, t - 1)|| <= t + 1.
    Returns (rho matrix, sum of rho^2) or None when infeasible.
    """
    cfg, stats = inst.cfg, inst.stats
    K, L = cfg.K, cfg.L
    pairs = [(k, l) for k in range(K) for l in range(L) if x[k, l]]
    active = np.flatnonzero(inst.gamma > 0)
    if not pairs:
        return (np.zeros((K, L)), 0.0) if active.size == 0 else None
    col = {p: i for i, p in enumerate(pairs)}
    n = len(pairs) + 1
    t = n - 1
    sigma = math.sqrt(stats.noise_power)
    sqp = math.sqrt(cfg.p_max_w)
    G, h, cones = [], [], []

    # 0 <= rho <= sqrt(p_max)
    for i in range(len(pairs)):
        r = np.zeros(n)
        r[i] = -1.0
        G.append(r)
        h.append(0.0)
        r = np.zeros(n)
        r[i] = 1.0
        G.append(r)
        h.append(sqp)
    cones.append(("l", 2 * len(pairs)))
    for l in range(L):
        served = [col[(k, l)] for k in range(K) if (k, l) in col]
        if not served:
            continue
        G.append(np.zeros(n))
        h.append(sqp)
        for i in served:
            r = np.zeros(n)
            r[i] = -1.0
            G.append(r)
            h.append(0.0)
        cones.append(("q", 1 + len(served)))
    for k in active:
        g = math.sqrt(inst.gamma[k])
        r = np.zeros(n)
        for l in range(L):
            if (k, l) in col:
                r[col[(k, l)]] = -stats.b[k, l] / sigma
        G.append(r)
        h.append(0.0)
        rows = 1
        for i in range(K):
            cols_i = [l for l in range(L) if (i, l) in col]
            if not cols_i:
                continue
            sub = stats.C[k, i][np.ix_(cols_i, cols_i)]
            vals, vecs = np.linalg.eigh(sub)
            root = (vecs * np.sqrt(np.clip(vals, 0, None))) @ vecs.T  # symmetric square root
            for a in range(len(cols_i)):
                r = np.zeros(n)
                for bcol, l in enumerate(cols_i):
                    r[col[(i, l)]] = -g * root[a, bcol] / sigma
                G.append(r)
                h.append(0.0)
                rows += 1
        G.append(np.zeros(n))
        h.append(g)
        cones.append(("q", rows + 1))
    # ||(2 rho, t - 1)|| <= t + 1
    r = np.zeros(n)
    r[t] = -1.0
    G.append(r)
    h.append(1.0)
    for i in range(len(pairs)):
        r = np.zeros(n)
        r[i] = -2.0
        G.append(r)
        h.append(0.0)
    r = np.zeros(n)
    r[t] = -1.0
    G.append(r)
    h.append(-1.0)
    cones.append(("q", len(pairs) + 2))
    c = np.zeros(n)
    c[t] = 1.0
    prob = cs.ConicProblem(c=c, G=np.array(G), h=np.array(h), cones=cones)
    sol = cs.solve(prob)
    if sol.status == cs.Status.NUMERICAL_FAILURE:
        sol = _retry(prob, sol, cs.DEFAULT_TOL)
    if sol.status == cs.Status.INFEASIBLE:
        return None
    if sol.status != cs.Status.OPTIMAL:
        raise RuntimeError(f"rho subproblem failed: {sol.status.value} {sol.residuals}")
    rho = np.zeros((K, L))
    for (k, l), i in col.items():
        rho[k, l] = max(sol.x[i], 0.0)
    return rho, float(sol.x[t])


def _serving_patterns(K: int, L: int, mode: Mode):
    if mode == Mode.SMALL_CELL:
        for choice in itertools.product(range(L), repeat=K):
            x = np.zeros((K, L), dtype=int)
            x[np.arange(K), choice] = 1
            yield x
    else:
        for bits in itertools.product((0, 1), repeat=K * L):
            yield np.array(bits, dtype=int).reshape(K, L)


def brute_force(inst: PlanningInstance) -> BnBReport:
    """Enumerate every serving pattern and its cheapest LC/DU closure."""
    cfg, der = inst.cfg, inst.derived
    K, L, W = cfg.K, cfg.L, cfg.W
    if K * L + L > BRUTE_FORCE_MAX_BINARIES:
        raise ValueError(f"instance too large for enumeration ({K * L + L} serving binaries)")
    t0 = time.perf_counter()
    best_plan, best = None, math.inf
    count = 0
    for x in _serving_patterns(K, L, inst.mode):
        z = (x.sum(axis=0) > 0).astype(int)
        nz = int(z.sum())
        if nz > der.W_max * W:
            continue
        load = cloud_gops(cfg, x, z).total
        options = []
        for wl in range(1, W + 1):
            if not (wl - 1 <= nz / der.W_max <= wl):
                continue
            for wd in range(wl, W + 1):
                if load <= cfg.c_max_gops * wd:
                    options.append((cfg.p_olt_w * wl + cfg.p_proc0_w * wd, wl, wd))
        if not options:
            continue
        count += 1
        res = _rho_socp(inst, x)
        if res is None:
            continue
        rho, _ = res
        _, wl, wd = min(options)
        ell = np.eye(W)[wl - 1]
        d = np.eye(W)[wd - 1]
        plan = NetworkPlan(x=x.astype(float), z=z.astype(float), ell=ell, d=d, rho=rho, objective=0.0)
        plan.breakdown = total_power(plan, cfg)
        plan.objective = plan.breakdown.total
        plan.sinr = np.array([sinr_value(inst.stats, rho, k) for k in range(K)])
        if plan.objective < best:
            best, best_plan = plan.objective, plan
    elapsed = time.perf_counter() - t0
    if best_plan is None:
        return BnBReport(BnBStatus.INFEASIBLE, None, math.inf, count, elapsed)
    return BnBReport(BnBStatus.OPTIMAL, best_plan, best, count, elapsed)


# ---------------------------------------------------------------------------


def verify_plan(plan: NetworkPlan, inst: PlanningInstance, rtol: float = 1e-9) -> list[str]:
    """List every violated planning constraint (empty when feasible).

    SINR is recomputed from the ratio form and the cloud load from the
    per-AP sum, independently of the model builder.
    """
    cfg, der = inst.cfg, inst.derived
    K, L, W = cfg.K, cfg.L, cfg.W
    out = []
    x, z, ell, d, rho = plan.x, plan.z, plan.ell, plan.d, plan.rho
    for name, arr in (("x", x), ("z", z), ("ell", ell), ("d", d)):
        if np.any((arr != 0) & (arr != 1)):
            out.append(f"{name}: not binary")
    if out:
        return out
    ws = np.arange(1, W + 1)
    sqp = math.sqrt(cfg.p_max_w)
    slack = rtol * max(1.0, sqp)
    for k in range(K):
        s = sinr_value(inst.stats, rho, k)
        if s < inst.gamma[k] * (1 - SINR_RTOL):
            out.append(f"sinr: UE {k} has {s:.6g} < target {inst.gamma[k]:.6g}")
    if z.sum() > der.W_max * W:
        out.append(f"fronthaul: {int(z.sum())} active APs exceed {der.W_max * W}")
    for l in range(L):
        served = x[:, l].sum()
        if served / K > z[l]:
            out.append(f"activation: AP {l} serves UEs while inactive")
        if z[l] > served:
            out.append(f"activation: AP {l} active without serving any UE")
    n_lc = ws @ ell
    n_du = ws @ d
    if (ws - 1) @ ell > z.sum() / der.W_max or z.sum() / der.W_max > n_lc:
        out.append(f"line cards: {int(n_lc)} active for {int(z.sum())} APs")
    load = cloud_gops(cfg, x, z).total
    if load > cfg.c_max_gops * n_du * (1 + rtol):
        out.append(f"processing: load {load:.6g} GOPS exceeds {cfg.c_max_gops * n_du:g}")
    if ell.sum() != 1:
        out.append("line cards: ell is not one-hot")
    if d.sum() != 1:
        out.append("DUs: d is not one-hot")
    if n_lc > n_du:
        out.append("DUs: fewer active DUs than line cards")
    if np.any(rho < -slack):
        out.append("power: negative rho")
    over = rho > sqp * x + slack
    for k, l in zip(*np.nonzero(over)):
        out.append(f"power: rho[{k},{l}] exceeds the bound for x={int(x[k, l])}")
    for l in range(L):
        if np.linalg.norm(rho[:, l]) > sqp * z[l] + slack:
            out.append(f"power: AP {l} exceeds its transmit budget")
    if inst.mode == Mode.SMALL_CELL:
        for k in range(K):
            if x[k].sum() != 1:
                out.append(f"small-cell: UE {k} served by {int(x[k].sum())} APs")
    return out


def save_plan(plan: NetworkPlan, path: str | Path, meta: dict | None = None) -> None:
    data = plan.to_dict()
    if meta:
        data["meta"] = meta
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def load_plan(path: str | Path) -> tuple[NetworkPlan, dict]:
    data = json.loads(Path(path).read_text())
    return NetworkPlan.from_dict(data), data.get("meta", {})
