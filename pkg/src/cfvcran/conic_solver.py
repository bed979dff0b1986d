"""Dense primal-dual interior-point solver for second-order cone programs.

Problem form::

    minimize    c^T x + offset
    subject to  G x + s = h,   s in K
                A x = b
                lb <= x <= ub

K is a product of nonnegative orthants ('l'), second-order cones ('q',
``t >= ||u||``) and rotated cones ('r', ``2 s t >= ||u||^2, s, t >= 0``)
laid out over the rows of G in the order given by ``cones``.

The method is a homogeneous self-dual embedding with Nesterov-Todd scaling
and Mehrotra predictor-corrector steps.  The embedding yields either an
optimal pair or a certificate of primal or dual infeasibility.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200
_SQRT_HALF = np.sqrt(0.5)


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass
class ConicProblem:
    c: np.ndarray
    G: np.ndarray
    h: np.ndarray
    cones: list[tuple[str, int]]
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None
    binary: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    offset: float = 0.0
    names: list[str] | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        self.G = np.asarray(self.G, dtype=float).reshape(-1, n)
        self.h = np.asarray(self.h, dtype=float).reshape(-1)
        self.A = np.zeros((0, n)) if self.A is None else np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.zeros(0) if self.b is None else np.asarray(self.b, dtype=float).reshape(-1)
        self.lb = np.full(n, -np.inf) if self.lb is None else np.asarray(self.lb, dtype=float).copy()
        self.ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).copy()
        self.binary = np.asarray(self.binary, dtype=int).reshape(-1)
        self.cones = [(str(kind), int(dim)) for kind, dim in self.cones]
        m = sum(dim for _, dim in self.cones)
        if self.G.shape[0] != m or self.h.size != m:
            raise ValueError(f"cone dimensions sum to {m} but G has {self.G.shape[0]} rows, h has {self.h.size}")
        if self.A.shape[0] != self.b.size:
            raise ValueError("A and b disagree in row count")
        if self.lb.size != n or self.ub.size != n:
            raise ValueError("bounds must have one entry per variable")
        for kind, dim in self.cones:
            if kind not in ("l", "q", "r"):
                raise ValueError(f"unknown cone kind {kind!r}")
            if kind == "q" and dim < 1 or kind == "r" and dim < 2:
                raise ValueError(f"cone {kind!r} of dimension {dim} is too small")

    @property
    def n(self) -> int:
        return self.c.size

    def objective(self, x) -> float:
        return float(self.c @ x) + self.offset


@dataclass
class ConicSolution:
    status: Status
    x: np.ndarray | None
    y: np.ndarray | None
    z: np.ndarray | None
    z_lb: np.ndarray | None
    z_ub: np.ndarray | None
    s: np.ndarray | None
    primal_objective: float
    dual_objective: float
    residuals: dict
    iterations: int

    @property
    def objective(self) -> float:
        return self.primal_objective


# ---------------------------------------------------------------------------
# cone algebra on the internal layout: nl orthant entries, then SOC blocks


class _Cones:
    """Orthant of size nl followed by SOC blocks; all block algebra is vectorized."""

    def __init__(self, nl: int, qdims: list[int]):
        self.nl = nl
        self.qdims = qdims
        self.qslices = []
        start = nl
        for d in qdims:
            self.qslices.append(slice(start, start + d))
            start += d
        self.m = start
        self.degree = nl + len(qdims)
        self.nq = len(qdims)
        self.heads = np.array([sl.start for sl in self.qslices], dtype=int)
        # block id of every SOC entry, offsets relative to nl
        self.blk = np.repeat(np.arange(self.nq), qdims).astype(int)
        self.starts = (self.heads - nl).astype(int)
        self.J = np.ones(self.m)
        self.J[nl:] = -1.0
        self.J[self.heads] = 1.0
        self.tail = self.J < 0

    def _bsum(self, w):
        """Per-block sums over the SOC tails of an (mq,) vector."""
        return np.bincount(self.blk, weights=w * self.tail[self.nl :], minlength=self.nq)

    def identity(self) -> np.ndarray:
        e = np.zeros(self.m)
        e[: self.nl] = 1.0
        e[self.heads] = 1.0
        return e

    def jordan(self, u, v):
        nl, blk = self.nl, self.blk
        out = np.empty(self.m)
        out[:nl] = u[:nl] * v[:nl]
        uq, vq = u[nl:], v[nl:]
        u0, v0 = u[self.heads], v[self.heads]
        out[nl:] = u0[blk] * vq + v0[blk] * uq
        out[self.heads] = u0 * v0 + self._bsum(uq * vq)
        return out

    def jordan_solve(self, lam, r):
        """Solve lam o x = r for x."""
        nl, blk = self.nl, self.blk
        out = np.empty(self.m)
        out[:nl] = r[:nl] / lam[:nl]
        lq, rq = lam[nl:], r[nl:]
        l0, r0 = lam[self.heads], r[self.heads]
        det = l0 * l0 - self._bsum(lq * lq)
        # inverse of the arrow matrix [[l0, l1'], [l1, l0 I]]
        x0 = (l0 * r0 - self._bsum(lq * rq)) / det
        out[nl:] = (rq - x0[blk] * lq) / l0[blk]
        out[self.heads] = x0
        return out

    def min_eig(self, u) -> float:
        vals = []
        if self.nl:
            vals.append(np.min(u[: self.nl]))
        if self.nq:
            uq = u[self.nl :]
            vals.append(np.min(u[self.heads] - np.sqrt(self._bsum(uq * uq))))
        return float(min(vals)) if vals else np.inf

    def max_step(self, u, du) -> float:
        alpha = np.inf
        nl = self.nl
        if nl:
            neg = du[:nl] < 0
            if np.any(neg):
                alpha = min(alpha, float(np.min(-u[:nl][neg] / du[:nl][neg])))
        if self.nq:
            # per-block rescaling keeps the quadratic clear of underflow
            su = np.maximum.reduceat(np.abs(u[nl:]), self.starts)
            sd = np.maximum.reduceat(np.abs(du[nl:]), self.starts)
            live = sd > 0
            su, sd = np.where(su > 0, su, 1.0), np.where(live, sd, 1.0)
            uq, dq = u[nl:] / su[self.blk], du[nl:] / sd[self.blk]
            u0, d0 = uq[self.starts], dq[self.starts]
            a = d0 * d0 - self._bsum(dq * dq)
            bq = u0 * d0 - self._bsum(uq * dq)
            c0 = u0 * u0 - self._bsum(uq * uq)
            steps = _soc_steps(a, bq, c0, u0, d0) * (su / sd)
            steps[~live & (c0 >= 0)] = np.inf
            alpha = min(alpha, float(np.min(steps)))
        return alpha

    def nt_scaling(self, s, z) -> "_Scaling":
        """Block NT scaling W (symmetric) with W z = W^{-1} s = lambda."""
        nl, blk = self.nl, self.blk
        w = np.sqrt(s[:nl] / z[:nl])
        sq, zq = s[nl:], z[nl:]
        Jq = self.J[nl:]
        sJs = s[self.heads] ** 2 - self._bsum(sq * sq)
        zJz = z[self.heads] ** 2 - self._bsum(zq * zq)
        sn = sq / np.sqrt(sJs)[blk]
        zn = zq / np.sqrt(zJz)[blk]
        gamma = np.sqrt(0.5 * (1.0 + np.bincount(blk, weights=sn * zn, minlength=self.nq)))
        wbar = (sn + Jq * zn) / (2.0 * gamma[blk])  # NT point: (2 wbar wbar' - J) zn = sn
        # W is the square root of that map: same form with v = sqrt(wbar)
        w0 = wbar[self.starts]
        v = wbar.copy()
        v[self.starts] += 1.0
        v /= np.sqrt(2.0 * (w0 + 1.0))[blk]
        beta = (sJs / zJz) ** 0.25
        return _Scaling(self, w, v, beta)


class _Scaling:
    """Implicit block scaling: diag(w) on the orthant, beta (2 v v' - J) per SOC block."""

    def __init__(self, cones: _Cones, w, v, beta):
        self.cones, self.w, self.v, self.beta = cones, w, v, beta
        self.Jv = cones.J[cones.nl :] * v

    def apply(self, U, inverse: bool = False):
        c = self.cones
        nl = c.nl
        U = np.asarray(U, dtype=float)
        vec = U.ndim == 1
        U2 = U[:, None] if vec else U
        out = np.empty_like(U2)
        out[:nl] = (U2[:nl] / self.w[:, None]) if inverse else (U2[:nl] * self.w[:, None])
        if c.nq:
            V = self.Jv if inverse else self.v
            coef = 1.0 / self.beta if inverse else self.beta
            Uq = U2[nl:]
            proj = np.add.reduceat(V[:, None] * Uq, c.starts, axis=0)
            Jq = c.J[nl:]
            out[nl:] = coef[c.blk][:, None] * (2.0 * V[:, None] * proj[c.blk] - Jq[:, None] * Uq)
        return out[:, 0] if vec else out

    def dense(self, inverse: bool = False) -> np.ndarray:
        return self.apply(np.eye(self.cones.m), inverse)


def _soc_steps(a, bq, c0, u0, d0) -> np.ndarray:
    """Largest alpha with u + alpha du in the cone, per block.

    a, bq, c0 are the coefficients of c0 + 2 bq alpha + a alpha^2
    (du'J du, u'J du, u'Ju); u0 and d0 are the head entries.  The roots come
    from the cancellation-free pair q / a and c0 / q, which also covers a -> 0.
    """
    out = np.full(a.shape, np.inf)
    live = c0 > 0
    out[~live] = 0.0
    disc = bq * bq - a * c0
    disc = np.where((disc < 0) & (disc > -1e-12 * bq * bq), 0.0, disc)
    ok = live & (disc >= 0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        q = -(bq + np.copysign(np.sqrt(np.where(ok, disc, 0.0)), bq))
        r1 = np.where(ok & (a != 0), q / a, np.inf)
        r2 = np.where(ok & (q != 0), c0 / q, np.inf)
        r1 = np.where(r1 > 0, r1, np.inf)
        r2 = np.where(r2 > 0, r2, np.inf)
        out[ok] = np.minimum(r1, r2)[ok]
        # the head must stay nonnegative whatever rounding did to the quadratic
        neg = live & (d0 < 0)
        out[neg] = np.minimum(out[neg], -u0[neg] / d0[neg])
    return out


def _soc_step(u, du) -> float:
    return _Cones(0, [len(u)]).max_step(np.asarray(u, float), np.asarray(du, float))


# ---------------------------------------------------------------------------
# conversion between the user form and the internal standard form


@dataclass
class _Standard:
    c: np.ndarray
    G: np.ndarray
    h: np.ndarray
    A: np.ndarray
    b: np.ndarray
    cones: _Cones
    keep_cols: np.ndarray
    keep_rows_A: np.ndarray
    lb_idx: np.ndarray
    ub_idx: np.ndarray
    lp_rows: np.ndarray  # user G rows in the orthant, in internal order
    soc_rows: list[tuple[str, np.ndarray]]  # (kind, user rows) per internal SOC block


def _rotation(dim: int) -> np.ndarray:
    T = np.eye(dim)
    T[:2, :2] = _SQRT_HALF * np.array([[1.0, 1.0], [1.0, -1.0]])
    return T


def _standardize(prob: ConicProblem) -> _Standard:
    n = prob.n
    lb_idx = np.flatnonzero(np.isfinite(prob.lb))
    ub_idx = np.flatnonzero(np.isfinite(prob.ub))
    lp_rows, soc_rows = [], []
    start = 0
    for kind, dim in prob.cones:
        rows = np.arange(start, start + dim)
        if kind == "l":
            lp_rows.append(rows)
        else:
            soc_rows.append((kind, rows))
        start += dim
    lp_rows = np.concatenate(lp_rows) if lp_rows else np.zeros(0, dtype=int)

    G_parts = [-np.eye(n)[lb_idx], np.eye(n)[ub_idx], prob.G[lp_rows]]
    h_parts = [-prob.lb[lb_idx], prob.ub[ub_idx], prob.h[lp_rows]]
    qdims = []
    for kind, rows in soc_rows:
        Gb, hb = prob.G[rows], prob.h[rows]
        if kind == "r":
            T = _rotation(rows.size)
            Gb, hb = T @ Gb, T @ hb
        G_parts.append(Gb)
        h_parts.append(hb)
        qdims.append(rows.size)
    G = np.vstack(G_parts)
    h = np.concatenate(h_parts)
    nl = lb_idx.size + ub_idx.size + lp_rows.size
    return _Standard(
        c=prob.c.copy(), G=G, h=h, A=prob.A.copy(), b=prob.b.copy(),
        cones=_Cones(nl, qdims), keep_cols=np.arange(n), keep_rows_A=np.arange(prob.A.shape[0]),
        lb_idx=lb_idx, ub_idx=ub_idx, lp_rows=lp_rows, soc_rows=soc_rows,
    )


def _independent_rows(A: np.ndarray, b: np.ndarray, tol: float = 1e-10):
    """Drop linearly dependent equality rows; report inconsistency."""
    if A.shape[0] == 0:
        return np.arange(0), True
    Q, R, piv = sla.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R)) if R.size else np.zeros(0)
    rank = int(np.sum(diag > tol * max(1.0, diag.max(initial=0.0))))
    keep = np.sort(piv[:rank])
    if rank < A.shape[0]:
        # consistency: b must lie in the row space spanned by the kept rows
        coef, *_ = np.linalg.lstsq(A[keep].T, A.T, rcond=None)
        resid = b - coef.T @ b[keep]
        if np.linalg.norm(resid) > 1e-9 * max(1.0, np.linalg.norm(b)):
            return keep, False
    return keep, True


# ---------------------------------------------------------------------------
# KKT solves


class _KKT:
    """Factorization of the scaled reduced system for one iteration."""

    def __init__(self, A, Gt):
        self.A, self.Gt = A, Gt
        n, p = Gt.shape[1], A.shape[0]
        H = Gt.T @ Gt + A.T @ A
        self.p = p
        self.full = None
        try:
            self.cH = sla.cho_factor(H + 1e-14 * np.trace(H) / max(n, 1) * np.eye(n), check_finite=False)
            if p:
                HiA = sla.cho_solve(self.cH, A.T, check_finite=False)
                S = A @ HiA
                self.cS = sla.cho_factor(S, check_finite=False)
        except (np.linalg.LinAlgError, sla.LinAlgError):
            m = Gt.shape[0]
            K = np.block([
                [np.zeros((n, n)), A.T, Gt.T],
                [A, np.zeros((p, p)), np.zeros((p, m))],
                [Gt, np.zeros((m, p)), -np.eye(m)],
            ])
            self.full = sla.lu_factor(K, check_finite=False)

    def _solve_once(self, r1, r2, r3):
        n = self.Gt.shape[1]
        if self.full is not None:
            sol = sla.lu_solve(self.full, np.concatenate([r1, r2, r3]), check_finite=False)
            return sol[:n], sol[n : n + self.p], sol[n + self.p :]
        # H dx + A' dy = r1 + Gt' r3 + A' r2, A dx = r2
        rhs = r1 + self.Gt.T @ r3 + self.A.T @ r2
        Hr = sla.cho_solve(self.cH, rhs, check_finite=False)
        if self.p:
            dy = sla.cho_solve(self.cS, self.A @ Hr - r2, check_finite=False)
            dx = Hr - sla.cho_solve(self.cH, self.A.T @ dy, check_finite=False)
        else:
            dy = np.zeros(0)
            dx = Hr
        dz = self.Gt @ dx - r3
        return dx, dy, dz

    def solve(self, r1, r2, r3, refine: int = 2):
        """Solve [0 A' Gt'; A 0 0; Gt 0 -I] (dx, dy, dz) = (r1, r2, r3)."""
        dx, dy, dz = self._solve_once(r1, r2, r3)
        for _ in range(refine):
            e1 = r1 - self.A.T @ dy - self.Gt.T @ dz
            e2 = r2 - self.A @ dx
            e3 = r3 - self.Gt @ dx + dz
            ex, ey, ez = self._solve_once(e1, e2, e3)
            dx, dy, dz = dx + ex, dy + ey, dz + ez
        return dx, dy, dz


# ---------------------------------------------------------------------------


def solve(prob: ConicProblem, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> ConicSolution:
    """Solve a continuous cone program; binary markers are ignored."""
    std = _standardize(prob)
    nan = float("nan")

    # variables absent from every constraint
    used = np.any(std.G != 0, axis=0) | np.any(std.A != 0, axis=0)
    if np.any(~used & (std.c != 0)):
        ray = np.zeros(prob.n)
        j = np.flatnonzero(~used & (std.c != 0))[0]
        ray[j] = -np.sign(std.c[j])
        return ConicSolution(Status.UNBOUNDED, ray, None, None, None, None, None, -np.inf, nan, {}, 0)
    cols = np.flatnonzero(used)

    rows, consistent = _independent_rows(std.A[:, cols], std.b)
    if not consistent:
        return ConicSolution(Status.INFEASIBLE, None, None, None, None, None, None, np.inf, nan,
                             {"reason": "inconsistent equalities"}, 0)
    c, G, h = std.c[cols], std.G[:, cols], std.h
    A, b = std.A[rows][:, cols], std.b[rows]
    cones = std.cones
    out = _hsde(c, G, h, A, b, cones, tol, max_iter)

    status, x_r, y_r, z_r, s_r, info, it = out
    x = np.zeros(prob.n)
    y = np.zeros(prob.A.shape[0])
    if x_r is not None:
        x[cols] = x_r
    if y_r is not None:
        y[rows] = y_r
    z_user, z_lb, z_ub, s_user = _unstandardize(prob, std, z_r, s_r)
    if status == Status.OPTIMAL:
        pobj = prob.objective(x)
        dobj = _dual_objective(prob, y, z_user, z_lb, z_ub)
    elif status == Status.INFEASIBLE:
        pobj, dobj = np.inf, nan
    elif status == Status.UNBOUNDED:
        pobj, dobj = -np.inf, nan
    else:
        pobj = prob.objective(x) if x_r is not None else nan
        dobj = _dual_objective(prob, y, z_user, z_lb, z_ub) if z_r is not None else nan
    return ConicSolution(status, x, y, z_user, z_lb, z_ub, s_user, pobj, dobj, info, it)


def _unstandardize(prob, std, z_r, s_r):
    n = prob.n
    if z_r is None:
        return None, None, None, None
    if s_r is None:
        s_r = np.full_like(z_r, np.nan)
    z_lb, z_ub = np.zeros(n), np.zeros(n)
    nlb, nub = std.lb_idx.size, std.ub_idx.size
    z_lb[std.lb_idx] = z_r[:nlb]
    z_ub[std.ub_idx] = z_r[nlb : nlb + nub]
    m = prob.G.shape[0]
    z_user, s_user = np.zeros(m), np.zeros(m)
    off = nlb + nub
    z_user[std.lp_rows] = z_r[off : off + std.lp_rows.size]
    s_user[std.lp_rows] = s_r[off : off + std.lp_rows.size]
    for (kind, rows), sl in zip(std.soc_rows, std.cones.qslices):
        zb, sb = z_r[sl], s_r[sl]
        if kind == "r":
            T = _rotation(rows.size)
            zb, sb = T @ zb, T @ sb
        z_user[rows] = zb
        s_user[rows] = sb
    return z_user, z_lb, z_ub, s_user


def _dual_objective(prob, y, z, z_lb, z_ub) -> float:
    fin_l, fin_u = np.isfinite(prob.lb), np.isfinite(prob.ub)
    return float(
        -prob.b @ y - prob.h @ z + prob.lb[fin_l] @ z_lb[fin_l] - prob.ub[fin_u] @ z_ub[fin_u]
    ) + prob.offset


def _hsde(c, G, h, A, b, cones: _Cones, tol, max_iter):
    n, m, p = c.size, h.size, b.size
    e = cones.identity()
    x, y = np.zeros(n), np.zeros(p)
    s, z = e.copy(), e.copy()
    tau, kappa = 1.0, 1.0
    nc, nb, nh = max(1.0, np.linalg.norm(c)), max(1.0, np.linalg.norm(b)), max(1.0, np.linalg.norm(h))
    info = {}
    best = None

    for it in range(max_iter + 1):
        rx = A.T @ y + G.T @ z + c * tau
        ry = b * tau - A @ x
        rz = s + G @ x - h * tau
        rt = kappa + c @ x + b @ y + h @ z
        mu = (s @ z + tau * kappa) / (cones.degree + 1)

        # termination
        pcost = c @ x / tau
        dcost = -(b @ y + h @ z) / tau
        pres = max(np.linalg.norm(ry) / nb, np.linalg.norm(rz) / nh) / tau
        dres = np.linalg.norm(rx) / nc / tau
        gap = s @ z / tau**2
        relgap = max(gap, abs(pcost - dcost)) / max(1.0, abs(pcost))
        info = {"primal": pres, "dual": dres, "gap": relgap, "mu": mu}
        if best is None or max(pres, dres, relgap) < best[0]:
            best = (max(pres, dres, relgap), x / tau, y / tau, z / tau, s / tau, dict(info))
        if pres <= tol and dres <= tol and relgap <= tol:
            return Status.OPTIMAL, x / tau, y / tau, z / tau, s / tau, info, it
        hz = b @ y + h @ z
        if hz < 0:
            pinf = np.linalg.norm(A.T @ y + G.T @ z) / nc / -hz
            if pinf <= tol:
                info = dict(info, certificate=pinf)
                return Status.INFEASIBLE, None, y / -hz, z / -hz, None, info, it
        cx = c @ x
        if cx < 0:
            dinf = max(np.linalg.norm(A @ x) / nb, np.linalg.norm(G @ x + s) / nh) / -cx
            if dinf <= tol:
                info = dict(info, certificate=dinf)
                return Status.UNBOUNDED, x / -cx, None, None, s / -cx, info, it
        if it == max_iter:
            break

        try:
            scal = cones.nt_scaling(s, z)
            lam = scal.apply(z)
            Gt = scal.apply(G, inverse=True)
            kkt = _KKT(A, Gt)
            # dtau coefficient direction
            x1, y1, z1t = kkt.solve(-c, b, scal.apply(h, inverse=True))
            z1 = scal.apply(z1t, inverse=True)
            denom = c @ x1 + b @ y1 + h @ z1 - kappa / tau

            def direction(eta, rc, rk):
                lr = cones.jordan_solve(lam, rc)
                r3 = -eta * rz - scal.apply(lr)
                x0, y0, z0t = kkt.solve(-eta * rx, eta * ry, scal.apply(r3, inverse=True))
                z0 = scal.apply(z0t, inverse=True)
                dtau = (-eta * rt - rk / tau - (c @ x0 + b @ y0 + h @ z0)) / denom
                dx, dy = x0 + dtau * x1, y0 + dtau * y1
                dzt = z0t + dtau * z1t
                dz = z0 + dtau * z1
                # ds from the linear equation itself: W and W^{-1} are not
                # exact inverses in floating point near the cone boundary
                ds = -eta * rz - G @ dx + h * dtau
                dkappa = (rk - kappa * dtau) / tau
                return dx, dy, dz, ds, dtau, dkappa, dzt, lr - dzt

            def step(dz, ds, dtau, dkappa):
                alpha = min(cones.max_step(s, ds), cones.max_step(z, dz))
                if dtau < 0:
                    alpha = min(alpha, -tau / dtau)
                if dkappa < 0:
                    alpha = min(alpha, -kappa / dkappa)
                return alpha

            # predictor
            aff = direction(1.0, -cones.jordan(lam, lam), -tau * kappa)
            alpha_a = min(1.0, step(*aff[2:6]))
            sigma = (1.0 - alpha_a) ** 3
            # corrector
            rc = -cones.jordan(lam, lam) + sigma * mu * e - cones.jordan(aff[7], aff[6])
            rk = -tau * kappa + sigma * mu - aff[4] * aff[5]
            dx, dy, dz, ds, dtau, dkappa, _, _ = direction(1.0 - sigma, rc, rk)
            alpha = min(1.0, 0.99 * step(dz, ds, dtau, dkappa))
        except (np.linalg.LinAlgError, sla.LinAlgError, FloatingPointError, ZeroDivisionError):
            break
        if not np.isfinite(alpha) or alpha <= 0:
            break
        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        s = s + alpha * ds
        tau += alpha * dtau
        kappa += alpha * dkappa
        if not (np.all(np.isfinite(x)) and tau > 0 and kappa > 0):
            break
        if cones.min_eig(s) <= 0 or cones.min_eig(z) <= 0:
            break

    _, xb, yb, zb, sb, infob = best
    return Status.NUMERICAL_FAILURE, xb, yb, zb, sb, infob, it


# ---------------------------------------------------------------------------
# independent certificate check


def _cone_violation(u, cones, dual=False) -> float:
    """Largest violation of cone membership (0 when inside)."""
    worst = 0.0
    start = 0
    for kind, dim in cones:
        v = u[start : start + dim]
        start += dim
        if kind == "l":
            worst = max(worst, float(np.max(-v, initial=0.0)))
        elif kind == "q":
            worst = max(worst, float(np.linalg.norm(v[1:]) - v[0]))
        else:
            # 2 s t >= ||u||^2 with s, t >= 0; measured as a distance to the equivalent SOC
            a, bb = (v[0] + v[1]) * _SQRT_HALF, (v[0] - v[1]) * _SQRT_HALF
            worst = max(worst, float(np.hypot(bb, np.linalg.norm(v[2:])) - a))
    return worst


def check_certificate(prob: ConicProblem, sol: ConicSolution, tol: float = DEFAULT_TOL) -> dict:
    """Recompute residuals of ``sol`` from the problem data.

    Returns a report with the measured quantities and a list of ``flags``
    naming every quantity above ``10 * tol``.
    """
    limit = 10 * tol
    report: dict = {"status": sol.status.value, "flags": []}
    nc = max(1.0, np.linalg.norm(prob.c))
    fin_l, fin_u = np.isfinite(prob.lb), np.isfinite(prob.ub)
    if sol.status == Status.OPTIMAL:
        x, y, z = sol.x, sol.y, sol.z
        s = prob.h - prob.G @ x
        nb = max(1.0, np.linalg.norm(prob.b))
        nh = max(1.0, np.linalg.norm(prob.h))
        scale_x = max(1.0, np.linalg.norm(x, np.inf))
        report["equality"] = float(np.linalg.norm(prob.A @ x - prob.b)) / nb
        report["cone"] = max(_cone_violation(s, prob.cones), 0.0) / nh
        bound = max(
            float(np.max(prob.lb[fin_l] - x[fin_l], initial=0.0)),
            float(np.max(x[fin_u] - prob.ub[fin_u], initial=0.0)),
        )
        report["bounds"] = bound / scale_x
        report["primal"] = max(report["equality"], report["cone"], report["bounds"])
        stat = prob.c + prob.A.T @ y + prob.G.T @ z - sol.z_lb + sol.z_ub
        report["dual"] = float(np.linalg.norm(stat)) / nc
        dual_cone = max(
            _cone_violation(z, prob.cones),
            float(np.max(-sol.z_lb, initial=0.0)),
            float(np.max(-sol.z_ub, initial=0.0)),
        )
        report["dual_cone"] = dual_cone / nc
        pobj = prob.objective(x)
        dobj = _dual_objective(prob, y, z, sol.z_lb, sol.z_ub)
        report["primal_objective"], report["dual_objective"] = pobj, dobj
        report["gap"] = abs(pobj - dobj) / max(1.0, abs(pobj))
        for key in ("primal", "dual", "dual_cone", "gap"):
            if report[key] > limit:
                report["flags"].append(key)
    elif sol.status == Status.INFEASIBLE and sol.z is not None:
        y, z = sol.y, sol.z
        lin = prob.A.T @ y + prob.G.T @ z - sol.z_lb + sol.z_ub
        value = float(
            prob.b @ y + prob.h @ z - prob.lb[fin_l] @ sol.z_lb[fin_l] + prob.ub[fin_u] @ sol.z_ub[fin_u]
        )
        report["certificate_value"] = value
        report["certificate_residual"] = float(np.linalg.norm(lin)) / nc / max(-value, 1e-300)
        report["dual_cone"] = max(
            _cone_violation(z, prob.cones),
            float(np.max(-sol.z_lb, initial=0.0)),
            float(np.max(-sol.z_ub, initial=0.0)),
        )
        if value >= 0:
            report["flags"].append("certificate_value")
        if report["certificate_residual"] > limit:
            report["flags"].append("certificate_residual")
        if report["dual_cone"] > limit:
            report["flags"].append("dual_cone")
    elif sol.status == Status.INFEASIBLE:
        report["note"] = sol.residuals.get("reason", "no certificate")
    else:
        report["flags"].append("status")
    report["ok"] = not report["flags"]
    return report


# ---------------------------------------------------------------------------
# plain-text dump


def dump_problem(prob: ConicProblem, path: str | Path) -> None:
    """Write the problem as JSON (dense arrays, infinities as strings)."""

    def enc(a):
        return [v if np.isfinite(v) else ("inf" if v > 0 else "-inf") for v in np.asarray(a, float).ravel().tolist()]

    data = {
        "n": prob.n,
        "c": enc(prob.c),
        "offset": prob.offset,
        "G": [enc(row) for row in prob.G],
        "h": enc(prob.h),
        "cones": [[k, d] for k, d in prob.cones],
        "A": [enc(row) for row in prob.A],
        "b": enc(prob.b),
        "lb": enc(prob.lb),
        "ub": enc(prob.ub),
        "binary": prob.binary.tolist(),
        "names": prob.names,
    }
    Path(path).write_text(json.dumps(data, indent=1))


def load_problem(path: str | Path) -> ConicProblem:
    data = json.loads(Path(path).read_text())

    def dec(a):
        return np.array([float(v) for v in a], dtype=float)

    n = data["n"]
    return ConicProblem(
        c=dec(data["c"]),
        G=np.array([dec(r) for r in data["G"]]).reshape(-1, n),
        h=dec(data["h"]),
        cones=[tuple(cd) for cd in data["cones"]],
        A=np.array([dec(r) for r in data["A"]]).reshape(-1, n),
        b=dec(data["b"]),
        lb=dec(data["lb"]),
        ub=dec(data["ub"]),
        binary=np.array(data["binary"], dtype=int),
        offset=float(data["offset"]),
        names=data.get("names"),
    )
