"""Dense LP feasibility solver.

Problem form: A_eq x = b_eq, A_ub x <= b_ub, lb <= x <= ub.

Pipeline: row scaling -> presolve (singleton rows become variable bounds,
rows that are multiples of each other merge into one range row) -> split
into independent blocks -> bounded-variable phase-1 simplex per block.
There is no objective, so phase 1 is the whole solve.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

log = logging.getLogger(__name__)

FEAS_TOL = 1e-9
CHECK_TOL = 1e-8
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 100


class LpError(RuntimeError):
    pass


@dataclass
class LpProblem:
    n: int
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None
    A_ub: np.ndarray = None
    b_ub: np.ndarray = None
    lb: np.ndarray = None
    ub: np.ndarray = None

    def __post_init__(self):
        n = self.n
        self.A_eq = np.zeros((0, n)) if self.A_eq is None else np.atleast_2d(np.asarray(self.A_eq, float))
        self.A_ub = np.zeros((0, n)) if self.A_ub is None else np.atleast_2d(np.asarray(self.A_ub, float))
        self.b_eq = np.zeros(0) if self.b_eq is None else np.asarray(self.b_eq, float).ravel()
        self.b_ub = np.zeros(0) if self.b_ub is None else np.asarray(self.b_ub, float).ravel()
        self.lb = np.full(n, -np.inf) if self.lb is None else np.asarray(self.lb, float).copy()
        self.ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, float).copy()
        if self.A_eq.shape[1] != n or self.A_ub.shape[1] != n:
            raise ValueError("constraint matrix width does not match variable count")
        if len(self.b_eq) != len(self.A_eq) or len(self.b_ub) != len(self.A_ub):
            raise ValueError("right-hand side length does not match row count")
        if self.lb.shape != (n,) or self.ub.shape != (n,):
            raise ValueError("variable bounds must have length n")
        for a in (self.A_eq, self.A_ub, self.b_eq, self.b_ub):
            if not np.all(np.isfinite(a)):
                raise ValueError("constraint data must be finite")

    @property
    def n_eq(self) -> int:
        return len(self.b_eq)

    @property
    def n_ub(self) -> int:
        return len(self.b_ub)

    def violation(self, x) -> float:
        """Largest violation over all rows, each row scaled by its max |coef|."""
        x = np.asarray(x, float)
        worst = 0.0
        for A, b, two_sided in ((self.A_eq, self.b_eq, True), (self.A_ub, self.b_ub, False)):
            if len(b) == 0:
                continue
            scale = np.maximum(np.abs(A).max(axis=1), 1e-300)
            r = (A @ x - b) / scale
            worst = max(worst, float(np.max(np.abs(r) if two_sided else r)))
        worst = max(worst, float(np.max(self.lb - x, initial=0.0)), float(np.max(x - self.ub, initial=0.0)))
        return worst


@dataclass
class LpSolution:
    status: str  # "feasible" | "infeasible" | "iteration-limit"
    x: np.ndarray | None = None
    phase1_objective: float = float("nan")
    iterations: int = 0
    message: str = ""

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


@dataclass
class _Ranged:
    """lo <= A x <= hi with variable bounds, after presolve."""

    A: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    fixed: dict = field(default_factory=dict)


def _to_ranged(p: LpProblem) -> _Ranged:
    A = np.vstack([p.A_eq, p.A_ub])
    lo = np.concatenate([p.b_eq, np.full(p.n_ub, -np.inf)])
    hi = np.concatenate([p.b_eq, p.b_ub])
    scale = np.abs(A).max(axis=1) if len(A) else np.zeros(0)
    keep = scale > 0
    # empty rows: 0 must satisfy them
    if np.any((lo[~keep] > FEAS_TOL) | (hi[~keep] < -FEAS_TOL)):
        raise _Infeasible("an all-zero row has an unsatisfiable right-hand side")
    A, lo, hi, scale = A[keep], lo[keep], hi[keep], scale[keep]
    A = A / scale[:, None]
    return _Ranged(A, lo / scale, hi / scale, p.lb.copy(), p.ub.copy())


class _Infeasible(Exception):
    pass


def _merge_parallel(r: _Ranged) -> _Ranged:
    if len(r.A) == 0:
        return r
    first = np.argmax(r.A != 0, axis=1)
    lead = r.A[np.arange(len(r.A)), first]
    N = r.A / lead[:, None]
    key_rows = np.round(N, 12) + 0.0  # +0.0 folds -0.0
    groups: dict[bytes, int] = {}
    rows, los, his = [], [], []
    for i in range(len(r.A)):
        k = key_rows[i].tobytes()
        if lead[i] > 0:
            lo_i, hi_i = r.lo[i] / lead[i], r.hi[i] / lead[i]
        else:
            lo_i, hi_i = r.hi[i] / lead[i], r.lo[i] / lead[i]
        g = groups.get(k)
        if g is None:
            groups[k] = len(rows)
            rows.append(N[i])
            los.append(lo_i)
            his.append(hi_i)
        else:
            los[g] = max(los[g], lo_i)
            his[g] = min(his[g], hi_i)
    A = np.array(rows)
    s = np.abs(A).max(axis=1)
    los, his = np.array(los), np.array(his)
    if np.any(los > his + FEAS_TOL * np.maximum(1.0, np.abs(los))):
        raise _Infeasible("parallel rows have disjoint ranges")
    return _Ranged(A / s[:, None], los / s, his / s, r.lb, r.ub, r.fixed)


def _presolve(r: _Ranged) -> _Ranged:
    A, lo, hi, lb, ub = r.A.copy(), r.lo.copy(), r.hi.copy(), r.lb.copy(), r.ub.copy()
    n = A.shape[1]
    active_rows = np.ones(len(A), bool)
    fixed: dict[int, float] = {}
    changed = True
    while changed:
        changed = False
        nnz = (A != 0) & active_rows[:, None]
        counts = nnz.sum(axis=1)
        for i in np.flatnonzero(active_rows & (counts <= 1)):
            if counts[i] == 0:
                if lo[i] > FEAS_TOL or hi[i] < -FEAS_TOL:
                    raise _Infeasible("row reduces to an unsatisfiable constant")
                active_rows[i] = False
                continue
            j = int(np.flatnonzero(A[i])[0])
            a = A[i, j]
            l, h = (lo[i] / a, hi[i] / a) if a > 0 else (hi[i] / a, lo[i] / a)
            lb[j], ub[j] = max(lb[j], l), min(ub[j], h)
            active_rows[i] = False
            changed = True
        # fix variables whose bounds collapsed and substitute them out
        for j in range(n):
            if j in fixed or not np.isfinite(lb[j]) or not np.isfinite(ub[j]):
                continue
            if ub[j] - lb[j] <= FEAS_TOL * max(1.0, abs(lb[j])):
                if ub[j] < lb[j] - FEAS_TOL * max(1.0, abs(lb[j])):
                    raise _Infeasible(f"variable {j} has empty bounds")
                val = lb[j] if ub[j] == lb[j] else 0.5 * (lb[j] + ub[j])
                fixed[j] = val
                col = A[:, j].copy()
                lo -= col * val
                hi -= col * val
                A[:, j] = 0.0
                lb[j] = ub[j] = val
                changed = True
    if np.any(lb > ub + FEAS_TOL * np.maximum(1.0, np.abs(lb))):
        raise _Infeasible("variable bounds are empty after presolve")
    keep = active_rows & (np.abs(A).max(axis=1) > 0 if len(A) else active_rows)
    return _Ranged(A[keep], lo[keep], hi[keep], lb, ub, fixed)


def _initial_value(lb, ub, hint):
    x = np.where(np.isfinite(hint), hint, 0.0)
    return np.clip(x, lb, ub)


class _Simplex:
    """Bounded-variable phase-1 simplex on a dense tableau.

    Columns: structural x (n), row activities s (m, column -e_r),
    artificials (k, column sign*e_r).  Every row reads [A, -I, art] z = 0.
    """

    def __init__(self, A, lo, hi, lb, ub, x0, max_iters):
        m, n = A.shape
        self.m, self.n = m, n
        s0 = A @ x0
        viol_lo = s0 < lo - FEAS_TOL
        viol_hi = s0 > hi + FEAS_TOL
        art_rows = np.flatnonzero(viol_lo | viol_hi)
        k = len(art_rows)
        self.k = k
        N = n + m + k
        M = np.zeros((m, N))
        M[:, :n] = A
        M[np.arange(m), n + np.arange(m)] = -1.0
        # A x - s + sign * art = 0 with s parked on the violated bound
        sign = np.where(viol_lo[art_rows], 1.0, -1.0)
        M[art_rows, n + m + np.arange(k)] = sign
        self.M = M
        self.lower = np.concatenate([lb, lo, np.zeros(k)])
        self.upper = np.concatenate([ub, hi, np.full(k, np.inf)])
        val = np.concatenate([x0, s0, np.zeros(k)])
        basis = n + np.arange(m)
        for t, r in enumerate(art_rows):
            bound = lo[r] if viol_lo[r] else hi[r]
            val[n + r] = bound
            basis[r] = n + m + t
            val[n + m + t] = abs(s0[r] - bound)
        self.val = val
        self.basis = basis
        self.cost = np.zeros(N)
        self.cost[n + m :] = 1.0
        self.max_iters = max_iters
        self.iterations = 0
        self._refactor()

    def _refactor(self):
        B = self.M[:, self.basis]
        self.T = np.linalg.solve(B, self.M)
        nonbasic = np.ones(self.M.shape[1], bool)
        nonbasic[self.basis] = False
        self.val[self.basis] = -self.T[:, nonbasic] @ self.val[nonbasic]
        self.d = self.cost - self.cost[self.basis] @ self.T
        self.d[self.basis] = 0.0

    def objective(self) -> float:
        return float(np.sum(self.val[self.n + self.m :]))

    def run(self) -> str:
        degenerate = 0
        bland = False
        since_refactor = 0
        N = self.M.shape[1]
        is_basic = np.zeros(N, bool)
        is_basic[self.basis] = True
        while True:
            if self.objective() <= FEAS_TOL:
                return "feasible"
            if self.iterations >= self.max_iters:
                return "iteration-limit"
            up = (self.d < -FEAS_TOL) & (self.val < self.upper - FEAS_TOL) & ~is_basic
            dn = (self.d > FEAS_TOL) & (self.val > self.lower + FEAS_TOL) & ~is_basic
            cand = up | dn
            if not cand.any():
                return "optimal"
            if bland:
                j = int(np.flatnonzero(cand)[0])
            else:
                j = int(np.argmax(np.where(cand, np.abs(self.d), -1.0)))
            direction = 1.0 if up[j] else -1.0

            col = self.T[:, j]
            rate = -direction * col  # d val_B / d theta
            vb = self.val[self.basis]
            lb_b = self.lower[self.basis]
            ub_b = self.upper[self.basis]
            with np.errstate(divide="ignore", invalid="ignore"):
                dec = rate < -PIVOT_TOL
                inc = rate > PIVOT_TOL
                ratio = np.full(self.m, np.inf)
                ratio[dec] = (vb[dec] - lb_b[dec]) / -rate[dec]
                ratio[inc] = (ub_b[inc] - vb[inc]) / rate[inc]
                # Harris pass: relaxed bounds pick the widest pivot among near-ties
                relaxed = np.full(self.m, np.inf)
                relaxed[dec] = (vb[dec] - lb_b[dec] + FEAS_TOL) / -rate[dec]
                relaxed[inc] = (ub_b[inc] - vb[inc] + FEAS_TOL) / rate[inc]
            own = (self.upper[j] - self.val[j]) if direction > 0 else (self.val[j] - self.lower[j])
            theta_max = min(float(np.min(relaxed, initial=np.inf)), own)
            if not np.isfinite(theta_max):
                raise LpError("phase-1 ray is unbounded; tableau is inconsistent")

            row = -1
            if own <= theta_max and own <= float(np.min(ratio, initial=np.inf)):
                theta = own
            else:
                elig = np.flatnonzero(ratio <= theta_max)
                if bland:
                    row = int(elig[np.argmin(self.basis[elig])])
                else:
                    row = int(elig[np.argmax(np.abs(col[elig]))])
                theta = max(float(ratio[row]), 0.0)

            self.iterations += 1
            self.val[self.basis] = vb + theta * rate
            self.val[j] += direction * theta
            if theta <= FEAS_TOL:
                degenerate += 1
                if degenerate > 10 * N:
                    bland = True
            else:
                degenerate = 0

            if row < 0:  # bound flip
                continue

            leaving = self.basis[row]
            # snap the leaving variable exactly onto the bound it reached
            self.val[leaving] = self.lower[leaving] if rate[row] < 0 else self.upper[leaving]
            if leaving >= self.n + self.m:
                self.upper[leaving] = 0.0
                self.val[leaving] = 0.0
            piv = self.T[row] / col[row]
            self.T -= np.outer(col, piv)
            self.T[row] = piv
            self.d -= self.d[j] * piv
            self.d[j] = 0.0
            self.basis[row] = j
            is_basic[leaving] = False
            is_basic[j] = True
            since_refactor += 1
            if since_refactor >= REFACTOR_EVERY:
                self._refactor()
                since_refactor = 0

    def point(self) -> np.ndarray:
        self._refactor()
        return self.val[: self.n].copy()


def _solve_block(A, lo, hi, lb, ub, x0, max_iters):
    if len(A) == 0:
        return "feasible", x0, 0.0, 0
    sx = _Simplex(A, lo, hi, lb, ub, x0, max_iters)
    status = sx.run()
    obj = sx.objective()
    if status == "optimal":
        status = "feasible" if obj <= FEAS_TOL else "infeasible"
    return status, sx.point(), obj, sx.iterations


def solve_feasibility(
    p: LpProblem, tol: float = FEAS_TOL, max_iters: int = 50_000, x_hint=None, block_order=None
) -> LpSolution:
    """Find any x satisfying the constraints, or report infeasibility.

    Independent variable blocks are solved one at a time; the first
    infeasible block ends the solve.  `block_order` (a key on the smallest
    variable index in each block) lets callers try the likeliest-infeasible
    block first.
    """
    hint = np.full(p.n, np.nan) if x_hint is None else np.asarray(x_hint, float)
    try:
        r = _presolve(_merge_parallel(_to_ranged(p)))
    except _Infeasible as exc:
        return LpSolution("infeasible", None, float("inf"), 0, str(exc))

    x = _initial_value(r.lb, r.ub, hint)
    for j, v in r.fixed.items():
        x[j] = v
    free_vars = np.array([j for j in range(p.n) if j not in r.fixed], dtype=int)

    total_iters = 0
    total_obj = 0.0
    if len(r.A) and len(free_vars):
        A = r.A[:, free_vars]
        adj = csr_matrix((A != 0).astype(np.int8))
        graph = (adj.T @ adj).tocsr()
        ncomp, labels = connected_components(graph, directed=False)
        comps = [free_vars[labels == c] for c in range(ncomp)]
        comps.sort(key=lambda c: (block_order(int(c.min())) if block_order else 0, int(c.min())))
        for comp in comps:
            cols = np.searchsorted(free_vars, comp)
            rows = np.flatnonzero(np.abs(A[:, cols]).sum(axis=1) > 0)
            status, xc, obj, iters = _solve_block(
                A[np.ix_(rows, cols)], r.lo[rows], r.hi[rows], r.lb[comp], r.ub[comp], x[comp],
                max_iters - total_iters,
            )
            total_iters += iters
            total_obj += obj
            if status != "feasible":
                return LpSolution(status, None, total_obj, total_iters, f"block of {len(comp)} variables")
            x[comp] = xc

    worst = p.violation(x)
    if worst > CHECK_TOL:
        raise LpError(f"simplex returned a point violating a constraint by {worst:.3e}")
    return LpSolution("feasible", x, total_obj, total_iters)
