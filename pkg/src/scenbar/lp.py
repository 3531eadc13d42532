"""Minimize one decision variable over millions of affine rows.

The program min K s.t. A d <= u has very few columns (certificate
coefficients plus K, lam, c) and possibly millions of rows, so the solver
runs a working-set loop: solve a small LP on a subset of rows, scan all rows
for violations, pull in the worst offenders, repeat until the incumbent is
feasible for every row.

The working-set LP itself is solved through its dual, which has one equality
constraint per column and one nonnegative variable per working row; that
keeps the simplex tableau at (columns+1) x (rows+columns) no matter how many
rows join the working set. Pivoting uses Bland's rule throughout, row order
is fixed, and the initial subset is chosen by hashing row indices, so two
runs on the same system produce bit-identical solutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import InputError
from .rng import DOMAIN_LPINIT, mix64
from .scp import KIND_G4, ConstraintSystem

GUARD_BOUND = 1e9  # artificial box used only to bound a degenerate working set
_PIVOT_TOL = 1e-10
_MAX_PIVOTS = 200_000


@dataclass
class LpSolution:
    d_star: np.ndarray
    objective: float
    active_rows: list[str]
    status: str  # Optimal | Infeasible | Unbounded | IterationLimit
    iterations: int
    max_residual: float
    certificate_rows: list[str] = field(default_factory=list)


class _Simplex:
    """Two-phase tableau simplex with Bland's rule for min c'y, Ey = q, y >= 0."""

    def __init__(self, e: np.ndarray, q: np.ndarray, cost: np.ndarray):
        self.e = e
        self.q = q
        self.cost = cost
        self.pivots = 0

    def run(self):
        e, q = self.e.copy(), self.q.copy()
        m, n = e.shape
        sign = np.where(q < 0.0, -1.0, 1.0)
        e *= sign[:, None]
        q *= sign
        kept = np.arange(m)

        # Phase I: artificial basis.
        tab = np.hstack([e, np.eye(m), q[:, None]])
        basis = list(range(n, n + m))
        cost1 = np.concatenate([np.zeros(n), np.ones(m)])
        status = self._iterate(tab, basis, cost1, blocked=())
        if status != "optimal":
            return "error", None, None, None
        if self._objective(tab, basis, cost1) > 1e-7:
            return "infeasible", None, None, None

        # Pivot artificials out; a row that cannot pivot is redundant.
        drop_rows = []
        for r in range(len(basis)):
            if basis[r] >= n:
                target = None
                for j in range(n):
                    if j not in basis and abs(tab[r, j]) > _PIVOT_TOL:
                        target = j
                        break
                if target is None:
                    drop_rows.append(r)
                else:
                    self._pivot(tab, basis, r, target)
        if drop_rows:
            keep = [r for r in range(len(basis)) if r not in drop_rows]
            tab = tab[keep]
            basis = [basis[r] for r in keep]
            kept = kept[keep]

        # Phase II over the original columns.
        cost2 = np.concatenate([self.cost, np.full(m, np.inf)])
        status = self._iterate(tab, basis, cost2, blocked=tuple(range(n, n + m)))
        if status == "unbounded":
            return "unbounded", None, None, self._ray_support(tab, basis, cost2, n)
        if status != "optimal":
            return "error", None, None, None
        y = np.zeros(n)
        for r, b in enumerate(basis):
            if b < n:
                y[b] = tab[r, -1]
        return "optimal", y, (basis, kept, sign), None

    def _objective(self, tab, basis, cost):
        return float(sum(cost[b] * tab[r, -1] for r, b in enumerate(basis)))

    def _reduced_costs(self, tab, basis, cost, ncols):
        cb = np.array([cost[b] for b in basis])
        return cost[:ncols] - cb @ tab[:, :ncols]

    def _iterate(self, tab, basis, cost, blocked):
        ncols = tab.shape[1] - 1
        blocked = set(blocked)
        while True:
            if self.pivots > _MAX_PIVOTS:
                return "pivot-limit"
            red = self._reduced_costs(tab, basis, cost, ncols)
            entering = -1
            for j in range(ncols):
                if j in blocked or j in basis:
                    continue
                if red[j] < -_PIVOT_TOL and math.isfinite(red[j]):
                    entering = j
                    break
            if entering < 0:
                return "optimal"
            col = tab[:, entering]
            best_ratio, leaving = math.inf, -1
            for r in range(tab.shape[0]):
                if col[r] > _PIVOT_TOL:
                    ratio = tab[r, -1] / col[r]
                    if ratio < best_ratio - 1e-12 or (
                        abs(ratio - best_ratio) <= 1e-12
                        and (leaving < 0 or basis[r] < basis[leaving])
                    ):
                        best_ratio, leaving = ratio, r
            if leaving < 0:
                self._entering = entering
                return "unbounded"
            self._pivot(tab, basis, leaving, entering)

    def _pivot(self, tab, basis, row, col):
        self.pivots += 1
        tab[row] /= tab[row, col]
        for r in range(tab.shape[0]):
            if r != row and abs(tab[r, col]) > 0.0:
                tab[r] -= tab[r, col] * tab[row]
        basis[row] = col

    def _ray_support(self, tab, basis, cost, n):
        j = self._entering
        support = [j] if j < n else []
        col = tab[:, j]
        for r, b in enumerate(basis):
            if b < n and col[r] < -_PIVOT_TOL:
                support.append(b)
        return sorted(support)


def _solve_working(a: np.ndarray, u: np.ndarray, obj_col: int):
    """Solve min d[obj_col] s.t. a d <= u via the dual; returns d or a verdict."""
    _, nv = a.shape
    c_obj = np.zeros(nv)
    c_obj[obj_col] = 1.0
    sx = _Simplex(a.T.copy(), -c_obj, u.astype(np.float64))
    status, _y, recovery, ray = sx.run()
    if status == "infeasible":
        # dual infeasible: the working-set primal is unbounded below
        return "unbounded", None, None, sx.pivots
    if status == "unbounded":
        return "infeasible", None, ray, sx.pivots
    if status != "optimal":
        return "error", None, None, sx.pivots
    basis, kept, sign = recovery
    # Recover the primal point: the simplex multipliers of the (sign-flipped)
    # dual equalities are the primal coordinates, up to the same sign flips.
    e_flip = a.T * sign[:, None]
    eb = e_flip[np.ix_(kept, basis)]
    cb = u[basis]
    try:
        pi = np.linalg.solve(eb.T, cb)
    except np.linalg.LinAlgError:
        pi, *_ = np.linalg.lstsq(eb.T, cb, rcond=None)
    d = np.zeros(nv)
    d[kept] = sign[kept] * pi
    active = [int(b) for b in basis]
    return "optimal", (d, active), None, sx.pivots


def _initial_subset(n_rows: int, size: int) -> np.ndarray:
    idx = np.arange(n_rows, dtype=np.uint64)
    ranks = np.asarray(mix64(idx ^ DOMAIN_LPINIT))
    order = np.argsort(ranks, kind="stable")[: min(size, n_rows)]
    return np.sort(order.astype(np.int64))


def most_violated(cs: ConstraintSystem, d, limit: int) -> list[int]:
    """Indices of the ``limit`` worst-violated rows; ties break to lower index."""
    v = cs.check_vector(d)
    residuals = cs.a @ v - cs.u
    return _top_violations(residuals, limit, tol=0.0)


def _top_violations(residuals: np.ndarray, limit: int, tol: float) -> list[int]:
    idx = np.flatnonzero(residuals > tol)
    if len(idx) == 0:
        return []
    order = np.lexsort((idx, -residuals[idx]))
    return [int(i) for i in idx[order[:limit]]]


def solve(
    cs: ConstraintSystem,
    tol_feas: float = 1e-9,
    tol_opt: float = 1e-9,
    *,
    limit: int = 64,
    initial_rows: int = 10_000,
    max_outer: int = 10_000,
) -> LpSolution:
    """Cutting-plane minimization of the K column of a constraint system."""
    if tol_feas <= 0 or tol_opt <= 0:
        raise InputError("tolerances must be positive")
    try:
        obj_col = cs.columns.index("K")
    except ValueError:
        raise InputError("constraint system has no K column") from None
    nv = cs.n_cols

    # Materialize variable bounds and normalize all rows to unit max-norm.
    extra_a, extra_u, extra_tags = [], [], []
    for name, (lo, hi) in sorted(cs.variable_bounds.items()):
        col = cs.columns.index(name)
        if math.isfinite(lo):
            row = np.zeros(nv)
            row[col] = -1.0
            extra_a.append(row)
            extra_u.append(-lo)
            extra_tags.append(f"bound[{name}>=]")
        if math.isfinite(hi):
            row = np.zeros(nv)
            row[col] = 1.0
            extra_a.append(row)
            extra_u.append(hi)
            extra_tags.append(f"bound[{name}<=]")

    a = np.vstack([cs.a, np.asarray(extra_a)]) if extra_a else cs.a.copy()
    u = np.concatenate([cs.u, np.asarray(extra_u)]) if extra_u else cs.u.copy()
    n_base = cs.n_rows

    def tag_of(i: int) -> str:
        return cs.tag(i) if i < n_base else extra_tags[i - n_base]

    scales = np.abs(a).max(axis=1)
    degenerate = scales <= 0.0
    if np.any(degenerate & (u < -tol_feas)):
        bad = int(np.flatnonzero(degenerate & (u < -tol_feas))[0])
        return LpSolution(
            d_star=np.zeros(nv),
            objective=math.nan,
            active_rows=[],
            status="Infeasible",
            iterations=0,
            max_residual=math.inf,
            certificate_rows=[tag_of(bad)],
        )
    scales[degenerate] = 1.0
    a = a / scales[:, None]
    u = u / scales

    mandatory = np.flatnonzero(np.asarray(cs.kinds) == KIND_G4)
    bound_rows = np.arange(n_base, len(u))
    working = np.unique(
        np.concatenate(
            [_initial_subset(n_base, initial_rows), mandatory, bound_rows]
        ).astype(np.int64)
    )

    guards_a, guards_u = [], []
    guard_active: list[str] = []
    d = np.zeros(nv)
    total_rows = len(u)
    outer = 0
    while outer < max_outer:
        outer += 1
        wa = a[working]
        wu = u[working]
        if guards_a:
            wa = np.vstack([wa, np.asarray(guards_a)])
            wu = np.concatenate([wu, np.asarray(guards_u)])
        status, payload, ray, _ = _solve_working(wa, wu, obj_col)
        if status == "infeasible":
            tags = [tag_of(int(working[r])) for r in (ray or []) if r < len(working)]
            return LpSolution(
                d_star=d,
                objective=math.nan,
                active_rows=[],
                status="Infeasible",
                iterations=outer,
                max_residual=math.inf,
                certificate_rows=tags,
            )
        if status == "unbounded":
            if guards_a:
                # guards present and still unbounded: genuinely malformed
                return LpSolution(
                    d_star=d,
                    objective=-math.inf,
                    active_rows=[],
                    status="Unbounded",
                    iterations=outer,
                    max_residual=math.inf,
                )
            for col in range(nv):
                for sgn in (1.0, -1.0):
                    row = np.zeros(nv)
                    row[col] = sgn
                    guards_a.append(row)
                    guards_u.append(GUARD_BOUND)
            continue
        if status == "error":
            return LpSolution(
                d_star=d,
                objective=float(d[obj_col]),
                active_rows=[],
                status="IterationLimit",
                iterations=outer,
                max_residual=math.inf,
            )
        d, active_local = payload
        residuals = a @ d - u
        worst = _top_violations(residuals, limit, tol=tol_feas)
        if not worst:
            n_work = len(working)
            active, guard_active = [], []
            for r in active_local:
                if r < n_work:
                    active.append(tag_of(int(working[r])))
                else:
                    guard_active.append(f"guard[{r - n_work}]")
            if guard_active:
                return LpSolution(
                    d_star=d,
                    objective=-math.inf,
                    active_rows=sorted(set(active)),
                    status="Unbounded",
                    iterations=outer,
                    max_residual=float(residuals.max(initial=-math.inf)),
                    certificate_rows=guard_active,
                )
            return LpSolution(
                d_star=d,
                objective=float(d[obj_col]),
                active_rows=sorted(set(active)),
                status="Optimal",
                iterations=outer,
                max_residual=float(residuals.max(initial=-math.inf)),
            )
        working = np.unique(np.concatenate([working, np.asarray(worst, dtype=np.int64)]))
        if len(working) > total_rows:
            break
    return LpSolution(
        d_star=d,
        objective=float(d[obj_col]),
        active_rows=[],
        status="IterationLimit",
        iterations=outer,
        max_residual=float((a @ d - u).max(initial=-math.inf)),
    )
