"""Assembly of the scenario program as an explicit affine row system.

Decision vector d = [K; lam; c; b1..bQ]. Every scenario row takes the form
a'd <= u and subtracts K, so pushing K up always restores feasibility; the
optimizer then asks how negative K can go. Row kinds:

    g1  per sample:      -B(x) - K <= -t           (certificate nonnegative)
    g2  initial samples:  B(x) - K <= 1 - t         (low on the initial set)
    g3  unsafe samples:  -B(x) + lam - K <= -t      (high on the unsafe set)
    g5  per sample:  meanB(succ) - B(x) - c - K <= -delta - t
    g4  global:  (T/rho) c - lam - K <= -1/rho + mu (probability consistency)

with t >= 0 an optional uniform tightening. When ``p_max`` is set (scalar
state, quadratic certificate with columns b1 x^2 + b2 x + b3), four
half-plane rows cap the Gershgorin upper bound of the quadratic-form matrix
[[b1, b2/2], [b2/2, b3]] at p_max, which implies the same cap on its largest
eigenvalue while staying linear. Otherwise an optional coefficient box
|b_q| <= b_max guards against unbounded programs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import LAMBDA_MARGIN, InputError, MonomialBasis, VerificationProblem
from .sampling import ScenarioDataset

KIND_G1, KIND_G2, KIND_G3, KIND_G4, KIND_G5 = 1, 2, 3, 4, 5
KIND_PMAX, KIND_BOX, KIND_RAW = 6, 7, 0

_KIND_NAMES = {KIND_G1: "g1", KIND_G2: "g2", KIND_G3: "g3", KIND_G4: "g4", KIND_G5: "g5"}


@dataclass
class ConstraintSystem:
    """Rows a'd <= u over named columns, plus simple variable bounds."""

    columns: tuple[str, ...]
    a: np.ndarray
    u: np.ndarray
    kinds: np.ndarray
    refs: np.ndarray
    variable_bounds: dict[str, tuple[float, float]] = field(default_factory=dict)
    tag_strings: list[str] | None = None

    @property
    def n_rows(self) -> int:
        return len(self.u)

    @property
    def n_cols(self) -> int:
        return len(self.columns)

    def tag(self, i: int) -> str:
        if self.tag_strings is not None:
            return self.tag_strings[i]
        kind = int(self.kinds[i])
        ref = int(self.refs[i])
        if kind in _KIND_NAMES:
            return _KIND_NAMES[kind] if kind == KIND_G4 else f"{_KIND_NAMES[kind]}[{ref}]"
        if kind == KIND_PMAX:
            return f"pmax[{ref}]"
        if kind == KIND_BOX:
            return f"box[{ref}]"
        return f"row[{i}]"

    def check_vector(self, d) -> np.ndarray:
        v = np.asarray(d, dtype=np.float64)
        if v.shape != (self.n_cols,):
            raise InputError(f"decision vector has shape {v.shape}, expected ({self.n_cols},)")
        return v


def assemble(
    problem: VerificationProblem,
    basis: MonomialBasis,
    ds: ScenarioDataset,
    tighten: float = 0.0,
) -> ConstraintSystem:
    """Materialize all scenario rows for a dataset.

    Row order is by kind (g1 block, g2, g3, g5, the g4 row, then p_max or box
    rows), with sample order preserved inside each block.
    """
    if tighten < 0.0:
        raise InputError("tighten must be >= 0")
    if basis.dimension != problem.dimension:
        raise InputError("basis dimension does not match the problem")
    if ds.dimension != problem.dimension:
        raise InputError("dataset dimension does not match the problem")
    if not ds.complete:
        raise InputError("dataset is incomplete")

    feats = basis.features_matrix(ds.samples)
    mean_feats = ds.mean_features_matrix(basis)
    n, q = feats.shape
    in_mask = problem.initial_region.contains_all(ds.samples)
    un_mask = problem.unsafe_region.contains_all(ds.samples)
    n_in = int(in_mask.sum())
    n_un = int(un_mask.sum())

    extra_rows: list[tuple[np.ndarray, float, int, int]] = []
    if problem.p_max is not None:
        if problem.dimension != 1 or basis.degree != 2:
            raise InputError("p_max rows are defined for a scalar quadratic certificate")
        # basis order for (n=1, k=2) is (x^2, x, 1) -> columns b1, b2, b3
        for aux, (dcol, sign) in enumerate(((0, 1.0), (0, -1.0), (2, 1.0), (2, -1.0))):
            row = np.zeros(3 + q)
            row[3 + dcol] = 1.0
            row[3 + 1] = 0.5 * sign
            extra_rows.append((row, float(problem.p_max), KIND_PMAX, aux))
    elif problem.b_max is not None:
        for idx in range(q):
            for sign in (1.0, -1.0):
                row = np.zeros(3 + q)
                row[3 + idx] = sign
                extra_rows.append((row, float(problem.b_max), KIND_BOX, 2 * idx + (sign < 0)))

    m = 2 * n + n_in + n_un + 1 + len(extra_rows)
    a = np.zeros((m, 3 + q))
    u = np.empty(m)
    kinds = np.empty(m, dtype=np.int8)
    refs = np.empty(m, dtype=np.int64)
    idx = np.arange(n)

    def block(sl, kind, ref):
        kinds[sl] = kind
        refs[sl] = ref

    # g1
    s = slice(0, n)
    a[s, 0] = -1.0
    a[s, 3:] = -feats
    u[s] = -tighten
    block(s, KIND_G1, idx)
    # g2
    s = slice(n, n + n_in)
    a[s, 0] = -1.0
    a[s, 3:] = feats[in_mask]
    u[s] = 1.0 - tighten
    block(s, KIND_G2, idx[in_mask])
    # g3
    s = slice(n + n_in, n + n_in + n_un)
    a[s, 0] = -1.0
    a[s, 1] = 1.0
    a[s, 3:] = -feats[un_mask]
    u[s] = -tighten
    block(s, KIND_G3, idx[un_mask])
    # g5
    s = slice(n + n_in + n_un, 2 * n + n_in + n_un)
    a[s, 0] = -1.0
    a[s, 2] = -1.0
    a[s, 3:] = mean_feats - feats
    u[s] = -problem.delta - tighten
    block(s, KIND_G5, idx)
    # g4
    r = 2 * n + n_in + n_un
    a[r, 0] = -1.0
    a[r, 1] = -1.0
    a[r, 2] = problem.horizon / problem.rho
    u[r] = -1.0 / problem.rho + problem.mu
    kinds[r] = KIND_G4
    refs[r] = -1
    # p_max / box
    for off, (row, bound, kind, aux) in enumerate(extra_rows):
        a[r + 1 + off] = row
        u[r + 1 + off] = bound
        kinds[r + 1 + off] = kind
        refs[r + 1 + off] = aux

    columns = ("K", "lam", "c") + tuple(f"b{i + 1}" for i in range(q))
    bounds = {"lam": (1.0 + LAMBDA_MARGIN, math.inf), "c": (0.0, math.inf)}
    return ConstraintSystem(
        columns=columns, a=a, u=u, kinds=kinds, refs=refs, variable_bounds=bounds
    )


def evaluate_constraints(cs: ConstraintSystem, d) -> tuple[float, str]:
    """Max row violation and the tag of the worst row (lowest index on ties)."""
    v = cs.check_vector(d)
    if cs.n_rows == 0:
        return -math.inf, "vacuously-feasible"
    residuals = cs.a @ v - cs.u
    worst = int(np.argmax(residuals))  # argmax returns the first maximum
    return float(residuals[worst]), cs.tag(worst)


def tightened_offsets(problem: VerificationProblem) -> float:
    """The uniform row tightening prescribed for the zero-beta mode."""
    return problem.lipschitz_bound * problem.epsilon ** (1.0 / problem.dimension)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dump_text(cs: ConstraintSystem, path) -> None:
    """Deterministic text interchange dump (objective, rows, bounds)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("scenbar-lp 1\n")
        fh.write("minimize: K\n")
        fh.write("columns: " + " ".join(cs.columns) + "\n")
        for name in cs.columns:
            lo, hi = cs.variable_bounds.get(name, (-math.inf, math.inf))
            if lo != -math.inf or hi != math.inf:
                fh.write(f"bound: {name} {_fmt(lo)} {_fmt(hi)}\n")
        for i in range(cs.n_rows):
            coeffs = ",".join(_fmt(v) for v in cs.a[i])
            fh.write(f"row {cs.tag(i)}: {coeffs} <= {_fmt(cs.u[i])}\n")


def load_text(path) -> ConstraintSystem:
    """Read a dump back; tags survive as opaque strings."""
    columns: tuple[str, ...] = ()
    bounds: dict[str, tuple[float, float]] = {}
    rows, offsets, tags = [], [], []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "scenbar-lp 1":
            raise InputError(f"unrecognized dump header: {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("minimize:"):
                continue
            if line.startswith("columns:"):
                columns = tuple(line.split(":", 1)[1].split())
            elif line.startswith("bound:"):
                name, lo, hi = line.split(":", 1)[1].split()
                bounds[name] = (float(lo), float(hi))
            elif line.startswith("row "):
                head, rest = line[4:].split(":", 1)
                body, offset = rest.split("<=")
                rows.append([float(v) for v in body.strip().split(",")])
                offsets.append(float(offset))
                tags.append(head.strip())
            else:
                raise InputError(f"unrecognized dump line: {line!r}")
    a = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(columns))
    return ConstraintSystem(
        columns=columns,
        a=a,
        u=np.asarray(offsets),
        kinds=np.full(len(rows), KIND_RAW, dtype=np.int8),
        refs=np.full(len(rows), -1, dtype=np.int64),
        variable_bounds=bounds,
        tag_strings=tags,
    )
