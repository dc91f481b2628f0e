"""Solver-agnostic conic program representation and the solve contract.

A program is ``minimize c^T x + c0`` subject to a list of blocks
``A_i x + b_i in K_i``. Cone conventions:

    Zero(m)                     expr == 0
    NonNegative(m)              expr >= 0
    SecondOrder(m)              expr[0] >= ||expr[1:]||
    RotatedSecondOrder(m)       2 expr[0] expr[1] >= ||expr[2:]||^2, expr[0], expr[1] >= 0
    Exponential()               (x, y, z) with y exp(x / y) <= z, y > 0
    Power(a)                    (x, y, z) with x^a y^(1-a) >= |z|, x, y >= 0
    PositiveSemidefinite(n)     upper triangle of a symmetric n x n matrix,
                                column-major, off-diagonals scaled by sqrt(2)

The rest of the package never talks to a solver directly; everything goes
through :func:`solve`.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import CapabilityError, ValidationError

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
NUMERICAL_LIMIT = "NumericalLimit"
ITERATION_LIMIT = "IterationLimit"


@dataclass(frozen=True)
class Cone:
    kind: str
    dim: int
    exponent: float | None = None
    order: int | None = None

    def __str__(self):
        if self.kind == "Power":
            return f"Power({self.exponent})"
        if self.kind == "PositiveSemidefinite":
            return f"PositiveSemidefinite({self.order})"
        if self.kind == "Exponential":
            return "Exponential"
        return f"{self.kind}({self.dim})"


def Zero(dim) -> Cone:
    return Cone("Zero", int(dim))


def NonNegative(dim) -> Cone:
    return Cone("NonNegative", int(dim))


def SecondOrder(dim) -> Cone:
    return Cone("SecondOrder", int(dim))


def RotatedSecondOrder(dim) -> Cone:
    return Cone("RotatedSecondOrder", int(dim))


def Exponential() -> Cone:
    return Cone("Exponential", 3)


def Power(exponent) -> Cone:
    return Cone("Power", 3, exponent=float(exponent))


def PositiveSemidefinite(order, dim=None) -> Cone:
    order = int(order)
    return Cone("PositiveSemidefinite", order * (order + 1) // 2 if dim is None else int(dim), order=order)


CONE_KINDS = ("Zero", "NonNegative", "SecondOrder", "RotatedSecondOrder", "Exponential", "Power", "PositiveSemidefinite")


@dataclass
class ConeConstraint:
    """One block ``A x + b in cone`` stored as sparse triplets."""

    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    b: np.ndarray
    cone: Cone
    name: str = ""

    @property
    def num_rows(self) -> int:
        return len(self.b)


@dataclass
class ConeProgram:
    num_vars: int
    c: np.ndarray
    c0: float = 0.0
    constraints: list = field(default_factory=list)
    var_names: dict = field(default_factory=dict)

    def objective(self, x) -> float:
        return float(self.c @ np.asarray(x)) + self.c0

    def block_values(self, x) -> list:
        """Affine expression values of every constraint block at ``x``."""
        out = []
        for con in self.constraints:
            A = sp.csr_matrix((con.vals, (con.rows, con.cols)), shape=(con.num_rows, self.num_vars))
            out.append(A @ x + con.b)
        return out


# --- affine expressions and builder ---------------------------------------------

class Affine:
    """Sparse scalar affine expression sum_i val_i x[idx_i] + const."""

    __slots__ = ("idx", "val", "const")

    def __init__(self, idx=(), val=(), const=0.0):
        self.idx = np.asarray(idx, dtype=np.int64).ravel()
        self.val = np.asarray(val, dtype=float).ravel()
        self.const = float(const)

    @classmethod
    def var(cls, i, coef=1.0) -> "Affine":
        return cls([int(i)], [coef])

    @classmethod
    def dot(cls, idx, coef, const=0.0) -> "Affine":
        return cls(idx, coef, const)

    def __add__(self, other):
        if isinstance(other, Affine):
            return Affine(np.concatenate([self.idx, other.idx]), np.concatenate([self.val, other.val]), self.const + other.const)
        return Affine(self.idx, self.val, self.const + float(other))

    __radd__ = __add__

    def __neg__(self):
        return Affine(self.idx, -self.val, -self.const)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, s):
        s = float(s)
        return Affine(self.idx, self.val * s, self.const * s)

    __rmul__ = __mul__

    def __truediv__(self, s):
        return self * (1.0 / float(s))

    def value(self, x) -> float:
        return float(np.dot(self.val, np.asarray(x)[self.idx])) + self.const


def as_affine(e) -> Affine:
    return e if isinstance(e, Affine) else Affine(const=float(e))


def affsum(items) -> Affine:
    items = [as_affine(e) for e in items]
    if not items:
        return Affine()
    return Affine(
        np.concatenate([e.idx for e in items]),
        np.concatenate([e.val for e in items]),
        sum(e.const for e in items),
    )


class ConeBuilder:
    def __init__(self):
        self.n = 0
        self.constraints = []
        self.var_names = {}
        self.obj = Affine()

    def var(self, name, shape=()) -> np.ndarray:
        size = int(np.prod(shape)) if shape else 1
        idx = np.arange(self.n, self.n + size).reshape(shape)
        self.n += size
        self.var_names[name] = idx
        return idx

    def add(self, exprs, cone: Cone, name="") -> None:
        exprs = [as_affine(e) for e in exprs]
        if len(exprs) != cone.dim:
            raise ValidationError(f"{name or cone}: {len(exprs)} rows for cone of dim {cone.dim}")
        rows = np.concatenate([np.full(len(e.idx), r, dtype=np.int64) for r, e in enumerate(exprs)])
        cols = np.concatenate([e.idx for e in exprs])
        vals = np.concatenate([e.val for e in exprs])
        b = np.array([e.const for e in exprs])
        self.constraints.append(ConeConstraint(rows, cols, vals, b, cone, name))

    def nonneg(self, expr, name="") -> None:
        self.add([expr], NonNegative(1), name)

    def minimize(self, expr) -> None:
        self.obj = as_affine(expr)

    def build(self) -> ConeProgram:
        c = np.zeros(self.n)
        np.add.at(c, self.obj.idx, self.obj.val)
        return ConeProgram(num_vars=self.n, c=c, c0=self.obj.const, constraints=self.constraints, var_names=self.var_names)


# --- validation ---------------------------------------------------------------------

@dataclass
class ValidationReport:
    errors: list
    dangling: list

    @property
    def valid(self) -> bool:
        return not self.errors


def validate(p: ConeProgram) -> ValidationReport:
    errors = []
    if len(p.c) != p.num_vars:
        errors.append(f"objective has {len(p.c)} coefficients for {p.num_vars} variables")
    used = np.zeros(p.num_vars, bool)
    used[np.flatnonzero(np.asarray(p.c)[: p.num_vars])] = True
    for i, con in enumerate(p.constraints):
        label = con.name or f"constraint {i}"
        cone = con.cone
        if cone.kind not in CONE_KINDS:
            errors.append(f"{label}: unknown cone {cone.kind!r}")
            continue
        if not (len(con.rows) == len(con.cols) == len(con.vals)):
            errors.append(f"{label}: triplet arrays differ in length")
            continue
        if len(con.cols) and (con.cols.min() < 0 or con.cols.max() >= p.num_vars):
            errors.append(f"{label}: references variable outside [0, {p.num_vars})")
        if len(con.rows) and (con.rows.min() < 0 or con.rows.max() >= con.num_rows):
            errors.append(f"{label}: row index outside the block")
        if cone.dim != con.num_rows:
            errors.append(f"{label}: cone dimension {cone.dim} != {con.num_rows} rows")
        if cone.kind == "SecondOrder" and cone.dim < 1:
            errors.append(f"{label}: second-order cone needs dim >= 1")
        if cone.kind == "RotatedSecondOrder" and cone.dim < 2:
            errors.append(f"{label}: rotated cone needs dim >= 2")
        if cone.kind in ("Exponential", "Power") and cone.dim != 3:
            errors.append(f"{label}: {cone.kind} cone is three-dimensional")
        if cone.kind == "Power" and not (cone.exponent is not None and 0.0 < cone.exponent < 1.0):
            errors.append(f"{label}: power exponent must be in (0, 1)")
        if cone.kind == "PositiveSemidefinite":
            n = cone.order or 0
            if n < 1 or cone.dim != n * (n + 1) // 2:
                errors.append(f"{label}: PSD block of dim {cone.dim} is not a triangular matrix of order {n}")
        if not errors and len(con.cols):
            used[con.cols[(con.cols >= 0) & (con.cols < p.num_vars)]] = True
    dangling = [int(i) for i in np.flatnonzero(~used)]
    return ValidationReport(errors=errors, dangling=dangling)


# --- solving -------------------------------------------------------------------------

@dataclass(frozen=True)
class SolverSettings:
    abs_tol: float = 1e-8
    rel_tol: float = 1e-8
    max_iters: int = 200
    backend: str = "clarabel"


@dataclass
class ConeSolution:
    status: str
    primal: np.ndarray | None
    objective_value: float
    primal_residual: float = math.nan
    dual_residual: float = math.nan
    gap: float = math.nan
    iterations: int = 0
    seconds: float = 0.0
    raw_status: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


BACKEND_CONES = {
    "clarabel": set(CONE_KINDS),
    "linprog": {"Zero", "NonNegative"},
}


def _rotated_to_soc(con: ConeConstraint):
    """Map a rotated cone block to a standard second-order cone block."""
    T = sp.identity(con.num_rows, format="lil")
    r = 1.0 / math.sqrt(2.0)
    T[0, 0], T[0, 1], T[1, 0], T[1, 1] = r, r, r, -r
    return T.tocsr()


def _stack(p: ConeProgram):
    blocks, bs = [], []
    for con in p.constraints:
        A = sp.csr_matrix((con.vals, (con.rows, con.cols)), shape=(con.num_rows, p.num_vars))
        b = con.b
        if con.cone.kind == "RotatedSecondOrder":
            T = _rotated_to_soc(con)
            A, b = T @ A, T @ b
        blocks.append(A)
        bs.append(b)
    if not blocks:
        return sp.csc_matrix((0, p.num_vars)), np.zeros(0)
    return sp.vstack(blocks, format="csc"), np.concatenate(bs)


def _clarabel_cone(cone: Cone):
    import clarabel

    if cone.kind == "Zero":
        return clarabel.ZeroConeT(cone.dim)
    if cone.kind == "NonNegative":
        return clarabel.NonnegativeConeT(cone.dim)
    if cone.kind in ("SecondOrder", "RotatedSecondOrder"):
        return clarabel.SecondOrderConeT(cone.dim)
    if cone.kind == "Exponential":
        return clarabel.ExponentialConeT()
    if cone.kind == "Power":
        return clarabel.PowerConeT(cone.exponent)
    return clarabel.PSDTriangleConeT(cone.order)


_CLARABEL_STATUS = {
    "Solved": OPTIMAL,
    "PrimalInfeasible": INFEASIBLE,
    "AlmostPrimalInfeasible": INFEASIBLE,
    "DualInfeasible": UNBOUNDED,
    "AlmostDualInfeasible": UNBOUNDED,
    "MaxIterations": ITERATION_LIMIT,
}


def _solve_clarabel(p: ConeProgram, settings: SolverSettings) -> ConeSolution:
    import clarabel

    G, h = _stack(p)
    opts = clarabel.DefaultSettings()
    opts.verbose = False
    opts.tol_gap_abs = settings.abs_tol
    opts.tol_gap_rel = settings.rel_tol
    opts.tol_feas = settings.rel_tol
    opts.max_iter = settings.max_iters
    opts.max_threads = 1
    cones = [_clarabel_cone(con.cone) for con in p.constraints]
    P = sp.csc_matrix((p.num_vars, p.num_vars))
    # clarabel form is s = b - A x in K, ours is G x + h in K
    t0 = time.perf_counter()
    sol = clarabel.DefaultSolver(P, np.asarray(p.c, float), -G, h, cones, opts).solve()
    seconds = time.perf_counter() - t0
    raw = str(sol.status)
    status = _CLARABEL_STATUS.get(raw, NUMERICAL_LIMIT)
    x = np.array(sol.x, dtype=float)
    usable = status in (OPTIMAL, NUMERICAL_LIMIT, ITERATION_LIMIT) and x.size == p.num_vars and np.all(np.isfinite(x))
    return ConeSolution(
        status=status,
        primal=x if usable else None,
        objective_value=p.objective(x) if usable else math.nan,
        primal_residual=float(sol.r_prim),
        dual_residual=float(sol.r_dual),
        gap=abs(float(sol.obj_val) - float(sol.obj_val_dual)),
        iterations=int(sol.iterations),
        seconds=seconds,
        raw_status=raw,
    )


def _solve_linprog(p: ConeProgram, settings: SolverSettings) -> ConeSolution:
    from scipy.optimize import linprog

    eq = [c for c in p.constraints if c.cone.kind == "Zero"]
    ineq = [c for c in p.constraints if c.cone.kind == "NonNegative"]

    def stack(cons):
        if not cons:
            return None, None
        sub = ConeProgram(num_vars=p.num_vars, c=p.c, constraints=cons)
        return _stack(sub)

    Aeq, beq = stack(eq)
    Ain, bin_ = stack(ineq)
    t0 = time.perf_counter()
    res = linprog(
        p.c,
        A_ub=None if Ain is None else -Ain,
        b_ub=None if Ain is None else bin_,
        A_eq=Aeq,
        b_eq=None if beq is None else -beq,
        bounds=(None, None),
        method="highs",
        options={"maxiter": settings.max_iters * 100, "primal_feasibility_tolerance": max(settings.abs_tol, 1e-10)},
    )
    seconds = time.perf_counter() - t0
    status = {0: OPTIMAL, 1: ITERATION_LIMIT, 2: INFEASIBLE, 3: UNBOUNDED}.get(res.status, NUMERICAL_LIMIT)
    x = res.x if status == OPTIMAL else None
    return ConeSolution(
        status=status,
        primal=x,
        objective_value=p.objective(x) if x is not None else math.nan,
        primal_residual=0.0 if x is not None else math.nan,
        dual_residual=0.0 if x is not None else math.nan,
        gap=0.0 if x is not None else math.nan,
        iterations=int(getattr(res, "nit", 0)),
        seconds=seconds,
        raw_status=str(res.message),
    )


def solve(p: ConeProgram, settings: SolverSettings | None = None) -> ConeSolution:
    settings = settings or SolverSettings()
    report = validate(p)
    if not report.valid:
        raise ValidationError("; ".join(report.errors))
    if settings.backend not in BACKEND_CONES:
        raise ValueError(f"unknown backend {settings.backend!r}")
    missing = {c.cone.kind for c in p.constraints} - BACKEND_CONES[settings.backend]
    if missing:
        raise CapabilityError(f"backend {settings.backend!r} does not support cones {sorted(missing)}")
    if settings.backend == "linprog":
        return _solve_linprog(p, settings)
    return _solve_clarabel(p, settings)


# --- text dump ---------------------------------------------------------------------

def dump_program(p: ConeProgram, path) -> None:
    """Write sparse triplets plus the cone list, one record per line."""
    lines = [f"vars {p.num_vars}", f"objective_constant {float(p.c0)!r}"]
    for i in np.flatnonzero(p.c):
        lines.append(f"c {i} {float(p.c[i])!r}")
    for name, idx in p.var_names.items():
        idx = np.asarray(idx)
        shape = "x".join(str(s) for s in idx.shape) or "scalar"
        lines.append(f"var {name} {shape} " + " ".join(str(int(i)) for i in idx.ravel()))
    for con in p.constraints:
        param = con.cone.exponent if con.cone.kind == "Power" else (con.cone.order or 0)
        lines.append(f"cone {con.cone.kind} {con.cone.dim} {float(param)!r} {con.name or '-'}")
        for r, c, v in zip(con.rows, con.cols, con.vals):
            lines.append(f"a {int(r)} {int(c)} {float(v)!r}")
        for r, v in enumerate(con.b):
            if v != 0.0:
                lines.append(f"b {r} {float(v)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_program(path) -> ConeProgram:
    num_vars, c0 = 0, 0.0
    cvals, names, cons = {}, {}, []
    cur = None

    def close():
        if cur is not None:
            kind, dim, param, name, rows, cols, vals, b = cur
            if kind == "Power":
                cone = Power(param)
            elif kind == "PositiveSemidefinite":
                cone = PositiveSemidefinite(int(param), dim)
            else:
                cone = Cone(kind, dim)
            cons.append(ConeConstraint(np.array(rows, np.int64), np.array(cols, np.int64), np.array(vals, float), b, cone, name))

    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        tag = parts[0]
        try:
            if tag == "vars":
                num_vars = int(parts[1])
            elif tag == "objective_constant":
                c0 = float(parts[1])
            elif tag == "c":
                cvals[int(parts[1])] = float(parts[2])
            elif tag == "var":
                shape = () if parts[2] == "scalar" else tuple(int(s) for s in parts[2].split("x"))
                names[parts[1]] = np.array([int(i) for i in parts[3:]], dtype=np.int64).reshape(shape)
            elif tag == "cone":
                close()
                dim = int(parts[2])
                cur = (parts[1], dim, float(parts[3]), "" if parts[4] == "-" else parts[4], [], [], [], np.zeros(dim))
            elif tag == "a":
                cur[4].append(int(parts[1]))
                cur[5].append(int(parts[2]))
                cur[6].append(float(parts[3]))
            elif tag == "b":
                cur[7][int(parts[1])] = float(parts[2])
            else:
                raise ValueError(f"unknown record {tag!r}")
        except (IndexError, ValueError, TypeError) as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from exc
    close()
    c = np.zeros(num_vars)
    for i, v in cvals.items():
        c[i] = v
    return ConeProgram(num_vars=num_vars, c=c, c0=c0, constraints=cons, var_names=names)
