"""Linear programs: data model, min-norm encoding, and a two-phase simplex solver.

Problems have the form ``minimize c.x subject to a x <= b`` with optional
per-variable bounds. The built-in solver is a dense-tableau two-phase primal
simplex. Entering columns follow Dantzig's rule, switching to Bland's rule after
any degenerate pivot so the method cannot cycle.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import (
    InputError,
    IterationLimitError,
    RepairTimeoutError,
    SolverProtocolError,
    SolverUnavailableError,
)

FEASIBILITY_TOL = 1e-7
PIVOT_TOL = 1e-9
MAX_PIVOTS = 1_000_000


class NormObjective(enum.Enum):
    L1 = "l1"
    LINF = "linf"

    @classmethod
    def parse(cls, value) -> "NormObjective":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InputError(f"unknown norm {value!r} (expected l1 or linf)") from None

    def of(self, delta) -> float:
        delta = np.asarray(delta, dtype=np.float64)
        if delta.size == 0:
            return 0.0
        if self is NormObjective.L1:
            return float(np.sum(np.abs(delta)))
        return float(np.max(np.abs(delta)))


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LpOutcome:
    status: LpStatus
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """``minimize c.x  s.t.  a x <= b,  lower <= x <= upper``."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=np.float64).reshape(-1)
        m = c.shape[0]
        a = np.asarray(self.a, dtype=np.float64).reshape(-1, m) if m else np.zeros((len(self.b), 0))
        b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        if a.shape[0] != b.shape[0]:
            raise InputError(f"constraint matrix has {a.shape[0]} rows but rhs has {b.shape[0]}")
        lower = np.full(m, -np.inf) if self.lower is None else np.asarray(self.lower, dtype=np.float64)
        upper = np.full(m, np.inf) if self.upper is None else np.asarray(self.upper, dtype=np.float64)
        if lower.shape != (m,) or upper.shape != (m,):
            raise InputError("bounds must have one entry per variable")
        for name, arr in (("a", a), ("b", b), ("c", c)):
            if not np.all(np.isfinite(arr)):
                raise InputError(f"LP field {name} has non-finite entries")
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)) or np.any(lower == np.inf) or np.any(upper == -np.inf):
            raise InputError("invalid variable bounds")
        for name, arr in (("a", a), ("b", b), ("c", c), ("lower", lower), ("upper", upper)):
            arr = np.array(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]

    @property
    def num_rows(self) -> int:
        return self.b.shape[0]

    def slack(self, x) -> np.ndarray:
        """``b - a x``; non-negative entries mean the row holds."""
        return self.b - self.a @ np.asarray(x, dtype=np.float64)

    def is_feasible(self, x, tol: float = FEASIBILITY_TOL) -> bool:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.num_vars,):
            return False
        rows_ok = self.num_rows == 0 or float(np.min(self.slack(x))) >= -tol
        return bool(rows_ok and np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))


@dataclass(frozen=True, eq=False)
class MinNormProgram:
    """A min-norm LP together with where the delta variables live."""

    lp: LinearProgram
    num_deltas: int
    norm: NormObjective
    mask: np.ndarray = field(repr=False)

    def delta(self, x) -> np.ndarray:
        d = np.array(x[: self.num_deltas], dtype=np.float64)
        d[~self.mask] = 0.0
        return d


def encode_min_norm(
    rows: Sequence,
    num_deltas: int,
    norm: Union[NormObjective, str],
    mask=None,
) -> MinNormProgram:
    """Encode ``min ||delta||  s.t.  coeff . delta <= rhs`` for every row.

    ``mask[k]`` False pins ``delta[k]`` to zero via a pair of inequalities.
    Linf adds one bound variable ``t`` with ``+-delta_k <= t``; L1 adds one
    ``t_k`` per free delta with ``+-delta_k <= t_k``.
    """
    norm = NormObjective.parse(norm)
    mask = np.ones(num_deltas, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != (num_deltas,):
        raise InputError(f"mask must have {num_deltas} entries, got shape {mask.shape}")
    free = np.flatnonzero(mask)
    pinned = np.flatnonzero(~mask)
    n_aux = len(free) if norm is NormObjective.L1 else 1
    nv = num_deltas + n_aux

    a_rows, b_rows = [], []
    for coeff, rhs in rows:
        coeff = np.asarray(coeff, dtype=np.float64).reshape(-1)
        if coeff.shape != (num_deltas,):
            raise InputError(f"constraint row has {coeff.shape[0]} coefficients, expected {num_deltas}")
        a_rows.append(np.concatenate([coeff, np.zeros(n_aux)]))
        b_rows.append(float(rhs))
    for k in pinned:
        for s in (1.0, -1.0):
            r = np.zeros(nv)
            r[k] = s
            a_rows.append(r)
            b_rows.append(0.0)
    for j, k in enumerate(free):
        aux = num_deltas + (j if norm is NormObjective.L1 else 0)
        for s in (1.0, -1.0):
            r = np.zeros(nv)
            r[k] = s
            r[aux] = -1.0
            a_rows.append(r)
            b_rows.append(0.0)

    c = np.zeros(nv)
    c[num_deltas:] = 1.0
    lower = np.full(nv, -np.inf)
    lower[num_deltas:] = 0.0
    a = np.array(a_rows) if a_rows else np.zeros((0, nv))
    lp = LinearProgram(a, np.array(b_rows), c, lower=lower)
    return MinNormProgram(lp, num_deltas, norm, mask)


# --------------------------------------------------------------------------
# built-in solver


@dataclass
class _Standard:
    """``min cs.y  s.t.  A y + s = b, y, s >= 0`` plus the map back to x."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    offset: np.ndarray  # x = offset + recover @ y
    recover: np.ndarray
    const: float


def _standardize(lp: LinearProgram) -> _Standard:
    m = lp.num_vars
    cols, offset = [], np.zeros(m)
    extra_a, extra_b = [], []
    for j in range(m):
        lo, hi = lp.lower[j], lp.upper[j]
        e = np.zeros(m)
        e[j] = 1.0
        if np.isfinite(lo):
            offset[j] = lo
            cols.append(e)
            if np.isfinite(hi):
                extra_a.append(len(cols) - 1)
                extra_b.append(hi - lo)
        elif np.isfinite(hi):
            offset[j] = hi
            cols.append(-e)
        else:
            cols.append(e)
            cols.append(-e)
    recover = np.array(cols).T if cols else np.zeros((m, 0))
    ny = recover.shape[1]
    a = lp.a @ recover
    b = lp.b - lp.a @ offset
    if extra_a:
        box = np.zeros((len(extra_a), ny))
        box[np.arange(len(extra_a)), extra_a] = 1.0
        a = np.vstack([a, box])
        b = np.concatenate([b, extra_b])
    return _Standard(a, b, lp.c @ recover, offset, recover, float(lp.c @ offset))


class _Tableau:
    def __init__(self, rows: np.ndarray, rhs: np.ndarray, basis: list, deadline, budget):
        self.t = np.hstack([rows, rhs[:, None]])
        self.basis = list(basis)
        self.deadline = deadline
        self.budget = budget
        self.pivots = 0

    def pivot(self, r: int, j: int, obj: np.ndarray) -> None:
        t = self.t
        t[r] /= t[r, j]
        col = t[:, j].copy()
        col[r] = 0.0
        nz = np.flatnonzero(col)
        if nz.size:
            t[nz] -= np.outer(col[nz], t[r])
        if obj[j] != 0.0:
            obj -= obj[j] * t[r]
        self.basis[r] = j
        self.pivots += 1
        if self.pivots >= self.budget:
            raise IterationLimitError(f"simplex exceeded {self.budget} pivots")
        if self.deadline is not None and self.pivots % 32 == 0 and time.monotonic() > self.deadline:
            raise RepairTimeoutError("LP solve exceeded the time budget")

    def run(self, obj: np.ndarray, allowed: np.ndarray) -> bool:
        """Minimize with reduced-cost row ``obj`` (last entry is -objective).

        Returns False on an unbounded improving ray.
        """
        t = self.t
        bland = False
        while True:
            d = obj[:-1]
            cand = np.flatnonzero((d < -PIVOT_TOL) & allowed)
            if cand.size == 0:
                return True
            j = int(cand[0]) if bland else int(cand[np.argmin(d[cand])])
            col = t[:, j]
            rows = np.flatnonzero(col > PIVOT_TOL)
            if rows.size == 0:
                return False
            ratios = t[rows, -1] / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
            r = int(min(ties, key=lambda i: self.basis[i]))
            bland = t[r, -1] <= PIVOT_TOL
            self.pivot(r, j, obj)


def solve(lp: LinearProgram, deadline: Optional[float] = None, max_pivots: int = MAX_PIVOTS) -> LpOutcome:
    """Solve with the built-in two-phase simplex.

    ``deadline`` is a ``time.monotonic()`` instant after which the solve
    aborts with RepairTimeoutError.
    """
    std = _standardize(lp)
    n, ny = std.a.shape
    if n == 0:
        if np.any(std.c < -PIVOT_TOL):
            return LpOutcome(LpStatus.UNBOUNDED)
        x = std.offset.copy()
        return LpOutcome(LpStatus.OPTIMAL, x, float(lp.c @ x))

    # Columns: y (ny) | slacks (n) | artificials (n_art)
    sign = np.where(std.b < 0, -1.0, 1.0)
    a = std.a * sign[:, None]
    rhs = std.b * sign
    slack = np.diag(sign)
    need_art = np.flatnonzero(sign < 0)
    art = np.zeros((n, need_art.size))
    art[need_art, np.arange(need_art.size)] = 1.0
    rows = np.hstack([a, slack, art])
    ncol = rows.shape[1]
    basis = [ny + i for i in range(n)]
    for k, i in enumerate(need_art):
        basis[i] = ny + n + k
    tab = _Tableau(rows, rhs, basis, deadline, max_pivots)
    art_start = ny + n

    if need_art.size:
        cost = np.zeros(ncol + 1)
        cost[art_start:ncol] = 1.0
        obj = cost - tab.t[need_art].sum(axis=0)
        obj[art_start:ncol] = 0.0
        obj[-1] = -tab.t[need_art, -1].sum()
        tab.run(obj, np.ones(ncol, dtype=bool))
        if -obj[-1] > FEASIBILITY_TOL * max(1.0, float(np.max(np.abs(rhs)))):
            return LpOutcome(LpStatus.INFEASIBLE)
        # Drive artificials out of the basis; drop rows that are redundant.
        r = 0
        while r < len(tab.basis):
            if tab.basis[r] >= art_start:
                cand = np.flatnonzero(np.abs(tab.t[r, :art_start]) > PIVOT_TOL)
                if cand.size:
                    tab.pivot(r, int(cand[0]), obj)
                else:
                    tab.t = np.delete(tab.t, r, axis=0)
                    del tab.basis[r]
                    continue
            r += 1

    allowed = np.zeros(ncol, dtype=bool)
    allowed[:art_start] = True
    cost = np.zeros(ncol + 1)
    cost[:ny] = std.c
    cb = cost[tab.basis]
    obj = cost - cb @ tab.t
    obj[-1] = -(cb @ tab.t[:, -1])
    if not tab.run(obj, allowed):
        return LpOutcome(LpStatus.UNBOUNDED)

    y = _polish(std, tab, ny, n)
    x = std.offset + std.recover @ y
    return LpOutcome(LpStatus.OPTIMAL, x, float(lp.c @ x))


def _polish(std: _Standard, tab: _Tableau, ny: int, n: int) -> np.ndarray:
    """Recompute basic values from the original data to shed tableau round-off."""
    full = np.hstack([std.a, np.eye(n)])
    cols = [j for j in tab.basis if j < ny + n]
    z = np.zeros(ny + n)
    z_tab = np.zeros(ny + n)
    for r, j in enumerate(tab.basis):
        if j < ny + n:
            z_tab[j] = tab.t[r, -1]
    sol, *_ = np.linalg.lstsq(full[:, cols], std.b, rcond=None)
    z[cols] = np.maximum(sol, 0.0)
    resid_new = np.max(np.abs(full @ z - std.b), initial=0.0)
    resid_old = np.max(np.abs(full @ np.maximum(z_tab, 0.0) - std.b), initial=0.0)
    chosen = z if resid_new <= resid_old else np.maximum(z_tab, 0.0)
    return chosen[:ny]


# --------------------------------------------------------------------------
# external solvers

ExternalSolver = Callable[[LinearProgram], LpOutcome]
_REGISTRY: dict = {}


def register_solver(name: str, fn: ExternalSolver) -> None:
    _REGISTRY[name] = fn


def available_solvers() -> list:
    return sorted(_REGISTRY)


def _scipy_highs(lp: LinearProgram) -> LpOutcome:
    try:
        from scipy.optimize import linprog
    except ImportError as exc:  # pragma: no cover - scipy is a declared dependency
        raise SolverUnavailableError("scipy is not installed") from exc
    bounds = [
        (None if np.isinf(lo) else lo, None if np.isinf(hi) else hi)
        for lo, hi in zip(lp.lower, lp.upper)
    ]
    res = linprog(
        lp.c,
        A_ub=lp.a if lp.num_rows else None,
        b_ub=lp.b if lp.num_rows else None,
        bounds=bounds,
        method="highs",
    )
    if res.status == 0:
        return LpOutcome(LpStatus.OPTIMAL, np.asarray(res.x, dtype=np.float64), float(res.fun))
    if res.status == 2:
        return LpOutcome(LpStatus.INFEASIBLE)
    if res.status == 3:
        return LpOutcome(LpStatus.UNBOUNDED)
    raise SolverProtocolError(f"scipy/HiGHS failed: {res.message}")


register_solver("scipy", _scipy_highs)


def solve_external(lp: LinearProgram, solver: Union[str, ExternalSolver] = "scipy") -> LpOutcome:
    """Solve through a registered external solver and hold it to the built-in contract."""
    if callable(solver):
        fn = solver
    else:
        fn = _REGISTRY.get(solver)
        if fn is None:
            raise SolverUnavailableError(
                f"no LP solver named {solver!r}; available: {', '.join(available_solvers())}"
            )
    out = fn(lp)
    if not isinstance(out, LpOutcome):
        raise SolverProtocolError(f"solver returned {type(out).__name__}, expected LpOutcome")
    if out.status is LpStatus.OPTIMAL:
        x = None if out.x is None else np.asarray(out.x, dtype=np.float64)
        if x is None or x.shape != (lp.num_vars,) or not lp.is_feasible(x):
            raise SolverProtocolError("solver reported an optimum that violates the constraints")
        return LpOutcome(LpStatus.OPTIMAL, x, float(lp.c @ x))
    return out


# --------------------------------------------------------------------------
# plain-text dump


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def dump_lp(lp: LinearProgram) -> str:
    """Text form: ``m n``, the objective, then ``a_1 ... a_m <= b`` per row.

    Finite variable bounds are written as extra rows so the format stays a
    single inequality system over free variables.
    """
    rows = [(lp.a[i], lp.b[i]) for i in range(lp.num_rows)]
    m = lp.num_vars
    for j in range(m):
        if np.isfinite(lp.lower[j]):
            e = np.zeros(m)
            e[j] = -1.0
            rows.append((e, -lp.lower[j]))
        if np.isfinite(lp.upper[j]):
            e = np.zeros(m)
            e[j] = 1.0
            rows.append((e, lp.upper[j]))
    lines = [f"{m} {len(rows)}", " ".join(_fmt(v) for v in lp.c)]
    for coeff, rhs in rows:
        lines.append(" ".join(_fmt(v) for v in coeff) + " <= " + _fmt(rhs))
    return "\n".join(lines) + "\n"


def load_lp(text: str) -> LinearProgram:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    try:
        m, n = (int(v) for v in lines[0].split())
        c = [float(v) for v in lines[1].split()] if m else []
        a, b = [], []
        for ln in lines[2 : 2 + n]:
            lhs, rhs = ln.split("<=")
            a.append([float(v) for v in lhs.split()])
            b.append(float(rhs))
    except (ValueError, IndexError) as exc:
        raise InputError(f"malformed LP dump: {exc}") from None
    if len(c) != m or len(a) != n or any(len(r) != m for r in a):
        raise InputError("malformed LP dump: dimensions do not match header")
    return LinearProgram(np.array(a).reshape(n, m), np.array(b), np.array(c))
