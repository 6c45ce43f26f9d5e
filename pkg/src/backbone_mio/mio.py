"""Dense two-phase simplex and best-bound branch-and-bound for binary programs.

The solvers are deliberately small: the reduced problems produced by the
backbone method are small by construction, so the code favours determinism and
readable pivoting rules over speed. Programs are stored densely.
"""

import heapq
import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidInputError, SolverScaleError

LE, GE, EQ = "<=", ">=", "="
_SENSES = (LE, GE, EQ)

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
INT_TOL = 1e-6

MAX_VARIABLES = 100_000
MAX_TABLEAU_CELLS = 6_000_000


@dataclass
class LinearProgram:
    """``minimize c @ x`` subject to ``A[i] @ x (senses[i]) rhs[i]`` and ``lb <= x <= ub``."""

    c: np.ndarray
    A: np.ndarray
    senses: list
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.rhs = np.asarray(self.rhs, dtype=float).ravel()
        self.senses = [str(s) for s in self.senses]
        self.lb = np.broadcast_to(np.asarray(self.lb, dtype=float), (n,)).copy()
        self.ub = np.broadcast_to(np.asarray(self.ub, dtype=float), (n,)).copy()
        m = self.A.shape[0]
        if self.rhs.size != m or len(self.senses) != m:
            raise InvalidInputError("constraint matrix, senses and rhs disagree in length")
        bad = [s for s in self.senses if s not in _SENSES]
        if bad:
            raise InvalidInputError(f"unknown constraint sense {bad[0]!r}")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.rhs))):
            raise InvalidInputError("objective and constraint coefficients must be finite")
        if np.any(np.isnan(self.lb)) or np.any(np.isnan(self.ub)):
            raise InvalidInputError("bounds must not be NaN")
        if np.any(self.lb > self.ub):
            raise InvalidInputError("every lower bound must not exceed its upper bound")

    @property
    def n_variables(self):
        return self.c.size

    @property
    def n_constraints(self):
        return self.A.shape[0]

    def with_bounds(self, lb, ub):
        return LinearProgram(self.c, self.A, self.senses, self.rhs, lb, ub)

    def violation(self, x):
        """Largest constraint or bound violation of ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        act = self.A @ x - self.rhs
        senses = np.asarray(self.senses)
        viol = np.where(senses == LE, np.maximum(act, 0.0),
                        np.where(senses == GE, np.maximum(-act, 0.0), np.abs(act)))
        worst = viol.max(initial=0.0)
        worst = max(worst, np.maximum(self.lb - x, 0.0).max(initial=0.0))
        return max(worst, np.maximum(x - self.ub, 0.0).max(initial=0.0))


@dataclass
class BinaryProgram:
    """A linear program whose flagged variables must take values in {0, 1}."""

    base: LinearProgram
    integrality: np.ndarray
    names: list = field(default=None)

    def __post_init__(self):
        n = self.base.n_variables
        self.integrality = np.asarray(self.integrality, dtype=bool).ravel()
        if self.integrality.size != n:
            raise InvalidInputError("integrality mask must have one flag per variable")
        if self.names is None:
            self.names = [f"x{j}" for j in range(n)]
        if len(self.names) != n:
            raise InvalidInputError("need one name per variable")
        b = self.integrality
        if np.any(self.base.lb[b] < 0) or np.any(self.base.ub[b] > 1):
            raise InvalidInputError("binary variables must have bounds within [0, 1]")

    def index(self):
        return {name: j for j, name in enumerate(self.names)}

    def objective(self, x):
        return float(self.base.c @ np.asarray(x, dtype=float))

    def is_feasible(self, x, tol=FEAS_TOL):
        x = np.asarray(x, dtype=float)
        frac = np.abs(x[self.integrality] - np.round(x[self.integrality]))
        return bool(frac.max(initial=0.0) <= INT_TOL and self.base.violation(x) <= tol)


@dataclass
class MioSolution:
    values: np.ndarray
    objective: float
    status: str
    relative_gap: float = 0.0
    node_count: int = 0
    bound: float = float("nan")


class ProgramBuilder:
    """Incrementally assemble a program from named variables and sparse rows."""

    def __init__(self):
        self.names = []
        self._index = {}
        self.cost = []
        self.lb = []
        self.ub = []
        self.binary = []
        self.rows = []

    def add_variable(self, name, cost=0.0, lb=0.0, ub=1.0, binary=True):
        if name in self._index:
            raise InvalidInputError(f"duplicate variable {name!r}")
        self._index[name] = len(self.names)
        self.names.append(name)
        self.cost.append(float(cost))
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.binary.append(bool(binary))
        return self._index[name]

    def __contains__(self, name):
        return name in self._index

    def add_constraint(self, coefs, sense, rhs):
        """``coefs`` maps variable names to coefficients."""
        self.rows.append(({self._index[k]: float(v) for k, v in coefs.items()}, sense, float(rhs)))

    def linear_program(self):
        n = len(self.names)
        A = np.zeros((len(self.rows), n))
        for i, (coefs, _, _) in enumerate(self.rows):
            for j, v in coefs.items():
                A[i, j] += v
        return LinearProgram(np.array(self.cost), A, [r[1] for r in self.rows],
                             np.array([r[2] for r in self.rows]), np.array(self.lb), np.array(self.ub))

    def binary_program(self):
        return BinaryProgram(self.linear_program(), np.array(self.binary), list(self.names))


# --------------------------------------------------------------------------
# simplex


class _Unbounded(Exception):
    pass


class _OutOfTime(Exception):
    pass


def _pivot(T, r, q):
    prow = T[r] / T[r, q]
    T -= np.outer(T[:, q], prow)
    T[r] = prow


def _simplex(T, basis, n_cols, max_iter, deadline=None):
    """Primal simplex on tableau ``T`` (last row = reduced costs, last column = rhs).

    Dantzig pricing; switches to Bland's rule after a long run of degenerate
    pivots. Only the first ``n_cols`` columns may enter.
    """
    m = T.shape[0] - 1
    degenerate = 0
    bland = False
    limit = 10 * (m + n_cols)
    for it in range(max_iter):
        if deadline is not None and it % 32 == 31 and time.perf_counter() > deadline:
            raise _OutOfTime()
        d = T[-1, :n_cols]
        if bland:
            cand = np.flatnonzero(d < -OPT_TOL)
            if cand.size == 0:
                return
            q = int(cand[0])
        else:
            q = int(np.argmin(d))
            if d[q] >= -OPT_TOL:
                return
        col = T[:m, q]
        pos = np.flatnonzero(col > PIVOT_TOL)
        if pos.size == 0:
            raise _Unbounded()
        ratios = T[pos, -1] / col[pos]
        best = ratios.min()
        tied = pos[ratios <= best + 1e-12 * (1.0 + abs(best))]
        r = int(tied[np.argmin(basis[tied])])
        degenerate = degenerate + 1 if best <= FEAS_TOL else 0
        if degenerate > limit:
            bland = True
        _pivot(T, r, q)
        basis[r] = q
    raise RuntimeError("simplex iteration limit reached")


def _implied_upper(A, senses, rhs, ranges):
    """Mask of variables whose finite upper bound is implied by the rows.

    Proofs only use variables already shown to be bounded (plus lower bounds of
    0), so dropping the explicit bound rows of every proven variable is sound.
    """
    rows, rhs_le = [], []
    for i, s in enumerate(senses):
        if s in (LE, EQ):
            rows.append(A[i])
            rhs_le.append(rhs[i])
        if s in (GE, EQ):
            rows.append(-A[i])
            rhs_le.append(-rhs[i])
    n = A.shape[1]
    proven = np.zeros(n, dtype=bool)
    if not rows:
        return proven
    L = np.array(rows)
    r = np.array(rhs_le)
    neg = np.minimum(L, 0.0)
    pos = L > 0
    finite = np.isfinite(ranges)
    while True:
        blocked = ((neg < 0) & ~proven[None, :]).sum(axis=1)
        neg_sum = (neg * np.where(proven, ranges, 0.0)[None, :]).sum(axis=1)
        usable = blocked == 0
        if not usable.any():
            return proven
        with np.errstate(divide="ignore", invalid="ignore"):
            implied = np.where(pos[usable], (r[usable] - neg_sum[usable])[:, None] / L[usable], np.inf)
        best = implied.min(axis=0)
        new = finite & ~proven & (best <= ranges + 1e-9)
        if not new.any():
            return proven
        proven |= new


def solve_lp(program, max_iter=None, deadline=None):
    """Solve a :class:`LinearProgram` with the two-phase dense simplex method.

    Returns a :class:`MioSolution` whose status is ``optimal``, ``infeasible``
    or ``unbounded``, or ``time_limit`` once ``time.perf_counter()`` passes
    ``deadline``.
    """
    try:
        return _solve_lp(program, max_iter, deadline)
    except _OutOfTime:
        return MioSolution(None, float("nan"), "time_limit")


def _solve_lp(program, max_iter, deadline):
    lp = program
    n = lp.n_variables
    lb, ub = lp.lb, lp.ub
    if np.any(ub - lb < -FEAS_TOL):
        return MioSolution(None, float("nan"), "infeasible")

    # x = offset + S @ x', x' >= 0
    split = []  # (original column, sign, range of x')
    offset = np.zeros(n)
    for j in range(n):
        lo, hi = lb[j], ub[j]
        if np.isfinite(lo):
            offset[j] = lo
            if hi - lo > 0.0:
                split.append((j, 1.0, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            split.append((j, -1.0, np.inf))
        else:
            split += [(j, 1.0, np.inf), (j, -1.0, np.inf)]
    cols = np.array([s[0] for s in split], dtype=int)
    signs = np.array([s[1] for s in split])
    ranges = np.array([s[2] for s in split])
    k = cols.size

    A = lp.A[:, cols] * signs if k else np.zeros((lp.n_constraints, 0))
    b = lp.rhs - lp.A @ offset
    c = lp.c[cols] * signs if k else np.zeros(0)
    const = float(lp.c @ offset)
    senses = list(lp.senses)

    # drop rows with no live coefficients
    live = np.abs(A).max(axis=1, initial=0.0) > 0 if A.size else np.zeros(len(senses), dtype=bool)
    for i in np.flatnonzero(~live):
        s, bi = senses[i], b[i]
        if (s == LE and bi < -FEAS_TOL) or (s == GE and bi > FEAS_TOL) or (s == EQ and abs(bi) > FEAS_TOL):
            return MioSolution(None, float("nan"), "infeasible")
    A, b = A[live], b[live]
    senses = [s for s, keep in zip(senses, live) if keep]

    if k == 0:
        return MioSolution(offset.copy(), const, "optimal")

    explicit = np.isfinite(ranges) & ~_implied_upper(A, senses, b, ranges)
    if explicit.any():
        idx = np.flatnonzero(explicit)
        bound_rows = np.zeros((idx.size, k))
        bound_rows[np.arange(idx.size), idx] = 1.0
        A = np.vstack([A, bound_rows])
        b = np.concatenate([b, ranges[idx]])
        senses = senses + [LE] * idx.size

    flip = b < 0
    A[flip] *= -1
    b = np.abs(b)
    senses = [({LE: GE, GE: LE}.get(s, s) if f else s) for s, f in zip(senses, flip)]

    m = len(senses)
    n_slack = sum(s != EQ for s in senses)
    n_art = sum(s != LE for s in senses)
    n_cols = k + n_slack + n_art
    if (m + 1) * (n_cols + 1) > MAX_TABLEAU_CELLS:
        raise SolverScaleError(
            f"LP tableau of {m} rows x {n_cols} columns exceeds the dense-simplex cap")
    T = np.zeros((m + 1, n_cols + 1))
    T[:m, :k] = A
    T[:m, -1] = b
    basis = np.empty(m, dtype=int)
    s_col, a_col = k, k + n_slack
    art_rows = []
    for i, s in enumerate(senses):
        if s == LE:
            T[i, s_col] = 1.0
            basis[i] = s_col
            s_col += 1
        else:
            if s == GE:
                T[i, s_col] = -1.0
                s_col += 1
            T[i, a_col] = 1.0
            basis[i] = a_col
            art_rows.append(i)
            a_col += 1
    if max_iter is None:
        max_iter = 50 * (m + n_cols) + 1000

    art_start = k + n_slack
    if art_rows:
        T[-1, :] = -T[art_rows].sum(axis=0)
        T[-1, art_start:n_cols] = 0.0
        try:
            _simplex(T, basis, n_cols, max_iter, deadline)
        except _Unbounded:  # pragma: no cover - phase one is bounded below by 0
            raise RuntimeError("phase one reported unbounded")
        if -T[-1, -1] > FEAS_TOL * max(1.0, float(b.max(initial=0.0))):
            return MioSolution(None, float("nan"), "infeasible")
        # drive zero-level artificials out of the basis
        keep = np.ones(m + 1, dtype=bool)
        for r in range(m):
            if basis[r] >= art_start:
                row = np.abs(T[r, :art_start])
                q = int(np.argmax(row))
                if row[q] > PIVOT_TOL:
                    _pivot(T, r, q)
                    basis[r] = q
                else:
                    keep[r] = False
        T = T[keep]
        basis = basis[keep[:m]]
        T = np.delete(T, np.s_[art_start:n_cols], axis=1)
        n_cols = art_start
        m = T.shape[0] - 1

    T[-1, :] = 0.0
    T[-1, :k] = c
    for r in range(m):
        cb = T[-1, basis[r]]
        if cb != 0.0:
            T[-1] -= cb * T[r]
    try:
        _simplex(T, basis, n_cols, max_iter, deadline)
    except _Unbounded:
        return MioSolution(None, float("-inf"), "unbounded")

    xp = np.zeros(n_cols)
    xp[basis] = T[:m, -1]
    x = offset.copy()
    np.add.at(x, cols, signs * xp[:k])
    return MioSolution(x, float(lp.c @ x), "optimal")


# --------------------------------------------------------------------------
# branch and bound


def _round_and_repair(program, x, max_flips=None):
    """Round binaries to the nearest integer and greedily flip until feasible.

    Returns a feasible point or ``None``. Only used when every variable is
    binary, since continuous values cannot be repaired by flips.
    """
    lp = program.base
    xr = np.clip(np.round(x), lp.lb, lp.ub)
    senses = np.asarray(lp.senses)

    def total_violation(act):
        d = act - lp.rhs[:, None] if act.ndim == 2 else act - lp.rhs
        s = senses[:, None] if act.ndim == 2 else senses
        v = np.where(s == LE, np.maximum(d, 0.0), np.where(s == GE, np.maximum(-d, 0.0), np.abs(d)))
        return v.sum(axis=0)

    act = lp.A @ xr
    viol = total_violation(act)
    free = np.flatnonzero(lp.lb < lp.ub)
    if max_flips is None:
        max_flips = free.size
    for _ in range(max_flips):
        if viol <= FEAS_TOL:
            break
        delta = 1.0 - 2.0 * xr[free]
        trial = total_violation(act[:, None] + lp.A[:, free] * delta[None, :])
        j = int(np.argmin(trial))
        if trial[j] >= viol - 1e-12:
            return None
        xr[free[j]] += delta[j]
        act = act + lp.A[:, free[j]] * delta[j]
        viol = trial[j]
    if viol > FEAS_TOL:
        return None
    return xr


def _relative_gap(incumbent, bound):
    return max(0.0, (incumbent - bound) / max(abs(incumbent), 1e-9))


def solve_bip(program, gap_tolerance=0.0, time_budget=None, incumbent=None, max_nodes=None):
    """Best-bound branch-and-bound over the binary variables of ``program``.

    Parameters
    ----------
    program : BinaryProgram
    gap_tolerance : float
        Stop once ``(incumbent - best_bound) / max(|incumbent|, 1e-9)`` falls to
        this value.
    time_budget : float, optional
        Wall-clock seconds; on expiry the incumbent is returned with status
        ``time_limit`` and its certified gap.
    incumbent : array-like, optional
        A known feasible point used as the initial upper bound. Ignored if
        infeasible.
    max_nodes : int, optional
        Node limit, treated like the time budget.
    """
    if gap_tolerance < 0:
        raise InvalidInputError("gap_tolerance must be non-negative")
    lp = program.base
    if lp.n_variables > MAX_VARIABLES:
        raise SolverScaleError(
            f"{lp.n_variables} variables exceed the dense branch-and-bound cap of {MAX_VARIABLES}")
    start = time.perf_counter()
    binaries = np.flatnonzero(program.integrality)
    pure = binaries.size == lp.n_variables

    best_x, best_obj = None, np.inf
    if incumbent is not None:
        x0 = np.asarray(incumbent, dtype=float)
        if x0.shape == (lp.n_variables,) and program.is_feasible(x0):
            best_x, best_obj = x0.copy(), program.objective(x0)

    def offer(x):
        nonlocal best_x, best_obj
        obj = program.objective(x)
        if obj < best_obj - 1e-12 * max(1.0, abs(obj)):
            best_x, best_obj = x.copy(), obj

    root_lb, root_ub = lp.lb.copy(), lp.ub.copy()
    heap = [(-np.inf, 0, root_lb, root_ub)]
    seq = 1
    nodes = 0
    status = None
    bound = -np.inf
    while heap:
        key, _, lb, ub = heap[0]
        bound = key
        if best_x is not None and _relative_gap(best_obj, bound) <= gap_tolerance:
            break
        if time_budget is not None and time.perf_counter() - start > time_budget:
            status = "time_limit"
            break
        if max_nodes is not None and nodes >= max_nodes:
            status = "time_limit"
            break
        heapq.heappop(heap)
        nodes += 1
        deadline = None if time_budget is None else start + time_budget
        sol = solve_lp(lp.with_bounds(lb, ub), deadline=deadline)
        if sol.status == "time_limit":
            # the node is unexplored: keep its bound in play
            heapq.heappush(heap, (key, seq, lb, ub))
            seq += 1
            status = "time_limit"
            break
        if sol.status == "infeasible":
            continue
        if sol.status == "unbounded":
            if nodes == 1:
                return MioSolution(None, float("-inf"), "unbounded", np.inf, nodes)
            continue
        node_obj = sol.objective
        if best_x is not None and node_obj >= best_obj - 1e-9 * max(1.0, abs(best_obj)):
            continue
        x = sol.values
        frac = np.abs(x[binaries] - np.round(x[binaries]))
        if frac.max(initial=0.0) <= INT_TOL:
            xi = x.copy()
            xi[binaries] = np.round(xi[binaries])
            if program.is_feasible(xi):
                offer(xi)
                continue
        if pure:
            xr = _round_and_repair(program, x)
            if xr is not None:
                offer(xr)
        # most fractional binary, ties to the lowest index
        dist = np.abs(frac - 0.5)
        cand = binaries[frac > INT_TOL]
        dist = dist[frac > INT_TOL]
        j = int(cand[np.argmin(dist)])
        for val in (0.0, 1.0):
            clb, cub = lb.copy(), ub.copy()
            clb[j] = cub[j] = val
            heapq.heappush(heap, (node_obj, seq, clb, cub))
            seq += 1

    if best_x is None:
        if status == "time_limit":
            return MioSolution(None, float("nan"), "time_limit", np.inf, nodes, bound)
        return MioSolution(None, float("nan"), "infeasible", np.inf, nodes)
    if not heap:
        bound = best_obj
    gap = _relative_gap(best_obj, min(bound, best_obj))
    if status is None:
        status = "optimal" if gap <= 1e-9 else "gap_limit"
    return MioSolution(best_x, best_obj, status, gap, nodes, min(bound, best_obj))


# --------------------------------------------------------------------------
# LP-format export


def _fmt_terms(coefs, names):
    parts = []
    for j in np.flatnonzero(coefs):
        v = coefs[j]
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {abs(v):.12g} {names[j]}")
    if not parts:
        return "0 " + names[0] if names else "0"
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def to_lp_format(program, name="backbone"):
    """Render a :class:`BinaryProgram` (or :class:`LinearProgram`) as LP-format text."""
    if isinstance(program, LinearProgram):
        program = BinaryProgram(program, np.zeros(program.n_variables, dtype=bool))
    lp = program.base
    names = [_safe_name(s) for s in program.names]
    out = [f"\\ {name}", "Minimize", f" obj: {_fmt_terms(lp.c, names)}", "Subject To"]
    for i in range(lp.n_constraints):
        out.append(f" c{i}: {_fmt_terms(lp.A[i], names)} {lp.senses[i]} {lp.rhs[i]:.12g}")
    out.append("Bounds")
    for j, nm in enumerate(names):
        lo, hi = lp.lb[j], lp.ub[j]
        lo_s = "-inf" if not np.isfinite(lo) else f"{lo:.12g}"
        hi_s = "+inf" if not np.isfinite(hi) else f"{hi:.12g}"
        out.append(f" {lo_s} <= {nm} <= {hi_s}")
    bins = [names[j] for j in np.flatnonzero(program.integrality)]
    if bins:
        out.append("Binary")
        out.extend(f" {nm}" for nm in bins)
    out.append("End")
    return "\n".join(out) + "\n"


def write_lp(program, path, name="backbone"):
    with open(path, "w") as fh:
        fh.write(to_lp_format(program, name=name))


def _safe_name(s):
    return "".join(ch if ch.isalnum() or ch in "_." else "_" for ch in str(s))
