"""Best-subset linear regression: screening, heuristic subproblems, exact reduced fit.

The functions here work on the design exactly as given and minimise
``||y - X b||^2 + lambda_2 ||b||^2`` subject to ``||b||_0 <= k``; centring and
column scaling are the estimators' job.
"""

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .core import BackboneConfig, BackboneSolver, run_backbone
from .exceptions import InvalidInputError, SolverScaleError, UndefinedMetricError

IHT_MAX_ITER = 500
IHT_TOL = 1e-7
POWER_STEPS = 50
EXACT_CAP = 64


@dataclass
class RegressionDataset:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.X.ndim != 2 or self.X.shape[0] < 1 or self.X.shape[1] < 1:
            raise InvalidInputError("X must be a non-empty 2-D array")
        if self.y.size != self.X.shape[0]:
            raise InvalidInputError("X and y disagree in the number of samples")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise InvalidInputError("X and y must be finite")


@dataclass
class RegressionModel:
    coefficients: np.ndarray
    support: list
    intercept: float = 0.0
    objective_value: float = 0.0
    optimality_gap: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "coefficients": [float(v) for v in self.coefficients],
            "support": [int(j) for j in self.support],
            "intercept": float(self.intercept),
            "objective_value": float(self.objective_value),
            "optimality_gap": float(self.optimality_gap),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["coefficients"], dtype=float), [int(j) for j in d["support"]],
                   float(d["intercept"]), float(d["objective_value"]), float(d["optimality_gap"]))


class _SupportFitter:
    """Ridge least squares restricted to column subsets of one design."""

    def __init__(self, X, y, lambda_2):
        self.X = X
        self.y = y
        self.lam = float(lambda_2)
        self.G = X.T @ X
        self.c = X.T @ y
        self.yy = float(y @ y)

    def fit(self, cols):
        """Return ``(objective, coefficients)`` of the ridge fit on ``cols``."""
        cols = np.asarray(cols, dtype=int)
        if cols.size == 0:
            return self.yy, np.zeros(0)
        rhs = self.c[cols]
        if self.lam > 0 or cols.size <= self.X.shape[0]:
            A = self.G[cols][:, cols]
            if self.lam > 0:
                A[np.diag_indices(cols.size)] += self.lam
            try:
                beta = np.linalg.solve(A, rhs)
            except np.linalg.LinAlgError:
                pass
            else:
                # at the optimum (G + lam I) beta = c, so the objective is yy - c.beta
                return max(self.yy - float(rhs @ beta), 0.0), beta
        Xs = self.X[:, cols]
        ys = self.y
        if self.lam > 0:
            Xs = np.vstack([Xs, np.sqrt(self.lam) * np.eye(cols.size)])
            ys = np.concatenate([self.y, np.zeros(cols.size)])
        beta = np.linalg.lstsq(Xs, ys, rcond=None)[0]
        return self.objective(cols, beta), beta

    def add_one(self, base, candidates):
        """Objectives of ``base + [j]`` for every ``j`` in ``candidates`` (Schur complement)."""
        base = np.asarray(base, dtype=int)
        cand = np.asarray(candidates, dtype=int)
        diag = self.G[cand, cand] + self.lam
        if base.size == 0:
            base_obj, num, den = self.yy, self.c[cand] ** 2, diag
        else:
            A = self.G[base][:, base]
            A[np.diag_indices(base.size)] += self.lam
            Gbc = self.G[base][:, cand]
            sol = np.linalg.solve(A, np.column_stack([self.c[base], Gbc]))
            base_obj = self.yy - float(self.c[base] @ sol[:, 0])
            num = (self.c[cand] - Gbc.T @ sol[:, 0]) ** 2
            den = diag - np.sum(Gbc * sol[:, 1:], axis=0)
        ok = den > 1e-12 * np.maximum(diag, 1e-300)
        return np.where(ok, base_obj - num / np.where(ok, den, 1.0), base_obj)

    def objective(self, cols, beta):
        r = self.y - self.X[:, cols] @ beta
        return float(r @ r + self.lam * beta @ beta)


def correlation_utilities(X, y):
    """Absolute cosine between each column and ``y``; zero-norm columns score 0."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    ynorm = np.linalg.norm(y)
    if ynorm == 0:
        raise InvalidInputError("response is identically zero")
    norms = np.linalg.norm(X, axis=0)
    dots = np.abs(X.T @ y)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(norms > 0, dots / (np.where(norms > 0, norms, 1.0) * ynorm), 0.0)
    return np.clip(u, 0.0, 1.0)


def _top_k(v, k):
    # stable sort keeps the lower index on ties
    return np.sort(np.argsort(-np.abs(v), kind="stable")[:k])


def _power_iteration(Xp, seed, steps=POWER_STEPS, gram=None):
    G = Xp.T @ Xp if gram is None else gram
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(G.shape[0])
    v /= math.sqrt(v @ v)
    lam = 0.0
    for _ in range(steps):
        w = G @ v
        lam = math.sqrt(w @ w)
        if lam == 0:
            return 0.0
        v = w / lam
    return lam


def iht(X, y, k, lambda_2=0.0, max_iter=IHT_MAX_ITER, tol=IHT_TOL, seed=0, step=None):
    """Iterative hard thresholding from zero; returns the best iterate seen.

    ``step`` overrides the Lipschitz constant estimate (``2 * (sigma_max^2 + lambda_2)``).
    """
    n, q = X.shape
    k = min(k, q)
    # work on the Gram matrix: q is small next to n inside subproblems
    G = X.T @ X
    c = X.T @ y
    yy = float(y @ y)
    if step is None:
        L = 2.0 * (_power_iteration(X, seed, gram=G) * 1.01 + lambda_2)
    else:
        L = float(step)
    beta = np.zeros(q)

    def f(b):
        return yy - 2.0 * float(c @ b) + float(b @ (G @ b)) + lambda_2 * float(b @ b)

    obj = f(beta)
    best_obj, best = obj, beta
    if L <= 0:
        return best
    for _ in range(max_iter):
        grad = 2.0 * (G @ beta - c + lambda_2 * beta)
        v = beta - grad / L
        keep = _top_k(v, k)
        new = np.zeros(q)
        new[keep] = v[keep]
        new_obj = f(new)
        if new_obj < best_obj:
            best_obj, best = new_obj, new
        done = abs(obj - new_obj) <= tol * max(abs(obj), 1e-12)
        beta, obj = new, new_obj
        if done:
            break
    return best


def _swap_search(fitter, support, candidates, obj):
    support = list(support)
    candidates = list(candidates)
    improved = True
    while improved:
        improved = False
        for pos in range(len(support)):
            base = support[:pos] + support[pos + 1:]
            outside = np.array([j for j in candidates if j not in support], dtype=int)
            if outside.size == 0:
                continue
            try:
                trial = fitter.add_one(base, outside)
            except np.linalg.LinAlgError:
                continue
            j = int(np.argmin(trial))
            if trial[j] >= obj - 1e-10 * max(1.0, abs(obj)):
                continue
            cols = sorted(base + [int(outside[j])])
            o, _ = fitter.fit(cols)
            if o < obj - 1e-12 * max(1.0, abs(obj)):
                support = support[:pos] + [int(outside[j])] + support[pos + 1:]
                obj = o
                improved = True
    return sorted(support), obj


def fit_subproblem_heuristic(X, y, subset, k, lambda_2=0.0, seed=0, max_iter=IHT_MAX_ITER,
                             tol=IHT_TOL, swaps=True):
    """IHT restricted to ``subset``, a ridge refit of its support, then 1-swap local search.

    Returns a :class:`RegressionModel` over all ``p`` columns, zero off ``subset``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    P = np.array(sorted(int(j) for j in subset), dtype=int)
    if P.size == 0:
        raise InvalidInputError("subset is empty")
    if k < 1:
        raise InvalidInputError("sparsity budget must be at least 1")
    k = min(k, P.size)
    Xp = X[:, P]
    fitter = _SupportFitter(Xp, y, lambda_2)
    beta = iht(Xp, y, k, lambda_2, max_iter, tol, seed)
    support = list(np.flatnonzero(beta))
    obj, coef = fitter.fit(support)
    if swaps and support:
        support, obj = _swap_search(fitter, support, range(P.size), obj)
        obj, coef = fitter.fit(support)
    full = np.zeros(X.shape[1])
    full[P[support]] = coef
    return RegressionModel(full, [int(j) for j in P[support]], 0.0, obj, float("nan"))


def extract_relevant_regression(model):
    return {int(j) for j in np.flatnonzero(model.coefficients)}


def fit_exact_regression(X, y, backbone, k, lambda_2=0.0, max_backbone_size=EXACT_CAP,
                         time_budget=None, incumbent=None):
    """Best-subset ridge regression over ``backbone`` by branch-and-bound.

    Nodes fix columns in or out; a node's bound is the ridge fit on every column
    not yet excluded. Nodes are expanded best-bound first and branch on the free
    column with the largest absolute coefficient in that fit.

    Parameters
    ----------
    incumbent : RegressionModel, optional
        Starting solution; defaults to the heuristic run on ``backbone``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    B = np.array(sorted({int(j) for j in backbone}), dtype=int)
    if B.size > max_backbone_size:
        raise SolverScaleError(
            f"backbone of {B.size} features exceeds the exact-solver cap of {max_backbone_size}; "
            "shrink the backbone (lower max_backbone_size, alpha or beta)")
    if k < 1:
        raise InvalidInputError("sparsity budget must be at least 1")
    p = X.shape[1]
    if B.size == 0:
        r = y @ y
        return RegressionModel(np.zeros(p), [], 0.0, float(r), 0.0)
    start = time.perf_counter()
    fitter = _SupportFitter(X[:, B], y, lambda_2)
    q = B.size
    tol = 1e-10

    if incumbent is None:
        incumbent = fit_subproblem_heuristic(X, y, B, k, lambda_2)
    pos = {int(j): i for i, j in enumerate(B)}
    inc_support = sorted(pos[j] for j in incumbent.support if j in pos)
    inc_obj, inc_coef = fitter.fit(inc_support)
    if len(inc_support) > k:
        inc_support, inc_obj, inc_coef = [], fitter.yy, np.zeros(0)

    def offer(cols):
        nonlocal inc_support, inc_obj, inc_coef
        o, cf = fitter.fit(cols)
        if o < inc_obj:
            inc_support, inc_obj, inc_coef = list(cols), o, cf

    nodes = 0
    timed_out = False
    heap = []
    root = tuple(range(q))
    if q <= k:
        offer(list(root))
    else:
        obj, coef = fitter.fit(list(root))
        heap.append((obj, 0, (), root, coef))
    seq = 1
    bound = inc_obj
    while heap:
        bound = heap[0][0]
        if bound >= inc_obj - tol * max(1.0, abs(inc_obj)):
            heap.clear()
            break
        if time_budget is not None and time.perf_counter() - start > time_budget:
            timed_out = True
            break
        obj, _, fixed_in, free, coef = heapq.heappop(heap)
        nodes += 1
        superset = sorted(fixed_in + free)
        where = {j: i for i, j in enumerate(superset)}
        j = max(free, key=lambda f: (abs(coef[where[f]]), -f))
        rest = tuple(f for f in free if f != j)
        # column j in
        now_in = fixed_in + (j,)
        if len(now_in) == k:
            offer(sorted(now_in))
        else:
            heapq.heappush(heap, (obj, seq, now_in, rest, coef))
            seq += 1
        # column j out
        smaller = sorted(fixed_in + rest)
        if len(smaller) <= k:
            offer(smaller)
        else:
            o, cf = fitter.fit(smaller)
            if o < inc_obj - tol * max(1.0, abs(inc_obj)):
                heapq.heappush(heap, (o, seq, fixed_in, rest, cf))
                seq += 1
    if not heap:
        bound = inc_obj
    gap = max(0.0, (inc_obj - bound) / max(abs(inc_obj), 1e-9))
    full = np.zeros(p)
    full[B[inc_support]] = inc_coef
    model = RegressionModel(full, [int(B[i]) for i in inc_support], 0.0, inc_obj, gap)
    model.extra = {"nodes": nodes, "timed_out": timed_out}
    return model


def predict_regression(model, X_new):
    X_new = np.asarray(X_new, dtype=float)
    if X_new.ndim != 2 or X_new.shape[1] != len(model.coefficients):
        raise InvalidInputError(
            f"expected {len(model.coefficients)} columns, got shape {X_new.shape}")
    return X_new @ model.coefficients + model.intercept


def r_squared(y_true, y_pred):
    y_true = np.asarray(y_true, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    if y_true.size != y_pred.size or y_true.size < 2:
        raise InvalidInputError("need two equal-length vectors with at least 2 entries")
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0:
        raise UndefinedMetricError("R^2 is undefined for a constant response")
    return 1.0 - float(np.sum((y_true - y_pred) ** 2)) / ss_tot


# --------------------------------------------------------------------------
# backbone plumbing and estimators


class SparseRegressionSolver(BackboneSolver):
    def __init__(self, max_nonzeros, subproblem_nonzeros=None, lambda_2=0.0,
                 exact_cap=EXACT_CAP, exact_time_budget=None):
        self.max_nonzeros = max_nonzeros
        self.subproblem_nonzeros = subproblem_nonzeros or max_nonzeros
        self.lambda_2 = lambda_2
        self.exact_cap = exact_cap
        self.exact_time_budget = exact_time_budget
        self._best = None

    def universe_size(self, data):
        return data.X.shape[1]

    def calculate_utilities(self, data):
        return correlation_utilities(data.X, data.y)

    def fit_subproblem(self, data, subset, seed):
        k = min(self.subproblem_nonzeros, len(subset))
        return fit_subproblem_heuristic(data.X, data.y, subset, k, self.lambda_2, seed)

    def get_relevant(self, model, subset):
        # subproblem fits with at most max_nonzeros columns are feasible warm starts
        if len(model.support) <= self.max_nonzeros and (
                self._best is None or model.objective_value < self._best.objective_value):
            self._best = model
        return extract_relevant_regression(model)

    def fit(self, data, backbone):
        start = self._best
        if start is not None and not set(start.support) <= set(backbone):
            start = None
        return fit_exact_regression(data.X, data.y, backbone, self.max_nonzeros, self.lambda_2,
                                    self.exact_cap, self.exact_time_budget, incumbent=start)

    def predict(self, model, X):
        return predict_regression(model, X)


def _standardize(X, y, fit_intercept, normalize):
    x_mean = X.mean(axis=0) if fit_intercept else np.zeros(X.shape[1])
    y_mean = float(y.mean()) if fit_intercept else 0.0
    Xc = X - x_mean
    scale = np.linalg.norm(Xc, axis=0) if normalize else np.ones(X.shape[1])
    scale = np.where(scale > 0, scale, 1.0)
    return Xc / scale, y - y_mean, x_mean, scale, y_mean


class _SparseRegressionBase(RegressorMixin, BaseEstimator):
    def _prepare(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        if self.max_nonzeros < 1:
            raise InvalidInputError("max_nonzeros must be at least 1")
        Xs, yc, x_mean, scale, y_mean = _standardize(X, y, self.fit_intercept, self.normalize)
        self.n_features_in_ = X.shape[1]
        return RegressionDataset(Xs, yc), (x_mean, scale, y_mean)

    def _finish(self, std_model, stats):
        x_mean, scale, y_mean = stats
        coef = std_model.coefficients / scale
        self.coef_ = coef
        self.intercept_ = float(y_mean - x_mean @ coef)
        self.support_ = list(std_model.support)
        self.model_ = RegressionModel(coef, self.support_, self.intercept_,
                                      std_model.objective_value, std_model.optimality_gap)

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=float)
        return predict_regression(self.model_, X)


class BackboneSparseRegression(_SparseRegressionBase):
    """Best-subset regression with the backbone method.

    Correlation screening keeps ``ceil(alpha * p)`` columns, iterative hard
    thresholding fits ``num_subproblems`` random subproblems of ``beta`` times
    the retained columns, and branch-and-bound solves the problem restricted to
    the union of their supports.

    Examples
    --------
    >>> model = BackboneSparseRegression(alpha=0.5, beta=0.5, num_subproblems=5,
    ...                                  lambda_2=0.001, max_nonzeros=10)
    >>> model.fit(X, y).predict(X)  # doctest: +SKIP
    """

    def __init__(self, alpha=0.5, beta=0.5, num_subproblems=5, max_backbone_size=50,
                 max_iterations=10, lambda_2=0.001, max_nonzeros=10, subproblem_nonzeros=None,
                 exact_cap=EXACT_CAP, fit_intercept=True, normalize=True, time_budget=None,
                 random_state=0, n_jobs=1):
        self.alpha = alpha
        self.beta = beta
        self.num_subproblems = num_subproblems
        self.max_backbone_size = max_backbone_size
        self.max_iterations = max_iterations
        self.lambda_2 = lambda_2
        self.max_nonzeros = max_nonzeros
        self.subproblem_nonzeros = subproblem_nonzeros
        self.exact_cap = exact_cap
        self.fit_intercept = fit_intercept
        self.normalize = normalize
        self.time_budget = time_budget
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y, on_iteration=None):
        data, stats = self._prepare(X, y)
        config = BackboneConfig(self.num_subproblems, self.alpha, self.beta, self.max_backbone_size,
                                self.max_iterations, int(self.random_state or 0), self.time_budget)
        solver = SparseRegressionSolver(self.max_nonzeros, self.subproblem_nonzeros, self.lambda_2,
                                        self.exact_cap, self.time_budget)
        result = run_backbone(data, solver, config, self.n_jobs, on_iteration)
        self.result_ = result
        self.backbone_ = list(result.backbone)
        self.trace_ = list(result.trace)
        self._finish(result.model, stats)
        return self


class SparseRegression(_SparseRegressionBase):
    """Best-subset regression on all features, heuristically or exactly.

    ``solver="heuristic"`` runs hard thresholding with swap refinement on every
    column; ``solver="exact"`` runs branch-and-bound on every column (subject to
    ``exact_cap``).
    """

    def __init__(self, solver="heuristic", lambda_2=0.001, max_nonzeros=10, exact_cap=EXACT_CAP,
                 fit_intercept=True, normalize=True, time_budget=None, random_state=0):
        self.solver = solver
        self.lambda_2 = lambda_2
        self.max_nonzeros = max_nonzeros
        self.exact_cap = exact_cap
        self.fit_intercept = fit_intercept
        self.normalize = normalize
        self.time_budget = time_budget
        self.random_state = random_state

    def fit(self, X, y):
        data, stats = self._prepare(X, y)
        cols = range(data.X.shape[1])
        if self.solver == "heuristic":
            model = fit_subproblem_heuristic(data.X, data.y, cols, self.max_nonzeros, self.lambda_2,
                                             int(self.random_state or 0))
        elif self.solver == "exact":
            model = fit_exact_regression(data.X, data.y, cols, self.max_nonzeros, self.lambda_2,
                                         self.exact_cap, self.time_budget)
        else:
            raise InvalidInputError(f"unknown solver {self.solver!r}")
        self._finish(model, stats)
        return self
