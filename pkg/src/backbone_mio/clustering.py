"""Clustering as clique partitioning, with a k-means subproblem solver.

Points are grouped into ``k`` clusters of at least ``b`` members each so as to
minimise the sum of squared distances over co-clustered pairs. The backbone
is the set of point pairs that some k-means subproblem placed together; the
reduced exact problem forbids every other pair from sharing a cluster.
"""

import itertools
import time
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .core import BackboneConfig, BackboneSolver, derive_seed, run_backbone
from .exceptions import InfeasibleError, InvalidInputError, SolverError, UndefinedMetricError
from .mio import ProgramBuilder, solve_bip

KMEANS_MAX_ITER = 300
KMEANS_TOL = 1e-6
KMEANS_RESTARTS = 3


@dataclass
class ClusterAssignment:
    """Cluster labels plus solver diagnostics.

    ``objective_value`` is the within-cluster sum of squares for k-means fits and
    the unnormalised pairwise objective for exact fits.
    """

    assignment: np.ndarray
    k: int
    b: int = 1
    objective_value: float = 0.0
    optimality_gap: float = 0.0
    timed_out: bool = False

    def to_dict(self):
        return {
            "assignment": [int(a) for a in self.assignment],
            "k": int(self.k),
            "b": int(self.b),
            "objective_value": float(self.objective_value),
            "optimality_gap": float(self.optimality_gap),
            "timed_out": bool(self.timed_out),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["assignment"], dtype=int), int(d["k"]), int(d.get("b", 1)),
                   float(d["objective_value"]), float(d["optimality_gap"]), bool(d.get("timed_out", False)))


def check_points(points):
    points = check_array(points, dtype=float, ensure_min_samples=2)
    return points


def squared_distances(points):
    sq = np.sum(points * points, axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * points @ points.T
    np.maximum(d, 0.0, out=d)
    np.fill_diagonal(d, 0.0)
    return d


def pair_objective(points, labels, normalized=False):
    """Sum of squared distances over all co-clustered pairs.

    With ``normalized=True`` each cluster's sum is divided by its size, which
    equals the within-cluster sum of squares.
    """
    d = squared_distances(np.asarray(points, dtype=float))
    labels = np.asarray(labels)
    same = labels[:, None] == labels[None, :]
    if not normalized:
        return float(np.triu(d * same, 1).sum())
    inv = np.unique(labels, return_inverse=True)[1]
    sizes = np.bincount(inv)[inv]
    return float(np.triu(d * same, 1).sum(axis=1) @ (1.0 / sizes))


# --------------------------------------------------------------------------
# k-means


def _greedy_kmeanspp(X, k, rng):
    n = X.shape[0]
    trials = 2 + int(np.log(k))
    centers = np.empty((k, X.shape[1]))
    first = rng.integers(n)
    centers[0] = X[first]
    closest = np.sum((X - X[first]) ** 2, axis=1)
    for c in range(1, k):
        pot = closest.sum()
        if pot <= 0:
            cand = rng.integers(n, size=trials)
        else:
            cum = np.cumsum(closest)
            cand = np.searchsorted(cum, rng.random(trials) * pot, side="right")
            cand = np.minimum(cand, n - 1)
        dist = np.sum((X[cand][:, None, :] - X[None, :, :]) ** 2, axis=2)
        new_closest = np.minimum(closest[None, :], dist)
        best = int(np.argmin(new_closest.sum(axis=1)))
        centers[c] = X[cand[best]]
        closest = new_closest[best]
    return centers


def _lloyd(X, centers):
    k = centers.shape[0]
    for _ in range(KMEANS_MAX_ITER):
        d = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        labels = np.argmin(d, axis=1)
        counts = np.bincount(labels, minlength=k)
        for c in np.flatnonzero(counts == 0):
            # hand the worst-served point to the empty cluster
            own = d[np.arange(X.shape[0]), labels]
            movable = counts[labels] > 1
            far = int(np.argmax(np.where(movable, own, -1.0)))
            counts[labels[far]] -= 1
            labels[far] = c
            counts[c] = 1
        new = np.array([X[labels == c].mean(axis=0) for c in range(k)])
        shift = np.sqrt(np.sum((new - centers) ** 2))
        centers = new
        if shift <= KMEANS_TOL:
            break
    d = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    labels = np.argmin(d, axis=1)
    if np.unique(labels).size < k:
        labels = _final_repair(d, labels, k)
    inertia = sum(np.sum((X[labels == c] - X[labels == c].mean(axis=0)) ** 2) for c in range(k))
    return labels, float(inertia)


def _final_repair(d, labels, k):
    labels = labels.copy()
    counts = np.bincount(labels, minlength=k)
    for c in np.flatnonzero(counts == 0):
        own = d[np.arange(labels.size), labels]
        movable = counts[labels] > 1
        far = int(np.argmax(np.where(movable, own, -1.0)))
        counts[labels[far]] -= 1
        labels[far] = c
        counts[c] = 1
    return labels


def kmeans_fit(points, sample, k, seed):
    """Lloyd's algorithm with greedy k-means++ seeding, best of three restarts.

    Parameters
    ----------
    points : array of shape (n, d)
    sample : sequence of int
        Indices of the points to cluster.
    k : int
    seed : int

    Returns
    -------
    ClusterAssignment
        Labels for ``sample`` (in the given order); ``objective_value`` is the
        within-cluster sum of squares.
    """
    points = np.asarray(points, dtype=float)
    sample = np.asarray(sample, dtype=int)
    if k < 1 or sample.size < k:
        raise InvalidInputError(f"need at least k={k} sampled points, got {sample.size}")
    X = points[sample]
    if sample.size == k:
        return ClusterAssignment(np.arange(k), k, 1, 0.0)
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(KMEANS_RESTARTS):
        labels, inertia = _lloyd(X, _greedy_kmeanspp(X, k, rng))
        if best is None or inertia < best[1] - 1e-12:
            best = (labels, inertia)
    return ClusterAssignment(best[0], k, 1, best[1])


def extract_coclustered_pairs(assignment, sample):
    """All pairs ``(i, j)``, ``i < j``, of global point indices that share a cluster."""
    labels = assignment.assignment if isinstance(assignment, ClusterAssignment) else np.asarray(assignment)
    sample = np.asarray(sample, dtype=int)
    if labels.size != sample.size:
        raise InvalidInputError("assignment must cover the sample")
    pairs = set()
    for lab in np.unique(labels):
        members = np.sort(sample[labels == lab])
        pairs.update((int(i), int(j)) for i, j in itertools.combinations(members, 2))
    return pairs


# --------------------------------------------------------------------------
# exact reduced problem


def _check_sizes(n, k, b):
    if k < 1 or b < 1:
        raise InvalidInputError("k and b must be at least 1")
    if k * b > n:
        raise InvalidInputError(
            f"size constraint violated: k*b = {k}*{b} = {k * b} exceeds n = {n} points")


def _normalize_pairs(backbone, n):
    pairs = set()
    for i, j in backbone:
        i, j = int(i), int(j)
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise InvalidInputError(f"invalid backbone pair ({i}, {j})")
        pairs.add((min(i, j), max(i, j)))
    return pairs


def build_reduced_clique_program(points, backbone, k, b):
    """Assignment formulation restricted to backbone pairs.

    Variables ``z[i,t]`` place point ``i`` in cluster ``t``; ``w[i,j,t]``
    linearises ``z[i,t] * z[j,t]`` and exists only for backbone pairs. Pairs
    outside the backbone may not share any cluster. Clusters are numbered in
    order of first appearance, which keeps one labelling per partition.
    """
    points = check_points(points)
    n = points.shape[0]
    _check_sizes(n, k, b)
    pairs = sorted(_normalize_pairs(backbone, n))
    d = squared_distances(points)
    pb = ProgramBuilder()
    for i in range(n):
        for t in range(k):
            # point i can only reach cluster t if t <= i; point 0 opens cluster 0
            lo = 1.0 if (i == 0 and t == 0) else 0.0
            hi = 1.0 if t <= i else 0.0
            pb.add_variable(f"z_{i}_{t}", 0.0, lo, hi)
    # cluster t is out of reach for points before t, so w[i,j,t] needs t <= i < j
    for i, j in pairs:
        for t in range(min(i, k - 1) + 1):
            pb.add_variable(f"w_{i}_{j}_{t}", d[i, j], 0.0, 1.0)
    for i in range(n):
        pb.add_constraint({f"z_{i}_{t}": 1.0 for t in range(k)}, "=", 1.0)
    for t in range(k):
        pb.add_constraint({f"z_{i}_{t}": 1.0 for i in range(n)}, ">=", float(b))
    for i, j in pairs:
        for t in range(min(i, k - 1) + 1):
            w, zi, zj = f"w_{i}_{j}_{t}", f"z_{i}_{t}", f"z_{j}_{t}"
            pb.add_constraint({w: 1.0, zi: -1.0, zj: -1.0}, ">=", -1.0)
            pb.add_constraint({w: 1.0, zi: -1.0}, "<=", 0.0)
            pb.add_constraint({w: 1.0, zj: -1.0}, "<=", 0.0)
    in_backbone = set(pairs)
    for i, j in itertools.combinations(range(n), 2):
        if (i, j) not in in_backbone:
            for t in range(min(i, k - 1) + 1):
                pb.add_constraint({f"z_{i}_{t}": 1.0, f"z_{j}_{t}": 1.0}, "<=", 1.0)
    for i in range(1, n):
        for t in range(1, min(i, k - 1) + 1):
            row = {f"z_{i}_{t}": 1.0}
            row.update({f"z_{h}_{t - 1}": -1.0 for h in range(i)})
            pb.add_constraint(row, "<=", 0.0)
    return pb.binary_program()


def canonical_labels(labels):
    """Relabel clusters in order of first appearance (0, 1, 2, ...)."""
    mapping = {}
    out = np.empty(len(labels), dtype=int)
    for i, lab in enumerate(labels):
        out[i] = mapping.setdefault(lab, len(mapping))
    return out


def decode_assignment(program, values, n, k):
    index = program.index()
    z = np.array([[values[index[f"z_{i}_{t}"]] for t in range(k)] for i in range(n)])
    return np.argmax(z, axis=1)


def encode_assignment(program, labels, backbone_pairs, k):
    """Feasible variable vector for ``labels`` or ``None`` if it violates the program."""
    labels = canonical_labels(labels)
    if labels.max(initial=-1) + 1 != k:
        return None
    index = program.index()
    x = np.zeros(len(program.names))
    for i, t in enumerate(labels):
        x[index[f"z_{i}_{t}"]] = 1.0
    for i, j in backbone_pairs:
        if labels[i] == labels[j]:
            x[index[f"w_{i}_{j}_{labels[i]}"]] = 1.0
    return x if program.is_feasible(x) else None


def enumerate_cliques(n, pairs, min_size=1, limit=20000):
    """All cliques of the graph on ``n`` vertices with edge set ``pairs``.

    Returns ``None`` if more than ``limit`` cliques of size >= ``min_size`` exist.
    """
    adj = [0] * n
    for i, j in pairs:
        adj[i] |= 1 << j
        adj[j] |= 1 << i
    out = []

    def grow(members, cand):
        if len(members) >= min_size:
            out.append(tuple(members))
            if len(out) > limit:
                return False
        while cand:
            v = (cand & -cand).bit_length() - 1
            cand &= cand - 1
            members.append(v)
            higher = adj[v] & ~((1 << (v + 1)) - 1)
            if not grow(members, cand & higher):
                return False
            members.pop()
        return True

    for v in range(n):
        higher = adj[v] & ~((1 << (v + 1)) - 1)
        if not grow([v], higher):
            return None
    return out


def build_clique_cover_program(points, cliques, k, normalized=False):
    """Set-partitioning formulation: choose ``k`` cliques that cover every point once.

    A clique costs the sum of its pairwise squared distances, divided by its
    size when ``normalized``.
    """
    d = squared_distances(points)
    n = points.shape[0]
    pb = ProgramBuilder()
    covers = [dict() for _ in range(n)]
    for c, members in enumerate(cliques):
        m = np.asarray(members)
        cost = float(np.triu(d[np.ix_(m, m)], 1).sum())
        if normalized:
            cost /= m.size
        name = f"y_{c}"
        pb.add_variable(name, cost)
        for i in members:
            covers[i][name] = 1.0
    for i in range(n):
        pb.add_constraint(covers[i], "=", 1.0)
    pb.add_constraint({f"y_{c}": 1.0 for c in range(len(cliques))}, "=", float(k))
    return pb.binary_program()


def backbone_components(n, pairs):
    """Connected components of the allowed-pair graph, as sorted index arrays."""
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in pairs:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = [find(i) for i in range(n)]
    groups = {}
    for i, r in enumerate(roots):
        groups.setdefault(r, []).append(i)
    return [np.array(g) for _, g in sorted(groups.items())]


def _solve_block(points, pairs, k, b, gap_tolerance, time_budget, incumbents, formulation, max_cliques,
                 normalized=False):
    """Exact clustering of one block into exactly ``k`` clusters.

    Returns ``(labels or None, objective, lower bound, status)``.
    """
    n = points.shape[0]
    if k * b > n:
        return None, np.inf, np.inf, "infeasible"
    cliques = None
    if formulation in ("auto", "clique"):
        cliques = enumerate_cliques(n, pairs, b, max_cliques)
        if cliques is None and (formulation == "clique" or normalized):
            raise SolverError(f"more than {max_cliques} backbone cliques; use the compact formulation")
    if cliques is not None:
        program = build_clique_cover_program(points, cliques, k, normalized)
        position = {c: idx for idx, c in enumerate(cliques)}
        start = None
        for labels in incumbents:
            x = np.zeros(len(cliques))
            for lab in range(k):
                x[position[tuple(np.flatnonzero(labels == lab))]] = 1.0
            if start is None or program.objective(x) < program.objective(start):
                start = x
        sol = solve_bip(program, gap_tolerance, time_budget, incumbent=start)
        labels = None
        if sol.values is not None:
            labels = np.empty(n, dtype=int)
            chosen = [cliques[c] for c in np.flatnonzero(sol.values > 0.5)]
            for lab, members in enumerate(sorted(chosen)):
                labels[list(members)] = lab
    else:
        program = build_reduced_clique_program(points, pairs, k, b)
        start = None
        for labels in incumbents:
            x = encode_assignment(program, labels, pairs, k)
            if x is not None and (start is None or program.objective(x) < program.objective(start)):
                start = x
        sol = solve_bip(program, gap_tolerance, time_budget, incumbent=start)
        labels = None if sol.values is None else decode_assignment(program, sol.values, n, k)
    bound = np.inf if sol.status == "infeasible" else sol.bound
    if labels is None:
        return None, np.inf, bound, sol.status
    return labels, sol.objective, min(bound, sol.objective), sol.status


def fit_exact_clustering(points, backbone, k, b=1, gap_tolerance=0.01, time_budget=None,
                         incumbents=(), formulation="auto", max_cliques=100_000, objective="pairwise"):
    """Solve the backbone-restricted clique partitioning problem.

    Points in different connected components of the backbone graph can never
    share a cluster, so each component is solved on its own for every
    admissible cluster count and the counts are combined by dynamic
    programming. The certified gap compares the combined incumbent with the
    combined lower bounds.

    Parameters
    ----------
    points : array of shape (n, d)
    backbone : iterable of (i, j) pairs allowed to share a cluster
    k, b : int
        Number of clusters and minimum cluster size.
    gap_tolerance : float
        Relative optimality gap at which each branch-and-bound stops.
    time_budget : float, optional
        Seconds shared by all component solves.
    incumbents : iterable of label vectors
        Known partitions; every one that respects the backbone seeds the search.
    formulation : {"auto", "compact", "clique"}
        ``compact`` solves the assignment program from
        :func:`build_reduced_clique_program` on the whole point set;
        ``clique`` solves set-partitioning programs over backbone cliques per
        component, whose relaxation is far tighter. ``auto`` uses cliques
        wherever a component has at most ``max_cliques`` of them.
    objective : {"pairwise", "normalized"}
        ``pairwise`` minimises the plain sum of squared distances over
        co-clustered pairs. ``normalized`` divides each cluster's sum by its
        size (the within-cluster sum of squares); only the clique formulation
        can express it.
    """
    points = check_points(points)
    n = points.shape[0]
    _check_sizes(n, k, b)
    pairs = _normalize_pairs(backbone, n)
    if formulation not in ("auto", "compact", "clique"):
        raise InvalidInputError(f"unknown formulation {formulation!r}")
    if objective not in ("pairwise", "normalized"):
        raise InvalidInputError(f"unknown objective {objective!r}")
    normalized = objective == "normalized"
    if normalized and formulation == "compact":
        raise InvalidInputError("the compact formulation only supports the pairwise objective")

    feasible = []
    for labels in incumbents:
        labels = canonical_labels(np.asarray(labels))
        if labels.size == n and _respects(labels, pairs, k, b):
            feasible.append(labels)

    if formulation == "compact":
        labels, obj, bound, status = _solve_block(points, pairs, k, b, gap_tolerance, time_budget,
                                                  feasible, formulation, max_cliques)
        if labels is None:
            _raise_unsolved(status)
        labels = canonical_labels(labels)
        return ClusterAssignment(labels, k, b, pair_objective(points, labels),
                                 _relative_gap(obj, bound), timed_out=status == "time_limit")

    start = time.perf_counter()
    blocks = backbone_components(n, pairs)
    if len(blocks) > k:
        _raise_unsolved("infeasible")
    spare = k - len(blocks)
    # table[c][j] = (labels, objective, bound) with j + 1 clusters in block c
    table = []
    timed_out = False
    for members in blocks:
        where = {int(v): i for i, v in enumerate(members)}
        local_pairs = {(where[i], where[j]) for i, j in pairs if i in where}
        local_inc = [canonical_labels(lab[members]) for lab in feasible]
        row = []
        for j in range(1, spare + 2):
            remaining = None
            if time_budget is not None:
                remaining = max(time_budget - (time.perf_counter() - start), 1e-3)
            seeds = [lab for lab in local_inc if lab.max() + 1 == j]
            labels, obj, bound, status = _solve_block(points[members], local_pairs, j, b, gap_tolerance,
                                                      remaining, seeds, formulation, max_cliques, normalized)
            timed_out |= status == "time_limit"
            row.append((labels, obj, bound))
        table.append(row)

    best_obj, counts = _allocate([[r[1] for r in row] for row in table], spare)
    low, _ = _allocate([[r[2] for r in row] for row in table], spare)
    if not np.isfinite(best_obj):
        _raise_unsolved("time_limit" if timed_out else "infeasible")
    labels = np.empty(n, dtype=int)
    offset = 0
    for members, row, j in zip(blocks, table, counts):
        labels[members] = row[j][0] + offset
        offset += j + 1
    labels = canonical_labels(labels)
    return ClusterAssignment(labels, k, b, pair_objective(points, labels, normalized),
                             _relative_gap(best_obj, min(low, best_obj)), timed_out=timed_out)


def _relative_gap(obj, bound):
    if not np.isfinite(bound):
        return np.inf
    return max(0.0, (obj - bound) / max(abs(obj), 1e-9))


def _allocate(costs, spare):
    """Cheapest way to hand ``spare`` extra clusters to blocks; ``costs[c][j]`` uses ``j + 1`` clusters."""
    # best[s] = (cost, counts) using exactly s extra clusters over the blocks seen so far
    best = {0: (0.0, [])}
    for row in costs:
        nxt = {}
        for s, (cost, counts) in best.items():
            for j, c in enumerate(row):
                if s + j > spare:
                    break
                total = cost + c
                if s + j not in nxt or total < nxt[s + j][0]:
                    nxt[s + j] = (total, counts + [j])
        best = nxt
    return best.get(spare, (np.inf, None))


def _respects(labels, pairs, k, b):
    if labels.max(initial=-1) + 1 != k or np.bincount(labels, minlength=k).min() < b:
        return False
    for lab in range(k):
        members = np.flatnonzero(labels == lab)
        for i, j in itertools.combinations(members, 2):
            if (int(i), int(j)) not in pairs:
                return False
    return True


def _raise_unsolved(status):
    if status == "time_limit":
        raise SolverError("time budget exhausted before any feasible clustering was found")
    raise InfeasibleError(
        "no clustering satisfies the forbidden-pair constraints (z_it + z_jt <= 1 for pairs "
        "outside the backbone) together with the cluster-count and minimum-size constraints")


# --------------------------------------------------------------------------
# metric


def silhouette_score(points, assignment):
    """Mean silhouette with Euclidean distances; points in singleton clusters score 0."""
    points = np.asarray(points, dtype=float)
    labels = assignment.assignment if isinstance(assignment, ClusterAssignment) else np.asarray(assignment)
    uniq, inv = np.unique(labels, return_inverse=True)
    if uniq.size < 2:
        raise UndefinedMetricError("silhouette needs at least two non-empty clusters")
    dist = np.sqrt(squared_distances(points))
    onehot = np.eye(uniq.size)[inv]
    sums = dist @ onehot
    sizes = onehot.sum(axis=0)
    own = sizes[inv]
    n = labels.size
    a = sums[np.arange(n), inv] / np.maximum(own - 1, 1)
    mean_other = sums / sizes
    mean_other[np.arange(n), inv] = np.inf
    bb = mean_other.min(axis=1)
    denom = np.maximum(a, bb)
    s = np.where(denom > 0, (bb - a) / np.where(denom > 0, denom, 1.0), 0.0)
    s[own == 1] = 0.0
    return float(s.mean())


# --------------------------------------------------------------------------
# backbone plumbing and estimator


class ClusteringSolver(BackboneSolver):
    """Samples points for k-means subproblems and reports co-clustered pairs."""

    pairwise = True

    def __init__(self, k, b=1, gap_tolerance=0.01, time_budget=None, formulation="auto",
                 objective="pairwise"):
        self.k = k
        self.objective = objective
        self.b = b
        self.gap_tolerance = gap_tolerance
        self.time_budget = time_budget
        self.formulation = formulation
        self.incumbents = []

    def universe_size(self, points):
        return points.shape[0]

    def fit_subproblem(self, points, subset, seed):
        return kmeans_fit(points, subset, self.k, seed)

    def get_relevant(self, model, subset):
        if len(subset) == self.universe_size_ and np.bincount(model.assignment, minlength=self.k).min() >= self.b:
            labels = np.empty(len(subset), dtype=int)
            labels[np.asarray(subset)] = model.assignment
            self.incumbents.append(labels)
        return extract_coclustered_pairs(model, subset)

    def fit(self, points, backbone):
        return fit_exact_clustering(points, backbone, self.k, self.b, self.gap_tolerance,
                                    self.time_budget, self.incumbents, self.formulation,
                                    objective=self.objective)

    def predict(self, model, X):
        return model.assignment

    def prepare(self, points):
        self.universe_size_ = points.shape[0]
        self.incumbents = []


class BackboneClustering(ClusterMixin, BaseEstimator):
    """Clique-partitioning clustering whose allowed pairs come from k-means runs.

    Parameters
    ----------
    n_clusters : int
    min_cluster_size : int
        Lower bound ``b`` on every cluster's size.
    beta : float
        Fraction of points each k-means subproblem sees.
    num_subproblems : int
    gap_tolerance : float
        Relative gap at which the exact reduced solve stops.
    time_budget : float, optional
        Seconds allowed for the exact reduced solve.
    max_backbone_size : int, optional
        Cap on the number of pairs; defaults to all pairs.
    objective : {"pairwise", "normalized"}
        Exact objective; see :func:`fit_exact_clustering`.
    random_state : int
    n_jobs : int

    Attributes
    ----------
    labels_ : ndarray of shape (n,)
    objective_ : float
        Sum of squared distances over co-clustered pairs.
    gap_ : float
    backbone_ : list of (i, j) pairs
    """

    def __init__(self, n_clusters=3, min_cluster_size=1, beta=1.0, num_subproblems=5,
                 gap_tolerance=0.01, time_budget=None, max_backbone_size=None,
                 objective="pairwise", random_state=0, n_jobs=1):
        self.n_clusters = n_clusters
        self.min_cluster_size = min_cluster_size
        self.beta = beta
        self.num_subproblems = num_subproblems
        self.gap_tolerance = gap_tolerance
        self.time_budget = time_budget
        self.max_backbone_size = max_backbone_size
        self.objective = objective
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y=None, on_iteration=None):
        X = check_points(X)
        n = X.shape[0]
        _check_sizes(n, self.n_clusters, self.min_cluster_size)
        if np.ceil(self.beta * n - 1e-12) < self.n_clusters:
            raise InvalidInputError("beta * n must be at least n_clusters")
        cap = self.max_backbone_size or max(1, n * (n - 1) // 2)
        config = BackboneConfig(num_subproblems=self.num_subproblems, screening_fraction=1.0,
                                subproblem_fraction=self.beta, max_backbone_size=cap,
                                max_iterations=1, master_seed=self.random_state)
        solver = ClusteringSolver(self.n_clusters, self.min_cluster_size, self.gap_tolerance,
                                  self.time_budget, objective=self.objective)
        solver.prepare(X)
        self.result_ = run_backbone(X, solver, config, n_jobs=self.n_jobs, on_iteration=on_iteration)
        self.model_ = self.result_.model
        self.backbone_ = self.result_.backbone
        self.trace_ = self.result_.trace
        self.labels_ = self.model_.assignment
        self.objective_ = self.model_.objective_value
        self.gap_ = self.model_.optimality_gap
        return self

    def score(self, X, y=None):
        check_is_fitted(self, "labels_")
        return silhouette_score(check_points(X), self.labels_)


class KMeansClustering(ClusterMixin, BaseEstimator):
    """Plain k-means baseline sharing the subproblem routine."""

    def __init__(self, n_clusters=3, random_state=0):
        self.n_clusters = n_clusters
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_points(X)
        self.model_ = kmeans_fit(X, np.arange(X.shape[0]), self.n_clusters,
                                 derive_seed(self.random_state, 0))
        self.labels_ = self.model_.assignment
        self.inertia_ = self.model_.objective_value
        return self
