"""Problem-agnostic backbone engine.

A run screens the indicator universe once, then repeatedly fans out
``ceil(M / 2**t)`` subproblems over the retained indicators, unions the
indicators each subproblem finds relevant into the backbone, and shrinks the
universe to that backbone. The reduced problem over the final backbone is then
solved by the problem's exact solver.
"""

import logging
import math
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidInputError, SolverError

logger = logging.getLogger(__name__)


@dataclass
class BackboneConfig:
    num_subproblems: int = 5
    screening_fraction: float = 0.5
    subproblem_fraction: float = 0.5
    max_backbone_size: int = 50
    max_iterations: int = 10
    master_seed: int = 0
    time_budget: float = None

    def __post_init__(self):
        if not (0 < self.screening_fraction <= 1):
            raise InvalidInputError("screening_fraction (alpha) must lie in (0, 1]")
        if not (0 < self.subproblem_fraction <= 1):
            raise InvalidInputError("subproblem_fraction (beta) must lie in (0, 1]")
        for name in ("num_subproblems", "max_backbone_size", "max_iterations"):
            if int(getattr(self, name)) < 1:
                raise InvalidInputError(f"{name} must be at least 1")
        if self.time_budget is not None and self.time_budget <= 0:
            raise InvalidInputError("time_budget must be positive")


@dataclass
class IterationRecord:
    iteration: int
    num_subproblems: int
    retained_size: int
    backbone_size: int
    elapsed: float
    fallback: bool = False

    def to_dict(self, timing=True):
        d = {"t": self.iteration, "M_t": self.num_subproblems, "U": self.retained_size,
             "B": self.backbone_size, "fallback": self.fallback}
        if timing:
            d["elapsed"] = self.elapsed
        return d

    def line(self):
        return (f"t={self.iteration} M_t={self.num_subproblems} |U|={self.retained_size} "
                f"|B|={self.backbone_size} elapsed={self.elapsed:.3f}")


@dataclass
class BackboneResult:
    backbone: list
    trace: list = field(default_factory=list)
    model: object = None
    screened: list = None
    truncated: bool = False

    def to_dict(self, timing=True):
        """Plain-data view; ``timing=False`` leaves out wall-clock fields."""
        return {
            "backbone": [list(b) if isinstance(b, tuple) else b for b in self.backbone],
            "screened_size": None if self.screened is None else len(self.screened),
            "truncated": self.truncated,
            "trace": [r.to_dict(timing) for r in self.trace],
        }


class BackboneSolver:
    """Base class for the problem-specific pieces plugged into :func:`run_backbone`.

    Subclasses must implement :meth:`fit_subproblem`, :meth:`get_relevant` and
    :meth:`fit`. :meth:`calculate_utilities` returning ``None`` means no
    screening information (uniform utilities).

    ``pairwise`` solvers sample points for subproblems but report relevant
    indicators as point pairs; their backbone is built in a single round.
    """

    pairwise = False

    def universe_size(self, data):
        raise NotImplementedError

    def calculate_utilities(self, data):
        return None

    def fit_subproblem(self, data, subset, seed):
        raise NotImplementedError

    def get_relevant(self, model, subset):
        raise NotImplementedError

    def fit(self, data, backbone):
        raise NotImplementedError

    def predict(self, model, X):
        raise NotImplementedError


def derive_seed(master_seed, *keys):
    """Independent 63-bit seed for the stream addressed by ``keys``."""
    ss = np.random.SeedSequence(int(master_seed) & ((1 << 64) - 1), spawn_key=tuple(int(k) for k in keys))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return (int(hi) << 32 | int(lo)) >> 1


def screen(utilities, alpha, universe_size):
    """Indices of the ``ceil(alpha * universe_size)`` highest-utility indicators, ascending."""
    if universe_size < 1:
        raise InvalidInputError("indicator universe is empty")
    if not (0 < alpha <= 1):
        raise InvalidInputError("alpha must lie in (0, 1]")
    u = np.zeros(universe_size) if utilities is None else np.asarray(utilities, dtype=float)
    if u.shape != (universe_size,):
        raise InvalidInputError(f"expected {universe_size} utilities, got {u.size}")
    if not np.all(np.isfinite(u)):
        raise InvalidInputError("utilities must be finite")
    keep = min(universe_size, math.ceil(alpha * universe_size - 1e-12))
    order = np.lexsort((np.arange(universe_size), -u))
    return sorted(int(j) for j in order[:keep])


def construct_subproblems(retained, utilities, count, beta, seed):
    """Sample ``count`` subsets of ``retained`` and repair them to cover it.

    Each subset is a uniform sample without replacement of size
    ``min(ceil(beta * |retained|), |retained|)``. An indicator missed by every
    subset replaces, in the lowest-index subset that has one, a member that is
    also covered elsewhere (the lowest-utility such member). When no subset can
    spare a member, the indicator is appended to the currently smallest subset.

    ``utilities`` maps indicator id to utility (array indexed by id or None).
    """
    if count < 1:
        raise InvalidInputError("count must be at least 1")
    retained = sorted(retained)
    if not retained:
        raise InvalidInputError("retained set is empty")
    size = min(len(retained), math.ceil(beta * len(retained) - 1e-12))
    size = max(size, 1)
    rng = np.random.default_rng(seed)
    pool = np.asarray(retained)
    subsets = [sorted(int(v) for v in rng.choice(pool, size=size, replace=False)) for _ in range(count)]

    def util(j):
        return 0.0 if utilities is None else float(utilities[j])

    cover = Counter(j for s in subsets for j in s)
    for j in retained:
        if cover[j]:
            continue
        placed = False
        for s in subsets:
            spare = [v for v in s if cover[v] > 1]
            if spare:
                victim = min(spare, key=lambda v: (util(v), -v))
                s.remove(victim)
                cover[victim] -= 1
                s.append(j)
                s.sort()
                placed = True
                break
        if not placed:
            target = min(range(count), key=lambda m: (len(subsets[m]), m))
            subsets[target].append(j)
            subsets[target].sort()
        cover[j] += 1
    return subsets


def _num_subproblems(M, t):
    return max(1, math.ceil(M / 2 ** t))


def run_backbone(data, solver, config, n_jobs=1, on_iteration=None):
    """Run the backbone method and fit the reduced problem.

    Parameters
    ----------
    data : object
        Passed through untouched to the solver callbacks.
    solver : BackboneSolver
    config : BackboneConfig
    n_jobs : int
        Threads used for the subproblem fan-out. Results do not depend on it.
    on_iteration : callable, optional
        Called with each :class:`IterationRecord` as it completes.

    Returns
    -------
    BackboneResult
    """
    start = time.perf_counter()
    p = int(solver.universe_size(data))
    if p < 1:
        raise InvalidInputError("indicator universe is empty")
    utilities = solver.calculate_utilities(data)
    alpha = 1.0 if solver.pairwise else config.screening_fraction
    retained = screen(utilities, alpha, p)
    screened = list(retained)
    util_arr = None if utilities is None else np.asarray(utilities, dtype=float)

    trace = []
    backbone = list(retained)
    votes = Counter()
    t = 0
    while True:
        M_t = _num_subproblems(config.num_subproblems, t)
        subsets = construct_subproblems(retained, util_arr, M_t, config.subproblem_fraction,
                                        derive_seed(config.master_seed, t))
        seeds = [derive_seed(config.master_seed, t, m) for m in range(M_t)]

        def task(m):
            try:
                return solver.fit_subproblem(data, subsets[m], seeds[m])
            except Exception as exc:
                raise SolverError(f"subproblem {m} of iteration {t} failed: {exc}", t, m) from exc

        if n_jobs is not None and n_jobs != 1 and M_t > 1:
            workers = M_t if n_jobs in (-1, None) else min(n_jobs, M_t)
            with ThreadPoolExecutor(max_workers=workers) as pool:
                models = list(pool.map(task, range(M_t)))
        else:
            models = [task(m) for m in range(M_t)]

        found = set()
        votes = Counter()
        for m, model in enumerate(models):
            relevant = set(solver.get_relevant(model, subsets[m]))
            if not solver.pairwise and not relevant <= set(subsets[m]):
                raise SolverError(f"get_relevant returned indicators outside subproblem {m}", t, m)
            found |= relevant
            votes.update(relevant)

        fallback = not found
        backbone = sorted(found) if found else sorted(retained)
        rec = IterationRecord(t, M_t, len(retained), len(backbone), time.perf_counter() - start, fallback)
        trace.append(rec)
        logger.info(rec.line())
        if on_iteration is not None:
            on_iteration(rec)
        t += 1
        if (fallback or solver.pairwise or len(backbone) <= config.max_backbone_size or M_t == 1
                or t >= config.max_iterations
                or (config.time_budget is not None and time.perf_counter() - start > config.time_budget)):
            break
        retained = backbone

    truncated = False
    if len(backbone) > config.max_backbone_size:
        def rank(j):
            u = util_arr[j] if (util_arr is not None and not isinstance(j, tuple)) else 0.0
            return (-votes[j], -u, j)
        backbone = sorted(sorted(backbone, key=rank)[:config.max_backbone_size])
        truncated = True

    model = solver.fit(data, backbone)
    return BackboneResult(backbone, trace, model, screened, truncated)
