import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from backbone_mio.core import BackboneSolver

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


class RandomPickSolver(BackboneSolver):
    """Toy solver: each subproblem keeps a seed-determined third of its indicators."""

    def __init__(self, utilities=None, keep=1 / 3):
        self.utilities = utilities
        self.keep = keep

    def universe_size(self, data):
        return data

    def calculate_utilities(self, data):
        return self.utilities

    def fit_subproblem(self, data, subset, seed):
        rng = np.random.default_rng(seed)
        size = max(1, int(len(subset) * self.keep))
        return sorted(int(j) for j in rng.choice(subset, size=size, replace=False))

    def get_relevant(self, model, subset):
        return model

    def fit(self, data, backbone):
        return list(backbone)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_bip(rng, n=12, m=6):
    """Random mixed-sign binary program with ``<=``, ``>=`` and ``=`` rows."""
    from backbone_mio.mio import EQ, GE, LE, BinaryProgram, LinearProgram

    c = rng.integers(-10, 11, n).astype(float) + rng.random(n)
    A = rng.integers(-5, 6, (m, n)).astype(float)
    x0 = rng.integers(0, 2, n).astype(float)
    act = A @ x0
    senses, rhs = [], []
    for i in range(m):
        kind = rng.integers(0, 5)
        if kind == 0:
            senses.append(EQ)
            rhs.append(act[i])
        elif kind in (1, 2):
            senses.append(LE)
            rhs.append(act[i] + rng.integers(0, 3))
        else:
            senses.append(GE)
            rhs.append(act[i] - rng.integers(0, 3))
    lp = LinearProgram(c, A, senses, np.array(rhs), 0.0, 1.0)
    return BinaryProgram(lp, np.ones(n, dtype=bool))


def enumerate_bip(program):
    """Exhaustive optimum of an all-binary program: (objective, x) or (inf, None)."""
    import itertools

    n = program.base.n_variables
    grid = np.array(list(itertools.product((0.0, 1.0), repeat=n)))
    lp = program.base
    act = grid @ lp.A.T - lp.rhs
    ok = np.ones(len(grid), dtype=bool)
    for i, s in enumerate(lp.senses):
        if s == "<=":
            ok &= act[:, i] <= 1e-9
        elif s == ">=":
            ok &= act[:, i] >= -1e-9
        else:
            ok &= np.abs(act[:, i]) <= 1e-9
    if not ok.any():
        return float("inf"), None
    obj = grid @ lp.c
    obj[~ok] = np.inf
    best = int(np.argmin(obj))
    return float(obj[best]), grid[best]


def write_cli_fixtures(directory):
    """Small CSV files for each fit subcommand; returns {subcommand: path}."""
    from backbone_mio.datagen import gen_classification, gen_cluster_blobs, gen_sparse_regression

    directory.mkdir(parents=True, exist_ok=True)
    X, y, _ = gen_sparse_regression(60, 20, 3, 5.0, seed=1)
    reg = directory / "regression.csv"
    np.savetxt(reg, np.column_stack([X, y]), delimiter=",",
               header=",".join([f"x{j}" for j in range(20)] + ["y"]), comments="")
    X, y, _ = gen_classification(80, 6, 2, 0.1, seed=2)
    tree = directory / "tree.csv"
    np.savetxt(tree, np.column_stack([X, y]), delimiter=",")
    pts, _, _ = gen_cluster_blobs(15, 2, 3, 3, spread=0.05, seed=3)
    cluster = directory / "cluster.csv"
    np.savetxt(cluster, pts, delimiter=",")
    return {"fit-regression": reg, "fit-tree": tree, "fit-cluster": cluster}
