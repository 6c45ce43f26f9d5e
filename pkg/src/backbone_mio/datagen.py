"""Synthetic data for the three problem families.

Every generator is deterministic given its seed.
"""

import itertools
import math

import numpy as np

from .exceptions import InvalidInputError


def _check_positive(**sizes):
    for name, value in sizes.items():
        if int(value) < 1:
            raise InvalidInputError(f"{name} must be at least 1, got {value}")


def gen_sparse_regression(n, p, k, snr, seed):
    """Gaussian design with an all-ones coefficient vector on ``k`` equally spaced columns.

    The noise variance is ``var(X @ beta) / snr`` measured on the drawn sample.

    Returns
    -------
    X : ndarray of shape (n, p)
    y : ndarray of shape (n,)
    support : list of int
    """
    _check_positive(n=n, p=p, k=k)
    if k > p:
        raise InvalidInputError(f"k={k} exceeds p={p}")
    if not snr > 0:
        raise InvalidInputError("snr must be positive")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    support = [(i * p) // k for i in range(k)]
    beta = np.zeros(p)
    beta[support] = 1.0
    signal = X @ beta
    sigma = math.sqrt(float(np.var(signal)) / snr)
    y = signal + sigma * rng.standard_normal(n)
    return X, y, support


def gen_classification(n, p, k, noise_rate=0.1, seed=0, class_sep=1.0, cluster_std=1.0):
    """Two classes built from ``2k`` Gaussian clusters on hypercube vertices.

    Clusters live in ``k`` informative dimensions and alternate between the two
    classes; points are dealt to clusters round-robin, so class counts differ by
    at most one. Each of the ``p - k`` nuisance columns is a random linear
    combination of the informative ones plus standard normal noise. Columns are
    shuffled and labels flipped with probability ``noise_rate``.

    Returns
    -------
    X : ndarray of shape (n, p)
    y : ndarray of shape (n,) with entries in {0, 1}
    informative : list of int
        Column indices of the informative dimensions, ascending.
    """
    _check_positive(n=n, p=p, k=k)
    if k > p:
        raise InvalidInputError(f"k={k} exceeds p={p}")
    if not 0 <= noise_rate < 0.5:
        raise InvalidInputError("noise_rate must lie in [0, 0.5)")
    rng = np.random.default_rng(seed)
    n_clusters = 2 * k
    if k < 20:
        vertices = np.array(list(itertools.product((-1.0, 1.0), repeat=k)))
        chosen = vertices[rng.permutation(len(vertices))[:n_clusters]]
    else:
        chosen = rng.choice((-1.0, 1.0), size=(n_clusters, k))
    centers = class_sep * chosen
    cluster = np.arange(n) % n_clusters
    y = cluster % 2
    informative = centers[cluster] + cluster_std * rng.standard_normal((n, k))
    mix = rng.standard_normal((k, p - k)) / math.sqrt(k)
    nuisance = informative @ mix + rng.standard_normal((n, p - k))
    X = np.hstack([informative, nuisance])
    perm = rng.permutation(p)
    X = X[:, perm]
    where = np.argsort(perm)
    flip = rng.random(n) < noise_rate
    y = np.where(flip, 1 - y, y)
    return X, y.astype(int), sorted(int(j) for j in where[:k])


def gen_cluster_blobs(n, d, true_k, target_k, spread=0.1, seed=0):
    """Isotropic Gaussian blobs centred on the first ``true_k`` points of a unit grid.

    Points are dealt to blobs round-robin, so blob sizes differ by at most one.

    Returns
    -------
    points : ndarray of shape (n, d)
    labels : ndarray of shape (n,)
        Generating blob of each point.
    target_k : int
        Cluster count the methods should use.
    """
    _check_positive(n=n, d=d, true_k=true_k, target_k=target_k)
    if target_k > n:
        raise InvalidInputError(f"target_k={target_k} exceeds n={n}")
    if spread < 0:
        raise InvalidInputError("spread must be non-negative")
    rng = np.random.default_rng(seed)
    side = 1
    while side ** d < true_k:
        side += 1
    grid = np.array(list(itertools.product(range(side), repeat=d)), dtype=float)
    centers = grid[:true_k]
    labels = np.arange(n) % true_k
    points = centers[labels] + spread * rng.standard_normal((n, d))
    return points, labels, int(target_k)
