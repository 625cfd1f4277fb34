"""PCA-based metric subset selection with the GCD criterion.

The generalized coefficient of determination compares the subspace spanned
by the first ``k`` principal components with the subspace spanned by a
subset of the original variables::

    GCD = tr(P_pc @ P_subset) / sqrt(rank(P_pc) * rank(P_subset))

Both projectors act on the (centered) observation space and are built
from orthonormal bases, so collinear subsets are fine. For full-rank data
the ranks are ``k`` and ``|subset|``; directions with zero variance are
left out of both subspaces.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy import linalg
from sklearn.base import BaseEstimator
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import ParameterError, check_int, check_matrix, check_positive

RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class PcaDecomposition:
    """Eigen-decomposition of the sample covariance of column-centered data.

    ``loadings[:, j]`` is the j-th principal axis; ``eigenvalues`` are in
    descending order.
    """

    loadings: np.ndarray
    eigenvalues: np.ndarray
    mean: np.ndarray
    centered: bool = True

    def scores(self, X, k=None):
        values = check_matrix(X) - self.mean
        w = self.loadings if k is None else self.loadings[:, :k]
        return values @ w


@dataclass(frozen=True, eq=False)
class SubsetScore:
    indices: tuple
    gcd: float


@dataclass(frozen=True)
class AnnealConfig:
    initial_temperature: float = 1.0
    cooling_rate: float = 0.99
    max_iterations: int = 5000
    seed: int = 0

    def __post_init__(self):
        check_positive(self.initial_temperature, "initial_temperature")
        if not 0 < self.cooling_rate < 1:
            raise ParameterError("cooling_rate must lie in (0, 1)")
        check_int(self.max_iterations, "max_iterations", low=1)


def pca(X):
    """Principal axes of ``X`` after centering its columns.

    Eigenvalues are those of ``Xc.T @ Xc / (N - 1)``, so they sum to the
    total variance. Rank-deficient input yields zero eigenvalues.
    """
    values = check_matrix(X, min_rows=2)
    mean = values.mean(axis=0)
    centered = values - mean
    cov = centered.T @ centered / (values.shape[0] - 1)
    eigvals, eigvecs = linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    return PcaDecomposition(eigvecs[:, order], eigvals[order], mean)


def _orthonormal_basis(A):
    if A.shape[1] == 0:
        return A
    q, r, _ = linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0:
        return q[:, :0]
    rank = int(np.count_nonzero(diag > RANK_TOL * diag[0]))
    return q[:, :rank]


class _GcdScorer:
    """Caches the principal subspace of one data matrix."""

    def __init__(self, X, k):
        values = check_matrix(X, min_rows=2)
        self.centered = values - values.mean(axis=0)
        self.M = values.shape[1]
        self.k = check_int(k, "k", low=1, high=self.M)
        u, s, _ = linalg.svd(self.centered, full_matrices=False)
        rank = 0 if s[0] == 0 else int(np.count_nonzero(s[:self.k] > RANK_TOL * s[0]))
        self.pc_basis = u[:, :rank]
        self._cache = {}

    def __call__(self, subset):
        key = tuple(sorted(subset))
        if key not in self._cache:
            basis = _orthonormal_basis(self.centered[:, list(key)])
            dims = self.pc_basis.shape[1] * basis.shape[1]
            if dims == 0:
                self._cache[key] = 0.0
            else:
                overlap = float(np.sum((self.pc_basis.T @ basis) ** 2))
                self._cache[key] = min(1.0, overlap / math.sqrt(dims))
        return self._cache[key]


def _check_subset(subset, M):
    idx = sorted(int(i) for i in subset)
    if not idx:
        raise ParameterError("subset must not be empty")
    if len(set(idx)) != len(idx):
        raise ParameterError("subset contains duplicate indices")
    if idx[0] < 0 or idx[-1] >= M:
        raise ParameterError(f"subset indices must lie in [0, {M})")
    return idx


def gcd_score(X, subset, k=None):
    """GCD between the first ``k`` PCs and the span of ``subset``.

    ``k`` defaults to the subset size.
    """
    values = check_matrix(X, min_rows=2)
    idx = _check_subset(subset, values.shape[1])
    k = len(idx) if k is None else k
    return _GcdScorer(values, k)(idx)


def acceptance_probability(candidate, current, temperature):
    """Metropolis rule: 1 for an improvement or a tie, else ``exp(diff / t)``."""
    if candidate >= current:
        return 1.0
    if temperature <= 0:
        return 0.0
    return math.exp((candidate - current) / temperature)


def _anneal(scorer, k, cfg):
    M = scorer.M
    rng = np.random.default_rng(cfg.seed)
    if k == M:
        full = tuple(range(M))
        return SubsetScore(full, scorer(full))
    current = sorted(rng.choice(M, size=k, replace=False).tolist())
    current_score = scorer(current)
    best, best_score = list(current), current_score
    t = cfg.initial_temperature
    for _ in range(cfg.max_iterations):
        outside = sorted(set(range(M)) - set(current))
        drop = int(rng.integers(k))
        add = outside[int(rng.integers(len(outside)))]
        candidate = sorted(current[:drop] + current[drop + 1:] + [add])
        score = scorer(candidate)
        if rng.random() < acceptance_probability(score, current_score, t):
            current, current_score = candidate, score
            if current_score > best_score:
                best, best_score = list(current), current_score
        t *= cfg.cooling_rate
    return SubsetScore(tuple(best), best_score)


def anneal_select(X, k, cfg=None):
    """Search for the ``k``-variable subset with the highest GCD.

    Neighbours differ from the current subset in exactly one variable.
    Deterministic for a given ``cfg.seed``.
    """
    cfg = cfg or AnnealConfig()
    values = check_matrix(X, min_rows=2)
    k = check_int(k, "k", low=1, high=values.shape[1])
    return _anneal(_GcdScorer(values, k), k, cfg)


def exhaustive_select(X, k):
    """Best subset by enumerating every ``k``-combination (small ``M`` only)."""
    from itertools import combinations

    values = check_matrix(X, min_rows=2)
    scorer = _GcdScorer(values, k)
    best = max(combinations(range(values.shape[1]), k), key=scorer)
    return SubsetScore(tuple(best), scorer(best))


def elbow_report(X, k_range=None, cfg=None):
    """Best annealed GCD for each subset size.

    Returns a list of ``(k, best_gcd, indices)`` rows; picking the elbow is
    left to the operator.
    """
    values = check_matrix(X, min_rows=2)
    ks = range(1, values.shape[1] + 1) if k_range is None else k_range
    rows = []
    for k in ks:
        res = anneal_select(values, k, cfg)
        rows.append((k, res.gcd, res.indices))
    return rows


class GCDSelector(SelectorMixin, BaseEstimator):
    """Keep the ``n_features_to_select`` metrics that best span the leading PCs.

    Parameters
    ----------
    n_features_to_select : int, default=5
    initial_temperature, cooling_rate, max_iterations :
        Annealing schedule.
    random_state : int, default=0
    """

    def __init__(self, n_features_to_select=5, initial_temperature=1.0, cooling_rate=0.99,
                 max_iterations=5000, random_state=0):
        self.n_features_to_select = n_features_to_select
        self.initial_temperature = initial_temperature
        self.cooling_rate = cooling_rate
        self.max_iterations = max_iterations
        self.random_state = random_state

    def fit(self, X, y=None):
        values = check_matrix(X, min_rows=2)
        self.n_features_in_ = values.shape[1]
        cfg = AnnealConfig(self.initial_temperature, self.cooling_rate, self.max_iterations,
                           self.random_state)
        res = anneal_select(values, self.n_features_to_select, cfg)
        self.indices_ = np.array(res.indices)
        self.gcd_ = res.gcd
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "indices_")
        mask = np.zeros(self.n_features_in_, dtype=bool)
        mask[self.indices_] = True
        return mask
