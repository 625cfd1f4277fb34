import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from aging_entropy._validation import ParameterError
from aging_entropy.varselect import (
    AnnealConfig, GCDSelector, acceptance_probability, anneal_select, elbow_report,
    exhaustive_select, gcd_score, pca,
)


def projector(A, tol=1e-9):
    """Orthogonal projector onto the column span of ``A`` via the SVD."""
    u, s, _ = np.linalg.svd(A, full_matrices=False)
    u = u[:, s > tol * s.max()]
    return u @ u.T


def oracle_gcd(X, subset, k):
    Xc = X - X.mean(axis=0)
    u, s, _ = np.linalg.svd(Xc, full_matrices=False)
    k_eff = int(np.sum(s[:k] > 1e-9 * s[0]))
    P_g = u[:, :k_eff] @ u[:, :k_eff].T
    P_h = projector(Xc[:, list(subset)])
    return np.trace(P_g @ P_h) / math.sqrt(k_eff * round(np.trace(P_h)))


def collinear_data(seed, n=300):
    # 3 latent factors, 6 columns: each latent appears twice with different noise
    rng = np.random.default_rng(seed)
    L = rng.normal(size=(n, 3)) * [3.0, 2.0, 1.0]
    mix = np.array([[1, 0.9, 0, 0, 0.2, 0], [0, 0.1, 1, 0.8, 0, 0], [0, 0, 0, 0.3, 1, 1.1]])
    return L @ mix + 0.3 * rng.normal(size=(n, 6))


def test_pca_orthonormal_sorted_and_trace_identity(rng):
    X = rng.normal(size=(200, 4)) @ rng.normal(size=(4, 4))
    dec = pca(X)
    np.testing.assert_allclose(dec.loadings.T @ dec.loadings, np.eye(4), atol=1e-8)
    assert np.all(np.diff(dec.eigenvalues) <= 1e-12)
    assert dec.eigenvalues.sum() == pytest.approx(np.var(X, axis=0, ddof=1).sum())
    Xc = X - X.mean(axis=0)
    np.testing.assert_allclose(Xc @ dec.loadings @ dec.loadings.T, Xc, atol=1e-6)
    np.testing.assert_allclose(dec.scores(X, 2), Xc @ dec.loadings[:, :2])


def test_pca_collinear_pair_has_zero_eigenvalue(rng):
    x = rng.normal(size=100)
    dec = pca(np.column_stack([x, 2 * x]))
    assert dec.eigenvalues[1] == pytest.approx(0.0, abs=1e-10)


def test_pca_isotropic_data_has_equal_eigenvalues():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(200_000, 3))
    ev = pca(X).eigenvalues
    assert ev.max() / ev.min() < 1.02
    with pytest.raises(ParameterError):
        pca(X[:1])


def test_gcd_full_set_is_one(rng):
    X = rng.normal(size=(50, 4))
    assert gcd_score(X, [0, 1, 2, 3]) == pytest.approx(1.0)


def test_gcd_orthogonal_subspace_is_zero():
    # columns 0-1 carry all the variance; column 2 is orthogonal to them
    t = np.arange(8.0)
    big = np.column_stack([10 * np.array([1, -1, 1, -1, 1, -1, 1, -1.0]),
                           10 * np.array([1, 1, -1, -1, 1, 1, -1, -1.0]), np.zeros(8)])
    big[:, 2] = np.array([1, 1, 1, 1, -1, -1, -1, -1.0])
    X = big
    assert gcd_score(X, [2], k=1) == pytest.approx(0.0, abs=1e-12)
    assert gcd_score(X, [0, 1], k=2) == pytest.approx(1.0)
    assert t.size == 8


@pytest.mark.parametrize("seed", range(5))
def test_gcd_matches_projector_oracle(seed):
    X = collinear_data(seed)
    for subset in itertools.combinations(range(6), 3):
        assert gcd_score(X, subset) == pytest.approx(oracle_gcd(X, subset, 3), abs=1e-10)
    assert gcd_score(X, [0, 2], k=3) == pytest.approx(oracle_gcd(X, [0, 2], 3), abs=1e-10)


def test_gcd_handles_collinear_subset(rng):
    x = rng.normal(size=(60, 1))
    X = np.hstack([x, 3 * x, rng.normal(size=(60, 1))])
    assert 0.0 <= gcd_score(X, [0, 1]) <= 1.0
    assert gcd_score(X, [0, 1]) == pytest.approx(oracle_gcd(X, [0, 1], 2), abs=1e-10)


def test_gcd_rejects_bad_subsets(rng):
    X = rng.normal(size=(20, 3))
    for bad in ([], [0, 0], [3], [-1]):
        with pytest.raises(ParameterError):
            gcd_score(X, bad)
    with pytest.raises(ParameterError):
        gcd_score(X, [0], k=4)


@settings(max_examples=30, deadline=None)
@given(st.permutations([0, 2, 4]), st.integers(0, 50))
def test_gcd_invariant_to_index_order(order, seed):
    X = collinear_data(seed, n=80)
    assert gcd_score(X, order) == gcd_score(X, [0, 2, 4])


def test_acceptance_probability():
    assert acceptance_probability(0.5, 0.5, 1.0) == 1.0
    assert acceptance_probability(0.6, 0.5, 1.0) == 1.0
    assert acceptance_probability(0.4, 0.5, 0.1) == pytest.approx(math.exp(-1.0))
    assert acceptance_probability(0.4, 0.5, 0.0) == 0.0


def test_anneal_full_set_and_determinism(rng):
    X = rng.normal(size=(40, 5))
    res = anneal_select(X, 5)
    assert res.indices == (0, 1, 2, 3, 4) and res.gcd == pytest.approx(1.0)
    cfg = AnnealConfig(max_iterations=200, seed=3)
    assert anneal_select(X, 2, cfg).indices == anneal_select(X, 2, cfg).indices


@pytest.mark.parametrize("seed", range(10))
def test_anneal_reaches_exhaustive_optimum(seed):
    X = collinear_data(seed)
    best = exhaustive_select(X, 3)
    res = anneal_select(X, 3, AnnealConfig(max_iterations=500, seed=seed))
    assert res.gcd == pytest.approx(best.gcd, abs=1e-12)
    assert list(res.indices) == sorted(res.indices)


def test_anneal_config_validation():
    with pytest.raises(ParameterError):
        AnnealConfig(cooling_rate=1.0)
    with pytest.raises(ParameterError):
        AnnealConfig(initial_temperature=0.0)
    with pytest.raises(ParameterError):
        AnnealConfig(max_iterations=0)


def rank5_metrics(seed=0):
    rng = np.random.default_rng(seed)
    L = rng.normal(size=(400, 5)) * [5, 4, 3, 2.5, 2]
    return L @ rng.normal(size=(5, 10))


def test_elbow_flattens_at_latent_rank():
    rows = elbow_report(rank5_metrics(), cfg=AnnealConfig(max_iterations=1500))
    gcds = [g for _, g, _ in rows]
    assert [k for k, _, _ in rows] == list(range(1, 11))
    # each row is the true optimum for its k; the curve need not be monotone
    # below the rank (here the best single variable beats the best pair)
    exact = [exhaustive_select(rank5_metrics(), k).gcd for k in range(1, 6)]
    np.testing.assert_allclose(gcds[:5], exact, atol=1e-12)
    assert gcds[0] > gcds[1]
    assert max(gcds[:4]) < 1 - 1e-3
    np.testing.assert_allclose(gcds[4:], 1.0, atol=1e-9)


def test_gcd_selector_sklearn_api():
    X = rank5_metrics()
    sel = GCDSelector(n_features_to_select=5, max_iterations=500).fit(X)
    assert sel.get_support().sum() == 5
    assert sel.transform(X).shape == (400, 5)
    assert sel.gcd_ == pytest.approx(1.0)
    assert clone(sel).get_params()["n_features_to_select"] == 5
