import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from htsolve import htucker as ht, reduction as rd, oracle
from conftest import random_sparse_tensor, dense_of


def box(d):
    return [np.arange(1, 17)] * d


def dense_contraction(X, i):
    return np.sqrt(np.sum(np.moveaxis(X, i, 0).reshape(X.shape[i], -1) ** 2, axis=1))


def test_contractions_rank_one():
    x = np.array([0.6, 0.8])
    v = ht.from_rank_one([(np.array([1, 2]), x), (np.array([3]), np.array([1.0]))])
    cs = rd.contractions(v)
    assert np.allclose(cs.values[0], np.abs(x))
    assert np.allclose(cs.values[1], [1.0])
    z = rd.contractions(ht.zero_tensor(3))
    assert all(x.size == 0 for x in z.values)


def test_contractions_dense(rng):
    for d in (2, 3, 4):
        v = random_sparse_tensor(rng, d, 3)
        X = dense_of(v, box(d))
        cs = rd.contractions(v)
        for i in range(d):
            ref = dense_contraction(X, i)[cs.indices[i] - 1]
            assert np.allclose(cs.values[i], ref, rtol=1e-10, atol=1e-12 * np.linalg.norm(X))
            assert abs(np.linalg.norm(cs.values[i]) - ht.norm(v)) <= 1e-10 * ht.norm(v)


def test_dim_bins_edges(rng):
    v = random_sparse_tensor(rng, 3, 2)
    tot = sum(v.support_sizes())
    bins, mu = rd.dim_bins(v, tot)
    assert mu == 0.0 and all(np.array_equal(b, s) for b, s in zip(bins, v.supports))
    bins, mu = rd.dim_bins(v, 0)
    assert all(b.size == 0 for b in bins)
    assert abs(mu - np.sqrt(3) * ht.norm(v)) <= 1e-10 * ht.norm(v)


def test_dim_bins_near_optimal(rng):
    for _ in range(10):
        v = random_sparse_tensor(rng, 3, 2, max_supp=6)
        bins, mu = rd.dim_bins(v, 4)
        assert sum(b.size for b in bins) <= 4
        assert mu <= np.sqrt(3) * oracle.best_restriction_search(v, 4)


def test_coarsen(rng):
    v = random_sparse_tensor(rng, 3, 2)
    nv = ht.norm(v)
    assert rd.coarsen_to_tolerance(v, np.sqrt(3) * nv * 1.001).is_zero
    cs = rd.contractions(v)
    tiny = 0.5 * min(x.min() for x in cs.values)
    assert rd.coarsen_to_tolerance(v, tiny) is v
    eta = 0.2 * nv
    w = rd.coarsen_to_tolerance(v, eta)
    assert np.linalg.norm(dense_of(v, box(3)) - dense_of(w, box(3))) <= eta
    N = rd.coarsening_budget(cs, eta)
    assert rd.dim_bins(v, N, cs)[1] <= eta
    if N > 0:
        assert rd.dim_bins(v, N - 1, cs)[1] > eta


def test_tie_break_deterministic():
    v = ht.from_rank_one([{1: 1.0, 2: 1.0}, {1: 1.0, 2: 1.0}])
    bins, _ = rd.dim_bins(v, 1)
    assert bins[0].tolist() == [1] and bins[1].size == 0
    bins, _ = rd.dim_bins(v, 3)
    assert bins[0].tolist() == [1, 2] and bins[1].tolist() == [1]


def test_combined_constant():
    assert np.isclose(rd.combined_constant(2, 1.0), 3 + 4 * np.sqrt(2))


def test_combined_reduce(rng):
    u = random_sparse_tensor(rng, 3, 2)
    h = ht.hsvd(u)
    assert np.allclose(dense_of(rd.combined_reduce(h, 1e-14 * ht.norm(u)), box(3)),
                       dense_of(u, box(3)), atol=1e-12 * ht.norm(u))
    eta = 0.05 * ht.norm(u)
    noise = random_sparse_tensor(rng, 3, 1)
    noise = ht.scale(eta / ht.norm(noise), noise)
    v = ht.add(u, noise)
    w = rd.combined_reduce(v, eta, 1.0)
    err = np.linalg.norm(dense_of(u, box(3)) - dense_of(w, box(3)))
    assert err <= rd.combined_constant(3, 1.0) * eta


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), d=st.integers(2, 3), N=st.integers(0, 20))
def test_mu_certificate(seed, d, N):
    rng = np.random.default_rng(seed)
    v = random_sparse_tensor(rng, d, 3)
    bins, mu = rd.dim_bins(v, N)
    assert sum(b.size for b in bins) <= N
    if any(b.size == 0 for b in bins):
        err = ht.norm(v)
    else:
        err = np.linalg.norm(dense_of(v, box(d)) - dense_of(ht.restrict(v, bins), box(d)))
    assert err <= mu + 1e-12 * ht.norm(v)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), frac=st.floats(0.01, 0.9))
def test_contraction_monotone(seed, frac):
    rng = np.random.default_rng(seed)
    a = random_sparse_tensor(rng, 3, 3)
    b = random_sparse_tensor(rng, 3, 2)
    ca, cb, cab = rd.contractions(a), rd.contractions(b), rd.contractions(ht.add(a, b))
    for i in range(3):
        da, db = ca.as_dict(i), cb.as_dict(i)
        for n, x in cab.as_dict(i).items():
            assert x <= da.get(n, 0) + db.get(n, 0) + 1e-12 * (ca.norm + cb.norm)
    w = ht.truncate_to_tolerance(a, frac * ht.norm(a))
    cw = rd.contractions(w)
    for i in range(3):
        da = ca.as_dict(i)
        for n, x in cw.as_dict(i).items():
            assert x <= da[n] + 1e-12 * ca.norm
