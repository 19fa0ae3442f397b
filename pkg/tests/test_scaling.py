import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from htsolve import htucker as ht, scaling as sc, basis
from conftest import random_sparse_tensor

GRID = np.logspace(0, 8, 1000)


def test_choose_params():
    p = sc.choose_params(0.5)
    assert abs(p.h - 0.366471) < 1e-6 and p.n_plus == 7
    p = sc.choose_params(0.1)
    # pi^2 / (5 (ln 20 + 4))
    assert abs(p.h - 0.2821607) < 1e-6 and p.n_plus == 8
    lim = math.pi ** 2 / (5 * (math.log(2) + 4))
    assert abs(sc.choose_params(1 - 1e-12).h - lim) < 1e-9
    for bad in (0.0, 1.0, -0.1, 2.0):
        with pytest.raises(sc.ParameterError):
            sc.choose_params(bad)


def test_phi_single_term():
    p = sc.ExpSumParams(0.5, 0.3, 0)
    assert np.isclose(sc.phi(p, 0, 2.0), 0.3 / math.sqrt(math.pi) * math.exp(-math.log(2) ** 2 * 2))
    with pytest.raises(sc.ParameterError):
        sc.phi(p, 0, 0.5)


def test_phi_bounds():
    p = sc.choose_params(0.01)
    n = 200
    for t in (1.0, 10.0, 1e4, 1e8):
        assert abs(math.sqrt(t) * sc.phi(p, n, t) - 1) <= 0.01
    p = sc.choose_params(0.5)
    assert 0.5 <= sc.phi(p, sc.m0(1.0, p), 1.0) <= 1.5
    vals = [sc.phi(p, n, 3.0) for n in range(10)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_terms_required():
    p = sc.choose_params(0.1)
    assert sc.terms_required(0.05, 1e6, p) == sc.m0(1e6, p)
    # ceil(h^-1 (ln(2/sqrt(pi)) + ln 1000 + 3 ln 10)) with h = 0.28216
    assert sc.terms_required(1e-3, 1e6, p) == 50
    assert sc.terms_required(1e-3, 1.0, p) == math.ceil((math.log(2 / math.sqrt(math.pi)) + math.log(1e3)) / p.h)


@pytest.mark.parametrize("delta", [0.5, 0.1, 0.01])
def test_certified_relative_error(delta):
    t, err, p, n = sc.certify(delta, 1e8, 1000)
    assert err.max() <= delta


@pytest.mark.parametrize("delta", [0.5, 0.1, 0.01])
@pytest.mark.parametrize("eta", [1e-2, 1e-5, 1e-9])
def test_tail_bound(delta, eta):
    p = sc.choose_params(delta)
    n = sc.terms_required(eta, 1e8, p)
    tail = np.sqrt(GRID) * np.abs(sc.phi(p, n + 50, GRID) - sc.phi(p, n, GRID))
    assert tail.max() <= eta


def test_canonical_weight():
    b = basis.SineBackend()
    assert np.isclose(sc.canonical_weight([1, 1], sc.ModeWeights(b, 2)), math.pi * math.sqrt(2))
    assert np.isclose(sc.canonical_weight([1, 1, 1], sc.ModeWeights(b, 3)), math.pi * math.sqrt(3))
    W = sc.ModeWeights(b, 5, multipliers=np.full(5, 2.0))
    assert np.isclose(sc.canonical_weight([1] * 5, W), 2 * math.pi * math.sqrt(5))
    assert np.isclose(W.omega_min(), 2 * math.pi * math.sqrt(5))


def _expansion(d, delta=0.1, n=None, T=1e4):
    b = basis.SineBackend()
    W = sc.ModeWeights(b, d)
    p = sc.choose_params(delta)
    n = sc.m0(T, p) if n is None else n
    return sc.build_inverse_scaling(n, p, W.omega_min(), W), W, p


def test_expansion_exact_inverse(rng):
    E, W, p = _expansion(3)
    assert E.n_terms == 1 + p.n_plus + E.n
    nu = rng.integers(1, 30, size=(50, 3))
    direct = sc.phi(p, E.n, (sc.canonical_weight(nu, W) / E.omega_min) ** 2) / E.omega_min
    assert np.allclose(E.inverse_weight(nu), direct, rtol=1e-13)
    summed = sum(np.prod([E.theta(l, i, nu[:, i]) for i in range(3)], axis=0) for l in range(E.n_terms))
    assert np.allclose(summed, direct, rtol=1e-12)


def test_expansion_relative_accuracy():
    T = 1e4
    E, W, p = _expansion(2, 0.1, T=T)
    # all nu in Lambda_T: omega_nu^2 <= 2 pi^2 T
    g = np.arange(1, 101)
    nu = np.array(np.meshgrid(g, g)).reshape(2, -1).T
    om = sc.canonical_weight(nu, W)
    inside = om ** 2 <= E.omega_min ** 2 * T
    r = om[inside] * E.inverse_weight(nu[inside])
    assert np.all(np.abs(r - 1) <= 0.1)
    # monotone in n and bounded by the reference scaling
    E2 = E.extend(E.n + 5)
    assert np.all(E.inverse_weight(nu) <= E2.inverse_weight(nu))
    ref = sc.reference_inverse_weight(nu, p, W)
    assert np.all(E2.inverse_weight(nu) <= ref * (1 + 1e-14))
    # operator-norm statements
    assert np.all(om * E.inverse_weight(nu) <= 1.1)
    assert np.all(1 / (om[inside] * E.inverse_weight(nu[inside])) <= 1 / 0.9)
    assert np.all(1 / (om * ref) <= 1 / 0.9)


def test_term_list_extends():
    E, W, p = _expansion(2, n=10)
    F = E.extend(17)
    assert F.n_terms == E.n_terms + 7
    assert np.array_equal(F.wt[:E.n_terms], E.wt) and np.array_equal(F.at[:E.n_terms], E.at)


def test_apply_rank_count():
    E, W, p = _expansion(2, n=6)
    v = ht.from_rank_one([{1: 1.0, 3: 0.5}, {2: 1.0}])
    w = E.apply(v)
    assert w.max_rank <= 1 + p.n_plus + 6
    nu = np.array([[1, 2], [3, 2]])
    assert np.allclose(ht.evaluate_entries(w, nu), E.inverse_weight(nu) * [1.0, 0.5], rtol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), d=st.integers(2, 4))
def test_separability_exact(seed, d):
    rng = np.random.default_rng(seed)
    v = random_sparse_tensor(rng, d, 2, max_supp=5, max_index=12)
    E, W, p = _expansion(d, 0.1, n=12)
    w = E.apply(v)
    idx = np.stack([rng.choice(v.supports[i], 30) for i in range(d)], axis=1)
    ref = ht.evaluate_entries(v, idx) * E.inverse_weight(idx)
    got = ht.evaluate_entries(w, idx)
    assert np.max(np.abs(got - ref)) <= 1e-12 * max(np.max(np.abs(ref)), 1e-300)


def test_lambda_T():
    b = basis.SineBackend()
    W = sc.ModeWeights(b, 2)
    assert sc.lambda_T_bound(ht.from_rank_one([{1: 1.0}, {1: 1.0}]), W) == 1.0
    v = ht.from_rank_one([{k: 1.0 for k in range(1, 5)}, {k: 1.0 for k in range(1, 5)}])
    assert np.isclose(sc.lambda_T_bound(v, W), 16.0)
    bigger = ht.from_rank_one([{k: 1.0 for k in range(1, 6)}, {k: 1.0 for k in range(1, 5)}])
    assert sc.lambda_T_bound(bigger, W) >= sc.lambda_T_bound(v, W)
    assert sc.lambda_T_bound(ht.zero_tensor(2), W) == 1.0
