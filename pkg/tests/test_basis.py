import numpy as np
import pytest

from htsolve import basis


_X, _W = np.polynomial.legendre.leggauss(20)
_PANELS = 1024
_NODES = ((np.arange(_PANELS)[:, None] + (_X[None, :] + 1) / 2) / _PANELS).ravel()
_WEIGHTS = np.tile(_W / (2 * _PANELS), _PANELS)


def quad_entry(kind, nu, mu):
    """Defining integral by composite Gauss-Legendre quadrature on (0, 1)."""
    x = _NODES
    psi = lambda n: np.sqrt(2) * np.sin(np.pi * n * x)
    dpsi = lambda n: np.sqrt(2) * np.pi * n * np.cos(np.pi * n * x)
    f = {1: psi(nu) * psi(mu), 2: dpsi(nu) * dpsi(mu),
         3: dpsi(nu) * psi(mu), 4: psi(nu) * dpsi(mu)}[kind]
    return float(f @ _WEIGHTS)


def test_level():
    nu = np.array([1, 2, 3, 4, 7, 8, 2 ** 40 - 1, 2 ** 40])
    assert basis.level(nu).tolist() == [0, 1, 1, 2, 2, 3, 39, 40]
    with pytest.raises(IndexError):
        basis.level([0])


def test_weights():
    b = basis.SineBackend()
    assert np.isclose(b.weight([1])[0], np.pi)
    assert np.isclose(b.weight([3])[0], 3 * np.pi)
    assert np.isclose(b.weight([3])[0] ** 2, 9 * np.pi ** 2)
    w = b.weight(np.arange(1, 50))
    assert np.all(np.diff(w) > 0)
    with pytest.raises(IndexError):
        b.weight([0])


def test_entries_closed_form():
    b = basis.SineBackend()
    assert b.entry(1, 3, 3) == 1.0 and b.entry(1, 3, 4) == 0.0
    assert np.isclose(b.entry(2, 2, 2), 4 * np.pi ** 2)
    assert np.isclose(b.entry(3, 1, 2), 8 / 3)
    assert np.isclose(quad_entry(3, 1, 2), 8 / 3, atol=1e-10)


def test_entries_against_quadrature():
    rng = np.random.default_rng(7)
    b = basis.SineBackend()
    for _ in range(200):
        kind = int(rng.integers(1, 5))
        nu, mu = (int(rng.integers(1, 2 ** 9)) for _ in range(2))
        if rng.random() < 0.2:
            mu = nu
        assert abs(b.entry(kind, nu, mu) - quad_entry(kind, nu, mu)) <= 1e-10 * max(1, nu * mu)


def test_t3_t4_structure():
    b = basis.SineBackend()
    idx = np.arange(1, 64)
    T3 = b.matrix(3, idx, idx)
    T4 = b.matrix(4, idx, idx)
    par = (idx[:, None] + idx[None, :]) % 2 == 0
    assert np.all(T3[par] == 0) and np.all(T3[~par] != 0)
    # integration by parts: T4 is the adjoint of T3 and equals -T3
    assert np.allclose(T4, T3.T, atol=1e-12)
    assert np.allclose(T4, -T3, atol=1e-12)
    A2 = b.matrix(2, idx, idx) / np.outer(b.weight(idx), b.weight(idx))
    assert np.allclose(A2, np.eye(idx.size), atol=1e-14)


def test_compressed_patterns():
    b = basis.SineBackend()
    idx = np.arange(1, 64)
    assert np.array_equal(b.matrix(2, idx, idx, j=0), b.matrix(2, idx, idx))
    assert b.beta(2, 0) == 0 and b.beta(1, 3) == 0
    T30 = b.matrix(3, idx, idx, j=0)
    lv = basis.level(idx)
    assert np.all(T30[lv[:, None] != lv[None, :]] == 0)
    for j in range(4):
        Tj = b.matrix(3, idx, idx, j=j)
        assert np.all(Tj[np.abs(lv[:, None] - lv[None, :]) > j] == 0)


def test_compression_decay():
    b = basis.SineBackend()
    js = list(range(7))
    errs = [b.compression_error(3, j) for j in js]
    assert all(e1 > e2 for e1, e2 in zip(errs, errs[1:]))
    assert basis.fit_decay_rate(js, errs) >= 0.5
    betas = [b.beta(3, j) for j in range(15)]
    assert all(x >= y for x, y in zip(betas, betas[1:]))
    for j in js:
        assert errs[j] <= betas[j] * 2.0 ** (-b.s * j)


def test_compression_certificate_capped():
    b = basis.SineBackend(max_level=5)
    u = b.universe()
    A = b.matrix(3, u, u) / b.weight(u)[None, :]
    for j in range(7):
        E = A - b.matrix(3, u, u, j=j) / b.weight(u)[None, :]
        assert np.linalg.norm(E, 2) <= b.beta(3, j) * 2.0 ** (-b.s * j) + 1e-14
    assert b.beta(3, 5) == 0.0
    assert b.op_norm(3) <= 1.0 + 1e-12


def test_a3_norm_bound():
    b = basis.SineBackend()
    w = basis.level_range(0, 8)
    A = b.matrix(3, w, w) / b.weight(w)[None, :]
    assert np.linalg.norm(A, 2) <= b.op_norm(3) + 1e-12


@pytest.mark.xfail(strict=True, reason="safety factor 2 with level-diagonal j=0 blocks gives "
                   "sum beta_j > ||A_3||; see decisions ledger")
def test_beta_normalization():
    b = basis.SineBackend()
    assert b.beta_normalization_ratio(3) <= 1.0


def test_reach_and_cap():
    b = basis.SineBackend()
    r = b.reach(3, np.array([4, 5]), j=1)
    assert r.min() == 2 and r.max() == 15
    with pytest.raises(basis.ResourceError):
        b.reach(3, np.array([1]), j=20)
    with pytest.raises(basis.ResourceError):
        b.reach(3, np.array([1]))
    c = basis.SineBackend(max_level=3)
    assert np.array_equal(c.reach(3, np.array([1])), np.arange(1, 16))
    with pytest.raises(IndexError):
        c.weight([16])


def test_tabulated_roundtrip(tmp_path):
    src = basis.SineBackend(max_level=4)
    path = basis.write_tabulated(tmp_path, src, 4)
    tab = basis.TabulatedBackend(path)
    u = src.universe()
    for k in basis.KINDS:
        assert np.allclose(tab.matrix(k, u, u), src.matrix(k, u, u), atol=1e-14)
        assert np.allclose(tab.matrix(k, u, u, j=1), src.matrix(k, u, u, j=1), atol=1e-14)
    assert np.allclose(tab.weight(u), src.weight(u))
    for j in range(5):
        assert np.isclose(tab.beta(3, j), src.beta(3, j))
        assert np.isclose(tab.compression_error(3, j), src.compression_error(3, j))
    assert np.isclose(tab.op_norm(4), src.op_norm(3))
    assert np.isclose(tab.entry(3, 1, 2), 8 / 3)


def test_tabulated_bad_manifest(tmp_path):
    p = tmp_path / "m.json"
    p.write_text('{"kind": "other"}')
    with pytest.raises(basis.BackendError):
        basis.TabulatedBackend(p)
