import numpy as np
import pytest

from htsolve import htucker as ht
from htsolve import operator as opm
from htsolve import oracle
from htsolve.basis import SineBackend
from htsolve.errors import ResourceError

from conftest import random_sparse_tensor


def _ops(d):
    return [opm.build_laplacian(d, SineBackend()), opm.build_tridiagonal(d, SineBackend(4))]


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_cores_reproduce_coefficients(d):
    for op in _ops(d):
        np.testing.assert_allclose(opm.coefficient_tensor(op), opm.coefficients_from_a(op),
                                   atol=1e-15)


def test_node_ranks_match_kinds():
    lap = opm.build_laplacian(4, SineBackend())
    tri = opm.build_tridiagonal(4, SineBackend(4))
    assert lap.n_kinds == 2 and tri.n_kinds == 4
    assert max(lap.node_ranks().values()) == 2
    assert max(tri.node_ranks().values()) <= 5


def test_tridiagonal_matrix():
    a = opm.tridiagonal_matrix(4, 2.0, -1.0)
    assert np.allclose(np.diag(a), 2.0)
    assert np.allclose(np.diag(a, 1), -1.0)
    assert np.allclose(a, a.T)
    assert np.all(np.linalg.eigvalsh(a) > 0)


def test_nonsymmetric_coefficients_rejected():
    a = np.array([[2.0, -1.0], [0.0, 2.0]])
    with pytest.raises(opm.OperatorError):
        opm.build_tridiagonal(2, SineBackend(4), a=a)


def test_laplacian_spectral_bounds():
    op = opm.build_laplacian(3, SineBackend(), delta=0.1)
    lo, hi, certified = op.spectral_bounds()
    assert certified and lo == pytest.approx(1.0) and hi == pytest.approx(1.0)
    assert op.norm_bound() == pytest.approx(1.1 ** 2)
    assert op.inverse_norm_bound() == pytest.approx(1 / 0.9 ** 2)
    omega, rho = op.richardson()
    assert 0 < rho < 1
    assert omega == pytest.approx(2 / (0.81 + 1.21))


def test_zero_input_and_short_circuit(rng):
    op = opm.build_laplacian(2, SineBackend())
    w, rep = opm.apply(op, ht.zero_tensor(2), 1e-3)
    assert w.is_zero and rep.short_circuit
    v = random_sparse_tensor(rng, 2, 2)
    w, rep = opm.apply(op, v, 10 * op.norm_bound() * ht.norm(v))
    assert w.is_zero and rep.short_circuit


def test_invalid_tolerance(rng):
    op = opm.build_laplacian(2, SineBackend())
    v = random_sparse_tensor(rng, 2, 2)
    with pytest.raises(ht.ToleranceError):
        opm.apply(op, v, 0.0)


def test_e_J_decreases_with_J(rng):
    op = opm.build_tridiagonal(2, SineBackend(4))
    v = random_sparse_tensor(rng, 2, 2, max_index=31)
    es = [opm.a_posteriori_error(op, v, J) for J in range(0, 10)]
    # beta_0 exceeds ||A_n||, so e_J can rise for small J before it decays
    assert all(np.isfinite(es)) and min(es) >= 0
    assert es[-1] == 0.0 and es[5] < es[2]
    assert opm.a_posteriori_error(opm.build_laplacian(2, SineBackend()), v, 0) >= 0


@pytest.mark.parametrize("name", ["laplacian", "tridiagonal"])
@pytest.mark.parametrize("rel", [1e-2, 1e-4])
def test_apply_against_dense(name, rel):
    rng = np.random.default_rng(7)
    d = 2
    op = opm.build_laplacian(d, SineBackend()) if name == "laplacian" \
        else opm.build_tridiagonal(d, SineBackend(4))
    v = random_sparse_tensor(rng, d, 2, max_supp=6, max_index=31)
    box = [np.arange(1, 32)] * d
    ref, bar = oracle.apply_dense_reference(op, v, box)
    eta = rel * ht.norm(v)
    w, rep = opm.apply(op, v, eta)
    err = np.linalg.norm(oracle.densify(w, box).values - ref.values)
    assert err <= eta + bar
    assert rep.rank_audit_ok


def test_apply_base_against_dense():
    rng = np.random.default_rng(3)
    op = opm.build_laplacian(2, SineBackend())
    v = random_sparse_tensor(rng, 2, 2, max_supp=5, max_index=15)
    box = [np.arange(1, 32)] * 2
    ref, _ = oracle.apply_dense_reference(op, v, box)
    eta = 1e-3 * ht.norm(v)
    w, plan = opm.apply_base(op, v, eta)
    assert np.linalg.norm(oracle.densify(w, box).values - ref.values) <= eta
    assert plan.J >= 0


def test_apply_report_fields(rng):
    op = opm.build_laplacian(3, SineBackend())
    v = random_sparse_tensor(rng, 3, 2, max_supp=4)
    w, rep = opm.apply(op, v, 1e-2 * ht.norm(v))
    d = rep.to_dict()
    for key in ("J", "m0", "m1", "n_pairs", "n_discarded", "rank_audit_ok", "output_max_rank"):
        assert key in d
    assert rep.n_discarded <= rep.n_pairs
    assert rep.discarded_mass <= rep.eta / 4 * (1 + 1e-12)
    assert rep.output_max_rank == w.max_rank


def test_rank_cap_raises(rng):
    op = opm.build_laplacian(2, SineBackend())
    v = random_sparse_tensor(rng, 2, 3)
    with pytest.raises(ResourceError):
        opm.apply(op, v, 1e-8 * ht.norm(v), opm.ApplyConfig(rank_cap=2))


def test_apply_is_linear_up_to_tolerance(rng):
    op = opm.build_tridiagonal(2, SineBackend(4))
    v = random_sparse_tensor(rng, 2, 2, max_index=31)
    eta = 1e-6 * ht.norm(v)
    w1, _ = opm.apply(op, v, eta)
    w2, _ = opm.apply(op, ht.scale(2.0, v), 2 * eta)
    assert ht.norm(ht.subtract(w2, ht.scale(2.0, w1))) <= 4 * eta
