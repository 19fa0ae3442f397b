"""Low-rank second-order operators and their adaptive rescaled application.

T = sum_n c_n T_{n_1} x ... x T_{n_d} with the coefficient tensor c held in
the same linear tree layout as an HTTensor whose leaf frames are the
identity on the component kinds.  ``cores[t]`` has shape (a_t, nK, b_t):
parent state, kind used in mode t, state handed on to modes t+1.. (or the
kind of the last mode for t = d-2).

The rescaled operator A = S~^-1 T S~^-1 is applied as a sum over pairs of
separable scaling terms, Theta_l1 T~_J Theta_l0 v, which are summed in order
of increasing norm with tolerance-controlled recompression.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
import math
import time

import numpy as np

from . import htucker as ht
from . import ops
from . import reduction
from .basis import DEFAULT_ROW_CAP, SineBackend, TabulatedBackend
from .errors import ResourceError
from .scaling import (ModeWeights, build_inverse_scaling, choose_params,
                      lambda_T_of_supports, terms_required)

# beyond this many levels e_J is considered not to converge
MAX_J = 60
# relative slack on Gram-based pair norms (round-off in the chain contraction)
TAU_SLACK = 1e-13


class OperatorError(ValueError):
    pass


# ---------------------------------------------------------------- operators

@dataclass(eq=False)
class LowRankOperator:
    name: str
    a: np.ndarray
    backend: object
    weights: ModeWeights
    delta: float
    kinds: tuple
    cores: tuple

    def __post_init__(self):
        self.params = choose_params(self.delta)
        self._bounds = None

    @property
    def d(self):
        return self.a.shape[0]

    @property
    def n_kinds(self):
        return len(self.kinds)

    def node_ranks(self):
        """R_alpha for every node (leaves: number of kinds, root 1)."""
        d = self.d
        out = {ht.leaf_node(i): self.n_kinds for i in range(d)}
        for t in range(d - 1):
            out[ht.inner_node(t, d)] = self.cores[t].shape[0]
        return out

    def terms(self):
        """Sparse list of (coefficient, {mode: kind}) read off a."""
        a, d = self.a, self.d
        out = [(float(a[i, i]), {i: 2}) for i in range(d) if a[i, i] != 0]
        for i in range(d):
            for j in range(d):
                if i != j and a[i, j] != 0:
                    out.append((float(a[i, j]), {i: 4, j: 3}))
        return out

    # -- univariate data with mode multipliers
    def _power(self, kind):
        return {1: 0, 2: 2, 3: 1, 4: 1}[kind]

    def comp_norm(self, i, kind):
        c = self.weights.multipliers[i]
        return self.backend.op_norm(kind) / c ** self._power(kind)

    def comp_beta(self, i, kind, j):
        c = self.weights.multipliers[i]
        return self.backend.beta(kind, j) / c ** self._power(kind)

    def compressed_norm(self, i, kind, jmax=MAX_J):
        """Bound on ||S_i^-1 T~_kind|| for any partition into compression levels."""
        if kind == 1:
            return 1.0
        s = self.backend.s
        tail = math.sqrt(sum((self.comp_beta(i, kind, j) * 2.0 ** (-s * j)) ** 2
                             for j in range(jmax + 1)))
        return self.comp_norm(i, kind) + tail

    def coupling_constants(self):
        """C_A^(i) = max(|a_ii|, sum_j |a_ij| N4^(j), sum_j |a_ij| N3^(j))."""
        a, d = self.a, self.d
        out = np.zeros(d)
        for i in range(d):
            off = [j for j in range(d) if j != i and a[i, j] != 0]
            c3 = sum(abs(a[i, j]) * self.compressed_norm(j, 3) for j in off)
            c4 = sum(abs(a[i, j]) * self.compressed_norm(j, 4) for j in off)
            out[i] = max(abs(a[i, i]), c3, c4)
        return out

    # -- spectral information
    def t2_diagonal(self):
        b = self.backend
        if isinstance(b, SineBackend):
            return True
        if isinstance(b, TabulatedBackend):
            T2 = b._T[2]
            return bool(np.all(T2 == np.diag(np.diag(T2))))
        return False

    def spectral_bounds(self):
        """(lam_min, lam_max, certified) enclosing the spectrum of S^-1 T S^-1.

        When T2 is diagonal with omega_hat^2 on the diagonal the enclosure is
        the spectrum of D^-1/2 a D^-1/2, D = diag(c_i^2).
        """
        if self._bounds is None:
            c = self.weights.multipliers
            B = self.a / np.outer(c, c)
            lam = np.linalg.eigvalsh(B)
            if self.t2_diagonal():
                self._bounds = (float(lam[0]), float(lam[-1]), True)
            else:
                d = self.d
                up = sum(abs(self.a[i, i]) * self.comp_norm(i, 2) for i in range(d))
                up += sum(abs(self.a[i, j]) * self.comp_norm(i, 4) * self.comp_norm(j, 3)
                          for i in range(d) for j in range(d) if i != j)
                self._bounds = (float(lam[0]) / 1.1, float(up), False)
        return self._bounds

    def norm_bound(self):
        """||A|| <= lam_max (1+delta)^2."""
        return self.spectral_bounds()[1] * (1 + self.delta) ** 2

    def inverse_norm_bound(self):
        """c_A >= ||A^-1||."""
        return 1.0 / (self.spectral_bounds()[0] * (1 - self.delta) ** 2)

    def richardson(self, safety=0.05):
        """(omega, rho) for id - omega A, rho inflated by ``safety``."""
        lo = self.spectral_bounds()[0] * (1 - self.delta) ** 2
        hi = self.norm_bound()
        omega = 2.0 / (hi + lo)
        rho = min((hi - lo) / (hi + lo) * (1 + safety), 0.999)
        return omega, rho


def _check_d(d):
    if int(d) < 2:
        raise OperatorError("operators need d >= 2")
    return int(d)


def _laplacian_cores(a):
    d = a.shape[0]
    cores = []
    for t in range(d - 1):
        if t == 0:
            C = np.zeros((1, 2, 2))
            C[0, 1, 0] = a[0, 0]
            C[0, 0, 1] = a[1, 1] if d == 2 else 1.0
        else:
            C = np.zeros((2, 2, 2))
            C[0, 0, 0] = 1.0
            C[1, 1, 0] = a[t, t]
            C[1, 0, 1] = a[d - 1, d - 1] if t == d - 2 else 1.0
        cores.append(C)
    return tuple(cores)


def _tridiagonal_cores(a):
    """States: 0 all id, 1 one T2 pending, 2 leading T3, 3 leading T4, 4 finished cross term."""
    d = a.shape[0]
    cores = []
    for t in range(d - 1):
        last = t == d - 2
        nb = 4 if last else 5
        if t == 0:
            C = np.zeros((1, 4, nb))
            C[0, 1, 0] = a[0, 0]
            C[0, 0, 1] = a[1, 1] if last else 1.0
            C[0, 2, 3] = a[0, 1]
            C[0, 3, 2] = a[0, 1]
            if not last:
                C[0, 0, 4] = 1.0
        else:
            C = np.zeros((5, 4, nb))
            C[0, 0, 0] = 1.0
            C[1, 1, 0] = a[t, t]
            C[1, 0, 1] = a[d - 1, d - 1] if last else 1.0
            C[2, 2, 0] = 1.0
            C[3, 3, 0] = 1.0
            C[4, 2, 3] = a[t, t + 1]
            C[4, 3, 2] = a[t, t + 1]
            if not last:
                C[4, 0, 4] = 1.0
        cores.append(C)
    return tuple(cores)


def build_laplacian(d, backend, a=None, delta=0.1, rescale_diagonal=False):
    """-div(a grad) for a diagonal a (default identity): R = 2."""
    d = _check_d(d)
    a = np.eye(d) if a is None else np.asarray(a, dtype=float)
    if a.shape != (d, d) or np.any(a != np.diag(np.diag(a))) or np.any(np.diag(a) <= 0):
        raise OperatorError("the Laplacian form needs a positive diagonal a")
    w = ModeWeights.from_diffusion(backend, a, rescale_diagonal)
    return LowRankOperator("laplacian", a, backend, w, float(delta), (1, 2), _laplacian_cores(a))


def tridiagonal_matrix(d, diag=2.0, off=-1.0):
    return diag * np.eye(d) + off * (np.eye(d, k=1) + np.eye(d, k=-1))


def build_tridiagonal(d, backend, diag=2.0, off=-1.0, delta=0.1, a=None):
    """Tridiagonal diffusion matrix: R = 4 kinds, interior ranks 5."""
    d = _check_d(d)
    a = tridiagonal_matrix(d, diag, off) if a is None else np.asarray(a, dtype=float)
    if np.any(np.triu(a, 2) != 0) or np.any(a != a.T):
        raise OperatorError("a must be symmetric tridiagonal")
    if np.linalg.eigvalsh(a)[0] <= 0:
        raise OperatorError("a must be positive definite")
    w = ModeWeights(backend, d)
    return LowRankOperator("tridiagonal", a, backend, w, float(delta), (1, 2, 3, 4),
                           _tridiagonal_cores(a))


def coefficient_tensor(op):
    """Dense c_n of shape (nK,)*d by contracting the cores (small d only)."""
    d = op.d
    if op.n_kinds ** d > 10 ** 6:
        raise ResourceError("coefficient tensor too large to densify")
    G = op.cores[d - 2]                                 # (a, n_{d-2}, n_{d-1})
    for t in range(d - 3, -1, -1):
        G = np.tensordot(op.cores[t], G, axes=([2], [0]))
    return G[0]


def coefficients_from_a(op):
    """Reference c_n assembled from the terms of a."""
    c = np.zeros((op.n_kinds,) * op.d)
    pos = {k: n for n, k in enumerate(op.kinds)}
    for coef, mk in op.terms():
        idx = tuple(pos[mk.get(i, 1)] for i in range(op.d))
        c[idx] += coef
    return c


# ---------------------------------------------------------------- e_J

def _partition_positions(values, idx):
    """p-block of each column: rank q in the nonincreasing order -> bit_length(q)."""
    key = np.round(np.asarray(values) * 1e13 / max(float(np.max(values)), 1e-300))
    order = np.lexsort((idx, -key))
    q = np.empty(len(values), dtype=np.int64)
    q[order] = np.arange(len(values))
    p = np.zeros_like(q)
    nz = q > 0
    p[nz] = np.floor(np.log2(q[nz])).astype(np.int64) + 1
    return p


def _block_norms(values, p):
    P = int(p.max()) if p.size else 0
    nb = np.zeros(P + 1)
    np.add.at(nb, p, np.asarray(values) ** 2)
    return np.sqrt(nb)


def a_posteriori_error(op, v, J, cs=None):
    """e_J(v): bound on ||(A_c - A~_{c,J}) v||."""
    if v.is_zero:
        return 0.0
    cs = reduction.contractions(v) if cs is None else cs
    CA = op.coupling_constants()
    s = op.backend.s
    kinds = [k for k in op.kinds if k != 1]
    tot = 0.0
    for i in range(op.d):
        vals = cs.values[i]
        p = _partition_positions(vals, cs.indices[i])
        nb = _block_norms(vals, p)
        head = 0.0
        for q in range(min(J, nb.size - 1) + 1):
            j = J - q
            bs = sum(op.comp_beta(i, k, j) for k in kinds) * 2.0 ** (-s * j)
            head += bs * nb[q]
        tail = float(np.sqrt(np.sum(nb[J + 1:] ** 2)))
        an = sum(op.comp_norm(i, k) for k in kinds)
        tot += CA[i] * (head + an * tail)
    return float(tot)


# ---------------------------------------------------------------- compressed factors

def compressed_factor(op, i, cols, values, J, cap=DEFAULT_ROW_CAP):
    """T~^(i)_n for all kinds: (rows, M) with M of shape (nK, #rows, #cols).

    Column c in block p uses the level band J - p; columns beyond the best
    2^J get no contribution from the non-identity kinds.
    """
    b = op.backend
    cols = np.asarray(cols, dtype=np.int64)
    p = _partition_positions(values, cols)
    groups = [(q, np.nonzero(p == q)[0]) for q in range(min(J, int(p.max())) + 1)]
    groups = [(q, g) for q, g in groups if g.size]
    rows = [cols]
    for k in op.kinds:
        if k == 1:
            continue
        for q, g in groups:
            rows.append(b.reach(k, cols[g], J - q, cap=cap))
    rows = np.unique(np.concatenate(rows))
    if rows.size > cap:
        raise ResourceError(f"mode {i}: {rows.size} rows exceed the cap {cap}")
    M = np.zeros((op.n_kinds, rows.size, cols.size))
    for n, k in enumerate(op.kinds):
        if k == 1:
            M[n, np.searchsorted(rows, cols), np.arange(cols.size)] = 1.0
            continue
        for q, g in groups:
            M[n][:, g] = b.matrix(k, rows, cols[g], j=J - q)
    ops.count("assemble", M.size)
    return rows, M


# ---------------------------------------------------------------- HT-operators

def apply_ht_operator(leaf_mats, rows, cores, v):
    """Apply a hierarchical operator given by leaf matrices and cores.

    ``leaf_mats[i]`` has shape (nL_i, #rows_i, #supp_i v) and acts on the
    support of v in mode i; ``cores`` follow the tensor layout.  Ranks
    multiply node by node.
    """
    d = v.d
    frames = []
    for i in range(d):
        Mi = leaf_mats[i]
        F = np.einsum('nrs,sx->rnx', Mi, v.frames[i]).reshape(Mi.shape[1], -1)
        ops.count("leaf_apply", Mi.size * v.frames[i].shape[1])
        frames.append(F)
    new = []
    for t in range(d - 1):
        C, B = cores[t], v.cores[t]
        K = np.einsum('vnr,axb->vanxrb', C, B).reshape(
            C.shape[0] * B.shape[0], C.shape[1] * B.shape[1], C.shape[2] * B.shape[2])
        new.append(K)
    return ht.make_tensor(rows, frames, new)


def scaling_ht_operator(E, supports):
    """S~_n^-1 as a hierarchical operator on the given supports (diagonal cores)."""
    d = E.d
    m = E.n_terms
    leaf = [np.stack([np.diag(f) for f in E.mode_factors(i, supports[i])]) for i in range(d)]
    cores = []
    for t in range(d - 1):
        if t == 0:
            C = np.eye(m)[None]
        else:
            C = np.zeros((m, m, m))
            C[np.arange(m), np.arange(m), np.arange(m)] = 1.0
        cores.append(C)
    return leaf, cores


def operator_leaf_stack(op, factors):
    """Leaf matrices of T~: factors[i] = (rows, M)."""
    return [f[1] for f in factors], [f[0] for f in factors]


# ---------------------------------------------------------------- planning

@dataclass
class ApplyConfig:
    rank_cap: int = 500
    row_cap: int = DEFAULT_ROW_CAP
    # flush the banked summands once the representation rank reaches this
    bank_rank: int = 8
    max_J: int = MAX_J


@dataclass
class ApplyPlan:
    eta: float
    J: int
    e_J: float
    T0: float
    T1: float
    m0: int
    m1: int
    zeta: float
    rows: list
    mats: list


def plan_apply(op, v, eta, cfg=None, norm_v=None):
    """J(eta), T(J; v) and m(eta; v) for the structural bound ||Av - w_eta|| <= eta.

    The input side uses the support hull of v (T0), the output side the
    hull of v and T~_J v (T1).
    """
    cfg = cfg or ApplyConfig()
    cs = reduction.contractions(v)
    delta = op.delta
    J, eJ = None, None
    for jj in range(cfg.max_J + 1):
        e = a_posteriori_error(op, v, jj, cs)
        if (1 + delta) ** 2 * e <= eta / 4:
            J, eJ = jj, e
            break
    if J is None:
        raise ResourceError(f"e_J does not reach {eta / 4:.3e} for J <= {cfg.max_J}")
    rows, mats = [], []
    for i in range(v.d):
        r, M = compressed_factor(op, i, v.supports[i], cs.values[i], J, cfg.row_cap)
        rows.append(r)
        mats.append(M)
    nv = ht.norm(v) if norm_v is None else norm_v
    zeta = (1 - delta) * eta / (4 * op.norm_bound() * nv)
    T0 = lambda_T_of_supports(v.supports, op.weights)
    T1 = lambda_T_of_supports(rows, op.weights)
    m0 = terms_required(zeta, T0, op.params)
    m1 = terms_required(zeta, T1, op.params)
    return ApplyPlan(float(eta), J, eJ, T0, T1, m0, m1, zeta, rows, mats)


def apply_base(op, v, eta, cfg=None):
    """w_eta = S~_m1^-1 T~_J S~_m0^-1 v without any recompression."""
    if v.is_zero:
        return v, None
    plan = plan_apply(op, v, eta, cfg)
    omin = op.weights.omega_min()
    E0 = build_inverse_scaling(plan.m0, op.params, omin, op.weights)
    E1 = build_inverse_scaling(plan.m1, op.params, omin, op.weights)
    L0, C0 = scaling_ht_operator(E0, v.supports)
    x = apply_ht_operator(L0, v.supports, C0, v)
    x = apply_ht_operator(plan.mats, plan.rows, op.cores, x)
    L1, C1 = scaling_ht_operator(E1, plan.rows)
    x = apply_ht_operator(L1, plan.rows, C1, x)
    return x, plan


# ---------------------------------------------------------------- practical apply

@dataclass
class ApplyReport:
    eta: float
    short_circuit: bool = False
    J: int = 0
    e_J: float = 0.0
    T0: float = 1.0
    T1: float = 1.0
    m0: int = 0
    m1: int = 0
    m_hat0: int = 0
    m_hat1: int = 0
    n_pairs: int = 0
    n_discarded: int = 0
    discarded_mass: float = 0.0
    n_flushes: int = 0
    zeta_total: float = 0.0
    input_ranks: list = field(default_factory=list)
    max_rank_intermediate: int = 0
    rank_audit_ok: bool = True
    rank_audit: dict = field(default_factory=dict)
    output_max_rank: int = 0
    output_support: list = field(default_factory=list)
    row_support: list = field(default_factory=list)
    ops: int = 0
    seconds: float = 0.0

    def to_dict(self):
        return asdict(self)


def _mode_data(plan, E0, E1, v, i):
    M = plan.mats[i]
    th0 = E0.mode_factors(i, v.supports[i])            # (m0, s)
    U = v.frames[i]
    TU = th0[:, :, None] * U[None]                      # (m0, s, k)
    nK, nr, ns = M.shape
    Y = (M.reshape(nK * nr, ns) @ TU)                   # (m0, nK*nr, k)
    Y = Y.reshape(-1, nK, nr, U.shape[1]).transpose(0, 2, 1, 3).reshape(-1, nr, nK * U.shape[1])
    ops.count("leaf_apply", th0.shape[0] * nK * nr * ns * U.shape[1])
    th1 = E1.mode_factors(i, plan.rows[i])              # (m1, nr)
    return Y, th1


def pair_norms(Ys, th1s, Ks, chunk_entries=2 * 10 ** 7):
    """tau[l0, l1] = ||Theta_l1 T~ Theta_l0 v|| for all pairs, exactly.

    The Gram chain is contracted for blocks of l0 at a time so that the
    batched intermediates stay below ``chunk_entries`` floats.
    """
    d = len(Ys)
    m0, m1 = Ys[0].shape[0], th1s[0].shape[0]
    width = max([K.shape[0] * K.shape[1] * K.shape[2] for K in Ks] + [1])
    step = max(1, chunk_entries // max(1, m1 * width))
    out = np.empty((m0, m1))
    for a in range(0, m0, step):
        sl = slice(a, min(m0, a + step))
        out[sl] = _pair_grams([Y[sl] for Y in Ys], th1s, Ks)
    out = np.maximum(out, 0.0) + TAU_SLACK * float(np.max(np.abs(out)))
    return np.sqrt(out)


def _pair_grams(Ys, th1s, Ks):
    d = len(Ys)
    m0, m1 = Ys[0].shape[0], th1s[0].shape[0]
    P = m0 * m1

    def leaf_gram(i):
        Y, w = Ys[i], th1s[i] ** 2
        Z = w[None, :, :, None] * Y[:, None]            # (m0, m1, r, X)
        G = np.matmul(Z.transpose(0, 1, 3, 2), Y[:, None])
        ops.count("gram", Z.size * Y.shape[2])
        return G.reshape(P, Y.shape[2], Y.shape[2])

    G = leaf_gram(d - 1)
    for t in range(d - 2, -1, -1):
        K = Ks[t]
        A, X, B = K.shape
        M = leaf_gram(t)
        W = np.matmul(K.reshape(A * X, B)[None], G)     # (P, A*X, B)
        W = W.reshape(P, A, X, B).transpose(0, 2, 1, 3).reshape(P, X, A * B)
        V = np.matmul(M.transpose(0, 2, 1), W)          # (P, X', A*B)
        V = V.reshape(P, X, A, B).transpose(0, 2, 1, 3).reshape(P, A, X * B)
        G = np.matmul(V, K.reshape(A, X * B).T[None])
        ops.count("gram", P * A * X * B * (B + X + A))
    return G.reshape(m0, m1)


def _pair_tensor(rows, Ys, th1s, Ks, l0, l1):
    frames = [th1s[i][l1][:, None] * Ys[i][l0] for i in range(len(Ys))]
    return ht.make_tensor(rows, frames, Ks)


def apply(op, v, eta, cfg=None):
    """Adaptive APPLY: returns (w, report) with ||Av - w|| <= eta.

    Half of eta goes to the structural approximation; the rest is split
    between discarding the smallest pair terms (at most eta/4) and the
    recompressions of the running sum (at most eta/4).
    """
    if not eta > 0:
        raise ht.ToleranceError("eta must be positive")
    cfg = cfg or ApplyConfig()
    t_start = time.perf_counter()
    ops_start = ops.total()
    rep = ApplyReport(eta=float(eta))
    d = v.d
    if v.is_zero:
        rep.short_circuit = True
        return ht.zero_tensor(d), rep
    if v.singular_values is None:
        v = ht.hsvd(v)
        if v.is_zero:
            rep.short_circuit = True
            return ht.zero_tensor(d), rep
    nv = ht.norm(v)
    if eta >= op.norm_bound() * nv:
        rep.short_circuit = True
        return ht.zero_tensor(d), rep
    plan = plan_apply(op, v, eta / 2, cfg, norm_v=nv)
    omin = op.weights.omega_min()
    E0 = build_inverse_scaling(plan.m0, op.params, omin, op.weights)
    E1 = build_inverse_scaling(plan.m1, op.params, omin, op.weights)
    rep.J, rep.e_J, rep.T0, rep.T1 = plan.J, plan.e_J, plan.T0, plan.T1
    rep.m0, rep.m1 = plan.m0, plan.m1
    rep.m_hat0, rep.m_hat1 = E0.n_terms, E1.n_terms
    rep.row_support = [int(r.size) for r in plan.rows]
    rep.input_ranks = [int(x) for x in v.ranks.values()]

    Ys, th1s = [], []
    for i in range(d):
        Y, th1 = _mode_data(plan, E0, E1, v, i)
        Ys.append(Y)
        th1s.append(th1)
    Ks = []
    for t in range(d - 1):
        C, B = op.cores[t], v.cores[t]
        Ks.append(np.einsum('vnr,axb->vanxrb', C, B).reshape(
            C.shape[0] * B.shape[0], C.shape[1] * B.shape[1], C.shape[2] * B.shape[2]))
    tau = pair_norms(Ys, th1s, Ks)
    flat = tau.ravel()
    order = np.argsort(flat, kind="stable")
    ts = flat[order]
    rep.n_pairs = int(flat.size)
    csum = np.cumsum(ts)
    q0 = int(np.searchsorted(csum, eta / 4, side="right"))
    rep.n_discarded = q0
    rep.discarded_mass = float(csum[q0 - 1]) if q0 else 0.0
    keep = order[q0:]
    if keep.size == 0:
        rep.seconds = time.perf_counter() - t_start
        rep.ops = ops.total() - ops_start
        return ht.zero_tensor(d), rep
    tk = ts[q0:]
    n = tk.size
    denom = float(np.sum((n - np.arange(n)) * tk))
    zetas = eta * np.cumsum(tk) / (4 * denom) if denom > 0 else np.zeros(n)

    # rank audit reference: m_hat^2 R_alpha rank_alpha(v)
    m_hat = max(rep.m_hat0, rep.m_hat1)
    Ra = op.node_ranks()
    vr = v.ranks
    limit = {nd: m_hat ** 2 * Ra[nd] * vr[nd] for nd in vr if nd != v.tree.root}
    worst = {nd: 0 for nd in limit}

    m1 = rep.m_hat1
    acc, pending, bank, bank_rank = None, [], 0.0, 0
    term_rank = max(K.shape[0] for K in Ks[1:]) if d > 2 else 0
    term_rank = max(term_rank, max(Y.shape[2] for Y in Ys))
    for q in range(n):
        l0, l1 = divmod(int(keep[q]), m1)
        pending.append(_pair_tensor(plan.rows, Ys, th1s, Ks, l0, l1))
        bank += zetas[q]
        bank_rank += term_rank
        cur = (acc.max_rank if acc is not None else 0) + bank_rank
        if cur < max(cfg.bank_rank, 2 * (acc.max_rank if acc is not None else 0)) and q < n - 1:
            continue
        parts = ([acc] if acc is not None and not acc.is_zero else []) + pending
        s = ht.add_many(parts)
        for nd, r in s.ranks.items():
            if nd in worst:
                worst[nd] = max(worst[nd], r)
        rep.max_rank_intermediate = max(rep.max_rank_intermediate, s.max_rank)
        if s.max_rank > cfg.rank_cap:
            raise ResourceError(
                f"intermediate rank {s.max_rank} exceeds the cap {cfg.rank_cap} "
                f"(J={plan.J}, m0={plan.m0}, m1={plan.m1}, input ranks {v.max_rank})")
        acc = ht.truncate_to_tolerance(s, bank) if bank > 0 else ht.hsvd(s)
        rep.zeta_total += bank
        rep.n_flushes += 1
        pending, bank, bank_rank = [], 0.0, 0
    rep.rank_audit = {",".join(map(str, nd)): [int(worst[nd]), int(limit[nd])] for nd in limit}
    rep.rank_audit_ok = all(worst[nd] <= limit[nd] for nd in limit)
    w = ht.drop_zero_rows(acc) if acc is not None else ht.zero_tensor(d)
    rep.output_max_rank = 0 if w.is_zero else int(w.max_rank)
    rep.output_support = [int(x) for x in w.support_sizes()]
    rep.seconds = time.perf_counter() - t_start
    rep.ops = ops.total() - ops_start
    return w, rep
