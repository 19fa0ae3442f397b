"""Dense brute-force references for small instances."""

from __future__ import annotations

from dataclasses import dataclass
import itertools

import numpy as np

from .errors import ResourceError

from . import htucker as ht
from . import ops

DEFAULT_CAP = 10 ** 6


class OracleError(ValueError):
    pass


@dataclass
class DenseBox:
    ranges: list
    values: np.ndarray

    @property
    def d(self):
        return len(self.ranges)

    def norm(self):
        return float(np.linalg.norm(self.values))


def box_from_levels(d, level):
    """Indices 1..2^(level+1)-1 (all levels <= level) in every mode."""
    return [np.arange(1, 2 ** (level + 1)) for _ in range(d)]


def densify(v, box, cap=DEFAULT_CAP):
    box = [np.asarray(b, dtype=np.int64) for b in box]
    if int(np.prod([b.size for b in box])) > cap:
        raise ResourceError("dense box exceeds the configured entry cap")
    if not v.is_zero:
        for i in range(v.d):
            if not np.all(np.isin(v.supports[i], box[i])):
                raise OracleError(f"support of mode {i + 1} escapes the box")
    return DenseBox(box, ht.full_on_box(v, box))


def best_restriction_search(v, N, limit=18):
    """min over product sets with sum_i #Lambda_i <= N of ||v - R_Lambda v||.

    Exhaustive over the subsets of all modes but the largest; the last mode
    is filled greedily, which is exact for a fixed choice of the others.
    The discarded mass is summed directly (no cancellation).
    """
    return float(best_restriction_curve(v, limit)[min(int(N), sum(v.support_sizes()))])


def best_restriction_curve(v, limit=18):
    """Best product-restriction error for every budget N = 0..sum #supp_i."""
    if v.is_zero:
        return np.zeros(1)
    sizes = [s.size for s in v.supports]
    total_supp = sum(sizes)
    if total_supp > limit:
        raise ResourceError("support too large for exhaustive search")
    X2 = ht.full_on_box(v, v.supports) ** 2
    last = int(np.argmax(sizes))
    X2 = np.moveaxis(X2, last, -1)
    others = [n for i, n in enumerate(sizes) if i != last]
    nl = sizes[last]
    best = np.full(total_supp + 1, np.inf)
    best[0] = float(np.sum(X2))
    for choice in itertools.product(*[range(1, 2 ** n) for n in others]):
        masks = [((c >> np.arange(n)) & 1).astype(bool) for c, n in zip(choice, others)]
        used = sum(int(m.sum()) for m in masks)
        lost = 0.0
        Y = X2
        for m in masks:
            # everything with this mode outside the subset, earlier modes inside
            lost += float(np.sum(Y[~m]))
            Y = Y[m].sum(axis=0)
        col = np.sort(Y)                                 # ascending
        # keep the k largest columns: discard the nl - k smallest
        tails = np.concatenate([[0.0], np.cumsum(col)])  # tails[q] = q smallest
        for k in range(1, nl + 1):
            b = used + k
            e = lost + tails[nl - k]
            if e < best[b]:
                best[b] = e
    best = np.minimum.accumulate(best)
    return np.sqrt(best)


def best_restriction_naive(v, N):
    """Direct enumeration of every product set (tiny cases only)."""
    X = ht.full_on_box(v, v.supports)
    sizes = X.shape
    total = float(np.sum(X ** 2))
    best = 0.0
    subsets = [[c for k in range(n + 1) for c in itertools.combinations(range(n), k)]
               for n in sizes]
    for choice in itertools.product(*subsets):
        if sum(len(c) for c in choice) > N or any(len(c) == 0 for c in choice):
            continue
        best = max(best, float(np.sum(X[np.ix_(*choice)] ** 2)))
    return float(np.sqrt(max(total - best, 0.0)))


# ---------------------------------------------------------------- operators

def _mode_product(X, M, i):
    return np.moveaxis(np.tensordot(M, X, axes=([1], [i])), 0, i)


def reference_inverse_weights(op, box, cap=DEFAULT_CAP):
    """omega~_nu^-1 on a dense box (evaluated once per distinct weight)."""
    from .scaling import phi, reference_terms
    box = [np.asarray(b, dtype=np.int64) for b in box]
    if int(np.prod([b.size for b in box])) > cap:
        raise ResourceError("dense box exceeds the configured entry cap")
    om = op.weights.omega_min()
    t = np.zeros([b.size for b in box])
    for i, b in enumerate(box):
        shape = [1] * len(box)
        shape[i] = b.size
        t = t + (op.weights.weight(i, b) ** 2).reshape(shape)
    t = t / om ** 2
    u, inv = np.unique(np.round(t.ravel(), 9), return_inverse=True)
    n = reference_terms(float(u[-1]), op.params)
    vals = np.concatenate([np.atleast_1d(phi(op.params, n, np.maximum(c, 1.0)))
                           for c in np.array_split(u, max(1, u.size // 4096))])
    return (vals[inv] / om).reshape(t.shape)


def dense_T(op, X, cols, rows):
    """T applied to a dense array on the box ``cols``, read off on ``rows``."""
    b = op.backend
    out = np.zeros([r.size for r in rows])
    for coef, mk in op.terms():
        Y = X
        for i in range(op.d):
            M = b.matrix(mk.get(i, 1), rows[i], cols[i])
            Y = _mode_product(Y, M, i)
        out += coef * Y
    ops.count("dense", out.size * len(op.terms()))
    return out


def _covers_universe(op, box):
    b = op.backend
    if b.max_level is None:
        return False
    u = b.universe()
    return all(np.array_equal(np.asarray(x), u) for x in box)


def truncation_bar(op, v, box):
    """Bound on ||A v|| outside the box when supp v sits inside it."""
    if op.name == "laplacian" or _covers_universe(op, box):
        return 0.0
    from .basis import level
    b = op.backend
    lv = max(int(level(s).max()) for s in v.supports)
    Lbox = min(int(level(np.asarray(x)).max()) for x in box)
    j = Lbox - lv
    if j < 0:
        return float("inf")
    tot = 0.0
    s = b.s
    for i in range(op.d):
        for k in range(op.d):
            if i != k and op.a[i, k] != 0:
                e4 = op.comp_beta(i, 4, j) * 2.0 ** (-s * j)
                e3 = op.comp_beta(k, 3, j) * 2.0 ** (-s * j)
                tot += abs(op.a[i, k]) * (e4 * op.compressed_norm(k, 3) + op.compressed_norm(i, 4) * e3)
    return (1 + op.delta) ** 2 * tot * ht.norm(v)


def apply_dense_reference(op, v, box, cap=DEFAULT_CAP):
    """(A v on the box, truncation bar) with A = S~^-1 T S~^-1 densely."""
    box = [np.asarray(b, dtype=np.int64) for b in box]
    if v.is_zero:
        return DenseBox(box, np.zeros([b.size for b in box])), 0.0
    X = densify(v, box, cap).values
    W = reference_inverse_weights(op, box, cap)
    Y = W * dense_T(op, W * X, box, box)
    return DenseBox(box, Y), truncation_bar(op, v, box)


def is_diagonal(op):
    return op.name == "laplacian" and op.t2_diagonal()


def dense_diagonal(op, box):
    """Diagonal of R_box A R_box for the diagonal (Laplacian) case."""
    W = reference_inverse_weights(op, box)
    D = np.zeros(W.shape)
    for i, b in enumerate(box):
        shape = [1] * len(box)
        shape[i] = len(b)
        D = D + op.a[i, i] * op.backend.matrix(2, b, b).diagonal().reshape(shape)
    return W * D * W


def dense_matvec(op, box):
    """x -> R_box A R_box x on flattened dense arrays."""
    box = [np.asarray(b, dtype=np.int64) for b in box]
    W = reference_inverse_weights(op, box)
    shape = W.shape

    def mv(x):
        X = np.asarray(x).reshape(shape)
        return (W * dense_T(op, W * X, box, box)).ravel()
    return mv, int(np.prod(shape))


def dense_solve(op, f, tol=1e-13, maxiter=5000):
    """Solve R_box A R_box u = f on the box of f (diagonal division or CG)."""
    from scipy.sparse.linalg import LinearOperator, cg
    box = [np.asarray(b, dtype=np.int64) for b in f.ranges]
    if is_diagonal(op):
        D = dense_diagonal(op, box)
        if np.any(D <= 0):
            raise OracleError("operator is not positive definite on the box")
        return DenseBox(box, f.values / D)
    mv, n = dense_matvec(op, box)
    L = LinearOperator((n, n), matvec=mv, dtype=float)
    rhs = f.values.ravel()
    x, info = cg(L, rhs, rtol=tol, atol=0.0, maxiter=maxiter)
    if info != 0:
        raise OracleError(f"CG did not converge (info={info})")
    if float(x @ mv(x)) <= 0 and np.any(x):
        raise OracleError("operator is not positive definite on the box")
    return DenseBox(box, x.reshape(f.values.shape))


def _diagonal_extremes(op, box):
    """min/max of the diagonal over the box via the set of attainable sums.

    A_nu depends on nu only through (sum_i a_ii w_i^2, sum_i c_i^2 w_i^2),
    so the attainable pairs are built mode by mode instead of enumerating
    the whole box.
    """
    from .scaling import phi, reference_terms
    S = np.zeros((1, 2))
    for i, b in enumerate(box):
        w2 = op.backend.weight(np.asarray(b)) ** 2
        step = np.stack([op.a[i, i] * w2, op.weights.multipliers[i] ** 2 * w2], axis=1)
        S = (S[:, None, :] + step[None, :, :]).reshape(-1, 2)
        # each pair viewed as one complex number: 1-d unique is much faster
        S = np.ascontiguousarray(np.round(S, 6)).view(np.complex128).ravel()
        S = np.unique(S).view(np.float64).reshape(-1, 2)
        if S.shape[0] > 5 * 10 ** 6:
            raise ResourceError("too many distinct weights for the exact sweep")
    om = op.weights.omega_min()
    t = S[:, 1] / om ** 2
    n = reference_terms(float(t.max()), op.params)
    ph = np.concatenate([np.atleast_1d(phi(op.params, n, np.maximum(c, 1.0)))
                         for c in np.array_split(t, max(1, t.size // 4096))])
    vals = S[:, 0] * (ph / om) ** 2
    return float(vals.min()), float(vals.max())


def estimate_condition(op, box, tol=1e-10, maxiter=None):
    """Extreme eigenvalues of S~^-1 T S~^-1 restricted to a box.

    Returns a dict with lam_min, lam_max, cond and a flag ``exact`` (the
    diagonal case is swept exactly) or ``converged`` (Lanczos).
    """
    box = [np.asarray(b, dtype=np.int64) for b in box]
    if is_diagonal(op):
        lo, hi = _diagonal_extremes(op, box)
        return {"lam_min": lo, "lam_max": hi, "cond": hi / lo, "exact": True, "converged": True}
    from scipy.sparse.linalg import LinearOperator, eigsh, ArpackNoConvergence
    mv, n = dense_matvec(op, box)
    if n <= 400:
        M = np.column_stack([mv(e) for e in np.eye(n)])
        lam = np.linalg.eigvalsh(0.5 * (M + M.T))
        return {"lam_min": float(lam[0]), "lam_max": float(lam[-1]),
                "cond": float(lam[-1] / lam[0]), "exact": True, "converged": True}
    L = LinearOperator((n, n), matvec=mv, dtype=float)
    converged = True
    try:
        hi = float(eigsh(L, k=1, which="LA", tol=tol, maxiter=maxiter,
                         return_eigenvectors=False)[0])
        lo = float(eigsh(L, k=1, which="SA", tol=tol, maxiter=maxiter,
                         return_eigenvectors=False)[0])
    except ArpackNoConvergence as exc:
        converged = False
        ev = exc.eigenvalues
        hi, lo = float(np.max(ev)), float(np.min(ev))
    return {"lam_min": lo, "lam_max": hi, "cond": hi / lo, "exact": False, "converged": converged}
