"""Hierarchical Tucker tensors over the linear dimension tree.

Storage layout.  Modes are numbered 0..d-1 internally; nodes are reported as
tuples of 1-based modes.  The linear tree has interior nodes
``t = 0..d-2`` with ``node(t) = (t+1, ..., d)`` and leaves ``(i+1,)``.
Interior node t has the children leaf t and interior t+1, except the last
interior node (t = d-2) whose children are the leaves d-2 and d-1.

A tensor is stored as

* ``supports[i]``: sorted positive int64 indices (rows of the mode frame),
* ``frames[i]``: array of shape (#supp_i, k_i),
* ``cores[t]``: transfer tensor of shape (a_t, k_t, b_t) with a_0 = 1,
  b_t = a_{t+1} for t < d-2 and b_{d-2} = k_{d-1}.

This is the B^(alpha,k) layout: ``cores[t][k]`` is the matrix B^(node(t), k).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import json

import numpy as np
import scipy.linalg as sla

from . import ops

ZERO_TOL = 1e-14


class StructureError(ValueError):
    pass


class RankVectorError(ValueError):
    pass


class ToleranceError(ValueError):
    pass


@dataclass(frozen=True)
class DimensionTree:
    d: int
    nodes: tuple
    children: dict

    @property
    def root(self):
        return self.nodes[0]

    @property
    def interior(self):
        return self.nodes[1:self.d - 1]

    @property
    def leaves(self):
        return self.nodes[self.d - 1:]

    def index(self, node):
        return self.nodes.index(tuple(node))


def build_linear_tree(d):
    if int(d) != d or d < 2:
        raise StructureError(f"tensor order must be >= 2, got {d}")
    d = int(d)
    inner = [tuple(range(t + 1, d + 1)) for t in range(d - 1)]
    leaves = [(i + 1,) for i in range(d)]
    children = {}
    for t in range(d - 1):
        right = inner[t + 1] if t < d - 2 else leaves[d - 1]
        children[inner[t]] = (leaves[t], right)
    return DimensionTree(d, tuple(inner + leaves), children)


def inner_node(t, d):
    return tuple(range(t + 1, d + 1))


def leaf_node(i):
    return (i + 1,)


def matricization_nodes(d):
    """Non-root nodes with distinct matricizations (2d - 3 of them).

    The two children of the root share one matricization; it is represented
    by leaf (1,).
    """
    out = [leaf_node(0)]
    out += [inner_node(t, d) for t in range(2, d - 1)]
    out += [leaf_node(i) for i in range(1, d)]
    if d == 2:
        out = [leaf_node(0)]
    return out


def _root_partner(d):
    return leaf_node(1) if d == 2 else inner_node(1, d)


def _as_index_array(x):
    a = np.asarray(x, dtype=np.int64).ravel()
    return a


@dataclass(frozen=True, eq=False)
class HTTensor:
    tree: DimensionTree
    supports: tuple
    frames: tuple
    cores: tuple
    singular_values: dict | None = None
    zero_flag: bool = False

    @property
    def d(self):
        return self.tree.d

    @property
    def is_zero(self):
        return any(f.shape[1] == 0 for f in self.frames) or any(
            s.size == 0 for s in self.supports)

    def leaf_rank(self, i):
        return self.frames[i].shape[1]

    def inner_rank(self, t):
        return self.cores[t].shape[0]

    @property
    def ranks(self):
        """Map node -> representation rank (root reported as 1)."""
        d = self.d
        if self.is_zero:
            out = {n: 0 for n in self.tree.nodes}
            out[self.tree.root] = 1
            return out
        out = {inner_node(t, d): self.inner_rank(t) for t in range(d - 1)}
        for i in range(d):
            out[leaf_node(i)] = self.leaf_rank(i)
        return out

    @property
    def max_rank(self):
        r = [v for k, v in self.ranks.items() if k != self.tree.root]
        return max(r) if r else 0

    def support_sizes(self):
        return [s.size for s in self.supports]

    def copy_with(self, **kw):
        return replace(self, **kw)


def zero_tensor(d, flagged=False):
    tree = build_linear_tree(d)
    supports = tuple(np.zeros(0, dtype=np.int64) for _ in range(d))
    frames = tuple(np.zeros((0, 0)) for _ in range(d))
    cores = tuple(np.zeros((1 if t == 0 else 0, 0, 0)) for t in range(d - 1))
    return HTTensor(tree, supports, frames, cores, None, flagged)


def _right_rank(cores, frames, t):
    d = len(frames)
    return cores[t + 1].shape[0] if t < d - 2 else frames[d - 1].shape[1]


def make_tensor(supports, frames, cores, singular_values=None):
    """Validate raw arrays and wrap them into an HTTensor."""
    d = len(frames)
    tree = build_linear_tree(d)
    supports = tuple(_as_index_array(s) for s in supports)
    frames = tuple(np.asarray(f, dtype=float) for f in frames)
    cores = tuple(np.asarray(c, dtype=float) for c in cores)
    if len(supports) != d or len(cores) != d - 1:
        raise StructureError("inconsistent number of frames, supports and cores")
    for i in range(d):
        if frames[i].ndim != 2 or frames[i].shape[0] != supports[i].size:
            raise StructureError(f"frame {i} does not match its support")
        if supports[i].size and supports[i].min() < 1:
            raise StructureError("indices must be positive integers")
        if supports[i].size > 1 and np.any(np.diff(supports[i]) <= 0):
            raise StructureError("supports must be strictly increasing")
    for t in range(d - 1):
        a, k, b = cores[t].shape
        if t == 0 and a != 1:
            raise StructureError("root core must have leading dimension 1")
        if k != frames[t].shape[1] or b != _right_rank(cores, frames, t):
            raise StructureError(f"core {t} has incompatible shape {cores[t].shape}")
    return HTTensor(tree, supports, frames, cores, singular_values)


def from_rank_one(factors):
    """Rank-one tensor from d sparse univariate vectors.

    Each factor is a dict {index: value} or a pair (indices, values).
    A vanishing factor gives the zero tensor with ``zero_flag`` set.
    """
    d = len(factors)
    supports, frames = [], []
    for f in factors:
        if isinstance(f, dict):
            idx = np.array(sorted(f), dtype=np.int64)
            val = np.array([f[k] for k in idx], dtype=float)
        else:
            idx, val = (np.asarray(f[0], dtype=np.int64), np.asarray(f[1], dtype=float))
            order = np.argsort(idx)
            idx, val = idx[order], val[order]
        keep = val != 0
        idx, val = idx[keep], val[keep]
        if idx.size == 0:
            return zero_tensor(d, flagged=True)
        supports.append(idx)
        frames.append(val[:, None])
    cores = [np.ones((1, 1, 1)) for _ in range(d - 1)]
    return make_tensor(supports, frames, cores)


def random_tensor(rng, d, ranks, supports):
    """Random tensor with given per-node ranks and per-mode supports.

    ``ranks`` is an int (uniform) or a sequence of length 2d-2 listing
    leaf ranks followed by interior ranks for t = 1..d-2.
    """
    sup = [np.asarray(s, dtype=np.int64) for s in supports]
    if np.isscalar(ranks):
        kl = [int(ranks)] * d
        ki = [1] + [int(ranks)] * (d - 2)
    else:
        ranks = list(ranks)
        kl = ranks[:d]
        ki = [1] + ranks[d:]
    kl = [min(k, s.size) for k, s in zip(kl, sup)]
    frames = [rng.standard_normal((s.size, k)) for s, k in zip(sup, kl)]
    cores = []
    for t in range(d - 1):
        b = ki[t + 1] if t < d - 2 else kl[d - 1]
        cores.append(rng.standard_normal((ki[t], kl[t], b)))
    return make_tensor(sup, frames, cores)


# ---------------------------------------------------------------- arithmetic

def _check_same(a, b):
    if a.d != b.d:
        raise StructureError(f"tensor orders differ: {a.d} vs {b.d}")


def scale(c, v):
    if v.is_zero or c == 0:
        return zero_tensor(v.d)
    cores = list(v.cores)
    cores[0] = cores[0] * c
    sv = None
    if v.singular_values is not None and c != 0:
        sv = {k: s * abs(c) for k, s in v.singular_values.items()}
    return replace(v, cores=tuple(cores), singular_values=sv)


def _embed(frame, support, union):
    out = np.zeros((union.size, frame.shape[1]))
    if support.size:
        out[np.searchsorted(union, support)] = frame
    return out


def add(a, b):
    """Entrywise sum; ranks add up node by node."""
    _check_same(a, b)
    if a.is_zero:
        return b
    if b.is_zero:
        return a
    d = a.d
    supports, frames = [], []
    for i in range(d):
        u = np.union1d(a.supports[i], b.supports[i])
        supports.append(u)
        frames.append(np.hstack([_embed(a.frames[i], a.supports[i], u),
                                 _embed(b.frames[i], b.supports[i], u)]))
    cores = []
    for t in range(d - 1):
        A, B = a.cores[t], b.cores[t]
        if t == 0:
            C = np.zeros((1, A.shape[1] + B.shape[1], A.shape[2] + B.shape[2]))
            C[0, :A.shape[1], :A.shape[2]] = A[0]
            C[0, A.shape[1]:, A.shape[2]:] = B[0]
        else:
            C = np.zeros(tuple(x + y for x, y in zip(A.shape, B.shape)))
            C[:A.shape[0], :A.shape[1], :A.shape[2]] = A
            C[A.shape[0]:, A.shape[1]:, A.shape[2]:] = B
        cores.append(C)
    return make_tensor(supports, frames, cores)


def add_many(tensors):
    """Sum of several tensors in one block-diagonal assembly."""
    tensors = [t for t in tensors if not t.is_zero]
    if not tensors:
        raise StructureError("add_many needs at least one nonzero tensor")
    if len(tensors) == 1:
        return tensors[0]
    d = tensors[0].d
    supports, frames = [], []
    for i in range(d):
        u = tensors[0].supports[i]
        for t in tensors[1:]:
            u = np.union1d(u, t.supports[i])
        supports.append(u)
        frames.append(np.hstack([_embed(t.frames[i], t.supports[i], u) for t in tensors]))
    cores = []
    for t in range(d - 1):
        blocks = [x.cores[t] for x in tensors]
        if t == 0:
            shp = (1, sum(b.shape[1] for b in blocks), sum(b.shape[2] for b in blocks))
        else:
            shp = tuple(sum(b.shape[j] for b in blocks) for j in range(3))
        C = np.zeros(shp)
        o = [0, 0, 0]
        for b in blocks:
            if t == 0:
                C[0, o[1]:o[1] + b.shape[1], o[2]:o[2] + b.shape[2]] = b[0]
            else:
                C[o[0]:o[0] + b.shape[0], o[1]:o[1] + b.shape[1], o[2]:o[2] + b.shape[2]] = b
                o[0] += b.shape[0]
            o[1] += b.shape[1]
            o[2] += b.shape[2]
        cores.append(C)
    return make_tensor(supports, frames, cores)


def subtract(a, b):
    return add(a, scale(-1.0, b))


@dataclass(frozen=True)
class SeparableDiagonal:
    """One separable diagonal term theta^(1) x ... x theta^(d).

    ``factors[i]`` maps an int array of indices to the diagonal values.
    """
    factors: tuple
    label: object = None

    def values(self, i, idx):
        vals = np.asarray(self.factors[i](np.asarray(idx, dtype=np.int64)), dtype=float)
        if vals.shape != np.shape(idx) or not np.all(np.isfinite(vals)):
            raise ValueError(f"diagonal factor {i} undefined on part of the support")
        return vals


def apply_separable_diagonal(D, v):
    """Multiply mode-frame rows by the diagonal factors; ranks unchanged."""
    if v.is_zero:
        return v
    frames = tuple(D.values(i, v.supports[i])[:, None] * v.frames[i] for i in range(v.d))
    return replace(v, frames=frames, singular_values=None)


def restrict(v, index_sets):
    """Restriction to a product index set (one array per mode)."""
    if v.is_zero:
        return v
    supports, frames = [], []
    for i in range(v.d):
        keep = np.isin(v.supports[i], np.asarray(index_sets[i], dtype=np.int64))
        if not keep.any():
            return zero_tensor(v.d)
        supports.append(v.supports[i][keep])
        frames.append(v.frames[i][keep])
    return replace(v, supports=tuple(supports), frames=tuple(frames), singular_values=None)


# ---------------------------------------------------------------- contractions

def _chain_gram(cores_a, cores_b, leaf_grams):
    """Contract two core chains against leaf Gram matrices, bottom-up."""
    d = len(leaf_grams)
    G = leaf_grams[d - 1]
    for t in range(d - 2, -1, -1):
        A, B, M = cores_a[t], cores_b[t], leaf_grams[t]
        X = np.tensordot(A, G, axes=([2], [0]))           # (a, x, y')
        X = np.tensordot(X, M, axes=([1], [0]))           # (a, y', x')
        G = np.tensordot(X, B, axes=([2, 1], [1, 2]))     # (a, a')
    return G


def inner_product(a, b):
    _check_same(a, b)
    if a.is_zero or b.is_zero:
        return 0.0
    grams = []
    for i in range(a.d):
        common, ia, ib = np.intersect1d(a.supports[i], b.supports[i],
                                        assume_unique=True, return_indices=True)
        if common.size == 0:
            return 0.0
        grams.append(a.frames[i][ia].T @ b.frames[i][ib])
    return float(_chain_gram(a.cores, b.cores, grams)[0, 0])


def norm(a):
    if a.is_zero:
        return 0.0
    if a.singular_values is not None:
        s = a.singular_values[leaf_node(0)]
        return float(np.sqrt(np.sum(s ** 2)))
    return float(np.sqrt(max(inner_product(a, a), 0.0)))


def evaluate_entries(v, idx):
    """Entries at an (m, d) array of multi-indices."""
    idx = np.atleast_2d(np.asarray(idx, dtype=np.int64))
    m = idx.shape[0]
    if v.is_zero:
        return np.zeros(m)
    rows, ok = [], np.ones(m, dtype=bool)
    for i in range(v.d):
        pos = np.searchsorted(v.supports[i], idx[:, i])
        pos = np.minimum(pos, v.supports[i].size - 1)
        ok &= v.supports[i][pos] == idx[:, i]
        rows.append(pos)
    d = v.d
    vec = v.frames[d - 1][rows[d - 1]]                      # (m, k)
    for t in range(d - 2, -1, -1):
        left = v.frames[t][rows[t]]                         # (m, x)
        vec = np.einsum('axy,mx,my->ma', v.cores[t], left, vec)
    return np.where(ok, vec[:, 0], 0.0)


def evaluate_entry(v, nu):
    return float(evaluate_entries(v, np.asarray(nu)[None, :])[0])


def full_on_box(v, box):
    """Dense array of entries on the product box (list of index arrays)."""
    d = v.d
    box = [np.asarray(b, dtype=np.int64) for b in box]
    if v.is_zero:
        return np.zeros([b.size for b in box])
    emb = []
    for i in range(d):
        e = np.zeros((box[i].size, v.frames[i].shape[1]))
        common, ib, iv = np.intersect1d(box[i], v.supports[i], return_indices=True)
        e[ib] = v.frames[i][iv]
        emb.append(e)
    N = emb[d - 1].T                                        # (k, n_{d-1})
    for t in range(d - 2, -1, -1):
        X = np.tensordot(v.cores[t], N, axes=([2], [0]))    # (a, x, rest)
        X = np.tensordot(emb[t], X, axes=([1], [1]))        # (n_t, a, rest)
        N = np.moveaxis(X, 1, 0).reshape(X.shape[1], -1)
    return N.reshape([b.size for b in box])


# ---------------------------------------------------------------- orthogonality

def _qr(M):
    return sla.qr(M, mode="economic", check_finite=False)


def orthogonalize(v):
    """Orthonormal mode frames and nested bases; entries unchanged."""
    if v.is_zero:
        return v
    d = v.d
    frames = list(v.frames)
    cores = [c.copy() for c in v.cores]
    for i in range(d):
        n, k = frames[i].shape
        q, r = _qr(frames[i])
        ops.count("qr", n * k * min(n, k))
        frames[i] = q
        if i < d - 1:
            cores[i] = r @ cores[i]
        else:
            cores[d - 2] = cores[d - 2] @ r.T
    for t in range(d - 2, 0, -1):
        a, k, b = cores[t].shape
        M = cores[t].reshape(a, k * b).T
        q, r = _qr(M)
        ops.count("qr", M.shape[0] * M.shape[1] * min(M.shape))
        cores[t] = q.T.reshape(q.shape[1], k, b)
        cores[t - 1] = cores[t - 1] @ r.T
    return replace(v, frames=tuple(frames), cores=tuple(cores), singular_values=None)


def _svd_cols(M, thresh):
    """Left singular vectors/values of M with values above thresh."""
    if M.size == 0:
        return np.zeros((M.shape[0], 0)), np.zeros(0)
    if M.shape[1] > 2 * M.shape[0]:
        # M = R^T Q^T: the left singular pairs of M are those of R^T
        u, s, _ = np.linalg.svd(sla.qr(M.T, mode="r", check_finite=False)[0][:M.shape[0]].T)
    else:
        u, s, _ = np.linalg.svd(M, full_matrices=False)
    ops.count("svd", M.shape[0] * M.shape[1] * min(M.shape))
    r = int(np.sum(s > thresh))
    return u[:, :r], s[:r]


def hsvd(v):
    """Hierarchical SVD: every node basis holds left singular vectors.

    The stored singular values of node alpha are those of the matricization
    with row modes alpha.  Values below ZERO_TOL * ||v|| are dropped.
    """
    if v.is_zero:
        return replace(v, singular_values={})
    d = v.d
    w = orthogonalize(v)
    frames = list(w.frames)
    cores = list(w.cores)
    nv = np.linalg.norm(cores[0])
    if nv == 0:
        return zero_tensor(d)
    thresh = ZERO_TOL * nv
    sv = {}
    X = cores[0][0]
    u, s, vt = np.linalg.svd(X, full_matrices=False)
    ops.count("svd", X.shape[0] * X.shape[1] * min(X.shape))
    r = int(np.sum(s > thresh))
    u, s, V = u[:, :r], s[:r], vt[:r].T
    frames[0] = frames[0] @ u
    cores[0] = np.diag(s)[None]
    sv[leaf_node(0)] = s
    sv[_root_partner(d)] = s
    if d == 2:
        frames[1] = frames[1] @ V
    else:
        cores[1] = np.tensordot(V, cores[1], axes=([0], [0]))
        sig = s
        for t in range(1, d - 1):
            B = cores[t]
            a, x, y = B.shape
            Y = B * sig[:, None, None]
            wl, sl = _svd_cols(Y.transpose(1, 0, 2).reshape(x, a * y), thresh)
            wr, sr = _svd_cols(Y.transpose(2, 0, 1).reshape(y, a * x), thresh)
            frames[t] = frames[t] @ wl
            cores[t] = (wl.T @ B) @ wr
            sv[leaf_node(t)] = sl
            if t < d - 2:
                cores[t + 1] = np.tensordot(wr, cores[t + 1], axes=([0], [0]))
                sv[inner_node(t + 1, d)] = sr
                sig = sr
            else:
                frames[d - 1] = frames[d - 1] @ wr
                sv[leaf_node(d - 1)] = sr
    if any(f.shape[1] == 0 for f in frames):
        return zero_tensor(d)
    out = replace(w, frames=tuple(frames), cores=tuple(cores), singular_values=sv)
    return out


def _normalize_rank_vector(v, r):
    d = v.d
    if isinstance(r, (int, np.integer)):
        r = {n: int(r) for n in matricization_nodes(d)}
    r = {tuple(k): int(x) for k, x in dict(r).items()}
    out = {}
    for n in matricization_nodes(d):
        if n not in r:
            raise RankVectorError(f"rank vector lacks node {n}")
        if r[n] < 0:
            raise RankVectorError(f"negative rank at node {n}")
        out[n] = min(r[n], v.singular_values[n].size)
    partner = _root_partner(d)
    if partner in r and min(r[partner], v.singular_values[partner].size) != out[leaf_node(0)]:
        raise RankVectorError("the two children of the root need equal ranks")
    out[partner] = out[leaf_node(0)]
    return out


def truncation_error_bound(v, r):
    """lambda_r(v): l2 norm of all discarded node singular values."""
    r = _normalize_rank_vector(v, r)
    tot = 0.0
    for n in matricization_nodes(v.d):
        tot += float(np.sum(v.singular_values[n][r[n]:] ** 2))
    return float(np.sqrt(tot))


def truncate_to_rank(v, r):
    """Truncate an HSVD to ranks r; returns (tensor, lambda_r)."""
    if v.singular_values is None:
        raise RankVectorError("truncate_to_rank needs a tensor in HSVD form")
    if v.is_zero:
        return v, 0.0
    d = v.d
    r = _normalize_rank_vector(v, r)
    lam = truncation_error_bound(v, r)
    if any(x == 0 for x in r.values()):
        return zero_tensor(d), lam
    kl = [r[leaf_node(i)] for i in range(d)]
    ki = [1] + [r[inner_node(t, d)] for t in range(1, d - 1)]
    frames = tuple(v.frames[i][:, :kl[i]] for i in range(d))
    cores = []
    for t in range(d - 1):
        b = ki[t + 1] if t < d - 2 else kl[d - 1]
        cores.append(v.cores[t][:ki[t], :kl[t], :b])
    if all(kl[i] == v.frames[i].shape[1] for i in range(d)) and all(
            ki[t] == v.cores[t].shape[0] for t in range(d - 1)):
        return v, lam
    return replace(v, frames=frames, cores=tuple(cores), singular_values=None), lam


def rank_for_tolerance(v, eta):
    """Near-minimal rank vector with lambda_r(v) <= eta.

    Bisection on a uniform maximal rank, then greedy per-node decrease,
    always taking the cheapest decrement (ties: smaller node index).
    """
    d = v.d
    nodes = matricization_nodes(d)
    sv = v.singular_values
    full = {n: sv[n].size for n in nodes}
    tails = {n: np.concatenate([np.cumsum((sv[n] ** 2)[::-1])[::-1], [0.0]]) for n in nodes}

    def lam2(rr):
        return sum(tails[n][rr[n]] for n in nodes)

    lo, hi = 0, max(full.values())
    eta2 = eta * eta
    while lo < hi:
        mid = (lo + hi) // 2
        if lam2({n: min(mid, full[n]) for n in nodes}) <= eta2:
            hi = mid
        else:
            lo = mid + 1
    rr = {n: min(lo, full[n]) for n in nodes}
    cur = lam2(rr)
    tree = v.tree
    order = sorted(nodes, key=lambda n: min(tree.index(n), tree.index(_root_partner(d)))
                   if n == leaf_node(0) else tree.index(n))
    while True:
        best, best_inc = None, None
        for n in order:
            if rr[n] == 0:
                continue
            inc = sv[n][rr[n] - 1] ** 2
            if best_inc is None or inc < best_inc:
                best, best_inc = n, inc
        if best is None or cur + best_inc > eta2:
            break
        rr[best] -= 1
        cur += best_inc
    out = dict(rr)
    out[_root_partner(d)] = out[leaf_node(0)]
    return out, float(np.sqrt(cur))


def truncate_to_tolerance(v, eta):
    """Near-minimal-rank truncation with certified error <= eta."""
    if not eta > 0:
        raise ToleranceError(f"tolerance must be positive, got {eta}")
    if v.is_zero:
        return v
    if v.singular_values is None:
        v = hsvd(v)
        if v.is_zero:
            return v
    if norm(v) <= eta:
        return zero_tensor(v.d)
    r, _ = rank_for_tolerance(v, eta)
    out, _ = truncate_to_rank(v, r)
    return out


def recompress(v, eta):
    """Truncation with tolerance eta; eta == 0 drops numerically zero ranks only."""
    if v.is_zero:
        return v
    if eta <= 0:
        return hsvd(v)
    return truncate_to_tolerance(v, eta)


def drop_zero_rows(v, tol=0.0):
    """Remove support indices whose frame rows vanish."""
    if v.is_zero:
        return v
    supports, frames = [], []
    for i in range(v.d):
        keep = np.any(np.abs(v.frames[i]) > tol, axis=1)
        if not keep.any():
            return zero_tensor(v.d)
        supports.append(v.supports[i][keep])
        frames.append(v.frames[i][keep])
    return replace(v, supports=tuple(supports), frames=tuple(frames))


# ---------------------------------------------------------------- serialization

def save(v, path):
    """Write ``path`` (.npz) holding arrays plus a JSON header."""
    d = v.d
    header = {
        "format": "htsolve-ht",
        "version": 1,
        "d": d,
        "tree": [list(n) for n in v.tree.nodes],
        "ranks": {",".join(map(str, k)): int(x) for k, x in v.ranks.items()},
        "supports": [s.tolist() for s in v.supports],
        "has_singular_values": v.singular_values is not None,
    }
    arrays = {"header": np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)}
    for i in range(d):
        arrays[f"support_{i}"] = v.supports[i]
        arrays[f"frame_{i}"] = v.frames[i]
    for t in range(d - 1):
        arrays[f"core_{t}"] = v.cores[t]
    if v.singular_values is not None:
        for k, s in v.singular_values.items():
            arrays["sv_" + "_".join(map(str, k))] = s
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return header


def read_header(path):
    with np.load(path) as z:
        return json.loads(bytes(z["header"]).decode())


def load(path):
    with np.load(path) as z:
        header = json.loads(bytes(z["header"]).decode())
        d = header["d"]
        sup = [z[f"support_{i}"] for i in range(d)]
        fr = [z[f"frame_{i}"] for i in range(d)]
        co = [z[f"core_{t}"] for t in range(d - 1)]
        sv = None
        if header["has_singular_values"]:
            sv = {}
            for key in z.files:
                if key.startswith("sv_"):
                    sv[tuple(int(x) for x in key[3:].split("_"))] = z[key]
    if any(f.shape[1] == 0 for f in fr):
        return zero_tensor(d)
    return make_tensor(sup, fr, co, sv)
