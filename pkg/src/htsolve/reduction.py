"""Contractions, dimension-binned coarsening and combined reduction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import htucker as ht
from . import ops


@dataclass(frozen=True)
class ContractionSet:
    """pi^(i) for every mode i: (indices, values) pairs over supp_i."""
    indices: tuple
    values: tuple
    norm: float

    @property
    def d(self):
        return len(self.values)

    def as_dict(self, i):
        return dict(zip(self.indices[i].tolist(), self.values[i].tolist()))

    def to_rows(self):
        return [(i + 1, int(n), float(x)) for i in range(self.d)
                for n, x in zip(self.indices[i], self.values[i])]


def contractions(v):
    """pi^(i)_nu(v) = (sum_k |U^(i)_{nu,k}|^2 sigma_k^2)^(1/2) from the HSVD."""
    d = v.d
    if v.is_zero:
        e = tuple(np.zeros(0, dtype=np.int64) for _ in range(d))
        return ContractionSet(e, tuple(np.zeros(0) for _ in range(d)), 0.0)
    if v.singular_values is None:
        v = ht.hsvd(v)
        if v.is_zero:
            return contractions(v)
    vals = []
    for i in range(d):
        s = v.singular_values[ht.leaf_node(i)]
        U = v.frames[i]
        vals.append(np.sqrt(np.sum((U * s[None, :]) ** 2, axis=1)))
        ops.count("contraction", U.size)
    return ContractionSet(tuple(v.supports), tuple(vals), ht.norm(v))


def _global_order(cs):
    """Nonincreasing rearrangement of all (i, nu); ties by smaller i, then nu."""
    ii = np.concatenate([np.full(x.size, i) for i, x in enumerate(cs.values)]) if cs.d else np.zeros(0)
    nn = np.concatenate(cs.indices)
    vv = np.concatenate(cs.values)
    # values equal up to rounding count as ties
    top = vv.max() if vv.size else 1.0
    key = np.round(vv / top * 1e13) if top > 0 else vv
    order = np.lexsort((nn, ii, -key))
    return ii[order].astype(int), nn[order], vv[order]


def dim_bins(v, N, cs=None):
    """Product set Lambda(v;N) from the N largest contractions and mu_N."""
    cs = contractions(v) if cs is None else cs
    ii, nn, vv = _global_order(cs)
    N = int(max(0, min(N, vv.size)))
    bins = [np.sort(nn[:N][ii[:N] == i]) for i in range(cs.d)]
    mu = float(np.sqrt(np.sum(vv[N:] ** 2)))
    return bins, mu


def coarsening_budget(cs, eta):
    """N(v, eta) = min{N : mu_N <= eta} from a single sorted pass."""
    _, _, vv = _global_order(cs)
    tail = np.concatenate([np.cumsum((vv ** 2)[::-1])[::-1], [0.0]])
    return int(np.argmax(tail <= eta * eta))


def coarsen_to_tolerance(v, eta):
    if not eta > 0:
        raise ht.ToleranceError(f"tolerance must be positive, got {eta}")
    if v.is_zero:
        return v
    cs = contractions(v)
    N = coarsening_budget(cs, eta)
    if N == 0:
        return ht.zero_tensor(v.d)
    bins, _ = dim_bins(v, N, cs)
    if all(b.size == s.size for b, s in zip(bins, v.supports)):
        return v
    if any(b.size == 0 for b in bins):
        return ht.zero_tensor(v.d)
    return ht.restrict(v, bins)


def kappa_p(d):
    return float(np.sqrt(2 * d - 3))


def kappa_c(d):
    return float(np.sqrt(d))


def combined_constant(d, alpha):
    kp, kc = kappa_p(d), kappa_c(d)
    return 1 + kp * (1 + alpha) + kc * (kp + 1) * (1 + alpha)


def combined_reduce(v, eta, alpha=1.0):
    """Recompress with kappa_P(1+alpha)eta, then coarsen with kappa_C(kappa_P+1)(1+alpha)eta."""
    if not eta > 0 or not alpha > 0:
        raise ht.ToleranceError("combined_reduce needs eta > 0 and alpha > 0")
    d = v.d
    kp, kc = kappa_p(d), kappa_c(d)
    w = ht.truncate_to_tolerance(v, kp * (1 + alpha) * eta)
    if w.is_zero:
        return w
    return coarsen_to_tolerance(w, kc * (kp + 1) * (1 + alpha) * eta)


def recompress(v, eta):
    """RECOMPRESS: eta == 0 keeps v up to numerically zero singular values."""
    return ht.recompress(v, eta)


def coarsen(v, eta):
    """COARSEN: eta == 0 leaves v unchanged."""
    if eta <= 0 or v.is_zero:
        return v
    return coarsen_to_tolerance(v, eta)
