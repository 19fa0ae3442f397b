"""Univariate discretization backends.

A backend describes one coordinate direction: the index universe (positive
integers, optionally capped at a maximal level), the scaling weights
omega_hat(nu), the component matrices T1..T4 and their level-banded
compressions T_{n,j} together with the compressibility data (s, beta_j,
alpha_j, gamma).

Matrix convention: ``matrix(kind, rows, cols)[r, c]`` is the entry that maps
coefficient c to coefficient r, i.e. the test function carries the row
index.  With psi_nu = sqrt(2) sin(pi nu x)

    T2[r, c] = <psi_c', psi_r'>,   T3[r, c] = <psi_c', psi_r>,
    T4[r, c] = <psi_c, psi_r'> = T3[c, r]

and for Dirichlet sine functions T3 is antisymmetric, so T4 = T3^T = -T3.
``entry(kind, nu, mu)`` evaluates the defining integral with nu carrying
the first slot, e.g. entry(3, nu, mu) = <psi_nu', psi_mu>.
"""

from __future__ import annotations

import json
import os
import threading

import numpy as np

from .errors import ResourceError

KINDS = (1, 2, 3, 4)
# window used to estimate norms on the unbounded universe
NORM_WINDOW_LEVEL = 10
DEFAULT_ROW_CAP = 2 ** 15


class BackendError(ValueError):
    pass


def level(nu):
    """|nu| = floor(log2 nu), exact for integers below 2**53."""
    nu = np.asarray(nu, dtype=np.int64)
    if np.any(nu < 1):
        raise IndexError("indices must be positive")
    return (np.frexp(nu.astype(float))[1] - 1).astype(np.int64)


def level_range(lo, hi):
    """All indices with level in [lo, hi]."""
    lo = max(lo, 0)
    if hi < lo:
        return np.zeros(0, dtype=np.int64)
    return np.arange(2 ** lo, 2 ** (hi + 1), dtype=np.int64)


class UnivariateBackend:
    """Interface; subclasses provide the closed forms or tables."""

    s = 0.5
    gamma = 1
    max_level = None
    safety = 2.0

    # -- universe
    def universe(self):
        if self.max_level is None:
            raise BackendError("unbounded universe")
        return level_range(0, self.max_level)

    def in_universe(self, nu):
        nu = np.asarray(nu, dtype=np.int64)
        ok = nu >= 1
        if self.max_level is not None:
            ok &= nu < 2 ** (self.max_level + 1)
        return ok

    def check(self, nu):
        nu = np.asarray(nu, dtype=np.int64)
        if not np.all(self.in_universe(nu)):
            raise IndexError("index outside the universe of this backend")
        return nu

    # -- weights
    def weight(self, nu):
        raise NotImplementedError

    def min_weight(self):
        return float(self.weight(np.array([1]))[0])

    def max_weight_level(self, lev):
        """Largest weight among indices of level <= lev."""
        return float(self.weight(np.array([2 ** (lev + 1) - 1]))[0])

    # -- matrices
    def entry(self, kind, nu, mu):
        r = self.matrix(kind, np.array([mu]), np.array([nu]))
        return float(r[0, 0])

    def matrix(self, kind, rows, cols, j=None):
        raise NotImplementedError

    def reach(self, kind, cols, j=None, cap=DEFAULT_ROW_CAP):
        """Rows that T_{kind,j} can reach from the given columns."""
        cols = np.asarray(cols, dtype=np.int64)
        if kind in (1, 2) or cols.size == 0:
            return np.unique(cols)
        lv = level(cols)
        lo, hi = int(lv.min()), int(lv.max())
        if j is None:
            if self.max_level is None:
                raise ResourceError("uncompressed first-order block on an unbounded universe")
            lo, hi = 0, self.max_level
        else:
            lo, hi = lo - j, hi + j
        if self.max_level is not None:
            hi = min(hi, self.max_level)
        count = 2 ** (hi + 1) - 2 ** max(lo, 0)
        if count > cap:
            raise ResourceError(
                f"compressed block would reach {count} rows (cap {cap}); "
                "cap the universe with max_level or relax the tolerance")
        return level_range(lo, hi)

    # -- compressibility data
    def compression_error(self, kind, j):
        raise NotImplementedError

    def beta(self, kind, j):
        raise NotImplementedError

    def alpha(self, kind, j):
        raise NotImplementedError

    def op_norm(self, kind):
        raise NotImplementedError


def _sine_t3(r, c):
    """<psi_c', psi_r> for the sine basis, broadcasting r (rows) and c (cols)."""
    r = np.asarray(r, dtype=float)
    c = np.asarray(c, dtype=float)
    odd = ((r + c) % 2) == 1
    den = np.where(odd, r * r - c * c, 1.0)
    return np.where(odd, 4.0 * r * c / den, 0.0)


class SineBackend(UnivariateBackend):
    """Eigenfunctions sqrt(2) sin(pi nu x) of the Dirichlet Laplacian on (0,1).

    ``max_level`` turns the universe into the finite section 1..2^(L+1)-1
    (a Galerkin subspace); ``None`` keeps all positive integers.
    """

    def __init__(self, max_level=None, s=0.5, window_level=NORM_WINDOW_LEVEL):
        self.max_level = None if max_level is None else int(max_level)
        self.s = float(s)
        self.window_level = window_level if max_level is None else self.max_level
        self._lock = threading.Lock()
        self._cache = {}

    def __repr__(self):
        return f"SineBackend(max_level={self.max_level})"

    def weight(self, nu):
        nu = self.check(nu)
        return np.pi * nu.astype(float)

    def matrix(self, kind, rows, cols, j=None):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        R, C = rows[:, None], cols[None, :]
        if kind == 1:
            M = (R == C).astype(float)
        elif kind == 2:
            M = np.where(R == C, (np.pi * R) ** 2, 0.0).astype(float)
        elif kind == 3:
            M = _sine_t3(R, C)
        elif kind == 4:
            M = -_sine_t3(R, C)
        else:
            raise BackendError(f"unknown component kind {kind}")
        if j is not None and kind in (3, 4) and rows.size and cols.size:
            band = np.abs(level(rows)[:, None] - level(cols)[None, :]) <= j
            M = np.where(band, M, 0.0)
        return M

    # -- compressibility
    def _window(self):
        return level_range(0, self.window_level)

    def _scaled_t3(self):
        key = "A3"
        with self._lock:
            if key not in self._cache:
                w = self._window()
                self._cache[key] = self.matrix(3, w, w) / (np.pi * w[None, :])
            return self._cache[key]

    def compression_error(self, kind, j):
        """||(T_n - T_{n,j}) S^-1|| on the window (exact when the universe is capped)."""
        if kind in (1, 2):
            return 0.0
        key = ("err", j)
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        w = self._window()
        A = self._scaled_t3()
        lv = level(w)
        E = np.where(np.abs(lv[:, None] - lv[None, :]) > j, A, 0.0)
        val = spectral_norm(E)
        with self._lock:
            self._cache[key] = val
        return val

    def beta(self, kind, j):
        """beta_j = safety * sup_{k >= j} err_k 2^(s k).

        Beyond the window the last value is extended as a constant; on a
        capped universe err_k vanishes for k >= max_level and beta with it.
        """
        if kind in (1, 2):
            return 0.0
        j = int(j)
        if self.max_level is not None:
            if j >= self.max_level:
                return 0.0
            top = self.max_level - 1
        else:
            # the largest level gaps of the window are not representative
            top = self.window_level - 2
        ks = range(min(j, top), top + 1)
        return self.safety * max(self.compression_error(kind, k) * 2.0 ** (self.s * k) for k in ks)

    def alpha(self, kind, j, lev=None):
        """alpha_j with at most alpha_j 2^j nonzeros per row of T_{n,j}.

        Level blocks of the sine basis are dense, so the count depends on
        the highest level ``lev`` involved (default: window or cap).
        """
        if kind in (1, 2):
            return 1.0
        lev = (self.max_level if self.max_level is not None else self.window_level) if lev is None else lev
        hi = lev + j if self.max_level is None else min(lev + j, self.max_level)
        return float(2 ** (hi + 1) - 1) / 2.0 ** j

    def op_norm(self, kind):
        """Norm of the rescaled univariate operator A_n.

        T3 S^-1 maps coefficients of sqrt(2) cos(pi nu x) to their sine
        coefficients, a contraction; on a capped universe the exact
        finite-section norm is used.
        """
        if kind in (1, 2):
            return 1.0
        if self.max_level is None:
            return 1.0
        key = "normA3"
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        val = float(np.linalg.norm(self._scaled_t3(), 2))
        with self._lock:
            self._cache[key] = val
        return val

    def beta_normalization_ratio(self, kind=3, jmax=None):
        """sum_j beta_j / ||A_n||; the ideal normalization asks for <= 1."""
        jmax = self.window_level if jmax is None else jmax
        return sum(self.beta(kind, j) for j in range(jmax + 1)) / self.op_norm(kind)


class TabulatedBackend(UnivariateBackend):
    """Backend read from a JSON manifest plus a binary file of level blocks.

    Manifest keys: kind ("tabulated"), max_level, s, gamma, beta and alpha
    (dicts kind -> list indexed by j), norms (kind -> ||A_n||), data (file
    name of the block store) and blocks: a list of
    {"kind", "row_level", "col_level", "offset", "shape"} entries.  Blocks
    are little-endian binary64, row-major; block (l, l') holds rows of level
    l and columns of level l'.  T1 is the identity, T4 is T3 transposed;
    omega_hat(nu) = sqrt(T2[nu, nu]).
    """

    def __init__(self, manifest_path):
        with open(manifest_path) as fh:
            man = json.load(fh)
        if man.get("kind") != "tabulated":
            raise BackendError("manifest kind must be 'tabulated'")
        self.max_level = int(man["max_level"])
        self.s = float(man["s"])
        self.gamma = int(man["gamma"])
        self._beta = {int(k): list(v) for k, v in man["beta"].items()}
        self._alpha = {int(k): list(v) for k, v in man["alpha"].items()}
        self._norms = {int(k): float(v) for k, v in man["norms"].items()}
        data_path = os.path.join(os.path.dirname(os.path.abspath(manifest_path)), man["data"])
        raw = np.fromfile(data_path, dtype="<f8")
        n = 2 ** (self.max_level + 1) - 1
        self._T = {2: np.zeros((n, n)), 3: np.zeros((n, n))}
        for b in man["blocks"]:
            k, rl, cl = int(b["kind"]), int(b["row_level"]), int(b["col_level"])
            shape = tuple(b["shape"])
            if shape != (2 ** rl, 2 ** cl):
                raise BackendError(f"block ({rl},{cl}) has shape {shape}")
            off = int(b["offset"]) // 8
            blk = raw[off:off + shape[0] * shape[1]].reshape(shape)
            self._T[k][2 ** rl - 1:2 ** (rl + 1) - 1, 2 ** cl - 1:2 ** (cl + 1) - 1] = blk
        diag = np.diag(self._T[2])
        if np.any(diag <= 0):
            raise BackendError("T2 must have a positive diagonal")
        self._w = np.sqrt(diag)

    def weight(self, nu):
        nu = self.check(nu)
        return self._w[nu - 1]

    def min_weight(self):
        return float(self._w.min())

    def max_weight_level(self, lev):
        lev = min(lev, self.max_level)
        return float(self._w[:2 ** (lev + 1) - 1].max())

    def matrix(self, kind, rows, cols, j=None):
        rows = self.check(rows)
        cols = self.check(cols)
        if kind == 1:
            M = (rows[:, None] == cols[None, :]).astype(float)
        elif kind in (2, 3):
            M = self._T[kind][np.ix_(rows - 1, cols - 1)]
        elif kind == 4:
            M = self._T[3][np.ix_(cols - 1, rows - 1)].T
        else:
            raise BackendError(f"unknown component kind {kind}")
        if j is not None and kind != 1 and rows.size and cols.size:
            band = np.abs(level(rows)[:, None] - level(cols)[None, :]) <= self.gamma * j
            M = np.where(band, M, 0.0)
        return M

    def reach(self, kind, cols, j=None, cap=DEFAULT_ROW_CAP):
        cols = np.asarray(cols, dtype=np.int64)
        if kind == 1 or cols.size == 0:
            return np.unique(cols)
        lv = level(cols)
        if j is None:
            lo, hi = 0, self.max_level
        else:
            lo, hi = int(lv.min()) - self.gamma * j, int(lv.max()) + self.gamma * j
        return level_range(lo, min(hi, self.max_level))

    def _table(self, tab, kind, j):
        vals = tab.get(kind if kind != 4 else 3, [])
        if not vals:
            return 0.0
        return float(vals[min(int(j), len(vals) - 1)])

    def beta(self, kind, j):
        if kind == 1:
            return 0.0
        return self._table(self._beta, kind, j)

    def alpha(self, kind, j):
        if kind == 1:
            return 1.0
        return self._table(self._alpha, kind, j)

    def op_norm(self, kind):
        if kind == 1:
            return 1.0
        return self._norms[kind if kind != 4 else 3]

    def compression_error(self, kind, j):
        if kind == 1:
            return 0.0
        w = self.universe()
        if kind == 2:
            A = self._T[2] / np.outer(self._w, self._w)
        else:
            A = self._T[3] / self._w[None, :]
        lv = level(w)
        E = np.where(np.abs(lv[:, None] - lv[None, :]) > self.gamma * j, A, 0.0)
        return spectral_norm(E)


def write_tabulated(directory, backend, max_level, name="backend"):
    """Dump a backend's T2/T3 level blocks and tables in the tabulated format."""
    os.makedirs(directory, exist_ok=True)
    data_name = name + ".bin"
    blocks, chunks, offset = [], [], 0
    for kind in (2, 3):
        for rl in range(max_level + 1):
            for cl in range(max_level + 1):
                rows, cols = level_range(rl, rl), level_range(cl, cl)
                blk = np.ascontiguousarray(backend.matrix(kind, rows, cols), dtype="<f8")
                if kind == 2 and rl != cl:
                    continue
                if not blk.any() and not (kind == 2):
                    continue
                blocks.append({"kind": kind, "row_level": rl, "col_level": cl,
                               "offset": offset, "shape": list(blk.shape)})
                chunks.append(blk.tobytes())
                offset += blk.nbytes
    with open(os.path.join(directory, data_name), "wb") as fh:
        for c in chunks:
            fh.write(c)
    js = range(max_level + 1)
    man = {
        "kind": "tabulated",
        "max_level": int(max_level),
        "s": float(backend.s),
        "gamma": int(backend.gamma),
        "beta": {str(k): [backend.beta(k, j) for j in js] for k in (2, 3)},
        "alpha": {str(k): [backend.alpha(k, j) for j in js] for k in (2, 3)},
        "norms": {str(k): backend.op_norm(k) for k in (2, 3)},
        "data": data_name,
        "blocks": blocks,
    }
    path = os.path.join(directory, name + ".json")
    with open(path, "w") as fh:
        json.dump(man, fh, indent=1)
    return path


def spectral_norm(E):
    """Largest singular value; sparse Lanczos for large matrices."""
    if not E.any():
        return 0.0
    if min(E.shape) <= 300:
        return float(np.linalg.norm(E, 2))
    from scipy.sparse.linalg import svds
    v0 = np.ones(min(E.shape)) / np.sqrt(min(E.shape))
    s = svds(E, k=1, v0=v0, tol=1e-12, return_singular_vectors=False)
    return float(s[0])


def fit_decay_rate(js, errs):
    """Least-squares slope s of log2 err_j = c - s j over the nonzero entries."""
    js = np.asarray(js, dtype=float)
    errs = np.asarray(errs, dtype=float)
    keep = errs > 0
    if keep.sum() < 2:
        return float("inf")
    slope, _ = np.polyfit(js[keep], np.log2(errs[keep]), 1)
    return float(-slope)
