"""Exponential sums for t^(-1/2) and separable inverse scalings.

phi_{h,n}(t) = sum_{k=-n}^{n+} h w(kh) exp(-alpha(kh) t) with
alpha(x) = ln^2(1 + e^x) and w(x) = 2 pi^(-1/2) / (1 + e^-x).  For t >= 1
it approximates t^(-1/2) with relative accuracy delta.  Since
exp(-a omega_nu^2) factorizes over coordinates, the diagonal operator
nu -> omega_min^-1 phi((omega_nu / omega_min)^2) is a sum of separable terms.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from . import htucker as ht

LN_2_SQRTPI = math.log(2.0 / math.sqrt(math.pi))
# extra terms used to stand in for the infinite sum
REFERENCE_EXTRA = 50


class ParameterError(ValueError):
    pass


def w_fun(x):
    return 2.0 / math.sqrt(math.pi) / (1.0 + np.exp(-np.asarray(x, dtype=float)))


def alpha_fun(x):
    return np.log1p(np.exp(np.asarray(x, dtype=float))) ** 2


@dataclass(frozen=True)
class ExpSumParams:
    delta: float
    h: float
    n_plus: int

    def k_values(self, n):
        """Quadrature indices in term order n+, ..., 0, -1, ..., -n."""
        return np.arange(self.n_plus, -int(n) - 1, -1)

    def weights(self, n):
        k = self.k_values(n)
        return self.h * w_fun(k * self.h)

    def exponents(self, n):
        return alpha_fun(self.k_values(n) * self.h)


def choose_params(delta):
    if not 0 < delta < 1:
        raise ParameterError(f"delta must lie in (0, 1), got {delta}")
    L = abs(math.log(delta / 2))
    h = math.pi ** 2 / (5 * (L + 4))
    n_plus = math.ceil(max(4 / math.sqrt(math.pi), math.sqrt(L)) / h)
    return ExpSumParams(float(delta), h, int(n_plus))


def phi(params, n, t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 1):
        raise ParameterError("phi is certified on t >= 1 only")
    wts, exps = params.weights(n), params.exponents(n)
    out = np.exp(-np.multiply.outer(t, exps)) @ wts
    return float(out) if out.ndim == 0 else out


def terms_required(eta, T, params):
    """M(eta; T) = ceil(h^-1 (ln 2 pi^-1/2 + |ln min(delta/2, eta)| + ln(T)/2))."""
    if not eta > 0:
        raise ParameterError("eta must be positive")
    if not T >= 1:
        raise ParameterError("T must be >= 1")
    val = (LN_2_SQRTPI + abs(math.log(min(params.delta / 2, eta))) + 0.5 * math.log(T)) / params.h
    return max(0, math.ceil(val))


def m0(T, params):
    return terms_required(params.delta / 2, T, params)


class ModeWeights:
    """omega_hat_i(nu) = c_i * backend.weight(nu) for every mode i."""

    def __init__(self, backend, d, multipliers=None):
        self.backend = backend
        self.d = int(d)
        self.multipliers = np.ones(d) if multipliers is None else np.asarray(multipliers, float)
        if self.multipliers.shape != (self.d,) or np.any(self.multipliers <= 0):
            raise ParameterError("need one positive multiplier per mode")

    def weight(self, i, nu):
        return self.multipliers[i] * self.backend.weight(nu)

    def omega_min(self):
        """omega at (1, ..., 1), the smallest canonical weight."""
        return float(np.sqrt(np.sum((self.multipliers * self.backend.min_weight()) ** 2)))

    @classmethod
    def from_diffusion(cls, backend, a, rescale_diagonal=False):
        a = np.asarray(a, dtype=float)
        m = np.sqrt(np.diag(a)) if rescale_diagonal else None
        return cls(backend, a.shape[0], m)


def canonical_weight(nu, weights):
    nu = np.atleast_2d(np.asarray(nu, dtype=np.int64))
    sq = sum(weights.weight(i, nu[:, i]) ** 2 for i in range(weights.d))
    out = np.sqrt(sq)
    return float(out[0]) if out.size == 1 else out


@dataclass(frozen=True)
class ScalingExpansion:
    """S~_n^-1 = sum_l Theta_l with term list (w~_l, alpha~_l)."""
    params: ExpSumParams
    n: int
    omega_min: float
    weights: ModeWeights
    wt: np.ndarray
    at: np.ndarray

    @property
    def n_terms(self):
        return self.wt.size

    @property
    def d(self):
        return self.weights.d

    def theta(self, l, i, nu):
        """theta_l^(i)(nu) = w~_l^(1/d) exp(-alpha~_l omega_hat_i(nu)^2 / omega_min^2)."""
        x = (self.weights.weight(i, nu) / self.omega_min) ** 2
        return self.wt[l] ** (1.0 / self.d) * np.exp(-self.at[l] * x)

    def term(self, l):
        return ht.SeparableDiagonal(
            tuple((lambda nu, i=i: self.theta(l, i, nu)) for i in range(self.d)), label=l)

    def terms(self):
        return [self.term(l) for l in range(self.n_terms)]

    def mode_factors(self, i, nu):
        """Matrix (n_terms, #nu) of all theta_l^(i)(nu)."""
        x = (self.weights.weight(i, np.asarray(nu)) / self.omega_min) ** 2
        return (self.wt ** (1.0 / self.d))[:, None] * np.exp(-np.outer(self.at, x))

    def inverse_weight(self, nu):
        """omega~_{n,nu}^-1 at an (m, d) array of multi-indices."""
        nu = np.atleast_2d(np.asarray(nu, dtype=np.int64))
        t = (canonical_weight(nu, self.weights) / self.omega_min) ** 2
        return np.exp(-np.multiply.outer(np.atleast_1d(t), self.at)) @ self.wt

    def apply(self, v):
        """S~_n^-1 v as a sum of separably scaled copies (rank grows n_terms-fold)."""
        if v.is_zero:
            return v
        parts = [ht.apply_separable_diagonal(D, v) for D in self.terms()]
        return ht.add_many(parts)

    def extend(self, n_new):
        return build_inverse_scaling(n_new, self.params, self.omega_min, self.weights)


def build_inverse_scaling(n, params, omega_min, weights):
    n = int(n)
    if n < 0:
        raise ParameterError("n must be nonnegative")
    wt = params.weights(n) / omega_min
    at = params.exponents(n)
    return ScalingExpansion(params, n, float(omega_min), weights, wt, at)


def lambda_T_bound(v, weights):
    """Smallest T with the product hull of supp v inside Lambda_T."""
    if v.is_zero:
        return 1.0
    top = sum(float(np.max(weights.weight(i, v.supports[i]))) ** 2 for i in range(v.d))
    return max(1.0, top / weights.omega_min() ** 2)


def lambda_T_of_supports(supports, weights):
    if any(len(s) == 0 for s in supports):
        return 1.0
    top = sum(float(np.max(weights.weight(i, np.asarray(s)))) ** 2 for i, s in enumerate(supports))
    return max(1.0, top / weights.omega_min() ** 2)


def reference_terms(T, params):
    """Term count standing in for the infinite sum on Lambda_T."""
    return terms_required(1e-17, T, params) + REFERENCE_EXTRA


def reference_inverse_weight(nu, params, weights):
    """omega~_nu^-1 = omega_min^-1 phi_{h,inf}((omega_nu/omega_min)^2), per entry."""
    nu = np.atleast_2d(np.asarray(nu, dtype=np.int64))
    om = weights.omega_min()
    t = (canonical_weight(nu, weights) / om) ** 2
    t = np.atleast_1d(t)
    n = reference_terms(float(np.max(t)), params)
    return np.atleast_1d(phi(params, n, t)) / om


def certify(delta, T=1e8, grid=1000, n=None):
    """Relative error sqrt(t)|t^-1/2 - phi_{h,n}(t)| on a log grid of [1, T]."""
    p = choose_params(delta)
    n = m0(T, p) if n is None else n
    t = np.logspace(0, math.log10(T), grid)
    err = np.abs(1.0 - np.sqrt(t) * phi(p, n, t))
    return t, err, p, n
