"""Perturbed Richardson iteration with inner/outer loops and the RHS routine."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
import math
import time
from typing import Optional

import numpy as np
from scipy.special import zeta as hurwitz_zeta

from . import htucker as ht
from . import ops
from . import reduction
from .errors import ConvergenceError
from .operator import ApplyConfig, apply as apply_op
from .scaling import build_inverse_scaling, lambda_T_of_supports, terms_required

TRACE_VERSION = 1
TRACE_COLUMNS = ("k", "j", "eta", "residual", "bound", "max_rank_iterate",
                 "max_rank_intermediate", "supp_total", "ops_cum")


# ---------------------------------------------------------------- right-hand side

def sine_coefficients_of_one(nu):
    """<1, sqrt(2) sin(pi nu x)> = sqrt(2)(1 - cos(pi nu))/(pi nu)."""
    nu = np.asarray(nu, dtype=np.int64)
    return np.where(nu % 2 == 1, 2.0 * math.sqrt(2.0) / (np.pi * nu), 0.0)


def _odd_tail4(N):
    """sum over odd nu > N of nu^-4."""
    first = N + 1 if (N + 1) % 2 == 1 else N + 2
    return float(hurwitz_zeta(4.0, first / 2.0)) / 16.0


@dataclass
class RhsProvider:
    """f = S~^-1 g for the constant function 1 expanded in the sine basis.

    g is rank one with factor entries sqrt(2)(1 - cos pi nu)/(pi nu).  The
    level cutoff is chosen from the exact tail of sum g_nu^2/omega_nu^2,
    so the excess-regularity exponent ``t`` is kept for reporting only.
    With ``max_level`` set (a finite Galerkin section) the right-hand side
    is the projection onto the section and the cutoff at that level is exact.
    """
    weights: object
    delta: float
    params: object
    t: float = 0.5
    max_level: Optional[int] = None

    @classmethod
    def for_operator(cls, op, t=0.5):
        return cls(op.weights, op.delta, op.params, t, getattr(op.backend, "max_level", None))

    @property
    def d(self):
        return self.weights.d

    def norm_upper(self):
        """||f|| <= (1+delta) ||g|| / omega_min with ||g|| = 1."""
        return (1 + self.delta) / self.weights.omega_min()

    def cutoff_error(self, level):
        """Bound on ||S~^-1 (g - g_level)|| where g_level keeps nu < 2^(level+1)."""
        if self.max_level is not None and level >= self.max_level:
            return 0.0
        N = 2 ** (level + 1) - 1
        c = self.weights.multipliers
        pi2 = np.pi ** 2
        s = sum(8.0 / (pi2 * pi2 * c[i] ** 2) * _odd_tail4(N) for i in range(self.d))
        return (1 + self.delta) * math.sqrt(s)

    def level_for(self, eta):
        lev = 0
        while self.cutoff_error(lev) > eta:
            lev += 1
        return lev

    def factor(self, level):
        idx = np.arange(1, 2 ** (level + 1), 2, dtype=np.int64)
        return idx, sine_coefficients_of_one(idx)

    def g_tensor(self, level):
        idx, val = self.factor(level)
        return ht.from_rank_one([(idx, val)] * self.d)

    def rhs(self, eta, compress=True):
        """f_eta with ||f - f_eta|| <= eta.

        eta/2 is spent on the level cutoff and eta/2 on the exponential sum
        (phi_inf - phi_n <= zeta t^-1/2 on Lambda_T, hence an error of at most
        zeta ||S^-1 g|| <= zeta / omega_min).  With ``compress`` the budget is
        split once more and the result is recompressed.
        """
        if not eta > 0:
            raise ht.ToleranceError("eta must be positive")
        d = self.d
        if eta >= self.norm_upper():
            return ht.zero_tensor(d), {"level": -1, "n": 0, "rank_bound": 0}
        budget = eta / 2 if compress else eta
        lev = self.level_for(budget / 2)
        g = self.g_tensor(lev)
        T = lambda_T_of_supports(g.supports, self.weights)
        om = self.weights.omega_min()
        n = terms_required(budget / 2 * om, T, self.params)
        E = build_inverse_scaling(n, self.params, om, self.weights)
        f = E.apply(g)
        info = {"level": lev, "n": n, "rank_bound": E.n_terms}
        if compress:
            f = ht.truncate_to_tolerance(f, eta / 2)
        return f, info


def poisson_solution_tail(provider, level):
    """Bound on ||u|| outside the level box for -div(a grad) u = 1 with the Laplacian.

    u_nu = omega~_nu g_nu / T_nu <= g_nu / ((1 - delta) omega_nu) when T_nu = omega_nu^2.
    """
    return provider.cutoff_error(level) / ((1 + provider.delta) * (1 - provider.delta))


# ---------------------------------------------------------------- parameters

@dataclass
class SolveParams:
    omega: float
    rho: float
    c_A: float
    eps0: float
    eps: float
    alpha: float = 1.0
    beta1: float = 0.0
    beta2: float = 0.5
    d: int = 2
    max_outer: int = 60
    apply: ApplyConfig = field(default_factory=ApplyConfig)

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if self.beta1 < 0 or not self.beta2 > 0:
            raise ValueError("need beta1 >= 0 and beta2 > 0")
        if self.omega <= 0 or self.c_A <= 0 or self.eps0 <= 0 or self.eps <= 0:
            raise ValueError("omega, c_A, eps0 and eps must be positive")

    @property
    def kappas(self):
        kp, kc = reduction.kappa_p(self.d), reduction.kappa_c(self.d)
        a = self.alpha
        k1 = 1.0 / (1 + (1 + a) * (kp + kc + kp * kc))
        return k1, (1 + a) * kp * k1, kc * (kp + 1) * (1 + a) * k1

    @property
    def inner_cap(self):
        """I = min{j : rho^j (1 + (omega + beta1 + beta2) j) <= kappa1 / 2}."""
        k1 = self.kappas[0]
        s = self.omega + self.beta1 + self.beta2
        j = 0
        while self.rho ** j * (1 + s * j) > k1 / 2:
            j += 1
        return j


def default_params(op, provider, eps, alpha=1.0, beta1=0.0, beta2=0.5, eta_f=None, **kw):
    """omega, rho and c_A from the operator's spectral bounds; eps0 from a fine RHS."""
    omega, rho = op.richardson()
    c_A = op.inverse_norm_bound()
    eta_f = provider.norm_upper() * 1e-3 if eta_f is None else eta_f
    f, _ = provider.rhs(eta_f)
    eps0 = c_A * (ht.norm(f) + eta_f)
    return SolveParams(omega=omega, rho=rho, c_A=c_A, eps0=eps0, eps=eps, alpha=alpha,
                       beta1=beta1, beta2=beta2, d=op.d, **kw)


def residual_bound(params, r_norm, eta):
    """c_A rho ||r|| + (c_A rho + omega + beta1 + beta2) eta."""
    p = params
    return p.c_A * p.rho * r_norm + (p.c_A * p.rho + p.omega + p.beta1 + p.beta2) * eta


# ---------------------------------------------------------------- trace

@dataclass
class StepRecord:
    k: int
    j: int
    eta: float
    residual: float
    bound: float
    max_rank_iterate: int
    max_rank_intermediate: int
    supp_total: int
    ops_cum: int
    apply_eta: float = 0.0
    rhs_eta: float = 0.0
    recompress_eta: float = 0.0
    coarsen_eta: float = 0.0
    apply_peak_rank: int = 0
    apply_rank_audit_ok: bool = True
    seconds: float = 0.0

    def row(self):
        return [getattr(self, c) for c in TRACE_COLUMNS]


@dataclass
class Milestone:
    k: int
    bound: float
    target: float
    inner_steps: int
    exit: str
    rank: int
    supp_total: int


@dataclass
class SolveTrace:
    params: dict
    steps: list = field(default_factory=list)
    milestones: list = field(default_factory=list)
    final_bound: float = float("nan")
    status: str = "running"
    oracle: str = "residual"

    def to_dict(self):
        return {"version": TRACE_VERSION, "params": self.params, "status": self.status,
                "final_bound": self.final_bound, "oracle": self.oracle,
                "steps": [asdict(s) for s in self.steps],
                "milestones": [asdict(m) for m in self.milestones]}


def _supp_total(v):
    return 0 if v.is_zero else int(sum(v.support_sizes()))


def _rank(v):
    return 0 if v.is_zero else int(v.max_rank)


# ---------------------------------------------------------------- solve

def solve(op, provider, params, callback=None):
    """Run the iteration; returns (u_eps, trace).

    Milestone bounds are computed a posteriori as the residual bound of the
    last inner iterate plus the recorded recompression and coarsening
    errors; they are checked against 2^-(k+1) eps0.
    """
    p = params
    d = op.d
    k1, k2, k3 = p.kappas
    I = p.inner_cap
    pdict = {k: v for k, v in asdict(p).items() if k != "apply"}
    pdict.update(kappa1=k1, kappa2=k2, kappa3=k3, I=I)
    trace = SolveTrace(params=pdict)
    ops_start = ops.total()
    u = ht.zero_tensor(d)
    k = 0
    trace.final_bound = p.eps0
    while 2.0 ** -k * p.eps0 > p.eps:
        if k >= p.max_outer:
            trace.status = "max_outer"
            raise ConvergenceError("outer iteration cap reached", trace)
        w = u
        j = 0
        while True:
            t0 = time.perf_counter()
            eta = p.rho ** (j + 1) * 2.0 ** -k * p.eps0
            Aw, rep = apply_op(op, w, eta / 2, p.apply)
            f, _ = provider.rhs(eta / 2)
            if Aw.is_zero and f.is_zero:
                r = Aw
            elif Aw.is_zero:
                r = ht.scale(-1.0, f)
            elif f.is_zero:
                r = Aw
            else:
                r = ht.subtract(Aw, f)
            r_norm = ht.norm(r)
            x = ht.add(w, ht.scale(-p.omega, r)) if not r.is_zero else w
            x = reduction.recompress(x, p.beta1 * eta)
            inter = max(_rank(x), rep.output_max_rank, _rank(f))
            w = reduction.coarsen(x, p.beta2 * eta)
            bound = residual_bound(p, r_norm, eta)
            rec = StepRecord(k, j, eta, r_norm, bound, _rank(w), inter, _supp_total(w),
                             ops.total() - ops_start, eta / 2, eta / 2, p.beta1 * eta, p.beta2 * eta,
                             rep.max_rank_intermediate, rep.rank_audit_ok or rep.short_circuit,
                             time.perf_counter() - t0)
            trace.steps.append(rec)
            if callback is not None:
                callback(rec)
            j += 1
            if j >= I or bound <= k1 * 2.0 ** -(k + 1) * p.eps0:
                break
        exit_reason = "residual" if bound <= k1 * 2.0 ** -(k + 1) * p.eps0 else "cap"
        target = 2.0 ** -(k + 1) * p.eps0
        y = ht.recompress(w, 0.0) if not w.is_zero else w
        lam = 0.0
        if not y.is_zero and k2 * target > 0:
            rr, lam = ht.rank_for_tolerance(y, k2 * target)
            y, lam = ht.truncate_to_rank(y, rr)
        mu = 0.0
        if not y.is_zero:
            cs = reduction.contractions(y)
            N = reduction.coarsening_budget(cs, k3 * target)
            _, mu = reduction.dim_bins(y, N, cs)
            y = reduction.coarsen(y, k3 * target)
        u = y
        mb = bound + lam + mu
        trace.milestones.append(Milestone(k + 1, mb, target, j, exit_reason, _rank(u), _supp_total(u)))
        trace.final_bound = mb
        if mb > 1.5 * target:
            trace.status = "not_contractive"
            raise ConvergenceError(
                f"milestone {k + 1}: bound {mb:.3e} exceeds 2^-(k+1) eps0 = {target:.3e}", trace)
        k += 1
    trace.status = "ok"
    return u, trace
