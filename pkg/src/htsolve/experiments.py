"""Experiment harness: build problems from a RunConfig, run, write traces and figures."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import math
import os
import time

import numpy as np

from . import htucker as ht
from . import io as tio
from . import ops
from . import plots
from .basis import SineBackend, TabulatedBackend
from .config import RunConfig
from .errors import ConvergenceError, ResourceError
from .operator import ApplyConfig, build_laplacian, build_tridiagonal
from .solver import RhsProvider, SolveTrace, default_params, solve


def make_backend(cfg):
    if cfg.backend == "sine":
        return SineBackend(max_level=cfg.max_level)
    return TabulatedBackend(cfg.backend.split(":", 1)[1])


def make_operator(cfg):
    be = make_backend(cfg)
    if cfg.operator == "laplacian":
        return build_laplacian(cfg.d, be, delta=cfg.delta)
    return build_tridiagonal(cfg.d, be, diag=cfg.diag, off=cfg.off, delta=cfg.delta)


def make_problem(cfg):
    """(operator, rhs provider, solve parameters) for a config."""
    op = make_operator(cfg)
    prov = RhsProvider.for_operator(op, t=cfg.t)
    apply_cfg = ApplyConfig(rank_cap=cfg.rank_cap, bank_rank=cfg.bank_rank)
    probe = default_params(op, prov, 1.0, alpha=cfg.alpha, beta1=cfg.beta1, beta2=cfg.beta2)
    eps = cfg.eps * probe.eps0 if cfg.eps_relative else cfg.eps
    params = replace(probe, eps=eps, max_outer=cfg.max_outer, apply=apply_cfg)
    return op, prov, params


@dataclass
class RunResult:
    config: RunConfig
    trace: SolveTrace
    solution: object = None
    status: str = "ok"
    message: str = ""
    seconds: float = 0.0
    ops_total: int = 0
    ops_breakdown: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)

    @property
    def rows(self):
        return [dict(zip(tio.TRACE_COLUMNS, s.row())) for s in self.trace.steps]


def run(cfg, write=True, tag=None):
    """Solve one configured problem.

    Solver aborts (not contractive, resource caps) are caught; the partial
    trace is kept and the status says what happened.
    """
    op, prov, params = make_problem(cfg)
    steps = []
    t0 = time.perf_counter()
    status, msg, u = "ok", "", None
    with ops.tracking() as counter:
        try:
            u, trace = solve(op, prov, params, callback=steps.append)
        except ConvergenceError as exc:
            trace, status, msg = exc.trace, "not_contractive", str(exc)
        except ResourceError as exc:
            trace = SolveTrace(params={}, steps=steps, status="resource")
            status, msg = "resource", str(exc)
    res = RunResult(cfg, trace, u, status, msg, time.perf_counter() - t0,
                    counter.total, counter.snapshot())
    if not trace.params:
        trace.params = {"eps0": params.eps0, "eps": params.eps}
    if write:
        write_run(res, tag)
    return res


def write_run(res, tag=None):
    tag = tag or f"{res.config.operator}_d{res.config.d}"
    out = res.config.out
    os.makedirs(out, exist_ok=True)
    csv_path = os.path.join(out, f"trace_{tag}.csv")
    json_path = os.path.join(out, f"summary_{tag}.json")
    tio.write_trace_csv(csv_path, res.trace)
    extra = {"config": res.config.to_dict(), "run_status": res.status, "message": res.message,
             "seconds": round(res.seconds, 3), "ops_total": res.ops_total,
             "ops_breakdown": res.ops_breakdown}
    tio.write_summary_json(json_path, res.trace, extra)
    res.files = {"csv": csv_path, "json": json_path}
    return res.files


def emit_figures(out, labelled_rows, prefix=""):
    """Residual, rank and ops figures for a list of (label, rows)."""
    os.makedirs(out, exist_ok=True)
    paths = {}
    for name, fn in (("residuals", plots.residual_figure), ("ranks", plots.rank_figure),
                     ("ops", plots.ops_figure)):
        p = os.path.join(out, f"{prefix}{name}.svg")
        plots.write_svg(p, fn(labelled_rows))
        paths[name] = p
    return paths


def run_sweep(base, dims, operator, write=True):
    results = []
    for d in dims:
        cfg = replace(base, d=int(d), operator=operator)
        results.append(run(cfg, write=write))
    return results


def run_poisson(base, dims=(2, 4, 8, 16), write=True):
    res = run_sweep(base, dims, "laplacian", write)
    if write:
        emit_figures(base.out, [(f"d={r.config.d}", r.rows) for r in res])
    return res


def run_tridiagonal(base, dims=(2, 3, 4), write=True):
    """Tridiagonal runs plus Laplacian runs on the same backend for comparison."""
    tri = run_sweep(base, dims, "tridiagonal", write)
    lap = run_sweep(base, dims, "laplacian", write)
    if write:
        emit_figures(base.out, [(f"d={r.config.d}", r.rows) for r in tri], prefix="tridiagonal_")
        series = []
        for r in tri + lap:
            series.append({"x": [x["bound"] for x in r.rows],
                           "y": [x["max_rank_iterate"] for x in r.rows],
                           "label": f"{r.config.operator[:3]} d={r.config.d}",
                           "dashed": r.config.operator == "laplacian"})
        plots.write_svg(os.path.join(base.out, "ranks_compare.svg"),
                        plots.line_plot(series, "iterate ranks", "error bound", "rank",
                                        logx=True, logy=False))
    return tri, lap


# ---------------------------------------------------------------- shape summaries

def ops_at_reduction(rows, factor=10.0):
    """Cumulative ops when the bound first drops by ``factor`` below its first value."""
    if not rows:
        return None
    b0 = rows[0]["bound"]
    for r in rows:
        if r["bound"] <= b0 / factor:
            return r["ops_cum"]
    return None


def loglog_slope(xs, ys):
    x = np.log(np.asarray(xs, float))
    y = np.log(np.asarray(ys, float))
    return float(np.polyfit(x, y, 1)[0])


def rank_at_error(rows, err, key="max_rank_iterate"):
    """Largest rank among steps whose bound is >= err (the run up to that error)."""
    sel = [r[key] for r in rows if r["bound"] >= err]
    return max(sel) if sel else None


def rank_growth_exponent(rows):
    """Fitted p in rank ~ log(1/bound)^p over the steps with rank >= 2."""
    pts = [(math.log(1.0 / r["bound"]), r["max_rank_iterate"]) for r in rows
           if r["bound"] < 1 and r["max_rank_iterate"] >= 1]
    if len(pts) < 3:
        return None
    return loglog_slope([p[0] for p in pts], [p[1] for p in pts])


def certify_expsum(delta, T=1e8, grid=1000, n=None):
    from .scaling import certify
    t, err, p, n = certify(delta, T, grid, n)
    return {"delta": delta, "T": T, "h": p.h, "n_plus": p.n_plus, "n": n,
            "max_rel_err": float(err.max()), "ok": bool(err.max() <= delta)}


def apply_bench(path, eta, operator="laplacian", max_level=None, delta=0.1, rank_cap=500):
    from .operator import apply as apply_op
    v = ht.load(path)
    cfg = RunConfig(d=v.d, operator=operator, max_level=max_level, delta=delta)
    op = make_operator(cfg)
    with ops.tracking() as counter:
        w, rep = apply_op(op, v, eta, ApplyConfig(rank_cap=rank_cap))
    out = rep.to_dict()
    out["ops_counted"] = counter.total
    out["output_norm"] = ht.norm(w)
    return w, out
