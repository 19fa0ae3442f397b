"""Command-line interface.

Exit codes: 0 success, 2 certification or convergence failure, 3 resource error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, RunConfig, load_config
from .errors import ResourceError

EXIT_OK, EXIT_CERT, EXIT_RESOURCE, EXIT_USAGE = 0, 2, 3, 64


def _dims(s):
    try:
        out = [int(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad dimension list {s!r}") from None
    if not out or min(out) < 2:
        raise argparse.ArgumentTypeError("dimensions must be >= 2")
    return out


def _add_run_opts(p):
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--relative", action="store_true", help="eps is relative to eps0")
    p.add_argument("--out", default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--beta1", type=float, default=None)
    p.add_argument("--beta2", type=float, default=None)
    p.add_argument("--rank-cap", type=int, default=None)
    p.add_argument("--max-level", type=int, default=None)


def build_parser():
    ap = argparse.ArgumentParser(prog="htsolve", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("solve", help="run one configured problem")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("poisson", help="-div grad u = 1 sweep over d")
    p.add_argument("--dims", type=_dims, default=[2, 4, 8, 16])
    _add_run_opts(p)

    p = sub.add_parser("tridiag", help="tridiagonal diffusion sweep over d")
    p.add_argument("--dims", type=_dims, default=[2, 3, 4])
    _add_run_opts(p)

    p = sub.add_parser("certify-expsum", help="check the exponential sum on [1, T]")
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--T", type=float, default=1e8)
    p.add_argument("--grid", type=int, default=1000)
    p.add_argument("--n", type=int, default=None, help="override the term count M0(T)")

    p = sub.add_parser("apply-bench", help="one APPLY call on a saved tensor")
    p.add_argument("--tensor", required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--operator", choices=("laplacian", "tridiagonal"), default="laplacian")
    p.add_argument("--max-level", type=int, default=None)
    p.add_argument("--rank-cap", type=int, default=500)
    return ap


def _base_config(args, operator, default_out):
    kw = {"operator": operator, "out": args.out or default_out, "eps_relative": bool(args.relative)}
    for name in ("eps", "delta", "beta1", "beta2", "max_level"):
        if getattr(args, name) is not None:
            kw[name] = getattr(args, name)
    if args.rank_cap is not None:
        kw["rank_cap"] = args.rank_cap
    if operator == "tridiagonal" and args.max_level is None:
        kw["max_level"] = 4
    if args.eps is None:
        kw["eps"] = 1e-3 if operator == "laplacian" else 1e-2
    return RunConfig(**kw).validate()


def _report(results, out):
    worst = EXIT_OK
    for r in results:
        last = r.trace.milestones[-1].bound if r.trace.milestones else float("nan")
        print(f"{r.config.operator} d={r.config.d}: status={r.status} steps={len(r.trace.steps)} "
              f"final_bound={last:.3e} seconds={r.seconds:.1f}")
        if r.status == "resource":
            worst = max(worst, EXIT_RESOURCE)
        elif r.status != "ok":
            worst = max(worst, EXIT_CERT)
    print(f"outputs in {out}")
    return worst


def main(argv=None):
    from . import experiments as ex
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "solve":
            cfg = load_config(args.config, out=args.out)
            res = ex.run(cfg)
            ex.emit_figures(cfg.out, [(f"d={cfg.d}", res.rows)], prefix=f"{cfg.operator}_")
            return _report([res], cfg.out)
        if args.cmd == "poisson":
            base = _base_config(args, "laplacian", "runs/poisson")
            return _report(ex.run_poisson(base, args.dims), base.out)
        if args.cmd == "tridiag":
            base = _base_config(args, "tridiagonal", "runs/tridiagonal")
            tri, lap = ex.run_tridiagonal(base, args.dims)
            return _report(tri + lap, base.out)
        if args.cmd == "certify-expsum":
            rep = ex.certify_expsum(args.delta, args.T, args.grid, args.n)
            print(json.dumps(rep, indent=2))
            return EXIT_OK if rep["ok"] else EXIT_CERT
        if args.cmd == "apply-bench":
            _, rep = ex.apply_bench(args.tensor, args.eta, args.operator, args.max_level,
                                    rank_cap=args.rank_cap)
            print(json.dumps(rep, indent=2, default=float))
            return EXIT_OK if rep["rank_audit_ok"] else EXIT_CERT
    except ResourceError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
