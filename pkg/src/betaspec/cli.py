"""Command-line front end: density grids, simulation, CLT reports, identity
checks, two-sample tests and the Monte Carlo CLT harness.

Exit codes: 0 success, 1 acceptance failure (a checked threshold was
missed), 2 usage error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .clt import (
    build_contour,
    gaussian_limit,
    identity_fn,
    invdiff_fn,
    log_fn,
    loglinear_fn,
    quad_l5_fn,
)
from .errors import NumericError, ValidationError
from .lsd import lsd_atoms, lsd_cdf, lsd_density, support_edges
from .lss import (
    Statistic,
    calibrate,
    center_term,
    compute_lss,
    covariance_equality_test,
    load_matrix_csv,
    read_bspc,
)
from .params import (
    FiniteDims,
    SpectralParams,
    read_config,
    validate_params,
)
from .sampling import EntryDistribution, export_spectrum, sample_beta_spectrum
from .transforms import LEMMA51_LABELS, lemma51_residuals

IDENTITY_THRESHOLD = 1e-9

_FN_NAMES = ("identity", "log", "invdiff", "loglinear", "quad_l5")


def _write_json(obj, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _params_dict(p: SpectralParams) -> dict:
    return {"y": p.y, "Y": p.Y, "alpha": p.alpha, "tau": p.tau,
            "m4_x": p.m4_x, "m4_xx": p.m4_xx}


def _merge_config(args) -> dict:
    cfg = read_config(args.config) if getattr(args, "config", None) else {}
    return cfg


def _resolve_params(args, cfg) -> SpectralParams:
    y = args.y if args.y is not None else cfg.get("y")
    Y = args.Y if args.Y is not None else cfg.get("Y")
    alpha = args.alpha if args.alpha is not None else cfg.get("alpha")
    tau = getattr(args, "tau", None)
    tau = tau if tau is not None else cfg.get("tau", 1)
    m4x = getattr(args, "m4x", None)
    m4x = m4x if m4x is not None else cfg.get("m4_x", 3.0)
    m4xx = getattr(args, "m4xx", None)
    m4xx = m4xx if m4xx is not None else cfg.get("m4_xx", 3.0)
    if y is None or Y is None or alpha is None:
        raise ValidationError("missing --y/--Y/--alpha (or config keys y, Y, alpha)")
    return validate_params(SpectralParams(y, Y, alpha, tau=int(tau),
                                          m4_x=m4x, m4_xx=m4xx))


def _resolve_dims(args, cfg) -> FiniteDims:
    p = args.p if args.p is not None else cfg.get("p")
    n = args.n if args.n is not None else cfg.get("n")
    N = args.N if args.N is not None else cfg.get("N")
    if p is None or n is None or N is None:
        raise ValidationError("missing --p/--n/--N (or config keys p, n, N)")
    return FiniteDims(int(p), int(n), int(N))


def _make_fn(name: str, dims: FiniteDims | None, alpha: float):
    name = name.strip().lower()
    if name == "identity":
        return identity_fn()
    if name == "log":
        return log_fn()
    if name == "invdiff":
        return invdiff_fn(alpha)
    if name in ("loglinear", "quad_l5"):
        if dims is None:
            raise ValidationError(f"--fn {name} needs --p/--n/--N")
        return loglinear_fn(dims.n, dims.N) if name == "loglinear" else quad_l5_fn(dims.n, dims.N)
    raise ValidationError(f"unknown test function {name!r}; choose from {_FN_NAMES}")


# --- subcommands ---------------------------------------------------------------

def cmd_density(args) -> int:
    cfg = _merge_config(args)
    params = _resolve_params(args, cfg)
    t_l, t_r = support_edges(params)
    atom0, atom1 = lsd_atoms(params)
    ts = np.linspace(0.0, 1.0, max(args.grid, 2))
    dens = lsd_density(params, ts)
    cdf = np.array([lsd_cdf(params, t) for t in ts])
    out = Path(args.out)
    lines = ["t,density,cdf"]
    lines += [f"{_fmt(t)},{_fmt(d)},{_fmt(c)}" for t, d, c in zip(ts, dens, cdf)]
    out.with_suffix(".csv").write_text("\n".join(lines) + "\n")
    meta = {
        "params": _params_dict(params),
        "t_l": t_l, "t_r": t_r, "atom0": atom0, "atom1": atom1,
        "grid": int(args.grid),
    }
    _write_json(meta, out.with_suffix(".json"))
    print(f"wrote {out.with_suffix('.csv')} and {out.with_suffix('.json')}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _merge_config(args)
    dims = _resolve_dims(args, cfg)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    alpha = args.alpha if args.alpha is not None else dims.alpha_n
    dist = EntryDistribution.parse(args.dist)
    spec = sample_beta_spectrum(dims, dist, alpha, int(seed))
    out = Path(args.out)
    export_spectrum(spec, out.with_suffix(".csv"), out.with_suffix(".json"),
                    dist=dist, alpha=alpha)
    print(f"wrote {out.with_suffix('.csv')} and {out.with_suffix('.json')}")
    return 0


def cmd_clt(args) -> int:
    cfg = _merge_config(args)
    params = _resolve_params(args, cfg)
    dims = None
    if args.p is not None and args.n is not None and args.N is not None:
        dims = FiniteDims(args.p, args.n, args.N)
    names = [s.strip() for s in args.fns.split(",") if s.strip()]
    fs = [_make_fn(name, dims, params.alpha) for name in names]
    limit = gaussian_limit(fs, params, delta_h=args.delta_h, delta_v=args.delta_v,
                           nodes_per_side=args.nodes)
    report = {
        "params": _params_dict(params),
        "functions": names,
        "mean": [float(v) for v in limit.mean],
        "cov": [[float(v) for v in row] for row in limit.cov],
        "diagnostics": limit.diagnostics,
    }
    _write_json(report, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_identities(args) -> int:
    cfg = _merge_config(args)
    params = _resolve_params(args, cfg)
    side = max(2, (args.points + 3) // 4)
    side += side % 2
    contour = build_contour(params, nodes_per_side=side)
    idx = np.linspace(0, contour.nodes.size - 1, args.points).astype(int)
    zs = contour.nodes[np.unique(idx)]
    worst = np.zeros(len(LEMMA51_LABELS))
    worst_z = [None] * len(LEMMA51_LABELS)
    for z in zs:
        res = lemma51_residuals(params, z)
        for i, r in enumerate(res):
            if r > worst[i]:
                worst[i] = r
                worst_z[i] = z
    ok = bool(worst.max() <= IDENTITY_THRESHOLD)
    report = {
        "params": _params_dict(params),
        "points": int(zs.size),
        "threshold": IDENTITY_THRESHOLD,
        "max_residual": float(worst.max()),
        "per_identity": {
            label: {"max_residual": float(worst[i]),
                    "worst_z": [worst_z[i].real, worst_z[i].imag] if worst_z[i] is not None else None}
            for i, label in enumerate(LEMMA51_LABELS)
        },
        "pass": ok,
    }
    if args.out:
        _write_json(report, args.out)
    print(f"identity suite: max residual {worst.max():.3e} over {zs.size} points -> "
          f"{'pass' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_test(args) -> int:
    cfg = _merge_config(args)
    loader = load_matrix_csv if args.fmt == "csv" else read_bspc
    A = loader(args.data_a)
    B = loader(args.data_b)
    report = covariance_equality_test(
        A, B, Statistic.parse(args.stat),
        alpha=args.alpha, demean=args.demean,
        tau=args.tau if args.tau is not None else int(cfg.get("tau", 1)),
        m4_x=args.m4x if args.m4x is not None else cfg.get("m4_x", 3.0),
        m4_xx=args.m4xx if args.m4xx is not None else cfg.get("m4_xx", 3.0),
        delta_h=args.delta_h, delta_v=args.delta_v, nodes_per_side=args.nodes,
    )
    _write_json(report.to_dict(), args.out)
    print(f"{report.statistic.which.value} = {report.statistic.value:.6f}, "
          f"z = {report.z_score:.4f}, p = {report.p_value:.4g}")
    return 0


def cmd_mc_clt(args) -> int:
    cfg = _merge_config(args)
    dims = _resolve_dims(args, cfg)
    if args.reps < 100:
        raise ValidationError("--reps must be at least 100")
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    alpha = args.alpha if args.alpha is not None else dims.alpha_n
    dist = EntryDistribution.parse(args.dist)
    params = SpectralParams.from_dims(dims, tau=dist.tau,
                                      m4_x=dist.fourth_moment,
                                      m4_xx=dist.fourth_moment)
    f = _make_fn(args.fn, dims, alpha)
    centering = center_term(f, params, dims.p)
    from .clt import clt_cov, clt_mean, nested_contours  # local: keeps import cheap

    theory_mean = clt_mean(f, params, build_contour(params, nodes_per_side=args.nodes))
    theory_var = clt_cov(f, f, params, nested_contours(params, nodes_per_side=args.nodes))

    def one(rep: int) -> float:
        spec = sample_beta_spectrum(dims, dist, alpha, int(seed), replicate=rep)
        return float(np.sum(np.real(f.fn(spec.values))) - centering)

    threads = args.threads or os.cpu_count() or 1
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            stats = np.fromiter(pool.map(one, range(args.reps)), dtype=float,
                                count=args.reps)
    else:
        stats = np.fromiter((one(r) for r in range(args.reps)), dtype=float,
                            count=args.reps)
    emp_mean = float(stats.mean())
    emp_var = float(stats.var(ddof=1))
    stderr_mean = float(np.sqrt(emp_var / args.reps))
    mean_ok = abs(emp_mean - theory_mean) <= 3.0 * stderr_mean
    var_ok = 0.85 <= emp_var / theory_var <= 1.15
    summary = {
        "dims": {"p": dims.p, "n": dims.n, "N": dims.N},
        "dist": dist.label,
        "alpha": alpha,
        "fn": f.name,
        "replicates": int(args.reps),
        "seed": int(seed),
        "empirical_mean": emp_mean,
        "empirical_var": emp_var,
        "theory_mean": theory_mean,
        "theory_var": theory_var,
        "stderr_mean": stderr_mean,
        "mean_ok": bool(mean_ok),
        "var_ok": bool(var_ok),
    }
    if args.out:
        _write_json(summary, args.out)
    print(f"mc-clt: mean {emp_mean:.5f} vs {theory_mean:.5f} (se {stderr_mean:.5f}), "
          f"var ratio {emp_var / theory_var:.4f} -> "
          f"{'pass' if mean_ok and var_ok else 'FAIL'}")
    return 0 if mean_ok and var_ok else 1


# --- parser ----------------------------------------------------------------------

def _add_param_flags(sp, moments=True):
    sp.add_argument("--y", type=float, default=None)
    sp.add_argument("--Y", type=float, default=None)
    sp.add_argument("--alpha", type=float, default=None)
    if moments:
        sp.add_argument("--tau", type=int, default=None, choices=(0, 1))
        sp.add_argument("--m4x", type=float, default=None)
        sp.add_argument("--m4xx", type=float, default=None)
    sp.add_argument("--config", type=str, default=None,
                    help="flat key = value file supplying defaults")


def _add_dims_flags(sp):
    sp.add_argument("--p", type=int, default=None)
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--N", type=int, default=None)


def _add_contour_flags(sp):
    sp.add_argument("--delta-h", dest="delta_h", type=float, default=None)
    sp.add_argument("--delta-v", dest="delta_v", type=float, default=None)
    sp.add_argument("--nodes", type=int, default=64, help="quadrature nodes per side")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="betaspec",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("density", help="emit density/CDF grid as CSV + metadata")
    _add_param_flags(sp, moments=False)
    sp.add_argument("--grid", type=int, default=512)
    sp.add_argument("--out", type=str, required=True, help="output path prefix")
    sp.set_defaults(func=cmd_density)

    sp = sub.add_parser("simulate", help="sample one Beta spectrum to CSV + metadata")
    _add_dims_flags(sp)
    sp.add_argument("--alpha", type=float, default=None, help="defaults to N/n")
    sp.add_argument("--dist", type=str, default="real_gaussian")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--config", type=str, default=None)
    sp.add_argument("--out", type=str, required=True, help="output path prefix")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("clt", help="CLT mean/covariance report for test functions")
    _add_param_flags(sp)
    _add_dims_flags(sp)
    _add_contour_flags(sp)
    sp.add_argument("--fns", type=str, default="identity",
                    help=f"comma-separated from {_FN_NAMES}")
    sp.add_argument("--out", type=str, required=True)
    sp.set_defaults(func=cmd_clt)

    sp = sub.add_parser("identities", help="transform identity residual suite")
    _add_param_flags(sp, moments=False)
    sp.add_argument("--points", type=int, default=50)
    sp.add_argument("--out", type=str, default=None)
    sp.set_defaults(func=cmd_identities)

    sp = sub.add_parser("test", help="two-sample covariance equality test")
    sp.add_argument("--data-a", dest="data_a", type=str, required=True)
    sp.add_argument("--data-b", dest="data_b", type=str, required=True)
    sp.add_argument("--fmt", type=str, choices=("csv", "bspc"), default="csv")
    sp.add_argument("--stat", type=str, default="L4")
    sp.add_argument("--demean", action="store_true")
    sp.add_argument("--alpha", type=float, default=None)
    sp.add_argument("--tau", type=int, default=None, choices=(0, 1))
    sp.add_argument("--m4x", type=float, default=None)
    sp.add_argument("--m4xx", type=float, default=None)
    sp.add_argument("--config", type=str, default=None)
    _add_contour_flags(sp)
    sp.add_argument("--out", type=str, required=True)
    sp.set_defaults(func=cmd_test)

    sp = sub.add_parser("mc-clt", help="Monte Carlo verification of the CLT")
    _add_dims_flags(sp)
    sp.add_argument("--alpha", type=float, default=None, help="defaults to N/n")
    sp.add_argument("--dist", type=str, default="real_gaussian")
    sp.add_argument("--fn", type=str, default="identity")
    sp.add_argument("--reps", type=int, default=200)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--config", type=str, default=None)
    _add_contour_flags(sp)
    sp.add_argument("--out", type=str, default=None)
    sp.set_defaults(func=cmd_mc_clt)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
