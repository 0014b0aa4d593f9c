"""Command-line entry point.

Subcommands write CSV tables, JSON records and SVG figures into ``--out``.
Exit codes: 0 success, 1 numerical failure (diagnostics still written),
2 usage error.  Options resolve as flag > ``--config`` file > built-in default.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, figures, pipeline
from .construct import FLUX_METHODS
from .continuation import (DEFAULT_M_LIST, bisect_root, rescaled_trace_diagnostic, scan_c, sigma_grid,
                           sign_changes, trend_report)
from .errors import BracketError, ThinObsError
from .gaps import verify_gap
from .legendre import solve_p
from .store import RecordStore, default_cache_dir, to_plain, write_csv, write_json
from .variant import variant_bisect

log = logging.getLogger("thinobs")

DEFAULTS = {
    "out": "out",
    "cache": None,
    "jobs": os.cpu_count() or 1,
    "resolution": [129, 129],
    "levels": 2,
    "tol": 1e-9,
    "method": "flux",
}
MIN_RESOLUTION = 16


class UsageError(Exception):
    pass


def _common(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("common options")
    g.add_argument("--out", help="output directory (default: out)")
    g.add_argument("--cache", help="result cache directory (default: $THINOBS_CACHE, else none)")
    g.add_argument("--jobs", type=int, help="worker processes (default: logical cores)")
    g.add_argument("--resolution", type=int, nargs=2, metavar=("NX", "NPHI"), help="coarsest grid (default: 129 129)")
    g.add_argument("--levels", type=int, help="mesh levels for bisection (default: 2)")
    g.add_argument("--tol", type=float, help="eigensolver tolerance (default: 1e-9)")
    g.add_argument("--method", choices=FLUX_METHODS, help="equator flux evaluation (default: flux)")
    g.add_argument("--config", help="flat JSON file of option values")
    g.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thinobs", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("legendre", help="tabulate and plot p_mu")
    p.add_argument("--mu", type=float, nargs="*", default=[], help="frequencies (at least one)")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--nodes", type=int, default=257)
    _common(p)

    p = sub.add_parser("solve", help="eigenpair, h and u at one slit fraction")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--k", type=int, default=1)
    _common(p)

    p = sub.add_parser("scan", help="c(sigma) along a list of slit fractions")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--num", type=int, default=11)
    p.add_argument("--sigma", type=float, nargs="*", help="explicit fractions (overrides --num)")
    _common(p)

    p = sub.add_parser("bisect", help="locate the zero of c with mesh refinement")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--bracket", type=float, nargs=2, default=[0.0, 1.0], metavar=("LO", "HI"))
    _common(p)

    p = sub.add_parser("gaps", help="positivity of p(0) p'(0) on the gap intervals")
    p.add_argument("--n", type=int, nargs="+", default=[2, 3, 4, 5])
    p.add_argument("--k-max", type=int, default=9)
    p.add_argument("--samples", type=int, default=33)
    _common(p)

    p = sub.add_parser("variant", help="root with the k-th eigenfunction")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--k", type=int, default=2)
    _common(p)

    p = sub.add_parser("trend", help="sigma and m + 1 - mu along increasing m")
    p.add_argument("--m-list", type=int, nargs="+", default=list(DEFAULT_M_LIST))
    _common(p)
    return parser


def resolve_options(args: argparse.Namespace) -> dict:
    """Merge flags over the config file over defaults and validate the result."""
    config = {}
    if args.config:
        try:
            config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(config, dict) or any(isinstance(v, dict) for v in config.values()):
            raise UsageError("config file must be a flat JSON object")
    opts = {}
    for key, default in DEFAULTS.items():
        flag = getattr(args, key, None)
        opts[key] = flag if flag is not None else config.get(key, default)
    opts["resolution"] = tuple(int(v) for v in opts["resolution"])
    if min(opts["resolution"]) < MIN_RESOLUTION:
        raise UsageError(f"resolution must be >= {MIN_RESOLUTION} in both directions")
    if not opts["tol"] > 0:
        raise UsageError("tol must be positive")
    if opts["jobs"] < 1 or opts["levels"] < 1:
        raise UsageError("jobs and levels must be >= 1")
    if opts["method"] not in FLUX_METHODS:
        raise UsageError(f"method must be one of {FLUX_METHODS}")
    out = Path(opts["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"output directory {out} is not writable: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise UsageError(f"output directory {out} is not writable")
    opts["out"] = out
    opts["cache"] = default_cache_dir(opts["cache"])
    return opts


def _provenance(opts, chain=None):
    # no timestamp: output payloads must be byte-identical across runs
    return {"code_version": __version__, "method": opts["method"], "tol": opts["tol"],
            "resolution_chain": to_plain(chain or [opts["resolution"]])}


def cmd_legendre(args, opts) -> int:
    if not args.mu:
        raise UsageError("legendre needs at least one value after --mu")
    phi = np.linspace(0.0, np.pi / 2, args.nodes)
    rows = []
    summary = []
    for mu in args.mu:
        leg = solve_p(mu, args.n, phi_nodes=phi[:-1])
        p, dp = leg(phi)
        rows.extend((mu, args.n, f, a, b) for f, a, b in zip(phi, p, dp))
        summary.append({"mu": mu, "n": args.n, "p0": leg.p0, "dp0": leg.dp0})
    out = opts["out"]
    csv_path = write_csv(out / "legendre.csv", ["mu", "n", "phi", "p", "dp"], rows)
    write_json(out / "legendre.json", {"kind": "legendre", "rows": summary, "provenance": _provenance(opts)})
    figures.legendre_figure(csv_path, out / "legendre.svg")
    return 0


def cmd_solve(args, opts) -> int:
    grid, pair, bundle = pipeline.build_bundle(args.m, args.sigma, args.k, opts["resolution"], opts["tol"],
                                               opts["method"])
    out = opts["out"]
    tr = bundle.trace
    write_csv(out / "trace.csv", ["theta", "v", "dv_flux", "dv_stencil", "u", "uphi"],
              zip(tr.s_nodes, tr.v_eq, tr.flux_eq, tr.dv_eq, bundle.u_eq, bundle.uphi_eq))
    th, ph = np.meshgrid(grid.theta_nodes, grid.phi_nodes)
    v_csv = write_csv(out / "v_field.csv", ["theta", "phi", "v"], zip(th.ravel(), ph.ravel(), pair.v.ravel()))
    nr = bundle.u.shape[0]
    u_csv = write_csv(out / "u_field.csv", ["theta", "phi", "u"],
                      zip(th[:nr].ravel(), ph[:nr].ravel(), bundle.u.ravel()))
    h = bundle.h
    h_csv = write_csv(out / "h.csv", ["phi", "h", "dh"], zip(h.phi_nodes, h.h_values, h.dh_values))
    payload = {
        "m": bundle.m, "sigma": bundle.sigma, "k": bundle.k, "mu": bundle.mu, "lam": pair.lam,
        "residual": pair.residual, "c_quantity": bundle.c_quantity, "c_parts": bundle.c_parts,
        "method": bundle.method, "p0": bundle.p0, "dp0": bundle.dp0, "dh0": h.dh0,
        "growth_constant": h.growth_constant, "h_at_phi_max": float(h.h_values[-1]),
        "sign_report": bundle.sign_report.as_dict(),
    }
    write_json(out / "bundle.json", {"kind": "bundle", "key": [args.m, grid.sigma, args.k, *opts["resolution"]],
                                     "payload": payload, "provenance": _provenance(opts, [opts["resolution"]])})
    figures.field_figure(v_csv, out / "v.svg", "v", title=f"v, m={args.m}, sigma={grid.sigma:.3f}")
    figures.field_figure(u_csv, out / "u.svg", "u", title=f"u, m={args.m}, sigma={grid.sigma:.3f}")
    figures.profile_figure(h_csv, out / "h.svg")
    return 0


def cmd_scan(args, opts) -> int:
    nx = opts["resolution"][0]
    sigmas = sorted(args.sigma) if args.sigma else sigma_grid(args.num, nx)
    entries = scan_c(args.m, args.k, sigmas, opts["resolution"], opts["tol"], opts["method"], opts["jobs"])
    write_csv(opts["out"] / "scan.csv", ["sigma", "c", "mu", "nodal_ok", "error"],
              ((e.sigma, e.c, e.mu, e.nodal_ok, e.error) for e in entries))
    crossings = sign_changes(entries)
    print(f"m={args.m} k={args.k}: {len(crossings)} sign change(s) of c: {crossings}")
    return 1 if any(e.error for e in entries) else 0


def _root_outputs(out: Path, root) -> None:
    levels = root.mesh_levels
    write_csv(out / "root_levels.csv",
              ["Nx", "Nphi", "sigma_lo", "sigma_hi", "c_lo", "c_hi", "mu_lo", "mu_hi", "sigma_star", "mu_star"],
              ((l.Nx, l.Nphi, l.sigma_lo, l.sigma_hi, l.c_lo, l.c_hi, l.mu_lo, l.mu_hi, l.sigma_star, l.mu_star)
               for l in levels))
    contact = write_csv(out / "contact.csv", ["m", "sigma"], [(root.m, root.extrapolated_sigma)])
    figures.contact_figure(contact, out / "contact.svg")


def cmd_bisect(args, opts) -> int:
    out = opts["out"]
    try:
        root = bisect_root(args.m, args.k, tuple(args.bracket), opts["levels"], opts["resolution"], opts["tol"],
                           opts["method"])
    except BracketError as exc:
        write_json(out / "root.json", {"kind": "root", "error": str(exc), "c_lo": exc.c_lo, "c_hi": exc.c_hi,
                                       "history": exc.history, "provenance": _provenance(opts)})
        log.error("%s", exc)
        return 1
    chain = [(l.Nx, l.Nphi) for l in root.mesh_levels]
    write_json(out / "root.json", {"kind": "root", "key": [args.m, args.k, opts["levels"], *opts["resolution"]],
                                   "payload": root, "provenance": _provenance(opts, chain)})
    _root_outputs(out, root)
    print(f"m={root.m} k={root.k}: sigma = {root.extrapolated_sigma:.5f}, mu = {root.extrapolated_mu:.5f}")
    return 0


def cmd_gaps(args, opts) -> int:
    reports = []
    for n in args.n:
        rep = verify_gap(n, args.k_max, args.samples)
        reports.append(rep)
        write_csv(opts["out"] / f"gaps_n{n}.csv",
                  ["k", "mu_min_product", "worst_mu", "min_abs_p0", "min_abs_dp0", "signs_ok"],
                  ((r.k, r.mu_min_product, r.worst_mu, r.min_abs_p0, r.min_abs_dp0, r.signs_ok) for r in rep.rows))
        print(f"n={n}: verdict={rep.verdict} margin={rep.margin:.3e}")
    write_json(opts["out"] / "gaps.json", {"kind": "gap", "reports": [r.as_dict() for r in reports],
                                           "provenance": _provenance(opts)})
    return 0 if all(r.verdict for r in reports) else 1


def cmd_variant(args, opts) -> int:
    res = variant_bisect(args.m, args.k, opts["levels"], opts["resolution"], opts["tol"], method=opts["method"])
    write_json(opts["out"] / "variant.json", {"kind": "variant", "key": [args.m, args.k, opts["levels"]],
                                              "payload": res, "provenance": _provenance(opts)})
    if res.root is not None:
        print(f"m={args.m} k={args.k}: mu = {res.root.extrapolated_mu:.5f} ({res.status})")
    else:
        print(f"m={args.m} k={args.k}: {res.status}")
    return 0


def _trend_one(task):
    m, levels, resolution, tol, method = task
    root = bisect_root(m, 1, (0.0, 1.0), levels, resolution, tol, method)
    fine = root.mesh_levels[-1]
    sigma = fine.sigma_lo if abs(fine.c_lo) <= abs(fine.c_hi) else fine.sigma_hi
    grid, _, pair = pipeline.solve_eigen(m, sigma, 1, (fine.Nx, fine.Nphi), tol)
    return root, rescaled_trace_diagnostic(pair, grid, 2.0).sup_distance


def cmd_trend(args, opts) -> int:
    tasks = [(m, opts["levels"], opts["resolution"], opts["tol"], opts["method"]) for m in args.m_list]
    if opts["jobs"] > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(opts["jobs"], len(tasks))) as pool:
            results = list(pool.map(_trend_one, tasks))
    else:
        results = [_trend_one(t) for t in tasks]
    rep = trend_report([r for r, _ in results], [s for _, s in results])
    write_csv(opts["out"] / "trend.csv", ["m", "sigma", "mu", "gap", "sup_distance"],
              ((r["m"], r["sigma"], r["mu"], r["gap"], r["sup_distance"]) for r in rep.rows))
    write_json(opts["out"] / "trend.json", {"kind": "trend", "payload": rep, "provenance": _provenance(opts)})
    for r in rep.rows:
        print(f"m={r['m']:3d}  sigma={r['sigma']:.5f}  mu={r['mu']:.5f}  m+1-mu={r['gap']:.5f}  "
              f"sup={r['sup_distance']:.4f}")
    return 0 if rep.passed else 1


COMMANDS = {
    "legendre": cmd_legendre, "solve": cmd_solve, "scan": cmd_scan, "bisect": cmd_bisect,
    "gaps": cmd_gaps, "variant": cmd_variant, "trend": cmd_trend,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = resolve_options(args)
        cache = opts["cache"]
        pipeline.set_store(RecordStore(cache) if cache else None)
        return COMMANDS[args.command](args, opts)
    except (UsageError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"thinobs {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ThinObsError, AssertionError) as exc:
        print(f"thinobs {args.command}: numerical failure: {exc}", file=sys.stderr)
        return 1
    finally:
        pipeline.set_store(None)


if __name__ == "__main__":
    sys.exit(main())
