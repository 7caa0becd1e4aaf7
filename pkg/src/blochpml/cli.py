"""Command-line entry point: ``blochpml <subcommand> --config FILE [--set key=value ...]``.

Exit codes: 0 success, 1 a check failed, 2 configuration or usage error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .errors import BlochPMLError, BoundViolated, ConfigError
from .experiments import (ExperimentConfig, KSetup, contour_check, convergence_rates,
                          nodes_per_piece, oracle_error, run_pml_sweep, verify_h_bound,
                          write_config_sidecar, write_sweep, FAULTS)
from .geometry import build_cell_mesh, write_mesh
from .numerics import build_contour, default_delta

COMMANDS = ("solve", "sweep", "contour-check", "verify-lemma", "oracle-check", "dump-mesh")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="blochpml", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="key = value config file (defaults if omitted)")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key; repeatable")
        if name == "solve":
            s.add_argument("--method", choices=("exact-dtn", "pml-dtn"), default="exact-dtn")
        if name == "contour-check":
            s.add_argument("--k", type=float, default=1.2)
            s.add_argument("--straight-nodes", type=int, default=320)
        if name == "verify-lemma":
            s.add_argument("--samples", type=int, default=200)
            s.add_argument("--delta", type=float, action="append",
                           help="contour radius; repeatable (default: config delta or auto)")
            # test hook: run with a deliberately wrong square-root branch
            s.add_argument("--inject-fault", choices=[f for f in FAULTS if f],
                           help=argparse.SUPPRESS)
        if name == "oracle-check":
            s.add_argument("--h", default="0.1,0.05,0.025",
                           help="comma-separated mesh sizes, coarse to fine")
        if name == "dump-mesh":
            s.add_argument("--layer", action="store_true", help="include the PML band")
    return p


def load_config(args) -> ExperimentConfig:
    if args.config is not None:
        if not os.path.isfile(args.config):
            raise FileNotFoundError(f"config file not found: {args.config}")
        return ExperimentConfig.from_file(args.config, args.set)
    return ExperimentConfig.from_text("", args.set)


def _out(cfg, name):
    os.makedirs(cfg.output_dir, exist_ok=True)
    return os.path.join(cfg.output_dir, name)


def _write_csv(path, header, rows, cfg, extra=None):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else f"{v:.17g}" for v in row) + "\n")
    write_config_sidecar(path + ".prov", cfg, extra or {})


# --------------------------------------------------------------------------

def cmd_solve(cfg, args) -> int:
    for kv in sorted(cfg.k):
        setup = KSetup(cfg, kv)
        if args.method == "exact-dtn":
            runs = [("exact", setup.reference())]
        else:
            runs = [(f"rho{rho:g}", setup.pml_field(rho)) for rho in sorted(cfg.rho)]
        for tag, fld in runs:
            path = _out(cfg, f"field_k{kv:.6g}_{tag}.csv")
            _write_csv(path, "x1,x2,re,im",
                       [(x1, x2, v.real, v.imag) for (x1, x2), v in zip(fld.points, fld.values)],
                       cfg, {key: val for key, val in sorted(fld.provenance.items())})
            print(path)
    return 0


def cmd_sweep(cfg, args) -> int:
    result = run_pml_sweep(cfg)
    paths = write_sweep(result, cfg.output_dir)
    print(f"{'k':>10} {'rho':>6} {'err':>12}")
    for r in result.rows:
        print(f"{r.k:10.6g} {r.rho:6g} {r.err:12.4e}" + ("" if r.status == "ok" else "  " + r.status))
    for k, s in sorted(result.slopes.items()):
        print(f"slope k={k:.6g}: " + ("n/a" if s is None else f"{s[0]:.4f} on rho in [{s[1]:g}, {s[2]:g}]"))
    print(paths["sweep"])
    return 1 if any(r.status != "ok" for r in result.rows) else 0


def cmd_contour_check(cfg, args) -> int:
    res = contour_check(cfg, args.k, args.straight_nodes)
    ok = res["delta_invariance"] < 1e-6 and res["straight_vs_deformed"] < 1e-3
    path = _out(cfg, "contour_check.csv")
    _write_csv(path, "k,delta,delta_invariance,straight_vs_deformed",
               [(args.k, res["delta"], res["delta_invariance"], res["straight_vs_deformed"])],
               cfg, {"straight_nodes": args.straight_nodes})
    print(f"delta vs delta/2: {res['delta_invariance']:.3e} (tol 1e-6)")
    print(f"straight vs deformed: {res['straight_vs_deformed']:.3e} (tol 1e-3)")
    return 0 if ok else 1


def cmd_verify_lemma(cfg, args) -> int:
    rows, failed = [], False
    for kv in sorted(cfg.k):
        k = cfg.wavenumber(kv)
        if not k.assumption_ok:
            print(f"k={kv:.6g}: cutoffs not separated, skipped")
            continue
        deltas = args.delta or [cfg.delta if cfg.delta is not None else default_delta(k)]
        for d in deltas:
            for rho in sorted(cfg.rho):
                sigma = cfg.profile(rho).sigma
                try:
                    g, margin = verify_h_bound(k, d, sigma, args.samples, cfg.j_range,
                                               fault=args.inject_fault)
                    status = "ok" if margin >= 0 else "margin<0"
                except BoundViolated as exc:
                    g, margin, status = float("nan"), float("nan"), f"violated: {exc}"
                failed |= status != "ok"
                rows.append((kv, d, rho, g, margin, status))
                print(f"k={kv:.6g} delta={d:g} rho={rho:g}: gamma={g:.4g} margin={margin:.4g} {status}")
    path = _out(cfg, "lemma.csv")
    _write_csv(path, "k,delta,rho,gamma_est,min_margin,status", rows, cfg,
               {"samples_per_piece": args.samples, "fault": args.inject_fault})
    return 1 if failed else 0


def cmd_oracle_check(cfg, args) -> int:
    hs = [float(x) for x in args.h.split(",")]
    errs = [oracle_error(h, j_range=min(cfg.j_range, 20)) for h in hs]
    rates = convergence_rates(hs, errs) if len(hs) > 1 else np.array([])
    path = _out(cfg, "oracle_check.csv")
    _write_csv(path, "h,err", list(zip(hs, errs)), cfg)
    for h, e in zip(hs, errs):
        print(f"h={h:g}: err={e:.4e}")
    for r in rates:
        print(f"rate {r:.3f}")
    ok = all(e < 1e-2 for h, e in zip(hs, errs) if h <= 0.05) and all(1.7 <= r <= 2.3 for r in rates)
    return 0 if ok else 1


def cmd_dump_mesh(cfg, args) -> int:
    mesh = build_cell_mesh(cfg.make_surface(), cfg.H, cfg.h_max,
                           layer=cfg.pml_thickness if args.layer else 0.0)
    path = _out(cfg, "mesh.txt")
    write_mesh(mesh, path)
    write_config_sidecar(path + ".prov", cfg, {"layer": args.layer})
    print(f"{path}: {len(mesh.vertices)} vertices, {len(mesh.triangles)} triangles")
    return 0


HANDLERS = {"solve": cmd_solve, "sweep": cmd_sweep, "contour-check": cmd_contour_check,
            "verify-lemma": cmd_verify_lemma, "oracle-check": cmd_oracle_check,
            "dump-mesh": cmd_dump_mesh}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
        cfg = load_config(args)
    except UsageError as exc:
        print(f"usage error: {exc}\n", file=sys.stderr)
        parser.print_usage(sys.stderr)
        print("\nconfig keys and defaults:\n" + ExperimentConfig.schema(), file=sys.stderr)
        return 2
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        print("\nconfig keys and defaults:\n" + ExperimentConfig.schema(), file=sys.stderr)
        return 2
    try:
        return HANDLERS[args.command](cfg, args)
    except BlochPMLError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
