"""Command-line front end.

Subcommands: cell (corrector statistics), poincare (constant sweep), norm
(single operator-norm measurement), sweep (full measurement sweep), verify
(sweep + pass/fail verdicts, nonzero exit on failure), export (VTK dumps).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import config as config_mod
from . import geometry, report, scaling, vtk
from .calculus import assemble_laplacian
from .corrector import corrector_scaling_report, solve_corrector, spacing_for
from .geometry import DomainSpec, FaceMode, Host, HoleShape
from .opnorms import norm_p2, poincare_constant


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perfscale",
        description="Measure scaling laws of Dirichlet problems on "
                    "perforated domains",
    )
    parser.add_argument("--config", help="path to a sweep config file")
    parser.add_argument("--output", default="out",
                        help="output directory (default: out)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--workers", type=int,
                        help="worker pool size (or set PERFSCALE_WORKERS)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_cell = sub.add_parser("cell", help="corrector cell statistics per eta")
    _domain_args(p_cell)

    p_poi = sub.add_parser("poincare", help="hole-pinned Poincaré constants")
    _domain_args(p_poi)

    p_norm = sub.add_parser("norm", help="one operator-norm measurement")
    p_norm.add_argument("--which", required=True, choices=("A", "B", "C", "D"))
    p_norm.add_argument("--p", type=float, default=2.0)
    p_norm.add_argument("--d", type=int, default=2, choices=(2, 3))
    p_norm.add_argument("--eta", type=float, required=True)
    p_norm.add_argument("--epsilon", type=float, default=1.0)

    sub.add_parser("sweep", help="run the configured sweep and write reports")
    sub.add_parser("verify", help="run the sweep and check all predictions")

    p_exp = sub.add_parser("export", help="export grid labels or fields as VTK")
    _domain_args(p_exp)
    p_exp.add_argument("--what", default="labels",
                       choices=("labels", "corrector"))
    p_exp.add_argument("--epsilon", type=float, default=1.0)
    p_exp.add_argument("--host", default="cell",
                       choices=("cell", "lattice", "bounded"))
    return parser


def _domain_args(p: argparse.ArgumentParser):
    p.add_argument("--d", type=int, default=2, choices=(2, 3))
    p.add_argument("--etas", type=float, nargs="+",
                   default=[0.25, 0.125, 0.0625])
    p.add_argument("--shape", default="ball",
                   choices=("ball", "cube", "ellipsoid"))
    p.add_argument("--size", type=float, nargs="+", default=[0.25])


def _load_config(args) -> config_mod.SweepConfig:
    if args.config:
        cfg = config_mod.load_config(args.config)
    else:
        cfg = config_mod.SweepConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    workers = args.workers
    if workers is None and os.environ.get("PERFSCALE_WORKERS"):
        workers = int(os.environ["PERFSCALE_WORKERS"])
    if workers is not None:
        cfg.workers = workers
    return cfg


def _cmd_cell(args) -> int:
    shape = HoleShape(args.shape, tuple(args.size))
    results = corrector_scaling_report(args.etas, shape, args.d)
    for r in results:
        print(json.dumps(r.to_dict(), sort_keys=True))
    return 0


def _cmd_poincare(args) -> int:
    shape = HoleShape(args.shape, tuple(args.size))
    for eta in sorted(set(args.etas), reverse=True):
        h = spacing_for(eta)
        grid = geometry.build_cell_grid(shape, eta, h, args.d,
                                        boundary=FaceMode.NEUMANN)
        value = poincare_constant(grid)
        print(json.dumps({"eta": eta, "h": h, "poincare": value},
                         sort_keys=True))
    return 0


def _cmd_norm(args) -> int:
    shape = HoleShape("ball", (0.25,))
    h_cell = spacing_for(args.eta)
    if args.epsilon == 1.0:
        grid = geometry.build_cell_grid(shape, args.eta, h_cell, args.d,
                                        boundary=FaceMode.PERIODIC)
    else:
        spec = DomainSpec(d=args.d, eta=args.eta, shape=shape,
                          epsilon=args.epsilon, host=Host.LATTICE,
                          box_halfwidth=1.0)
        grid = geometry.build_lattice_domain(spec, h_cell * args.epsilon,
                                             outer=FaceMode.PERIODIC)
    if args.p == 2:
        est = norm_p2(grid, args.which, eta=args.eta, epsilon=args.epsilon,
                      domain="lattice")
    else:
        from .opnorms import empirical_lower_bound_p

        corr = solve_corrector(shape, args.eta, h_cell, args.d)
        est = empirical_lower_bound_p(grid, args.which, args.p,
                                      corrector=corr, eta=args.eta,
                                      epsilon=args.epsilon, domain="lattice")
    row = est.to_dict()
    row["quantity"] = row.pop("which")
    row["d"] = args.d
    print(json.dumps(row, sort_keys=True))
    return 0


def _cmd_sweep(args, verify: bool) -> int:
    cfg = _load_config(args)
    result = scaling.run_sweep(cfg)
    paths = report.write_report(result, args.output, cfg.formats)
    if args.verbose:
        for p in paths:
            print(f"wrote {p}", file=sys.stderr)
    lines, status = scaling.verify_report(result)
    if verify:
        for line in lines:
            print(line)
        return status
    print(lines[-1])
    return 1 if result.errors else 0


def _cmd_export(args) -> int:
    shape = HoleShape(args.shape, tuple(args.size))
    os.makedirs(args.output, exist_ok=True)
    written = []
    for eta in args.etas:
        h = spacing_for(eta)
        if args.what == "corrector":
            corr = solve_corrector(shape, eta, h, args.d)
            text = vtk.field_to_vtk(corr.chi, name="chi",
                                    title=f"corrector eta={eta:g}")
            path = os.path.join(args.output, f"corrector-eta{eta:g}.vtk")
        else:
            if args.host == "cell":
                grid = geometry.build_cell_grid(shape, eta, h, args.d)
            elif args.host == "lattice":
                spec = DomainSpec(d=args.d, eta=eta, shape=shape,
                                  epsilon=args.epsilon, host=Host.LATTICE,
                                  box_halfwidth=1.0)
                grid = geometry.build_lattice_domain(spec, h * args.epsilon)
            else:
                spec = DomainSpec(d=args.d, eta=eta, shape=shape,
                                  epsilon=args.epsilon, host=Host.BOUNDED)
                grid = geometry.build_bounded_domain(spec, h * args.epsilon)
            text = vtk.labels_to_vtk(grid, title=f"labels eta={eta:g}")
            path = os.path.join(args.output, f"labels-eta{eta:g}.vtk")
        vtk.write_vtk(text, path)
        written.append(path)
    for path in written:
        print(path)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "cell":
            return _cmd_cell(args)
        if args.command == "poincare":
            return _cmd_poincare(args)
        if args.command == "norm":
            return _cmd_norm(args)
        if args.command == "sweep":
            return _cmd_sweep(args, verify=False)
        if args.command == "verify":
            return _cmd_sweep(args, verify=True)
        if args.command == "export":
            return _cmd_export(args)
    except (config_mod.ConfigError, geometry.ConfigurationError,
            geometry.ResolutionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    parser.error(f"unknown subcommand {args.command!r}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
