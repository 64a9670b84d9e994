"""Command line interface: ``solve``, ``suite`` and ``meshinfo``.

Exit status is 0 when every case converged, 1 otherwise and 2 on usage
errors.
"""
import argparse
import sys

import numpy as np

from .bench.config import CaseConfig, load_config, parse_assignments
from .bench.suite import PRESETS, preset, run_suite, write_csv
from .mesh import generate_mesh, load_mesh, regularity_report


def _overrides(cfgs, sets):
    if not sets:
        return cfgs
    return [parse_assignments(sets, base=c) for c in cfgs]


def _emit(rows, cfgs, path):
    if path in (None, "-"):
        write_csv(rows, sys.stdout, cfgs)
    else:
        write_csv(rows, path, cfgs)


def cmd_solve(args):
    cfgs = load_config(args.config) if args.config else [CaseConfig()]
    cfgs = _overrides(cfgs, args.set)
    if args.export_matrix:
        cfgs = [c.with_(export_matrix=args.export_matrix) for c in cfgs]
    for c in cfgs:
        print("# config\n" + c.to_text(), file=sys.stderr)
    log = (lambda m: print(m, file=sys.stderr)) if args.verbose else None
    rows, _ = run_suite(cfgs, log=log)
    _emit(rows, cfgs, args.csv)
    return 0 if all(r["converged"] is True for r in rows) else 1


def cmd_suite(args):
    cfgs = []
    for name in args.presets:
        if name in PRESETS:
            cfgs += preset(name, quick=args.quick)
        else:
            cfgs += load_config(name)
    cfgs = _overrides(cfgs, args.set)
    log = lambda m: print(m, file=sys.stderr)  # noqa: E731
    rows, _ = run_suite(cfgs, log=log)
    _emit(rows, cfgs, args.csv)
    return 0 if all(r["converged"] is True for r in rows) else 1


def cmd_meshinfo(args):
    if args.file:
        mesh = load_mesh(args.file)
    else:
        kw = {"seed": args.seed} if args.kind == "cvt" else {}
        mesh = generate_mesh(args.kind, args.n, **kw)
    s = mesh.summary()
    rep = regularity_report(mesh, args.gamma)
    print(f"mesh      {s['name']}")
    print(f"vertices  {s['vertices']}")
    print(f"edges     {s['edges']}")
    print(f"faces     {s['faces']}")
    print(f"cells     {s['cells']}")
    print(f"h         {s['h']:.6g}")
    print(f"volume    {s['volume']:.12f}")
    print(f"checksum  {float(np.sum(mesh.cell_volume * np.arange(1, mesh.n_cells + 1))):.12e}")
    print(f"min ball ratio  {rep['min_ball_ratio']:.4f}")
    print(f"min disk ratio  {rep['min_disk_ratio']:.4f}")
    print(f"min edge ratio  {rep['min_edge_ratio']:.4f}")
    print(f"non-convex      {int((~rep['convex']).sum())}")
    print(f"regular (gamma={rep['gamma']:g})  {'yes' if rep['passed'] else 'no'}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="vembddc", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the case(s) of a config file")
    p.add_argument("config", nargs="?", help="key = value config file (defaults if omitted)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    p.add_argument("--csv", default="-", help="output CSV path ('-' for stdout)")
    p.add_argument("--export-matrix", default="", metavar="PATH",
                   help="write the saddle matrix in Matrix Market format")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("suite", help="run presets or config files")
    p.add_argument("presets", nargs="+", help=f"preset names {PRESETS} or config files")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--csv", default="-")
    p.add_argument("--quick", action="store_true", help="smaller meshes")
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("meshinfo", help="counts and quality of a mesh")
    p.add_argument("kind", nargs="?", default="cube", choices=["cube", "octa", "cvt"])
    p.add_argument("n", nargs="?", type=int, default=4)
    p.add_argument("--file", help="read a mesh text file instead")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma", type=float, default=0.05)
    p.set_defaults(func=cmd_meshinfo)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
