"""Command-line interface.

Subcommands: build, inverse, prob, free-energy, charpoly, table, verify.
All floating output uses 15 significant digits and fixed column orders, so
reruns with identical configuration reproduce output files byte for byte.
Exit codes: 0 pass, 1 check failure, 2 configuration error.

Environment overrides: ISODIMER_TOL_SCALE multiplies every verification
budget; ISODIMER_PARALLEL caps the worker fan-out of grid evaluations
(grid chunks are reduced in index order, so results stay deterministic).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from . import builders, gibbs, spectral, verify
from .errors import ConfigError, IsodimerError
from .fisher import angles_csv, orientation_csv, vertex_name

F15 = "{:.15g}"


def _fmt(x) -> str:
    return F15.format(float(x))


def _out(args, text: str):
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _tol_scale() -> float:
    try:
        return float(os.environ.get("ISODIMER_TOL_SCALE", "1"))
    except ValueError:
        raise ConfigError("ISODIMER_TOL_SCALE must be a float")


def _check_pow2(n: int, name: str):
    if n < 1 or n & (n - 1):
        raise ConfigError(f"{name} must be a power of two, got {n}")


def _graph_spec(args) -> str:
    spec = args.graph
    if getattr(args, "radius", None) is not None:
        if args.radius <= 0:
            raise ConfigError("radius must be positive")
        sep = "," if ":" in spec else ":"
        spec = f"{spec}{sep}radius={args.radius!r}"
    return spec


def cmd_build(args) -> int:
    b = verify.bundle_for(_graph_spec(args), use_cache=False)
    _out(args, json.dumps(b.graph.to_json(), indent=1, sort_keys=True) + "\n")
    if args.dump_fisher:
        with open(args.dump_fisher + ".orientation.csv", "w") as fh:
            fh.write(orientation_csv(b.fisher, b.orientation))
        with open(args.dump_fisher + ".angles.csv", "w") as fh:
            fh.write(angles_csv(b.fisher, b.angles))
    return 0


def cmd_inverse(args) -> int:
    b = verify.bundle_for(_graph_spec(args))
    eng, F = b.engine, b.fisher
    names = {vertex_name(v): i for i, v in enumerate(F.verts)}
    pairs = []
    if args.pairs:
        for token in args.pairs:
            try:
                xs, ys = token.split("/")
                pairs.append((names[xs], names[ys]))
            except (ValueError, KeyError) as exc:
                raise ConfigError(f"bad pair {token!r}: {exc}")
    else:
        c = verify._central_gvid(b)
        ys = [v for v, dd in verify._g_distances(b, c).items()
              if dd <= args.near and b.diamond.interior_depth(v) >= 2]
        for kind in "vwz":
            xi = F.vid(kind, c, 0)
            for gy in sorted(ys):
                for ky in range(len(F.fans[gy])):
                    for kindy in "vwz":
                        pairs.append((xi, F.vid(kindy, gy, ky)))
    lines = ["x,y,I,C,value,case_tag,n_poles"]
    for xi, yi in pairs:
        e = eng.inverse_entry(xi, yi)
        lines.append(",".join([vertex_name(F.verts[xi]), vertex_name(F.verts[yi]),
                               _fmt(e.integral), _fmt(e.constant), _fmt(e.value),
                               e.case, str(e.n_poles)]))
    _out(args, "\n".join(lines) + "\n")
    return 0


def cmd_prob(args) -> int:
    b = verify.bundle_for(_graph_spec(args))
    eng, F = b.engine, b.fisher
    rows = []
    if args.edge:
        c = verify._central_gvid(b)
        d = len(F.fans[c])
        kind = args.edge
        if kind == "wz":
            edge = (F.vid("w", c, 0), F.vid("z", c, 0))
        elif kind in ("wz_next", "wznext"):
            edge = (F.vid("w", c, 0), F.vid("z", c, 1 % d))
        elif kind in ("wv", "zv", "wv_or_zv"):
            edge = (F.vid("w", c, 0), F.vid("v", c, 0))
        elif kind == "vv":
            pg, kl = F.fans[c][0].partner
            edge = (F.vid("v", c, 0), F.vid("v", pg, kl))
        else:
            raise ConfigError(f"unknown edge kind {args.edge!r}")
        rows.append([edge])
    elif args.edges:
        names = {vertex_name(v): i for i, v in enumerate(F.verts)}
        with open(args.edges) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                toks = line.replace(",", " ").split()
                if len(toks) % 2:
                    raise ConfigError(f"odd vertex count in line {line!r}")
                try:
                    edges = [(names[toks[i]], names[toks[i + 1]])
                             for i in range(0, len(toks), 2)]
                except KeyError as exc:
                    raise ConfigError(f"unknown vertex {exc}")
                rows.append([tuple(e) for e in edges])
    else:
        raise ConfigError("prob needs --edge or --edges")
    lines = ["edges,probability,valid"]
    for edges in rows:
        res = gibbs.cylinder_probability(eng, edges)
        label = ";".join(f"{vertex_name(F.verts[i])}-{vertex_name(F.verts[j])}"
                         for i, j in edges)
        lines.append(f"{label},{_fmt(res.probability)},{int(res.valid)}")
    _out(args, "\n".join(lines) + "\n")
    return 0


def _parse_cell(spec: str):
    if spec.startswith("builtin:"):
        parts = spec.split(":")
        name = parts[1]
        theta = math.pi / 4
        for p in parts[2:]:
            k, _, v = p.partition("=")
            if k == "theta":
                theta = float(v)
        return spectral.builtin_cell(name, theta)
    if spec.startswith("file:"):
        from .geometry import IsoradialGraph

        return spectral.PeriodicCell(IsoradialGraph.load(spec[5:]))
    raise ConfigError(f"unknown cell spec {spec!r}")


def cmd_free_energy(args) -> int:
    _check_pow2(args.grid, "--grid")
    cell = _parse_cell(args.cell)
    doc: dict = {"cell": args.cell, "V1": cell.nV1, "E1": cell.nE1}
    f_formula = spectral.free_energy_dimer(cell)
    if args.method in ("formula", "both"):
        doc["f_D"] = _fmt(f_formula)
    if args.method in ("integral", "both"):
        f_int = spectral.free_energy_integral(cell, n=args.grid)
        doc["f_D_integral"] = _fmt(f_int)
        doc["diagnostics"] = {"grid": args.grid,
                              "formula_vs_integral": _fmt(abs(f_int - f_formula))}
    doc["f_I"] = _fmt(spectral.free_energy_ising(cell))
    doc["s_D"] = _fmt(spectral.entropy_dimer(cell))
    doc["c_ratio"] = _fmt(cell.charpoly_ratio_constant())
    _out(args, json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return 0


def cmd_charpoly(args) -> int:
    cell = _parse_cell(args.cell)
    const = cell.charpoly_ratio_constant(samples=args.samples)
    doc = {"cell": args.cell, "c_ratio": _fmt(const), "samples": args.samples,
           "P(1,1)": _fmt(abs(cell.char_poly_dimer(1.0, 1.0)))}
    _out(args, json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return 0


TABLE_QUANTITIES = ("P_wz", "P_wznext", "P_wv", "P_vv", "spin_pp", "J", "nu",
                    "f-summand")


def cmd_table(args) -> int:
    from .geometry import critical_coupling, critical_dimer_weight

    for q in args.quantities:
        if q not in TABLE_QUANTITIES:
            raise ConfigError(f"unknown quantity {q!r} (choose from {TABLE_QUANTITIES})")
    fns = {
        "P_wz": lambda t: gibbs.edge_probability_closed_form("wz", t),
        "P_wznext": lambda t: gibbs.edge_probability_closed_form("wz_next"),
        "P_wv": lambda t: gibbs.edge_probability_closed_form("wv_or_zv", t),
        "P_vv": lambda t: gibbs.edge_probability_closed_form("vv", t),
        "spin_pp": lambda t: gibbs.spin_same_sign_probability(math.pi / 2 - t),
        "J": critical_coupling,
        "nu": critical_dimer_weight,
        "f-summand": spectral._per_edge_dimer_term,
    }
    lines = ["theta," + ",".join(args.quantities)]
    for t in args.theta:
        if not 0 < t < math.pi / 2:
            raise ConfigError(f"theta {t} outside (0, pi/2)")
        lines.append(",".join([_fmt(t)] + [_fmt(fns[q](t)) for q in args.quantities]))
    _out(args, "\n".join(lines) + "\n")
    return 0


def cmd_verify(args) -> int:
    names = list(verify.CHECKS) if args.suite == "all" else [args.suite]
    for n in names:
        if n not in verify.CHECKS:
            raise ConfigError(f"unknown suite {n!r} (choose from "
                              f"{', '.join(verify.CHECKS)}, all)")
    overrides: dict = {}
    if args.graph:
        spec = _graph_spec(args)
        for n in names:
            if n in ("kk-identity",):
                overrides[n] = {"graph_spec": spec}
    results = verify.run_suite(names, fast=not args.full,
                               tol_scale=_tol_scale(), overrides=overrides)
    lines = [r.line() for r in results]
    ok = all(r.passed for r in results)
    lines.append(f"overall: {'PASS' if ok else 'FAIL'}")
    _out(args, "\n".join(lines) + "\n")
    return 0 if ok else 1


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="isodimer",
        description="Critical Z-invariant Ising model via dimers on isoradial graphs")
    sub = p.add_subparsers(dest="command", required=True)

    def add_graph(sp):
        sp.add_argument("--graph", default="square:theta=0.7853981633974483",
                        help="builder spec: square:theta=..|triangular|honeycomb|"
                             "quasiperiodic:seed=..,size=..|file:PATH")
        sp.add_argument("--radius", type=float, default=None)
        sp.add_argument("--out", default=None)

    sp = sub.add_parser("build", help="build a graph, emit its JSON document")
    add_graph(sp)
    sp.add_argument("--dump-fisher", default=None,
                    help="prefix for orientation/angle CSV dumps")
    sp.set_defaults(fn=cmd_build)

    sp = sub.add_parser("inverse", help="dump inverse-Kasteleyn entries as CSV")
    add_graph(sp)
    sp.add_argument("--pairs", nargs="*", default=None,
                    help="vertex-name pairs like w:12:0/z:14:1")
    sp.add_argument("--near", type=int, default=2,
                    help="dump all pairs within this G-distance of the center")
    sp.set_defaults(fn=cmd_inverse)

    sp = sub.add_parser("prob", help="cylinder-set probabilities as CSV")
    add_graph(sp)
    sp.add_argument("--edge", default=None,
                    help="single central edge kind: wz|wz_next|wv|zv|vv")
    sp.add_argument("--edges", default=None,
                    help="file of edge lists (vertex-name pairs per line)")
    sp.set_defaults(fn=cmd_prob)

    sp = sub.add_parser("free-energy", help="free energies of a periodic cell")
    sp.add_argument("--cell", default="builtin:z2")
    sp.add_argument("--method", choices=("formula", "integral", "both"),
                    default="both")
    sp.add_argument("--grid", type=int, default=512)
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=cmd_free_energy)

    sp = sub.add_parser("charpoly", help="characteristic-polynomial ratio constant")
    sp.add_argument("--cell", default="builtin:z2")
    sp.add_argument("--samples", type=int, default=100)
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=cmd_charpoly)

    sp = sub.add_parser("table", help="closed-form quantities per theta, CSV")
    sp.add_argument("--theta", type=float, nargs="+", required=True)
    sp.add_argument("--quantities", nargs="+", default=list(TABLE_QUANTITIES))
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=cmd_table)

    sp = sub.add_parser("verify", help="run verification suites")
    sp.add_argument("--suite", default="all")
    sp.add_argument("--full", action="store_true",
                    help="acceptance-scale parameters instead of fast ones")
    add_graph(sp)
    sp.set_defaults(fn=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except IsodimerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
