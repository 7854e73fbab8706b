"""Command-line entry point.

Every subcommand prints one JSON report on stdout and writes its artifacts
(fields, CSV tables, optional SVG figures) under ``--out``.  Contract errors
exit with status 2 and a JSON error object.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import StreamdecError

SCHEMA_VERSION = 1


def _threads() -> int:
    raw = os.environ.get("STREAMDEC_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise StreamdecError(f"STREAMDEC_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def _clean(obj):
    """JSON-safe copy: numpy scalars and arrays become Python values, non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _emit(command: str, report: dict) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "command": command, **_clean(report)}
    sys.stdout.write(json.dumps(doc, indent=2) + "\n")


def _out_dir(args) -> Path | None:
    if not getattr(args, "out", None):
        return None
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _need_out(args) -> Path:
    p = _out_dir(args)
    if p is None:
        raise StreamdecError(f"{args.command} needs --out")
    return p


def _field(path):
    from .field import load_field

    if path is None:
        raise StreamdecError("missing --field")
    try:
        return load_field(path)
    except FileNotFoundError:
        raise StreamdecError(f"no such file: {path}") from None


def _svg(args, out: Path | None, name: str, draw) -> list[str]:
    if not args.svg:
        return []
    if out is None:
        raise StreamdecError("--svg needs --out")
    return [draw(out / name)]


# ---------------------------------------------------------------------------
# subcommands

def cmd_gen(args):
    from . import gallery
    from .field import save_field, save_velocity

    out = _need_out(args)
    name = args.name
    files = {}
    if name == "nelson":
        grid = gallery.NELSON_GRID if args.n is None else (args.n, *gallery.NELSON_GRID[1:])
        f, v, rho, rho2 = gallery.nelson(grid)
        for key, fld in (("f", f), ("rho", rho), ("rho2", rho2)):
            save_field(fld, out / f"{key}.json")
            files[key] = str(out / f"{key}.json")
        save_velocity(v, out / "v.json")
        files["v"] = str(out / "v.json")
    elif name in gallery.GENERATORS:
        kw = {}
        if args.n is not None:
            kw["grid"] = (args.n, *gallery.DEFAULT_GRIDS[name][1:])
        f = gallery.GENERATORS[name](**kw)
        save_field(f, out / "f.json")
        files["f"] = str(out / "f.json")
    else:
        raise StreamdecError(f"unknown generator {name!r}; choose from "
                             f"{sorted(list(gallery.GENERATORS) + ['nelson'])}")
    from .plotting import field_figure

    svgs = _svg(args, out, f"{name}.svg", lambda p: field_figure(f, p, name))
    return {"generator": name, "shape": list(f.shape), "h": f.h, "origin": list(f.origin),
            "files": files, "figures": svgs}


def cmd_decompose(args):
    from .field import save_field
    from .monodec import decompose, verify_decomposition

    f = _field(args.field)
    comps = decompose(f, eps_stop=args.eps if args.eps is not None else 1e-12)
    rep = verify_decomposition(f, comps)
    out = _out_dir(args)
    manifest = {"source": str(args.field), "components": []}
    for i, c in enumerate(comps):
        entry = {"index": i, "sign": c.sign, "tv": c.tv,
                 "grad_support_cells": int(c.grad_support.bits.sum())}
        if out is not None:
            path = out / f"component_{i}.json"
            save_field(c.field, path)
            entry["file"] = str(path)
        manifest["components"].append(entry)
    if out is not None:
        (out / "manifest.json").write_text(json.dumps(_clean(manifest), indent=2) + "\n")
    from .plotting import components_figure

    svgs = _svg(args, out, "components.svg", lambda p: components_figure(comps, p))
    return {"manifest": manifest, "verification": rep.as_dict(), "figures": svgs}


def cmd_trace(args):
    from .curves import check_tangent_normal, is_simple_polyline, regular_levels, trace_essential_level

    f = _field(args.field)
    out = _out_dir(args)
    levels = regular_levels(f, args.levels)
    rows, summary, all_curves = [], [], []
    for t in levels:
        cs = trace_essential_level(f, t)
        all_curves += cs
        for cid, c in enumerate(cs):
            for k, (x, y) in enumerate(c.vertices):
                rows.append((t, cid, k, float(x), float(y)))
        summary.append({
            "level": t,
            "curves": len(cs),
            "lengths": [c.arclength for c in cs],
            "simple": [is_simple_polyline(c.vertices) for c in cs],
            "rms_angle": [check_tangent_normal(f, c).rms_angle for c in cs],
        })
    files = {}
    if out is not None:
        path = out / "trace.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["level", "curve_id", "vertex_index", "x", "y"])
            w.writerows(rows)
        files["trace"] = str(path)
    from .plotting import field_figure

    svgs = _svg(args, out, "trace.svg", lambda p: field_figure(f, p, "level curves", all_curves))
    return {"levels": summary, "files": files, "figures": svgs}


def cmd_coarea(args):
    from .field import coarea_report

    f = _field(args.field)
    return {"coarea": coarea_report(f, args.levels).as_dict()}


def _velocity(args, f):
    from .field import load_velocity, perp_gradient

    path = args.velocity
    if path is None:
        beside = Path(args.field).parent / "v.json"
        if beside.exists():
            path = beside
    if path is None:
        return perp_gradient(f), "central differences of the field"
    v = load_velocity(path)
    if v.shape != f.shape or v.h != f.h or tuple(v.origin) != tuple(f.origin):
        raise StreamdecError("grid mismatch between field and velocity")
    return v, str(path)


BETAS = ("square", "identity", "sin")


def cmd_chain_rule(args):
    from . import weakdiv

    f = _field(args.field)
    if args.rho is None:
        raise StreamdecError("missing --rho")
    rho = _field(args.rho)
    if not rho.same_grid(f):
        raise StreamdecError("grid mismatch between field and rho")
    v, source = _velocity(args, f)
    beta = {"square": weakdiv.SQUARE, "identity": weakdiv.IDENTITY, "sin": weakdiv.SINE}[args.beta]
    fam = weakdiv.default_family(f)
    rep = weakdiv.chain_rule_test(rho, v, beta, fam)
    out = _out_dir(args)
    files = {}
    if out is not None:
        path = out / "defects.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["test", "center_x", "center_y", "radius", "raw_rho", "normalized_rho",
                        "raw_beta_rho", "normalized_beta_rho"])
            for k in range(len(fam)):
                w.writerow([k, fam.centers[k, 0], fam.centers[k, 1], fam.radii[k],
                            rep.rho.raw[k], rep.rho.normalized[k],
                            rep.beta_rho.raw[k], rep.beta_rho.normalized[k]])
        files["defects"] = str(path)
    from .plotting import defects_figure

    svgs = _svg(args, out, "defects.svg", lambda p: defects_figure(rep, p))
    d = rep.as_dict()
    d.update({"beta": args.beta, "velocity": source, "n_tests": len(fam),
              "witness": None if rep.witness_test is None else {
                  "center": fam.centers[rep.witness_test].tolist(),
                  "radius": float(fam.radii[rep.witness_test])},
              "files": files, "figures": svgs})
    return d


def cmd_constancy(args):
    from . import weakdiv
    from .curves import regular_levels
    from .field import perp_gradient

    f = _field(args.field)
    if args.rho is None:
        raise StreamdecError("missing --rho")
    rho = _field(args.rho)
    if not rho.same_grid(f):
        raise StreamdecError("grid mismatch between field and rho")
    rep = weakdiv.constancy_test(rho, f, regular_levels(f, args.levels))
    v, source = _velocity(args, f) if args.velocity else (perp_gradient(f), "central differences of the field")
    fam = weakdiv.default_family(f)
    thr = weakdiv.control_threshold(v, fam)
    dd = weakdiv.divergence_defect(rho, v, fam).max_normalized
    tol = args.eps if args.eps is not None else 1e-6
    constant = rep.max_variance <= tol
    free = dd <= thr
    return {"constancy": rep.as_dict(), "variance_tolerance": tol, "constant_on_levels": constant,
            "defect": dd, "threshold": thr, "divergence_free": free, "verdicts_agree": constant == free,
            "velocity": source}


def cmd_sard(args):
    from .monodec import decompose
    from .sard import wsp_report

    f = _field(args.field)
    comps = decompose(f)
    rep = wsp_report(f, comps, n_bins=args.bins, eps_grad=args.eps if args.eps is not None else 1e-6,
                     with_estar=args.estar, n_levels=args.levels, workers=_threads())
    out = _out_dir(args)
    files = {}
    if out is not None:
        path = out / "histograms.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["component", "bin", "t_lo", "t_hi", "mass"])
            for c in rep.components:
                e = c.histogram.edges
                for b, m in enumerate(c.histogram.masses):
                    w.writerow([c.index, b, e[b], e[b + 1], m])
        files["histograms"] = str(path)
    from .plotting import sard_figure

    svgs = _svg(args, out, "sard.svg", lambda p: sard_figure(rep, p))
    return {"wsp": rep.as_dict(), "n_components": len(comps), "files": files, "figures": svgs}


def cmd_transport(args):
    from .field import save_field
    from .transport1d import foliate_and_advect

    f = _field(args.field)
    if args.rho is None:
        raise StreamdecError("missing --rho")
    rho = _field(args.rho)
    out = _out_dir(args)
    moved, rep = foliate_and_advect(f, rho, args.time, levels=args.levels, workers=_threads())
    files = {}
    if out is not None:
        save_field(moved, out / "rho_t.json")
        files["rho_t"] = str(out / "rho_t.json")
    from .plotting import field_figure

    svgs = _svg(args, out, "rho_t.svg", lambda p: field_figure(moved, p, f"rho at t = {args.time:g}"))
    return {"time": args.time, "foliation": rep.as_dict(), "files": files, "figures": svgs}


def cmd_nonuniq(args):
    from .transport1d import CircleWeight, nonuniqueness_demo, trajectory_rows

    out = _need_out(args)
    n = args.n or 4096
    traj_a, traj_b, rep = nonuniqueness_demo(args.length, args.atom_at, args.mass, args.time, n=n)
    w = CircleWeight(args.length, np.ones(n), ((args.atom_at, args.mass),))
    files = {}
    for name, traj in (("A", traj_a), ("B", traj_b)):
        path = out / f"trajectory_{name}.csv"
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "s", "value"])
            wr.writerows(trajectory_rows(traj, w))
        files[f"trajectory_{name}"] = str(path)
    from .plotting import trajectory_figure

    svgs = _svg(args, out, "trajectories.svg", lambda p: trajectory_figure(w, traj_a, traj_b, p))
    return {"report": rep.as_dict(), "files": files, "figures": svgs}


def cmd_verify_all(args):
    from .acceptance import run_all

    only = None if not args.only else {int(k) for k in args.only.split(",")}
    results = run_all(only)
    for r in results:
        print(r.line(), file=sys.stderr)
    return {"passed": all(r.ok for r in results), "criteria": [r.as_dict() for r in results]}


COMMANDS = {
    "gen": cmd_gen,
    "decompose": cmd_decompose,
    "trace": cmd_trace,
    "coarea": cmd_coarea,
    "chain-rule": cmd_chain_rule,
    "constancy": cmd_constancy,
    "sard": cmd_sard,
    "transport": cmd_transport,
    "nonuniq": cmd_nonuniq,
    "verify-all": cmd_verify_all,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="streamdec", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"streamdec {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, help_, *flags):
        sp = sub.add_parser(name, help=help_)
        if "field" in flags:
            sp.add_argument("--field", help="field file (JSON)")
        if "rho" in flags:
            sp.add_argument("--rho", help="density file on the same grid")
        if "velocity" in flags:
            sp.add_argument("--velocity", help="velocity file; defaults to v.json beside --field")
        if "levels" in flags:
            sp.add_argument("--levels", type=int, default=32, help="number of levels (default 32)")
        if "bins" in flags:
            sp.add_argument("--bins", type=int, default=1024, help="histogram bins (default 1024)")
        if "eps" in flags:
            sp.add_argument("--eps", type=float, default=None, help="tolerance (see command help)")
        sp.add_argument("--out", help="directory for artifacts")
        sp.add_argument("--svg", action="store_true", help="also write SVG figures to --out")
        return sp

    g = add("gen", "write a gallery field")
    g.add_argument("name", help="radial_bump, two_bumps, two_bumps_overlap, volcano or nelson")
    g.add_argument("--n", type=int, default=None, help="cells per side")
    add("decompose", "monotone decomposition (--eps: relative stopping TV)", "field", "eps")
    add("trace", "trace level curves to CSV", "field", "levels")
    add("coarea", "coarea report", "field", "levels")
    cr = add("chain-rule", "weak divergence of rho v and beta(rho) v", "field", "rho", "velocity")
    cr.add_argument("--beta", choices=BETAS, default="square")
    add("constancy", "constancy of rho on level curves (--eps: variance tolerance)",
        "field", "rho", "velocity", "levels", "eps")
    sd = add("sard", "weak Sard scores per monotone component (--eps: critical gradient ratio)",
             "field", "bins", "eps", "levels")
    sd.add_argument("--estar", action="store_true", help="also score the critical set cut to E*")
    tr = add("transport", "advect rho along the level curves of a monotone field", "field", "rho", "levels")
    tr.add_argument("--time", type=float, default=0.1)
    nu = add("nonuniq", "two weak solutions with zero initial data on a circle with an atom")
    nu.add_argument("--n", type=int, default=None, help="segments (default 4096)")
    nu.add_argument("--length", type=float, default=1.0)
    nu.add_argument("--atom-at", type=float, default=0.25)
    nu.add_argument("--mass", type=float, default=0.5)
    nu.add_argument("--time", type=float, default=0.5)
    va = sub.add_parser("verify-all", help="run the acceptance suite")
    va.add_argument("--only", help="comma-separated criterion numbers")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        report = COMMANDS[args.command](args)
    except StreamdecError as exc:
        _emit(args.command, {"error": {"type": type(exc).__name__, "message": str(exc)}})
        return 2
    _emit(args.command, report)
    if args.command == "verify-all" and not report["passed"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
