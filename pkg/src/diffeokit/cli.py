"""Command line entry point: ``diffeokit <command> ...``.

Global flags (``--seed``, ``--budget``, ``--tol``, ``--jobs``, ``--out``,
``--config``) are accepted before or after the command.  Values from a TOML
config file fill in whatever the flags leave unset.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import __version__
from .report import VerificationReport

log = logging.getLogger("diffeokit")

GLOBAL_DEFAULTS = {"seed": 0, "budget": None, "tol": None, "jobs": 1, "out": None,
                   "config": None, "json": False}


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="RNG seed (default 0)")
    g.add_argument("--budget", type=int, default=argparse.SUPPRESS,
                   help="sample count for sampled checks")
    g.add_argument("--tol", type=float, default=argparse.SUPPRESS,
                   help="override the default 1e-9 tolerance")
    g.add_argument("--jobs", type=int, default=argparse.SUPPRESS,
                   help="worker processes for suites")
    g.add_argument("--out", default=argparse.SUPPRESS, help="output directory or file base")
    g.add_argument("--config", default=argparse.SUPPRESS, help="TOML file with defaults")
    g.add_argument("--json", action="store_true", default=argparse.SUPPRESS,
                   help="print JSON instead of text")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="diffeokit", parents=[common],
                                 description="Verification workbench for smooth simplicial constructions.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="run one verification")
    p.add_argument("what", choices=["circle-retract", "equidef", "identities", "cutoff"])
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--pair", default="6,2", help="case pair for equidef, e.g. 6,2 or 9")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--input", help="simplicial set JSON for identities")
    p.add_argument("--no-blend", action="store_true", help="circle retract without the blend")

    p = sub.add_parser("fill", parents=[common], help="fill a horn")
    p.add_argument("what", choices=["abelian", "simplicial"])
    p.add_argument("--input", required=True, help="HornData JSON, or a simplicial set JSON")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int, help="missing face (simplicial)")
    p.add_argument("--faces", help='face images as JSON, e.g. {"0": "12", "2": "01"}')

    p = sub.add_parser("obstruction", parents=[common], help="run an obstruction computation")
    p.add_argument("what", choices=["halfline", "rank"])
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--m", type=int, help="rank bound of the plots (default n-1)")

    p = sub.add_parser("realize", parents=[common], help="realization reports")
    p.add_argument("--input", required=True, help="simplicial set JSON")
    p.add_argument("--second", help="second factor for product-probe (default: the input)")
    p.add_argument("--report", choices=["cells", "seams", "product-probe"], default="cells")

    p = sub.add_parser("lift", parents=[common], help="lift a circle-valued horn through R")
    p.add_argument("what", choices=["s1-horn"])
    p.add_argument("--input", required=True, help="HornData JSON with circle-valued pieces")

    p = sub.add_parser("retract", parents=[common], help="retraction constructions")
    p.add_argument("what", choices=["dopen", "loop"])
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--eps", type=float, default=0.2)

    p = sub.add_parser("plot", parents=[common], help="write a curve as CSV and SVG")
    p.add_argument("curve", choices=["cutoff", "R", "section", "obstruction"])
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--samples", type=int, default=1001)

    p = sub.add_parser("suite", parents=[common], help="run a named verification suite")
    p.add_argument("name", nargs="?", default="all",
                   choices=["simplicial", "equidef", "realization", "fibrancy", "all"])
    return ap


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Flags win over the config file, which wins over built-in defaults."""
    cfg = {}
    path = getattr(args, "config", None)
    if path:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    for key, default in GLOBAL_DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, cfg.get(key, default))
    args.budgets = dict(cfg.get("budgets", {}))
    return args


def _rng(args, name: str) -> np.random.Generator:
    from .suite import SuiteConfig, check_rng
    return check_rng(SuiteConfig(seed=args.seed), name)


def _emit(args, payload, name: str, passed: bool = True) -> int:
    if isinstance(payload, VerificationReport):
        text, data = payload.to_text(), payload.to_dict()
        passed = payload.passed
    else:
        data = payload
        text = json.dumps(payload, indent=2, sort_keys=True, default=str)
    print(json.dumps(data, indent=2, sort_keys=True, default=str) if args.json else text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.json").write_text(json.dumps(data, indent=2, sort_keys=True, default=str) + "\n")
    return 0 if passed else 1


def _tol(args, default=1e-9):
    return args.tol if args.tol is not None else default


def _load_set(path):
    from .simplicial import SimplicialSet
    return SimplicialSet.from_json(Path(path).read_text())


def cmd_verify(args) -> int:
    if args.what == "circle-retract":
        from .fibrancy import verify_circle_retract
        rep = verify_circle_retract(args.eps, args.budget or 10**4, _rng(args, "circle_retract"),
                                    blend=not args.no_blend, tol=_tol(args))
        return _emit(args, rep, "circle_retract")
    if args.what == "equidef":
        from .pairs import verify_pair_equivalence
        pair = int(args.pair) if args.pair.strip().isdigit() else args.pair
        rep = verify_pair_equivalence(pair, args.n, args.eps, args.budget or 500,
                                      _rng(args, f"equidef[{args.pair}]"), _tol(args))
        return _emit(args, rep, "equidef")
    if args.what == "identities":
        from .simplicial import check_identities
        if not args.input:
            raise SystemExit("verify identities needs --input")
        return _emit(args, check_identities(_load_set(args.input)), "identities")
    from .smoothcalc import check_cutoff_invariants, make_cutoff
    return _emit(args, check_cutoff_invariants(make_cutoff(args.eps), args.budget or 10**4),
                 "cutoff")


def cmd_fill(args) -> int:
    text = Path(args.input).read_text()
    if args.what == "abelian":
        from .fibrancy import HornData, abelian_horn_filler, check_filler_restriction
        horn = HornData.from_json(text)
        if args.n is not None and args.n != horn.n:
            raise SystemExit(f"--n {args.n} does not match the input (n={horn.n})")
        rng = _rng(args, "fill")
        filler = abelian_horn_filler(horn, rng=rng)
        rep = check_filler_restriction(filler, horn, rng, args.budget or 1000, _tol(args))
        payload = {"filler": filler.to_dict(), "report": rep.to_dict()}
        return _emit(args, payload, "fill_abelian", rep.passed)
    from .simplicial import SimplicialSet, find_horn_filler, horn_map_from_faces
    a = SimplicialSet.from_json(text)
    if args.n is None or args.k is None or not args.faces:
        raise SystemExit("fill simplicial needs --n, --k and --faces")
    faces = {int(i): ref for i, ref in json.loads(args.faces).items()}
    h = horn_map_from_faces(args.n, args.k, a, faces)
    found = find_horn_filler(a, h)
    payload = {"filler": None if found is None else found.to_json(), "exists": found is not None}
    return _emit(args, payload, "fill_simplicial", True)


def cmd_obstruction(args) -> int:
    if args.what == "halfline":
        from .fibrancy import halfline_obstruction
        o = halfline_obstruction()
        return _emit(args, o.to_dict(), "halfline", o.h2_exact == -6)
    from .fibrancy import coordinate_plane_diffeology, hyperplane_inclusion, rank_obstruction
    from .smoothcalc import coord, smooth_map
    n = args.n
    m = args.m if args.m is not None else n - 1
    # candidate that factors through the last coordinate hyperplane
    F = hyperplane_inclusion(n, n - 1).compose(smooth_map(n, [coord(i) for i in range(n - 1)]))
    rep = rank_obstruction(F, coordinate_plane_diffeology(n), n, m, _rng(args, "rank"))
    return _emit(args, rep, "rank_obstruction")


def cmd_realize(args) -> int:
    from . import realize as rz
    a = _load_set(args.input)
    if args.report == "cells":
        c = rz.realize(a)
        return _emit(args, dict(c.to_dict(), counts=c.counts()), "cells")
    if args.report == "seams":
        c = rz.realize(a)
        s = rz.seam_set(c)
        return _emit(args, {"maximal": s.maximal, "seams": s.seams,
                            "counts": s.counts(c.dims)}, "seams")
    b = _load_set(args.second) if args.second else a
    rng = _rng(args, "product_probe")
    parts = [rz.check_product_map_well_defined(a, b, rng, args.budget or 1000)]
    w = rz.find_noninjectivity_witness(a, b)
    details = {} if w is None else {k: str(v) for k, v in w.items()}
    parts.append(VerificationReport("noninjectivity_search", 0.0, 0.0, 1,
                                    details=dict(details, found=w is not None)))
    if all(f.nondegenerate_counts() == (2, 1) for f in (a, b)):
        parts.append(rz.surjectivity_probe(a, b))
    return _emit(args, VerificationReport.combine("product_probe", parts), "product_probe")


def cmd_lift(args) -> int:
    from .fibrancy import HornData, LiftError, check_filler_restriction, lift_horn_through_bundle
    horn = HornData.from_json(Path(args.input).read_text())
    rng = _rng(args, "lift")
    try:
        f = lift_horn_through_bundle(horn, rng=rng)
    except LiftError as exc:
        return _emit(args, {"lifted": False, "error": str(exc)}, "lift", False)
    rep = check_filler_restriction(f, horn, rng, args.budget or 1000, _tol(args))
    return _emit(args, {"lifted": True, "filler": f.to_dict(), "report": rep.to_dict()},
                 "lift", rep.passed)


def cmd_retract(args) -> int:
    from .fibrancy import dopen_retraction, loop_retract_H
    if args.what == "dopen":
        _, rep = dopen_retraction(args.n, args.delta, args.eps, _rng(args, "dopen"),
                                  args.budget or 10**4)
        return _emit(args, rep, "dopen_retraction")
    return _emit(args, loop_retract_H(args.n, rng=_rng(args, "loop"),
                                      count=args.budget or 1000), "loop_retract")


def cmd_plot(args) -> int:
    from .plots import emit_plot
    base = Path(args.out or ".") / f"{args.curve}_eps{args.eps:g}"
    csv_path, svg_path = emit_plot(args.curve, base, args.eps, args.samples)
    print(f"wrote {csv_path}\nwrote {svg_path}")
    return 0


def cmd_suite(args) -> int:
    from .suite import SuiteConfig, run_suite
    cfg = SuiteConfig(args.name, args.seed, args.budget, args.tol, args.jobs, args.out,
                      args.budgets)
    status, results = run_suite(cfg)
    for name, rep in results.items():
        line = f"[{'PASS' if rep.passed else 'FAIL'}] {name}"
        if not rep.passed:
            line += f"  failing: {', '.join(rep.failing())}"
        print(line)
    print(f"{sum(r.passed for r in results.values())}/{len(results)} checks passed")
    return status


COMMANDS = {"verify": cmd_verify, "fill": cmd_fill, "obstruction": cmd_obstruction,
            "realize": cmd_realize, "lift": cmd_lift, "retract": cmd_retract,
            "plot": cmd_plot, "suite": cmd_suite}


def main(argv=None) -> int:
    args = resolve(build_parser().parse_args(argv))
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
