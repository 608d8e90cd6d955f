"""Named verification suites and the report bundle they write.

Every check gets its own generator seeded from ``(seed, crc32(name))``, so a
check's output does not depend on which other checks ran or in what order.
"""
from __future__ import annotations

import json
import logging
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from math import comb
from pathlib import Path

import numpy as np

from . import fibrancy as fb
from . import pairs as pr
from . import realize as rz
from . import simplicial as sx
from . import smoothcalc as sc
from .report import TOL_EXACT, VerificationReport, _plain

log = logging.getLogger(__name__)

SUITES = ("simplicial", "equidef", "realization", "fibrancy")
EQUIDEF_EPS = 0.2


@dataclass
class SuiteConfig:
    suite: str = "all"
    seed: int = 0
    budget: int | None = None
    tol: float | None = None
    jobs: int = 1
    out: str | None = None
    budgets: dict = field(default_factory=dict)

    def samples(self, key: str, default: int) -> int:
        """Budget for one kind of sampling: explicit entry, else --budget, else default."""
        if key in self.budgets:
            return int(self.budgets[key])
        return int(self.budget) if self.budget is not None else default

    def tolerance(self, default: float = TOL_EXACT) -> float:
        return float(self.tol) if self.tol is not None else default

    def record(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k not in ("out", "jobs")}


def check_rng(cfg: SuiteConfig, name: str) -> np.random.Generator:
    return np.random.default_rng([int(cfg.seed), zlib.crc32(name.encode())])


CHECKS: dict = {}


def check(suite: str, name: str):
    def deco(fn):
        CHECKS[name] = (suite, fn)
        return fn
    return deco


def checks_for(suite: str) -> list:
    if suite == "all":
        return list(CHECKS)
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITES + ('all',)}")
    return [n for n, (s, _) in CHECKS.items() if s == suite]


# -- simplicial ------------------------------------------------------------------------

def _corpus_sets():
    out = []
    for n in range(5):
        out.append(sx.delta(n))
        if n >= 1:
            out.append(sx.boundary_delta(n))
        if n >= 2:
            out.extend(sx.horn(n, k) for k in range(n + 1))
    out.append(sx.product(sx.delta(1), sx.delta(1)))
    return out


@check("simplicial", "simplicial_identities")
def _identities(cfg, rng):
    return VerificationReport.combine(
        "simplicial_identities", [sx.check_identities(a) for a in _corpus_sets()])


@check("simplicial", "product_counts")
def _product_counts(cfg, rng):
    fails = []
    for (p, q), want in {(1, 1): (4, 5, 2), (1, 2): (6, 12, 10, 3)}.items():
        got = sx.product(sx.delta(p), sx.delta(q)).nondegenerate_counts()
        if got != want:
            fails.append({"factors": [p, q], "got": got, "want": want})
    return VerificationReport.from_failures("product_counts", fails, 2)


@check("simplicial", "homology")
def _homology(cfg, rng):
    fails, checked = [], 0
    for n in range(5):
        for q in range(1, n + 1):
            checked += 1
            h = sx.homology(sx.delta(n), q)
            if h.rank or h.torsion:
                fails.append({"space": f"delta({n})", "q": q, "got": str(h)})
    for n in (2, 3):
        checked += 1
        h = sx.homology(sx.boundary_delta(n), n - 1)
        if (h.rank, h.torsion) != (1, ()):
            fails.append({"space": f"boundary_delta({n})", "q": n - 1, "got": str(h)})
    return VerificationReport.from_failures("homology", fails, checked)


@check("simplicial", "horn_fillers")
def _horn_fillers(cfg, rng):
    fails = []
    bd = sx.boundary_delta(2)
    h = sx.horn_map_from_faces(2, 1, bd, {0: "12", 2: "01"})
    if sx.find_horn_filler(bd, h) is not None:
        fails.append("boundary_delta(2) has a filler for the inner horn")
    d2 = sx.delta(2)
    h = sx.horn_map_from_faces(2, 1, d2, {0: "12", 2: "01"})
    if sx.find_horn_filler(d2, h) != sx.SimplexRef("012"):
        fails.append("delta(2) horn not filled by its top simplex")
    return VerificationReport.from_failures("horn_fillers", fails, 2)


# -- equidef ---------------------------------------------------------------------------

def _equidef_runs():
    for cp in pr.SUPPORTED_PAIRS:
        if cp in pr.SPHERE_CHAIN:
            continue
        for n in (1, 2, 3):
            yield cp, n
    for n in (1, 2):
        yield 9, n


def _make_equidef_check(cp, n):
    label = cp if isinstance(cp, int) else ",".join(map(str, cp))
    name = f"equidef[{label};n={n}]"

    def run(cfg, rng):
        rep = pr.verify_pair_equivalence(cp, n, EQUIDEF_EPS, cfg.samples("equidef", 500),
                                         rng, cfg.tolerance())
        rep.name = name
        return rep

    check("equidef", name)(run)


for _cp, _n in _equidef_runs():
    _make_equidef_check(_cp, _n)


@check("equidef", "cutoff_invariants")
def _cutoffs(cfg, rng):
    return VerificationReport.combine("cutoff_invariants", [
        sc.check_cutoff_invariants(sc.make_cutoff(e), cfg.samples("cutoff", 10**4))
        for e in (0.05, 0.1, 0.2, 0.3, 0.45)])


def expression_corpus(eps: float = EQUIDEF_EPS):
    """(name, map, sampler) triples covering every construction with derivatives."""
    out = []
    for cp, n in _equidef_runs():
        chain = pr.SPHERE_CHAIN if cp == 9 else (cp,)
        if cp == 9 and n > 2:
            continue
        for link in chain:
            for d in pr.DIRECTIONS:
                spec = pr.build_equidef_map(link, d, n, eps)
                src = spec.source
                homotopy = d.startswith("homotopy")

                def sampler(rng, k, src=src, homotopy=homotopy):
                    X = src.sample_domain(rng, k)
                    if homotopy:
                        X = np.concatenate([X, rng.uniform(0, 1, size=(k, 1))], axis=1)
                    return X
                out.append((f"{spec.case_pair}/{d}/n={n}", spec.map, sampler))
    t = sc.coord(0)
    uni = lambda lo, hi: (lambda rng, k: rng.uniform(lo, hi, size=(k, 1)))  # noqa: E731
    out.append(("bump", sc.smooth_map(1, [sc.bump(t)]), uni(-0.5, 2.0)))
    out.append(("bump_of_bump", sc.smooth_map(1, [sc.bump(sc.bump(t) + t * t)]), uni(0.05, 2.0)))
    for e in (0.1, 0.2, 0.3):
        out.append((f"cutoff({e})", sc.make_cutoff(e).map, uni(-0.5, 1.5)))
        for cell in "AB":
            lo = -0.5 if cell == "A" else 0.5
            out.append((f"section[{cell},{e}]", fb.section_map(cell, e), uni(lo, lo + 1.0)))
    out.append(("psi", fb.default_psi(), uni(-0.5, 1.5)))
    for n in (2, 3):
        h, _ = fb.dopen_retraction(n, 0.5, eps, count=10)
        out.append((f"dopen({n})", h,
                    lambda rng, k, n=n: rng.uniform(-1.5, 1.5, size=(k, n))))
    out.append(("halfline_candidate", fb.halfline_candidate(),
                lambda rng, k: rng.normal(size=(k, 3))))
    return out


SEAM_MARGIN = 0.01


def away_from_seams(f: sc.SmoothMap, sampler, rng, count: int, margin: float = SEAM_MARGIN):
    """Samples whose difference stencils do not straddle a piecewise seam.

    Branches are only required to agree on the seam itself (checked
    separately); off a submanifold domain their ambient extensions differ.
    """
    sels = [node.args[0] for node in f.nodes() if node.op == "piecewise"]
    if not sels:
        return sampler(rng, count)
    sel_map = sc.SmoothMap(f.arity_in, tuple(sels))
    kept = []
    have = 0
    while have < count:
        X = sampler(rng, 2 * count)
        X = X[np.abs(sel_map(X)).min(axis=1) > margin]
        kept.append(X)
        have += len(X)
    return np.concatenate(kept)[:count]


@check("equidef", "ad_integrity")
def _ad_integrity(cfg, rng):
    count = cfg.samples("ad", 200)
    parts = []
    for name, f, sampler in expression_corpus():
        X = away_from_seams(f, sampler, rng, count)
        g = sc.check_gradient_fd(f, X)
        h = sc.check_hessian_fd(f, X[: max(count // 4, 1)])
        parts.append(VerificationReport.combine(name, [g, h]))
    return VerificationReport.combine("ad_integrity", parts, corpus_size=len(parts))


# -- realization -----------------------------------------------------------------------

@check("realization", "realize_counts")
def _realize_counts(cfg, rng):
    fails, checked = [], 0
    for n in (2, 3, 4):
        for k in range(n + 1):
            checked += 1
            c = rz.realize(sx.horn(n, k))
            seams = rz.seam_set(c)
            low = seams.counts(c.dims).get(n - 2, 0)
            top = [g for g in seams.maximal if c.dims[g] == n - 1]
            if len(seams.maximal) != n or len(top) != n or low != comb(n, 2):
                fails.append({"horn": [n, k], "maximal": len(seams.maximal),
                              "seams": low})
    for n in range(1, 5):
        checked += 1
        c = rz.realize(sx.boundary_delta(n))
        want = tuple(comb(n + 1, q + 1) for q in range(n))
        if c.counts() != want:
            fails.append({"boundary": n, "got": c.counts(), "want": want})
    return VerificationReport.from_failures("realize_counts", fails, checked)


@check("realization", "product_seams")
def _product_seams(cfg, rng):
    c = rz.realize(sx.product(sx.delta(1), sx.delta(1)))
    counts = rz.seam_set(c).counts(c.dims)
    fails = [] if counts.get(1) == 1 and c.counts()[2] == 2 else [counts]
    return VerificationReport.from_failures("product_seams", fails, 1, seam_counts=counts)


@check("realization", "normal_form")
def _normal_form(cfg, rng):
    count = cfg.samples("normal_form", 10**4)
    cx = [sx.horn(3, 0), sx.product(sx.delta(1), sx.delta(1)), sx.parallel_edges(),
          sx.boundary_delta(3)]
    parts = []
    for a in cx:
        c = rz.realize(a)
        r = rz.check_normal_form_idempotent(c, rng, count)
        r.name = f"idempotent[{a.name}]"
        g = rz.check_gluing_consistency(c, rng, max(count // 10, 1))
        g.name = f"gluing[{a.name}]"
        parts += [r, g]
    return VerificationReport.combine("normal_form", parts)


@check("realization", "product_map")
def _product_map(cfg, rng):
    d0, d1 = sx.delta(0), sx.delta(1)
    parts = [rz.check_product_map_well_defined(d1, d1, rng, cfg.samples("product_map", 1000))]
    w = rz.find_noninjectivity_witness(d1, d1)
    fails = [] if w is not None else ["no witness"]
    p1 = rz.RealPoint.make("(s1(01),s0(01))", (0.0, 1.0, 0.0))
    p2 = rz.RealPoint.make("(s0(01),s1(01))", (1.0, -1.0, 1.0))
    i1, i2 = rz.natural_product_map(d1, d1, p1), rz.natural_product_map(d1, d1, p2)
    _, c, _, _ = rz.product_context(d1, d1)
    if i1 != i2 or rz.same_class(c, p1, p2):
        fails.append("reference pair")
    parts.append(VerificationReport.from_failures(
        "non_injective", fails, 2,
        witness_found=None if w is None else [str(w["first"]), str(w["second"])],
        reference_image=[str(p) for p in i1]))
    # unit law: Δ0 x Δ1 -> Δ1 is a bijection on sampled points
    _, c01, _, _ = rz.product_context(d0, d1)
    bad = []
    for p in rz.random_points(c01, rng, 200):
        img = rz.natural_product_map(d0, d1, rz.normal_form(c01, p))[1]
        q = len(img.coords) - 1
        base = sx.SimplexRef("0", tuple(range(q - 1, -1, -1)))
        back = rz.RealPoint.make(sx.product_ref(c01.source, base, img.cell), img.coords)
        if not rz.same_class(c01, p, back):
            bad.append(p.to_json())
    parts.append(VerificationReport.from_failures("unit_law", bad, 200))
    parts.append(rz.surjectivity_probe(d1, d1, grid=32))
    return VerificationReport.combine("product_map", parts)


@check("realization", "parallel_edges")
def _parallel(cfg, rng):
    cyl = rz.cylinder_seams(rz.realize(sx.parallel_edges()))
    tri = rz.triangle_edges_intersect()
    fails = []
    if len(cyl["seam_lines"]) != 2 or not cyl["all_parallel"]:
        fails.append("cylinder seams")
    if not tri["all_intersect"]:
        fails.append("triangle edges")
    return VerificationReport.from_failures("parallel_edges", fails, 2,
                                            seam_lines=cyl["seam_lines"])


# -- fibrancy --------------------------------------------------------------------------

@check("fibrancy", "halfline_obstruction")
def _halfline(cfg, rng):
    o = fb.halfline_obstruction()
    F = fb.halfline_candidate()
    t = rng.uniform(-2, 2, size=cfg.samples("halfline", 1000))
    parts = [
        VerificationReport.from_residuals("h2_exact", [abs(float(o.h2_exact + 6))], 0.0),
        VerificationReport.from_residuals("h2_ad", [abs(o.h2_ad + 6.0)], TOL_EXACT),
        VerificationReport.from_failures(
            "forced_jets", [] if o.forced_hessian == [[2 if i == j else -2 for j in range(3)]
                                                      for i in range(3)] else [o.forced_hessian], 1),
        VerificationReport.from_residuals(
            "diagonal", np.abs(F(np.repeat(t[:, None], 3, 1))[:, 0] + 3 * t**2), TOL_EXACT, t),
    ]
    faces = fb.halfline_faces()
    for k, (Z, X) in enumerate(fb.sample_hyperplanes(3, rng, len(t))):
        parts.append(VerificationReport.from_residuals(
            f"face[{k}]", np.abs(F(X) - faces.pieces[k](Z))[:, 0], TOL_EXACT, Z))
    return VerificationReport.combine("halfline_obstruction", parts, **o.to_dict())


@check("fibrancy", "abelian_filler")
def _filler(cfg, rng):
    count = cfg.samples("filler", 1000)
    instances = cfg.budgets.get("filler_instances", 50)
    parts = []
    for n in (1, 2, 3, 4):
        worst = []
        for _ in range(instances):
            G = fb.random_polynomial(n, rng)
            F = fb.restrict_to_horn(G)
            worst.append(fb.check_filler_restriction(fb.abelian_horn_filler(F, rng=rng), F, rng,
                                                     count, cfg.tolerance()))
        parts.append(VerificationReport.combine(f"restriction[n={n}]", worst))
    # n = 2 closed form, exact
    G = fb.random_polynomial(2, rng)
    F = fb.restrict_to_horn(G)
    f = fb.abelian_horn_filler(F)
    X = rng.uniform(-2, 2, size=(count, 2))
    f0, f1 = F.pieces
    closed = (f1(X[:, :1]) + f0(X[:, 1:])) - f0(np.zeros((count, 1)))
    parts.append(VerificationReport.from_residuals(
        "closed_form[n=2]", np.abs(f(X) - closed)[:, 0], 0.0, X))
    return VerificationReport.combine("abelian_filler", parts)


@check("fibrancy", "filler_multilinear")
def _multilinear(cfg, rng):
    parts = []
    for n in (2, 3):
        G, top = fb.random_multilinear(n, rng)
        f = fb.abelian_horn_filler(fb.restrict_to_horn(G))
        X = rng.uniform(-2, 2, size=(cfg.samples("filler", 1000), n))
        res = np.abs(G(X)[:, 0] - top * np.prod(X, axis=1) - f(X)[:, 0])
        parts.append(VerificationReport.from_residuals(f"multilinear[n={n}]", res, TOL_EXACT, X))
    return VerificationReport.combine("filler_multilinear", parts)


@check("fibrancy", "circle_retract")
def _circle(cfg, rng):
    parts = []
    for e in (0.1, 0.2, 0.3):
        parts.append(fb.verify_circle_retract(e, cfg.samples("circle", 10**4), rng,
                                              tol=cfg.tolerance()))
        parts.append(VerificationReport.from_residuals(
            f"edge_riding[eps={e:g}]", [fb.edge_riding_residual(e)], 0.0))
    parts.append(fb.check_circle_seams(rng, cfg.samples("circle_seams", 1000)))
    _, maps = fb.circle_model()
    parts.append(VerificationReport.from_residuals(
        "vertex_value", [np.abs(maps["A"]([1.0, 0.0, 0.0]) - [-1.0, 0.0]).max()], 1e-12))
    return VerificationReport.combine("circle_retract", parts)


@check("fibrancy", "circle_lift")
def _lift(cfg, rng):
    count = cfg.samples("lift", 1000)
    parts = []
    for k in range(5):
        b = fb.random_affine_phase_horn(2, rng)
        f = fb.lift_horn_through_bundle(b, rng=rng)
        rep = fb.check_filler_restriction(f, b, rng, count, cfg.tolerance())
        rep.name = f"affine_phase[{k}]"
        parts.append(rep)
    fails = []
    try:
        fb.lift_horn_through_bundle(fb.mismatched_phase_horn(), rng=rng)
        fails.append("mismatched lifts were accepted")
    except fb.LiftError:
        pass
    parts.append(VerificationReport.from_failures("mismatch_rejected", fails, 1))
    return VerificationReport.combine("circle_lift", parts)


@check("fibrancy", "dopen_retraction")
def _dopen(cfg, rng):
    return VerificationReport.combine("dopen_retraction", [
        fb.dopen_retraction(n, 0.5, 0.2, rng, cfg.samples("dopen", 10**4))[1] for n in (2, 3)])


@check("fibrancy", "rank_obstruction")
def _rank(cfg, rng):
    x = sc.coord
    proj2 = sc.smooth_map(2, [x(0), sc.const(0.0)])
    proj3 = sc.smooth_map(3, [x(0), x(1), sc.const(0.0)])
    cases = [
        ("n=2,m=1", fb.rank_obstruction(proj2, None, 2, m=1, rng=rng), True),
        ("n=3,m=2", fb.rank_obstruction(proj3, fb.coordinate_plane_diffeology(3), 3, rng=rng), True),
        ("identity", fb.rank_obstruction(sc.identity_map(2), None, 2, rng=rng), False),
    ]
    fails = [name for name, rep, want in cases if rep.details["contradiction"] != want]
    return VerificationReport.from_failures("rank_obstruction", fails, len(cases),
                                            **{n: r.details for n, r, _ in cases})


@check("fibrancy", "loop_retract")
def _loop(cfg, rng):
    return VerificationReport.combine("loop_retract", [
        fb.loop_retract_H(n, rng=rng, count=cfg.samples("loop", 1000)) for n in (2, 3)])


# -- runner ----------------------------------------------------------------------------

def run_check(cfg: SuiteConfig, name: str) -> VerificationReport:
    _, fn = CHECKS[name]
    try:
        rep = fn(cfg, check_rng(cfg, name))
    except Exception as exc:  # a crash is a failed check, not a crashed suite
        log.exception("check %s raised", name)
        rep = VerificationReport(name, float("inf"), 0.0, 0,
                                 details={"error": f"{type(exc).__name__}: {exc}"})
    rep.name = name
    return rep


def _run_one(args):
    cfg, name = args
    return run_check(cfg, name)


def run_suite(cfg: SuiteConfig):
    """Run the suite; returns (exit status, {name: report})."""
    names = checks_for(cfg.suite)
    out = Path(cfg.out) if cfg.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            reports = list(ex.map(_run_one, [(cfg, n) for n in names]))
    else:
        reports = [run_check(cfg, n) for n in names]
    results = dict(zip(names, reports))
    for r in reports:
        r.details.setdefault("config", cfg.record())
    status = 0 if all(r.passed for r in reports) else 1
    if out is not None:
        write_bundle(out, cfg, results)
    return status, results


def bundle_filename(name: str) -> str:
    safe = "".join(c if c.isalnum() or c in "-_=." else "_" for c in name)
    return f"{safe}.json"


def write_bundle(out: Path, cfg: SuiteConfig, results: dict):
    for name, rep in results.items():
        (out / bundle_filename(name)).write_text(rep.to_json() + "\n")
    summary = {
        "config": cfg.record(),
        "passed": all(r.passed for r in results.values()),
        "checks": {n: {"pass": r.passed, "max_residual": r.max_residual,
                       "tolerance": r.tolerance, "file": bundle_filename(n),
                       "failing": r.failing()} for n, r in results.items()},
    }
    (out / "summary.json").write_text(json.dumps(_plain(summary), indent=2, sort_keys=True) + "\n")


__all__ = ["SuiteConfig", "run_suite", "run_check", "checks_for", "CHECKS", "SUITES",
           "expression_corpus", "check_rng", "write_bundle"]
