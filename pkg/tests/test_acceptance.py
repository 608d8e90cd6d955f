"""End-to-end acceptance gate.

Each test is tagged with a criterion number; ``conftest.py`` prints one
PASS/FAIL line per criterion in the terminal summary.
"""
from __future__ import annotations

from fractions import Fraction
from math import comb

import numpy as np
import pytest

from diffeokit import cli
from diffeokit import fibrancy as fb
from diffeokit import pairs as pr
from diffeokit import realize as rz
from diffeokit import simplicial as sx
from diffeokit import smoothcalc as sc
from diffeokit.suite import SuiteConfig, run_check

TOL = 1e-9


@pytest.mark.criterion(1, "half-line obstruction h''(0) = -6")
def test_halfline_obstruction():
    o = fb.halfline_obstruction()
    assert o.h2_exact == Fraction(-6)
    assert abs(o.h2_ad + 6.0) < TOL
    assert o.forced_hessian == [[2 if i == j else -2 for j in range(3)] for i in range(3)]
    F = fb.halfline_candidate()
    rng = np.random.default_rng(101)
    faces = fb.halfline_faces()
    for k, (Z, X) in enumerate(fb.sample_hyperplanes(3, rng, 1000)):
        np.testing.assert_allclose(F(X), faces.pieces[k](Z), rtol=1e-12, atol=1e-12)
    # small integers make the float arithmetic exact, so the residual is exactly 0
    Zi = rng.integers(-50, 51, size=(1000, 2)).astype(float)
    for k in range(3):
        Xi = np.insert(Zi, k, 0.0, axis=1)
        assert np.array_equal(F(Xi), faces.pieces[k](Zi))
    t = np.linspace(-3, 3, 601)
    np.testing.assert_allclose(F(np.repeat(t[:, None], 3, 1))[:, 0], -3 * t**2, rtol=0, atol=1e-12)


@pytest.mark.criterion(2, "abelian horn filler, n = 1..4, 50 instances each")
def test_abelian_filler():
    rng = np.random.default_rng(102)
    for n in (1, 2, 3, 4):
        for _ in range(50):
            F = fb.restrict_to_horn(fb.random_polynomial(n, rng))
            rep = fb.check_filler_restriction(fb.abelian_horn_filler(F, rng=rng), F, rng, 1000, TOL)
            assert rep.passed and rep.samples_used >= 1000, rep.to_text()
    F = fb.restrict_to_horn(fb.random_polynomial(2, rng))
    f0, f1 = F.pieces
    X = rng.uniform(-2, 2, size=(1000, 2))
    closed = (f1(X[:, :1]) + f0(X[:, 1:])) - f0(np.zeros((1000, 1)))
    assert np.array_equal(fb.abelian_horn_filler(F)(X), closed)


@pytest.mark.criterion(3, "S^1 retract, seam classes, edge riding")
def test_circle_retract():
    rng = np.random.default_rng(103)
    for eps in (0.1, 0.2, 0.3):
        rep = fb.verify_circle_retract(eps, 10**4, rng, tol=TOL)
        assert rep.passed, rep.to_text()
        retract = next(c for c in rep.checks if c.name == "retract")
        assert retract.samples_used == 10**4
        seams = next(c for c in rep.checks if c.name == "seam_classes")
        assert seams.passed
        assert fb.edge_riding_residual(eps) == 0.0


@pytest.mark.criterion(4, "equivalence harness over all case pairs")
def test_equidef_harness():
    assert sc.HOMOTOPY_GRID == 33
    runs = [(cp, n) for cp in pr.SUPPORTED_PAIRS if cp not in pr.SPHERE_CHAIN for n in (1, 2, 3)]
    runs += [(9, 1), (9, 2)]
    failed = []
    for k, (cp, n) in enumerate(runs):
        rep = pr.verify_pair_equivalence(cp, n, 0.2, 500, np.random.default_rng([104, k]), TOL)
        if not rep.passed:
            failed.append(rep.to_text())
        if cp == (5, 6):
            assert rep.details["delta"] > 0
    assert not failed, "\n".join(failed)


@pytest.mark.criterion(5, "simplicial identities, counts, homology, fillers")
def test_simplicial_engine():
    sets = [sx.delta(n) for n in range(5)] + [sx.boundary_delta(n) for n in range(1, 5)]
    sets += [sx.horn(n, k) for n in range(2, 5) for k in range(n + 1)]
    sets.append(sx.product(sx.delta(1), sx.delta(1)))
    for a in sets:
        assert sx.check_identities(a).passed, a.name
    assert sx.product(sx.delta(1), sx.delta(1)).nondegenerate_counts() == (4, 5, 2)
    for n in range(5):
        for q in range(1, n + 1):
            h = sx.homology(sx.delta(n), q)
            assert h.rank == 0 and not h.torsion
    for n in (2, 3):
        h = sx.homology(sx.boundary_delta(n), n - 1)
        assert (h.rank, h.torsion) == (1, ())
    bd = sx.boundary_delta(2)
    assert sx.find_horn_filler(bd, sx.horn_map_from_faces(2, 1, bd, {0: "12", 2: "01"})) is None


@pytest.mark.criterion(6, "realization cells, seams, product map")
def test_realization():
    for n in (2, 3, 4):
        for k in range(n + 1):
            c = rz.realize(sx.horn(n, k))
            seams = rz.seam_set(c)
            assert len(seams.maximal) == n
            assert all(c.dims[m] == n - 1 for m in seams.maximal)
            assert seams.counts(c.dims)[n - 2] == comb(n, 2)
    d1 = sx.delta(1)
    c = rz.realize(sx.product(d1, d1))
    assert rz.seam_set(c).counts(c.dims)[1] == 1
    w = rz.find_noninjectivity_witness(d1, d1)
    assert w is not None
    _, cp, _, _ = rz.product_context(d1, d1)
    assert rz.natural_product_map(d1, d1, w["first"]) == rz.natural_product_map(d1, d1, w["second"])
    assert not rz.same_class(cp, w["first"], w["second"])
    rep = rz.surjectivity_probe(d1, d1, grid=32)
    assert rep.passed and rep.samples_used >= 1000


@pytest.mark.criterion(7, "lifting through R -> S^1")
def test_circle_lift():
    rng = np.random.default_rng(107)
    for _ in range(5):
        b = fb.random_affine_phase_horn(2, rng)
        f = fb.lift_horn_through_bundle(b, rng=rng)
        rep = fb.check_filler_restriction(f, b, rng, 1000, TOL)
        assert rep.passed, rep.to_text()
    with pytest.raises(fb.LiftError):
        fb.lift_horn_through_bundle(fb.mismatched_phase_horn(), rng=rng)


@pytest.mark.criterion(8, "D-open retraction")
def test_dopen_retraction():
    rng = np.random.default_rng(108)
    for n in (2, 3):
        h, rep = fb.dopen_retraction(n, 0.5, 0.2, rng, 10**4)
        X = np.concatenate([X for _, X in fb.sample_hyperplanes(n, rng, 10**4)])
        assert np.abs(h(X) - X).max() <= 1e-12
        support = next(c for c in rep.checks if c.name == "support_in_V")
        assert support.passed and support.samples_used == 10**4


@pytest.mark.criterion(9, "AD against finite differences over the corpus")
def test_ad_integrity():
    rep = run_check(SuiteConfig(seed=109), "ad_integrity")
    assert rep.passed, "\n".join(rep.failing())
    names = [c.name for c in rep.checks]
    assert "bump_of_bump" in names and len(names) == rep.details["corpus_size"]


@pytest.mark.criterion(10, "suite all is byte-deterministic")
def test_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["--seed", "2024", "suite", "all", "--out", str(a)]) == 0
    assert cli.main(["--seed", "2024", "suite", "all", "--out", str(b)]) == 0
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir()) and "summary.json" in files
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
