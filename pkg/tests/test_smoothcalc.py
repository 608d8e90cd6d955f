from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffeokit import smoothcalc as sc
from diffeokit.smoothcalc import coord, make_cutoff


def flat_bump_oracle(t):
    return math.exp(-1.0 / t) if t > 0 else 0.0


# -- cut-off functions ---------------------------------------------------------------

@pytest.mark.parametrize("eps", [0.05, 0.1, 0.2, 0.3, 0.45])
def test_cutoff_endpoints(eps):
    phi = make_cutoff(eps)
    assert phi(eps / 2) == 0.0
    assert phi(1 - eps / 2) == 1.0


@pytest.mark.parametrize("eps", [0.1, 0.2, 0.3])
def test_cutoff_half(eps):
    assert make_cutoff(eps)(0.5) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("eps", [0.1, 0.25])
def test_cutoff_matches_formula(eps):
    phi = make_cutoff(eps)
    for t in np.linspace(eps + 0.01, 1 - eps - 0.01, 17):
        a, b = flat_bump_oracle(t - eps), flat_bump_oracle(1 - eps - t)
        assert phi(t) == pytest.approx(a / (a + b), rel=1e-12)


def test_cutoff_jets_vanish_at_zero():
    v, g, h = make_cutoff(0.2).jet([0.0])
    assert (v[0], g[0], h[0]) == (0.0, 0.0, 0.0)


@pytest.mark.parametrize("eps", [0.0, 0.5, 0.6, -0.1])
def test_cutoff_bad_epsilon(eps):
    with pytest.raises(ValueError):
        make_cutoff(eps)


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.2, 0.3, 0.4, 0.49])
def test_cutoff_invariants_grid(eps):
    rep = sc.check_cutoff_invariants(make_cutoff(eps), count=10_000)
    assert rep.passed, rep.witness


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.49), st.floats(-2, 3))
def test_cutoff_range_property(eps, t):
    v = float(make_cutoff(eps)(t))
    assert 0.0 <= v <= 1.0
    if t < eps:
        assert v == 0.0
    if t > 1 - eps:
        assert v == 1.0


def test_cutoff_kernel_matches_dag():
    phi = make_cutoff(0.2)
    t = np.linspace(-0.5, 1.5, 401)
    np.testing.assert_allclose(phi(t), phi.map(t[:, None])[:, 0], atol=1e-15)


# -- jets ----------------------------------------------------------------------------

def test_jet_square_difference():
    x, y = sc.variables(2)
    j = sc.eval_jet2(sc.smooth_map(2, (x - y) ** 2), [1.0, 0.0])
    assert j.value == 1.0
    np.testing.assert_array_equal(j.gradient, [2.0, -2.0])
    np.testing.assert_array_equal(j.hessian, [[2.0, -2.0], [-2.0, 2.0]])


@pytest.mark.parametrize("t", [0.0, -1.0, -1e-3])
def test_flat_bump_jets_zero(t):
    j = sc.eval_jet2(sc.smooth_map(1, sc.bump(coord(0))), [t])
    assert j.value == 0.0 and j.gradient[0] == 0.0 and j.hessian[0, 0] == 0.0


@pytest.mark.parametrize("t", [0.05, 0.3, 1.0, 4.0])
def test_flat_bump_jets_analytic(t):
    g = math.exp(-1 / t)
    j = sc.eval_jet2(sc.smooth_map(1, sc.bump(coord(0))), [t])
    assert j.value == pytest.approx(g, rel=1e-14)
    assert j.gradient[0] == pytest.approx(g / t**2, rel=1e-13)
    assert j.hessian[0, 0] == pytest.approx(g * (1 / t**4 - 2 / t**3), rel=1e-12)


def cutoff_affine():
    x, y = sc.variables(2)
    return sc.smooth_map(2, make_cutoff(0.2).expr(0.6 * x - 0.3 * y + 0.4))


def test_cutoff_affine_plain_central_differences():
    f = cutoff_affine()
    rng = np.random.default_rng(3)
    X = rng.uniform(-0.5, 1.5, size=(200, 2))
    _, G, _ = f.jet(X)
    fd = sc.fd_gradient(f, X, h=1e-4, extrapolate=False)
    assert np.abs(G - fd).max() <= 1e-6


def test_cutoff_affine_fd_reports():
    f = cutoff_affine()
    X = np.random.default_rng(4).uniform(-0.5, 1.5, size=(200, 2))
    assert sc.check_gradient_fd(f, X).passed
    assert sc.check_hessian_fd(f, X).passed


def random_polynomial(rng, n, degree, terms):
    xs = sc.variables(n)
    out = sc.const(0.0)
    for _ in range(terms):
        mono = sc.const(float(rng.uniform(-2, 2)))
        for _ in range(int(rng.integers(0, degree + 1))):
            mono = mono * xs[int(rng.integers(n))]
        out = out + mono
    return sc.smooth_map(n, out)


@pytest.mark.parametrize("seed", range(5))
def test_polynomial_gradient_fd(seed):
    rng = np.random.default_rng(seed)
    f = random_polynomial(rng, 3, 4, 8)
    X = rng.uniform(-1, 1, size=(100, 3))
    assert sc.check_gradient_fd(f, X).passed
    assert sc.check_gradient_fd(f, X, h=1e-4, extrapolate=False).passed


def test_flat_bump_near_zero_fd():
    f = sc.smooth_map(1, sc.bump(coord(0)))
    X = np.linspace(-0.05, 0.3, 101)[:, None]
    X = X[np.abs(X[:, 0]) > 2e-3]
    assert sc.check_gradient_fd(f, X).passed


def test_corrupted_jet_rule_detected(monkeypatch):
    good = sc.JET_RULES["exp"]

    def bad(a):
        v, g, h = good(a)
        return v, None if g is None else 1.1 * g, h

    monkeypatch.setitem(sc.JET_RULES, "exp", bad)
    f = sc.smooth_map(1, sc.exp(coord(0)))
    rep = sc.check_gradient_fd(f, np.linspace(-1, 1, 21)[:, None])
    assert not rep.passed
    assert rep.witness is not None


def test_chain_rule_composition():
    x, y = sc.variables(2)
    outer = sc.smooth_map(2, sc.sin(x) * sc.exp(y))
    inner = sc.smooth_map(2, (x * y, x + y))
    comp = outer.compose(inner)
    p = np.array([0.3, -0.7])
    a, b = p[0] * p[1], p.sum()
    assert sc.eval_jet2(comp, p).value == pytest.approx(math.sin(a) * math.exp(b))
    # gradient via the chain rule by hand
    J = np.array([[p[1], p[0]], [1, 1]])
    outer_g = np.array([math.cos(a) * math.exp(b), math.sin(a) * math.exp(b)])
    np.testing.assert_allclose(sc.eval_jet2(comp, p).gradient, outer_g @ J, rtol=1e-13)


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_quotient_rule(a, b):
    x, y = sc.variables(2)
    f = sc.smooth_map(2, (x * x + 1.0) / (y * y + 2.0))
    j = sc.eval_jet2(f, [a, b])
    d = b * b + 2
    assert j.gradient[0] == pytest.approx(2 * a / d, rel=1e-12, abs=1e-15)
    assert j.gradient[1] == pytest.approx(-(a * a + 1) * 2 * b / d**2, rel=1e-12, abs=1e-15)


def test_division_guard():
    x = coord(0)
    f = sc.smooth_map(1, 1.0 / x)
    with pytest.raises(sc.DomainError):
        f([0.0])


def test_sqrt_domain():
    f = sc.smooth_map(1, sc.sqrt(coord(0)))
    with pytest.raises(sc.DomainError):
        f.jet([[-1.0]])


def test_no_absolute_value_primitive():
    with pytest.raises(ValueError):
        sc.SmoothMap(1, (sc.Expr("abs", (coord(0),)),))


def test_coord_out_of_range():
    with pytest.raises(ValueError):
        sc.smooth_map(1, coord(1))


# -- piecewise nodes -----------------------------------------------------------------

def test_piecewise_agreement_passes():
    x, y = sc.variables(2)
    # x^2 on both sides of the line x = y, glued by a flat term
    sel = x - y
    f = sc.smooth_map(2, sc.piecewise(sel, x * y + sc.bump(sel), x * y))
    rep = sc.check_piecewise_agreement(f, np.random.default_rng(0), count=1000)
    assert rep.passed


def test_piecewise_disagreement_caught():
    x, y = sc.variables(2)
    f = sc.smooth_map(2, sc.piecewise(x - y, x, y + 0.001))
    assert not sc.check_piecewise_agreement(f, np.random.default_rng(0), count=100).passed


def test_piecewise_kink_caught():
    x, = sc.variables(1)
    f = sc.smooth_map(1, sc.piecewise(x, x, -x))
    rep = sc.check_piecewise_agreement(f, np.random.default_rng(0), count=50)
    assert not rep.passed


# -- serialization -------------------------------------------------------------------

def test_json_roundtrip():
    f = cutoff_affine()
    g = sc.SmoothMap.from_json(f.to_json())
    X = np.random.default_rng(1).uniform(-1, 2, size=(50, 2))
    np.testing.assert_array_equal(f(X), g(X))


# -- pairs and homotopies ------------------------------------------------------------

ALL_PAIRS = [(1, None), (2, 0.2), (3, None), (4, 0.2), (5, None), (6, 0.2),
             (7, None), (8, 0.2), (9, None), ("SH", None), ("SH*", None)]


@pytest.mark.parametrize("case, eps", ALL_PAIRS)
@pytest.mark.parametrize("n", [1, 2])
def test_identity_is_map_of_pairs(case, eps, n):
    if case == 6 and n == 2:
        eps = 0.2
    P = sc.pair(case, n, eps)
    rep = sc.verify_map_of_pairs(sc.identity_map(P.ambient_dim), P, P, budget=400)
    assert rep.passed, rep.witness


@pytest.mark.parametrize("n", [1, 2, 3])
def test_coordinatewise_cutoff(n):
    phi = make_cutoff(0.2)
    f = sc.smooth_map(n, tuple(phi.expr(x) for x in sc.variables(n)))
    rep = sc.verify_map_of_pairs(f, sc.pair(2, n, 0.2), sc.pair(1, n), budget=1000)
    assert rep.passed


def test_identity_to_origin_fails():
    P = sc.pair(1, 2)
    rep = sc.verify_map_of_pairs(sc.identity_map(2), P, [0.0, 0.0], budget=200)
    assert not rep.passed
    assert rep.witness is not None


def test_chart_mismatch():
    with pytest.raises(ValueError):
        sc.verify_map_of_pairs(sc.identity_map(3), sc.pair(1, 2), sc.pair(1, 2))


@pytest.mark.parametrize("case, n, eps", [(2, 1, 0.0), (2, 1, 0.5), (6, 2, 0.34), (4, 1, None)])
def test_pair_epsilon_range(case, n, eps):
    with pytest.raises(ValueError):
        sc.PairSpec(case, n, eps)


def test_affine_homotopy_cutoff_to_identity():
    n = 2
    phi = make_cutoff(0.2)
    xs = sc.variables(n + 1)
    t = xs[n]
    H = sc.smooth_map(n + 1, tuple((1 - t) * phi.expr(x) + t * x for x in xs[:n]))
    f = sc.smooth_map(n, tuple(phi.expr(x) for x in sc.variables(n)))
    P = sc.pair(2, n, 0.2)
    assert sc.verify_homotopy(H, f, sc.identity_map(n), P, budget=500).passed


def test_constant_homotopy_against_other_end_fails():
    n = 2
    f = sc.smooth_map(n, tuple(make_cutoff(0.2).expr(x) for x in sc.variables(n)))
    H = sc.smooth_map(n + 1, f.outputs)
    assert not sc.verify_homotopy(H, f, sc.identity_map(n), sc.pair(2, n, 0.2), budget=200).passed


def test_trivial_blend_homotopy():
    n = 2
    f = sc.smooth_map(n, tuple(make_cutoff(0.2).expr(x) for x in sc.variables(n)))
    t = coord(n)
    H = sc.smooth_map(n + 1, tuple((1 - t) * e + t * e for e in f.outputs))
    assert sc.verify_homotopy(H, f, f, sc.pair(2, n, 0.2), budget=200).passed


def test_homotopy_arity_mismatch():
    with pytest.raises(ValueError):
        sc.verify_homotopy(sc.identity_map(2), sc.identity_map(2), sc.identity_map(2), sc.pair(1, 2))


def test_boundary_sampler_is_stratified():
    P = sc.pair(1, 2)
    X = P.sample_boundary(np.random.default_rng(0), 400)
    on = [(np.abs(X[:, i] - side) == 0).sum() for i in range(2) for side in (0, 1)]
    assert min(on) >= 100


def test_affine_normalize():
    P = sc.pair(5, 2)
    X = P.normalize([[0.2, 0.3, 0.5]])
    assert X.sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        P.normalize([[0.2, 0.3, 0.6]])
