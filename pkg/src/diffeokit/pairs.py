"""Explicit maps of pairs, the homotopies between their composites, and the
two product formulas (the prism map beta and the two-branch map h).

Case ids: 1..9 as in :mod:`diffeokit.smoothcalc`; the chain for the sphere
uses the auxiliary ids ``"SH"`` and ``"SH*"``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .report import TOL_EXACT, VerificationReport
from .smoothcalc import (
    PairSpec, SmoothMap, coord, const, identity_map, make_cutoff, pair,
    piecewise, sqrt, total, variables, verify_homotopy, verify_map_of_pairs,
    check_epsilon,
)

SUPPORTED_PAIRS = ((1, 2), (3, 2), (4, 2), (6, 2), (5, 6), (8, 2), (7, 8), (9, "SH"), ("SH*", 2))
DIRECTIONS = ("forward", "backward", "homotopy_source", "homotopy_target")
SPHERE_CHAIN = ((9, "SH"), ("SH*", 2))
DILATION_CANDIDATES = tuple(2.0**k for k in range(1, 21))


@dataclass(frozen=True, eq=False)
class EquidefMapSpec:
    """One constructed map (or homotopy) together with the pairs it connects."""

    case_pair: tuple
    direction: str
    n: int
    epsilon: float
    map: SmoothMap
    source: PairSpec
    target: PairSpec
    params: dict = field(default_factory=dict)


def _normalize_pair(case_pair):
    if isinstance(case_pair, str):
        case_pair = tuple(int(c) if c.strip().isdigit() else c.strip() for c in case_pair.split(","))
    if isinstance(case_pair, int):
        case_pair = (case_pair,)
    case_pair = tuple(case_pair)
    if case_pair not in SUPPORTED_PAIRS:
        raise ValueError(f"unsupported case pair {case_pair}; choose from {SUPPORTED_PAIRS}")
    return case_pair


def _epsilon_bound(case_pair, n):
    return 1.0 / (n + 1) if 6 in case_pair else 0.5


def affine_homotopy(a: SmoothMap, b: SmoothMap) -> SmoothMap:
    """(x, t) -> (1-t) a(x) + t b(x)."""
    if a.arity_in != b.arity_in or a.arity_out != b.arity_out:
        raise ValueError("affine homotopy needs maps with the same charts")
    t = coord(a.arity_in)
    return SmoothMap(a.arity_in + 1, tuple((1 - t) * ea + t * eb
                                           for ea, eb in zip(a.outputs, b.outputs)))


# -- building blocks -----------------------------------------------------------

def _coordinatewise_cutoff(n, eps):
    phi = make_cutoff(eps)
    return SmoothMap(n, tuple(phi.expr(x) for x in variables(n)), "phi^n")


def _dilate(xs, mu, centre):
    return [centre + mu * (x - centre) for x in xs]


def _normalize_sum(vals):
    s = total(vals)
    return [v / s for v in vals]


def _sphere_parts(n):
    xs = variables(n + 1)
    return xs[:n], xs[n]


def _stereo_south(p_flat, z):
    """Projection from the south pole: N -> 0, equator -> unit sphere."""
    return [p / (1 + z) for p in p_flat]


def _stereo_north(p_flat, z):
    """Projection from the north pole: south pole -> 0, H minus N -> |v| >= 1."""
    return [p / (1 - z) for p in p_flat]


def _inverse_south(w):
    r2 = total([u * u for u in w])
    return [2 * u / (1 + r2) for u in w] + [(1 - r2) / (1 + r2)]


def _inverse_north(v):
    r2 = total([u * u for u in v])
    return [2 * u / (1 + r2) for u in v] + [(r2 - 1) / (r2 + 1)]


# -- constructions per case pair ------------------------------------------------

def _build_cutoff_pair(case_pair, n, eps, **_):
    src, dst = pair(case_pair[0], n, eps), pair(2, n, eps)
    fwd = identity_map(n)
    bwd = _coordinatewise_cutoff(n, eps)
    return src, dst, fwd, bwd, None, None, {}


def _dilation_map(n, lam):
    xs = variables(n + 1)
    b = 1.0 / (n + 1)
    return SmoothMap(n + 1, tuple(_dilate(xs[1:], lam, b)))


def _build_simplex_to_cube(case_pair, n, eps, budget=400, rng=None, **_):
    src, dst = pair(6, n, eps), pair(2, n, eps)
    rng = rng if rng is not None else np.random.default_rng(0)
    state = rng.bit_generator.state
    lam, tried = None, []
    for cand in DILATION_CANDIDATES:
        rng.bit_generator.state = state
        rep = verify_map_of_pairs(_dilation_map(n, cand), src, dst, budget, rng)
        tried.append(cand)
        if rep.passed:
            lam = cand
            break
    if lam is None:
        raise RuntimeError(f"no dilation factor up to {tried[-1]} gives a map of pairs")
    ys = variables(n)
    fwd = _dilation_map(n, lam)
    bwd = SmoothMap(n, tuple([1 - total(ys)] + ys), "psi^-1")
    b = 1.0 / (n + 1)
    xs = variables(n + 1)
    t = coord(n + 1)
    mu = (1 - t) * lam + t
    h_src = SmoothMap(n + 2, tuple(_dilate(xs, mu, b)))
    t2 = coord(n)
    mu2 = (1 - t2) * lam + t2
    h_tgt = SmoothMap(n + 1, tuple(_dilate(ys, mu2, b)))
    return src, dst, fwd, bwd, h_src, h_tgt, {"dilation": lam, "dilations_tried": tried}


def _alpha_map(n, eps):
    rho = make_cutoff(eps)
    xs = variables(n + 1)
    t = coord(n + 1)
    alpha = [t * x + (1 - t) * rho.expr(x) for x in xs]
    return SmoothMap(n + 2, tuple(_normalize_sum(alpha))), SmoothMap(n + 2, (total(alpha),))


def _build_boundary_simplex(case_pair, n, eps, **_):
    src, dst = pair(5, n), pair(6, n, eps)
    rho = make_cutoff(eps)
    xs = variables(n + 1)
    fwd = identity_map(n + 1)
    bwd = SmoothMap(n + 1, tuple(_normalize_sum([rho.expr(x) for x in xs])), "u.rho")
    h, _ = _alpha_map(n, eps)
    return src, dst, fwd, bwd, h, h, {"rho_epsilon": eps}


def _ball_constants(n, eps):
    a = 0.5 - eps
    s = math.sqrt(n) / (2 * (1 - eps))
    ratio = (1 - eps / 2) / (1 - eps)
    k = 0.5 * a * a * (ratio * ratio - 1)
    return a, s, k


def _build_ball_to_cube(case_pair, n, eps, **_):
    src, dst = pair(8, n, eps), pair(2, n, eps)
    a, s, k = _ball_constants(n, eps)
    xs = variables(n)
    fwd = SmoothMap(n, tuple(0.5 + s * x for x in xs), "scale")
    ys = [y - 0.5 for y in variables(n)]
    r = sqrt(total([y * y for y in ys]) + k)
    bwd = SmoothMap(n, tuple((1 - eps / 2) * y / r for y in ys), "squash")
    return src, dst, fwd, bwd, None, None, {"scale": s, "squash_k": k}


def _radial_map(n, eps, c=1.0):
    phi = make_cutoff(eps)
    xs = variables(n)
    q = total([x * x for x in xs])
    psi = phi.expr(q * ((1 - eps) / (1 - eps) ** 2))
    den = sqrt(q + c * (1 - psi))
    return SmoothMap(n, tuple(x / den for x in xs), "radial")


def _build_ball_pairs(case_pair, n, eps, **_):
    src, dst = pair(7, n), pair(8, n, eps)
    return src, dst, identity_map(n), _radial_map(n, eps), None, None, {"radial_c": 1.0}


def _raise_equator(n, eps, t=None, q_top=2.0):
    """Sphere map collapsing H to N; identity below z = -1/2.

    In the south chart w, scale by kappa(|w|^2) = phi((|w|^2 - 1)/(q_top - 1));
    with ``t`` the scale is (1-t) kappa + t.
    """
    phi = make_cutoff(eps)
    p, z = _sphere_parts(n)
    w = _stereo_south(p, z)
    q = total([u * u for u in w])
    kappa = phi.expr((q - 1) / (q_top - 1))
    if t is not None:
        kappa = (1 - t) * kappa + t
    moved = _inverse_south([kappa * u for u in w])
    ident = list(p) + [z]
    return [piecewise(z + 0.5, m, i) for m, i in zip(moved, ident)]


def _build_sphere_collapse(case_pair, n, eps, **_):
    if n not in (1, 2):
        raise ValueError("the sphere pairs are implemented for n in {1, 2}")
    src, dst = pair(9, n), pair("SH", n)
    fwd = identity_map(n + 1)
    bwd = SmoothMap(n + 1, tuple(_raise_equator(n, eps)), "raise_equator")
    h = SmoothMap(n + 2, tuple(_raise_equator(n, eps, coord(n + 1))))
    return src, dst, fwd, bwd, h, h, {"equator_q_top": 2.0}


def _build_punctured_sphere(case_pair, n, eps, **_):
    if n not in (1, 2):
        raise ValueError("the sphere pairs are implemented for n in {1, 2}")
    src, dst = pair("SH*", n), pair(2, n, eps)
    a = 0.5 - eps
    s, s_inv = math.sqrt(n) / 2, 1.0 / a
    mu = s * s_inv
    p, z = _sphere_parts(n)
    v = _stereo_north(p, z)
    fwd = SmoothMap(n + 1, tuple(0.5 + s * u for u in v), "stereo_scale")
    ys = variables(n)
    bwd = SmoothMap(n, tuple(_inverse_north([s_inv * (y - 0.5) for y in ys])), "scale_stereo")
    t = coord(n + 1)
    mu_t = (1 - t) * mu + t
    h_src = SmoothMap(n + 2, tuple(_inverse_north([mu_t * u for u in v])))
    t2 = coord(n)
    mu_t2 = (1 - t2) * mu + t2
    h_tgt = SmoothMap(n + 1, tuple(0.5 + mu_t2 * (y - 0.5) for y in ys))
    return src, dst, fwd, bwd, h_src, h_tgt, {"scale": s, "inverse_scale": s_inv}


_BUILDERS = {
    (1, 2): _build_cutoff_pair,
    (3, 2): _build_cutoff_pair,
    (4, 2): _build_cutoff_pair,
    (6, 2): _build_simplex_to_cube,
    (5, 6): _build_boundary_simplex,
    (8, 2): _build_ball_to_cube,
    (7, 8): _build_ball_pairs,
    (9, "SH"): _build_sphere_collapse,
    ("SH*", 2): _build_punctured_sphere,
}


def _construct(case_pair, n, epsilon, budget=400, rng=None):
    case_pair = _normalize_pair(case_pair)
    if n < 1:
        raise ValueError("n must be at least 1")
    eps = check_epsilon(epsilon, _epsilon_bound(case_pair, n))
    src, dst, fwd, bwd, h_src, h_tgt, params = _BUILDERS[case_pair](
        case_pair, n, eps, budget=budget, rng=rng)
    if h_src is None:
        h_src = affine_homotopy(bwd.compose(fwd), identity_map(src.ambient_dim))
    if h_tgt is None:
        h_tgt = affine_homotopy(fwd.compose(bwd), identity_map(dst.ambient_dim))
    return case_pair, eps, src, dst, fwd, bwd, h_src, h_tgt, params


def build_equidef_map(case_pair, direction: str, n: int, epsilon: float,
                      budget: int = 400, rng=None) -> EquidefMapSpec:
    """The map (or homotopy) of the given direction for a supported case pair.

    ``forward`` goes from the first pair to the second, ``backward`` the other
    way.  ``homotopy_source`` runs from backward-after-forward (t=0) to the
    identity (t=1) on the first pair; ``homotopy_target`` does the same for
    forward-after-backward on the second pair.
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}")
    cp, eps, src, dst, fwd, bwd, h_src, h_tgt, params = _construct(
        case_pair, n, epsilon, budget, rng)
    if direction == "forward":
        return EquidefMapSpec(cp, direction, n, eps, fwd, src, dst, params)
    if direction == "backward":
        return EquidefMapSpec(cp, direction, n, eps, bwd, dst, src, params)
    if direction == "homotopy_source":
        return EquidefMapSpec(cp, direction, n, eps, h_src, src, src, params)
    return EquidefMapSpec(cp, direction, n, eps, h_tgt, dst, dst, params)


def positivity_guard(n: int, eps: float, src: PairSpec, budget: int, rng,
                     grid: int = 33) -> VerificationReport:
    """min over samples and t of sum_i alpha_t(x_i); must be > 0."""
    _, denom = _alpha_map(n, eps)
    k = budget // 2
    X = np.concatenate([src.sample_domain(rng, k), src.sample_boundary(rng, budget - k)])
    ts = np.linspace(0, 1, grid)
    TX = np.concatenate([np.concatenate([X, np.full((len(X), 1), t)], axis=1) for t in ts])
    sums = denom(TX)[:, 0]
    delta = float(sums.min())
    return VerificationReport("positivity_guard", 0.0 if delta > 0 else 1.0, 0.0,
                              len(TX), None if delta > 0 else TX[int(np.argmin(sums))].tolist(),
                              {"delta": delta})


def verify_pair_equivalence(case_pair, n: int, epsilon: float, budget: int = 500,
                            rng=None, tol: float = TOL_EXACT) -> VerificationReport:
    """Both maps are maps of pairs and both composites are homotopic to the
    identity through maps of pairs.  ``9`` runs the sphere chain."""
    rng = rng if rng is not None else np.random.default_rng(0)
    if case_pair in (9, (9,), "9"):
        if n not in (1, 2):
            raise ValueError("the sphere pairs are implemented for n in {1, 2}")
        parts = [verify_pair_equivalence(cp, n, epsilon, budget, rng, tol) for cp in SPHERE_CHAIN]
        return VerificationReport.combine(f"equivalence[9,n={n}]", parts)
    cp, eps, src, dst, fwd, bwd, h_src, h_tgt, params = _construct(case_pair, n, epsilon, budget, rng)
    parts = [
        verify_map_of_pairs(fwd, src, dst, budget, rng, tol),
        verify_map_of_pairs(bwd, dst, src, budget, rng, tol),
        verify_homotopy(h_src, bwd.compose(fwd), identity_map(src.ambient_dim), src, budget, rng, tol=tol),
        verify_homotopy(h_tgt, fwd.compose(bwd), identity_map(dst.ambient_dim), dst, budget, rng, tol=tol),
    ]
    if cp == (5, 6):
        parts.append(positivity_guard(n, eps, dst, budget, rng))
        params = dict(params, delta=parts[-1].details["delta"])
    label = ",".join(map(str, cp))
    return VerificationReport.combine(f"equivalence[{label},n={n}]", parts, **params)


# -- product formulas ------------------------------------------------------------

def prism_beta(n: int) -> SmoothMap:
    """(x_0..x_n, t) -> (x_0..x_{n-1}, t x_n, (1-t) x_n)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    xs = variables(n + 1)
    t = coord(n + 1)
    return SmoothMap(n + 2, tuple(xs[:n] + [t * xs[n], (1 - t) * xs[n]]), "beta")


def coface(n: int, i: int) -> SmoothMap:
    """A^{n-1} -> A^n inserting a zero coordinate at position i."""
    if not 0 <= i <= n:
        raise ValueError(f"face index {i} out of range 0..{n}")
    xs = variables(n)
    return SmoothMap(n, tuple(xs[:i] + [const(0.0)] + xs[i:]), f"d^{i}")


def face_of(h: SmoothMap, i: int) -> SmoothMap:
    """The i-th face d_i h = h . d^i of a map on A^n (arity n+1)."""
    return h.compose(coface(h.arity_in - 1, i))


def _check_stationary(f, n, eps, basepoint, budget, rng, label):
    rep = verify_map_of_pairs(f, pair(6, n, eps), basepoint, budget, rng)
    if not rep.passed:
        raise ValueError(f"{label} is not constant on the eps-boundary: witness {rep.witness}")


def pair_product_h(f: SmoothMap, g: SmoothMap, n: int, epsilon: float = 0.2,
                   basepoint=None, budget: int = 400, rng=None) -> SmoothMap:
    """Two-branch map on A^{n+1} built from f and g, seam x_{n+1} = x_{n-1}.

    f and g are maps on A^n (arity n+1) that equal the basepoint on the
    eps-boundary; that precondition is checked by sampling.
    """
    if n < 1:
        raise ValueError("pair_product_h needs n >= 1")
    if f.arity_in != n + 1 or g.arity_in != n + 1 or f.arity_out != g.arity_out:
        raise ValueError("f and g must be maps on A^n with a common target")
    rng = rng if rng is not None else np.random.default_rng(0)
    base = np.zeros(f.arity_out) if basepoint is None else np.asarray(basepoint, float)
    _check_stationary(f, n, epsilon, base, budget, rng, "f")
    _check_stationary(g, n, epsilon, base, budget, rng, "g")
    x = variables(n + 2)
    head = x[: n - 1]
    args_f = head + [x[n] + 2 * x[n - 1], x[n + 1] - x[n - 1]]
    args_g = head + [x[n - 1] - x[n + 1], x[n] + 2 * x[n + 1]]
    ff = f.compose(SmoothMap(n + 2, tuple(args_f)))
    gg = g.compose(SmoothMap(n + 2, tuple(args_g)))
    sel = x[n + 1] - x[n - 1]
    return SmoothMap(n + 2, tuple(piecewise(sel, a, b) for a, b in zip(ff.outputs, gg.outputs)), "h")


def product_face_reparam(n: int) -> SmoothMap:
    """y -> (y_0..y_{n-2}, 2 y_{n-1}, y_n - y_{n-1}); d_n h = f after this when g is constant."""
    y = variables(n + 1)
    return SmoothMap(n + 1, tuple(y[: n - 1] + [2 * y[n - 1], y[n] - y[n - 1]]))


def sample_compact_simplex(rng, count: int, n: int) -> np.ndarray:
    """Uniform points of the closed standard n-simplex (all coordinates >= 0)."""
    return rng.dirichlet(np.ones(n + 1), size=count)


def check_product_faces(h: SmoothMap, f: SmoothMap, g: SmoothMap, n: int, rng,
                        count: int = 1000, basepoint=None, compact: bool = True,
                        tol: float = TOL_EXACT) -> VerificationReport:
    """Faces of h: basepoint for i < n-1, f at n-1, g at n+1.

    With ``compact`` the faces are sampled on the closed simplex; otherwise on
    the whole affine chart, where the two outer face identities break down.
    """
    base = np.zeros(f.arity_out) if basepoint is None else np.asarray(basepoint, float)
    if compact:
        Y = sample_compact_simplex(rng, count, n)
    else:
        Y = pair(5, n).sample_domain(rng, count)
    parts = []
    for i in range(n - 1):
        parts.append(VerificationReport.from_residuals(
            f"d{i}_is_basepoint", np.abs(face_of(h, i)(Y) - base).max(axis=1), tol, points=Y))
    parts.append(VerificationReport.from_residuals(
        f"d{n - 1}_is_f", np.abs(face_of(h, n - 1)(Y) - f(Y)).max(axis=1), tol, points=Y))
    parts.append(VerificationReport.from_residuals(
        f"d{n + 1}_is_g", np.abs(face_of(h, n + 1)(Y) - g(Y)).max(axis=1), tol, points=Y))
    region = "compact" if compact else "affine"
    return VerificationReport.combine(f"product_faces[n={n},{region}]", parts)


def bump_on_simplex(n: int, epsilon: float, weights=None) -> SmoothMap:
    """A test map A^n -> R^m vanishing on the eps-boundary: w * prod rho(x_i)."""
    rho = make_cutoff(epsilon)
    xs = variables(n + 1)
    prod = rho.expr(xs[0])
    for x in xs[1:]:
        prod = prod * rho.expr(x)
    w = np.atleast_1d(1.0 if weights is None else np.asarray(weights, float))
    return SmoothMap(n + 1, tuple(float(c) * prod for c in w))
