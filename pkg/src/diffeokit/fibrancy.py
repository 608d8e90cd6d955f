"""Horn fillers and filling obstructions for a few diffeological spaces.

Horns here are the coequalizer Λⁿ of the n coordinate hyperplanes of Rⁿ.
A map out of it is a family of pieces f_i : R^{n-1} -> R^m, piece i living on
{x_i = 0} in the remaining coordinates, that agree on pairwise intersections.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np
import sympy

from . import kernels
from .realize import RealPoint, realize, same_class
from .report import TOL_EXACT, TOL_FD, VerificationReport
from .simplicial import SimplexRef, SimplicialSet
from .smoothcalc import (Expr, SmoothMap, check_epsilon, check_gradient_fd, const, coord,
                         cos, eval_jet2, expr_to_dict, lift, make_cutoff, piecewise, sin, smooth_map,
                         substitute, total)

COMPAT_TOL = 1e-12


class LiftError(ValueError):
    """Circle-valued horn data that cannot be lifted compatibly to R."""


# -- generated diffeologies --------------------------------------------------------------

@dataclass(frozen=True)
class GeneratedDiffeology:
    """The smallest diffeology on R^carrier_dim containing the given plots."""

    name: str
    carrier_dim: int
    generators: tuple
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        for g in self.generators:
            if g.arity_out != self.carrier_dim:
                raise ValueError(f"generator {g.name or g} lands in R^{g.arity_out}, "
                                 f"not R^{self.carrier_dim}")

    @property
    def rank_bound(self) -> int:
        """A plot factoring locally through a generator has rank at most this."""
        return max((g.arity_in for g in self.generators), default=0)


def hyperplane_inclusion(n: int, i: int) -> SmoothMap:
    """R^{n-1} -> R^n inserting 0 in slot i."""
    xs = iter(range(n - 1))
    return smooth_map(n - 1, [const(0.0) if k == i else coord(next(xs)) for k in range(n)],
                      f"incl[{i}]")


def coordinate_plane_diffeology(n: int) -> GeneratedDiffeology:
    """R^n with the diffeology generated by the coordinate hyperplane inclusions."""
    return GeneratedDiffeology(f"coordinate_planes({n})", n,
                               tuple(hyperplane_inclusion(n, i) for i in range(n)),
                               {"presentation": "coequalizer"})


def squared_norm_diffeology(n: int) -> GeneratedDiffeology:
    """The half-line generated by x -> |x|^2 on R^n."""
    x = [coord(i) for i in range(n)]
    g = smooth_map(n, [total([xi * xi for xi in x])], f"sqnorm({n})")
    flags = {"presentation": "generated"}
    if n == 1:
        flags["matches_subspace_halfline"] = True
    return GeneratedDiffeology(f"X_{n}", 1, (g,), flags)


# -- horn data ---------------------------------------------------------------------------

def face_embedding(n: int, i: int, j: int):
    """Coordinates of {x_i = x_j = 0} (in R^{n-2}) inside piece i's chart R^{n-1}."""
    rest = [k for k in range(n) if k not in (i, j)]
    chart = [k for k in range(n) if k != i]
    return [rest.index(k) if k != j else None for k in chart]


def _embed(points, slots):
    N = points.shape[0]
    out = np.zeros((N, len(slots)))
    for c, s in enumerate(slots):
        if s is not None:
            out[:, c] = points[:, s]
    return out


@dataclass(frozen=True, eq=False)
class HornData:
    n: int
    pieces: tuple

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if len(self.pieces) != self.n:
            raise ValueError(f"need {self.n} pieces, got {len(self.pieces)}")
        m = {p.arity_out for p in self.pieces}
        if len(m) != 1:
            raise ValueError("pieces must share a target dimension")
        for p in self.pieces:
            if p.arity_in != self.n - 1:
                raise ValueError(f"pieces live on R^{self.n - 1}, got arity {p.arity_in}")

    @property
    def target_dim(self) -> int:
        return self.pieces[0].arity_out

    def check_compatibility(self, rng: np.random.Generator, count: int = 200,
                            scale: float = 2.0, tol: float = COMPAT_TOL) -> VerificationReport:
        """Pieces i, j agree on {x_i = x_j = 0}, relative to max(1, |value|)."""
        parts = []
        for i, j in combinations(range(self.n), 2):
            Z = rng.uniform(-scale, scale, size=(count, max(self.n - 2, 0)))
            if self.n == 2:
                Z = np.zeros((1, 0))
            a = self.pieces[i](_embed(Z, face_embedding(self.n, i, j)))
            b = self.pieces[j](_embed(Z, face_embedding(self.n, j, i)))
            res = np.abs(a - b).max(axis=1) / np.maximum(1.0, np.abs(a).max(axis=1))
            parts.append(VerificationReport.from_residuals(f"pieces[{i},{j}]", res, tol, points=Z))
        return VerificationReport.combine("horn_compatibility", parts)

    def to_dict(self) -> dict:
        return {"n": self.n, "pieces": [p.to_dict() for p in self.pieces]}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d) -> "HornData":
        return cls(int(d["n"]), tuple(SmoothMap.from_dict(p) for p in d["pieces"]))

    @classmethod
    def from_json(cls, text: str) -> "HornData":
        return cls.from_dict(json.loads(text))


def restrict_to_horn(G: SmoothMap) -> HornData:
    """The horn obtained by restricting a global map to the coordinate hyperplanes."""
    n = G.arity_in
    return HornData(n, tuple(G.compose(hyperplane_inclusion(n, i)) for i in range(n)))


# -- the abelian filler ------------------------------------------------------------------

def _filler_sign(n: int, k: int) -> int:
    return (-1) ** (n - k + 1)


def abelian_horn_filler(F: HornData, n: int | None = None, rng: np.random.Generator | None = None,
                        validate: bool = True) -> SmoothMap:
    """Inclusion-exclusion extension of a horn into a vector space.

    Sums sign(k) * F(P_S x) over proper subsets S, |S| = k, where P_S keeps
    the coordinates in S and zeroes the rest.  P_S x lies on {x_j = 0} for
    the smallest j outside S, and that piece is used.
    """
    n = F.n if n is None else n
    if n != F.n:
        raise ValueError(f"horn data has n={F.n}, asked to fill n={n}")
    if validate:
        rep = F.check_compatibility(rng if rng is not None else np.random.default_rng(0))
        if not rep.passed:
            raise ValueError(f"incompatible horn data: {rep.failing()} "
                             f"(residual {rep.max_residual:.3e})")
    m = F.target_dim
    acc = [None] * m
    for k in range(n - 1, -1, -1):
        sign = _filler_sign(n, k)
        for S in combinations(range(n), k):
            j = min(set(range(n)) - set(S))
            args = [coord(c) if c in S else const(0.0) for c in range(n) if c != j]
            term = substitute(F.pieces[j].outputs, args)
            for r in range(m):
                if acc[r] is None:
                    acc[r] = term[r] if sign > 0 else -term[r]
                else:
                    acc[r] = acc[r] + term[r] if sign > 0 else acc[r] - term[r]
    return SmoothMap(n, tuple(acc), f"abelian_filler({n})")


def sample_hyperplanes(n: int, rng: np.random.Generator, count: int, scale: float = 2.0) -> list:
    """Per hyperplane i: chart points Z (count, n-1) and their images X in R^n."""
    out = []
    for i in range(n):
        Z = rng.uniform(-scale, scale, size=(count, n - 1))
        X = np.insert(Z, i, 0.0, axis=1)
        out.append((Z, X))
    return out


def check_filler_restriction(filler: SmoothMap, F: HornData, rng: np.random.Generator,
                             count: int = 1000, tol: float = TOL_EXACT) -> VerificationReport:
    parts = []
    for i, (Z, X) in enumerate(sample_hyperplanes(F.n, rng, count)):
        res = np.abs(filler(X) - F.pieces[i](Z)).max(axis=1)
        parts.append(VerificationReport.from_residuals(f"restriction[{i}]", res, tol, points=X))
    return VerificationReport.combine("filler_restriction", parts)


# -- the circle as a two-triangle complex --------------------------------------------------

def circle_complex() -> SimplicialSet:
    """Triangles A, B; edge a = A d2 = B d0, edge b = A d0 = B d2.

    Vertex classes: x = {E, F}, y = {G, H} with A = (E, G, F), B = (G, F, H).
    """
    faces = {
        "a": (SimplexRef("y"), SimplexRef("x")),
        "b": (SimplexRef("x"), SimplexRef("y")),
        "c": (SimplexRef("x"), SimplexRef("x")),
        "d": (SimplexRef("y"), SimplexRef("y")),
        "A": (SimplexRef("b"), SimplexRef("c"), SimplexRef("a")),
        "B": (SimplexRef("a"), SimplexRef("d"), SimplexRef("b")),
    }
    return SimplicialSet((("x", "y"), ("a", "b", "c", "d"), ("A", "B")), faces,
                         name="circle_model")


def _sigma_expr(shift: float):
    x, _, z = (coord(i) for i in range(3))
    arg = math.pi * (shift + z - x)
    return smooth_map(3, [cos(arg), sin(arg)], f"sigma[{'AB'[int(shift)]}]")


def circle_model():
    """(complex, {cell: map to the unit circle in R^2}) for the two top cells."""
    c = realize(circle_complex())
    return c, {"A": _sigma_expr(0.0), "B": _sigma_expr(1.0)}


def sigma(p: RealPoint) -> np.ndarray:
    """The circle value of a point on a top cell, as (cos, sin)."""
    _, maps = _CIRCLE
    return maps[p.cell.gen](np.asarray(p.coords))


_CIRCLE = circle_model()


def circle_section(theta, epsilon: float = 0.2):
    """s(e^{i pi theta}) as RealPoint(s); accepts a scalar or an array."""
    eps = check_epsilon(epsilon)
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    cells, coords = kernels.circle_section(th, eps)
    pts = [RealPoint.make("AB"[int(k)], x) for k, x in zip(cells, coords)]
    return pts[0] if np.ndim(theta) == 0 else pts


def section_map(cell: str, epsilon: float = 0.2, blend: bool = True) -> SmoothMap:
    """The section on one cell as a smooth map of theta.

    On A the parameter is u = theta, on B it is u = theta - 1.  Without the
    blend R(u) = 1 - |u| everywhere, which has a corner at u = 0.
    """
    u = coord(0) if cell == "A" else coord(0) - 1.0
    a = piecewise(u, u, -u)
    if blend:
        p = make_cutoff(epsilon).expr(2.0 * a)
        r = p * (1.0 - a) + (1.0 - p) * 0.5
    else:
        r = 1.0 - a
    return smooth_map(1, [(1.0 - u - r) / 2.0, r, (1.0 + u - r) / 2.0],
                      f"section[{cell}]")


# edge coordinates: (cell, dropped index) for each seam edge
SEAM_EDGES = {"b": (("A", 0), ("B", 2)), "a": (("A", 2), ("B", 0))}


def _seam_jets(epsilon, blend):
    """First jets of the edge coordinates on both sides of theta = 1/2 and -1/2."""
    out = []
    for edge, theta_a, theta_b in (("b", 0.5, 0.5), ("a", -0.5, 1.5)):
        (ca, ia), (cb, ib) = SEAM_EDGES[edge]
        ja = eval_jet2(section_map(ca, epsilon, blend), [theta_a])
        jb = eval_jet2(section_map(cb, epsilon, blend), [theta_b])
        va, ga = np.delete(ja.value, ia), np.delete(ja.gradient[:, 0], ia)
        vb, gb = np.delete(jb.value, ib), np.delete(jb.gradient[:, 0], ib)
        out.append((edge, float(max(np.abs(va - vb).max(), np.abs(ga - gb).max()))))
    return out


def verify_circle_retract(epsilon: float = 0.2, budget: int = 10**4,
                          rng: np.random.Generator | None = None,
                          blend: bool = True, tol: float = TOL_EXACT) -> VerificationReport:
    """sigma after s is the identity, the section crosses both seams consistently,
    and it is smooth (one-sided jets match at the seams, FD gradients agree)."""
    eps = check_epsilon(epsilon)
    rng = rng if rng is not None else np.random.default_rng(0)
    c, maps = _CIRCLE
    theta = rng.uniform(-0.5, 1.5, size=budget)
    parts = []

    if blend:
        cells, coords = kernels.circle_section(theta, eps)
    else:
        cells = (((theta + 0.5) % 2.0 - 0.5) > 0.5).astype(int)
        coords = np.empty((budget, 3))
        for k, name in enumerate("AB"):
            m = cells == k
            coords[m] = section_map(name, eps, blend=False)(theta[m, None])
    target = np.stack([np.cos(np.pi * theta), np.sin(np.pi * theta)], axis=1)
    image = np.empty_like(target)
    for k, name in enumerate("AB"):
        m = cells == k
        image[m] = maps[name](coords[m])
    parts.append(VerificationReport.from_residuals(
        "retract", np.abs(image - target).max(axis=1), tol, points=theta))
    parts.append(VerificationReport.from_residuals(
        "coordinate_sum", np.abs(coords.sum(axis=1) - 1.0), tol, points=theta))

    fails = []
    for th in (0.5, -0.5):
        for side in (-1e-13, 1e-13):
            p = circle_section(th + side, eps) if blend else None
            if p is not None and not same_class(c, p, circle_section(th, eps), tol=1e-9):
                fails.append(th + side)
    pa = RealPoint.make("A", (0.0, 0.5, 0.5))
    pb = RealPoint.make("B", (0.5, 0.5, 0.0))
    if not same_class(c, pa, pb):
        fails.append("edge b gluing")
    parts.append(VerificationReport.from_failures("seam_classes", fails, 5))

    for edge, r in _seam_jets(eps, blend):
        parts.append(VerificationReport.from_residuals(f"seam_jet[{edge}]", [r], TOL_FD))

    grid = np.concatenate([[0.0, 1.0], rng.uniform(-0.45, 0.45, size=64)])
    fd = []
    for k, name in enumerate("AB"):
        pts = grid if name == "A" else grid + 1.0
        rep = check_gradient_fd(section_map(name, eps, blend), pts[:, None])
        rep.name = f"gradient_fd[{name}]"
        fd.append(rep)
    parts.append(VerificationReport.combine("smoothness", fd))
    return VerificationReport.combine(f"circle_retract[eps={eps:g}]", parts,
                                      epsilon=eps, blend=blend)


def edge_riding_residual(epsilon: float, count: int = 1000) -> float:
    """max |first coordinate of c(theta)| on ((1-eps)/2, 1/2]; zero exactly when riding."""
    eps = check_epsilon(epsilon)
    lo = (1.0 - eps) / 2.0
    theta = np.linspace(lo, 0.5, count + 1)[1:]
    _, coords = kernels.circle_section(theta, eps)
    return float(np.abs(coords[:, 0]).max())


# -- the half-line obstruction ------------------------------------------------------------

def halfline_faces():
    """Piece on {x_k = 0}: (x_i - x_j)^2 in the remaining coordinates."""
    y0, y1 = coord(0), coord(1)
    return HornData(3, tuple(smooth_map(2, [(y0 - y1) ** 2], f"face[{k}]") for k in range(3)))


def halfline_candidate() -> SmoothMap:
    x = [coord(i) for i in range(3)]
    pairs = total([(x[i] - x[j]) ** 2 for i, j in combinations(range(3), 2)])
    return smooth_map(3, [pairs - total([xi * xi for xi in x])], "candidate")


@dataclass
class ObstructionReport:
    forced_hessian: list
    h2_exact: object
    h2_ad: float
    verdict: str

    def to_dict(self) -> dict:
        return {"forced_hessian": self.forced_hessian, "h2_exact": str(self.h2_exact),
                "h2_ad": self.h2_ad, "verdict": self.verdict}


def _forced_hessian_exact():
    y = sympy.symbols("y0 y1")
    face = (y[0] - y[1]) ** 2
    H = [[None] * 3 for _ in range(3)]
    for k in range(3):
        rest = [i for i in range(3) if i != k]
        for a, i in enumerate(rest):
            for b, j in enumerate(rest):
                v = sympy.Rational(sympy.diff(face, y[a], y[b]).subs({y[0]: 0, y[1]: 0}))
                if H[i][j] is not None and H[i][j] != v:
                    raise ArithmeticError(f"faces disagree on F_{i}{j}")
                H[i][j] = v
    return H


def _forced_hessian_ad(F: HornData):
    H = np.full((3, 3), np.nan)
    for k in range(3):
        emb = F.pieces[k].compose(
            smooth_map(3, [coord(i) for i in range(3) if i != k]))
        Hk = eval_jet2(emb, np.zeros(3)).hessian
        rest = [i for i in range(3) if i != k]
        for i in rest:
            for j in rest:
                if not np.isnan(H[i, j]) and abs(H[i, j] - Hk[i, j]) > 1e-12:
                    raise ArithmeticError(f"faces disagree on F_{i}{j}")
                H[i, j] = Hk[i, j]
    return H


def halfline_obstruction() -> ObstructionReport:
    """Second-order jets at 0 forced by the faces, and h''(0) for h(t) = F(t,t,t).

    A smooth non-negative extension would need h''(0) >= 0 since h(0) = 0.
    """
    Hx = _forced_hessian_exact()
    h2 = sum(sum(row, sympy.Integer(0)) for row in Hx)
    Ha = _forced_hessian_ad(halfline_faces())
    h2_ad = float(Ha.sum())
    verdict = ("no non-negative smooth extension" if h2 < 0
               else "second-order test inconclusive")
    return ObstructionReport([[int(v) for v in row] for row in Hx],
                             Fraction(int(h2.p), int(h2.q)), h2_ad, verdict)


# -- the rank obstruction ------------------------------------------------------------------

def rank_obstruction(F: SmoothMap, plots: GeneratedDiffeology | None, n: int,
                     m: int | None = None, rng: np.random.Generator | None = None,
                     count: int = 200, tol: float = TOL_EXACT) -> VerificationReport:
    """A map that is the identity on each coordinate hyperplane has derivative
    the identity at 0 (for n >= 2, every e_i lies in some hyperplane).  If it
    factors through m-dimensional plots, its rank is at most m.  The report
    passes when the two demands contradict each other.
    """
    if F.arity_in != n or F.arity_out != n:
        raise ValueError(f"expected a map R^{n} -> R^{n}")
    rng = rng if rng is not None else np.random.default_rng(0)
    if m is None and plots is not None:
        m = plots.rank_bound
    J = eval_jet2(F, np.zeros(n)).gradient.reshape(n, n)
    measured = int(np.linalg.matrix_rank(J, tol=1e-9))
    resid = 0.0
    for _, X in sample_hyperplanes(n, rng, count):
        resid = max(resid, float(np.abs(F(X) - X).max()))
    demanded = n if n >= 2 else 0
    contradiction = m is not None and m < demanded
    return VerificationReport(
        "rank_obstruction", 0.0 if contradiction else 1.0, 0.0, count * n,
        details={"measured_rank": measured, "demanded_rank": demanded, "rank_bound": m,
                 "hyperplane_residual": resid, "identity_on_hyperplanes": resid <= tol,
                 "contradiction": contradiction,
                 "plots": plots.name if plots is not None else None})


# -- lifting through R -> S^1 -------------------------------------------------------------

def circle_piece(n_in: int, phase: Expr, name: str = "") -> SmoothMap:
    """t -> (cos 2 pi a(t), sin 2 pi a(t))."""
    arg = 2.0 * math.pi * lift(phase)
    return smooth_map(n_in, [cos(arg), sin(arg)], name)


def _phase_of(piece: SmoothMap) -> Expr:
    c, s = piece.outputs if piece.arity_out == 2 else (None, None)
    if c is None or c.op != "cos" or s.op != "sin" or \
            expr_to_dict(c.args[0]) != expr_to_dict(s.args[0]):
        raise LiftError(f"piece {piece.name or piece} is not of the form (cos g, sin g)")
    return c.args[0] * (1.0 / (2.0 * math.pi))


def _unwrap_check(piece: SmoothMap, phase: SmoothMap, axis: int, span: float, steps: int):
    t = np.linspace(0.0, span, steps)
    Z = np.zeros((steps, piece.arity_in))
    Z[:, axis] = t
    vals = piece(Z)
    ang = np.arctan2(vals[:, 1], vals[:, 0]) / (2 * math.pi)
    d = np.diff(ang)
    d -= np.round(d)
    if np.abs(d).max(initial=0.0) > 0.25:
        raise LiftError(f"phase step over a quarter turn along axis {axis}; refine the grid")
    unwrapped = ang[0] + np.concatenate([[0.0], np.cumsum(d)])
    sym = phase(Z)[:, 0]
    off = np.round(sym[0] - unwrapped[0])
    return float(np.abs(sym - off - unwrapped).max())


def lift_horn_through_bundle(b: HornData, n: int | None = None,
                             rng: np.random.Generator | None = None,
                             span: float = 2.0, steps: int = 2001) -> SmoothMap:
    """Fill a circle-valued horn by lifting to R, filling there and projecting.

    Each piece must be given as (cos 2 pi a_i, sin 2 pi a_i).  The lifts a_i
    are shifted by integers so that all agree at the origin, cross-checked
    against numeric unwrapping along the axes, and compared on the pairwise
    intersections before filling.
    """
    n = b.n if n is None else n
    if n != b.n or n not in (2, 3):
        raise ValueError("lifting is implemented for n in {2, 3}")
    rng = rng if rng is not None else np.random.default_rng(0)
    phases = [_phase_of(p) for p in b.pieces]
    maps = [SmoothMap(n - 1, (ph,)) for ph in phases]
    base = maps[0](np.zeros(n - 1))[0]
    lifted = []
    for ph, mp in zip(phases, maps):
        shift = float(np.round(mp(np.zeros(n - 1))[0] - base))
        lifted.append(SmoothMap(n - 1, (ph - shift,) if shift else (ph,)))
    for i, (p, mp) in enumerate(zip(b.pieces, lifted)):
        for axis in range(n - 1):
            err = _unwrap_check(p, mp, axis, span, steps)
            if err > 1e-9:
                raise LiftError(f"piece {i}: symbolic lift departs from the unwrapped "
                                f"phase by {err:.3e} along axis {axis}")
    lifts = HornData(n, tuple(lifted))
    rep = lifts.check_compatibility(rng, tol=1e-9)
    if not rep.passed:
        raise LiftError(f"lifted pieces disagree at an intersection: {rep.failing()} "
                        f"(residual {rep.max_residual:.3e}, witness {rep.witness})")
    filler = abelian_horn_filler(lifts, n, validate=False)
    return circle_piece(n, filler.outputs[0], f"circle_filler({n})")


# -- the D-open retraction -----------------------------------------------------------------

def dopen_retraction(n: int, delta: float = 0.5, epsilon: float = 0.2,
                     rng: np.random.Generator | None = None, count: int = 10**4):
    """h(x) = mu(x) x with mu = 1 - phi(prod x_i^2 / delta^2).

    Returns (h, report).  The report checks that h is the identity on the
    coordinate hyperplanes and that h(x) lies in V = {prod x_i^2 < delta^2}
    wherever mu(x) > 0.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    eps = check_epsilon(epsilon)
    rng = rng if rng is not None else np.random.default_rng(0)
    x = [coord(i) for i in range(n)]
    prod = x[0] * x[0]
    for xi in x[1:]:
        prod = prod * (xi * xi)
    mu = 1.0 - make_cutoff(eps).expr(prod * (1.0 / delta**2))
    h = smooth_map(n, [mu * xi for xi in x], f"dopen({n},{delta:g})")
    mu_map = smooth_map(n, [mu])

    parts = []
    X = np.concatenate([X for _, X in sample_hyperplanes(n, rng, max(count // n, 1))])
    parts.append(VerificationReport.from_residuals(
        "identity_on_hyperplanes", np.abs(h(X) - X).max(axis=1), TOL_EXACT, points=X))
    parts.append(VerificationReport.from_residuals(
        "idempotent_on_hyperplanes", np.abs(h(h(X)) - h(X)).max(axis=1), TOL_EXACT, points=X))
    scale = delta ** (1.0 / n)
    Y = rng.uniform(-2 * scale, 2 * scale, size=(count, n))
    m = mu_map(Y)[:, 0]
    hy = h(Y)
    inside = np.prod(hy**2, axis=1) < delta**2
    bad = (m > 0) & ~inside
    parts.append(VerificationReport.from_residuals(
        "support_in_V", bad.astype(float), 0.0, points=Y,
        live_fraction=float((m > 0).mean())))
    return h, VerificationReport.combine(f"dopen_retraction[n={n}]", parts,
                                         delta=delta, epsilon=eps)


# -- the loop-space retract ----------------------------------------------------------------

def default_psi(epsilon: float = 0.2) -> SmoothMap:
    """phi(2t) phi(2 - 2t): zero off (0, 1), equal to 1 at t = 1/2."""
    phi = make_cutoff(epsilon)
    t = coord(0)
    return smooth_map(1, [phi.expr(2.0 * t) * phi.expr(2.0 - 2.0 * t)], "psi")


def check_psi(psi: SmoothMap, count: int = 1000, tol: float = TOL_EXACT) -> VerificationReport:
    left = np.linspace(-2.0, 0.0, count)
    right = np.linspace(1.0, 3.0, count)
    parts = [
        VerificationReport.from_residuals("zero_left", np.abs(psi(left[:, None])[:, 0]), 0.0, left),
        VerificationReport.from_residuals("zero_right", np.abs(psi(right[:, None])[:, 0]), 0.0, right),
        VerificationReport.from_residuals("one_at_half", [abs(psi([0.5])[0] - 1.0)], tol),
    ]
    return VerificationReport.combine("psi_conditions", parts)


def loop_retract_H(n: int, psi: SmoothMap | None = None, rng: np.random.Generator | None = None,
                   count: int = 1000, tol: float = TOL_EXACT) -> VerificationReport:
    """H(y)(t) = psi(t) y sends the horn into its loop space, and evaluation at
    1/2 undoes it."""
    psi = psi if psi is not None else default_psi()
    pre = check_psi(psi)
    if not pre.passed:
        raise ValueError(f"psi violates its conditions: {pre.failing()}")
    rng = rng if rng is not None else np.random.default_rng(0)
    t = coord(0)
    ps = psi.outputs[0]
    H = smooth_map(n + 1, [substitute([ps], [t])[0] * coord(i + 1) for i in range(n)], "H")
    parts = [pre]
    for i, (_, Y) in enumerate(sample_hyperplanes(n, rng, count)):
        def at(s, Y=Y):
            return H(np.column_stack([np.full(len(Y), s), Y]))
        parts.append(VerificationReport.from_residuals(
            f"ev_half[{i}]", np.abs(at(0.5) - Y).max(axis=1), tol, points=Y))
        parts.append(VerificationReport.from_residuals(
            f"ends[{i}]", np.maximum(np.abs(at(0.0)), np.abs(at(1.0))).max(axis=1), 0.0, points=Y))
    return VerificationReport.combine(f"loop_retract[n={n}]", parts)


# -- corpus generators ---------------------------------------------------------------------

def random_polynomial(n: int, rng: np.random.Generator, degree: int = 3, m: int = 1,
                      terms: int = 6) -> SmoothMap:
    """A global map with random monomials of total degree <= degree."""
    outs = []
    for _ in range(m):
        acc = const(float(rng.normal()))
        for _ in range(terms):
            mono = const(float(rng.normal()))
            for i in rng.integers(0, n, size=rng.integers(1, degree + 1)):
                mono = mono * coord(int(i))
            acc = acc + mono
        outs.append(acc)
    return smooth_map(n, outs, "random_polynomial")


def random_multilinear(n: int, rng: np.random.Generator):
    """(G, c): a random multilinear G and its coefficient c of x_1 ... x_n."""
    acc = const(float(rng.normal()))
    top = 0.0
    for k in range(1, n + 1):
        for S in combinations(range(n), k):
            c = float(rng.normal())
            mono = const(c)
            for i in S:
                mono = mono * coord(i)
            acc = acc + mono
            if k == n:
                top = c
    return smooth_map(n, [acc], "random_multilinear"), top


def random_affine_phase_horn(n: int, rng: np.random.Generator) -> HornData:
    """Circle-valued pieces e^{2 pi i a_i} with affine phases agreeing on overlaps.

    The phases restrict a global affine phase, then each piece gets its own
    integer shift so the lifting step has offsets to remove.
    """
    w = rng.normal(size=n)
    b = float(rng.uniform(0, 1))
    pieces = []
    for i in range(n):
        rest = [k for k in range(n) if k != i]
        phase = const(b + float(rng.integers(-3, 4)))
        for c, k in enumerate(rest):
            phase = phase + float(w[k]) * coord(c)
        pieces.append(circle_piece(n - 1, phase, f"phase[{i}]"))
    return HornData(n, tuple(pieces))


def mismatched_phase_horn() -> HornData:
    """On Λ^3, pieces 0 and 1 meet on the x_3 axis with phases x_3 and 2 x_3."""
    y0, y1 = coord(0), coord(1)
    return HornData(3, (circle_piece(2, y1, "p0"), circle_piece(2, 2.0 * y1, "p1"),
                        circle_piece(2, 0.5 * y0, "p2")))


def check_circle_seams(rng: np.random.Generator, count: int = 1000,
                       tol: float = 1e-12) -> VerificationReport:
    """sigma_A and sigma_B agree on both glued edges."""
    _, maps = _CIRCLE
    s = rng.uniform(-2, 3, size=count)
    zero = np.zeros_like(s)
    pairs = {
        "a": (np.stack([1 - s, s, zero], 1), np.stack([zero, 1 - s, s], 1)),
        "b": (np.stack([zero, 1 - s, s], 1), np.stack([1 - s, s, zero], 1)),
    }
    parts = []
    for edge, (pa, pb) in pairs.items():
        res = np.abs(maps["A"](pa) - maps["B"](pb)).max(axis=1)
        parts.append(VerificationReport.from_residuals(f"seam[{edge}]", res, tol, points=s))
    return VerificationReport.combine("circle_seams", parts)
