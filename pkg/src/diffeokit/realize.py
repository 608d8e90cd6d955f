"""Realization of a finite simplicial set as glued non-compact affine cells.

Each nondegenerate q-simplex contributes a cell with chart
A^q = {x in R^{q+1} : sum x = 1}.  Coordinates may be negative; a point with
a zero coordinate lives on a face, and a point on a degenerate simplex
s_j y is the point of y obtained by adding coordinates j and j+1.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product as iproduct
from math import comb

import numpy as np

from .report import VerificationReport
from .simplicial import SimplexRef, SimplicialSet, _as_ref

ZERO_SNAP = 1e-12
SUM_TOL = 1e-12


@dataclass(frozen=True)
class RealPoint:
    cell: SimplexRef
    coords: tuple

    @classmethod
    def make(cls, cell, coords) -> "RealPoint":
        return cls(_as_ref(cell), tuple(float(c) for c in coords))

    def __str__(self):
        return f"({self.cell}, {tuple(round(c, 12) for c in self.coords)})"

    def to_json(self):
        return {"cell": self.cell.to_json(), "coords": list(self.coords)}


def contract(word, coords: np.ndarray) -> np.ndarray:
    """Coordinates on the underlying generator of ``s_word y``.

    s_j adds coordinates j and j+1; the outermost degeneracy acts first.
    """
    x = np.asarray(coords, dtype=float)
    for j in word:
        x = np.concatenate([x[:j], [x[j] + x[j + 1]], x[j + 2:]])
    return x


def contraction_matrix(word, degree: int) -> np.ndarray:
    """Matrix form of :func:`contract` on R^{degree+1}."""
    return np.stack([contract(word, e) for e in np.eye(degree + 1)], axis=1)


def insertion_matrix(i: int, q: int) -> np.ndarray:
    """R^q -> R^{q+1} inserting a zero at position i."""
    m = np.zeros((q + 1, q))
    rows = [r for r in range(q + 1) if r != i]
    m[rows, range(q)] = 1.0
    return m


@dataclass(frozen=True, eq=False)
class CellComplex:
    """Cells of |A| with their face gluing.

    ``gluing[(cell, i)] = (target, M)``: the slice {x_i = 0} of ``cell``,
    written in the remaining q coordinates, maps to ``M @ y`` on the
    nondegenerate cell ``target.gen``.
    """

    source: SimplicialSet
    cells: tuple
    dims: dict
    gluing: dict = field(repr=False)

    @property
    def dim(self) -> int:
        return max(self.dims.values(), default=-1)

    def counts(self) -> tuple:
        out = [0] * (self.dim + 1)
        for d in self.dims.values():
            out[d] += 1
        return tuple(out)

    def to_dict(self) -> dict:
        return {
            "cells": [{"name": c, "dim": self.dims[c]} for c in self.cells],
            "gluing": [
                {"cell": c, "face": i, "target": ref.to_json(), "matrix": m.tolist()}
                for (c, i), (ref, m) in sorted(self.gluing.items(), key=lambda kv: (
                    self.cells.index(kv[0][0]), kv[0][1]))
            ],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def realize(a: SimplicialSet) -> CellComplex:
    cells = tuple(g for level in a.generators for g in level)
    dims = {g: a.gen_degree(g) for g in cells}
    gluing = {}
    for g in cells:
        q = dims[g]
        for i in range(q + 1 if q else 0):
            ref = a.faces[g][i]
            gluing[(g, i)] = (ref, contraction_matrix(ref.word, q - 1))
    return CellComplex(a, cells, dims, gluing)


def normal_form(c: CellComplex, p: RealPoint) -> RealPoint:
    """Canonical representative: nondegenerate cell, no zero coordinate."""
    a = c.source
    ref = _as_ref(p.cell)
    x = np.asarray(p.coords, dtype=float)
    if x.size != a.degree(ref) + 1:
        raise ValueError(f"{ref} needs {a.degree(ref) + 1} coordinates, got {x.size}")
    if abs(x.sum() - 1.0) > SUM_TOL:
        raise ValueError(f"coordinates must sum to 1 (got {x.sum()!r})")
    while True:
        if ref.word:
            x = contract(ref.word, x)
            ref = SimplexRef(ref.gen)
        x = np.where(np.abs(x) < ZERO_SNAP, 0.0, x)
        zeros = np.flatnonzero(x == 0.0)
        if len(x) == 1 or zeros.size == 0:
            break
        i = int(zeros[0])
        ref = a.face(i, ref)
        x = np.delete(x, i)
    if len(x) == 1:
        x = np.ones(1)  # a vertex has the single coordinate 1
    return RealPoint(ref, tuple(float(v) for v in x))


def same_class(c: CellComplex, p: RealPoint, q: RealPoint, tol: float = 1e-12) -> bool:
    a, b = normal_form(c, p), normal_form(c, q)
    return a.cell == b.cell and np.allclose(a.coords, b.coords, atol=tol, rtol=0)


def maximal_cells(c: CellComplex) -> list:
    below = set()
    for (g, _), (ref, _) in c.gluing.items():
        below.add(ref.gen)
    return [g for g in c.cells if g not in below]


def _closure(c: CellComplex, g: str) -> set:
    out, stack = set(), [g]
    while stack:
        h = stack.pop()
        for i in range(c.dims[h] + 1 if c.dims[h] else 0):
            r = c.gluing[(h, i)][0].gen
            if r not in out:
                out.add(r)
                stack.append(r)
    return out


@dataclass
class SeamReport:
    maximal: list
    seams: dict  # cell -> list of incident maximal cells

    def by_dim(self, dims) -> dict:
        out = {}
        for g in self.seams:
            out.setdefault(dims[g], []).append(g)
        return out

    def counts(self, dims) -> dict:
        return {d: len(v) for d, v in sorted(self.by_dim(dims).items())}


def seam_set(c: CellComplex) -> SeamReport:
    """Lower cells lying in the closure of two or more maximal cells."""
    top = maximal_cells(c)
    incidence = {}
    for m in top:
        for g in _closure(c, m):
            incidence.setdefault(g, []).append(m)
    seams = {g: ms for g, ms in incidence.items() if len(ms) >= 2}
    ordered = {g: seams[g] for g in c.cells if g in seams}
    return SeamReport(top, ordered)


def check_gluing_consistency(c: CellComplex, rng: np.random.Generator,
                             count: int = 1000, tol: float = 1e-12) -> VerificationReport:
    """Points of a seam cell, pushed into each incident maximal cell through
    the face inclusions and normalized back, land on the same class."""
    seams = seam_set(c)
    parts = []
    for g, tops in seams.seams.items():
        q = c.dims[g]
        y = rng.uniform(-1, 2, size=(count, q + 1))
        y = y + (1 - y.sum(axis=1, keepdims=True)) / (q + 1)
        res = np.zeros(count)
        for m in tops:
            for path in face_paths(c, m, g):
                for k in range(count):
                    lifted = embed_along(path, y[k])
                    back = normal_form(c, RealPoint.make(m, lifted))
                    direct = normal_form(c, RealPoint.make(g, y[k]))
                    if back.cell != direct.cell:
                        res[k] = np.inf
                    else:
                        res[k] = max(res[k], float(np.max(np.abs(
                            np.subtract(back.coords, direct.coords)))))
        parts.append(VerificationReport.from_residuals(f"seam[{g}]", res, tol, points=y))
    return VerificationReport.combine("gluing_consistency", parts)


def face_paths(c: CellComplex, host: str, target: str, limit: int = 16) -> list:
    """Sequences of face indices from ``host`` down to ``target`` that only
    pass through nondegenerate faces."""
    out = []

    def rec(g, path):
        if len(out) >= limit:
            return
        if g == target:
            out.append(tuple(path))
            return
        for i in range(c.dims[g] + 1 if c.dims[g] else 0):
            ref = c.gluing[(g, i)][0]
            if not ref.word and c.dims[ref.gen] >= c.dims[target]:
                rec(ref.gen, path + [i])

    rec(host, [])
    return out


def embed_along(path, coords) -> np.ndarray:
    """Coordinates of a face point inside the host chart."""
    x = np.asarray(coords, dtype=float)
    for i in reversed(path):
        x = np.insert(x, i, 0.0)
    return x


# -- the natural map |A x B| -> |A| x |B| --------------------------------------------

_PRODUCTS: dict = {}


def product_context(a: SimplicialSet, b: SimplicialSet):
    """(product, its realization, realize(a), realize(b)), memoized per factor pair."""
    key = (id(a), id(b))
    hit = _PRODUCTS.get(key)
    if hit is None or hit[0] is not a or hit[1] is not b:
        from .simplicial import product
        p = product(a, b)
        hit = (a, b, p, realize(p), realize(a), realize(b))
        _PRODUCTS[key] = hit
    return hit[2:]


def natural_product_map(a: SimplicialSet, b: SimplicialSet, p: RealPoint) -> tuple:
    """Images of p in |a| x |b| under the maps induced by the two projections."""
    _, c, ca, cb = product_context(a, b)
    return _project(c, ca, cb, p)


def _project(c: CellComplex, ca: CellComplex, cb: CellComplex, p: RealPoint) -> tuple:
    ref = _as_ref(p.cell)
    if ref.gen not in c.dims:
        raise ValueError(f"{ref.gen!r} is not a cell of the product")
    x = contract(ref.word, np.asarray(p.coords, dtype=float))
    ra, rb = c.source.meta["factor_refs"][ref.gen]
    return (normal_form(ca, RealPoint.make(ra, x)), normal_form(cb, RealPoint.make(rb, x)))


def _image_linear(c: CellComplex, g: str):
    """Linear maps taking coordinates of cell g to the charts of its factor cells."""
    ra, rb = c.source.meta["factor_refs"][g]
    q = c.dims[g]
    return ra, rb, contraction_matrix(ra.word, q), contraction_matrix(rb.word, q)


def _solve_in_cell(c, g, target_a: RealPoint, target_b: RealPoint, ca, cb, tol=1e-9):
    """Points of cell g (possibly with zero coordinates) mapping onto the target pair."""
    ra, rb, La, Lb = _image_linear(c, g)
    sols = []
    for pa in face_paths(ca, ra.gen, target_a.cell.gen):
        ya = embed_along(pa, target_a.coords)
        for pb in face_paths(cb, rb.gen, target_b.cell.gen):
            yb = embed_along(pb, target_b.coords)
            M = np.vstack([La, Lb, np.ones((1, La.shape[1]))])
            rhs = np.concatenate([ya, yb, [1.0]])
            x, *_ = np.linalg.lstsq(M, rhs, rcond=None)
            if np.max(np.abs(M @ x - rhs)) < tol:
                sols.append(x)
    return sols


def find_noninjectivity_witness(a: SimplicialSet, b: SimplicialSet):
    """Two distinct classes of |a x b| with the same image pair, or None.

    Candidates are the vertices and cell barycentres; each image pair is
    solved for in every cell of the product.
    """
    _, c, ca, cb = product_context(a, b)
    candidates = [RealPoint.make(g, np.full(c.dims[g] + 1, 1.0 / (c.dims[g] + 1)))
                  for g in c.cells]
    for p in candidates:
        p = normal_form(c, p)
        img_a, img_b = _project(c, ca, cb, p)
        for g in c.cells:
            for x in _solve_in_cell(c, g, img_a, img_b, ca, cb):
                other = RealPoint.make(g, x)
                if not same_class(c, p, other):
                    q = normal_form(c, other)
                    return {"first": p, "second": other, "second_normal": q,
                            "image": (img_a, img_b)}
    return None


def surjectivity_probe(a: SimplicialSet, b: SimplicialSet, grid: int = 32,
                       lo: float = -2.0, hi: float = 3.0,
                       tol: float = 1e-12) -> VerificationReport:
    """Every grid point (u, v) of |a| x |b| = R^2 has a preimage (a, b one edge each).

    The edge chart is (1-u, u).  A preimage is searched in each top cell by
    least squares, then mapped forward and compared with the target.
    """
    if any(f.nondegenerate_counts() != (2, 1) for f in (a, b)):
        raise ValueError("the grid probe is written for two copies of D1")
    _, c, ca, cb = product_context(a, b)
    factors = (a, b)
    edge_a, edge_b = factors[0].generators[1][0], factors[1].generators[1][0]
    tops = maximal_cells(c)
    us = np.linspace(lo, hi, grid)
    res, pts = [], []
    for u, v in iproduct(us, us):
        ta = normal_form(ca, RealPoint.make(edge_a, (1 - u, u)))
        tb = normal_form(cb, RealPoint.make(edge_b, (1 - v, v)))
        best = np.inf
        for g in tops:
            for x in _solve_in_cell(c, g, ta, tb, ca, cb):
                ia, ib = _project(c, ca, cb, RealPoint.make(g, x))
                if ia.cell == ta.cell and ib.cell == tb.cell:
                    err = max(np.max(np.abs(np.subtract(ia.coords, ta.coords))),
                              np.max(np.abs(np.subtract(ib.coords, tb.coords))))
                    best = min(best, float(err))
            if best <= tol:
                break
        res.append(best)
        pts.append((u, v))
    return VerificationReport.from_residuals("surjectivity_probe", res, tol, points=pts)


# -- seams of R x |A| for the two-parallel-edges example ---------------------------------

def cylinder_seams(c: CellComplex) -> dict:
    """Seams of R x |A|: one line R x {s} per seam cell s of |A|.

    In the plane chart R x A^1 of an edge the line over an endpoint v has
    direction (1, 0); two such lines are parallel and disjoint.
    """
    seams = seam_set(c)
    lines = [g for g in seams.seams if c.dims[g] == 0]
    pairs = []
    for i, u in enumerate(lines):
        for w in lines[i + 1:]:
            # both lines are {(t, v)} for fixed distinct v: same direction, never meet
            pairs.append({"lines": (u, w), "parallel": True, "intersect": False})
    return {"seam_lines": lines, "pairs": pairs,
            "all_parallel": all(p["parallel"] and not p["intersect"] for p in pairs)}


def triangle_edges_intersect(q: int = 2) -> dict:
    """Every two edge lines {x_i = 0} of a chart A^2 meet (at a vertex)."""
    out = []
    for i in range(q + 1):
        for j in range(i + 1, q + 1):
            M = np.zeros((3, q + 1))
            M[0, i] = 1.0
            M[1, j] = 1.0
            M[2, :] = 1.0
            x = np.linalg.solve(M, np.array([0.0, 0.0, 1.0]))
            out.append({"edges": (i, j), "meet_at": x.tolist()})
    return {"pairs": out, "all_intersect": len(out) == comb(q + 1, 2)}


# -- sampled invariants -----------------------------------------------------------------

def random_points(c: CellComplex, rng: np.random.Generator, count: int,
                  degenerate: int = 1, zero_rate: float = 0.3) -> list:
    """Random points on cells, sometimes on degenerate references or with zero coordinates."""
    a = c.source
    out = []
    for _ in range(count):
        g = c.cells[rng.integers(len(c.cells))]
        ref = SimplexRef(g)
        for _ in range(rng.integers(degenerate + 1)):
            ref = a.degeneracy(int(rng.integers(a.degree(ref) + 1)), ref)
        q = a.degree(ref)
        x = rng.uniform(-2, 2, size=q + 1)
        if q:
            x[rng.random(q + 1) < zero_rate] = 0.0
        free = np.flatnonzero(x != 0.0)
        k = free[-1] if free.size else q
        x[k] = 0.0
        x[k] = 1.0 - x.sum()
        out.append(RealPoint.make(ref, x))
    return out


def check_normal_form_idempotent(c: CellComplex, rng: np.random.Generator,
                                 count: int = 10**4) -> VerificationReport:
    fails = []
    for p in random_points(c, rng, count):
        once = normal_form(c, p)
        twice = normal_form(c, once)
        if once != twice:
            fails.append(p.to_json())
    return VerificationReport.from_failures("normal_form_idempotent", fails, count)


def check_product_map_well_defined(a: SimplicialSet, b: SimplicialSet, rng: np.random.Generator,
                                   count: int = 1000, tol: float = 1e-12) -> VerificationReport:
    """A representative and its normal form have the same image pair."""
    _, c, ca, cb = product_context(a, b)
    pts = random_points(c, rng, count)
    res = np.zeros(count)
    for k, p in enumerate(pts):
        one = _project(c, ca, cb, p)
        two = _project(c, ca, cb, normal_form(c, p))
        for u, v in zip(one, two):
            if u.cell != v.cell:
                res[k] = np.inf
                break
            res[k] = max(res[k], float(np.max(np.abs(np.subtract(u.coords, v.coords)))))
    return VerificationReport.from_residuals("product_map_well_defined", res, tol,
                                             points=[p.to_json() for p in pts])
