"""Finite simplicial sets in Eilenberg-Zilber normal form.

Every simplex is a :class:`SimplexRef`: a nondegenerate generator plus a
strictly decreasing degeneracy word ``(j1, ..., jk)`` meaning
``s_j1 s_j2 ... s_jk x``.  Face and degeneracy operators normalize eagerly
through the simplicial identities, so equality of refs is equality of
simplices.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Iterator, Mapping, NamedTuple

import numpy as np

from . import kernels
from .report import VerificationReport

DEFAULT_DIM_CAP = 6


class SimplexRef(NamedTuple):
    gen: str
    word: tuple = ()

    def __str__(self) -> str:
        if not self.word:
            return self.gen
        return "".join(f"s{j}" for j in self.word) + f"({self.gen})"

    def to_json(self) -> dict:
        return {"gen": self.gen, "word": list(self.word)}

    @classmethod
    def from_json(cls, d) -> "SimplexRef":
        return cls(str(d["gen"]), tuple(int(j) for j in d.get("word", ())))


def insert_degeneracy(j: int, word: tuple) -> tuple:
    """Normal form of ``s_j s_word`` using s_i s_k = s_{k+1} s_i for i <= k."""
    out = []
    for pos, a in enumerate(word):
        if j > a:
            return tuple(out) + (j,) + tuple(word[pos:])
        out.append(a + 1)
    return tuple(out) + (j,)


@dataclass(frozen=True, eq=False)
class SimplicialSet:
    """Truncated simplicial set given by nondegenerate generators and faces.

    ``generators[q]`` lists the degree-q generators in their canonical order
    (this order is the tie-break for every search).  ``faces[x]`` holds the
    canonical refs ``d_0 x, ..., d_q x``.
    """

    generators: tuple
    faces: Mapping[str, tuple]
    dim_cap: int = DEFAULT_DIM_CAP
    name: str = ""
    meta: Mapping = field(default_factory=dict)
    _degree: dict = field(init=False, repr=False)
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        gens = tuple(tuple(str(g) for g in level) for level in self.generators)
        while gens and not gens[-1]:
            gens = gens[:-1]
        object.__setattr__(self, "generators", gens)
        object.__setattr__(
            self, "faces",
            {str(k): tuple(SimplexRef(str(r[0]), tuple(r[1])) for r in v)
             for k, v in self.faces.items()})
        if len(gens) - 1 > self.dim_cap:
            raise ValueError(f"dimension {len(gens) - 1} exceeds dim_cap {self.dim_cap}")
        degree, index = {}, {}
        for q, level in enumerate(gens):
            for i, g in enumerate(level):
                if g in degree:
                    raise ValueError(f"duplicate generator {g!r}")
                degree[g] = q
                index[g] = i
        object.__setattr__(self, "_degree", degree)
        object.__setattr__(self, "_index", index)
        for g, q in degree.items():
            fs = self.faces.get(g, ())
            if q == 0:
                if fs:
                    raise ValueError(f"vertex {g!r} cannot have faces")
                continue
            if len(fs) != q + 1:
                raise ValueError(f"generator {g!r} of degree {q} needs {q + 1} faces")
            for r in fs:
                if r.gen not in degree:
                    raise ValueError(f"face of {g!r} refers to unknown generator {r.gen!r}")
                if not self.is_canonical_word(r.word, self.degree(r)):
                    raise ValueError(f"face {r} of {g!r} is not in normal form")
                if self.degree(r) != q - 1:
                    raise ValueError(f"face {r} of {g!r} has wrong degree")

    # -- basic queries -------------------------------------------------------
    @property
    def dim(self) -> int:
        return len(self.generators) - 1

    def degree(self, ref) -> int:
        ref = _as_ref(ref)
        return self._degree[ref.gen] + len(ref.word)

    def gen_degree(self, gen: str) -> int:
        return self._degree[gen]

    def gen_index(self, gen: str) -> int:
        return self._index[gen]

    def __contains__(self, gen) -> bool:
        return gen in self._degree

    @staticmethod
    def is_canonical_word(word, degree) -> bool:
        if any(j < 0 for j in word):
            return False
        if any(a <= b for a, b in zip(word, word[1:])):
            return False
        return not word or word[0] <= degree - 1

    def nondegenerate_counts(self) -> tuple:
        return tuple(len(level) for level in self.generators)

    def euler_characteristic(self) -> int:
        return sum((-1) ** q * c for q, c in enumerate(self.nondegenerate_counts()))

    def level(self, q: int) -> tuple:
        return self.generators[q] if 0 <= q <= self.dim else ()

    # -- simplicial operators ------------------------------------------------
    def face(self, i: int, ref) -> SimplexRef:
        ref = _as_ref(ref)
        n = self.degree(ref)
        if n == 0:
            raise ValueError("vertices have no faces")
        if not 0 <= i <= n:
            raise ValueError(f"face index {i} out of range for degree {n}")
        return self._face(i, ref.gen, ref.word)

    def _face(self, i, gen, word) -> SimplexRef:
        if not word:
            return self.faces[gen][i]
        j, rest = word[0], word[1:]
        if i < j:
            inner = self._face(i, gen, rest)
            return SimplexRef(inner.gen, insert_degeneracy(j - 1, inner.word))
        if i == j or i == j + 1:
            return SimplexRef(gen, rest)
        inner = self._face(i - 1, gen, rest)
        return SimplexRef(inner.gen, insert_degeneracy(j, inner.word))

    def degeneracy(self, j: int, ref) -> SimplexRef:
        ref = _as_ref(ref)
        n = self.degree(ref)
        if not 0 <= j <= n:
            raise ValueError(f"degeneracy index {j} out of range for degree {n}")
        if n + 1 > self.dim_cap:
            raise ValueError(f"degree {n + 1} exceeds dim_cap {self.dim_cap}")
        return SimplexRef(ref.gen, insert_degeneracy(j, ref.word))

    def simplices(self, n: int) -> Iterator[SimplexRef]:
        """All n-simplices, ordered by (generator degree, generator index, word)."""
        if n > self.dim_cap:
            raise ValueError(f"degree {n} exceeds dim_cap {self.dim_cap}")
        for q in range(min(n, self.dim) + 1):
            for g in self.generators[q]:
                for subset in combinations(range(n), n - q):
                    yield SimplexRef(g, tuple(reversed(subset)))

    def vertices(self, ref) -> tuple:
        """Vertex generators of a simplex, in order."""
        ref = _as_ref(ref)
        n = self.degree(ref)
        out = []
        for v in range(n + 1):
            r = ref
            # drop every vertex after v, then every vertex before it
            for _ in range(n - v):
                r = self.face(self.degree(r), r)
            for _ in range(v):
                r = self.face(0, r)
            out.append(r.gen)
        return tuple(out)

    # -- serialization -------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "dim_cap": self.dim_cap,
            "generators": {str(q): list(level) for q, level in enumerate(self.generators)},
            "faces": {g: [r.to_json() for r in fs] for g, fs in self.faces.items() if fs},
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d, name: str = "") -> "SimplicialSet":
        levels = d["generators"]
        top = max((int(q) for q in levels), default=-1)
        gens = [tuple(levels.get(str(q), ())) for q in range(top + 1)]
        faces = {g: tuple(SimplexRef.from_json(r) for r in fs)
                 for g, fs in d.get("faces", {}).items()}
        return cls(tuple(gens), faces, int(d.get("dim_cap", DEFAULT_DIM_CAP)), name)

    @classmethod
    def from_json(cls, text: str, name: str = "") -> "SimplicialSet":
        return cls.from_dict(json.loads(text), name)

    def __repr__(self) -> str:
        label = self.name or "SimplicialSet"
        return f"<{label} counts={self.nondegenerate_counts()} dim_cap={self.dim_cap}>"

    def same_as(self, other: "SimplicialSet") -> bool:
        return (self.generators == other.generators and self.faces == other.faces)


def _as_ref(ref) -> SimplexRef:
    if isinstance(ref, SimplexRef):
        return ref
    if isinstance(ref, str):
        return SimplexRef(ref, ())
    return SimplexRef(ref[0], tuple(ref[1]))


# -- standard objects --------------------------------------------------------

def vertex_name(vertices) -> str:
    vs = tuple(vertices)
    sep = "" if all(v < 10 for v in vs) else "."
    return sep.join(str(v) for v in vs)


def _delta_subcomplex(n, keep, dim_cap, name, meta=None) -> SimplicialSet:
    levels, faces = [], {}
    for q in range(n + 1):
        level = []
        for vs in combinations(range(n + 1), q + 1):
            if not keep(vs):
                continue
            g = vertex_name(vs)
            level.append(g)
            if q:
                faces[g] = tuple(SimplexRef(vertex_name(vs[:i] + vs[i + 1:]), ())
                                 for i in range(q + 1))
        levels.append(tuple(level))
    return SimplicialSet(tuple(levels), faces, dim_cap, name, dict(meta or {}))


def delta(n: int, dim_cap: int = DEFAULT_DIM_CAP) -> SimplicialSet:
    """The standard n-simplex."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n > dim_cap:
        raise ValueError(f"n={n} exceeds dim_cap {dim_cap}")
    return _delta_subcomplex(n, lambda vs: True, dim_cap, f"delta({n})", {"n": n})


def boundary_delta(n: int, dim_cap: int = DEFAULT_DIM_CAP) -> SimplicialSet:
    if n < 1:
        raise ValueError("boundary_delta needs n >= 1")
    if n > dim_cap:
        raise ValueError(f"n={n} exceeds dim_cap {dim_cap}")
    return _delta_subcomplex(n, lambda vs: len(vs) <= n, dim_cap,
                             f"boundary_delta({n})", {"n": n})


def horn(n: int, k: int, dim_cap: int = DEFAULT_DIM_CAP) -> SimplicialSet:
    """Lambda^n_k: Delta^n without its top simplex and its k-th face."""
    if n < 1:
        raise ValueError("horn needs n >= 1")
    if not 0 <= k <= n:
        raise ValueError(f"horn index k={k} out of range 0..{n}")
    if n > dim_cap:
        raise ValueError(f"n={n} exceeds dim_cap {dim_cap}")
    missing = tuple(v for v in range(n + 1) if v != k)
    return _delta_subcomplex(n, lambda vs: len(vs) <= n and vs != missing, dim_cap,
                             f"horn({n},{k})", {"n": n, "k": k})


def disjoint_union(a: SimplicialSet, b: SimplicialSet, tags=("L", "R")) -> SimplicialSet:
    def rename(tag, r):
        return SimplexRef(f"{tag}:{r.gen}", r.word)

    top = max(a.dim, b.dim)
    levels = [tuple(f"{tags[0]}:{g}" for g in a.level(q)) +
              tuple(f"{tags[1]}:{g}" for g in b.level(q)) for q in range(top + 1)]
    faces = {}
    for tag, s in zip(tags, (a, b)):
        for g, fs in s.faces.items():
            if fs:
                faces[f"{tag}:{g}"] = tuple(rename(tag, r) for r in fs)
    return SimplicialSet(tuple(levels), faces, max(a.dim_cap, b.dim_cap),
                         f"({a.name} + {b.name})")


def parallel_edges() -> SimplicialSet:
    """Two vertices joined by two distinct edges, both from v to w."""
    faces = {"e": (SimplexRef("w"), SimplexRef("v")),
             "f": (SimplexRef("w"), SimplexRef("v"))}
    return SimplicialSet((("v", "w"), ("e", "f")), faces, DEFAULT_DIM_CAP, "parallel_edges")


# -- products ----------------------------------------------------------------

def _pair_name(a: SimplexRef, b: SimplexRef) -> str:
    return f"({a},{b})"


def product(a: SimplicialSet, b: SimplicialSet) -> SimplicialSet:
    """Degreewise product; nondegenerate simplices are the shuffle pairs.

    A pair ``(s_I x, s_J y)`` of n-simplices with x, y nondegenerate is
    nondegenerate exactly when the index sets I and J are disjoint.
    """
    cap = max(a.dim_cap, b.dim_cap)
    if a.dim + b.dim > cap:
        raise ValueError(f"product dimension {a.dim + b.dim} exceeds dim_cap {cap}")
    levels = []
    refs = {}
    index = {}
    for n in range(a.dim + b.dim + 1):
        level = []
        for p in range(min(n, a.dim) + 1):
            for q in range(min(n, b.dim) + 1):
                if p + q < n:
                    continue
                for x in a.level(p):
                    for y in b.level(q):
                        for ia in combinations(range(n), n - p):
                            rest = [j for j in range(n) if j not in ia]
                            for ib in combinations(rest, n - q):
                                ra = SimplexRef(x, tuple(reversed(ia)))
                                rb = SimplexRef(y, tuple(reversed(ib)))
                                name = _pair_name(ra, rb)
                                level.append((n, p, a.gen_index(x), q, b.gen_index(y), ia, ib, name))
                                refs[name] = (ra, rb)
                                index[(ra, rb)] = name
        level.sort(key=lambda t: t[:7])
        levels.append(tuple(t[-1] for t in level))

    def canonical(ra, rb):
        common = set(ra.word) & set(rb.word)
        if not common:
            return SimplexRef(index[(ra, rb)], ())
        j = max(common)
        inner = canonical(a.face(j, ra), b.face(j, rb))
        return SimplexRef(inner.gen, insert_degeneracy(j, inner.word))

    faces = {}
    for n, level in enumerate(levels):
        if n == 0:
            continue
        for name in level:
            ra, rb = refs[name]
            faces[name] = tuple(canonical(a.face(i, ra), b.face(i, rb)) for i in range(n + 1))
    meta = {"factors": (a, b), "factor_refs": refs, "pair_index": index}
    return SimplicialSet(tuple(levels), faces, cap, f"{a.name} x {b.name}", meta)


def product_ref(p: SimplicialSet, ra, rb) -> SimplexRef:
    """Canonical ref in the product ``p`` of the pair (ra, rb) of same-degree simplices."""
    a, b = p.meta["factors"]
    index = p.meta["pair_index"]
    ra, rb = _as_ref(ra), _as_ref(rb)
    if a.degree(ra) != b.degree(rb):
        raise ValueError("product simplices need equal degrees")

    def canonical(ra, rb):
        common = set(ra.word) & set(rb.word)
        if not common:
            return SimplexRef(index[(ra, rb)], ())
        j = max(common)
        inner = canonical(a.face(j, ra), b.face(j, rb))
        return SimplexRef(inner.gen, insert_degeneracy(j, inner.word))

    return canonical(ra, rb)


def projection(p: SimplicialSet, which: int) -> "SimplicialMap":
    factors = p.meta.get("factors")
    if factors is None:
        raise ValueError(f"{p!r} is not a product")
    refs = p.meta["factor_refs"]
    return SimplicialMap(p, factors[which], {g: refs[g][which] for g in refs})


# -- maps --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SimplicialMap:
    """A map given on generators; extended to all simplices by naturality."""

    source: SimplicialSet
    target: SimplicialSet
    assignment: Mapping[str, SimplexRef]

    def __post_init__(self):
        object.__setattr__(self, "assignment",
                           {str(k): _as_ref(v) for k, v in self.assignment.items()})

    def __call__(self, ref) -> SimplexRef:
        ref = _as_ref(ref)
        img = self.assignment[ref.gen]
        for j in reversed(ref.word):
            img = self.target.degeneracy(j, img)
        return img

    def check(self) -> VerificationReport:
        """Degrees preserved and faces commute on every generator."""
        failures = []
        checked = 0
        for level in self.source.generators:
            for g in level:
                checked += 1
                if g not in self.assignment:
                    failures.append({"generator": g, "problem": "unassigned"})
                    continue
                img = self.assignment[g]
                if img.gen not in self.target:
                    failures.append({"generator": g, "problem": f"unknown target {img.gen}"})
                    continue
                q = self.source.gen_degree(g)
                if self.target.degree(img) != q:
                    failures.append({"generator": g, "problem": "degree"})
                    continue
                for i in range(q + 1 if q else 0):
                    lhs = self.target.face(i, img)
                    rhs = self(self.source.faces[g][i])
                    if lhs != rhs:
                        failures.append({"generator": g, "face": i,
                                         "lhs": str(lhs), "rhs": str(rhs)})
        return VerificationReport.from_failures("simplicial_map", failures, checked)

    def compose(self, other: "SimplicialMap") -> "SimplicialMap":
        """``self after other``."""
        return SimplicialMap(other.source, self.target,
                             {g: self(r) for g, r in other.assignment.items()})


def identity_map(a: SimplicialSet) -> SimplicialMap:
    return SimplicialMap(a, a, {g: SimplexRef(g) for level in a.generators for g in level})


def constant_map(a: SimplicialSet, b: SimplicialSet, vertex: str) -> SimplicialMap:
    assignment = {}
    for q, level in enumerate(a.generators):
        for g in level:
            assignment[g] = SimplexRef(vertex, tuple(range(q - 1, -1, -1)))
    return SimplicialMap(a, b, assignment)


def horn_map_from_faces(n: int, k: int, target: SimplicialSet, face_images) -> SimplicialMap:
    """Horn map determined by the images of its (n-1)-faces ``{i: ref}`` for i != k.

    Lower simplices get their images by taking faces, so the supplied faces
    must agree on overlaps; :meth:`SimplicialMap.check` reports if not.
    """
    h = horn(n, k, max(target.dim_cap, n))
    top = tuple(range(n + 1))
    assignment = {}
    for i, ref in face_images.items():
        if i == k or not 0 <= i <= n:
            raise ValueError(f"face index {i} is not a horn face of horn({n},{k})")
        assignment[vertex_name(top[:i] + top[i + 1:])] = _as_ref(ref)
    for q in range(n - 2, -1, -1):
        for g in h.level(q):
            vs = tuple(int(c) for c in (g.split(".") if "." in g else g))
            # pick a containing face that has an image, drop the extra vertices
            for i in sorted(face_images):
                parent = top[:i] + top[i + 1:]
                if set(vs) <= set(parent):
                    r = assignment[vertex_name(parent)]
                    for pos in sorted((parent.index(v) for v in parent if v not in vs), reverse=True):
                        r = target.face(pos, r)
                    assignment[g] = r
                    break
    return SimplicialMap(h, target, assignment)


# -- checks and searches -----------------------------------------------------

def check_identities(a: SimplicialSet) -> VerificationReport:
    """Exhaustive check of d_i d_j = d_{j-1} d_i (i < j) on every generator."""
    failures = []
    checked = 0
    for q in range(2, a.dim + 1):
        for g in a.generators[q]:
            x = SimplexRef(g)
            for j in range(q + 1):
                dj = a.face(j, x)
                for i in range(j):
                    checked += 1
                    lhs = a.face(i, dj)
                    rhs = a.face(j - 1, a.face(i, x))
                    if lhs != rhs:
                        failures.append({"generator": g, "i": i, "j": j,
                                         "lhs": str(lhs), "rhs": str(rhs)})
    return VerificationReport.from_failures(f"identities[{a.name}]", failures, checked)


def find_horn_filler(a: SimplicialSet, h: SimplicialMap):
    """First n-simplex of ``a`` whose faces agree with the horn map ``h``.

    Returns ``None`` when no simplex of degree n fits.  Candidates are visited
    in the order of :meth:`SimplicialSet.simplices`.
    """
    n, k = h.source.meta.get("n"), h.source.meta.get("k")
    if n is None or k is None:
        raise ValueError("h must be defined on a horn")
    if h.target is not a and not h.target.same_as(a):
        raise ValueError("horn map lands in a different simplicial set")
    report = h.check()
    if not report.passed:
        raise ValueError(f"malformed horn map: {report.witness}")
    top = tuple(range(n + 1))
    wanted = {i: h(vertex_name(top[:i] + top[i + 1:])) for i in range(n + 1) if i != k}
    for cand in a.simplices(n):
        if all(a.face(i, cand) == r for i, r in wanted.items()):
            return cand
    return None


def pi0(a: SimplicialSet) -> list:
    """Vertex classes under the equivalence generated by the edges."""
    verts = list(a.level(0))
    parent = {v: v for v in verts}

    def root(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    order = {v: i for i, v in enumerate(verts)}
    for e in a.level(1):
        u, w = root(a.faces[e][0].gen), root(a.faces[e][1].gen)
        if u != w:
            lo, hi = sorted((u, w), key=order.get)
            parent[hi] = lo
    classes = {}
    for v in verts:
        classes.setdefault(root(v), []).append(v)
    return sorted(classes.values(), key=lambda c: order[c[0]])


class HomologyGroup(NamedTuple):
    rank: int
    torsion: tuple

    def is_trivial(self) -> bool:
        return self.rank == 0 and not self.torsion


def boundary_matrix(a: SimplicialSet, q: int) -> np.ndarray:
    """Normalized boundary C_q -> C_{q-1}; degenerate faces are dropped."""
    cols = a.level(q)
    rows = a.level(q - 1) if q >= 1 else ()
    m = np.zeros((len(rows), len(cols)), dtype=np.int64)
    if q == 0:
        return m
    rindex = {g: i for i, g in enumerate(rows)}
    for c, g in enumerate(cols):
        for i, r in enumerate(a.faces[g]):
            if not r.word:
                m[rindex[r.gen], c] += -1 if i % 2 else 1
    return m


def homology(a: SimplicialSet, q: int) -> HomologyGroup:
    """Integral H_q of the normalized chain complex, via Smith normal form."""
    if q < 0 or q > a.dim_cap:
        raise ValueError(f"degree {q} outside 0..dim_cap={a.dim_cap}")

    def invariants(mat):
        if mat.size == 0:
            return np.zeros(0, dtype=np.int64)
        d = kernels.smith_diagonal(mat)
        return d[d != 0]

    dq = invariants(boundary_matrix(a, q))
    dq1 = invariants(boundary_matrix(a, q + 1))
    rank = len(a.level(q)) - len(dq) - len(dq1)
    torsion = tuple(sorted(int(d) for d in dq1 if d > 1))
    return HomologyGroup(rank, torsion)


def end_inclusion_ref(p: SimplicialSet, x: str, end: int) -> SimplexRef:
    """The simplex (x, constant at vertex ``end``) of A x Delta^1."""
    a, _ = p.meta["factors"]
    q = a.gen_degree(x)
    return product_ref(p, SimplexRef(x), SimplexRef(str(end), tuple(range(q - 1, -1, -1))))


def verify_simplicial_homotopy(h: SimplicialMap, f: SimplicialMap, g: SimplicialMap) -> VerificationReport:
    """Check that ``h: A x Delta^1 -> B`` restricts to f at vertex 0 and g at vertex 1."""
    factors = h.source.meta.get("factors")
    if factors is None:
        raise ValueError("homotopy must be defined on a product A x Delta^1")
    a, interval = factors
    if interval.nondegenerate_counts() != (2, 1):
        raise ValueError("second factor of the homotopy source must be Delta^1")
    for m in (f, g):
        if not (m.source is a or m.source.same_as(a)):
            raise ValueError("f and g must be defined on the first factor of the homotopy source")
        if not (m.target is h.target or m.target.same_as(h.target)):
            raise ValueError("f, g and the homotopy must share a target")
    parts = [h.check()]
    for end, m in ((0, f), (1, g)):
        failures, checked = [], 0
        for level in a.generators:
            for x in level:
                checked += 1
                lhs = h(end_inclusion_ref(h.source, x, end))
                rhs = m(x)
                if lhs != rhs:
                    failures.append({"generator": x, "end": end, "H": str(lhs), "map": str(rhs)})
        parts.append(VerificationReport.from_failures(f"end_{end}", failures, checked))
    return VerificationReport.combine("simplicial_homotopy", parts)


def expected_delta_counts(n: int) -> tuple:
    return tuple(comb(n + 1, q + 1) for q in range(n + 1))
