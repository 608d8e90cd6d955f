from __future__ import annotations

from math import comb

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffeokit import simplicial as sx
from diffeokit.simplicial import SimplexRef


def corpus():
    out = [sx.delta(n) for n in range(4)]
    out += [sx.boundary_delta(n) for n in range(1, 4)]
    out += [sx.horn(n, k) for n in range(1, 4) for k in range(n + 1)]
    out += [sx.parallel_edges(), sx.disjoint_union(sx.delta(1), sx.delta(1))]
    return out


# -- standard objects ----------------------------------------------------------------

@pytest.mark.parametrize("n, counts", [(0, (1,)), (2, (3, 3, 1)), (3, (4, 6, 4, 1))])
def test_delta_counts(n, counts):
    assert sx.delta(n).nondegenerate_counts() == counts


@pytest.mark.parametrize("n", range(6))
def test_delta_counts_binomial(n):
    assert sx.delta(n).nondegenerate_counts() == tuple(comb(n + 1, q + 1) for q in range(n + 1))
    assert sx.delta(n).nondegenerate_counts() == sx.expected_delta_counts(n)


def test_delta_beyond_cap():
    with pytest.raises(ValueError):
        sx.delta(4, dim_cap=3)


@pytest.mark.parametrize("n, counts", [(1, (2,)), (2, (3, 3)), (3, (4, 6, 4))])
def test_boundary_counts(n, counts):
    assert sx.boundary_delta(n).nondegenerate_counts() == counts


def test_boundary_zero_rejected():
    with pytest.raises(ValueError):
        sx.boundary_delta(0)


@pytest.mark.parametrize("n, k, counts", [(2, 1, (3, 2)), (3, 0, (4, 6, 3)), (1, 0, (1,))])
def test_horn_counts(n, k, counts):
    assert sx.horn(n, k).nondegenerate_counts() == counts


@pytest.mark.parametrize("n", range(2, 5))
def test_horn_is_boundary_minus_one_face(n):
    bd = sx.boundary_delta(n).nondegenerate_counts()
    for k in range(n + 1):
        h = sx.horn(n, k).nondegenerate_counts()
        assert h[:-1] == bd[:-1] and h[-1] == bd[-1] - 1


@pytest.mark.parametrize("n, k", [(2, 3), (2, -1), (0, 0)])
def test_horn_bad_index(n, k):
    with pytest.raises(ValueError):
        sx.horn(n, k)


# -- identities ----------------------------------------------------------------------

@pytest.mark.parametrize("a", corpus() + [sx.product(sx.delta(1), sx.delta(1)),
                                         sx.product(sx.delta(1), sx.delta(2))],
                         ids=lambda a: a.name)
def test_identities_pass(a):
    rep = sx.check_identities(a)
    assert rep.passed, rep.witness


def test_swapped_face_fails_with_witness():
    good = sx.delta(2).to_dict()
    faces = good["faces"]["012"]
    faces[0], faces[1] = faces[1], faces[0]
    bad = sx.SimplicialSet.from_dict(good)
    rep = sx.check_identities(bad)
    assert not rep.passed
    assert rep.witness["generator"] == "012"


# -- degeneracy normal form ----------------------------------------------------------

def test_insert_degeneracy_examples():
    assert sx.insert_degeneracy(0, ()) == (0,)
    assert sx.insert_degeneracy(1, (0,)) == (1, 0)
    # s0 s0 = s1 s0
    assert sx.insert_degeneracy(0, (0,)) == (1, 0)


@given(st.lists(st.integers(0, 4), max_size=4))
def test_insert_degeneracy_decreasing(js):
    word = ()
    for depth, j in enumerate(js):
        word = sx.insert_degeneracy(min(j, depth), word)
        assert all(a > b for a, b in zip(word, word[1:]))
        assert len(word) == depth + 1


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 3), st.data())
def test_face_of_degeneracy_rules(n, data):
    """d_i s_j = s_{j-1} d_i (i<j), id (i=j,j+1), s_j d_{i-1} (i>j+1)."""
    a = sx.delta(3)
    gens = a.level(n)
    x = SimplexRef(data.draw(st.sampled_from(list(gens))))
    j = data.draw(st.integers(0, n))
    y = a.degeneracy(j, x)
    for i in range(n + 2):
        got = a.face(i, y)
        if i < j:
            want = a.degeneracy(j - 1, a.face(i, x))
        elif i in (j, j + 1):
            want = x
        else:
            want = a.degeneracy(j, a.face(i - 1, x))
        assert got == want


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_degeneracy_identity(data):
    """s_i s_j = s_{j+1} s_i for i <= j."""
    a = sx.delta(2)
    x = SimplexRef(data.draw(st.sampled_from(list(a.level(1)))))
    j = data.draw(st.integers(0, 1))
    i = data.draw(st.integers(0, j))
    lhs = a.degeneracy(i, a.degeneracy(j, x))
    rhs = a.degeneracy(j + 1, a.degeneracy(i, x))
    assert lhs == rhs


# -- products ------------------------------------------------------------------------

def test_product_square_counts():
    assert sx.product(sx.delta(1), sx.delta(1)).nondegenerate_counts() == (4, 5, 2)


def test_product_prism_top_count():
    assert sx.product(sx.delta(1), sx.delta(2)).nondegenerate_counts()[3] == 3


def shuffle_count(p, q, n):
    """Nondegenerate n-simplices of D^p x D^q, counted independently.

    An n-simplex is a pair of monotone maps [n] -> [p], [n] -> [q]; it is
    nondegenerate when the combined map [n] -> [p] x [q] is injective.
    """
    from itertools import combinations_with_replacement as cwr
    count = 0
    for a in cwr(range(p + 1), n + 1):
        for b in cwr(range(q + 1), n + 1):
            pts = list(zip(a, b))
            if len(set(pts)) == n + 1:
                count += 1
    return count


@pytest.mark.parametrize("p, q", [(1, 1), (1, 2), (2, 2), (1, 3)])
def test_product_counts_against_oracle(p, q):
    counts = sx.product(sx.delta(p), sx.delta(q)).nondegenerate_counts()
    assert counts == tuple(shuffle_count(p, q, n) for n in range(p + q + 1))


@pytest.mark.parametrize("a", corpus()[:8], ids=lambda a: a.name)
def test_product_unit_law(a):
    p = sx.product(sx.delta(0), a)
    assert p.nondegenerate_counts() == a.nondegenerate_counts()
    assert sx.check_identities(p).passed


@pytest.mark.parametrize("a, b", [
    (sx.delta(1), sx.delta(1)), (sx.boundary_delta(2), sx.delta(1)),
    (sx.horn(2, 1), sx.boundary_delta(2)), (sx.parallel_edges(), sx.delta(1)),
    (sx.boundary_delta(2), sx.boundary_delta(2)),
])
def test_product_euler_characteristic(a, b):
    assert sx.product(a, b).euler_characteristic() == a.euler_characteristic() * b.euler_characteristic()


def test_product_dim_cap():
    with pytest.raises(ValueError):
        sx.product(sx.delta(3, dim_cap=4), sx.delta(2, dim_cap=4))


def test_projections_are_maps():
    p = sx.product(sx.delta(1), sx.delta(2))
    for which in (0, 1):
        assert sx.projection(p, which).check().passed


# -- filler search -------------------------------------------------------------------

def test_filler_in_delta2():
    d2 = sx.delta(2)
    h = sx.horn_map_from_faces(2, 1, d2, {0: "12", 2: "01"})
    assert sx.find_horn_filler(d2, h) == SimplexRef("012")


def test_no_filler_in_boundary():
    bd = sx.boundary_delta(2)
    h = sx.horn_map_from_faces(2, 1, bd, {0: "12", 2: "01"})
    assert sx.find_horn_filler(bd, h) is None
    # brute force: no 2-simplex of the boundary has these faces
    for cand in bd.simplices(2):
        assert not (bd.face(0, cand) == SimplexRef("12") and bd.face(2, cand) == SimplexRef("01"))


def test_constant_horn_degenerate_filler():
    pt = sx.delta(0)
    h = sx.horn_map_from_faces(2, 1, pt, {0: SimplexRef("0", (0,)), 2: SimplexRef("0", (0,))})
    f = sx.find_horn_filler(pt, h)
    assert f == SimplexRef("0", (1, 0))


def test_malformed_horn_map():
    d2 = sx.delta(2)
    with pytest.raises(ValueError):
        sx.find_horn_filler(d2, sx.horn_map_from_faces(2, 1, d2, {0: "01", 2: "01"}))


@pytest.mark.parametrize("n, k", [(2, 0), (2, 1), (2, 2), (3, 1)])
def test_filler_complete_on_delta(n, k):
    """Every horn in D^n given by the standard faces is filled; search agrees with brute force."""
    a = sx.delta(n)
    top = tuple(range(n + 1))
    faces = {i: sx.vertex_name(top[:i] + top[i + 1:]) for i in range(n + 1) if i != k}
    h = sx.horn_map_from_faces(n, k, a, faces)
    got = sx.find_horn_filler(a, h)
    brute = [c for c in a.simplices(n)
             if all(a.face(i, c) == SimplexRef(r) for i, r in faces.items())]
    assert got == brute[0]


# -- pi0 and homology ----------------------------------------------------------------

@pytest.mark.parametrize("a, classes", [
    (sx.delta(5), 1), (sx.disjoint_union(sx.delta(1), sx.delta(1)), 2),
    (sx.boundary_delta(1), 2), (sx.parallel_edges(), 1),
])
def test_pi0(a, classes):
    assert len(sx.pi0(a)) == classes


@pytest.mark.parametrize("n", range(5))
def test_delta_acyclic(n):
    for q in range(1, n + 1):
        assert sx.homology(sx.delta(n), q).is_trivial()
    assert sx.homology(sx.delta(n), 0) == sx.HomologyGroup(1, ())


@pytest.mark.parametrize("n", [2, 3, 4])
def test_sphere_homology(n):
    bd = sx.boundary_delta(n)
    assert sx.homology(bd, n - 1) == sx.HomologyGroup(1, ())
    for q in range(1, n - 1):
        assert sx.homology(bd, q).is_trivial()


def test_torus_homology():
    s1 = sx.boundary_delta(2)
    t = sx.product(s1, s1)
    assert [sx.homology(t, q).rank for q in range(3)] == [1, 2, 1]


def test_homology_degree_checks():
    with pytest.raises(ValueError):
        sx.homology(sx.delta(1), -1)


def test_parallel_edges_circle():
    assert sx.homology(sx.parallel_edges(), 1) == sx.HomologyGroup(1, ())


# -- maps and homotopies -------------------------------------------------------------

def test_map_compose_identity():
    a = sx.horn(3, 1)
    i = sx.identity_map(a)
    assert i.compose(i).assignment == i.assignment
    assert i.check().passed


def collapse_setup():
    d0, d1 = sx.delta(0), sx.delta(1)
    p = sx.product(d0, d1)
    # H: D0 x D1 -> D1 sends (s(0), e) to e
    assign = {}
    for g, (ra, rb) in p.meta["factor_refs"].items():
        assign[g] = rb
    H = sx.SimplicialMap(p, d1, assign)
    f = sx.SimplicialMap(d0, d1, {"0": "0"})
    g = sx.SimplicialMap(d0, d1, {"0": "1"})
    return H, f, g


def test_homotopy_between_vertex_inclusions():
    H, f, g = collapse_setup()
    assert sx.verify_simplicial_homotopy(H, f, g).passed


def test_homotopy_wrong_end_fails():
    H, f, _ = collapse_setup()
    assert not sx.verify_simplicial_homotopy(H, f, f).passed


def test_constant_homotopy():
    a = sx.delta(1)
    p = sx.product(a, sx.delta(1))
    f = sx.identity_map(a)
    H = sx.SimplicialMap(p, a, {g: ra for g, (ra, _) in p.meta["factor_refs"].items()})
    assert sx.verify_simplicial_homotopy(H, f, f).passed


def test_homotopy_source_mismatch():
    H, f, g = collapse_setup()
    other = sx.SimplicialMap(sx.delta(1), sx.delta(1), {"0": "0", "1": "1", "01": "01"})
    with pytest.raises(ValueError):
        sx.verify_simplicial_homotopy(H, other, g)


# -- serialization -------------------------------------------------------------------

@pytest.mark.parametrize("a", corpus(), ids=lambda a: a.name)
def test_json_roundtrip(a):
    b = sx.SimplicialSet.from_json(a.to_json())
    assert b.same_as(a)
    assert b.nondegenerate_counts() == a.nondegenerate_counts()


def test_json_schema_shape():
    d = sx.delta(1).to_dict()
    assert set(d) >= {"dim_cap", "generators", "faces"}
    assert d["generators"]["0"] == ["0", "1"]
    assert d["faces"]["01"] == [{"gen": "1", "word": []}, {"gen": "0", "word": []}]


@pytest.mark.parametrize("n", range(4))
def test_simplices_enumeration_counts(n):
    """Monotone maps [q] -> [n], degenerate ones included."""
    a = sx.delta(n)
    for q in range(5):
        assert len(list(a.simplices(q))) == comb(n + q + 1, q + 1)


def test_simplices_distinct():
    a = sx.product(sx.delta(1), sx.delta(1))
    for q in range(4):
        s = list(a.simplices(q))
        assert len(s) == len(set(s))


def test_vertex_sets_of_faces():
    a = sx.delta(3)
    for g in a.level(2):
        vs = a.vertices(SimplexRef(g))
        assert vs == tuple(g)
