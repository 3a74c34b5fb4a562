from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import box_tops, box_valued_maps, oracle_rasterize
from sampledconley.grid import (Cell, CubicalSet, GridGeometry, closure, neighborhood, refine, top,
                                vertex)
from sampledconley.hull import EmptyInput, DimensionUnsupported
from sampledconley.mvmap import (NotUpperSemicontinuous, SampleSet, TableMap, build_sunflower,
                                 check_values_acyclic, double_enclosure, horizontal_enclosure,
                                 image, preimage, rasterize_hull, restrict_to_domain,
                                 vertical_enclosure)


def bases(S):
    return {c.base for c in S.tops()}


# rasterization -------------------------------------------------------------------

def test_rasterize_singleton():
    assert bases(rasterize_hull([[2.5]], GridGeometry(1, 1.0))) == {(2,)}


def test_rasterize_interval():
    assert bases(rasterize_hull([[0.5], [1.5]], GridGeometry(1, 1.0))) == {(0,), (1,)}


def test_rasterize_diagonal_segment_touches_corners():
    # seven squares: the closed segment passes through corners (2,1) and (1,2) (ledgered)
    got = bases(rasterize_hull([[2.5, 0.5], [0.5, 2.5]], GridGeometry(2, 1.0)))
    want = {(2, 0), (1, 1), (0, 2), (1, 0), (2, 1), (0, 1), (1, 2)}
    assert got == want
    assert got == oracle_rasterize([(Fraction(5, 2), Fraction(1, 2)), (Fraction(1, 2), Fraction(5, 2))])
    assert got == {(b, a) for a, b in got}


def test_rasterize_empty_and_high_dim():
    with pytest.raises(EmptyInput):
        rasterize_hull(np.zeros((0, 2)), GridGeometry(2, 1.0))
    with pytest.raises(DimensionUnsupported):
        rasterize_hull([[0.5] * 4], GridGeometry(4, 1.0))


quarter = st.integers(-6, 14).map(lambda n: Fraction(n, 4))


@given(st.integers(1, 3).flatmap(
    lambda d: st.lists(st.tuples(*[quarter] * d), min_size=1, max_size=6 if d < 3 else 5)))
def test_rasterize_matches_exact_oracle(pts):
    d = len(pts[0])
    got = bases(rasterize_hull([[float(x) for x in p] for p in pts], GridGeometry(d, 1.0)))
    assert got == oracle_rasterize(pts)


@given(st.integers(2, 3).flatmap(
    lambda d: st.lists(st.tuples(*[quarter] * d), min_size=1, max_size=6)))
def test_rasterized_hulls_are_acyclic(pts):
    d = len(pts[0])
    S = rasterize_hull([[float(x) for x in p] for p in pts], GridGeometry(d, 1.0))
    F = TableMap(GridGeometry(d, 1.0), {(0,) * d: [c.base for c in S.tops()]})
    assert check_values_acyclic(F).ok


# sunflower map -------------------------------------------------------------------

def one_sample():
    return build_sunflower(SampleSet.scalar([0.5], [2.5]), GridGeometry(1, 1.0))


def two_samples():
    return build_sunflower(SampleSet.scalar([0.5, 1.5], [2.5, 4.5]), GridGeometry(1, 1.0))


def test_sunflower_single_sample():
    F = one_sample()
    assert bases(F.domain) == {(0,)}
    for c in F.domain.cells:
        assert {t.base for t in F.value_tops(c)} == {(2,)}


def test_sunflower_two_samples_vertex_gets_hull_of_both():
    F = two_samples()
    assert {t.base for t in F.value_tops(top((0,)))} == {(2,)}
    assert {t.base for t in F.value_tops(top((1,)))} == {(4,)}
    assert {t.base for t in F.value_tops(vertex((1,)))} == {(2,), (3,), (4,)}
    assert F.check_usc() == []


def test_sunflower_empty_input():
    with pytest.raises(EmptyInput):
        build_sunflower(SampleSet.scalar([], []), GridGeometry(1, 1.0))


def test_image_and_preimage_examples():
    F = two_samples()
    v = closure(CubicalSet([vertex((1,))], 1))
    assert bases(image(F, v)) == {(2,), (3,), (4,)}
    assert preimage(F, CubicalSet((), 1)) == CubicalSet((), 1)


def test_identity_map_image_and_preimage():
    # values are unions of top cubes, so the identity is represented by its
    # smallest top-valued enclosure: each top cube maps to itself
    vals = {(i, j): [(i, j)] for i in range(5) for j in range(5)}
    F = TableMap(GridGeometry(2, 1.0), vals)
    S = CubicalSet.from_tops([(1, 1), (2, 2), (3, 2)], 2)
    assert {t.base for t in F.value_tops(top((2, 2)))} == {(2, 2)}
    assert image(F, S) == neighborhood(S, F.domain)
    assert S <= preimage(F, S)


def test_table_map_rejects_non_usc():
    g = GridGeometry(1, 1.0)
    vals = {Cell((0,), 1): [(5,)], Cell((1,), 0): [(0,)], Cell((0,), 0): [(5,)]}
    with pytest.raises(NotUpperSemicontinuous):
        TableMap(g, vals)


@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=2, max_size=40), st.integers(1, 3))
def test_sunflower_is_usc_and_contains_samples(xs, d):
    xs = np.array(xs)
    if len(xs) <= d:
        xs = np.concatenate([xs, xs + 0.1])
    idx = np.arange(len(xs) - d)[:, None] + np.arange(d)[None, :]
    S = SampleSet(xs[idx], xs[idx + 1])
    g = GridGeometry(d, 0.25)
    F = build_sunflower(S, g)
    assert F.check_usc() == []
    from sampledconley.grid import bin_point
    for x, y in zip(S.x, S.y):
        c = bin_point(x, g)
        assert bin_point(y, g) in F.value(c).cells


# enclosures ----------------------------------------------------------------------

def test_horizontal_enclosure_example():
    # open edges go to [2,3] and [4,5]; the shared vertex to their hull [2,5]
    Fe = horizontal_enclosure(two_samples(), 1)
    # x = 0.75 is the open refined edge [1,2] at level 1; its ball reaches vertex {1}
    got = {t.base for t in Fe.value_tops(Cell((1,), 1))}
    assert got == {(b,) for b in range(4, 10)}


def test_enclosures_reject_bad_k():
    F = TableMap(GridGeometry(1, 1.0), {(0,): [(0,)]})
    with pytest.raises(ValueError):
        horizontal_enclosure(F, 0)
    with pytest.raises(ValueError):
        vertical_enclosure(F, 0)


@given(box_valued_maps(), st.data(), st.integers(1, 2))
def test_horizontal_enclosure_preserves_images_of_cubical_sets(F, data, k):
    tops = sorted(t.base for t in F.domain.tops())
    A = CubicalSet.from_tops(data.draw(st.lists(st.sampled_from(tops), min_size=1, unique=True)), F.dim)
    assert image(horizontal_enclosure(F, k), refine(A, k)) == refine(image(F, A), k)


@given(box_valued_maps(n=4), st.data(), st.integers(1, 2))
def test_vertical_enclosure_preserves_preimages_of_cubical_sets(F, data, k):
    d = F.dim
    B = CubicalSet.from_tops(data.draw(st.lists(st.tuples(*[st.integers(-1, 5)] * d),
                                                min_size=1, max_size=4, unique=True)), d)
    assert preimage(vertical_enclosure(F, k), refine(B, k)) == refine(preimage(F, B), k)


@given(box_valued_maps(n=3), st.integers(1, 2))
def test_enclosures_contain_the_map(F, k):
    H, V, D = horizontal_enclosure(F, k), vertical_enclosure(F, k), double_enclosure(F, k)
    from sampledconley.grid import coarse_carrier
    for c in refine(F.domain, k).cells:
        base = set(refine(F.value(coarse_carrier(c, k)), k).tops())
        assert base <= H.value_tops(c)
        assert base <= V.value_tops(c)
        assert H.value_tops(c) <= D.value_tops(c)
    assert H.check_usc() == [] and D.check_usc() == []


# acyclicity ------------------------------------------------------------------------

def test_acyclicity_single_cuboid_ok():
    F = TableMap(GridGeometry(2, 1.0), {(0, 0): box_tops((3, 3), (5, 4))})
    assert check_values_acyclic(F).ok


def test_acyclicity_hollow_value_fails():
    ring = [t for t in box_tops((0, 0), (2, 2)) if t != (1, 1)]
    F = TableMap(GridGeometry(2, 1.0), {(0, 0): ring})
    rep = check_values_acyclic(F)
    assert not rep.ok
    assert rep.failures[0][1] == (1, 1, 0)


def test_domain_restriction_cuts_values():
    F = TableMap(GridGeometry(1, 1.0), {(0,): [(0,), (1,), (7,)], (1,): [(0,)]})
    R = restrict_to_domain(F)
    assert {t.base for t in R.value_tops(top((0,)))} == {(0,), (1,)}
    assert restrict_to_domain(R) is R
