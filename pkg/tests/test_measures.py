import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stablemix.groups import ResourceError
from stablemix.measures import (
    BoundarySpace,
    FiniteSpace,
    LatticeCountingSpace,
    ProductCell,
    SimpleFunction,
    alpha_power,
    as_fraction,
    combine,
    exact_root,
    lp_norm,
    lp_norm_power,
    product_cell_mass,
)

LETTERS2 = [1, -1, 2, -2]


@st.composite
def reduced_words(draw, k=2, max_len=5):
    n = draw(st.integers(0, max_len))
    w = []
    for _ in range(n):
        choices = [x for x in range(-k, k + 1) if x != 0 and (not w or x != -w[-1])]
        w.append(draw(st.sampled_from(choices)))
    return tuple(w)


def test_as_fraction():
    assert as_fraction("3/4") == Fraction(3, 4)
    assert as_fraction("0.25") == Fraction(1, 4)
    assert as_fraction(0.1) == Fraction(1, 10)
    with pytest.raises(TypeError):
        as_fraction(None)


def test_exact_root_and_power():
    assert exact_root(Fraction(1, 4), Fraction(1, 2)) == Fraction(1, 16)
    assert exact_root(Fraction(1, 4), Fraction(2)) == Fraction(1, 2)
    assert alpha_power(Fraction(8), Fraction(2, 3)) == 4
    r = exact_root(2, Fraction(3, 2))
    assert isinstance(r, float) and math.isclose(r, 2 ** (2 / 3))
    with pytest.raises(ValueError):
        exact_root(-1, 1)


@settings(max_examples=60, deadline=None)
@given(p=st.integers(1, 40), q=st.integers(1, 40), a=st.sampled_from(["1/2", "1", "3/2", "2", "4/5"]))
def test_root_inverts_power(p, q, a):
    w = Fraction(p, q) ** 2
    r = exact_root(alpha_power(w, a), a) if isinstance(alpha_power(w, a), Fraction) else None
    if r is not None:
        assert r == w


@settings(max_examples=80, deadline=None)
@given(w=reduced_words())
def test_boundary_children_are_additive(w):
    B = BoundarySpace(2)
    kids = B.children(w)
    assert len(kids) == (4 if not w else 3)
    assert sum(B.mass(c) for c in kids) == B.mass(w)
    assert B.mass(w) == (1 if not w else Fraction(1, 4) * Fraction(1, 3) ** (len(w) - 1))


@settings(max_examples=60, deadline=None)
@given(u=reduced_words(max_len=3), v=reduced_words(max_len=3))
def test_boundary_set_algebra(u, v):
    B = BoundarySpace(2)
    inter = B.measure(B.intersect([u], [v]))
    union = B.measure(B.union([u], [v]))
    diff = B.measure(B.difference([u], [v]))
    assert union == B.mass(u) + B.mass(v) - inter
    assert diff == B.mass(u) - inter
    refined = B.common_refinement([u], [v])
    assert B.measure(refined) == union


def test_boundary_parse_format_and_cap():
    B = BoundarySpace(2, max_depth=4)
    assert B.parse_cell("a b") == (1, 2)
    assert B.format_cell((1, -2)) == "a b^-1"
    with pytest.raises(ResourceError):
        B.refine([()], 5)


def test_finite_and_lattice_spaces():
    F = FiniteSpace.uniform(range(6))
    assert F.total_mass == 1 and F.is_probability
    assert F.measure([0, 1, 1]) == Fraction(1, 3)
    with pytest.raises(ValueError):
        F.mass(9)
    with pytest.raises(ValueError):
        FiniteSpace({0: 0})
    L = LatticeCountingSpace(1)
    assert L.total_mass == math.inf
    assert L.parse_cell("(3)") == (3,)
    assert L.mass((3,)) == 1


def test_simple_function_constancy():
    B = BoundarySpace(2)
    f = SimpleFunction.indicator(B, (1,), 3)
    assert f((1, 2)) == 3
    assert f((2,)) == 0
    with pytest.raises(ValueError):
        f(())
    with pytest.raises(ValueError):
        SimpleFunction(B, [((1,), 1), ((1, 2), 1)])


def test_simple_function_records_roundtrip():
    B = BoundarySpace(2)
    f = SimpleFunction.from_records(B, [{"region": "a", "value": "1/2"}, {"region": ["b", "a^-1 b"], "value": 2}])
    g = SimpleFunction.from_records(B, f.to_records())
    assert f == g
    with pytest.raises(ValueError):
        SimpleFunction.from_records(B, [{"region": "a", "value": 1, "colour": "red"}])


def test_combine_and_norms():
    B = BoundarySpace(2)
    f = SimpleFunction.indicator(B, (1,))
    g = SimpleFunction.indicator(B, (1, 2), 2)
    h = combine([(1, f), (1, g)])
    assert h((1, 2)) == 3 and h((1, 1)) == 1
    assert lp_norm_power(f, 1) == Fraction(1, 4)
    assert lp_norm(f, Fraction(1, 2)) == pytest.approx(1 / 16)
    assert lp_norm_power(combine([(1, f), (-1, f)]), 1) == 0
    with pytest.raises(ValueError):
        lp_norm(f, 3)


def test_product_cell():
    B = BoundarySpace(2)
    assert product_cell_mass(B, ProductCell(((1,),), Fraction(1, 2), 2)) == Fraction(3, 8)
    assert product_cell_mass(B, ProductCell(((1,),), 1, math.inf)) == math.inf
    with pytest.raises(ValueError):
        ProductCell(((),), 2, 1)
