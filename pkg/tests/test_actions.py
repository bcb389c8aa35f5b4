from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stablemix.actions import (
    BUILTIN_ACTIONS,
    BoundaryAction,
    PointAction,
    RosinskiKernel,
    builtin_action,
    check_weakly_wandering,
    cocycle_audit,
    kernel_pieces,
    maharam_audit,
    maharam_extend,
    rosinski_f,
)
from stablemix.groups import lattice
from stablemix.measures import FiniteSpace, LatticeCountingSpace, ProductCell, SimpleFunction, lp_norm_power


def _pairs(action):
    gens = action.group.generators() + [action.group.identity()]
    return [(a, b) for a in gens for b in gens]


@pytest.mark.parametrize("name", sorted(BUILTIN_ACTIONS))
def test_builtin_cocycles_exact(name):
    action = builtin_action(name)
    depth = 3 if isinstance(action, BoundaryAction) and action.k == 4 else 4
    rep = cocycle_audit(action, _pairs(action), depth)
    assert rep["ok"], rep["violations"][:3]
    assert rep["cells_checked"] > 0


@pytest.mark.parametrize("name", sorted(BUILTIN_ACTIONS))
def test_builtin_maharam_exact(name):
    action = builtin_action(name)
    rep = maharam_audit(action, action.group.generators(), 3)
    assert rep["ok"], rep["violations"][:3]


def test_broken_cocycle_is_caught_with_witness():
    bad = PointAction("bad", lattice(1), LatticeCountingSpace(1), lambda g, x: (x[0] - g[0],), "null",
                      rn=lambda g, x: Fraction(2), probe=lambda d: [(i,) for i in range(-d, d + 1)])
    rep = cocycle_audit(bad, [((1,), (1,))], 1)
    assert not rep["ok"]
    assert rep["violations"][0]["rule"] == "rn"
    assert "cell" in rep["violations"][0]


def test_unknown_action():
    with pytest.raises(ValueError, match="unknown action"):
        builtin_action("nope")


def test_rosinski_kernel_on_boundary():
    action = BoundaryAction(2)
    f_e = SimpleFunction.indicator(action.space, (1,))
    kernel = RosinskiKernel(action, f_e, 1)
    # f_a = w_a * 1_{C_a} o phi_a is supported where a^-1 xi starts with a, i.e. on C_aa
    assert dict(rosinski_f(kernel, (1,)).values) == {(1, 1): 3}
    assert rosinski_f(kernel, ()) == f_e
    assert all(len(p) == 4 for p in kernel_pieces(kernel, (1,)))


@settings(max_examples=25, deadline=None)
@given(g=st.lists(st.sampled_from([1, -1, 2, -2]), max_size=3),
       alpha=st.sampled_from([Fraction(1, 2), Fraction(1), Fraction(3, 2)]))
def test_rosinski_kernel_preserves_alpha_norm(g, alpha):
    action = BoundaryAction(2)
    g = action.group.parse(" ".join({1: "a", -1: "a^-1", 2: "b", -2: "b^-1"}[x] for x in g) or "e")
    f_e = SimpleFunction.indicator(action.space, (1,))
    kernel = RosinskiKernel(action, f_e, alpha)
    got = lp_norm_power(rosinski_f(kernel, g), alpha)
    if isinstance(got, Fraction):
        assert got == lp_norm_power(f_e, alpha)
    else:
        assert got == pytest.approx(float(lp_norm_power(f_e, alpha)), rel=1e-12)


def test_maharam_boundary_values():
    action = BoundaryAction(2)
    star = maharam_extend(action)
    assert star.return_mass((1,), [()], Fraction(1, 2), 2) == Fraction(1, 4)
    cell = ProductCell(((),), Fraction(1, 2), 2)
    assert star.mass(star.preimage_star((1,), cell)) == Fraction(3, 2)


def test_weakly_wandering():
    lat = builtin_action("lattice-translation-null")
    assert check_weakly_wandering(lat, [(0,)], [(n,) for n in range(10)])
    fin = builtin_action("finite-permutation-positive")
    # pigeonhole: six translates of a point in a 6-point space with a period-6 map
    assert not check_weakly_wandering(fin, [0], [(n,) for n in range(7)])
    with pytest.raises(ValueError):
        check_weakly_wandering(fin, [], [(0,)])


def test_finite_action_is_measure_preserving():
    fin = builtin_action("finite-permutation-positive")
    assert isinstance(fin.space, FiniteSpace)
    for g in [(1,), (2,), (5,)]:
        assert all(fin.rn(g, x) == 1 for x in fin.space.points)
        assert sorted(fin.apply(g, x) for x in fin.space.points) == list(range(6))
    assert fin.apply((6,), 0) == 0


def test_signed_action_sign():
    act = builtin_action("lattice-translation-null-signed")
    assert act.sign((1,), (0,)) == -1
    assert act.sign((2,), (0,)) == 1


def test_boundary_apply_needs_fine_cells():
    action = BoundaryAction(2)
    with pytest.raises(ValueError):
        action.apply((1,), ())
    cells = action.refine_for([()], (1,))
    assert sum(action.space.mass(c) for c in cells) == 1
