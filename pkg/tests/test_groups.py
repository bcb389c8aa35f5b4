from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stablemix.groups import (
    GroupElement,
    GroupSpec,
    ResourceError,
    UnsupportedGroupError,
    ball,
    folner_ratio,
    folner_ratio_enumerated,
    folner_set,
    folner_size,
    free,
    free_sphere,
    heisenberg,
    lamplighter,
    lamplighter_length_formula,
    lattice,
    reduce_word,
    shulman_bound,
    shulman_bound_enumerated,
    sphere,
)

GROUPS = [lattice(1), lattice(2), heisenberg(), lamplighter(), free(2), free(3)]


def words(group, max_len=6):
    gens = group.generators()
    return st.lists(st.sampled_from(gens), max_size=max_len).map(lambda ws: _product(group, ws))


def _product(group, ws):
    g = group.identity()
    for s in ws:
        g = group.mul(g, s)
    return g


@pytest.mark.parametrize("group", GROUPS, ids=str)
@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_group_axioms(group, data):
    a, b, c = (data.draw(words(group)) for _ in range(3))
    e = group.identity()
    assert group.mul(group.mul(a, b), c) == group.mul(a, group.mul(b, c))
    assert group.mul(a, e) == a == group.mul(e, a)
    assert group.mul(a, group.inv(a)) == e
    assert group.word_length(group.inv(a)) == group.word_length(a)
    assert group.word_length(group.mul(a, b)) <= group.word_length(a) + group.word_length(b)


@pytest.mark.parametrize("group", GROUPS, ids=str)
@settings(max_examples=30, deadline=None)
@given(data=st.data())
def test_format_parse_roundtrip(group, data):
    g = data.draw(words(group))
    assert group.parse(group.format(g)) == g


@pytest.mark.parametrize("group", GROUPS, ids=str)
def test_config_roundtrip(group):
    assert GroupSpec.from_config(group.to_config()) == group


def test_free_formats():
    F2 = free(2)
    assert F2.format(F2.identity()) == "e"
    assert F2.parse("a b^-1") == (1, -2)
    assert F2.format((1, -2)) == "a b^-1"


def test_reduce_word():
    assert reduce_word((1, -1, 2)) == (2,)
    assert reduce_word((1, 2, -2, -1)) == ()


@pytest.mark.parametrize("k,r", [(2, 0), (2, 1), (2, 3), (3, 2)])
def test_free_sphere_count(k, r):
    expected = 1 if r == 0 else 2 * k * (2 * k - 1) ** (r - 1)
    got = list(free_sphere(k, r))
    assert len(got) == len(set(got)) == expected


@pytest.mark.parametrize("group", GROUPS, ids=str)
def test_ball_matches_word_length(group):
    b = ball(group, 2)
    assert all(group.word_length(g) <= 2 for g in b)
    assert set(sphere(group, 2)) == {g for g in b if group.word_length(g) == 2}


def test_ball_sizes():
    assert len(ball(lattice(2), 2)) == 13
    assert len(ball(free(2), 2)) == 17


def test_lamplighter_length_formula_matches_bfs():
    L = lamplighter()
    for r in range(4):
        for g in sphere(L, r):
            assert lamplighter_length_formula(g) == r


def test_folner_closed_forms_match_enumeration():
    for group, g, n in [(lattice(1), (1,), 4), (lattice(2), (1, 0), 3), (heisenberg(), (1, 0, 0), 3),
                        (heisenberg(), (0, 1, 0), 2)]:
        assert folner_ratio(group, g, n) == folner_ratio_enumerated(group, g, n)
    assert folner_ratio(lattice(1), (1,), 4) == Fraction(2, 9)
    assert folner_size(lattice(1), 3) == len(folner_set(lattice(1), 3)) == 7


def test_folner_ratio_decreases():
    for group in (lattice(2), heisenberg()):
        g = group.generators()[0]
        ratios = [folner_ratio(group, g, n) for n in (1, 2, 4, 8)]
        assert all(b < a for a, b in zip(ratios, ratios[1:]))


def test_shulman_bound_closed_form():
    assert shulman_bound(lattice(1), 3) == shulman_bound_enumerated(lattice(1), 3) == Fraction(11, 7)
    assert shulman_bound(lattice(2), 3) == shulman_bound_enumerated(lattice(2), 3) == Fraction(121, 49)
    # on Z the ratio at n is (4n-1)/(2n+1), increasing towards 2
    assert shulman_bound(lattice(1), 10) == shulman_bound_enumerated(lattice(1), 10) == Fraction(39, 21)
    bounds = [shulman_bound(lattice(1), n) for n in range(2, 12)]
    assert all(b >= a for a, b in zip(bounds, bounds[1:])) and bounds[-1] < 2


def test_free_group_has_no_folner_sets():
    with pytest.raises(UnsupportedGroupError):
        folner_set(free(2), 2)


def test_parse_rejects_garbage():
    with pytest.raises(ValueError):
        free(2).parse("z")
    with pytest.raises(ValueError):
        lattice(2).parse("(1)")


def test_free_rank_validation():
    with pytest.raises(ValueError):
        free(1)


def test_group_element_wrapper():
    F2 = free(2)
    g = GroupElement.parse(F2, "a b")
    assert (g * g.inv()) == GroupElement.identity(F2)
    assert g.word_length() == 2


def test_resource_error_is_runtime_error():
    assert issubclass(ResourceError, RuntimeError)
