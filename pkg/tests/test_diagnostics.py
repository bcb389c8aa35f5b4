from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stablemix.actions import BUILTIN_ACTIONS, BoundaryAction, MaharamAction, RosinskiKernel, builtin_action
from stablemix.diagnostics import (
    DecayTable,
    averaging_set,
    decay_verdict,
    density_zero_extract,
    f_mixing_empirical,
    free_ball_size,
    gross_average,
    gross_value,
    mpns_average,
    mpns_value,
    neveu_classify,
    truncation_audit,
)
from stablemix.cli import _default_f_e
from stablemix.groups import ball, free, lattice
from stablemix.measures import SimpleFunction


def _point(action, cell):
    return SimpleFunction.indicator(action.space, [cell])


def test_decay_verdict_rules():
    rows = lambda vs: [(i, v, None, None) for i, v in enumerate(vs)]
    assert decay_verdict(rows([1, 0.5, 0.01])) == "decays"
    assert decay_verdict(rows([0, 0, 0])) == "decays"
    assert decay_verdict(rows([1, 0.9, 0.8])) == "stalls"
    assert decay_verdict(rows([1, 0.4, 0.3])) == "inconclusive"
    assert decay_verdict([]) == "inconclusive"


def test_decay_table_csv_rows():
    t = DecayTable([(2, 0.5, Fraction(1, 2), None), (1, 1.0, Fraction(1), None)])
    rows = t.csv_rows()
    assert [r["n"] for r in rows] == [1, 2]
    assert rows[1]["exact_p_over_q"] == "1/2"
    assert all(r["verdict"] == t.verdict for r in rows)


def test_gross_lattice_closed_form():
    action = builtin_action("lattice-translation-null")
    f_e = _point(action, (0,))
    ns = [1, 2, 3, 8, 64]
    table = gross_average(action, f_e, 1, Fraction(1, 2), Fraction(1, 2), ns)
    assert [r[2] for r in table.rows] == [Fraction(1, 2 * n + 1) for n in ns]
    assert table.verdict == "decays"


@settings(max_examples=20, deadline=None)
@given(g=st.integers(-5, 5), alpha=st.sampled_from([Fraction(1, 2), Fraction(1), Fraction(3, 2)]))
def test_gross_lattice_single_element(g, alpha):
    action = builtin_action("lattice-translation-null")
    f_e = _point(action, (0,))
    assert gross_value(action, f_e, alpha, Fraction(1, 2), Fraction(1, 2), (g,)) == (1 if g == 0 else 0)


def test_gross_finite_is_constant():
    action = builtin_action("finite-permutation-positive")
    table = gross_average(action, _point(action, 5), 1, Fraction(1, 2), Fraction(1, 2), [1, 2, 4, 8])
    assert all(r[2] == Fraction(1, 6) for r in table.rows)
    assert table.verdict == "stalls"


def test_gross_boundary_decays():
    action = BoundaryAction(2)
    f_e = SimpleFunction.indicator(action.space, (1,))
    table = gross_average(action, f_e, 1, Fraction(1, 2), Fraction(1, 2), [2, 4])
    assert [r[2] for r in table.rows] == [Fraction(5, 204), Fraction(17, 2484)]


def test_mpns_values():
    action = BoundaryAction(2)
    assert mpns_value(action, [()], Fraction(1, 2), 2, (1,)) == Fraction(1, 4)
    lat = builtin_action("lattice-translation-null")
    base = [(i,) for i in range(10)]
    t = mpns_average(lat, base, (1, 2), [1, 4, 16, 64])
    # sum_g |base cap (base + g)| = 10 + 2 sum_{j<=min(n,9)} (10 - j), over 2n + 1
    assert [r[2] for r in t.rows] == [Fraction(28, 3), Fraction(70, 9), Fraction(100, 33), Fraction(100, 129)]
    with pytest.raises(ValueError):
        mpns_value(action, [()], 1, float("inf"), (1,))


@settings(max_examples=15, deadline=None)
@given(g=st.sampled_from(ball(free(2), 2)))
def test_mpns_fast_path_agrees_with_generic(g):
    action = BoundaryAction(2)
    generic = MaharamAction(action).return_mass(g, [()], Fraction(1, 2), 2)
    assert mpns_value(action, [()], Fraction(1, 2), Fraction(2), g) == generic


@pytest.mark.parametrize("alpha", [Fraction(1), Fraction(3, 2), Fraction(1, 2)])
def test_truncation_audit_boundary(alpha):
    action = BoundaryAction(2)
    f_e = SimpleFunction(action.space, {(1,): Fraction(1), (2,): Fraction(3, 2)})
    rep = truncation_audit(action, f_e, alpha, Fraction(1, 2), Fraction(1, 2),
                           [Fraction(1, 2), 1, Fraction(3, 2), 3, 9], Fraction(3, 2),
                           ball(free(2), 2), depth=3)
    assert rep["ok"], rep["violations"][:2]
    assert rep["rows"]


def test_truncation_audit_preconditions():
    lat = builtin_action("lattice-translation-null")
    with pytest.raises(ValueError):
        truncation_audit(lat, _point(lat, (0,)), 1, Fraction(1, 2), Fraction(1, 2), [2], 1)
    action = BoundaryAction(2)
    with pytest.raises(ValueError):
        truncation_audit(action, SimpleFunction.indicator(action.space, (1,), 5), 1,
                         Fraction(1, 2), Fraction(1, 2), [2], 1)


@pytest.mark.parametrize("name", sorted(BUILTIN_ACTIONS))
def test_neveu_matches_ground_truth(name):
    action = builtin_action(name)
    res = neveu_classify(action)
    expected = {"null": "null-evidence", "positive": "positive-evidence"}[action.ground_truth]
    assert res["verdict"] == expected


def test_free_ball_size():
    for k, m in [(2, 3), (3, 2)]:
        assert free_ball_size(k, m) == len(ball(free(k), m))


def test_averaging_set_kinds():
    assert len(averaging_set(lattice(1), "auto", 3)) == 7
    assert len(averaging_set(free(2), "auto", 1)) == 5
    with pytest.raises(ValueError):
        averaging_set(lattice(1), "cube", 2)


def test_density_zero_point_mass():
    res = density_zero_extract({(n,): Fraction(int(n == 0)) for n in range(-40, 41)}, lattice(1), [1, 2, 4, 8, 16])
    assert res.E == frozenset({(0,)})
    assert [d for _, d in res.densities] == [Fraction(1, 2 * n + 1) for n in (1, 2, 4, 8, 16)]


def test_density_zero_reciprocal():
    psi = {(n,): (Fraction(1, abs(n)) if n else Fraction(0)) for n in range(-400, 401)}
    res = density_zero_extract(psi, lattice(1), [j * j for j in range(1, 21)])
    assert res.E == frozenset({(1,), (-1,)})
    dens = [d for _, d in res.densities]
    assert all(b <= a for a, b in zip(dens, dens[1:]))
    assert all(v < Fraction(1, j) for (j, _), (_, v) in zip(res.windows, res.off_sup))


def test_density_zero_rejects_negative():
    with pytest.raises(ValueError):
        density_zero_extract({(0,): -1}, lattice(1), [1])


def test_f_mixing_independent_fixture():
    # disjoint translates of a point: Y_h and Y_e are independent for h != e
    action = builtin_action("lattice-translation-null")
    kernel = RosinskiKernel(action, _point(action, (0,)), Fraction(3, 2))
    table = f_mixing_empirical(kernel, (0.0, float("inf")), (0.0, float("inf")), [(0,)], [1, 2],
                               replicates=2000, seed=3, series_terms=300, exclude_identity=True)
    assert all(v < 3 * se for _, v, _, se in table.rows)
    assert table.verdict == "inconclusive"


def test_f_mixing_positive_stalls():
    action = builtin_action("finite-permutation-positive")
    kernel = RosinskiKernel(action, _point(action, 5), Fraction(3, 2))
    table = f_mixing_empirical(kernel, (0.0, float("inf")), (0.0, float("inf")), [(0,)], [1, 4],
                               replicates=2000, seed=3, series_terms=300)
    assert table.verdict == "stalls"
    assert table.cells and {"n", "h", "value", "se"} <= set(table.cells[0])


def test_f_mixing_validation():
    action = builtin_action("finite-permutation-positive")
    kernel = RosinskiKernel(action, _point(action, 5), Fraction(3, 2))
    with pytest.raises(ValueError):
        f_mixing_empirical(kernel, (0, 1), (0, 1), [(0,)], [1], replicates=10)
    with pytest.raises(ValueError):
        f_mixing_empirical(kernel, (0, 1), (0, 1), [(0,)] * 3, [1], replicates=1000)


@pytest.mark.parametrize("name", sorted(BUILTIN_ACTIONS))
def test_gross_and_mpns_verdicts_agree(name):
    action = builtin_action(name)
    nev = neveu_classify(action)
    ns = [r[0] for r in nev["table"].rows]
    f_e = SimpleFunction.from_records(action.space, _default_f_e(action))
    gross = gross_average(action, f_e, 1, Fraction(1, 2), Fraction(1, 2), ns)
    assert (gross.verdict == "decays") == (nev["verdict"] == "null-evidence")


def test_f_mixing_independent_cells():
    action = builtin_action("lattice-translation-null")
    kernel = RosinskiKernel(action, _point(action, (0,)), Fraction(3, 2))
    table = f_mixing_empirical(kernel, (0.5, float("inf")), (-1.0, 1.0), [(0,)], [1, 2, 4],
                               replicates=3000, seed=11, series_terms=300, exclude_identity=True)
    within = [c["value"] < 3 * c["se"] for c in table.cells]
    assert sum(within) >= 0.95 * len(within)
