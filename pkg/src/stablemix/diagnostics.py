"""Mixing diagnostics: Gross averages, Maharam return averages, truncation
inequalities, an empirical F-mixing estimator, density-zero extraction and
a Neveu-part classifier.

Averages run over an increasing family ``F_n``: the built-in Folner sets for
amenable groups and word-metric balls for free groups.  Per-element values
are computed once on the largest set and reused for the smaller ones.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import boundary as bd
from ._parallel import pmap
from .actions import BoundaryAction, MaharamAction, NonsingularAction, RosinskiKernel
from .groups import GroupSpec, ball, folner_set, folner_size
from .measures import SimpleFunction, alpha_power, as_fraction
from .stable import StableFieldSpec, lepage_samples

__all__ = [
    "DecayTable",
    "decay_verdict",
    "DECAY_RULE",
    "averaging_set",
    "gross_value",
    "gross_average",
    "mpns_value",
    "mpns_average",
    "truncation_audit",
    "f_mixing_empirical",
    "DensityZeroResult",
    "density_zero_extract",
    "neveu_classify",
]

DECAY_RULE = ("decays iff value(n_max) < min(value(n_min)/4, 0.05); "
              "stalls iff value(n_max) >= value(n_min)/2; otherwise inconclusive")


@dataclass
class DecayTable:
    """Rows ``(n, value, exact, se)``; ``exact`` is a Fraction or None, ``se`` a float or None."""

    rows: list
    verdict: str = ""
    rule: str = DECAY_RULE
    label: str = ""
    cells: list = field(default_factory=list)

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: r[0])
        if not self.verdict:
            self.verdict = decay_verdict(self.rows)

    @property
    def values(self) -> list:
        return [r[1] for r in self.rows]

    def csv_rows(self) -> list:
        out = []
        for n, value, exact, se in self.rows:
            out.append({"n": n, "value": repr(float(value)),
                        "exact_p_over_q": "" if exact is None else f"{exact.numerator}/{exact.denominator}",
                        "se": "" if se is None else repr(float(se)), "verdict": self.verdict})
        return out


def decay_verdict(rows) -> str:
    values = [float(r[1]) for r in sorted(rows, key=lambda r: r[0])]
    if not values:
        return "inconclusive"
    first, last = values[0], values[-1]
    if all(v == 0 for v in values):
        return "decays"
    if last < min(first / 4, 0.05):
        return "decays"
    if last >= first / 2:
        return "stalls"
    return "inconclusive"


def averaging_set(group: GroupSpec, kind: str, n: int) -> list:
    if kind == "auto":
        kind = "folner" if group.amenable else "ball"
    if kind == "folner":
        return folner_set(group, n)
    if kind == "ball":
        return ball(group, n)
    raise ValueError(f"unknown averaging kind {kind!r}")


def _averages(group, kind, n_list, value_of, workers) -> list:
    """``[(n, exact average)]`` with per-element values computed once."""
    n_list = sorted(set(n_list))
    if not n_list:
        raise ValueError("n_list is empty")
    sets = {n: averaging_set(group, kind, n) for n in n_list}
    largest = sets[n_list[-1]]
    values = dict(zip(largest, pmap(value_of, largest, workers)))
    return [(n, sum((values[g] for g in sets[n]), Fraction(0)) / len(sets[n])) for n in n_list]


def _table(pairs, label) -> DecayTable:
    return DecayTable([(n, float(v), v, None) for n, v in pairs], label=label)


# ---------------------------------------------------------------------------
# exact comparisons of |v|^alpha * w against thresholds


def _q_power(v, w, alpha: Fraction) -> Fraction:
    """``(|v|^alpha w)^q`` for ``alpha = p/q`` as an exact rational."""
    p, q = alpha.numerator, alpha.denominator
    return abs(as_fraction(v)) ** p * as_fraction(w) ** q


def _fine_cells(action: NonsingularAction, cells, g, f: SimpleFunction) -> list:
    """Refine until both ``f`` and ``f o phi_g`` are constant on every cell."""
    out = []
    stack = list(action.refine_for(list(cells), g))
    while stack:
        x = stack.pop()
        try:
            f(x)
            f(action.apply(g, x))
        except ValueError:
            stack.extend(action.refine_for(action.space.children(x), g))
            continue
        out.append(x)
    return out


def gross_value(action: NonsingularAction, f_e: SimpleFunction, alpha, delta, eps, g) -> Fraction:
    """``mu(delta <= |f_e| <= 1/delta, |f_g| >= eps)`` exactly.

    ``|f_g| >= eps`` is decided as ``w_g |f_e o phi_g|^alpha >= eps^alpha``
    raised to the denominator of alpha, so no roots are taken.
    """
    alpha, delta, eps = as_fraction(alpha), as_fraction(delta), as_fraction(eps)
    space = action.space
    region_a = [c for c, v in f_e.values.items() if delta <= abs(v) <= 1 / delta]
    if not region_a:
        return Fraction(0)
    pre = action.preimage(g, f_e.support())
    threshold = eps ** alpha.numerator
    total = Fraction(0)
    for x in _fine_cells(action, space.intersect(region_a, pre), g, f_e):
        v = f_e(action.apply(g, x))
        if v != 0 and _q_power(v, action.rn(g, x), alpha) >= threshold:
            total += space.mass(x)
    return total


def gross_average(action: NonsingularAction, f_e: SimpleFunction, alpha, delta, eps,
                  n_list, kind: str = "auto", workers: int = 1) -> DecayTable:
    def value_of(g):
        return gross_value(action, f_e, alpha, delta, eps, g)

    return _table(_averages(action.group, kind, n_list, value_of, workers), "gross")


def mpns_value(action: NonsingularAction, base_region, lo, hi, g) -> Fraction:
    """``nu(E cap (phi*_g)^-1 E)`` for ``E = base_region x (lo, hi)``."""
    if hi == math.inf:
        raise ValueError("E must have finite product mass")
    base_region = action.space.normalize(base_region)
    if isinstance(action, BoundaryAction) and base_region == ((),):
        return bd.return_mass(g, lo, hi, action.k)
    return MaharamAction(action).return_mass(g, base_region, lo, hi)


def mpns_average(action: NonsingularAction, base_region, interval, n_list,
                 kind: str = "auto", workers: int = 1) -> DecayTable:
    lo, hi = (as_fraction(t) for t in interval)

    def value_of(g):
        return mpns_value(action, base_region, lo, hi, g)

    return _table(_averages(action.group, kind, n_list, value_of, workers), "mpns")


# ---------------------------------------------------------------------------
# truncation inequalities


def _len_overlap(intervals):
    lo = max(a for a, _ in intervals)
    hi = min(b for _, b in intervals)
    return hi - lo if hi > lo else 0


def _leq(a, b, exact: bool) -> bool:
    if exact:
        return a <= b
    return float(a) <= float(b) * (1 + 1e-12) + 1e-15


def truncation_audit(action: NonsingularAction, f_e: SimpleFunction, alpha, delta, eps,
                     L_list, K, elements=None, depth: int = 2) -> dict:
    """Check the three truncation inequalities cell by cell.

    Notation: ``A = {delta <= |f| <= 1/delta}``, ``w = w_g``, ``b = f o phi_g``.

    (i)   ``mu(A: |b|^a w > eps) <= low + high`` where ``low``/``high`` split on
          ``|b| <= L``, and ``high <= (2/eps) int |f|^a 1(|f| > L) dmu``.
    (ii)  ``mu(A: |b|^a w > eps, w > L) <= mu(w > L) <= 1/L``; when
          ``L > K^a / eps`` also ``mu(A: |b|^a w > eps, w < 1/L) = 0``.
    (iii) for ``L > 1``: ``(3/2) mu(A: w in [1/L, L], |b|^a w > eps)`` is at most
          ``(mu x Leb)(A' : |h o phi*_g|^a > eps/2)`` with
          ``h(x, y) = |f(x)| y^(-1/a) 1(1/(2L) <= y <= 2L)`` and
          ``A' = {delta^a/2 <= |h|^a <= 2 delta^-a}``.

    Everything is exact except the right side of (iii) and the tail bound
    in (i) when ``|f|^alpha`` is irrational; those use a relative tolerance
    of 1e-12 and are flagged ``exact: False``.
    """
    alpha, delta, eps, K = (as_fraction(t) for t in (alpha, delta, eps, K))
    space = action.space
    if getattr(space, "total_mass", None) != 1:
        raise ValueError("truncation audit needs a probability backend")
    if f_e.max_abs() > K:
        raise ValueError("K must bound |f_e|")
    p, q = alpha.numerator, alpha.denominator
    elements = list(elements) if elements is not None else (
        action.group.generators() + [action.group.identity()])
    base = space.common_refinement(action.probe_cells(depth), f_e.support())
    rows, violations = [], []

    for g in elements:
        cells = _fine_cells(action, base, g, f_e)
        data = []
        for x in cells:
            a, b, w = f_e(x), f_e(action.apply(g, x)), action.rn(g, x)
            data.append((x, space.mass(x), as_fraction(a), as_fraction(b), w,
                         delta <= abs(a) <= 1 / delta, _q_power(b, w, alpha) if b else Fraction(0)))
        for L in L_list:
            L = as_fraction(L)
            eps_q, half_q = eps ** q, (eps / 2) ** q
            full = sum((m for _, m, _, _, _, inA, s in data if inA and s > eps_q), Fraction(0))
            low = sum((m for _, m, _, b, _, inA, s in data if inA and abs(b) <= L and s > half_q), Fraction(0))
            high = sum((m for _, m, _, b, _, inA, s in data if inA and abs(b) > L and s > half_q), Fraction(0))
            tail = [alpha_power(v, alpha) * space.mass(c) for c, v in f_e.values.items() if abs(v) > L]
            tail_exact = all(isinstance(t, Fraction) for t in tail)
            tail_int = sum(tail, Fraction(0)) if tail_exact else math.fsum(float(t) for t in tail)
            bound_i = 2 / eps * tail_int if tail_exact else 2 / float(eps) * tail_int
            ok_i = full <= low + high and _leq(high, bound_i, tail_exact)

            big = sum((m for _, m, _, _, w, inA, s in data if inA and s > eps_q and w > L), Fraction(0))
            w_big = sum((m for _, m, _, _, w, _, _ in data if w > L), Fraction(0))
            small = sum((m for _, m, _, _, w, inA, s in data if inA and s > eps_q and w < 1 / L), Fraction(0))
            applicable = (L * eps) ** q > K ** p
            ok_ii = big <= w_big <= 1 / L and (not applicable or (small == 0 and big + small <= 1 / L))

            lhs3, rhs3, exact3 = Fraction(0), Fraction(0), True
            if L > 1:
                lhs3 = Fraction(3, 2) * sum((m for _, m, _, _, w, inA, s in data
                                             if inA and 1 / L <= w <= L and s > eps_q), Fraction(0))
                d_a = alpha_power(delta, alpha)
                for _, m, a, b, w, _, _ in data:
                    if a == 0 or b == 0:
                        continue
                    fa, fb = alpha_power(a, alpha), alpha_power(b, alpha)
                    length = _len_overlap([
                        (1 / (2 * L), 2 * L),
                        (fa * d_a / 2, 2 * fa / d_a),
                        (w / (2 * L), 2 * L * w),
                        (0, 2 * fb * w / eps),
                    ])
                    exact3 = exact3 and isinstance(length, (int, Fraction))
                    rhs3 = rhs3 + m * length
            ok_iii = _leq(lhs3, rhs3, exact3)

            row = {"g": action.group.format(g), "L": str(L),
                   "i": {"full": str(full), "low": str(low), "high": str(high),
                         "bound": str(bound_i), "exact": tail_exact, "ok": ok_i},
                   "ii": {"term": str(big + small), "w_gt_L": str(w_big), "bound": str(1 / L),
                          "applicable": applicable, "ok": ok_ii},
                   "iii": {"lhs": str(lhs3), "rhs": str(rhs3), "exact": exact3,
                           "checked": L > 1, "ok": ok_iii},
                   "cells": len(data)}
            rows.append(row)
            for key, ok in (("i", ok_i), ("ii", ok_ii), ("iii", ok_iii)):
                if not ok:
                    violations.append({"inequality": key, "g": row["g"], "L": row["L"], "detail": row[key]})
    return {"action": action.name, "alpha": str(alpha), "delta": str(delta), "eps": str(eps),
            "K": str(K), "rows": rows, "violations": violations, "ok": not violations}


# ---------------------------------------------------------------------------
# empirical F-mixing


def _inside(y, interval):
    lo, hi = interval
    return (y > lo) & (y < hi)


def f_mixing_empirical(kernel: RosinskiKernel, A, B, g_tuple, n_list, replicates: int,
                       seed: int = 0, series_terms: int = 2000, kind: str = "auto",
                       workers: int = 1, exclude_identity: bool = False) -> DecayTable:
    """Monte Carlo estimate of ``(1/|F_n|) sum_h |P[Y_{h g} in A, Y_g in B] - P[A] P[B]|``.

    ``A`` and ``B`` are open intervals applied to every coordinate of the
    tuple.  Each cell carries the propagated binomial standard error; the
    table's ``se`` column is the average cell SE over ``F_n``.  If no row's
    value reaches 3 SE the verdict is ``inconclusive``.

    The ``h = e`` term is the dependence of a variable on itself and never
    vanishes; ``exclude_identity`` drops it from every average.
    """
    if replicates < 1000:
        raise ValueError("replicates must be >= 1000")
    g_tuple = list(g_tuple)
    if not 1 <= len(g_tuple) <= 2:
        raise ValueError("g_tuple must have length 1 or 2")
    group = kernel.action.group
    n_list = sorted(set(n_list))
    sets = {n: averaging_set(group, kind, n) for n in n_list}
    if exclude_identity:
        sets = {n: [h for h in s if h != group.identity()] for n, s in sets.items()}
    hs = sets[n_list[-1]]
    index = list(dict.fromkeys(g_tuple + [group.mul(h, g) for h in hs for g in g_tuple]))
    pos = {g: i for i, g in enumerate(index)}
    spec = StableFieldSpec(kernel, index, series_terms, seed)
    Y = lepage_samples(spec, replicates, workers)
    R = replicates
    in_b = np.all([_inside(Y[:, pos[g]], B) for g in g_tuple], axis=0)
    p_b = in_b.mean()
    cells = {}
    for h in hs:
        in_a = np.all([_inside(Y[:, pos[group.mul(h, g)]], A) for g in g_tuple], axis=0)
        p_a, p_ab = in_a.mean(), (in_a & in_b).mean()
        diff = abs(p_ab - p_a * p_b)
        se = math.sqrt((p_ab * (1 - p_ab) + p_b ** 2 * p_a * (1 - p_a) + p_a ** 2 * p_b * (1 - p_b)) / R)
        cells[h] = (diff, se)
    rows = []
    for n in n_list:
        vals = [cells[h] for h in sets[n]]
        rows.append((n, float(np.mean([v for v, _ in vals])), None, float(np.mean([s for _, s in vals]))))
    cell_rows = [{"n": n, "h": group.format(h), "value": cells[h][0], "se": cells[h][1]}
                 for n in n_list for h in sets[n]]
    if all(r[1] == 0 for r in rows):
        verdict = "decays"
    elif all(r[1] < 3 * r[3] for r in rows):
        verdict = "inconclusive"
    else:
        verdict = decay_verdict(rows)
    return DecayTable(rows, verdict=verdict, label="fmix", cells=cell_rows)


# ---------------------------------------------------------------------------
# Koopman-von Neumann density-zero extraction


@dataclass
class DensityZeroResult:
    E: frozenset
    windows: list
    densities: list
    off_sup: list


def density_zero_extract(psi: dict, group: GroupSpec, n_list, kind: str = "auto") -> DensityZeroResult:
    """Nested-threshold construction of a density-zero set off which ``psi -> 0``.

    With ``E_j = {psi >= 1/j}``, window ``N_j`` is the first listed ``n`` (not
    below ``N_{j-1}``) after which ``E_j`` has density ``< 1/j`` in every
    listed ``F_n``.  Then

        E = ({psi > 0} cap F_{N_1})  union  U_j E_j cap (F_{N_{j+1}} minus F_{N_j}),

    the last level extending to the edge of the domain of ``psi``.  Off ``E``
    and outside ``F_{N_j}``, ``psi < 1/j``.
    """
    if any(v < 0 for v in psi.values()):
        raise ValueError("psi must be nonnegative")
    domain = set(psi)
    sets = {}
    for n in sorted(set(n_list)):
        s = averaging_set(group, kind, n)
        if set(s) <= domain:
            sets[n] = s
    ns = sorted(sets)
    if not ns:
        raise ValueError("no averaging set fits inside the domain of psi")
    positive = [as_fraction(v) for v in psi.values() if v > 0]
    if not positive:
        return DensityZeroResult(frozenset(), [], [(n, Fraction(0)) for n in ns],
                                 [(n, 0) for n in ns])
    levels = math.ceil(1 / min(positive)) + 1

    def density(S, n):
        return Fraction(sum(1 for g in sets[n] if g in S), len(sets[n]))

    windows = []
    prev = ns[0]
    for j in range(1, levels + 1):
        level = {g for g, v in psi.items() if v >= Fraction(1, j)}
        start = None
        for i, n in enumerate(ns):
            if n < prev:
                continue
            if all(density(level, m) < Fraction(1, j) for m in ns[i:]):
                start = n
                break
        if start is None:
            break
        windows.append((j, start))
        prev = start
    E = set()
    if windows:
        first = set(sets[windows[0][1]])
        E |= {g for g in first if psi[g] > 0}
        for idx, (j, n_j) in enumerate(windows):
            inner = set(sets[n_j])
            outer = set(sets[windows[idx + 1][1]]) if idx + 1 < len(windows) else domain
            E |= {g for g in outer - inner if psi[g] >= Fraction(1, j)}
    else:
        E = {g for g, v in psi.items() if v > 0}
    densities = [(n, density(E, n)) for n in ns]
    off_sup = []
    for j, n_j in windows:
        inner = set(sets[n_j])
        off_sup.append((n_j, max((psi[g] for g in domain - inner - E), default=0)))
    return DensityZeroResult(frozenset(E), windows, densities, off_sup)


# ---------------------------------------------------------------------------
# Neveu evidence


#: Largest free-group ball the classifier enumerates.
BALL_CAP = 25_000


def free_ball_size(k: int, m: int) -> int:
    q = 2 * k - 1
    return 1 + 2 * k * (q ** m - 1) // (q - 1)


def neveu_classify(action: NonsingularAction, horizon: int = 32, workers: int = 1) -> dict:
    """Averages of ``nu(E cap (phi*_g)^-1 E) / nu(E)`` for ``E = B x (1/2, 2)``.

    ``B`` is the whole space when its mass is finite and a single atom
    otherwise.  ``null-evidence`` if the final average is below ``1/horizon``,
    ``positive-evidence`` if it stays above that floor and the table stalls,
    ``inconclusive`` otherwise.  This is evidence, not proof.
    """
    space = action.space
    if getattr(space, "total_mass", math.inf) != math.inf:
        base = tuple(space.whole())
    else:
        base = tuple(action.probe_cells(0)[:1])
    lo, hi = Fraction(1, 2), Fraction(2)
    nu_e = space.measure(base) * (hi - lo)
    group = action.group
    if group.amenable:
        n_list = [n for n in (1, 2, 4, 8, 16, 32, 64) if n <= horizon and folner_size(group, n) <= 10 ** 5]
        kind = "folner"
    else:
        n_list = [m for m in (2, 4, 6, 8) if m <= horizon and free_ball_size(group.k, m) <= BALL_CAP]
        kind = "ball"
    table = mpns_average(action, base, (lo, hi), n_list, kind, workers)
    ratios = [(n, v / nu_e) for n, v, _, _ in ((r[0], r[2], None, None) for r in table.rows)]
    rtable = _table(ratios, "neveu")
    last = float(ratios[-1][1])
    floor = 1 / horizon
    if last < floor:
        verdict = "null-evidence"
    elif rtable.verdict == "stalls":
        verdict = "positive-evidence"
    else:
        verdict = "inconclusive"
    return {"action": action.name, "verdict": verdict, "ground_truth": action.ground_truth,
            "floor": floor, "kind": kind, "table": rtable}
