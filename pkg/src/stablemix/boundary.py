"""Exact Patterson-Sullivan and Bowen-Margulis-Sullivan computations on F_k.

The Cayley tree of F_k (degree 2k) is the hyperbolic space, ``o`` is the
identity vertex, the boundary is the set of infinite reduced words and
``mu`` is the uniform (PS) measure of :class:`~stablemix.measures.BoundarySpace`.

Conventions
-----------
* Busemann cocycle ``beta_xi(o, g.o) = lim_t d(g.o, xi_t) - d(o, xi_t)``,
  which on the tree equals ``|g| - 2 m`` with ``m`` the common-prefix length
  of ``xi`` and ``g``.
* The Radon-Nikodym cocycle of the boundary action ``phi_g(xi) = g^-1 xi`` is
  ``d(mu o phi_g)/d mu = (2k-1)^(-beta)`` exactly (conformal with C = 1).
* BMS density ``(2k-1)^(2 <x,y>_o) dmu(x) dmu(y)``: the O(1) term is 0 and the
  measure is exactly invariant.
"""
from __future__ import annotations

import math
from collections import Counter
from functools import lru_cache
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._parallel import pmap
from .groups import ResourceError, ball, free_sphere, reduce_word
from .measures import BoundarySpace, as_fraction

__all__ = [
    "PSDensity",
    "CylinderRect",
    "busemann",
    "busemann_cells",
    "rn_boundary",
    "level_sets",
    "a_set",
    "a_set_decay",
    "interval_overlap",
    "return_mass",
    "cond_suff_value",
    "cond_suff_average",
    "translate",
    "pushforward_mass",
    "gromov_product",
    "bms_mass",
    "translate_rect",
    "bms_invariance_check",
    "geodesics_through",
    "lines_near",
    "lines_near_mass",
    "cond_suff2_value",
    "cond_suff2_average",
    "srw_boundary_sample",
    "hitting_vs_ps",
]


def _lcp(u: tuple, v: tuple) -> int:
    n = min(len(u), len(v))
    i = 0
    while i < n and u[i] == v[i]:
        i += 1
    return i


def _tree_dist(x: tuple, y: tuple) -> int:
    return len(x) + len(y) - 2 * _lcp(x, y)


@dataclass(frozen=True)
class PSDensity:
    """Uniform PS density on the boundary of F_k, dimension ``v = ln(2k-1)``."""

    k: int = 2

    @property
    def q(self) -> int:
        return 2 * self.k - 1

    @property
    def v(self) -> float:
        return math.log(self.q)

    @property
    def space(self) -> BoundarySpace:
        return BoundarySpace(self.k)

    def cylinder_mass(self, w) -> Fraction:
        return self.space.mass(tuple(w))


# ---------------------------------------------------------------------------
# Busemann cocycle and the RN derivative


def busemann(g: tuple, w: tuple) -> int:
    """``beta_xi(o, g.o)`` for ``xi`` in the cylinder ``C_w``.

    Raises ``ValueError`` when the value is not constant on ``C_w`` (``w`` a
    proper prefix of ``g``); use :func:`busemann_cells` to refine.
    """
    m = _lcp(w, g)
    if m == len(w) and len(w) < len(g):
        raise ValueError(f"Busemann value not constant on C_{w}: refine to depth {len(g)}")
    return len(g) - 2 * m


def busemann_cells(g: tuple, w: tuple, k: int) -> list:
    """Refine ``C_w`` just enough that the Busemann value is constant; ``[(cell, value)]``."""
    space = BoundarySpace(k)
    out = []
    stack = [w]
    while stack:
        u = stack.pop()
        m = _lcp(u, g)
        if m == len(u) and len(u) < len(g):
            stack.extend(space.children(u))
        else:
            out.append((u, len(g) - 2 * m))
    out.sort(key=lambda cv: (len(cv[0]), cv[0]))
    return out


def rn_boundary(g: tuple, w: tuple, k: int) -> Fraction:
    """``d(mu o phi_g)/d mu`` on ``C_w`` (constant there; see :func:`busemann`)."""
    return _qpow(2 * k - 1, -busemann(g, w))


@lru_cache(maxsize=None)
def _qpow(q: int, e: int) -> Fraction:
    return Fraction(q) ** e


def level_sets(g: tuple, k: int) -> list:
    """Partition of the boundary by common-prefix length with ``g``.

    Returns ``[(m, mass, busemann)]`` for ``m = 0..|g|``; the level set for
    ``m < |g|`` is ``C_{g[:m]} minus C_{g[:m+1]}`` and for ``m = |g|`` it is
    ``C_g``.
    """
    space = BoundarySpace(k)
    n = len(g)
    out = []
    for m in range(n + 1):
        mass = space.mass(g[:m]) - (space.mass(g[: m + 1]) if m < n else 0)
        out.append((m, mass, n - 2 * m))
    return out


def a_set(K, g: tuple, k: int = 2):
    """``A(K, o, g) = {xi : |beta_xi(o, g.o)| <= K}`` as disjoint cylinders plus its exact mass."""
    K = as_fraction(K)
    space = BoundarySpace(k)
    n = len(g)
    cells = []
    mass = Fraction(0)
    for m, lmass, beta in level_sets(g, k):
        if abs(beta) <= K:
            mass += lmass
            if m < n:
                cells.extend(space.difference([g[:m]], [g[: m + 1]]))
            else:
                cells.append(g)
    return space.normalize(cells), mass


def a_set_decay(K, radius_max: int, k: int = 2) -> list:
    """Rows ``(r, max_{|g| = r} mu(A(K, o, g)))`` for ``r = 0..radius_max``."""
    if k == 2 and radius_max > 12:
        raise ResourceError("sphere enumeration capped at radius 12 for k = 2")
    rows = []
    for r in range(radius_max + 1):
        best = max(a_set_mass(K, g, k) for g in free_sphere(k, r))
        rows.append((r, best))
    return rows


def a_set_mass(K, g: tuple, k: int) -> Fraction:
    K = as_fraction(K)
    return sum((mass for _, mass, beta in level_sets(g, k) if abs(beta) <= K), Fraction(0))


# ---------------------------------------------------------------------------
# condition on the Maharam extension of the boundary action


def interval_overlap(lo1, hi1, lo2, hi2) -> Fraction:
    return max(Fraction(0), min(hi1, hi2) - max(lo1, lo2))


def return_mass(g: tuple, lo, hi, k: int = 2) -> Fraction:
    """``nu(E cap (phi*_g)^-1 E)`` for ``E = boundary x (lo, hi)``, by Busemann level sets.

    On a level set where ``w_g = w`` the fibre condition is ``y in (lo, hi)``
    and ``y / w in (lo, hi)``, an interval overlap.
    """
    lo, hi = as_fraction(lo), as_fraction(hi)
    total = Fraction(0)
    for _, mass, beta in level_sets(g, k):
        w = _qpow(2 * k - 1, -beta)
        total += mass * interval_overlap(lo, hi, w * lo, w * hi)
    return total


def cond_suff_value(K, g: tuple, k: int = 2) -> Fraction:
    """``nu((Y x (1/K, K)) cap (phi*_g)^-1 (Y x (1/K, K)))`` with ``Y`` the whole boundary."""
    K = as_fraction(K)
    return return_mass(g, 1 / K, K, k)


def _average(values_by_g, elements) -> Fraction:
    return sum(values_by_g, Fraction(0)) / len(elements)


def cond_suff_average(K, m: int, k: int = 2, workers: int = 1) -> Fraction:
    """Ball average of :func:`cond_suff_value` over ``|g| <= m``."""
    elements = ball_free(k, m)
    vals = _map(_cond_suff_task, [(K, g, k) for g in elements], workers)
    return _average(vals, elements)


def _cond_suff_task(args):
    K, g, k = args
    return cond_suff_value(K, g, k)


def ball_free(k: int, m: int) -> list:
    from .groups import free

    return ball(free(k), m)


def _map(fn, tasks, workers: int):
    """Ordered map; results merge by exact summation so scheduling is irrelevant."""
    return pmap(fn, tasks, workers)


# ---------------------------------------------------------------------------
# translating cylinders


def translate(h: tuple, w: tuple, k: int) -> list:
    """``h . C_w`` as a list of disjoint cylinders.

    If ``h`` cancels only part of ``w`` the image is the single cylinder of
    the reduced product.  Only children of a fully cancelled ``w`` need
    further splitting, so the output has ``O(|h| k)`` cylinders.
    """
    space = BoundarySpace(k)
    out = []
    stack = [w]
    while stack:
        u = stack.pop()
        if _cancelled(h, u) < len(u):
            out.append(reduce_word(h + u))
        else:
            stack.extend(space.children(u))
    return space.normalize(out)


def _cancelled(h: tuple, u: tuple) -> int:
    """Number of letters of ``u`` cancelled in the product ``h u``."""
    return _lcp(tuple(-x for x in reversed(h)), u)


def pushforward_mass(g: tuple, w: tuple, k: int) -> Fraction:
    """``mu(phi_g(C_w)) = mu(g^-1 C_w)`` computed by translating cylinders."""
    space = BoundarySpace(k)
    ginv = tuple(-x for x in reversed(g))
    return space.measure(translate(ginv, w, k))


# ---------------------------------------------------------------------------
# double boundary


def gromov_product(w1: tuple, w2: tuple) -> int:
    """Gromov product at ``o`` of any two points of ``C_w1 x C_w2`` (diverging prefixes)."""
    p = _lcp(w1, w2)
    if p == min(len(w1), len(w2)):
        raise ValueError("prefixes do not diverge; the product is not constant (diagonal)")
    return p


class CylinderRect:
    """Finite disjoint union of ``C_u x C_v`` with diverging prefixes (off the diagonal)."""

    def __init__(self, pairs, k: int = 2, cap: int = 12):
        self.k = k
        space = BoundarySpace(k)
        out = []
        for u, v in pairs:
            out.extend(_split_off_diagonal(space, tuple(u), tuple(v), cap))
        self.pairs = tuple(out)

    def gromov(self):
        return [gromov_product(u, v) for u, v in self.pairs]

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def contains_pair(self, u, v) -> bool:
        """True if ``C_u x C_v`` lies inside the rect."""
        return any(u[: len(a)] == a and v[: len(b)] == b for a, b in self.pairs)


def _split_off_diagonal(space, u, v, cap):
    p = _lcp(u, v)
    if p < min(len(u), len(v)):
        return [(u, v)]
    if max(len(u), len(v)) >= cap:
        raise ResourceError(f"pair meets the diagonal; refinement exceeded depth cap {cap}")
    if len(u) <= len(v):
        return [pr for c in space.children(u) for pr in _split_off_diagonal(space, c, v, cap)]
    return [pr for c in space.children(v) for pr in _split_off_diagonal(space, u, c, cap)]


def bms_mass(rect: CylinderRect) -> Fraction:
    """``sum (2k-1)^(2p) mu(C_u) mu(C_v)`` over the rect's pairs."""
    space = BoundarySpace(rect.k)
    q = space.q
    total = Fraction(0)
    for u, v in rect.pairs:
        total += q ** (2 * gromov_product(u, v)) * space.mass(u) * space.mass(v)
    return total


def translate_rect(g: tuple, rect: CylinderRect) -> CylinderRect:
    pairs = []
    for u, v in rect.pairs:
        for a in translate(g, u, rect.k):
            for b in translate(g, v, rect.k):
                pairs.append((a, b))
    return CylinderRect(pairs, rect.k)


def bms_invariance_check(g: tuple, rect: CylinderRect) -> dict:
    before = bms_mass(rect)
    after = bms_mass(translate_rect(g, rect))
    return {"g": g, "before": before, "after": after, "ok": before == after}


# ---------------------------------------------------------------------------
# sets of geodesic lines defined by distance constraints


def _start_pairs(space, p_max):
    for p in range(p_max + 1):
        for w in free_sphere(space.k, p):
            kids = space.children(w)
            for a in kids:
                for b in kids:
                    if a != b:
                        yield a, b


def lines_near(constraints, k: int = 2) -> CylinderRect:
    """All lines ``l`` with ``d(z, l) <= r`` for every ``(z, r)``, as an exact rect.

    On the tree, ``C_u x C_v`` with diverging ``u, v`` is the set of lines
    through the path ``u -> lcp -> v``; the distance from a vertex ``z`` to the
    line is determined unless ``z`` sits strictly beyond ``u`` or ``v``, in
    which case that side is refined.
    """
    space = BoundarySpace(k)
    constraints = [(tuple(z), int(r)) for z, r in constraints]
    if not constraints:
        raise ValueError("need at least one constraint (the set would have infinite mass)")
    p_max = min(len(z) + r for z, r in constraints)
    pairs = []
    stack = list(_start_pairs(space, p_max))
    while stack:
        u, v = stack.pop()
        side = _undetermined_side(u, v, constraints)
        if side == 0:
            if _satisfies(u, v, constraints):
                pairs.append((u, v))
        elif side == 1:
            stack.extend((c, v) for c in space.children(u))
        else:
            stack.extend((u, c) for c in space.children(v))
    pairs.sort(key=lambda uv: (len(uv[0]) + len(uv[1]), uv))
    return CylinderRect(pairs, k)


def _beyond(u, z):
    return len(z) > len(u) and z[: len(u)] == u


def _undetermined_side(u, v, constraints):
    for z, _ in constraints:
        if _beyond(u, z):
            return 1
        if _beyond(v, z):
            return 2
    return 0


def _satisfies(u, v, constraints):
    duv = _tree_dist(u, v)
    for z, r in constraints:
        if (_tree_dist(z, u) + _tree_dist(z, v) - duv) // 2 > r:
            return False
    return True


def lines_near_mass(constraints, k: int = 2) -> Fraction:
    """BMS mass of :func:`lines_near` without materialising the pairs.

    Siblings that are not ancestors of any constraint vertex behave
    identically, so each refinement step handles them with a multiplicity.
    Masses are accumulated as integer counts per power of ``2k-1``.
    """
    space = BoundarySpace(k)
    q = space.q
    constraints = [(tuple(z), int(r)) for z, r in constraints]
    p_max = min(len(z) + r for z, r in constraints)
    counts = Counter()
    stack = [(a, b, 1) for a, b in _start_pairs(space, p_max)]
    zs = [z for z, _ in constraints]
    while stack:
        u, v, mult = stack.pop()
        side = _undetermined_side(u, v, constraints)
        if side == 0:
            if _satisfies(u, v, constraints):
                p = _lcp(u, v)
                counts[len(u) + len(v) - 2 * p - 2] += mult
            continue
        grow = u if side == 1 else v
        special, plain = [], []
        for c in space.children(grow):
            (special if any(z[: len(c)] == c for z in zs) else plain).append(c)
        for c in special:
            stack.append((c, v, mult) if side == 1 else (u, c, mult))
        if plain:
            c = plain[0]
            stack.append((c, v, mult * len(plain)) if side == 1 else (u, c, mult * len(plain)))
    total = sum((Fraction(n, q ** e) for e, n in counts.items()), Fraction(0))
    return total / (4 * k * k)


def geodesics_through(r: int, k: int = 2) -> CylinderRect:
    """``Omega_A`` for ``A`` the ball of radius ``r`` about ``o``: lines with ``<x,y>_o <= r``."""
    return lines_near([((), r)], k)


def cond_suff2_value(r: int, g: tuple, k: int = 2) -> Fraction:
    """``mu_BMS(Omega_A cap g.Omega_A)``: lines meeting both ``B(o, r)`` and ``B(g.o, r)``."""
    return lines_near_mass([((), r), (tuple(g), r)], k)


def _cond_suff2_task(args):
    r, g, k = args
    return cond_suff2_value(r, g, k)


def cond_suff2_average(r: int, m: int, k: int = 2, workers: int = 1) -> Fraction:
    elements = ball_free(k, m)
    vals = _map(_cond_suff2_task, [(r, g, k) for g in elements], workers)
    return _average(vals, elements)


# ---------------------------------------------------------------------------
# simple random walk hitting measure


def srw_boundary_sample(rng: np.random.Generator, depth: int, k: int = 2, size: int | None = None):
    """Prefix of length ``depth`` of the boundary point hit by simple random walk.

    The exit law of SRW on F_k is the non-backtracking chain: first letter
    uniform over 2k, each next letter uniform over the 2k-1 letters that do
    not cancel.  With ``size`` given, returns an int array ``(size, depth)``.
    """
    if depth < 0 or depth > 8:
        raise ValueError("depth must lie in [0, 8]")
    n = 1 if size is None else size
    letters = np.array(sorted(s for i in range(1, k + 1) for s in (i, -i)))
    out = np.zeros((n, depth), dtype=np.int64)
    if depth:
        out[:, 0] = letters[rng.integers(0, 2 * k, size=n)]
        for j in range(1, depth):
            # uniform over the 2k-1 letters, skipping the slot of the cancelling one
            idx = rng.integers(0, 2 * k - 1, size=n)
            banned = np.searchsorted(letters, -out[:, j - 1])
            out[:, j] = letters[idx + (idx >= banned)]
    if size is None:
        return tuple(int(x) for x in out[0])
    return out


def hitting_vs_ps(rng: np.random.Generator, depth: int, n_samples: int, k: int = 2) -> dict:
    """Empirical cylinder frequencies of SRW exits versus exact PS masses.

    Every cylinder of depth ``1..depth`` is compared; the report holds the
    maximal absolute deviation and the maximal deviation in binomial
    standard errors.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    space = BoundarySpace(k)
    words = srw_boundary_sample(rng, depth, k, size=n_samples)
    rows = []
    for d in range(1, depth + 1):
        keys = Counter(map(tuple, words[:, :d].tolist()))
        for w in free_sphere(k, d):
            p = space.mass(w)
            freq = keys.get(w, 0) / n_samples
            se = math.sqrt(float(p) * (1 - float(p)) / n_samples)
            rows.append({"cylinder": space.format_cell(w), "exact": p, "freq": freq,
                         "se": se, "z": (freq - float(p)) / se})
    return {
        "rows": rows,
        "max_abs_dev": max(abs(r["freq"] - float(r["exact"])) for r in rows),
        "max_abs_z": max(abs(r["z"]) for r in rows),
        "n_samples": n_samples,
    }
