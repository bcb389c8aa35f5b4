"""Non-singular group actions, their cocycles and the Rosinski kernel family.

Every action realises ``phi_g(x) = g^-1 . x``, so ``phi_{g1 g2} = phi_{g2} o phi_{g1}``
and the cocycles obey

    w_{g1 g2}(x) = w_{g1}(x) * w_{g2}(phi_{g1}(x))
    c_{g1 g2}(x) = c_{g1}(x) * c_{g2}(phi_{g1}(x))

where ``w_g = d(mu o phi_g)/d mu`` and ``c_g`` is a +-1 cocycle.  All checks are
exact on cells of the backend; a cell is "fine enough for g" when ``phi_g``
maps it onto a single cell and both cocycles are constant on it.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .boundary import _lcp, rn_boundary, translate
from .groups import GroupSpec, free, lamplighter, lattice, reduce_word
from .measures import (
    BoundarySpace,
    FiniteSpace,
    LatticeCountingSpace,
    ProductCell,
    SimpleFunction,
    as_fraction,
    exact_root,
    lp_norm,
    product_cell_mass,
)

__all__ = [
    "NonsingularAction",
    "PointAction",
    "BoundaryAction",
    "RosinskiKernel",
    "MaharamAction",
    "BUILTIN_ACTIONS",
    "builtin_action",
    "rosinski_f",
    "kernel_pieces",
    "maharam_extend",
    "check_weakly_wandering",
    "cocycle_audit",
    "maharam_audit",
]


class NonsingularAction:
    """Base class; subclasses provide ``refine_for``, ``apply``, ``rn`` and ``sign``."""

    def __init__(self, name: str, group: GroupSpec, space, ground_truth: str, description: str = ""):
        if ground_truth not in ("null", "positive"):
            raise ValueError("ground_truth must be 'null' or 'positive'")
        self.name = name
        self.group = group
        self.space = space
        self.ground_truth = ground_truth
        self.description = description

    # -- to implement -----------------------------------------------------

    def refine_for(self, cells, *gs) -> list:
        """Refine ``cells`` so that ``phi_{g_1}``, then ``phi_{g_2}`` on the image, ... act cellwise."""
        raise NotImplementedError

    def apply(self, g, cell):
        """``phi_g(cell)`` for a cell fine enough for ``g``."""
        raise NotImplementedError

    def rn(self, g, cell) -> Fraction:
        raise NotImplementedError

    def sign(self, g, cell) -> int:
        return 1

    def probe_cells(self, depth: int) -> list:
        """A disjoint family of cells covering the region audits look at."""
        raise NotImplementedError

    def audit_cells(self, depth: int) -> list:
        """Cells for exhaustive audits; may overlap (coarser levels included)."""
        return self.probe_cells(depth)

    # -- derived ----------------------------------------------------------

    def image(self, g, region) -> tuple:
        return self.space.normalize(self.apply(g, x) for x in self.refine_for(list(region), g))

    def preimage(self, g, region) -> tuple:
        """``phi_g^-1(region) = phi_{g^-1}(region)``."""
        return self.image(self.group.inv(g), region)

    def rn_function(self, g, region=None) -> SimpleFunction:
        region = self.space.whole() if region is None else region
        cells = self.refine_for(list(region), g)
        return SimpleFunction(self.space, {x: self.rn(g, x) for x in cells})

    def sign_function(self, g, region=None) -> SimpleFunction:
        region = self.space.whole() if region is None else region
        cells = self.refine_for(list(region), g)
        return SimpleFunction(self.space, {x: self.sign(g, x) for x in cells})

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"


class PointAction(NonsingularAction):
    """Action on an atomic backend given pointwise."""

    def __init__(self, name, group, space, phi, ground_truth, rn=None, sign=None,
                 probe=None, description=""):
        super().__init__(name, group, space, ground_truth, description)
        self._phi = phi
        self._rn = rn
        self._sign = sign
        self._probe = probe

    def refine_for(self, cells, *gs) -> list:
        return list(cells)

    def apply(self, g, cell):
        return self._phi(g, cell)

    def rn(self, g, cell) -> Fraction:
        return Fraction(1) if self._rn is None else as_fraction(self._rn(g, cell))

    def sign(self, g, cell) -> int:
        return 1 if self._sign is None else self._sign(g, cell)

    def probe_cells(self, depth: int) -> list:
        if self._probe is not None:
            return self._probe(depth)
        return list(self.space.whole())


class BoundaryAction(NonsingularAction):
    """F_k acting on its boundary with the PS measure; ``phi_g(xi) = g^-1 xi``."""

    def __init__(self, k: int = 2):
        super().__init__(f"boundary-free-{k}", free(k), BoundarySpace(k), "null",
                         f"F_{k} on its boundary with the uniform PS measure")
        self.k = k

    def refine_for(self, cells, *gs) -> list:
        """Split a cylinder only while it is a prefix of the acting word."""
        out = []
        stack = list(cells)
        while stack:
            w = stack.pop()
            if self._fine(w, gs):
                out.append(w)
            else:
                stack.extend(self.space.children(w))
        return sorted(out, key=lambda w: (len(w), w))

    def _fine(self, w, gs) -> bool:
        for g in gs:
            if g and _lcp(w, g) == len(w):
                return False
            w = self.apply(g, w)
        return True

    def apply(self, g, cell):
        if g and _lcp(cell, g) == len(cell):
            raise ValueError(f"cylinder {cell} is too coarse for g = {g}; refine first")
        return reduce_word(self.group.inv(g) + cell)

    def image(self, g, region) -> tuple:
        return self.space.normalize(c for w in region for c in translate(self.group.inv(g), w, self.k))

    def rn(self, g, cell) -> Fraction:
        return rn_boundary(g, cell, self.k)

    def probe_cells(self, depth: int) -> list:
        return self.space.refine([()], depth)

    def audit_cells(self, depth: int) -> list:
        return [w for d in range(depth + 1) for w in self.space.refine([()], d)]


# ---------------------------------------------------------------------------
# built-ins


def _lattice_translation(d: int = 1, signed: bool = False) -> PointAction:
    def phi(g, x):
        return tuple(a - b for a, b in zip(x, g))

    def probe(depth):
        return list(itertools.product(range(-depth, depth + 1), repeat=d))

    sign = (lambda g, x: -1 if sum(g) % 2 else 1) if signed else None
    suffix = "-signed" if signed else ""
    name = f"lattice-translation-null{suffix}" + ("" if d == 1 else f"-z{d}")
    return PointAction(name, lattice(d), LatticeCountingSpace(d), phi, "null", sign=sign, probe=probe,
                       description=f"Z^{d} translating Z^{d} with counting measure")


_CYCLES = [(0, 1, 2), (3, 4)]


def _perm_power(cycle_list, n: int, points: int = 6) -> dict:
    out = {x: x for x in range(points)}
    for cyc in cycle_list:
        for i, x in enumerate(cyc):
            out[x] = cyc[(i + n) % len(cyc)]
    return out


def _finite_permutation(d: int = 1) -> PointAction:
    # d = 1: sigma = (0 1 2)(3 4); d = 2: sigma_1 = (0 1 2), sigma_2 = (3 4); 5 is fixed
    space = FiniteSpace.uniform(range(6), name="6 points", parser=int)
    cycles = [_CYCLES] if d == 1 else [[c] for c in _CYCLES]

    def phi(g, x):
        for cyc, n in zip(cycles, g):
            x = _perm_power(cyc, -n)[x]
        return x

    name = "finite-permutation-positive" + ("" if d == 1 else "-z2")
    return PointAction(name, lattice(d), space, phi, "positive",
                       description="permutation of 6 uniform points")


_LAMP_N = 3


def _lamp_reduce(g) -> tuple:
    lamps = frozenset(p for p, odd in _parity_counts(x % _LAMP_N for x in g[0]).items() if odd)
    return lamps, g[1] % _LAMP_N


def _parity_counts(xs) -> dict:
    out = {}
    for x in xs:
        out[x] = out.get(x, 0) ^ 1
    return out


def _lamp_mul(a, b):
    shift = b[1]
    return frozenset((x - shift) % _LAMP_N for x in a[0]) ^ b[0], (a[1] + b[1]) % _LAMP_N


def _lamp_inv(a):
    return frozenset((x + a[1]) % _LAMP_N for x in a[0]), (-a[1]) % _LAMP_N


def _format_lamp(x) -> str:
    return "{" + ",".join(str(v) for v in sorted(x[0])) + "}@" + str(x[1])


def _parse_lamp(text):
    lamps, pos = str(text).split("@")
    body = lamps.strip().strip("{}")
    return frozenset(int(v) for v in body.split(",") if v.strip()), int(pos)


def _lamplighter_finite() -> PointAction:
    positions = range(_LAMP_N)
    subsets = [frozenset(c) for r in range(_LAMP_N + 1) for c in itertools.combinations(positions, r)]
    points = [(s, t) for t in positions for s in subsets]
    space = FiniteSpace.uniform(points, name=f"Z2 wr Z{_LAMP_N}", formatter=_format_lamp,
                                parser=_parse_lamp)

    def phi(g, x):
        return _lamp_mul(_lamp_inv(_lamp_reduce(g)), x)

    return PointAction("lamplighter-shift-positive", lamplighter(), space, phi, "positive",
                       description=f"lamplighter acting on its finite quotient Z2 wr Z{_LAMP_N}")


BUILTIN_ACTIONS = {
    "lattice-translation-null": lambda: _lattice_translation(1),
    "lattice-translation-null-z2": lambda: _lattice_translation(2),
    "lattice-translation-null-signed": lambda: _lattice_translation(1, signed=True),
    "finite-permutation-positive": lambda: _finite_permutation(1),
    "finite-permutation-positive-z2": lambda: _finite_permutation(2),
    "boundary-free-2": lambda: BoundaryAction(2),
    "boundary-free-3": lambda: BoundaryAction(3),
    "boundary-free-4": lambda: BoundaryAction(4),
    "lamplighter-shift-positive": _lamplighter_finite,
}


def builtin_action(name: str) -> NonsingularAction:
    try:
        return BUILTIN_ACTIONS[name]()
    except KeyError:
        raise ValueError(f"unknown action {name!r}; choose from {sorted(BUILTIN_ACTIONS)}") from None


# ---------------------------------------------------------------------------
# Rosinski kernels


@dataclass
class RosinskiKernel:
    action: NonsingularAction
    f_e: SimpleFunction
    alpha: Fraction

    def __post_init__(self):
        self.alpha = as_fraction(self.alpha)
        if not 0 < self.alpha < 2:
            raise ValueError("alpha must lie in (0, 2)")
        if self.f_e.space is not self.action.space and type(self.f_e.space) is not type(self.action.space):
            raise ValueError("f_e lives on a different backend than the action")
        if lp_norm(self.f_e, self.alpha) == float("inf"):
            raise ValueError("f_e must lie in L^alpha")

    def f(self, g) -> SimpleFunction:
        return rosinski_f(self, g)

    def support_report(self, elements) -> dict:
        """Whether the supports of ``f_g`` over ``elements`` cover the (finite) space."""
        space = self.action.space
        covered = ()
        for g in elements:
            covered = space.union(covered, self.f(g).support())
        total = getattr(space, "total_mass", None)
        report = {"covered_mass": space.measure(covered), "total_mass": total}
        report["full"] = report["covered_mass"] == total
        return report


def kernel_pieces(kernel: RosinskiKernel, g) -> list:
    """``[(cell, c_g, w_g, f_e(phi_g cell))]`` over the support of ``f_e o phi_g``."""
    action = kernel.action
    pre = action.preimage(g, kernel.f_e.support())
    out = []
    for x in action.refine_for(pre, g):
        v = kernel.f_e(action.apply(g, x))
        if v != 0:
            out.append((x, action.sign(g, x), action.rn(g, x), v))
    return out


def rosinski_f(kernel: RosinskiKernel, g) -> SimpleFunction:
    """``f_g(x) = c_g(x) w_g(x)^(1/alpha) f_e(phi_g x)``.

    Values are exact Fractions when every ``w_g^(1/alpha)`` is rational,
    floats otherwise.
    """
    vals = {x: c * exact_root(w, kernel.alpha) * v for x, c, w, v in kernel_pieces(kernel, g)}
    return SimpleFunction(kernel.action.space, vals)


# ---------------------------------------------------------------------------
# Maharam extension


class MaharamAction:
    """``phi*_g(x, y) = (phi_g x, y / w_g(x))`` on ``S x (0, inf)`` with ``mu x Leb``."""

    def __init__(self, base: NonsingularAction):
        self.base = base

    def apply_star(self, g, cell: ProductCell) -> list:
        out = []
        for x in self.base.refine_for(list(cell.base), g):
            w = self.base.rn(g, x)
            out.append(ProductCell((self.base.apply(g, x),), cell.lo / w, cell.hi / w))
        return out

    def preimage_star(self, g, cell: ProductCell) -> list:
        return self.apply_star(self.base.group.inv(g), cell)

    def mass(self, cells) -> Fraction:
        return sum((product_cell_mass(self.base.space, c) for c in cells), Fraction(0))

    def return_mass(self, g, base_region, lo, hi) -> Fraction:
        """``nu(E cap (phi*_g)^-1 E)`` for ``E = base_region x (lo, hi)``.

        A point ``(x, y)`` returns iff ``phi_g x`` lies in the base and
        ``y / w_g(x)`` lies in ``(lo, hi)``.
        """
        lo, hi = as_fraction(lo), as_fraction(hi)
        space = self.base.space
        base_region = space.normalize(base_region)
        total = Fraction(0)
        for x in self.base.refine_for(list(base_region), g):
            y = self.base.apply(g, x)
            if not any(space.contains_cell(b, y) for b in base_region):
                continue
            w = self.base.rn(g, x)
            total += space.mass(x) * max(Fraction(0), min(hi, w * hi) - max(lo, w * lo))
        return total


def maharam_extend(action: NonsingularAction) -> MaharamAction:
    return MaharamAction(action)


# ---------------------------------------------------------------------------
# audits


def check_weakly_wandering(action: NonsingularAction, W, L) -> bool:
    """True iff the sets ``phi_g(W)``, ``g in L``, are pairwise disjoint."""
    space = action.space
    if space.measure(W) <= 0:
        raise ValueError("W must have positive measure")
    images = [action.image(g, W) for g in L]
    for a, b in itertools.combinations(images, 2):
        if space.measure(space.intersect(a, b)) > 0:
            return False
    return True


def cocycle_audit(action: NonsingularAction, sample_pairs, depth: int = 4) -> dict:
    """Exact check of the composition law and both chain rules.

    Every probe cell (see ``probe_cells``) is refined until both ``g1`` and
    then ``g2`` act cellwise.  Violations carry the witness cell.
    """
    group = action.group
    violations = []
    checked = 0
    for g1, g2 in sample_pairs:
        g12 = group.mul(g1, g2)
        for x in action.refine_for(action.audit_cells(depth), g1, g2):
            checked += 1
            y = action.apply(g1, x)
            w1 = action.rn(g1, x)
            found = []
            if action.apply(g12, x) != action.apply(g2, y):
                found.append({"rule": "composition"})
            lhs, rhs = action.rn(g12, x), w1 * action.rn(g2, y)
            if lhs != rhs:
                found.append({"rule": "rn", "lhs": str(lhs), "rhs": str(rhs)})
            lhs, rhs = action.sign(g12, x), action.sign(g1, x) * action.sign(g2, y)
            if lhs != rhs:
                found.append({"rule": "sign", "lhs": lhs, "rhs": rhs})
            if w1 <= 0:
                found.append({"rule": "positivity"})
            for v in found:
                violations.append({"g1": group.format(g1), "g2": group.format(g2),
                                   "cell": action.space.format_cell(x), **v})
    return {"action": action.name, "pairs": len(list(sample_pairs)), "cells_checked": checked,
            "violations": violations, "ok": not violations}


def maharam_audit(action: NonsingularAction, elements, depth: int = 4,
                  intervals=((Fraction(1, 2), Fraction(2)), (Fraction(1, 3), Fraction(3)))) -> dict:
    """Exact mass preservation of ``phi*_g`` on probe cells times the given intervals."""
    star = MaharamAction(action)
    violations = []
    checked = 0
    for g in elements:
        for x in action.refine_for(action.audit_cells(depth), g):
            for lo, hi in intervals:
                cell = ProductCell((x,), lo, hi)
                before = star.mass([cell])
                after = star.mass(star.apply_star(g, cell))
                checked += 1
                if before != after:
                    violations.append({"g": action.group.format(g), "cell": action.space.format_cell(x),
                                       "interval": [str(lo), str(hi)], "before": str(before),
                                       "after": str(after)})
    return {"action": action.name, "cells_checked": checked, "violations": violations,
            "ok": not violations}
