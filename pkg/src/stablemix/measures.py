"""Exactly computable measure spaces and simple functions over them.

Three backends share one duck-typed interface (``mass``, ``measure``,
``normalize``, ``intersect``, ``difference``, ``common_refinement``,
``parse_cell``/``format_cell``):

``FiniteSpace``
    finitely many weighted points.
``LatticeCountingSpace``
    counting measure on Z^d.  Infinite, so only finite regions are ever
    materialised; every reported measure is exact for the queried region.
``BoundarySpace``
    the space of infinite reduced words of F_k with its Patterson-Sullivan
    (uniform) measure.  Cells are cylinders ``C_w`` indexed by reduced
    prefixes ``w`` (tuples, see :mod:`stablemix.groups`).

All masses are :class:`fractions.Fraction`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

from .groups import LETTERS, ResourceError, free, reduce_word

__all__ = [
    "FiniteSpace",
    "LatticeCountingSpace",
    "BoundarySpace",
    "SimpleFunction",
    "ProductCell",
    "product_cell_mass",
    "lp_norm",
    "lp_norm_power",
    "combine",
    "alpha_power",
    "exact_root",
    "as_fraction",
]

#: Default cap on cylinder refinement depth.
MAX_DEPTH = 16


def as_fraction(x) -> Fraction:
    """Convert ints, Fractions, decimal strings and ``"p/q"`` strings exactly."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        return Fraction(str(x))
    raise TypeError(f"cannot convert {x!r} to an exact rational")


def _int_root(n: int, p: int):
    """Exact integer p-th root of ``n >= 0`` or None."""
    if n < 2:
        return n
    r = round(n ** (1.0 / p))
    for cand in (r - 1, r, r + 1):
        if cand >= 0 and cand ** p == n:
            return cand
    # float rounding can be far off for huge n; fall back to bisection
    lo, hi = 0, 1 << (n.bit_length() // p + 1)
    while lo < hi:
        mid = (lo + hi) // 2
        if mid ** p < n:
            lo = mid + 1
        else:
            hi = mid
    return lo if lo ** p == n else None


def exact_root(w, alpha):
    """``w ** (1/alpha)`` as a Fraction when it is rational, else a float.

    ``alpha`` is taken as an exact rational ``p/q`` so the exponent is ``q/p``.
    """
    w = as_fraction(w)
    a = as_fraction(alpha)
    if w < 0:
        raise ValueError("root of a negative number")
    p, q = a.numerator, a.denominator
    num, den = _int_root(w.numerator ** q, p), _int_root(w.denominator ** q, p)
    if num is not None and den is not None:
        return Fraction(num, den)
    return float(w) ** (1.0 / float(a))


def alpha_power(v, alpha):
    """``|v| ** alpha`` exactly when rational, else a float."""
    a = as_fraction(alpha)
    if isinstance(v, float):
        return abs(v) ** float(a)
    v = abs(as_fraction(v))
    p, q = a.numerator, a.denominator
    num, den = _int_root(v.numerator ** p, q), _int_root(v.denominator ** p, q)
    if num is not None and den is not None:
        return Fraction(num, den)
    return float(v) ** float(a)


# ---------------------------------------------------------------------------
# discrete spaces


class FiniteSpace:
    """Finitely many points with positive rational weights."""

    atomic = True

    def __init__(self, weights: dict, name: str = "finite", formatter=str, parser=None):
        if not weights:
            raise ValueError("a finite space needs at least one point")
        self.weights = {x: as_fraction(w) for x, w in weights.items()}
        if any(w <= 0 for w in self.weights.values()):
            raise ValueError("all weights must be positive")
        self.points = tuple(self.weights)
        self.name = name
        self._formatter = formatter
        self._parser = parser

    @classmethod
    def uniform(cls, points, total=1, **kw) -> "FiniteSpace":
        points = list(points)
        w = Fraction(total) / len(points)
        return cls({x: w for x in points}, **kw)

    @property
    def total_mass(self) -> Fraction:
        return sum(self.weights.values(), Fraction(0))

    @property
    def is_probability(self) -> bool:
        return self.total_mass == 1

    def whole(self) -> tuple:
        return self.points

    def mass(self, cell) -> Fraction:
        try:
            return self.weights[cell]
        except KeyError:
            raise ValueError(f"{cell!r} is not a point of {self.name}") from None

    def normalize(self, region) -> tuple:
        cells = set(region)
        for x in cells:
            self.mass(x)
        return tuple(sorted(cells, key=repr))

    def measure(self, region) -> Fraction:
        return sum((self.mass(x) for x in set(region)), Fraction(0))

    def intersect(self, r1, r2) -> tuple:
        return tuple(sorted(set(r1) & set(r2), key=repr))

    def union(self, r1, r2) -> tuple:
        return self.normalize(set(r1) | set(r2))

    def difference(self, r1, r2) -> tuple:
        return tuple(sorted(set(r1) - set(r2), key=repr))

    def common_refinement(self, *cell_lists) -> list:
        return sorted({x for cells in cell_lists for x in cells}, key=repr)

    def contains_cell(self, outer, inner) -> bool:
        return outer == inner

    def format_cell(self, cell) -> str:
        return self._formatter(cell)

    def parse_cell(self, text):
        if self._parser is not None:
            cell = self._parser(text)
        else:
            cell = int(text) if isinstance(text, str) else text
        self.mass(cell)
        return cell


class LatticeCountingSpace:
    """Counting measure on Z^d; regions are finite point sets."""

    atomic = True
    is_probability = False
    total_mass = math.inf

    def __init__(self, d: int = 1):
        self.d = d
        self.name = f"Z^{d}"

    def whole(self):
        raise ValueError("the whole of Z^d has infinite measure and cannot be materialised")

    def _check(self, x):
        if not (isinstance(x, tuple) and len(x) == self.d and all(isinstance(v, int) for v in x)):
            raise ValueError(f"{x!r} is not a point of {self.name}")

    def mass(self, cell) -> Fraction:
        self._check(cell)
        return Fraction(1)

    def normalize(self, region) -> tuple:
        cells = set(region)
        for x in cells:
            self._check(x)
        return tuple(sorted(cells))

    def measure(self, region) -> Fraction:
        return Fraction(len(self.normalize(region)))

    def intersect(self, r1, r2) -> tuple:
        return tuple(sorted(set(r1) & set(r2)))

    def union(self, r1, r2) -> tuple:
        return self.normalize(set(r1) | set(r2))

    def difference(self, r1, r2) -> tuple:
        return tuple(sorted(set(r1) - set(r2)))

    def common_refinement(self, *cell_lists) -> list:
        return sorted({x for cells in cell_lists for x in cells})

    def contains_cell(self, outer, inner) -> bool:
        return outer == inner

    def format_cell(self, cell) -> str:
        return "(" + ",".join(str(v) for v in cell) + ")"

    def parse_cell(self, text):
        if isinstance(text, int):
            cell = (text,)
        elif isinstance(text, (list, tuple)):
            cell = tuple(int(v) for v in text)
        else:
            cell = tuple(int(v) for v in str(text).strip().strip("()").split(",") if v.strip())
        self._check(cell)
        return cell


# ---------------------------------------------------------------------------
# free-group boundary


def _is_prefix(u: tuple, v: tuple) -> bool:
    return len(u) <= len(v) and v[: len(u)] == u


class BoundarySpace:
    """Boundary of F_k with the uniform Patterson-Sullivan probability measure.

    ``mass(w) = 1 / (2k (2k-1)^(|w|-1))`` for ``|w| >= 1`` and 1 for the
    empty prefix (the whole boundary).
    """

    atomic = False
    is_probability = True
    total_mass = Fraction(1)

    def __init__(self, k: int = 2, max_depth: int = MAX_DEPTH):
        if k < 2:
            raise ValueError("rank must be >= 2")
        self.k = k
        self.q = 2 * k - 1
        self.max_depth = max_depth
        self.group = free(k)
        self.name = f"boundary(F_{k})"
        self._letters = [s for i in range(1, k + 1) for s in (i, -i)]

    def whole(self) -> tuple:
        return ((),)

    def _check(self, w):
        if not (isinstance(w, tuple) and all(isinstance(x, int) and 1 <= abs(x) <= self.k for x in w)
                and all(w[i] != -w[i + 1] for i in range(len(w) - 1))):
            raise ValueError(f"{w!r} is not a reduced prefix over F_{self.k}")

    def mass(self, cell) -> Fraction:
        n = len(cell)
        if n == 0:
            return Fraction(1)
        return Fraction(1, 2 * self.k * self.q ** (n - 1))

    def children(self, w: tuple) -> list:
        if not w:
            return [(x,) for x in self._letters]
        last = w[-1]
        return [w + (x,) for x in self._letters if x != -last]

    def refine(self, cells, depth: int) -> list:
        """Disjoint cylinders of exactly ``depth`` with the same union."""
        if depth > self.max_depth:
            raise ResourceError(f"refinement depth {depth} exceeds cap {self.max_depth}")
        out = []
        for w in self.normalize(cells):
            if len(w) > depth:
                raise ValueError(f"target depth {depth} is below prefix length {len(w)}")
            layer = [w]
            for _ in range(depth - len(w)):
                layer = [c for u in layer for c in self.children(u)]
            out.extend(layer)
        return out

    def normalize(self, region) -> tuple:
        cells = sorted(set(tuple(w) for w in region), key=lambda w: (len(w), w))
        kept = []
        for w in cells:
            self._check(w)
            if not any(_is_prefix(u, w) for u in kept):
                kept.append(w)
        return tuple(sorted(kept, key=lambda w: (len(w), w)))

    def measure(self, region) -> Fraction:
        return sum((self.mass(w) for w in self.normalize(region)), Fraction(0))

    def intersect(self, r1, r2) -> tuple:
        out = []
        for u in self.normalize(r1):
            for v in self.normalize(r2):
                if _is_prefix(u, v):
                    out.append(v)
                elif _is_prefix(v, u):
                    out.append(u)
        return self.normalize(out)

    def union(self, r1, r2) -> tuple:
        return self.normalize(list(r1) + list(r2))

    def _minus(self, u: tuple, v: tuple) -> list:
        """``C_u \\ C_v`` as disjoint cylinders."""
        if _is_prefix(v, u):
            return []
        if not _is_prefix(u, v):
            return [u]
        out = []
        cur = u
        while len(cur) < len(v):
            nxt = v[: len(cur) + 1]
            out.extend(c for c in self.children(cur) if c != nxt)
            cur = nxt
        return out

    def difference(self, r1, r2) -> tuple:
        pieces = list(self.normalize(r1))
        for v in self.normalize(r2):
            pieces = [p for u in pieces for p in self._minus(u, v)]
        return self.normalize(pieces)

    def common_refinement(self, *cell_lists) -> list:
        """Disjoint cylinders on which every input cell is a union of pieces."""
        allcells = {tuple(w) for cells in cell_lists for w in cells}

        def split(u):
            if not any(len(v) > len(u) and v[: len(u)] == u for v in allcells):
                return [u]
            if len(u) >= self.max_depth:
                raise ResourceError(f"refinement depth exceeds cap {self.max_depth}")
            return [p for c in self.children(u) for p in split(c)]

        roots = self.normalize(allcells)
        return [p for u in roots for p in split(u)]

    def contains_cell(self, outer, inner) -> bool:
        return _is_prefix(outer, inner)

    def format_cell(self, cell) -> str:
        return self.group.format(cell)

    def parse_cell(self, text):
        if isinstance(text, (list, tuple)):
            cell = reduce_word(tuple(int(x) for x in text))
        else:
            t = str(text).strip()
            cell = () if t in ("", "e", "∂", "boundary", "*") else self.group.parse(t)
        self._check(cell)
        return cell

    def __repr__(self):
        return f"BoundarySpace(k={self.k})"


def word_to_str(w: tuple) -> str:
    return "".join(LETTERS[abs(x) - 1] + ("'" if x < 0 else "") for x in w) or "e"


# ---------------------------------------------------------------------------
# simple functions


class SimpleFunction:
    """A function constant on finitely many disjoint cells, zero elsewhere.

    Parameters
    ----------
    space : measure backend
    cells : dict mapping cell -> value, or iterable of ``(region, value)``
        pairs where ``region`` is a cell or a list of cells.  Overlapping
        regions are rejected.
    """

    def __init__(self, space, cells=()):
        self.space = space
        values = {}
        items = cells.items() if isinstance(cells, dict) else cells
        for region, value in items:
            region = self._as_cells(region)
            for cell in space.normalize(region):
                if cell in values:
                    raise ValueError("SimpleFunction regions overlap")
                values[cell] = value
        if not space.atomic and _overlapping(space, list(values)):
            raise ValueError("SimpleFunction regions overlap")
        self.values = {c: v for c, v in values.items() if v != 0}

    def _as_cells(self, region):
        if self.space.atomic:
            if isinstance(region, (list, set, frozenset)):
                return list(region)
            return [region]
        if isinstance(region, list) or (isinstance(region, tuple) and region and isinstance(region[0], tuple)):
            return list(region)
        return [region]

    @classmethod
    def indicator(cls, space, region, value=1) -> "SimpleFunction":
        return cls(space, [(list(region) if isinstance(region, (list, set, frozenset)) else region,
                            as_fraction(value))])

    @classmethod
    def from_records(cls, space, records) -> "SimpleFunction":
        """Build from ``[{"region": ..., "value": ...}, ...]`` config records."""
        items = []
        for rec in records:
            extra = set(rec) - {"region", "value"}
            if extra:
                raise ValueError(f"unknown SimpleFunction keys {sorted(extra)}")
            region = rec["region"]
            regs = region if isinstance(region, list) else [region]
            cells = [space.parse_cell(r) for r in regs]
            items.append((cells, as_fraction(rec["value"])))
        return cls(space, items)

    def to_records(self) -> list:
        return [{"region": self.space.format_cell(c), "value": str(v)} for c, v in self.items()]

    def items(self):
        return sorted(self.values.items(), key=lambda kv: repr(kv[0]))

    def support(self) -> tuple:
        return tuple(self.values)

    def __call__(self, cell):
        """Value on a cell lying inside one of this function's cells (or off the support)."""
        if cell in self.values:
            return self.values[cell]
        if self.space.atomic:
            return 0
        for c, v in self.values.items():
            if self.space.contains_cell(c, cell):
                return v
            if self.space.contains_cell(cell, c):
                raise ValueError(f"function is not constant on cell {cell!r}")
        return 0

    def max_abs(self):
        return max((abs(v) for v in self.values.values()), default=0)

    def scale(self, c) -> "SimpleFunction":
        return SimpleFunction(self.space, {k: c * v for k, v in self.values.items()})

    def __mul__(self, c):
        return self.scale(c)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, SimpleFunction):
            return NotImplemented
        a = combine([(1, self), (-1, other)])
        return all(v == 0 for v in a.values.values())

    def __repr__(self):
        body = ", ".join(f"{self.space.format_cell(c)}: {v}" for c, v in self.items())
        return f"SimpleFunction({{{body}}})"


def _overlapping(space, cells) -> bool:
    cells = list(cells)
    for i, u in enumerate(cells):
        for v in cells[i + 1:]:
            if space.contains_cell(u, v) or space.contains_cell(v, u):
                return True
    return False


def combine(terms) -> SimpleFunction:
    """Linear combination ``sum c_i f_i`` over the common refinement."""
    terms = list(terms)
    if not terms:
        raise ValueError("empty combination")
    space = terms[0][1].space
    cells = space.common_refinement(*[f.support() for _, f in terms])
    out = {}
    for cell in cells:
        total = 0
        for c, f in terms:
            v = f(cell)
            if v:
                total = total + c * v
        if total != 0:
            out[cell] = total
    return SimpleFunction(space, out)


def lp_norm_power(f: SimpleFunction, alpha):
    """``sum |value|^alpha * mass``: exact Fraction when every power is rational."""
    parts = [alpha_power(v, alpha) * f.space.mass(c) for c, v in f.values.items()]
    if all(isinstance(p, Fraction) for p in parts):
        return sum(parts, Fraction(0))
    return math.fsum(float(p) for p in parts)


def lp_norm(f: SimpleFunction, alpha) -> float:
    """L^alpha (quasi-)norm ``(sum |value|^alpha * mass)^(1/alpha)``."""
    a = as_fraction(alpha)
    if not 0 < a <= 2:
        raise ValueError("alpha must lie in (0, 2]")
    p = lp_norm_power(f, a)
    if p == 0:
        return 0.0
    if isinstance(p, Fraction):
        r = exact_root(p, a)
        return float(r)
    return p ** (1.0 / float(a))


# ---------------------------------------------------------------------------
# product cells for the Maharam phase space


@dataclass(frozen=True)
class ProductCell:
    """``base x (lo, hi)`` inside ``S x (0, inf)``; ``hi`` may be ``math.inf``."""

    base: tuple
    lo: Fraction
    hi: object

    def __post_init__(self):
        lo = as_fraction(self.lo)
        hi = self.hi if self.hi == math.inf else as_fraction(self.hi)
        if not (0 < lo < hi):
            raise ValueError("need 0 < lo < hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)


def product_cell_mass(space, cell: ProductCell):
    """``mu(base) * (hi - lo)``; returns ``math.inf`` for an unbounded interval."""
    m = space.measure(cell.base)
    if cell.hi == math.inf:
        return math.inf if m > 0 else Fraction(0)
    return m * (cell.hi - cell.lo)
