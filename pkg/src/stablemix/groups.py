"""Canonical arithmetic for the built-in finitely generated groups.

Four families are supported:

* ``lattice``     -- Z^d, elements are integer tuples.
* ``heisenberg``  -- integer Heisenberg group, triples ``(a, b, c)`` with
  ``(a,b,c)(a',b',c') = (a+a', b+b', c+c'+ab')``.
* ``lamplighter`` -- Z/2 wr Z, elements ``(lamps, position)`` with ``lamps`` a
  frozenset of integers.  Lamps are stored relative to the lamplighter, which
  gives the law ``(F,t)(F',t') = ((F - t') ^ F', t + t')``.  This is
  isomorphic to the textbook law through ``(F,t) -> (F + t, t)`` and maps
  generators to generators, so word lengths agree; it is the form in which the
  box sets below are *left* Folner.
* ``free``        -- free group F_k, reduced words stored as tuples of nonzero
  ints, ``i`` for the i-th generator and ``-i`` for its inverse.

Elements are plain hashable tuples so set operations are exact; ``GroupSpec``
carries the operations.  ``GroupElement`` is a thin checked wrapper for
interactive use.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

__all__ = [
    "GroupSpec",
    "GroupElement",
    "UnsupportedGroupError",
    "ResourceError",
    "lattice",
    "heisenberg",
    "lamplighter",
    "free",
    "folner_set",
    "folner_size",
    "folner_ratio",
    "shulman_bound",
    "ball",
    "sphere",
]

LETTERS = "abcdefghijklmnopqrstuvwxyz"

#: Lamplighter word lengths come from an exact BFS inside this radius and
#: from the travelling-salesman formula outside it.
LAMPLIGHTER_BFS_RADIUS = 8
HEISENBERG_BFS_CAP = 30


class UnsupportedGroupError(ValueError):
    """Operation requires a property (e.g. amenability) the group lacks."""


class ResourceError(RuntimeError):
    """An enumeration or refinement cap was exceeded."""


@dataclass(frozen=True)
class GroupSpec:
    kind: str
    d: int = 1
    k: int = 2

    def __post_init__(self):
        if self.kind not in ("lattice", "heisenberg", "lamplighter", "free"):
            raise ValueError(f"unknown group kind {self.kind!r}")
        if self.kind == "lattice" and self.d < 1:
            raise ValueError("lattice dimension must be >= 1")
        if self.kind == "free" and self.k < 2:
            raise ValueError("free group rank must be >= 2")

    # -- construction -----------------------------------------------------

    @property
    def amenable(self) -> bool:
        return self.kind != "free"

    def identity(self):
        if self.kind == "lattice":
            return (0,) * self.d
        if self.kind == "heisenberg":
            return (0, 0, 0)
        if self.kind == "lamplighter":
            return (frozenset(), 0)
        return ()

    def generators(self) -> list:
        """Standard symmetric generating set (closed under inverse)."""
        if self.kind == "lattice":
            gens = []
            for i in range(self.d):
                for s in (1, -1):
                    v = [0] * self.d
                    v[i] = s
                    gens.append(tuple(v))
            return gens
        if self.kind == "heisenberg":
            return [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0)]
        if self.kind == "lamplighter":
            return [(frozenset({0}), 0), (frozenset(), 1), (frozenset(), -1)]
        return [(s,) for i in range(1, self.k + 1) for s in (i, -i)]

    # -- arithmetic -------------------------------------------------------

    def mul(self, a, b):
        kind = self.kind
        if kind == "lattice":
            return tuple(x + y for x, y in zip(a, b))
        if kind == "heisenberg":
            return (a[0] + b[0], a[1] + b[1], a[2] + b[2] + a[0] * b[1])
        if kind == "lamplighter":
            shift = b[1]
            return (frozenset(x - shift for x in a[0]) ^ b[0], a[1] + b[1])
        return reduce_word(a + b)

    def inv(self, a):
        kind = self.kind
        if kind == "lattice":
            return tuple(-x for x in a)
        if kind == "heisenberg":
            return (-a[0], -a[1], -a[2] + a[0] * a[1])
        if kind == "lamplighter":
            return (frozenset(x + a[1] for x in a[0]), -a[1])
        return tuple(-x for x in reversed(a))

    def validate(self, a) -> None:
        """Raise ``ValueError`` unless ``a`` is a canonical element of this group."""
        kind = self.kind
        if kind == "lattice":
            ok = isinstance(a, tuple) and len(a) == self.d and all(isinstance(x, int) for x in a)
        elif kind == "heisenberg":
            ok = isinstance(a, tuple) and len(a) == 3 and all(isinstance(x, int) for x in a)
        elif kind == "lamplighter":
            ok = (isinstance(a, tuple) and len(a) == 2 and isinstance(a[0], frozenset)
                  and isinstance(a[1], int))
        else:
            ok = (isinstance(a, tuple) and all(isinstance(x, int) and 1 <= abs(x) <= self.k for x in a)
                  and all(a[i] != -a[i + 1] for i in range(len(a) - 1)))
        if not ok:
            raise ValueError(f"{a!r} is not a canonical element of {self}")

    def word_length(self, a) -> int:
        kind = self.kind
        if kind == "lattice":
            return sum(abs(x) for x in a)
        if kind == "free":
            return len(a)
        if kind == "lamplighter":
            table = _lamplighter_bfs_table()
            if a in table:
                return table[a]
            return lamplighter_length_formula(a)
        return _heisenberg_length(a)

    # -- serialisation ----------------------------------------------------

    def format(self, a) -> str:
        kind = self.kind
        if kind in ("lattice", "heisenberg"):
            return "(" + ",".join(str(x) for x in a) + ")"
        if kind == "lamplighter":
            return "({" + ",".join(str(x) for x in sorted(a[0])) + "}," + str(a[1]) + ")"
        if not a:
            return "e"
        return " ".join(LETTERS[abs(x) - 1] + ("^-1" if x < 0 else "") for x in a)

    def parse(self, text):
        text = str(text).strip()
        kind = self.kind
        if kind == "free":
            if text in ("", "e", "1"):
                return ()
            tokens = re.findall(r"([a-z])\s*(\^-1|\^\{-1\}|⁻¹)?|(\S)", text.replace(" ", ""))
            word = []
            for letter, neg, junk in tokens:
                if junk or LETTERS.index(letter) >= self.k:
                    raise ValueError(f"cannot parse free-group word {text!r}")
                i = LETTERS.index(letter) + 1
                word.append(-i if neg else i)
            return reduce_word(tuple(word))
        if kind == "lamplighter":
            m = re.fullmatch(r"\(\s*\{([^}]*)\}\s*,\s*(-?\d+)\s*\)", text)
            if not m:
                raise ValueError(f"cannot parse lamplighter element {text!r}")
            lamps = frozenset(int(x) for x in m.group(1).split(",") if x.strip())
            return (lamps, int(m.group(2)))
        inner = text.strip("()")
        values = tuple(int(x) for x in inner.split(",") if x.strip())
        self.validate(values)
        return values

    def to_config(self) -> dict:
        if self.kind == "lattice":
            return {"kind": "lattice", "d": self.d}
        if self.kind == "free":
            return {"kind": "free", "k": self.k}
        return {"kind": self.kind}

    @classmethod
    def from_config(cls, cfg: dict) -> "GroupSpec":
        cfg = dict(cfg)
        kind = cfg.pop("kind")
        aliases = {"int_lattice": "lattice", "intlattice": "lattice", "z": "lattice"}
        kind = aliases.get(kind.lower(), kind.lower())
        allowed = {"lattice": {"d"}, "free": {"k"}}.get(kind, set())
        extra = set(cfg) - allowed
        if extra:
            raise ValueError(f"unknown group keys {sorted(extra)}")
        return cls(kind, **cfg)

    def __str__(self):
        if self.kind == "lattice":
            return f"IntLattice({self.d})"
        if self.kind == "free":
            return f"Free({self.k})"
        return self.kind.capitalize()


def lattice(d: int = 1) -> GroupSpec:
    return GroupSpec("lattice", d=d)


def heisenberg() -> GroupSpec:
    return GroupSpec("heisenberg")


def lamplighter() -> GroupSpec:
    return GroupSpec("lamplighter")


def free(k: int = 2) -> GroupSpec:
    return GroupSpec("free", k=k)


@dataclass(frozen=True)
class GroupElement:
    """An element bound to its group, with operator overloads.

    >>> F = free(2)
    >>> GroupElement.parse(F, "a b") * GroupElement.parse(F, "b^-1 a")
    GroupElement(a a)
    """

    spec: GroupSpec
    value: object = field(compare=True)

    @classmethod
    def parse(cls, spec: GroupSpec, text: str) -> "GroupElement":
        return cls(spec, spec.parse(text))

    @classmethod
    def identity(cls, spec: GroupSpec) -> "GroupElement":
        return cls(spec, spec.identity())

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        if not isinstance(other, GroupElement):
            return NotImplemented
        if other.spec != self.spec:
            raise ValueError(f"cannot multiply elements of {self.spec} and {other.spec}")
        return GroupElement(self.spec, self.spec.mul(self.value, other.value))

    def inv(self) -> "GroupElement":
        return GroupElement(self.spec, self.spec.inv(self.value))

    def word_length(self) -> int:
        return self.spec.word_length(self.value)

    def __str__(self):
        return self.spec.format(self.value)

    def __repr__(self):
        return f"GroupElement({self})"


# ---------------------------------------------------------------------------
# free-group helpers


def reduce_word(word: tuple) -> tuple:
    out = []
    for x in word:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def free_sphere(k: int, r: int):
    """Yield all reduced words of length exactly ``r`` in lexicographic order."""
    letters = [s for i in range(1, k + 1) for s in (i, -i)]
    if r == 0:
        yield ()
        return
    stack = [((x,), 1) for x in reversed(letters)]
    while stack:
        word, n = stack.pop()
        if n == r:
            yield word
            continue
        last = word[-1]
        for x in reversed(letters):
            if x != -last:
                stack.append((word + (x,), n + 1))


# ---------------------------------------------------------------------------
# word lengths that need search


def lamplighter_length_formula(a) -> int:
    """Word length of a lamplighter element (relative-lamp form).

    The lamplighter starts at 0, must visit every lit lamp (absolute positions)
    and stop at ``t``; each lit lamp costs one toggle.
    """
    lamps, t = a
    absolute = [x + t for x in lamps]
    lo = min(absolute + [0, t])
    hi = max(absolute + [0, t])
    left_first = -lo + (hi - lo) + (hi - t)
    right_first = hi + (hi - lo) + (t - lo)
    return len(lamps) + min(left_first, right_first)


def _bfs(spec: GroupSpec, radius: int) -> dict:
    dist = {spec.identity(): 0}
    frontier = [spec.identity()]
    gens = spec.generators()
    for r in range(1, radius + 1):
        nxt = []
        for x in frontier:
            for s in gens:
                y = spec.mul(x, s)
                if y not in dist:
                    dist[y] = r
                    nxt.append(y)
        frontier = nxt
    return dist


@lru_cache(maxsize=None)
def _lamplighter_bfs_table() -> dict:
    return _bfs(lamplighter(), LAMPLIGHTER_BFS_RADIUS)


class _HeisenbergBFS:
    def __init__(self):
        self.spec = heisenberg()
        self.dist = {self.spec.identity(): 0}
        self.frontier = [self.spec.identity()]
        self.radius = 0

    def grow(self):
        if self.radius >= HEISENBERG_BFS_CAP:
            raise ResourceError(f"Heisenberg word length beyond BFS cap {HEISENBERG_BFS_CAP}")
        self.radius += 1
        nxt = []
        for x in self.frontier:
            for s in self.spec.generators():
                y = self.spec.mul(x, s)
                if y not in self.dist:
                    self.dist[y] = self.radius
                    nxt.append(y)
        self.frontier = nxt


_HEIS = None


def _heisenberg_length(a) -> int:
    global _HEIS
    if _HEIS is None:
        _HEIS = _HeisenbergBFS()
    # |a| + |b| is a lower bound, so the search always terminates for the
    # element's true radius as long as that radius is under the cap.
    while a not in _HEIS.dist:
        _HEIS.grow()
    return _HEIS.dist[a]


# ---------------------------------------------------------------------------
# balls


def ball(spec: GroupSpec, r: int) -> list:
    """All elements of word length <= r (identity first)."""
    if r < 0:
        return []
    if spec.kind == "free":
        return [w for n in range(r + 1) for w in free_sphere(spec.k, n)]
    if spec.kind == "lattice":
        out = []
        for v in itertools.product(range(-r, r + 1), repeat=spec.d):
            if sum(abs(x) for x in v) <= r:
                out.append(v)
        out.sort(key=lambda v: (sum(abs(x) for x in v), v))
        return out
    if spec.kind == "lamplighter" and r <= LAMPLIGHTER_BFS_RADIUS:
        table = _lamplighter_bfs_table()
        return [x for x, n in table.items() if n <= r]
    return list(_bfs(spec, r))


def sphere(spec: GroupSpec, r: int) -> list:
    if spec.kind == "free":
        return list(free_sphere(spec.k, r))
    return [x for x in ball(spec, r) if spec.word_length(x) == r]


# ---------------------------------------------------------------------------
# Folner sequences


def _require_amenable(spec: GroupSpec):
    if not spec.amenable:
        raise UnsupportedGroupError(f"{spec} is not amenable; use balls instead of Folner sets")


def folner_set(spec: GroupSpec, n: int) -> list:
    """The n-th set of the built-in increasing Folner sequence.

    * lattice: the box ``[-n, n]^d``
    * heisenberg: ``|a|, |b| <= n`` and ``|c| <= n^2``
    * lamplighter: lamps inside ``[-n, n]`` and position in ``[-n, n]``
    """
    _require_amenable(spec)
    if n < 0:
        raise ValueError("n must be >= 0")
    if spec.kind == "lattice":
        return list(itertools.product(range(-n, n + 1), repeat=spec.d))
    if spec.kind == "heisenberg":
        rng = range(-n, n + 1)
        return [(a, b, c) for a in rng for b in rng for c in range(-n * n, n * n + 1)]
    window = list(range(-n, n + 1))
    subsets = []
    for size in range(len(window) + 1):
        subsets.extend(frozenset(c) for c in itertools.combinations(window, size))
    return [(s, t) for t in window for s in subsets]


def folner_size(spec: GroupSpec, n: int) -> int:
    _require_amenable(spec)
    side = 2 * n + 1
    if spec.kind == "lattice":
        return side ** spec.d
    if spec.kind == "heisenberg":
        return side * side * (2 * n * n + 1)
    return 2 ** side * side


def _overlap_count(spec: GroupSpec, g, n: int) -> int:
    """``|{h in F_n : g h in F_n}|`` by counting rather than enumeration."""
    if spec.kind == "lattice":
        out = 1
        for x in g:
            out *= max(0, 2 * n + 1 - abs(x))
        return out
    if spec.kind == "heisenberg":
        a0, b0, c0 = g
        c_max = n * n
        total = 0
        for a in range(max(-n, -n - a0), min(n, n - a0) + 1):
            for b in range(max(-n, -n - b0), min(n, n - b0) + 1):
                # need |c| <= c_max and |c + c0 + a0*b| <= c_max
                off = c0 + a0 * b
                lo = max(-c_max, -c_max - off)
                hi = min(c_max, c_max - off)
                if hi >= lo:
                    total += hi - lo + 1
        return total
    lamps, s = g
    count_t = 0
    for t in range(-n, n + 1):
        if abs(s + t) > n:
            continue
        if all(-n <= x - t <= n for x in lamps):
            count_t += 1
    return count_t * 2 ** (2 * n + 1)


def folner_ratio(spec: GroupSpec, g, n: int) -> Fraction:
    """Exact ``|g F_n symdiff F_n| / |F_n|``."""
    size = folner_size(spec, n)
    return Fraction(2 * (size - _overlap_count(spec, g, n)), size)


def folner_ratio_enumerated(spec: GroupSpec, g, n: int) -> Fraction:
    """Same quantity by brute-force set difference (oracle for small n)."""
    fset = set(folner_set(spec, n))
    moved = {spec.mul(g, h) for h in fset}
    return Fraction(len(moved ^ fset), len(fset))


def _product_inverse_count(spec: GroupSpec, n: int) -> int:
    """``|F_{n-1}^{-1} F_n|``, which equals the union over k < n since F_k increase."""
    m = n - 1
    if spec.kind == "lattice":
        return (2 * (n + m) + 1) ** spec.d
    if spec.kind == "heisenberg":
        # (a1,b1,c1)^-1 ranges over (-a,-b,-c+ab); multiply by (a2,b2,c2):
        # result (A, B, C) with C in an interval determined by (a1,b1,a2,b2).
        intervals = {}
        m2, n2 = m * m, n * n
        for a1 in range(-m, m + 1):
            for b1 in range(-m, m + 1):
                # inverse element (x, y, z) = (-a1, -b1, -c1 + a1*b1), |c1| <= m2
                x, y = -a1, -b1
                z_lo, z_hi = a1 * b1 - m2, a1 * b1 + m2
                for a2 in range(-n, n + 1):
                    for b2 in range(-n, n + 1):
                        off = x * b2
                        lo, hi = z_lo - n2 + off, z_hi + n2 + off
                        intervals.setdefault((x + a2, y + b2), []).append((lo, hi))
        total = 0
        for ivs in intervals.values():
            ivs.sort()
            cur_lo, cur_hi = ivs[0]
            for lo, hi in ivs[1:]:
                if lo > cur_hi + 1:
                    total += cur_hi - cur_lo + 1
                    cur_lo, cur_hi = lo, hi
                else:
                    cur_hi = max(cur_hi, hi)
            total += cur_hi - cur_lo + 1
        return total
    # lamplighter: position s = t2 - t, lamps any subset of the union of
    # [-m - s, m - s] and [-n, n].
    total = 0
    for s in range(-(n + m), n + m + 1):
        lo = min(-n, -m - s)
        hi = max(n, m - s)
        total += 2 ** (hi - lo + 1)
    return total


def shulman_bound(spec: GroupSpec, n_max: int) -> Fraction:
    """Max over ``2 <= n <= n_max`` of ``|U_{k<n} F_k^-1 F_n| / |F_n|`` (k >= 1)."""
    _require_amenable(spec)
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    return max(Fraction(_product_inverse_count(spec, n), folner_size(spec, n))
               for n in range(2, n_max + 1))


def shulman_bound_enumerated(spec: GroupSpec, n_max: int) -> Fraction:
    """Brute-force oracle for :func:`shulman_bound` (small n only)."""
    best = Fraction(0)
    for n in range(2, n_max + 1):
        fn = folner_set(spec, n)
        union = set()
        for k in range(1, n):
            for x in folner_set(spec, k):
                xi = spec.inv(x)
                union.update(spec.mul(xi, y) for y in fn)
        best = max(best, Fraction(len(union), len(fn)))
    return best
