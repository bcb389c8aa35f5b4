"""Symmetric alpha-stable sampling and the LePage series for the field {Y_g}.

The field is ``Y_g = int f_g dM`` for an SaS random measure ``M`` with
control measure ``mu``.  Only the finite window ``W`` (union of the supports
of the ``f_g`` queried) matters, so

    Y_g = C_alpha^(1/alpha) mu(W)^(1/alpha) sum_i eps_i Gamma_i^(-1/alpha) f_g(V_i)

with ``V_i`` drawn from ``mu`` restricted to ``W`` and normalised.  Because
every ``f_g`` is a simple function, ``V_i`` only needs to be located in a
cell of the common refinement, which is a categorical draw.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._parallel import pmap
from .actions import RosinskiKernel, rosinski_f
from .measures import as_fraction, combine, lp_norm, lp_norm_power

__all__ = [
    "sas_sample",
    "c_alpha",
    "scale_of",
    "scale_power",
    "stationarity_audit",
    "StableFieldSpec",
    "FieldSample",
    "lepage_samples",
    "lepage_field",
    "lepage_tail_variance",
    "CharEstimate",
    "empirical_char",
    "char_table",
    "BLOCK_SIZE",
]

#: Replicates per independently seeded block.  Fixed so that results never
#: depend on how blocks are distributed over workers.
BLOCK_SIZE = 250


def sas_sample(rng: np.random.Generator, alpha, sigma=1.0, size=None):
    """Draw from SaS(sigma) by the Chambers-Mallows-Stuck construction.

    The characteristic function is ``exp(-sigma^alpha |theta|^alpha)``.
    """
    alpha = float(alpha)
    sigma = float(sigma)
    if not 0 < alpha <= 2:
        raise ValueError("alpha must lie in (0, 2]")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    v = rng.uniform(-math.pi / 2, math.pi / 2, size=size)
    w = rng.standard_exponential(size=size)
    if alpha == 1:
        x = np.tan(v)
    else:
        x = (np.sin(alpha * v) / np.cos(v) ** (1 / alpha)
             * (np.cos((1 - alpha) * v) / w) ** ((1 - alpha) / alpha))
    return sigma * x


def c_alpha(alpha) -> float:
    """``C_alpha = (1 - alpha) / (Gamma(2 - alpha) cos(pi alpha / 2))`` for alpha != 1."""
    a = float(alpha)
    if a == 1:
        raise ValueError("the series constant degenerates at alpha = 1")
    return (1 - a) / (math.gamma(2 - a) * math.cos(math.pi * a / 2))


# ---------------------------------------------------------------------------
# exact scale parameters


def _combination(coeffs, kernel: RosinskiKernel):
    return combine([(as_fraction(c), rosinski_f(kernel, g)) for c, g in coeffs])


def scale_power(coeffs, kernel: RosinskiKernel):
    """``||sum c_i f_{g_i}||_alpha^alpha``; a Fraction whenever the values are rational."""
    coeffs = [(c, g) for c, g in coeffs if as_fraction(c) != 0]
    if not coeffs:
        return Fraction(0)
    return lp_norm_power(_combination(coeffs, kernel), kernel.alpha)


def scale_of(coeffs, kernel: RosinskiKernel) -> float:
    """Scale parameter ``sigma`` of ``sum c_i Y_{g_i}``."""
    coeffs = [(c, g) for c, g in coeffs if as_fraction(c) != 0]
    if not coeffs:
        return 0.0
    return lp_norm(_combination(coeffs, kernel), kernel.alpha)


def stationarity_audit(kernel: RosinskiKernel, h, probes, rel_tol: float = 1e-10) -> dict:
    """Compare the scale of each probe with that of its left translate by ``h``."""
    group = kernel.action.group
    rows = []
    for probe in probes:
        shifted = [(c, group.mul(h, g)) for c, g in probe]
        a, b = scale_power(probe, kernel), scale_power(shifted, kernel)
        if isinstance(a, Fraction) and isinstance(b, Fraction):
            ok, exact = a == b, True
        else:
            ok, exact = math.isclose(float(a), float(b), rel_tol=rel_tol, abs_tol=0.0), False
        rows.append({"probe": [(str(c), group.format(g)) for c, g in probe], "h": group.format(h),
                     "before": str(a), "after": str(b), "exact": exact, "ok": ok})
    return {"rows": rows, "ok": all(r["ok"] for r in rows)}


# ---------------------------------------------------------------------------
# LePage series


@dataclass
class StableFieldSpec:
    kernel: RosinskiKernel
    index_set: list
    series_terms: int = 2000
    seed: int = 0
    tail_terms: int = 256

    def __post_init__(self):
        if self.series_terms < 100:
            raise ValueError("series_terms must be >= 100")
        if self.kernel.alpha == 1:
            raise ValueError("alpha = 1 is not supported by the series sampler")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if not self.index_set:
            raise ValueError("index_set must be nonempty")


@dataclass
class FieldSample:
    values: dict
    meta: dict = field(default_factory=dict)


def lepage_tail_variance(alpha, n_terms: int) -> float:
    """``sum_{i > N} E Gamma_i^(-2/alpha) = Gamma(N + 1 - p) / ((p - 1) Gamma(N))`` with ``p = 2/alpha``."""
    p = 2 / float(alpha)
    return math.exp(math.lgamma(n_terms + 1 - p) - math.lgamma(n_terms)) / (p - 1)


def _design(spec: StableFieldSpec):
    """Cells of the window, their probabilities, and the value matrix ``F[cell, g]``."""
    kernel = spec.kernel
    space = kernel.action.space
    fs = [rosinski_f(kernel, g) for g in spec.index_set]
    cells = space.common_refinement(*[f.support() for f in fs])
    if not cells:
        return None
    masses = [space.mass(c) for c in cells]
    total = sum(masses, Fraction(0))
    probs = np.array([float(m / total) for m in masses])
    F = np.array([[float(f(c)) for f in fs] for c in cells])
    return probs, F, float(total)


def _cell_sums(rng, probs, weights, n_rep, n_terms):
    """``S[r, c] = sum_i weights[r, i] 1(V_ri = c)`` with ``V`` drawn from ``probs``."""
    idx = rng.choice(len(probs), size=(n_rep, n_terms), p=probs)
    flat = idx + len(probs) * np.arange(n_rep)[:, None]
    return np.bincount(flat.ravel(), weights=weights.ravel(),
                       minlength=n_rep * len(probs)).reshape(n_rep, len(probs))


def _block(args):
    seq, n_rep, design, alpha, n_terms, tail_terms = args
    probs, F, window_mass = design
    rng = np.random.Generator(np.random.PCG64(seq))
    a = float(alpha)
    gam = np.cumsum(rng.standard_exponential((n_rep, n_terms)), axis=1)
    coef = rng.choice((-1.0, 1.0), size=(n_rep, n_terms)) * gam ** (-1 / a)
    sums = _cell_sums(rng, probs, coef, n_rep, n_terms)
    if tail_terms:
        # Gaussian-type compensation for the truncated part: matching covariance
        t = lepage_tail_variance(a, n_terms)
        eps = rng.choice((-1.0, 1.0), size=(n_rep, tail_terms)) * math.sqrt(t / tail_terms)
        sums += _cell_sums(rng, probs, eps, n_rep, tail_terms)
    return (sums @ F) * (c_alpha(a) * window_mass) ** (1 / a)


def lepage_samples(spec: StableFieldSpec, replicates: int, workers: int = 1) -> np.ndarray:
    """Array ``(replicates, len(index_set))`` of independent field realisations.

    Replicates are cut into blocks of :data:`BLOCK_SIZE`; block ``b`` uses
    the ``b``-th child of ``SeedSequence(seed)``, so the output is identical
    for every worker count.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    design = _design(spec)
    if design is None:
        return np.zeros((replicates, len(spec.index_set)))
    n_blocks = -(-replicates // BLOCK_SIZE)
    seqs = np.random.SeedSequence(int(spec.seed)).spawn(n_blocks)
    sizes = [min(BLOCK_SIZE, replicates - b * BLOCK_SIZE) for b in range(n_blocks)]
    tasks = [(s, n, design, spec.kernel.alpha, spec.series_terms, spec.tail_terms)
             for s, n in zip(seqs, sizes)]
    parts = pmap(_block, tasks, workers, min_parallel=2)
    return np.concatenate(parts, axis=0)


def lepage_field(spec: StableFieldSpec) -> FieldSample:
    """One realisation of ``{Y_g : g in index_set}``."""
    row = lepage_samples(spec, 1)[0]
    values = {g: float(v) for g, v in zip(spec.index_set, row)}
    meta = {"seed": int(spec.seed), "N": spec.series_terms, "alpha": str(spec.kernel.alpha),
            "tail_terms": spec.tail_terms,
            "tail_variance": lepage_tail_variance(spec.kernel.alpha, spec.series_terms)}
    return FieldSample(values, meta)


# ---------------------------------------------------------------------------
# characteristic functions


@dataclass(frozen=True)
class CharEstimate:
    theta: float
    value: complex
    se_re: float
    se_im: float
    n: int


def empirical_char(samples, theta) -> CharEstimate:
    """``(1/n) sum exp(i theta Y)`` with standard errors of both parts."""
    y = np.asarray(samples, dtype=float).ravel()
    if y.size == 0:
        raise ValueError("samples must be nonempty")
    c, s = np.cos(theta * y), np.sin(theta * y)
    n = y.size
    se = (lambda z: float(z.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf"))
    return CharEstimate(float(theta), complex(c.mean(), s.mean()), se(c), se(s), n)


def char_table(samples, thetas) -> list:
    """Rows ``(theta, re, im, se_re, se_im)``."""
    out = []
    for t in thetas:
        e = empirical_char(samples, t)
        out.append((e.theta, e.value.real, e.value.imag, e.se_re, e.se_im))
    return out
