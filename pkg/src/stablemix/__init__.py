"""Exact and Monte Carlo mixing diagnostics for stationary SaS random fields
indexed by countable groups."""

__version__ = "0.1.0"

from .groups import GroupSpec, ResourceError, UnsupportedGroupError, free, heisenberg, lamplighter, lattice
from .measures import BoundarySpace, FiniteSpace, LatticeCountingSpace, ProductCell, SimpleFunction
from .actions import (
    BUILTIN_ACTIONS,
    BoundaryAction,
    MaharamAction,
    NonsingularAction,
    PointAction,
    RosinskiKernel,
    builtin_action,
    cocycle_audit,
    maharam_audit,
    maharam_extend,
    rosinski_f,
)
from .stable import StableFieldSpec, lepage_field, lepage_samples, sas_sample, scale_of
from .diagnostics import (
    DecayTable,
    f_mixing_empirical,
    gross_average,
    mpns_average,
    neveu_classify,
    truncation_audit,
)

__all__ = [
    "GroupSpec", "ResourceError", "UnsupportedGroupError", "free", "heisenberg", "lamplighter", "lattice",
    "BoundarySpace", "FiniteSpace", "LatticeCountingSpace", "ProductCell", "SimpleFunction",
    "BUILTIN_ACTIONS", "BoundaryAction", "MaharamAction", "NonsingularAction", "PointAction",
    "RosinskiKernel", "builtin_action", "cocycle_audit", "maharam_audit", "maharam_extend", "rosinski_f",
    "StableFieldSpec", "lepage_field", "lepage_samples", "sas_sample", "scale_of",
    "DecayTable", "f_mixing_empirical", "gross_average", "mpns_average", "neveu_classify",
    "truncation_audit",
]
