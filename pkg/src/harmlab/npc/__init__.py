"""Geodesic metric-space substrate: model spaces and CAT(0) operations."""

from harmlab.npc.ops import (
    AuditResult,
    audit_space,
    check_npc_quadruple,
    distance,
    frechet_mean,
    frechet_objective,
    geodesic_point,
    midpoint,
    product_space,
)
from harmlab.npc.spaces import (
    CuspFactor,
    Euclidean,
    GeometryInputError,
    HyperbolicPlane,
    NpcSpace,
    Product,
    StarTree,
    geodesic_averaging_mean,
)

__all__ = [
    "AuditResult",
    "CuspFactor",
    "Euclidean",
    "GeometryInputError",
    "HyperbolicPlane",
    "NpcSpace",
    "Product",
    "StarTree",
    "audit_space",
    "check_npc_quadruple",
    "distance",
    "frechet_mean",
    "frechet_objective",
    "geodesic_averaging_mean",
    "geodesic_point",
    "midpoint",
    "product_space",
]
