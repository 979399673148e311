"""Objective families combining total and minimum energy efficiency.

Three built-in objectives over x = total EE and y = min per-user EE:

* weighted product   x**w * y**(1-w)
* weighted minimum   min(x/w, y/(1-w))
* product of EEs     prod_i EE_i  (baseline; ignores the weight)

In log2 variables u = log2 x, v = log2 y the first two become the
concave functions w*u + (1-w)*v and min(u - log2 w, v - log2(1-w)),
which is what the convex subproblems maximize.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError
from .network import MetricsReport

__all__ = [
    "ScalarizationKind",
    "Scalarization",
    "SubproblemObjective",
    "weighted_product",
    "weighted_minimum",
    "product_ee",
    "log_objective",
    "direct_objective",
    "subproblem_objective_spec",
]


class ScalarizationKind(Enum):
    WEIGHTED_PRODUCT = "weighted_product"
    WEIGHTED_MINIMUM = "weighted_minimum"
    PRODUCT_EE = "product_ee"


@dataclass(frozen=True)
class Scalarization:
    kind: ScalarizationKind
    weight: float = 0.5

    def __post_init__(self):
        w = float(self.weight)
        if not 0.0 <= w <= 1.0:
            raise DomainError(f"weight must be in [0, 1], got {w}")
        if self.kind is ScalarizationKind.WEIGHTED_MINIMUM and w in (0.0, 1.0):
            # min(x/w, y/(1-w)) divides by zero at the endpoints; pure
            # TEE or MEE maximization is the weighted product at w = 1 or 0.
            raise DomainError("weighted minimum needs weight strictly inside (0, 1)")
        object.__setattr__(self, "weight", w)


def weighted_product(weight: float) -> Scalarization:
    return Scalarization(ScalarizationKind.WEIGHTED_PRODUCT, weight)


def weighted_minimum(weight: float) -> Scalarization:
    return Scalarization(ScalarizationKind.WEIGHTED_MINIMUM, weight)


def product_ee() -> Scalarization:
    return Scalarization(ScalarizationKind.PRODUCT_EE, 0.5)


def log_objective(s: Scalarization, u: float, v: float) -> float:
    """Concave log-domain objective at u = log2 TEE, v = log2 MEE."""
    if not (math.isfinite(u) and math.isfinite(v)):
        raise DomainError("u and v must be finite")
    w = s.weight
    if s.kind is ScalarizationKind.WEIGHTED_PRODUCT:
        return w * u + (1.0 - w) * v
    if s.kind is ScalarizationKind.WEIGHTED_MINIMUM:
        return min(u - math.log2(w), v - math.log2(1.0 - w))
    raise DomainError("product-EE objective is not a function of (u, v)")


def direct_objective(s: Scalarization, report: MetricsReport) -> float:
    """The objective in natural units (bit/J scale) for a metrics report."""
    w = s.weight
    if s.kind is ScalarizationKind.WEIGHTED_PRODUCT:
        return float(report.ee_total**w * report.ee_min ** (1.0 - w))
    if s.kind is ScalarizationKind.WEIGHTED_MINIMUM:
        return float(min(report.ee_total / w, report.ee_min / (1.0 - w)))
    return float(np.prod(report.ee))


@dataclass(frozen=True)
class SubproblemObjective:
    """How a scalarization shapes the convex subproblem.

    `u_coeff`/`v_coeff` are the linear objective weights on the log-TEE
    and log-MEE thresholds. A threshold variable with zero objective
    weight is dropped together with its constraint(s) so the barrier has
    no dead directions. The weighted minimum maximizes an auxiliary t
    under two linear epigraph constraints u + offset_u >= t and
    v + offset_v >= t; the product-EE baseline replaces the shared
    min-EE threshold with one per user and maximizes their sum.
    """

    kind: ScalarizationKind
    u_coeff: float
    v_coeff: float
    has_tee_threshold: bool          # u variable and total-EE constraint present
    has_mee_threshold: bool          # shared v variable and per-user constraints present
    per_user_thresholds: bool        # product-EE: v_i per user instead of shared v
    epigraph_offsets: tuple[float, float] | None

    def aux_variable_count(self, n_users: int) -> int:
        if self.kind is ScalarizationKind.WEIGHTED_MINIMUM:
            return 1
        if self.per_user_thresholds:
            return n_users
        return 0


def subproblem_objective_spec(s: Scalarization) -> SubproblemObjective:
    """Describe the convex subproblem's objective and auxiliary structure."""
    w = s.weight
    if s.kind is ScalarizationKind.WEIGHTED_PRODUCT:
        return SubproblemObjective(
            kind=s.kind,
            u_coeff=w,
            v_coeff=1.0 - w,
            has_tee_threshold=w > 0.0,
            has_mee_threshold=w < 1.0,
            per_user_thresholds=False,
            epigraph_offsets=None,
        )
    if s.kind is ScalarizationKind.WEIGHTED_MINIMUM:
        return SubproblemObjective(
            kind=s.kind,
            u_coeff=0.0,
            v_coeff=0.0,
            has_tee_threshold=True,
            has_mee_threshold=True,
            per_user_thresholds=False,
            epigraph_offsets=(-math.log2(w), -math.log2(1.0 - w)),
        )
    return SubproblemObjective(
        kind=s.kind,
        u_coeff=0.0,
        v_coeff=0.0,
        has_tee_threshold=False,
        has_mee_threshold=True,
        per_user_thresholds=True,
        epigraph_offsets=None,
    )
