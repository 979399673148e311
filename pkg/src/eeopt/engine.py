"""The outer optimization loop: build a surrogate, solve, re-expand, repeat.

One iteration expands the bound at the current allocation, solves the
resulting concave subproblem to global optimality, and moves to its
optimizer. Because every surrogate minorizes the true function and is
tight at the expansion point, the objective trajectory is monotonically
nondecreasing and every iterate stays feasible for the original problem.

The relative-change stopping rule |f_l - f_{l-1}| / |f_{l-1}| < tolerance
divides by the previous log-domain objective; a 1e-12 floor guards the
denominator when the objective crosses zero.

Threshold variables returned by the subproblem carry interior slack, so
after each solve they are tightened to the exact roots of the efficiency
slack functions before the trajectory value is recorded; the recorded
objective then reflects thresholds the allocation actually achieves.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DomainError, InfeasibleInitialPointError, InfeasibleSubproblemError
from .network import MetricsReport, NetworkInstance, evaluate, is_feasible
from .scalarization import Scalarization, ScalarizationKind, log_objective
from .solver import (
    BarrierSettings,
    ConvexSubproblem,
    SubproblemStatus,
    solve,
    strictly_feasible_start,
)
from .surrogate import build, efficiency_roots

__all__ = [
    "SolverConfig",
    "RunStatus",
    "IterationStats",
    "SolveResult",
    "ComplexityRow",
    "default_initial_point",
    "run",
    "complexity_probe",
]


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-3               # relative objective change that stops the loop
    max_outer_iterations: int = 200
    initial_allocation: np.ndarray | None = None   # defaults to uniform max_power/K
    kkt_tolerance: float = 1e-8
    barrier: BarrierSettings = field(default_factory=BarrierSettings)

    def __post_init__(self):
        if self.tolerance <= 0:
            raise DomainError("tolerance must be > 0")
        if self.max_outer_iterations < 1:
            raise DomainError("max_outer_iterations must be >= 1")


class RunStatus(Enum):
    CONVERGED = "converged"
    ITERATION_CAP = "iteration_cap"
    SUBPROBLEM_FAILURE = "subproblem_failure"


@dataclass(frozen=True)
class IterationStats:
    index: int
    objective: float          # log-domain trajectory value f_l
    u: float                  # tightened log2 total-EE threshold
    v: float                  # tightened log2 min-EE threshold
    kkt_residual: float
    newton_iterations: int
    subproblem_status: SubproblemStatus
    feasible: bool            # original constraint set, relative tol 1e-6


@dataclass(frozen=True)
class SolveResult:
    allocation: np.ndarray
    metrics: MetricsReport
    trajectory: np.ndarray    # f_0 .. f_L, log domain
    iterations: int           # L, outer iterations executed
    iteration_stats: list[IterationStats]
    status: RunStatus
    scalarization: Scalarization

    @property
    def converged(self) -> bool:
        return self.status is RunStatus.CONVERGED


def default_initial_point(instance: NetworkInstance) -> np.ndarray:
    """Spread each user's power budget uniformly over the blocks."""
    k = instance.n_blocks
    return np.tile(instance.max_power[:, None] / k, (1, k))


def _log_domain_objective(s: Scalarization, report: MetricsReport) -> float:
    if s.kind is ScalarizationKind.PRODUCT_EE:
        return float(np.log2(report.ee).sum())
    return log_objective(s, float(np.log2(report.ee_total)), float(np.log2(report.ee_min)))


def _trajectory_value(s: Scalarization, u_root: float, v_roots: np.ndarray) -> float:
    if s.kind is ScalarizationKind.PRODUCT_EE:
        return float(v_roots.sum())
    return log_objective(s, u_root, float(v_roots.min()))


def run(instance: NetworkInstance, scalarization: Scalarization,
        config: SolverConfig | None = None) -> SolveResult:
    """Iterate surrogate builds and subproblem solves until the objective settles."""
    config = config or SolverConfig()
    if config.initial_allocation is not None:
        p = np.asarray(config.initial_allocation, dtype=float).copy()
    else:
        p = default_initial_point(instance)
    if p.shape != (instance.n_users, instance.n_blocks) or np.any(p <= 0):
        raise InfeasibleInitialPointError(
            "initial allocation must be strictly positive with shape (users, blocks)"
        )
    feas = is_feasible(instance, p, tol=1e-9)
    if not feas.ok:
        raise InfeasibleInitialPointError(
            f"initial allocation violates the constraint set: {feas.violations}"
        )

    report = evaluate(instance, p)
    f_prev = _log_domain_objective(scalarization, report)
    trajectory = [f_prev]
    stats: list[IterationStats] = []
    status = RunStatus.ITERATION_CAP

    for l in range(1, config.max_outer_iterations + 1):
        model = build(instance, p)
        sub = ConvexSubproblem(model, scalarization)
        try:
            x0 = strictly_feasible_start(sub, model.expansion_q, config.barrier)
        except InfeasibleSubproblemError:
            status = RunStatus.SUBPROBLEM_FAILURE
            break
        sol = solve(sub, x0, config.kkt_tolerance, config.barrier)
        if sol.status is SubproblemStatus.NUMERICAL_FAILURE:
            status = RunStatus.SUBPROBLEM_FAILURE
            break

        p = np.exp2(sol.q)
        u_root, v_roots = efficiency_roots(model, sol.q)
        f_l = _trajectory_value(scalarization, u_root, v_roots)
        trajectory.append(f_l)
        stats.append(
            IterationStats(
                index=l,
                objective=f_l,
                u=u_root,
                v=float(v_roots.min()),
                kkt_residual=sol.kkt_residual,
                newton_iterations=sol.newton_iterations,
                subproblem_status=sol.status,
                feasible=is_feasible(instance, p, tol=1e-6).ok,
            )
        )
        rel_change = abs(f_l - f_prev) / max(abs(f_prev), 1e-12)
        f_prev = f_l
        if rel_change < config.tolerance:
            status = RunStatus.CONVERGED
            break

    return SolveResult(
        allocation=p,
        metrics=evaluate(instance, p),
        trajectory=np.asarray(trajectory),
        iterations=len(trajectory) - 1,
        iteration_stats=stats,
        status=status,
        scalarization=scalarization,
    )


@dataclass(frozen=True)
class ComplexityRow:
    epsilon: float
    iterations: int
    f_initial: float
    f_final: float
    bound: float | None       # 1 + (lambda - 1)/epsilon when f_initial > 0


def complexity_probe(instance: NetworkInstance, scalarization: Scalarization,
                     epsilons, config: SolverConfig | None = None) -> list[ComplexityRow]:
    """Iteration counts versus tolerance, checked against the monotonicity bound.

    Runs the optimizer once per tolerance from the same initial point. When
    the starting log-domain objective is positive, the count must respect
    iterations <= 1 + (lambda - 1)/epsilon with lambda the ratio of the best
    realized objective to the starting one; counts must be nonincreasing in
    epsilon. Violations raise RuntimeError since they would falsify the
    method's own convergence guarantee.
    """
    config = config or SolverConfig()
    epsilons = [float(e) for e in epsilons]
    if any(e <= 0 for e in epsilons):
        raise DomainError("tolerances must be > 0")

    results = {}
    for eps in epsilons:
        cfg = SolverConfig(
            tolerance=eps,
            max_outer_iterations=config.max_outer_iterations,
            initial_allocation=config.initial_allocation,
            kkt_tolerance=config.kkt_tolerance,
            barrier=config.barrier,
        )
        results[eps] = run(instance, scalarization, cfg)

    f_best = max(float(r.trajectory[-1]) for r in results.values())
    rows = []
    for eps in epsilons:
        r = results[eps]
        f0 = float(r.trajectory[0])
        bound = None
        if f0 > 0:
            bound = 1.0 + max(f_best / f0 - 1.0, 0.0) / eps
            if r.iterations > bound + 1e-9:
                raise RuntimeError(
                    f"iteration count {r.iterations} exceeds the bound {bound:.2f} "
                    f"at tolerance {eps}"
                )
        rows.append(
            ComplexityRow(
                epsilon=eps,
                iterations=r.iterations,
                f_initial=f0,
                f_final=float(r.trajectory[-1]),
                bound=bound,
            )
        )

    by_eps = sorted(rows, key=lambda row: row.epsilon, reverse=True)
    for earlier, later in zip(by_eps, by_eps[1:]):
        if later.iterations < earlier.iterations:
            raise RuntimeError(
                "iteration counts are not monotone in the tolerance: "
                f"{earlier.epsilon} -> {earlier.iterations}, {later.epsilon} -> {later.iterations}"
            )
    return rows
