"""Log-barrier Newton solver for the concave inner subproblems.

Each subproblem maximizes a linear objective over smooth concave
inequality constraints c_m(x) >= 0 built from one surrogate model:

    variables    x = [q (N*K), thresholds...]
    constraints  per-user power budgets, surrogate rate floors,
                 per-user efficiency slacks, the total-efficiency slack,
                 and (weighted minimum only) two linear epigraph rows.

The barrier method minimizes phi_tau(x) = -tau * f(x) - sum_m log c_m(x)
by damped Newton with backtracking, multiplying tau by a fixed factor
until the duality gap M/tau drops below the requested KKT tolerance.
Multipliers fall out of the barrier as lambda_m = 1/(tau c_m), and the
certificate reported is

    max( ||grad f + sum_m lambda_m grad c_m||_inf,
         max_m |lambda_m c_m|,
         max_m max(0, -c_m) ).

Constraints are normalized internally (power rows by the power budget,
rate-type rows by the block bandwidth) so the Newton systems stay well
conditioned when bandwidths are in the hundreds of kHz; the feasible set
is unchanged and multipliers refer to the normalized rows.

Everything here is deterministic: the same subproblem and start produce
the identical iterate sequence.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError, InfeasibleSubproblemError, ShapeError
from .scalarization import (
    Scalarization,
    ScalarizationKind,
    SubproblemObjective,
    subproblem_objective_spec,
)
from .surrogate import (
    LN2,
    SurrogateModel,
    efficiency_roots,
    rate_evaluation,
    weighted_rate_hessian,
)

__all__ = [
    "BarrierSettings",
    "ConvexSubproblem",
    "SubproblemStatus",
    "SubproblemSolution",
    "strictly_feasible_start",
    "solve",
    "kkt_residual",
]


@dataclass(frozen=True)
class BarrierSettings:
    """Knobs of the barrier loop.

    `newton_tol` bounds the centering suboptimality measured in objective
    units: a centering stops once decrement^2 / (2 max(1, tau)) falls
    below it, so the criterion stays meaningful when tau is large and the
    raw barrier value sits far outside double precision.
    """

    tau0: float = 1.0
    tau_factor: float = 20.0
    newton_tol: float = 1e-9
    armijo_slope: float = 0.01
    backtrack: float = 0.5
    max_newton_per_center: int = 100
    ridge: float = 1e-10
    min_step: float = 1e-14
    interior_slack: float = 1e-3      # log2-units shift used by the start finder


class SubproblemStatus(Enum):
    OPTIMAL = "optimal"
    MAX_ITERATIONS = "max_iterations"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class SubproblemSolution:
    x: np.ndarray
    q: np.ndarray                     # (N, K)
    u: float | None                   # log2 total-EE threshold, if present
    v: float | None                   # log2 min-EE threshold (shared), if present
    aux: dict
    objective: float
    kkt_residual: float
    newton_iterations: int
    status: SubproblemStatus
    multipliers: np.ndarray


class ConvexSubproblem:
    """One concave subproblem: a surrogate model plus a scalarization shape."""

    def __init__(self, model: SurrogateModel, scalarization: Scalarization):
        self.model = model
        self.scalarization = scalarization
        self.structure: SubproblemObjective = subproblem_objective_spec(scalarization)
        inst = model.instance
        n, k = inst.n_users, inst.n_blocks
        self.n_users, self.n_blocks = n, k
        self.nq = n * k

        idx = self.nq
        self.u_index = None
        self.v_index = None
        self.v_slice = None
        self.t_index = None
        if self.structure.has_tee_threshold:
            self.u_index = idx
            idx += 1
        if self.structure.per_user_thresholds:
            self.v_slice = slice(idx, idx + n)
            idx += n
        elif self.structure.has_mee_threshold:
            self.v_index = idx
            idx += 1
        if self.structure.kind is ScalarizationKind.WEIGHTED_MINIMUM:
            self.t_index = idx
            idx += 1
        self.n_vars = idx

        self.has_psi = self.structure.has_mee_threshold
        self.n_constraints = 2 * n                      # power + rate floors
        if self.has_psi:
            self.n_constraints += n
        if self.structure.has_tee_threshold:
            self.n_constraints += 1
        if self.t_index is not None:
            self.n_constraints += 2

        c = np.zeros(self.n_vars)
        if self.u_index is not None:
            c[self.u_index] = self.structure.u_coeff
        if self.v_index is not None:
            c[self.v_index] = self.structure.v_coeff
        if self.v_slice is not None:
            c[self.v_slice] = 1.0
        if self.t_index is not None:
            c[self.t_index] = 1.0
        self.objective_vector = c

        # normalization of constraint rows
        self._power_scale = 1.0 / inst.max_power
        self._rate_scale = 1.0 / inst.bandwidth_per_block
        self._static_total = float(inst.static_power.sum())

    # -- variable packing ------------------------------------------------

    def pack(self, q: np.ndarray, u: float | None = None, v=None, t: float | None = None) -> np.ndarray:
        x = np.zeros(self.n_vars)
        x[: self.nq] = np.asarray(q, dtype=float).ravel()
        if self.u_index is not None:
            if u is None:
                raise DomainError("subproblem needs a total-EE threshold value")
            x[self.u_index] = u
        if self.v_index is not None:
            if v is None:
                raise DomainError("subproblem needs a min-EE threshold value")
            x[self.v_index] = v
        if self.v_slice is not None:
            x[self.v_slice] = np.asarray(v, dtype=float)
        if self.t_index is not None:
            if t is None:
                raise DomainError("epigraph subproblem needs a t value")
            x[self.t_index] = t
        return x

    def unpack_q(self, x: np.ndarray) -> np.ndarray:
        return x[: self.nq].reshape(self.n_users, self.n_blocks)

    # -- constraint evaluation --------------------------------------------

    def evaluate(self, x: np.ndarray, with_grad: bool = True):
        """Normalized constraint values, optional Jacobian, and reusable context."""
        inst = self.model.instance
        n, k = self.n_users, self.n_blocks
        q = self.unpack_q(x)
        with np.errstate(over="ignore"):
            exp_q = np.exp2(q)
        row_power = exp_q.sum(axis=1)

        ev = rate_evaluation(self.model, q)
        rs = self._rate_scale

        m_parts = []
        c_power = 1.0 - row_power * self._power_scale
        c_rate = (ev.rates - inst.min_rate) * rs
        m_parts.append(c_power)
        m_parts.append(c_rate)

        ctx = {"ev": ev, "exp_q": exp_q, "row_power": row_power, "q": q}

        if self.has_psi:
            if self.v_slice is not None:
                v_vals = x[self.v_slice]
            else:
                v_vals = np.full(n, x[self.v_index])
            with np.errstate(over="ignore"):
                pow_v = np.exp2(v_vals)
            dyn_v = inst.amp_inefficiency * row_power * pow_v
            stat_v = inst.static_power * pow_v
            c_psi = (ev.rates - dyn_v - stat_v) * rs
            m_parts.append(c_psi)
            ctx.update(v_vals=v_vals, pow_v=pow_v, dyn_v=dyn_v, stat_v=stat_v)

        if self.u_index is not None:
            u = x[self.u_index]
            with np.errstate(over="ignore"):
                pow_u = 2.0**u
            dyn_u = inst.amp_inefficiency * row_power * pow_u
            c_g = (ev.rates.sum() - dyn_u.sum() - self._static_total * pow_u) * rs
            m_parts.append(np.array([c_g]))
            ctx.update(pow_u=pow_u, dyn_u=dyn_u)

        if self.t_index is not None:
            off_u, off_v = self.structure.epigraph_offsets
            t = x[self.t_index]
            m_parts.append(
                np.array([x[self.u_index] + off_u - t, x[self.v_index] + off_v - t])
            )

        c = np.concatenate(m_parts)
        if not with_grad:
            return c, None, ctx

        G = np.zeros((self.n_constraints, self.n_vars))
        rows = np.arange(n)
        # power rows: d/dq_ik = -ln2 * 2^q_ik / Pmax_i on own row
        power_grad = -LN2 * exp_q * self._power_scale[:, None]
        for i in range(n):
            G[i, i * k : (i + 1) * k] = power_grad[i]
        # rate rows
        G[n : 2 * n, : self.nq] = ev.jac.reshape(n, self.nq) * rs
        row0 = 2 * n
        if self.has_psi:
            G[row0 : row0 + n, : self.nq] = ev.jac.reshape(n, self.nq) * rs
            mu_exp = inst.amp_inefficiency[:, None] * exp_q * ctx["pow_v"][:, None]
            for i in range(n):
                G[row0 + i, i * k : (i + 1) * k] -= LN2 * mu_exp[i] * rs
            dv = -LN2 * (ctx["dyn_v"] + ctx["stat_v"]) * rs
            if self.v_slice is not None:
                G[rows + row0, self.v_slice.start + rows] = dv
            else:
                G[row0 : row0 + n, self.v_index] = dv
            ctx["mu_exp_v"] = mu_exp
            row0 += n
        if self.u_index is not None:
            mu_exp_u = inst.amp_inefficiency[:, None] * exp_q * ctx["pow_u"]
            G[row0, : self.nq] = (ev.jac.sum(axis=0) - LN2 * mu_exp_u).ravel() * rs
            G[row0, self.u_index] = -LN2 * (ctx["dyn_u"].sum() + self._static_total * ctx["pow_u"]) * rs
            ctx["mu_exp_u"] = mu_exp_u
            row0 += 1
        if self.t_index is not None:
            G[row0, self.u_index] = 1.0
            G[row0, self.t_index] = -1.0
            G[row0 + 1, self.v_index] = 1.0
            G[row0 + 1, self.t_index] = -1.0
        return c, G, ctx

    def weighted_constraint_hessian(self, ctx, beta: np.ndarray) -> np.ndarray:
        """sum_m beta[m] * hess(c_m) over the full variable vector."""
        inst = self.model.instance
        n, k = self.n_users, self.n_blocks
        nq = self.nq
        rs = self._rate_scale
        H = np.zeros((self.n_vars, self.n_vars))

        beta_power = beta[:n]
        beta_rate = beta[n : 2 * n]
        row0 = 2 * n
        beta_psi = None
        beta_g = 0.0
        if self.has_psi:
            beta_psi = beta[row0 : row0 + n]
            row0 += n
        if self.u_index is not None:
            beta_g = beta[row0]
            row0 += 1

        # curvature of the surrogate rates, shared by rate/psi/g rows
        w = beta_rate * rs
        if beta_psi is not None:
            w = w + beta_psi * rs
        if self.u_index is not None:
            w = w + beta_g * rs
        H[:nq, :nq] = weighted_rate_hessian(self.model, ctx["ev"], w)

        diag = np.zeros((n, k))
        diag -= LN2 * LN2 * beta_power[:, None] * ctx["exp_q"] * self._power_scale[:, None]
        if beta_psi is not None:
            mu_exp = ctx["mu_exp_v"]
            diag -= LN2 * LN2 * beta_psi[:, None] * mu_exp * rs
            cross = -LN2 * LN2 * beta_psi[:, None] * mu_exp * rs  # (q_ik, v_i)
            dvv = -LN2 * LN2 * beta_psi * (ctx["dyn_v"] + ctx["stat_v"]) * rs
            if self.v_slice is not None:
                vi = self.v_slice.start + np.arange(n)
            else:
                vi = np.full(n, self.v_index)
            for i in range(n):
                cols = np.arange(i * k, (i + 1) * k)
                H[cols, vi[i]] += cross[i]
                H[vi[i], cols] += cross[i]
                H[vi[i], vi[i]] += dvv[i]
        if self.u_index is not None:
            mu_exp_u = ctx["mu_exp_u"]
            diag -= LN2 * LN2 * beta_g * mu_exp_u * rs
            cross_u = (-LN2 * LN2 * beta_g * mu_exp_u * rs).ravel()
            H[: nq, self.u_index] += cross_u
            H[self.u_index, : nq] += cross_u
            H[self.u_index, self.u_index] += (
                -LN2 * LN2 * beta_g * (ctx["dyn_u"].sum() + self._static_total * ctx["pow_u"]) * rs
            )
        H[np.arange(nq), np.arange(nq)] += diag.ravel()
        return H


# -- barrier engine -------------------------------------------------------


def _newton_direction(H: np.ndarray, grad: np.ndarray, ridge: float):
    """Solve H d = -grad with escalating ridge until we get a descent direction."""
    n = H.shape[0]
    eye = np.eye(n)
    for boost in (ridge, ridge * 1e4, ridge * 1e8, 1e-2):
        try:
            d = np.linalg.solve(H + boost * eye, -grad)
        except np.linalg.LinAlgError:
            continue
        dec_sq = -float(grad @ d)
        if np.all(np.isfinite(d)) and dec_sq > 0:
            return d, dec_sq
    return None, 0.0


def _barrier_value(c_obj, x, c, tau):
    return -tau * float(c_obj @ x) - float(np.log(c).sum())


def _center(problem, x, tau, settings):
    """Damped Newton to the central point for one tau. Returns (x, iters, status)."""
    c_obj = problem.objective_vector
    dec_scale = 2.0 * max(1.0, tau)
    for it in range(settings.max_newton_per_center):
        c, G, ctx = problem.evaluate(x)
        if np.any(c <= 0) or not np.all(np.isfinite(c)):
            return x, it, SubproblemStatus.NUMERICAL_FAILURE
        inv_c = 1.0 / c
        grad = -tau * c_obj - G.T @ inv_c
        H = (G * (inv_c**2)[:, None]).T @ G - problem.weighted_constraint_hessian(ctx, inv_c)
        d, dec_sq = _newton_direction(H, grad, settings.ridge)
        if d is None:
            return x, it, SubproblemStatus.NUMERICAL_FAILURE
        if dec_sq / dec_scale <= settings.newton_tol:
            return x, it, SubproblemStatus.OPTIMAL
        phi0 = _barrier_value(c_obj, x, c, tau)
        # fraction-to-boundary: start below the step that would cross c = 0
        slopes = G @ d
        blocking = slopes < 0
        step = 1.0
        if np.any(blocking):
            step = min(1.0, float((-0.99 * c[blocking] / slopes[blocking]).min()))
        while True:
            x_new = x + step * d
            c_new, _, _ = problem.evaluate(x_new, with_grad=False)
            if np.all(np.isfinite(c_new)) and np.all(c_new > 0):
                phi_new = _barrier_value(c_obj, x_new, c_new, tau)
                if phi_new <= phi0 - settings.armijo_slope * step * dec_sq:
                    break
            step *= settings.backtrack
            if step < settings.min_step:
                # stagnation at machine precision: accept if the decrement is tiny
                if dec_sq / dec_scale <= settings.newton_tol * 100:
                    return x, it, SubproblemStatus.OPTIMAL
                return x, it, SubproblemStatus.NUMERICAL_FAILURE
        if np.array_equal(x_new, x):
            return x, it, SubproblemStatus.OPTIMAL
        x = x_new
    return x, settings.max_newton_per_center, SubproblemStatus.MAX_ITERATIONS


def _barrier_minimize(problem, start, tol, settings):
    """Run the full barrier loop; returns (x, multipliers, tau, iterations, status).

    The gap is driven one decade below tol so the complementary-slackness
    terms 1/tau certify comfortably inside the requested tolerance.
    """
    x = np.asarray(start, dtype=float).copy()
    m = problem.n_constraints
    tau = settings.tau0
    total = 0
    status = SubproblemStatus.OPTIMAL
    while True:
        x, iters, st = _center(problem, x, tau, settings)
        total += iters
        if st is not SubproblemStatus.OPTIMAL:
            status = st
            break
        if m / tau <= 0.1 * tol:
            break
        tau *= settings.tau_factor
    c, _, _ = problem.evaluate(x, with_grad=False)
    lam = 1.0 / (tau * c)
    return x, lam, tau, total, status


def kkt_residual(sub, x: np.ndarray, multipliers: np.ndarray) -> float:
    """Certificate: stationarity, complementary slackness and primal violation."""
    lam = np.asarray(multipliers, dtype=float)
    if lam.shape != (sub.n_constraints,):
        raise ShapeError("multiplier vector has the wrong length")
    if np.any(lam < 0):
        raise DomainError("multipliers must be nonnegative")
    c, G, _ = sub.evaluate(x)
    stationarity = float(np.abs(sub.objective_vector + G.T @ lam).max())
    comp_slack = float(np.abs(lam * c).max())
    primal = float(np.maximum(0.0, -c).max())
    return max(stationarity, comp_slack, primal)


def _polish_multipliers(sub, x, lam_barrier, tau):
    """Least-squares multipliers on the near-active set.

    The barrier multipliers carry an O(1/tau) bias on every row, which
    caps the stationarity certificate; refitting the active rows removes
    that bias while keeping |lambda_m c_m| at the 1/tau level.
    """
    c, G, _ = sub.evaluate(x)
    active = c <= np.sqrt(max(float(c.max()), 1.0) / tau)
    if not np.any(active):
        return np.zeros_like(lam_barrier)
    lam = np.zeros_like(lam_barrier)
    sol, *_ = np.linalg.lstsq(G[active].T, -sub.objective_vector, rcond=None)
    lam[active] = np.maximum(sol, 0.0)
    return lam


# -- strictly feasible start ------------------------------------------------


class _PhaseIProblem:
    """max s subject to (normalized power and rate slacks) - s >= 0."""

    def __init__(self, sub: ConvexSubproblem):
        self.sub = sub
        self.n_vars = sub.nq + 1
        self.n_constraints = 2 * sub.n_users
        c = np.zeros(self.n_vars)
        c[-1] = 1.0
        self.objective_vector = c

    def evaluate(self, x, with_grad: bool = True):
        sub = self.sub
        inst = sub.model.instance
        n, k = sub.n_users, sub.n_blocks
        q = x[: sub.nq].reshape(n, k)
        s = x[-1]
        with np.errstate(over="ignore"):
            exp_q = np.exp2(q)
        row_power = exp_q.sum(axis=1)
        ev = rate_evaluation(sub.model, q)
        c_power = 1.0 - row_power * sub._power_scale - s
        c_rate = (ev.rates - inst.min_rate) * sub._rate_scale - s
        c = np.concatenate([c_power, c_rate])
        ctx = {"ev": ev, "exp_q": exp_q}
        if not with_grad:
            return c, None, ctx
        G = np.zeros((self.n_constraints, self.n_vars))
        power_grad = -LN2 * exp_q * sub._power_scale[:, None]
        for i in range(n):
            G[i, i * k : (i + 1) * k] = power_grad[i]
        G[n : 2 * n, : sub.nq] = ev.jac.reshape(n, sub.nq) * sub._rate_scale
        G[:, -1] = -1.0
        return c, G, ctx

    def weighted_constraint_hessian(self, ctx, beta):
        sub = self.sub
        n = sub.n_users
        H = np.zeros((self.n_vars, self.n_vars))
        w = beta[n : 2 * n] * sub._rate_scale
        H[: sub.nq, : sub.nq] = weighted_rate_hessian(sub.model, ctx["ev"], w)
        diag = -LN2 * LN2 * beta[:n, None] * ctx["exp_q"] * sub._power_scale[:, None]
        H[np.arange(sub.nq), np.arange(sub.nq)] += diag.ravel()
        return H


def strictly_feasible_start(sub: ConvexSubproblem, hint_q: np.ndarray, settings: BarrierSettings | None = None) -> np.ndarray:
    """Move a (weakly) feasible q strictly inside the subproblem's domain.

    Power rows are pulled in multiplicatively, the threshold variables are
    set a fixed log2 slack below their exact roots, and if the rate floors
    cannot be made strict this way a phase-I slack maximization runs; a
    nonpositive phase-I optimum means the floors are unattainable under
    the current minorant and raises InfeasibleSubproblemError.
    """
    settings = settings or BarrierSettings()
    delta = settings.interior_slack
    inst = sub.model.instance
    q = np.asarray(hint_q, dtype=float).reshape(sub.n_users, sub.n_blocks).copy()

    row_power = np.exp2(q).sum(axis=1)
    budget = inst.max_power
    shrink = np.minimum(1.0, (1.0 - delta) * budget / row_power)
    q += np.log2(shrink)[:, None]

    ev = rate_evaluation(sub.model, q)
    rate_slack = (ev.rates - inst.min_rate) * sub._rate_scale
    if rate_slack.min() <= 1e-9:
        phase1 = _PhaseIProblem(sub)
        c0, _, _ = phase1.evaluate(np.append(q.ravel(), 0.0), with_grad=False)
        x0 = np.append(q.ravel(), float(c0.min()) - 1.0)
        px, _, _, _, pstatus = _barrier_minimize(phase1, x0, 1e-6, settings)
        s_star = px[-1]
        if pstatus is not SubproblemStatus.OPTIMAL or s_star <= 1e-12:
            raise InfeasibleSubproblemError(
                "no strictly interior point: rate floors unattainable under the "
                f"current minorant (max-min slack {s_star:.3e})"
            )
        q = px[: sub.nq].reshape(sub.n_users, sub.n_blocks)

    u_root, v_roots = efficiency_roots(sub.model, q)
    u = u_root - delta if sub.u_index is not None else None
    v = None
    if sub.v_slice is not None:
        v = v_roots - delta
    elif sub.v_index is not None:
        v = float(v_roots.min()) - delta
    t = None
    if sub.t_index is not None:
        off_u, off_v = sub.structure.epigraph_offsets
        t = min(u + off_u, v + off_v) - delta
    x = sub.pack(q, u=u, v=v, t=t)

    c, _, _ = sub.evaluate(x, with_grad=False)
    if np.any(c <= 0) or not np.all(np.isfinite(c)):
        raise InfeasibleSubproblemError("failed to construct a strictly interior point")
    return x


def solve(sub: ConvexSubproblem, start: np.ndarray, tol: float = 1e-8,
          settings: BarrierSettings | None = None) -> SubproblemSolution:
    """Barrier-solve one subproblem from a strictly feasible start."""
    settings = settings or BarrierSettings()
    start = np.asarray(start, dtype=float)
    if start.shape != (sub.n_vars,):
        raise ShapeError(f"start has shape {start.shape}, expected ({sub.n_vars},)")
    c0, _, _ = sub.evaluate(start, with_grad=False)
    if np.any(c0 <= 0):
        raise DomainError("start point is not strictly feasible")

    x, lam, tau, iterations, status = _barrier_minimize(sub, start, tol, settings)
    lam = np.maximum(lam, 0.0)
    residual = kkt_residual(sub, x, lam)
    polished = _polish_multipliers(sub, x, lam, tau)
    polished_residual = kkt_residual(sub, x, polished)
    if polished_residual < residual:
        lam, residual = polished, polished_residual
    q = sub.unpack_q(x)
    u = float(x[sub.u_index]) if sub.u_index is not None else None
    v = float(x[sub.v_index]) if sub.v_index is not None else None
    aux = {}
    if sub.v_slice is not None:
        aux["v_per_user"] = x[sub.v_slice].copy()
    if sub.t_index is not None:
        aux["t"] = float(x[sub.t_index])
    return SubproblemSolution(
        x=x,
        q=q,
        u=u,
        v=v,
        aux=aux,
        objective=float(sub.objective_vector @ x),
        kkt_residual=residual,
        newton_iterations=iterations,
        status=status,
        multipliers=lam,
    )
