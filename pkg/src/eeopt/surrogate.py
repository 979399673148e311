"""Concave minorants of the rate and efficiency functions in log-power space.

With q = log2 p, the true per-user rate

    R'_i(q) = B * sum_k log2(1 + gamma_i^k(2^q))

is neither convex nor concave. Around an expansion SINR gamma' we apply
the bound log2(1 + g) >= a*log2 g + b with a = g'/(1+g') and
b = log2(1+g') - a*log2 g', which is tight (same value and derivative)
at g = g'. Substituting the SINR expression turns the bounded rate into

    rate_i(q) = B * sum_k [ b + a*log2 w_ii + a*q_i^k
                            - a*log2(sum_{j!=i} w_ji * 2^{q_j^k} + noise) ]

which is concave in q (affine minus a scaled log-sum-exp). The derived
functions bounding the efficiency constraints,

    psi_i(q, v) = rate_i(q) - (mu_i * sum_k 2^{q_i^k} + P_st,i) * 2^v
    g(q, u)     = sum_i rate_i(q) - (sum_i mu_i sum_k 2^{q_i^k} + sum_i P_st,i) * 2^u

are concave in (q, v) and (q, u) and strictly decreasing in the threshold
variable. All evaluations return exact gradients computed in the same
pass; the interference log-sum is evaluated with the max exponent
subtracted so widely spread q values stay accurate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .network import NetworkInstance, sinr

__all__ = [
    "BoundCoefficients",
    "SurrogateModel",
    "RateEvaluation",
    "bound_coefficients",
    "build",
    "surrogate_rate",
    "surrogate_psi",
    "surrogate_g",
    "rate_evaluation",
    "weighted_rate_hessian",
    "efficiency_roots",
]

LN2 = math.log(2.0)


def bound_coefficients(gamma_prime):
    """Coefficients (a, b) of the logarithmic lower bound at expansion SINR.

    a = g'/(1+g'), b = log2(1+g') - a*log2 g'; the conventions
    log2 0 = -inf and 0*log2 0 = 0 give (0, 0) for g' = 0.
    Accepts scalars or arrays.
    """
    g = np.asarray(gamma_prime, dtype=float)
    if np.any(~np.isfinite(g)) or np.any(g < 0):
        raise DomainError("expansion SINR must be finite and nonnegative")
    a = g / (1.0 + g)
    with np.errstate(divide="ignore", invalid="ignore"):
        b = np.where(g > 0, np.log2(1.0 + g) - a * np.log2(np.where(g > 0, g, 1.0)), 0.0)
    if np.ndim(gamma_prime) == 0:
        return float(a), float(b)
    return a, b


@dataclass(frozen=True)
class BoundCoefficients:
    a: np.ndarray               # (N, K), in [0, 1)
    b: np.ndarray               # (N, K)
    expansion_sinr: np.ndarray  # (N, K)


@dataclass(frozen=True)
class SurrogateModel:
    """Bound coefficients plus the expansion point, fixed for one subproblem."""

    instance: NetworkInstance
    coefficients: BoundCoefficients
    expansion_q: np.ndarray     # (N, K), log2 of the expansion powers

    def __post_init__(self):
        inst = self.instance
        # cross-gain exponents log2 w_ji with -inf on zero gains and the diagonal
        with np.errstate(divide="ignore"):
            log_gain = np.log2(inst.gain)
        idx = np.arange(inst.n_users)
        log_gain[idx, idx, :] = -np.inf
        object.__setattr__(self, "_log_cross_gain", log_gain)
        object.__setattr__(self, "_log_direct_gain", np.log2(inst.direct_gain()))
        object.__setattr__(self, "_log_noise", np.log2(inst.noise))


def build(instance: NetworkInstance, alloc: np.ndarray) -> SurrogateModel:
    """Expand the bound at the SINRs produced by a strictly positive allocation."""
    p = np.asarray(alloc, dtype=float)
    if p.shape != (instance.n_users, instance.n_blocks):
        raise ShapeError(f"allocation shape {p.shape} does not match instance")
    if np.any(p <= 0):
        raise DomainError(
            "surrogate expansion needs strictly positive powers (q = log2 p must be "
            "finite); start from a strictly positive allocation"
        )
    gamma = sinr(instance, p)
    a, b = bound_coefficients(gamma)
    coeffs = BoundCoefficients(a=a, b=b, expansion_sinr=gamma)
    return SurrogateModel(instance=instance, coefficients=coeffs, expansion_q=np.log2(p))


@dataclass(frozen=True)
class RateEvaluation:
    """All surrogate rates at one q, with their Jacobian and interference shares."""

    rates: np.ndarray   # (N,) bit/s
    jac: np.ndarray     # (N, N, K): d rate_i / d q_j^k
    shares: np.ndarray  # (N, N, K): interferer j's share of user i's denominator


def rate_evaluation(model: SurrogateModel, q: np.ndarray) -> RateEvaluation:
    """Evaluate every surrogate rate and its exact gradient in one pass."""
    inst = model.instance
    n, k = inst.n_users, inst.n_blocks
    q = np.asarray(q, dtype=float)
    if q.shape != (n, k):
        raise ShapeError(f"q shape {q.shape} does not match instance ({n}, {k})")

    # log2 of (sum_{j!=i} w_ji 2^{q_j} + noise), stabilized by the max exponent
    exponents = model._log_cross_gain + q[:, None, :]          # (j, i, k)
    m = np.maximum(exponents.max(axis=0), model._log_noise)    # (i, k)
    scaled = np.exp2(exponents - m[None, :, :])                # (j, i, k)
    total = scaled.sum(axis=0) + np.exp2(model._log_noise - m)
    log_denom = m + np.log2(total)
    shares = scaled / total[None, :, :]

    a = model.coefficients.a
    b = model.coefficients.b
    bw = inst.bandwidth_per_block
    terms = b + a * (model._log_direct_gain + q - log_denom)
    rates = bw * terms.sum(axis=1)

    # d rate_i / d q_j^k = B a_i^k (delta_ij - share_j,i^k); share_i,i^k = 0
    jac = np.swapaxes(-bw * a[None, :, :] * shares, 0, 1).copy()  # (i, j, k)
    idx = np.arange(n)
    jac[idx, idx, :] += bw * a
    return RateEvaluation(rates=rates, jac=jac, shares=shares)


def weighted_rate_hessian(model: SurrogateModel, ev: RateEvaluation, weights: np.ndarray) -> np.ndarray:
    """sum_i weights[i] * hess(rate_i) as a dense (N*K, N*K) matrix.

    Per block k the Hessian of rate_i over the q_.^k column is
    -B a_i^k ln2 (diag(s) - s s^T) with s the interference shares, so the
    weighted sum stays block-diagonal across blocks.
    """
    inst = model.instance
    n, k = inst.n_users, inst.n_blocks
    wa = inst.bandwidth_per_block * np.asarray(weights, float)[:, None] * model.coefficients.a  # (i, k)
    diag = np.einsum("jik,ik->jk", ev.shares, wa)
    outer = np.einsum("jik,ik,lik->kjl", ev.shares, wa, ev.shares)
    blocks = LN2 * outer
    cols = np.arange(k)
    h4 = np.zeros((n, k, n, k))
    h4[:, cols, :, cols] = blocks
    h = h4.reshape(n * k, n * k)
    flat_diag = (-LN2 * diag).reshape(-1)
    h[np.arange(n * k), np.arange(n * k)] += flat_diag
    return h


def _threshold_terms(model: SurrogateModel, q: np.ndarray, log_threshold: float, user=None):
    """2^(q+thr) power terms and their common scale for psi/g gradients."""
    inst = model.instance
    if user is None:
        exp_q = np.exp2(q + log_threshold)
        dyn = inst.amp_inefficiency[:, None] * exp_q            # (N, K)
        stat = inst.static_power * np.exp2(log_threshold)       # (N,)
        return dyn, stat
    exp_q = np.exp2(q[user] + log_threshold)
    dyn = inst.amp_inefficiency[user] * exp_q                   # (K,)
    stat = inst.static_power[user] * np.exp2(log_threshold)
    return dyn, stat


def surrogate_rate(model: SurrogateModel, q: np.ndarray, user: int):
    """Lower bound of user's rate at q (bit/s) and its gradient over all of q."""
    ev = rate_evaluation(model, q)
    return float(ev.rates[user]), ev.jac[user].copy()


def surrogate_psi(model: SurrogateModel, q: np.ndarray, v: float, user: int):
    """Per-user efficiency slack: surrogate rate minus consumed power times 2^v.

    Returns (value, grad_q, grad_v); concave in (q, v), strictly
    decreasing in v.
    """
    ev = rate_evaluation(model, q)
    dyn, stat = _threshold_terms(model, q, v, user)
    value = float(ev.rates[user] - dyn.sum() - stat)
    grad_q = ev.jac[user].copy()
    grad_q[user] -= LN2 * dyn
    grad_v = -LN2 * (dyn.sum() + stat)
    return value, grad_q, grad_v


def efficiency_roots(model: SurrogateModel, q: np.ndarray):
    """Thresholds at which the efficiency slacks vanish at q.

    Both slack functions are affine in the exponentiated threshold, so the
    roots are exact: 2^u = total surrogate rate / total consumed power and
    2^{v_i} = rate_i / consumed_i. Returns (u_root, v_roots); entries are
    -inf where the surrogate rate is nonpositive.
    """
    inst = model.instance
    ev = rate_evaluation(model, q)
    consumed = inst.amp_inefficiency * np.exp2(q).sum(axis=1) + inst.static_power
    with np.errstate(divide="ignore", invalid="ignore"):
        v_roots = np.where(ev.rates > 0, np.log2(np.maximum(ev.rates, 1e-300) / consumed), -np.inf)
        total = ev.rates.sum()
        u_root = float(np.log2(total / consumed.sum())) if total > 0 else -np.inf
    return u_root, v_roots


def surrogate_g(model: SurrogateModel, q: np.ndarray, u: float):
    """Total-efficiency slack: summed surrogate rates minus total power times 2^u.

    Returns (value, grad_q, grad_u); concave in (q, u), strictly
    decreasing in u.
    """
    ev = rate_evaluation(model, q)
    dyn, stat = _threshold_terms(model, q, u)
    value = float(ev.rates.sum() - dyn.sum() - stat.sum())
    grad_q = ev.jac.sum(axis=0) - LN2 * dyn
    grad_u = -LN2 * (dyn.sum() + stat.sum())
    return value, grad_q, grad_u
