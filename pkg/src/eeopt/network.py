"""Physical model of an interference-limited multi-carrier network.

Conventions used throughout the package:

* powers are in watts, bandwidth in Hz, rates in bit/s, energy
  efficiencies in bit/J; dB and dBm never appear below the config layer,
* a power allocation is a plain ``(N, K)`` float array ``p[i, k]`` giving
  the transmit power of user ``i`` on resource block ``k``,
* channel gains are a dense ``(N, N, K)`` array ``gain[j, i, k]``: linear
  power gain from transmitter ``j`` to the receiver user ``i`` is
  associated with, on block ``k``.

All types are immutable after construction and every operation is pure,
so everything here is safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError

__all__ = [
    "NetworkInstance",
    "MetricsReport",
    "Violation",
    "FeasibilityResult",
    "sinr",
    "evaluate",
    "is_feasible",
    "jain_index",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class NetworkInstance:
    """Immutable description of users, blocks, channels and power limits.

    Scalar values for the per-user fields are broadcast to all users.
    """

    bandwidth_per_block: float
    gain: np.ndarray              # (N, N, K) linear, >= 0, direct entries > 0
    noise: np.ndarray             # (N, K) W, > 0
    amp_inefficiency: np.ndarray  # (N,) dimensionless, >= 1
    static_power: np.ndarray      # (N,) W, > 0
    max_power: np.ndarray         # (N,) W, > 0
    min_rate: np.ndarray          # (N,) bit/s, >= 0

    def __post_init__(self):
        gain = np.asarray(self.gain, dtype=float)
        if gain.ndim != 3 or gain.shape[0] != gain.shape[1]:
            raise ShapeError(f"gain must be (N, N, K), got {gain.shape}")
        n, _, k = gain.shape
        if n < 1 or k < 1:
            raise ShapeError("need at least one user and one block")

        def per_user(name, value):
            arr = np.asarray(value, dtype=float)
            if arr.ndim == 0:
                arr = np.full(n, float(arr))
            if arr.shape != (n,):
                raise ShapeError(f"{name} must be scalar or shape ({n},), got {arr.shape}")
            return arr

        noise = np.asarray(self.noise, dtype=float)
        if noise.ndim == 0:
            noise = np.full((n, k), float(noise))
        if noise.shape != (n, k):
            raise ShapeError(f"noise must be scalar or shape ({n}, {k}), got {noise.shape}")

        object.__setattr__(self, "gain", _frozen(gain))
        object.__setattr__(self, "noise", _frozen(noise))
        object.__setattr__(self, "amp_inefficiency", _frozen(per_user("amp_inefficiency", self.amp_inefficiency)))
        object.__setattr__(self, "static_power", _frozen(per_user("static_power", self.static_power)))
        object.__setattr__(self, "max_power", _frozen(per_user("max_power", self.max_power)))
        object.__setattr__(self, "min_rate", _frozen(per_user("min_rate", self.min_rate)))
        object.__setattr__(self, "bandwidth_per_block", float(self.bandwidth_per_block))

        if self.bandwidth_per_block <= 0:
            raise DomainError("bandwidth_per_block must be > 0")
        if np.any(gain < 0) or not np.all(np.isfinite(gain)):
            raise DomainError("gains must be finite and nonnegative")
        if np.any(self.direct_gain() <= 0):
            raise DomainError("direct gains gain[i, i, k] must be strictly positive")
        if np.any(self.noise <= 0):
            raise DomainError("noise powers must be strictly positive")
        if np.any(self.amp_inefficiency < 1):
            raise DomainError("amp_inefficiency must be >= 1")
        if np.any(self.static_power <= 0) or np.any(self.max_power <= 0):
            raise DomainError("static_power and max_power must be strictly positive")
        if np.any(self.min_rate < 0):
            raise DomainError("min_rate must be nonnegative")

    @property
    def n_users(self) -> int:
        return self.gain.shape[0]

    @property
    def n_blocks(self) -> int:
        return self.gain.shape[2]

    def direct_gain(self) -> np.ndarray:
        """The (N, K) array of gains from each user to its own receiver."""
        n = self.gain.shape[0]
        return self.gain[np.arange(n), np.arange(n), :]


@dataclass(frozen=True)
class MetricsReport:
    """Everything measurable about one allocation on one instance."""

    sinr: np.ndarray         # (N, K)
    rate: np.ndarray         # (N,) bit/s
    rate_total: float
    power: np.ndarray        # (N,) W (consumed, incl. static)
    power_total: float
    ee: np.ndarray           # (N,) bit/J
    ee_total: float
    ee_min: float
    jain_index: float


@dataclass(frozen=True)
class Violation:
    """One failed constraint: `slack` is negative by how much it fails."""

    kind: str                # "nonnegativity" | "power_budget" | "min_rate"
    index: tuple
    slack: float


@dataclass(frozen=True)
class FeasibilityResult:
    ok: bool
    violations: list[Violation]

    def __bool__(self) -> bool:
        return self.ok


def _check_alloc(instance: NetworkInstance, alloc: np.ndarray, nonneg: bool = True) -> np.ndarray:
    p = np.asarray(alloc, dtype=float)
    expected = (instance.n_users, instance.n_blocks)
    if p.shape != expected:
        raise ShapeError(f"allocation shape {p.shape} does not match instance {expected}")
    if not np.all(np.isfinite(p)):
        raise DomainError("allocation entries must be finite")
    if nonneg and np.any(p < 0):
        raise DomainError("allocation entries must be nonnegative")
    return p


def sinr(instance: NetworkInstance, alloc: np.ndarray) -> np.ndarray:
    """Per-(user, block) SINR: direct power over interference plus noise."""
    p = _check_alloc(instance, alloc)
    received = np.einsum("jik,jk->ik", instance.gain, p)
    direct = instance.direct_gain() * p
    interference = received - direct
    return direct / (interference + instance.noise)


def jain_index(values: np.ndarray) -> float:
    """Jain fairness index (sum v)^2 / (n sum v^2); all-zero input counts as fair."""
    v = np.asarray(values, dtype=float)
    total_sq = v.sum() ** 2
    denom = v.size * np.sum(v * v)
    if denom == 0.0:
        return 1.0
    return float(total_sq / denom)


def evaluate(instance: NetworkInstance, alloc: np.ndarray) -> MetricsReport:
    """Rates, consumed powers, energy efficiencies and fairness for one allocation."""
    p = _check_alloc(instance, alloc)
    gamma = sinr(instance, p)
    rate = instance.bandwidth_per_block * np.log2(1.0 + gamma).sum(axis=1)
    power = instance.amp_inefficiency * p.sum(axis=1) + instance.static_power
    ee = rate / power
    rate_total = float(rate.sum())
    power_total = float(power.sum())
    return MetricsReport(
        sinr=_frozen(gamma),
        rate=_frozen(rate),
        rate_total=rate_total,
        power=_frozen(power),
        power_total=power_total,
        ee=_frozen(ee),
        ee_total=rate_total / power_total,
        ee_min=float(ee.min()),
        jain_index=jain_index(ee),
    )


def is_feasible(instance: NetworkInstance, alloc: np.ndarray, tol: float = 0.0) -> FeasibilityResult:
    """Check an allocation against nonnegativity, power budgets and rate floors.

    `tol` is a relative slack: power sums may exceed the budget by a factor
    (1 + tol) and rates may fall short of the floor by a factor (1 - tol).
    """
    p = _check_alloc(instance, alloc, nonneg=False)
    violations: list[Violation] = []

    for i, k in zip(*np.nonzero(p < 0)):
        violations.append(Violation("nonnegativity", (int(i), int(k)), float(p[i, k])))

    # Rates are evaluated on the clipped allocation so a stray negative
    # entry cannot poison the remaining checks.
    p_eval = np.clip(p, 0.0, None)
    report = evaluate(instance, p_eval)

    power_used = p_eval.sum(axis=1)
    for i in range(instance.n_users):
        slack = float(instance.max_power[i] - power_used[i])
        if power_used[i] > instance.max_power[i] * (1.0 + tol):
            violations.append(Violation("power_budget", (i,), slack))
        slack = float(report.rate[i] - instance.min_rate[i])
        if report.rate[i] < instance.min_rate[i] * (1.0 - tol):
            violations.append(Violation("min_rate", (i,), slack))

    return FeasibilityResult(ok=not violations, violations=violations)
