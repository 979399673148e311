"""Shared test fixtures: small random instances at O(1) scales."""

import numpy as np

from eeopt.network import NetworkInstance


def random_instance(rng, n_users=2, n_blocks=2, min_rate=0.0, bandwidth=1.0):
    """A well-conditioned random instance with unit-scale parameters.

    Direct gains are boosted above the cross gains so every user has a
    usable link, which keeps rates and finite-difference checks well away
    from degenerate regimes.
    """
    n, k = n_users, n_blocks
    gain = rng.uniform(0.01, 0.3, size=(n, n, k))
    idx = np.arange(n)
    gain[idx, idx, :] = rng.uniform(0.5, 2.0, size=(n, k))
    return NetworkInstance(
        bandwidth_per_block=bandwidth,
        gain=gain,
        noise=rng.uniform(0.05, 0.5, size=(n, k)),
        amp_inefficiency=rng.uniform(1.0, 4.0, size=n),
        static_power=rng.uniform(0.2, 2.0, size=n),
        max_power=rng.uniform(0.5, 4.0, size=n),
        min_rate=np.full(n, float(min_rate)),
    )


def random_alloc(rng, instance, scale=1.0):
    """A strictly positive allocation inside the power budgets."""
    n, k = instance.n_users, instance.n_blocks
    raw = rng.uniform(0.05, 1.0, size=(n, k))
    budget = scale * instance.max_power / raw.sum(axis=1)
    return raw * budget[:, None] * rng.uniform(0.3, 0.999)


def central_diff(f, x, step=1e-6):
    """Central finite-difference gradient of scalar f over a flat array."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros(x.size)
    for i in range(x.size):
        hi = x.copy().ravel()
        lo = x.copy().ravel()
        hi[i] += step
        lo[i] -= step
        grad[i] = (f(hi.reshape(x.shape)) - f(lo.reshape(x.shape))) / (2 * step)
    return grad


def rel_err(actual, expected, floor=1e-9):
    """Elementwise relative error with an absolute floor for near-zero entries."""
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    return np.abs(actual - expected) / np.maximum(np.abs(expected), floor)
