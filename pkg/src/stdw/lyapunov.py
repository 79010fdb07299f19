"""Per-step Lyapunov decrease check for gradient descent on a strongly convex quadratic.

For ``f(theta) = 0.5 (theta - theta*)^T H (theta - theta*)`` with the
eigenvalues of ``H`` in ``[mu, L]`` and ``V(theta) = 0.5 |theta - theta*|^2``
one gradient step satisfies

    V(theta+) <= V(theta) - eta * (mu - c * eta / 2) * |theta - theta*|^2

with ``c = L**2``.  That bound is negative (strict decrease) exactly when
``eta < 2 mu / L**2``.  ``bound="literal"`` uses ``c = L`` instead; that
variant only holds in general when ``L <= 1``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import ortho_group

from .errors import ConfigError


@dataclass(frozen=True)
class LyapunovResult:
    violations: int
    values: np.ndarray  # V at every iterate, length steps + 1
    hessian_eigenvalues: np.ndarray


def random_quadratic(dim, mu, L, rng):
    """Hessian ``Q diag(lam) Q^T`` with ``lam`` spanning exactly ``[mu, L]``."""
    if dim == 1:
        lam = np.array([mu])
        q = np.ones((1, 1))
    else:
        lam = np.r_[mu, L, rng.uniform(mu, L, dim - 2)]
        q = ortho_group.rvs(dim, random_state=rng)
    return q @ np.diag(lam) @ q.T, lam


def lyapunov_check(dim, mu, L, eta, steps, seed=0, slack=1e-12, bound="squared"):
    if dim < 1 or steps < 1:
        raise ConfigError("dim and steps must be >= 1")
    if not 0 < mu <= L:
        raise ConfigError(f"need 0 < mu <= L, got mu={mu}, L={L}")
    if not 0 < eta < 2.0 / L:
        raise ConfigError(f"step size must lie in (0, 2/L) = (0, {2.0 / L}), got {eta}")
    if bound not in ("squared", "literal"):
        raise ConfigError(f"unknown bound {bound!r}")
    c = L * L if bound == "squared" else L
    rng = np.random.default_rng(seed)
    hess, lam = random_quadratic(dim, mu, L, rng)
    target = rng.standard_normal(dim)
    theta = target + rng.standard_normal(dim)
    values = [0.5 * float(np.dot(theta - target, theta - target))]
    violations = 0
    for _ in range(steps):
        err = theta - target
        theta = theta - eta * (hess @ err)
        v_new = 0.5 * float(np.dot(theta - target, theta - target))
        allowed = values[-1] - eta * (mu - c * eta / 2.0) * float(np.dot(err, err))
        if v_new > allowed + slack:
            violations += 1
        values.append(v_new)
    return LyapunovResult(violations, np.array(values), lam)
