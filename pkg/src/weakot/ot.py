"""Reference solvers for classical quadratic-cost optimal transport.

``solve_exact_ot`` solves the transportation LP at small scale and
certifies optimality through complementary slackness with the recovered
duals.  ``solve_sinkhorn`` runs diagonal scaling for the entropic problem
whose KL penalty is taken against the product measure mu x nu, so the
kernel is ``a_i b_j exp(-||x_i - y_j||^2 / eps)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.special import logsumexp

from .errors import (
    DegenerateMarginals,
    DimensionMismatch,
    InstanceTooLarge,
    NotConverged,
    NumericalUnderflow,
)
from .measures import DiscreteMeasure
from .owt import TransportPlan, _marginal_gap

__all__ = [
    "SinkhornConfig",
    "ExactOtSolution",
    "SinkhornSolution",
    "solve_exact_ot",
    "solve_sinkhorn",
    "w2_squared",
    "DEFAULT_ENTRY_CAP",
]

DEFAULT_ENTRY_CAP = 10_000
CERTIFICATE_TOL = 1e-9


@dataclass(frozen=True)
class SinkhornConfig:
    epsilon: float
    max_iters: int = 10_000
    marginal_tol: float = 1e-9
    log_domain: bool = True

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.marginal_tol <= 0 or self.max_iters < 1:
            raise ValueError("marginal_tol must be positive and max_iters at least 1")


class ExactOtSolution(NamedTuple):
    plan: TransportPlan
    value: float


class SinkhornSolution(NamedTuple):
    plan: TransportPlan
    cost: float


def _cost_matrix(mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
    if mu.dim != nu.dim:
        raise DimensionMismatch("measures must share the ambient dimension")
    diff = mu.points[:, None, :] - nu.points[None, :, :]
    return np.sum(diff**2, axis=2)


def solve_exact_ot(
    mu: DiscreteMeasure, nu: DiscreteMeasure, entry_cap: int = DEFAULT_ENTRY_CAP
) -> ExactOtSolution:
    """Exact quadratic-cost transport plan and squared Wasserstein-2 value.

    Solves the transportation LP with a dual-simplex method, so the plan is
    a vertex of the polytope.  Optimality is certified against the LP duals:
    all reduced costs nonnegative, complementary slackness on support.
    """
    r, m = mu.n, nu.n
    if r * m > entry_cap:
        raise InstanceTooLarge(f"{r}x{m} exceeds the {entry_cap}-entry cap")
    a, b = mu.weights, nu.weights
    if np.any(a <= 0) or np.any(b <= 0):
        raise DegenerateMarginals("drop zero-weight atoms before solving the exact LP")
    cost = _cost_matrix(mu, nu)

    cell = np.arange(r * m)
    row_of = np.repeat(np.arange(r), m)
    col_of = np.tile(np.arange(m), r)
    constraints = sparse.csr_matrix(
        (
            np.ones(2 * r * m),
            (np.concatenate([row_of, r + col_of]), np.concatenate([cell, cell])),
        ),
        shape=(r + m, r * m),
    )
    result = linprog(
        cost.ravel(),
        A_eq=constraints,
        b_eq=np.concatenate([a, b]),
        bounds=(0, None),
        method="highs-ds",
    )
    if not result.success:
        raise NotConverged(f"transportation LP failed: {result.message}")
    matrix = result.x.reshape(r, m)

    duals = result.eqlin.marginals
    u, v = duals[:r], duals[r:]
    reduced = cost - u[:, None] - v[None, :]
    scale = max(1.0, float(np.abs(cost).max()))
    if reduced.min() < -CERTIFICATE_TOL * scale:
        raise NotConverged("dual feasibility certificate failed")
    if float(np.abs(matrix * reduced).max()) > CERTIFICATE_TOL * scale:
        raise NotConverged("complementary slackness certificate failed")

    return ExactOtSolution(TransportPlan(matrix, a, b), float(result.fun))


def w2_squared(
    mu: DiscreteMeasure, nu: DiscreteMeasure, entry_cap: int = DEFAULT_ENTRY_CAP
) -> float:
    return solve_exact_ot(mu, nu, entry_cap=entry_cap).value


def _sinkhorn_log(cost, a, b, cfg):
    with np.errstate(divide="ignore"):
        log_a = np.log(a)
        log_b = np.log(b)
    scaled = cost / cfg.epsilon
    u = np.zeros_like(a)
    v = np.zeros_like(b)
    check_every = 5
    for iteration in range(1, cfg.max_iters + 1):
        u = -logsumexp(v[None, :] + log_b[None, :] - scaled, axis=1)
        v = -logsumexp(u[:, None] + log_a[:, None] - scaled, axis=0)
        if iteration % check_every == 0 or iteration == cfg.max_iters:
            plan = np.exp(log_a[:, None] + log_b[None, :] + u[:, None] + v[None, :] - scaled)
            if _marginal_gap(plan, a, b) <= cfg.marginal_tol:
                return plan
    raise NotConverged(f"Sinkhorn did not reach tolerance in {cfg.max_iters} iterations")


def _sinkhorn_linear(cost, a, b, cfg):
    kernel = np.exp(-cost / cfg.epsilon) * np.outer(a, b)
    alpha = np.ones_like(a)
    beta = np.ones_like(b)
    for _ in range(cfg.max_iters):
        row_mass = kernel @ beta
        if np.any((row_mass <= 0) & (a > 0)):
            raise NumericalUnderflow("kernel underflow; use log_domain or a larger epsilon")
        alpha = np.divide(a, row_mass, out=np.zeros_like(a), where=row_mass > 0)
        col_mass = kernel.T @ alpha
        if np.any((col_mass <= 0) & (b > 0)):
            raise NumericalUnderflow("kernel underflow; use log_domain or a larger epsilon")
        beta = np.divide(b, col_mass, out=np.zeros_like(b), where=col_mass > 0)
        plan = alpha[:, None] * kernel * beta[None, :]
        if _marginal_gap(plan, a, b) <= cfg.marginal_tol:
            return plan
    raise NotConverged(f"Sinkhorn did not reach tolerance in {cfg.max_iters} iterations")


def solve_sinkhorn(
    mu: DiscreteMeasure, nu: DiscreteMeasure, cfg: SinkhornConfig
) -> SinkhornSolution:
    """Entropic transport plan by diagonal scaling, plus its unregularized cost.

    The returned cost is ``sum_ij pi_ij ||x_i - y_j||^2`` evaluated at the
    regularized plan.  Log-domain updates (the default) are safe for any
    epsilon; the linear domain raises on kernel underflow.
    """
    cost = _cost_matrix(mu, nu)
    a, b = mu.weights, nu.weights
    if cfg.log_domain:
        matrix = _sinkhorn_log(cost, a, b, cfg)
    else:
        matrix = _sinkhorn_linear(cost, a, b, cfg)
    plan = TransportPlan(matrix, a, b)
    return SinkhornSolution(plan, float(np.sum(plan.matrix * cost)))
