"""Weak-transport solver for discrete measures.

Minimizes the quadratic barycentric cost

    sum_i a_i || x_i - (pi @ Y)_i / a_i ||^2

over the transport polytope {pi >= 0, pi @ 1 = a, pi.T @ 1 = b} by an
accelerated projected gradient method: momentum extrapolation with a
monotone backtracking line search and a function-value restart.  The
Euclidean projection onto the polytope runs cyclic Dykstra iterations;
the two marginal constraints are affine and projected in closed form,
the nonnegativity clamp is the only set that needs a Dykstra correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.spatial.distance import pdist

from .errors import DimensionMismatch, ZeroRowWeight
from .measures import DiscreteMeasure, push_forward

__all__ = [
    "SolverConfig",
    "TransportPlan",
    "BarycentricMap",
    "SolverTrace",
    "OwtSolution",
    "owt_objective",
    "owt_gradient",
    "project_transport_polytope",
    "solve_owt",
    "barycentric_projection",
]

NEGATIVE_ENTRY_TOL = 1e-12
POLISH_TOL = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and step rules for the weak-transport solver.

    ``obj_tol`` stops the outer iteration once the objective change drops
    below ``obj_tol * max(1, |f|)``; ``marginal_tol`` bounds the feasibility
    gap of every projection.  The line search starts at ``initial_step`` and
    only ever shrinks (by ``line_search_shrink``), which keeps the number of
    projections per iteration amortized constant.  ``accelerated=False``
    switches the momentum off, giving the plain proximal-gradient method.
    """

    max_iters: int = 5000
    obj_tol: float = 1e-7
    marginal_tol: float = 1e-8
    dykstra_max_iters: int = 2000
    line_search_shrink: float = 0.5
    initial_step: float = 1.0
    restart_on_increase: bool = True
    seed: int = 0
    accelerated: bool = True

    def __post_init__(self):
        if self.obj_tol <= 0 or self.marginal_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not 0.0 < self.line_search_shrink < 1.0:
            raise ValueError("line_search_shrink must lie in (0, 1)")
        if self.initial_step <= 0:
            raise ValueError("initial_step must be positive")
        if self.max_iters < 1 or self.dykstra_max_iters < 1:
            raise ValueError("iteration caps must be at least 1")


def _marginal_gap(matrix: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    row_dev = np.abs(matrix.sum(axis=1) - a).max()
    col_dev = np.abs(matrix.sum(axis=0) - b).max()
    return float(max(row_dev, col_dev))


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Nonnegative coupling matrix with prescribed marginals.

    ``feasibility_gap`` is the largest deviation of the actual row/column
    sums from the prescribed marginals; entries are clamped at zero on
    construction (inputs may carry roundoff down to -1e-12).
    """

    matrix: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray
    feasibility_gap: float = field(init=False)

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=float)
        a = np.array(self.row_marginal, dtype=float)
        b = np.array(self.col_marginal, dtype=float)
        if mat.ndim != 2 or mat.shape != (a.shape[0], b.shape[0]):
            raise DimensionMismatch(
                f"plan of shape {mat.shape} does not match marginals ({a.shape[0]}, {b.shape[0]})"
            )
        if not np.all(np.isfinite(mat)):
            raise ValueError("plan entries must be finite")
        if mat.min(initial=0.0) < -NEGATIVE_ENTRY_TOL:
            raise ValueError("plan entries below -1e-12; projection failed")
        np.maximum(mat, 0.0, out=mat)
        gap = _marginal_gap(mat, a, b)
        for arr in (mat, a, b):
            arr.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "row_marginal", a)
        object.__setattr__(self, "col_marginal", b)
        object.__setattr__(self, "feasibility_gap", gap)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape


@dataclass(frozen=True, eq=False)
class BarycentricMap:
    """Per-source-atom conditional means of a transport plan.

    Image ``i`` is ``(pi @ Y)_i / a_i``: where the plan sends the mass of
    source atom ``i`` on average.
    """

    source: DiscreteMeasure
    images: np.ndarray

    def __post_init__(self):
        imgs = np.array(self.images, dtype=float)
        if imgs.ndim != 2 or imgs.shape[0] != self.source.n:
            raise DimensionMismatch("one image per source point required")
        imgs.setflags(write=False)
        object.__setattr__(self, "images", imgs)

    def push(self) -> DiscreteMeasure:
        """Pushforward of the source under the map."""
        return push_forward(self.source, self.images)

    def displacement_cost(self) -> float:
        """Weighted squared displacement; the weak objective of the plan."""
        delta = self.source.points - self.images
        return float(np.sum(self.source.weights * np.sum(delta**2, axis=1)))

    def max_stretch(self) -> float:
        """Largest ||S(x_i)-S(x_j)|| / ||x_i-x_j|| over distinct support pairs."""
        if self.source.n < 2:
            return 0.0
        src = pdist(self.source.points)
        img = pdist(self.images)
        positive = src > 0
        if not positive.any():
            return 0.0
        return float((img[positive] / src[positive]).max())


@dataclass(frozen=True)
class SolverTrace:
    """Per-iteration objective values, step sizes, and feasibility gaps."""

    objectives: np.ndarray
    step_sizes: np.ndarray
    feasibility_gaps: np.ndarray
    iterations_used: int
    converged: bool


class OwtSolution(NamedTuple):
    plan: TransportPlan
    value: float
    projection: BarycentricMap
    trace: SolverTrace


def _check_instance(plan: TransportPlan, mu: DiscreteMeasure, nu: DiscreteMeasure):
    if mu.dim != nu.dim:
        raise DimensionMismatch("source and target must share the ambient dimension")
    if plan.shape != (mu.n, nu.n):
        raise DimensionMismatch(
            f"plan shape {plan.shape} does not match measure sizes ({mu.n}, {nu.n})"
        )
    if np.any(mu.weights <= 0):
        raise ZeroRowWeight("source atoms must have positive weight")


def _conditional_means(matrix: np.ndarray, targets: np.ndarray, a: np.ndarray) -> np.ndarray:
    return (matrix @ targets) / a[:, None]


def owt_objective(plan: TransportPlan, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Quadratic barycentric cost of a plan: weighted squared distance of
    each source point to the conditional mean of its transported mass."""
    _check_instance(plan, mu, nu)
    means = _conditional_means(plan.matrix, nu.points, mu.weights)
    delta = mu.points - means
    return float(np.sum(mu.weights * np.sum(delta**2, axis=1)))


def owt_gradient(plan: TransportPlan, mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
    """Gradient of the weak objective: entry (i, j) is 2 (s_i - x_i) . y_j."""
    _check_instance(plan, mu, nu)
    means = _conditional_means(plan.matrix, nu.points, mu.weights)
    return 2.0 * (means - mu.points) @ nu.points.T


def _water_fill(values: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Per-row levels t solving sum_j max(values[i, j] + t_i, 0) = targets[i].

    The left side is piecewise linear and increasing in t, so the root is
    exact: sort each row, locate the active count by the usual water-filling
    predicate, and average.  Rows with target zero get the level that just
    drains them.
    """
    sorted_desc = -np.sort(-values, axis=1)
    prefix = np.cumsum(sorted_desc, axis=1)
    counts = np.arange(1, values.shape[1] + 1)
    candidates = (targets[:, None] - prefix) / counts
    active = (sorted_desc + candidates > 0).sum(axis=1)
    levels = np.where(
        active > 0,
        np.take_along_axis(candidates, np.maximum(active - 1, 0)[:, None], axis=1)[:, 0],
        -sorted_desc[:, 0],
    )
    return levels


def _newton_duals(
    matrix: np.ndarray, a: np.ndarray, b: np.ndarray, u: np.ndarray, v: np.ndarray
):
    """One primal-dual active-set step for the projection duals.

    On the active set of Z = max(P + u + v, 0) the marginal equations are
    linear in (u, v); solving them exactly jumps to the projection once the
    active set has settled.  Returns refined duals or None when the reduced
    system is empty or singular (disconnected active graph)."""
    active = (matrix + u[:, None] + v[None, :]) > 0
    row_counts = active.sum(axis=1)
    col_counts = active.sum(axis=0)
    rows = np.where(row_counts > 0)[0]
    cols = np.where(col_counts > 0)[0]
    if rows.size == 0 or cols.size == 0:
        return None
    sub = active[np.ix_(rows, cols)].astype(float)
    n_r, n_c = rows.size, cols.size
    size = n_r + n_c
    system = np.zeros((size, size))
    system[:n_r, :n_r] = np.diag(row_counts[rows])
    system[n_r:, n_r:] = np.diag(col_counts[cols])
    system[:n_r, n_r:] = sub
    system[n_r:, :n_r] = sub.T
    masked = np.where(active, matrix, 0.0)
    rhs = np.concatenate([a[rows] - masked[rows, :].sum(axis=1), b[cols] - masked[:, cols].sum(axis=0)])
    # the system has the constant-shift nullspace (u + c, v - c): ground the
    # last column dual at its current value
    fixed = v[cols[-1]]
    try:
        solution = np.linalg.solve(system[:-1, :-1], rhs[:-1] - system[:-1, -1] * fixed)
    except np.linalg.LinAlgError:
        return None
    u_new = u.copy()
    v_new = v.copy()
    u_new[rows] = solution[:n_r]
    v_new[cols[:-1]] = solution[n_r:]
    v_new[cols[-1]] = fixed
    return u_new, v_new


def _face_polish(
    pi: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    X: np.ndarray,
    Y: np.ndarray,
    outer_max: int | None = None,
    cg_max: int = 400,
) -> np.ndarray:
    """Active-set end game for the weak-transport quadratic.

    First-order iterations stall on degenerate optimal faces: the remaining
    descent directions thread through many zero entries and carry almost no
    curvature.  This routine minimizes the objective exactly over the
    current face (free entries, both marginals fixed) with projected
    conjugate gradients, walks to the boundary when an entry hits zero, and
    releases blocked entries whose reduced cost is negative, until the KKT
    conditions hold.  The equality projector solves a graph-Laplacian
    system on the free pattern, factored once per face.
    """
    from scipy.linalg import cho_factor, cho_solve

    def value(mat):
        delta = X - (mat @ Y) / a[:, None]
        return float(np.sum(a * np.sum(delta**2, axis=1)))

    def gradient(mat):
        return 2.0 * ((mat @ Y) / a[:, None] - X) @ Y.T

    def hessian_apply(mat):
        return 2.0 * ((mat @ Y) / a[:, None]) @ Y.T

    pi = pi.copy()
    best = pi.copy()
    f_best = value(pi)
    entry_gap = _marginal_gap(pi, a, b)
    free = pi > 1e-12
    grad_scale = 1.0 + float(np.abs(gradient(pi)).max())
    release_tol = 1e-9 * grad_scale
    if outer_max is None:
        # every boundary hit or release is one pivot; budget them by the
        # number of dual variables but keep large instances affordable
        outer_max = min(2400, max(24, 8 * (a.shape[0] + b.shape[0])))
    pivoting = True

    for _ in range(outer_max):
        rows = np.where(free.any(axis=1))[0]
        cols = np.where(free.any(axis=0))[0]
        if rows.size == 0 or cols.size == 0:
            break
        sub = free[np.ix_(rows, cols)].astype(float)
        n_r, n_c = rows.size, cols.size
        laplacian = np.zeros((n_r + n_c, n_r + n_c))
        laplacian[:n_r, :n_r] = np.diag(sub.sum(axis=1))
        laplacian[n_r:, n_r:] = np.diag(sub.sum(axis=0))
        laplacian[:n_r, n_r:] = sub
        laplacian[n_r:, :n_r] = sub.T
        laplacian[np.diag_indices(n_r + n_c)] += 1e-10
        try:
            factor = cho_factor(laplacian)
        except np.linalg.LinAlgError:
            break

        def fit_potentials(mat):
            rhs = np.concatenate(
                [mat[rows, :].sum(axis=1), mat[:, cols].sum(axis=0)]
            )
            sol = cho_solve(factor, rhs)
            u = np.zeros(a.shape[0])
            v = np.zeros(b.shape[0])
            u[rows] = sol[:n_r]
            v[cols] = sol[n_r:]
            return u, v

        def tangent_project(mat):
            # two correction sweeps: the regularized solve leaks ~1e-10 of
            # the marginals, and conjugate-gradient steps along near-flat
            # directions amplify any leak enormously
            out = np.where(free, mat, 0.0)
            for _ in range(2):
                u, v = fit_potentials(out)
                out = np.where(free, out - u[:, None] - v[None, :], 0.0)
            return out

        # conjugate gradients on the face; a rough direction suffices while
        # the active set is still being pivoted
        cg_budget = 12 if pivoting else cg_max
        step = np.zeros_like(pi)
        residual = -tangent_project(gradient(pi))
        rs = float(np.vdot(residual, residual))
        rs0 = rs
        direction = residual.copy()
        for _ in range(cg_budget):
            if rs <= max(1e-26, 1e-22 * rs0):
                break
            curved = tangent_project(hessian_apply(direction))
            curvature = float(np.vdot(direction, curved))
            if curvature <= 1e-18 * float(np.vdot(direction, direction)):
                # flat descent direction: ride it far enough that the
                # boundary cut below decides the step length
                peak = float(np.abs(direction).max())
                if peak > 0:
                    step = step + direction * (2.0 * (1.0 + float(pi.max())) / peak)
                break
            alpha = rs / curvature
            step += alpha * direction
            residual -= alpha * curved
            rs_new = float(np.vdot(residual, residual))
            direction = residual + (rs_new / rs) * direction
            rs = rs_new

        step = tangent_project(step)
        blocking = free & (step < 0)
        scale = 1.0
        if blocking.any():
            ratios = pi[blocking] / -step[blocking]
            scale = min(1.0, float(ratios.min()))
        moved = False
        if scale > 0 and np.abs(step).max() > 0:
            candidate = pi + scale * step
            np.maximum(candidate, 0.0, out=candidate)
            f_new = value(candidate)
            gap_new = _marginal_gap(candidate, a, b)
            if f_new < f_best and gap_new <= entry_gap + 1e-9:
                pi = candidate
                f_best = f_new
                best = pi.copy()
                moved = True
        if scale < 1.0:
            pivoting = True
            if not moved:
                break
            free = pi > 1e-12
            continue
        if pivoting and moved:
            # the full face step fit: rerun the endgame with the full
            # conjugate-gradient budget before testing optimality
            pivoting = False
            continue
        pivoting = False
        # KKT check: reduced costs of blocked entries must be nonnegative
        grad_now = gradient(pi)
        u, v = fit_potentials(np.where(free, grad_now, 0.0))
        reduced = grad_now - u[:, None] - v[None, :]
        releasable = ~free & (reduced < -release_tol)
        if not releasable.any():
            break
        free = free | releasable
        pivoting = True
    return best


class _DualProjector:
    """Euclidean projection onto the transport polytope via its dual.

    The projection is Z = max(P + u 1^T + 1 v^T, 0) for dual vectors (u, v)
    that make the marginals exact.  Block water-fill sweeps update each dual
    vector exactly given the other; periodic active-set Newton steps solve
    the linearized marginal equations outright.  Instances keep (u, v)
    across calls, so nearby projections of successive solver iterates
    converge after a handful of sweeps.
    """

    def __init__(self, a: np.ndarray, b: np.ndarray):
        self.a = a
        self.b = b
        self.u = np.zeros(a.shape[0])
        self.v = np.zeros(b.shape[0])

    def project(
        self, matrix: np.ndarray, tol: float, max_passes: int, patient: bool = True
    ) -> tuple[np.ndarray, float, bool]:
        u, v = self.u, self.v
        best = None
        stall_window, stall_factor = (32, 0.5) if patient else (8, 0.7)
        stall_gap = np.inf
        next_newton = 1
        for passes in range(1, max_passes + 1):
            u = _water_fill(matrix + v[None, :], self.a)
            v = _water_fill(matrix.T + u[None, :], self.b)
            projected = np.maximum(matrix + u[:, None] + v[None, :], 0.0)
            gap = _marginal_gap(projected, self.a, self.b)
            if best is None or gap < best[1]:
                best = (projected, gap)
            if gap <= tol:
                self.u, self.v = u, v
                return projected, gap, True
            if passes >= next_newton:
                refined = _newton_duals(matrix, self.a, self.b, u, v)
                landed = False
                if refined is not None:
                    cand = np.maximum(matrix + refined[0][:, None] + refined[1][None, :], 0.0)
                    cand_gap = _marginal_gap(cand, self.a, self.b)
                    if cand_gap < gap:
                        u, v = refined
                        projected, gap = cand, cand_gap
                        landed = True
                        if gap < best[1]:
                            best = (projected, gap)
                        if gap <= tol:
                            self.u, self.v = u, v
                            return projected, gap, True
                # back off when the active set is still churning
                next_newton = passes + 1 if landed else passes * 2
            if passes % stall_window == 0:
                # plateaued tail (degenerate active set): the best iterate is
                # already an excellent approximation, stop burning passes
                if gap > stall_factor * stall_gap:
                    break
                stall_gap = gap
        self.u, self.v = u, v
        return best[0], best[1], False


def _dykstra(
    matrix: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    tol: float,
    max_cycles: int,
) -> tuple[np.ndarray, float, int, bool]:
    """Euclidean projection onto the transport polytope.

    One cycle projects onto the row-sum affine set, the column-sum affine
    set, then clamps at zero carrying the Dykstra correction.  For
    probability marginals the two affine projections land exactly on both
    marginals, so the gap measured after the clamp is the total clamped
    mass of the cycle and shrinks linearly.
    """
    pi = np.array(matrix, dtype=float)
    r, m = pi.shape
    correction = np.zeros_like(pi)
    gap = np.inf
    for cycle in range(1, max_cycles + 1):
        pi += (a - pi.sum(axis=1))[:, None] / m
        pi += (b - pi.sum(axis=0))[None, :] / r
        shifted = pi + correction
        np.maximum(shifted, 0.0, out=pi)
        correction = shifted - pi
        gap = _marginal_gap(pi, a, b)
        if gap <= tol:
            return pi, gap, cycle, True
    return pi, gap, max_cycles, False


def project_transport_polytope(
    matrix, a, b, cfg: SolverConfig = SolverConfig()
) -> TransportPlan:
    """Project an arbitrary matrix onto {pi >= 0, pi @ 1 = a, pi.T @ 1 = b}.

    Stops once the feasibility gap drops below ``cfg.marginal_tol``; if the
    cycle budget runs out first, the best iterate is returned with its gap
    recorded in the plan (no exception).
    """
    mat = np.asarray(matrix, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if mat.ndim != 2 or mat.shape != (a.shape[0], b.shape[0]):
        raise DimensionMismatch(
            f"matrix of shape {mat.shape} does not match marginals ({a.shape[0]}, {b.shape[0]})"
        )
    for name, v in (("row", a), ("column", b)):
        if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} marginal must be a probability vector")
    projected, _, _, _ = _dykstra(mat, a, b, cfg.marginal_tol, cfg.dykstra_max_iters)
    return TransportPlan(projected, a, b)


def barycentric_projection(
    plan: TransportPlan, mu: DiscreteMeasure, nu: DiscreteMeasure
) -> BarycentricMap:
    """Conditional-mean map of any feasible plan between mu and nu."""
    _check_instance(plan, mu, nu)
    return BarycentricMap(mu, _conditional_means(plan.matrix, nu.points, mu.weights))


def _exact_solution(
    matrix: np.ndarray, images: np.ndarray, mu: DiscreteMeasure, nu: DiscreteMeasure
) -> OwtSolution:
    plan = TransportPlan(matrix, mu.weights, nu.weights)
    empty = np.empty(0)
    trace = SolverTrace(empty, empty, empty, iterations_used=0, converged=True)
    return OwtSolution(plan, 0.0, BarycentricMap(mu, images), trace)


def solve_owt(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    cfg: SolverConfig = SolverConfig(),
    *,
    init: Optional[np.ndarray] = None,
) -> OwtSolution:
    """Solve the weak-transport problem between two discrete measures.

    Returns the optimal plan, its cost, the barycentric projection, and an
    iteration trace.  Initialization is the independent coupling a b^T with
    seeded multiplicative noise, projected onto the polytope; ``init``
    overrides it (useful for warm starts across related solves).  If two
    trivially feasible couplings (the independent one; the diagonal one when
    the measures have identical sizes and weights) already achieve objective
    exactly zero, that coupling is returned directly: zero certifies global
    optimality of the nonnegative objective.
    """
    if mu.dim != nu.dim:
        raise DimensionMismatch("source and target must share the ambient dimension")
    a, b = mu.weights, nu.weights
    if np.any(a <= 0):
        raise ZeroRowWeight("source atoms must have positive weight; drop zero-weight atoms")
    X, Y = mu.points, nu.points
    r, m = mu.n, nu.n

    def value(mat: np.ndarray) -> float:
        delta = X - (mat @ Y) / a[:, None]
        return float(np.sum(a * np.sum(delta**2, axis=1)))

    def gradient(mat: np.ndarray) -> np.ndarray:
        means = (mat @ Y) / a[:, None]
        return 2.0 * (means - X) @ Y.T

    # Two trivially feasible couplings have closed-form conditional means;
    # objective exactly zero at either certifies global optimality (f >= 0).
    independent = np.outer(a, b)
    target_mean = b @ Y
    if float(np.sum(a * np.sum((X - target_mean) ** 2, axis=1))) == 0.0:
        images = np.broadcast_to(target_mean, X.shape).copy()
        return _exact_solution(independent, images, mu, nu)
    if r == m and np.array_equal(a, b):
        if float(np.sum(a * np.sum((X - Y) ** 2, axis=1))) == 0.0:
            return _exact_solution(np.diag(a), Y.copy(), mu, nu)

    if init is not None:
        start = np.asarray(init, dtype=float)
        if start.shape != (r, m):
            raise DimensionMismatch(f"init plan must have shape ({r}, {m})")
    else:
        rng = np.random.default_rng(cfg.seed)
        start = independent * (1.0 + 0.25 * rng.standard_normal((r, m)))
    projector = _DualProjector(a, b)
    pi, gap, _ = projector.project(start, cfg.marginal_tol, cfg.dykstra_max_iters)

    theta = cfg.initial_step
    shrink = cfg.line_search_shrink

    def prox_step(base: np.ndarray, step: float, inner_tol: float):
        f_base = value(base)
        grad = gradient(base)
        while True:
            cand, cand_gap, _ = projector.project(
                base - step * grad, inner_tol, cfg.dykstra_max_iters, patient=False
            )
            f_cand = value(cand)
            diff = cand - base
            model = (
                f_base
                + float(np.vdot(grad, diff))
                + float(np.vdot(diff, diff)) / (2.0 * step)
            )
            if f_cand <= model + 1e-12 * max(1.0, abs(f_base)) or step <= 1e-18:
                return cand, f_cand, cand_gap, step
            step *= shrink

    # Momentum with monotone iterate selection: the accelerated candidate z
    # drives the extrapolation sequence, while the recorded iterate x only
    # ever improves.  This keeps the trace nonincreasing without the
    # acceleration loss a plain value-restart causes on degenerate faces.
    x = pi
    f_x = value(x)
    gap_x = gap
    x_prev = x
    y = x
    t_mom = 1.0
    objectives: list[float] = []
    step_sizes: list[float] = []
    gaps: list[float] = []
    converged = False
    quiet_steps = 0
    iterations = 0
    # Inexact inner projections: loose while the objective still moves,
    # tightened toward marginal_tol as the relative change approaches the
    # stopping threshold.  The returned plan is polished afterwards.
    inner_tol = min(1e-6, max(cfg.marginal_tol, 1e-6))

    while iterations < cfg.max_iters:
        z, f_z, gap_z, theta = prox_step(y, theta, inner_tol)
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom**2)) if cfg.accelerated else 1.0
        if cfg.restart_on_increase and f_z > f_x:
            x_next, f_next, gap_next = x, f_x, gap_x
        else:
            x_next, f_next, gap_next = z, f_z, gap_z
        if cfg.accelerated:
            y = (
                x_next
                + (t_mom / t_next) * (z - x_next)
                + ((t_mom - 1.0) / t_next) * (x_next - x_prev)
            )
        else:
            y = x_next
        f_before = f_x
        x_prev, x, f_x, gap_x = x, x_next, f_next, gap_next
        t_mom = t_next
        iterations += 1
        objectives.append(f_x)
        step_sizes.append(theta)
        gaps.append(gap_x)
        relative_change = abs(f_before - f_x) / max(1.0, abs(f_before))
        if relative_change <= cfg.obj_tol:
            quiet_steps += 1
            if quiet_steps >= 3:
                # certify: a tight descent step from x must not find further
                # progress, otherwise the quiet spell was a plateau artifact
                cand, f_cand, gap_c, theta = prox_step(x, theta, cfg.marginal_tol)
                if f_cand < f_x - cfg.obj_tol * max(1.0, abs(f_x)) and iterations < cfg.max_iters:
                    x_prev, x, f_x, gap_x = x, cand, f_cand, gap_c
                    y = x
                    t_mom = 1.0
                    iterations += 1
                    objectives.append(f_x)
                    step_sizes.append(theta)
                    gaps.append(gap_x)
                    quiet_steps = 0
                    continue
                converged = True
                break
        else:
            quiet_steps = 0
        inner_tol = min(1e-6, max(cfg.marginal_tol, 1e-3 * relative_change))

    # End game: first-order steps stall on degenerate faces, so finish with
    # an exact minimization over the identified face, then push the
    # feasibility gap to (near) machine precision so downstream mean
    # identities hold far below marginal_tol.  Full active-set pivoting is
    # reserved for desk-scale instances; large plans get a fixed budget.
    cells = r * m
    if cells <= 6000:
        pivot_budget = None
    elif cells <= 20000:
        pivot_budget = 60
    else:
        pivot_budget = 24
    x = _face_polish(x, a, b, X, Y, outer_max=pivot_budget)
    pi, _, _ = projector.project(
        x, min(cfg.marginal_tol, POLISH_TOL), cfg.dykstra_max_iters
    )
    plan = TransportPlan(pi, a, b)
    images = _conditional_means(plan.matrix, Y, a)
    delta = X - images
    final_value = float(np.sum(a * np.sum(delta**2, axis=1)))
    trace = SolverTrace(
        np.asarray(objectives),
        np.asarray(step_sizes),
        np.asarray(gaps),
        iterations_used=len(objectives),
        converged=converged,
    )
    return OwtSolution(plan, final_value, BarycentricMap(mu, images), trace)
