"""Discrete probability measures on R^d and convex-order checks.

A measure is a weighted point cloud.  Weights are normalized once at
construction and all arrays are frozen, so measures can be shared freely
between concurrent solves.  Duplicate support points are deliberately kept
as separate atoms: pushforwards create them naturally and merging would
break the row correspondence of transport plans.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.spatial.distance import pdist

from .errors import DimensionMismatch, EmptySupport, NegativeWeight, NonFiniteValue

__all__ = [
    "DiscreteMeasure",
    "make_measure",
    "mean",
    "push_forward",
    "ConvexOrderDecision",
    "ConvexOrderVerdict",
    "check_convex_order_1d",
    "convex_order_certificate",
]

WEIGHT_SUM_TOL = 1e-12


def _as_points(points) -> np.ndarray:
    pts = np.array(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.size == 0:
        raise EmptySupport("a measure needs at least one support point")
    if pts.ndim != 2:
        raise DimensionMismatch(f"points must form an (n, d) array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise NonFiniteValue("support points must be finite")
    return pts


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """``sum_i weights[i] * delta_{points[i]}`` with weights on the simplex."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = _as_points(self.points)
        w = np.array(self.weights, dtype=float)
        if w.shape != (pts.shape[0],):
            raise DimensionMismatch(
                f"{pts.shape[0]} points but weight array of shape {w.shape}"
            )
        if not np.all(np.isfinite(w)):
            raise NonFiniteValue("weights must be finite")
        if np.any(w < 0):
            raise NegativeWeight("weights must be nonnegative")
        total = w.sum()
        if total <= 0:
            raise NegativeWeight("weights must have a positive sum")
        # Renormalize only when needed so already-normalized weights are
        # passed through bit-identically (pushforwards preserve mass exactly).
        for _ in range(4):
            if abs(total - 1.0) <= WEIGHT_SUM_TOL:
                break
            w = w / total
            total = w.sum()
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def total_variance(self) -> float:
        """Sum of weighted squared deviations from the mean (trace of covariance)."""
        centered = self.points - self.mean()
        return float(np.sum(self.weights * np.sum(centered**2, axis=1)))

    def support_diameter(self) -> float:
        if self.n < 2:
            return 0.0
        return float(pdist(self.points).max())


def make_measure(points, weights=None) -> DiscreteMeasure:
    """Build a measure from an (n, d) point array; uniform weights by default."""
    pts = _as_points(points)
    if weights is None:
        weights = np.full(pts.shape[0], 1.0 / pts.shape[0])
    return DiscreteMeasure(pts, weights)


def mean(m: DiscreteMeasure) -> np.ndarray:
    return m.mean()


def push_forward(m: DiscreteMeasure, images) -> DiscreteMeasure:
    """Image measure of ``m`` under a map given by per-atom image points.

    Row ``i`` of ``images`` is the image of support point ``i``; weights are
    carried over unchanged and coinciding images are not coalesced.
    """
    imgs = np.array(images, dtype=float)
    if imgs.ndim == 1:
        imgs = imgs.reshape(-1, 1)
    if imgs.ndim != 2 or imgs.shape[0] != m.n:
        raise DimensionMismatch(
            f"expected one image per support point ({m.n}), got shape {imgs.shape}"
        )
    if not np.all(np.isfinite(imgs)):
        raise NonFiniteValue("image points must be finite")
    return DiscreteMeasure(imgs, m.weights)


class ConvexOrderDecision(Enum):
    HOLDS = "holds"
    FAILS = "fails"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class ConvexOrderVerdict:
    """Outcome of a convex-order test.

    ``max_violation`` is the largest observed excess of a convex test
    integral of the first measure over the second.  When the decision is
    FAILS the witness is either the 1-d threshold where the integrated
    survival comparison breaks, the string ``"mean"`` for a mean mismatch,
    or the index of the violating test function in the d-dimensional
    certificate.
    """

    decision: ConvexOrderDecision
    max_violation: float
    witness: float | int | str | None = None

    @property
    def holds(self) -> bool:
        return self.decision is ConvexOrderDecision.HOLDS

    @property
    def fails(self) -> bool:
        return self.decision is ConvexOrderDecision.FAILS


def _stop_loss(support: np.ndarray, weights: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    # E max(X - t, 0) for every threshold t; piecewise linear in t with
    # kinks exactly at the support points.
    return np.clip(support[None, :] - thresholds[:, None], 0.0, None) @ weights


def check_convex_order_1d(
    eta: DiscreteMeasure, nu: DiscreteMeasure, tol: float = 1e-9
) -> ConvexOrderVerdict:
    """Exact convex-order decision for one-dimensional discrete measures.

    ``eta <=_c nu`` holds iff the means agree and ``E(X - t)^+ <= E(Y - t)^+``
    for every threshold t.  Both sides are piecewise linear with kinks at
    support points, so comparing on the merged support decides the relation
    everywhere; the verdict is exact up to ``tol``.
    """
    if eta.dim != 1 or nu.dim != 1:
        raise DimensionMismatch("the integrated-survival test requires one-dimensional measures")
    xs_eta = eta.points[:, 0]
    xs_nu = nu.points[:, 0]
    mean_gap = float(abs(xs_eta @ eta.weights - xs_nu @ nu.weights))
    thresholds = np.union1d(xs_eta, xs_nu)
    excess = _stop_loss(xs_eta, eta.weights, thresholds) - _stop_loss(xs_nu, nu.weights, thresholds)
    worst = int(np.argmax(excess))
    survival_violation = float(excess[worst])
    max_violation = max(survival_violation, mean_gap)
    if mean_gap <= tol and survival_violation <= tol:
        return ConvexOrderVerdict(ConvexOrderDecision.HOLDS, max_violation)
    witness: float | str
    if survival_violation > tol:
        witness = float(thresholds[worst])
    else:
        witness = "mean"
    return ConvexOrderVerdict(ConvexOrderDecision.FAILS, max_violation, witness)


def convex_order_certificate(
    eta: DiscreteMeasure,
    nu: DiscreteMeasure,
    num_funcs: int = 64,
    seed: int = 0,
    tol: float = 1e-9,
) -> ConvexOrderVerdict:
    """Heuristic falsifier of ``eta <=_c nu`` in any dimension.

    Integrates a fixed family (squared norm, signed coordinates) plus
    ``num_funcs`` sampled maxima of affine functions against both measures.
    Any integral excess above ``tol`` disproves the order; absence of a
    violation is reported as INCONCLUSIVE because no finite family of convex
    functions can certify the order for d >= 2.
    """
    if eta.dim != nu.dim:
        raise DimensionMismatch("measures must share the ambient dimension")
    d = eta.dim
    support = np.vstack([eta.points, nu.points])

    def gap(values_eta: np.ndarray, values_nu: np.ndarray) -> float:
        return float(eta.weights @ values_eta - nu.weights @ values_nu)

    gaps = [gap(np.sum(eta.points**2, axis=1), np.sum(nu.points**2, axis=1))]
    for j in range(d):
        gaps.append(gap(eta.points[:, j], nu.points[:, j]))
    for j in range(d):
        gaps.append(gap(-eta.points[:, j], -nu.points[:, j]))

    rng = np.random.default_rng(seed)
    for _ in range(num_funcs):
        pieces = int(rng.integers(2, 6))
        dirs = rng.standard_normal((pieces, d))
        norms = np.linalg.norm(dirs, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        dirs /= norms
        proj = support @ dirs.T
        offsets = rng.uniform(proj.min(axis=0), proj.max(axis=0))
        vals_eta = np.max(eta.points @ dirs.T - offsets, axis=1)
        vals_nu = np.max(nu.points @ dirs.T - offsets, axis=1)
        gaps.append(gap(vals_eta, vals_nu))

    gaps_arr = np.asarray(gaps)
    worst = int(np.argmax(gaps_arr))
    max_violation = float(gaps_arr[worst])
    if max_violation > tol:
        return ConvexOrderVerdict(ConvexOrderDecision.FAILS, max_violation, worst)
    return ConvexOrderVerdict(ConvexOrderDecision.INCONCLUSIVE, max_violation)
