"""Weak barycenters of finite families and streams of measures.

Two iteration schemes share one building block, the barycentric map of a
transport plan between the current iterate and an input measure:

* fixed-point iteration for a finite family: push the iterate forward
  under the weight-averaged maps until the energy stabilizes;
* stochastic streaming iteration: blend the identity with the map to the
  freshly observed measure using a square-summable step schedule.

The map provider is pluggable: the weak-transport solver (the default),
the exact transport LP, or Sinkhorn scaling.  With the non-weak providers
the same iterations produce the comparison objects referred to as the
"OT barycenter" and the "OT Sinkhorn barycenter"; those runs do not solve
a Wasserstein barycenter problem.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidScheduleParameter, StreamExhausted
from .measures import DiscreteMeasure, push_forward
from .owt import (
    BarycentricMap,
    SolverConfig,
    TransportPlan,
    barycentric_projection,
    solve_owt,
)
from .ot import DEFAULT_ENTRY_CAP, SinkhornConfig, solve_exact_ot, solve_sinkhorn

__all__ = [
    "BarycenterProblem",
    "MapProvider",
    "MapOutcome",
    "StepSchedule",
    "make_schedule",
    "StepRecord",
    "BarycenterResult",
    "weak_barycenter_energy",
    "optimal_energy_closed_form",
    "fixed_point_step",
    "weak_barycenter",
    "stream_barycenter_step",
    "stream_barycenter",
]

LAMBDA_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class BarycenterProblem:
    """A finite family of input measures with simplex weights."""

    inputs: tuple[DiscreteMeasure, ...]
    lambdas: Optional[np.ndarray] = None

    def __post_init__(self):
        inputs = tuple(self.inputs)
        if not inputs:
            raise ValueError("at least one input measure is required")
        dim = inputs[0].dim
        if any(nu.dim != dim for nu in inputs):
            raise DimensionMismatch("all input measures must share the ambient dimension")
        lam = self.lambdas
        if lam is None:
            lam = np.full(len(inputs), 1.0 / len(inputs))
        else:
            lam = np.array(lam, dtype=float)
            if lam.shape != (len(inputs),):
                raise DimensionMismatch(
                    f"{len(inputs)} inputs but weight vector of shape {lam.shape}"
                )
            if np.any(lam < 0) or lam.sum() <= 0:
                raise ValueError("weights must be nonnegative with a positive sum")
            total = lam.sum()
            if abs(total - 1.0) > LAMBDA_SUM_TOL:
                lam = lam / total
        lam.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "lambdas", lam)

    @property
    def dim(self) -> int:
        return self.inputs[0].dim


class MapOutcome(NamedTuple):
    projection: BarycentricMap
    value: float
    plan: TransportPlan


@dataclass(frozen=True)
class MapProvider:
    """Pluggable source of barycentric maps: "owt", "ot", or "sinkhorn"."""

    kind: str
    owt_config: SolverConfig = SolverConfig()
    sinkhorn_config: Optional[SinkhornConfig] = None
    entry_cap: int = DEFAULT_ENTRY_CAP

    def __post_init__(self):
        if self.kind not in ("owt", "ot", "sinkhorn"):
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.kind == "sinkhorn" and self.sinkhorn_config is None:
            raise ValueError("sinkhorn provider requires a SinkhornConfig")

    def barycentric_map(
        self, mu: DiscreteMeasure, nu: DiscreteMeasure, init: Optional[np.ndarray] = None
    ) -> MapOutcome:
        """Map, weak-objective value, and plan for the pair (mu, nu).

        The value is the weak objective evaluated at the provider's plan;
        for the "owt" kind this is the optimal weak-transport cost itself.
        """
        if self.kind == "owt":
            solution = solve_owt(mu, nu, self.owt_config, init=init)
            return MapOutcome(solution.projection, solution.value, solution.plan)
        if self.kind == "ot":
            plan = solve_exact_ot(mu, nu, entry_cap=self.entry_cap).plan
        else:
            plan = solve_sinkhorn(mu, nu, self.sinkhorn_config).plan
        projection = barycentric_projection(plan, mu, nu)
        return MapOutcome(projection, projection.displacement_cost(), plan)


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes c / (k+1)^p capped at 1, with p in (1/2, 1] so that the
    squares are summable while the sums diverge."""

    kind: str
    c: float
    p: float = 1.0

    def __call__(self, k: int) -> float:
        return min(1.0, self.c / (k + 1.0) ** self.p)


def make_schedule(kind: str, c: float = 1.0, p: Optional[float] = None) -> StepSchedule:
    if c <= 0:
        raise InvalidScheduleParameter("the step constant must be positive")
    if kind == "harmonic":
        if p is not None and p != 1.0:
            raise InvalidScheduleParameter("the harmonic schedule fixes p = 1")
        return StepSchedule("harmonic", c, 1.0)
    if kind == "power":
        if p is None or not 0.5 < p <= 1.0:
            raise InvalidScheduleParameter(
                "power schedule needs p in (1/2, 1]: smaller breaks square-summability,"
                " larger breaks divergence of the sums"
            )
        return StepSchedule("power", c, p)
    raise InvalidScheduleParameter(f"unknown schedule kind {kind!r}")


class StepRecord(NamedTuple):
    k: int
    energy: float
    step_size: Optional[float]
    support_diameter: float


@dataclass(frozen=True)
class BarycenterResult:
    barycenter: DiscreteMeasure
    energy_trace: np.ndarray
    iterations: int
    converged: bool
    population_energy_estimate: Optional[float]
    steps: tuple[StepRecord, ...]


def optimal_energy_closed_form(prob: BarycenterProblem) -> float:
    """Optimal value of the weak barycenter problem from input means only:
    the weighted mean of squared mean norms minus the squared norm of the
    weighted mean."""
    means = np.stack([nu.mean() for nu in prob.inputs])
    lam = prob.lambdas
    pooled = lam @ means
    return float(lam @ np.sum(means**2, axis=1) - pooled @ pooled)


def weak_barycenter_energy(
    mu: DiscreteMeasure, prob: BarycenterProblem, cfg: SolverConfig = SolverConfig()
) -> float:
    """Weighted sum of weak-transport costs from mu to every input."""
    return float(
        sum(
            lam * solve_owt(mu, nu, cfg).value
            for lam, nu in zip(prob.lambdas, prob.inputs)
        )
    )


def _step_outcomes(
    mu: DiscreteMeasure,
    prob: BarycenterProblem,
    provider: MapProvider,
    jobs: int,
    warm: dict[int, np.ndarray],
) -> list[MapOutcome]:
    def solve_one(index_and_nu):
        index, nu = index_and_nu
        return provider.barycentric_map(mu, nu, init=warm.get(index))

    tasks = list(enumerate(prob.inputs))
    if jobs > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(solve_one, tasks))
    return [solve_one(task) for task in tasks]


def _blended_images(prob: BarycenterProblem, outcomes: Sequence[MapOutcome]) -> np.ndarray:
    images = np.zeros_like(outcomes[0].projection.images)
    for lam, outcome in zip(prob.lambdas, outcomes):
        images += lam * outcome.projection.images
    return images


def fixed_point_step(
    mu: DiscreteMeasure,
    prob: BarycenterProblem,
    provider: MapProvider,
    *,
    jobs: int = 1,
) -> DiscreteMeasure:
    """One fixed-point update: push mu forward under the weight-averaged
    barycentric maps toward every input."""
    if mu.dim != prob.dim:
        raise DimensionMismatch("iterate and inputs must share the ambient dimension")
    outcomes = _step_outcomes(mu, prob, provider, jobs, {})
    return push_forward(mu, _blended_images(prob, outcomes))


def weak_barycenter(
    prob: BarycenterProblem,
    provider: MapProvider,
    stop_tol: float = 1e-5,
    max_steps: int = 50,
    *,
    initial: Optional[DiscreteMeasure] = None,
    jobs: int = 1,
    stop_on: str = "energy",
    warm_start: bool = True,
) -> BarycenterResult:
    """Fixed-point iteration for a finite family, started from the first
    input (overridable via ``initial``).

    Stops when the energy change between successive iterates falls below
    ``stop_tol``, or with ``stop_on="displacement"`` when the weighted
    squared displacement of one update does (a cheap surrogate that needs
    no energy comparison across iterates).  Per-input solves within one
    step are independent and fan out over ``jobs`` threads; with
    ``warm_start`` each input reuses its previous plan as initialization.
    """
    if stop_on not in ("energy", "displacement"):
        raise ValueError("stop_on must be 'energy' or 'displacement'")
    mu = initial if initial is not None else prob.inputs[0]
    if mu.dim != prob.dim:
        raise DimensionMismatch("initial iterate must share the ambient dimension")

    warm: dict[int, np.ndarray] = {}
    records: list[StepRecord] = []
    energy_prev: Optional[float] = None
    converged = False
    steps_done = 0

    for k in range(max_steps + 1):
        outcomes = _step_outcomes(mu, prob, provider, jobs, warm)
        energy = float(np.dot(prob.lambdas, [o.value for o in outcomes]))
        records.append(StepRecord(k, energy, None, mu.support_diameter()))
        if stop_on == "energy" and energy_prev is not None and abs(energy_prev - energy) < stop_tol:
            converged = True
            break
        images = _blended_images(prob, outcomes)
        if stop_on == "displacement":
            displacement = float(
                np.sum(mu.weights * np.sum((mu.points - images) ** 2, axis=1))
            )
            if displacement < stop_tol:
                converged = True
                break
        if k == max_steps:
            break
        if warm_start:
            warm = {i: o.plan.matrix for i, o in enumerate(outcomes)}
        mu = push_forward(mu, images)
        steps_done = k + 1
        energy_prev = energy

    return BarycenterResult(
        barycenter=mu,
        energy_trace=np.asarray([r.energy for r in records]),
        iterations=steps_done,
        converged=converged,
        population_energy_estimate=None,
        steps=tuple(records),
    )


def stream_barycenter_step(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    gamma: float,
    provider: MapProvider,
) -> DiscreteMeasure:
    """One stochastic update: blend the identity with the barycentric map
    toward the observed measure, ``x + gamma (S(x) - x)``."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    outcome = provider.barycentric_map(mu, nu)
    images = mu.points + gamma * (outcome.projection.images - mu.points)
    return push_forward(mu, images)


def stream_barycenter(
    stream: Iterable[DiscreteMeasure],
    schedule: StepSchedule,
    provider: MapProvider,
    steps: int,
    *,
    observer=None,
) -> BarycenterResult:
    """Streaming iteration over measures drawn from a population.

    The first streamed measure initializes the iterate; each subsequent one
    is consumed lazily, strictly one per step.  The per-step weak-objective
    values are recorded and averaged into a running estimate of the
    population energy.  ``observer(k, mu, nu, outcome)`` is called after
    each solve, before the iterate is updated.
    """
    iterator: Iterator[DiscreteMeasure] = iter(stream)
    try:
        mu = next(iterator)
    except StopIteration:
        raise StreamExhausted("the stream yielded no initial measure") from None

    records: list[StepRecord] = []
    value_sum = 0.0
    for k in range(steps):
        try:
            nu = next(iterator)
        except StopIteration:
            raise StreamExhausted(
                f"stream ended after {k} of {steps} steps"
            ) from None
        outcome = provider.barycentric_map(mu, nu)
        if observer is not None:
            observer(k, mu, nu, outcome)
        gamma = schedule(k)
        images = mu.points + gamma * (outcome.projection.images - mu.points)
        mu = push_forward(mu, images)
        value_sum += outcome.value
        records.append(StepRecord(k, outcome.value, gamma, mu.support_diameter()))

    estimate = value_sum / steps if steps else None
    return BarycenterResult(
        barycenter=mu,
        energy_trace=np.asarray([r.energy for r in records]),
        iterations=steps,
        converged=True,
        population_energy_estimate=estimate,
        steps=tuple(records),
    )
