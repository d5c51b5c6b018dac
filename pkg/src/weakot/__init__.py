"""Weak optimal transport for discrete measures.

Plans and barycentric projections for the quadratic barycentric transport
cost, exact and entropic classical transport references, weak barycenters
of finite families and streams of measures, seeded data generators, and
file formats for measures and iteration traces.
"""

from . import errors
from .measures import (
    ConvexOrderDecision,
    ConvexOrderVerdict,
    DiscreteMeasure,
    check_convex_order_1d,
    convex_order_certificate,
    make_measure,
    mean,
    push_forward,
)
from .owt import (
    BarycentricMap,
    OwtSolution,
    SolverConfig,
    SolverTrace,
    TransportPlan,
    barycentric_projection,
    owt_gradient,
    owt_objective,
    project_transport_polytope,
    solve_owt,
)
from .ot import (
    DEFAULT_ENTRY_CAP,
    ExactOtSolution,
    SinkhornConfig,
    SinkhornSolution,
    solve_exact_ot,
    solve_sinkhorn,
    w2_squared,
)
from .barycenters import (
    BarycenterProblem,
    BarycenterResult,
    MapOutcome,
    MapProvider,
    StepRecord,
    StepSchedule,
    fixed_point_step,
    make_schedule,
    optimal_energy_closed_form,
    stream_barycenter,
    stream_barycenter_step,
    weak_barycenter,
    weak_barycenter_energy,
)
from .datagen import (
    CorruptionSpec,
    GeneratorSpec,
    corrupt_outliers,
    ellipse_cloud,
    gaussian_cloud,
    generate,
    image_to_measure,
    iter_measures,
    noisy_digit,
    shell_translation_sampler,
    spiral_cloud,
)
from .fileio import read_measure, write_measure, write_trace

__version__ = "0.1.0"

__all__ = [
    "errors",
    "ConvexOrderDecision",
    "ConvexOrderVerdict",
    "DiscreteMeasure",
    "check_convex_order_1d",
    "convex_order_certificate",
    "make_measure",
    "mean",
    "push_forward",
    "BarycentricMap",
    "OwtSolution",
    "SolverConfig",
    "SolverTrace",
    "TransportPlan",
    "barycentric_projection",
    "owt_gradient",
    "owt_objective",
    "project_transport_polytope",
    "solve_owt",
    "DEFAULT_ENTRY_CAP",
    "ExactOtSolution",
    "SinkhornConfig",
    "SinkhornSolution",
    "solve_exact_ot",
    "solve_sinkhorn",
    "w2_squared",
    "BarycenterProblem",
    "BarycenterResult",
    "MapOutcome",
    "MapProvider",
    "StepRecord",
    "StepSchedule",
    "fixed_point_step",
    "make_schedule",
    "optimal_energy_closed_form",
    "stream_barycenter",
    "stream_barycenter_step",
    "weak_barycenter",
    "weak_barycenter_energy",
    "CorruptionSpec",
    "GeneratorSpec",
    "corrupt_outliers",
    "ellipse_cloud",
    "gaussian_cloud",
    "generate",
    "image_to_measure",
    "iter_measures",
    "noisy_digit",
    "shell_translation_sampler",
    "spiral_cloud",
    "read_measure",
    "write_measure",
    "write_trace",
]
