"""Command-line front end.

Subcommands: ``owt`` (one weak-transport solve), ``barycenter``
(fixed-point iteration over measure files), ``stream`` (stochastic
iteration over a lazy file sequence or a seeded generator), ``generate``
(materialize a generator spec to files), and ``compare`` (all three map
providers on the same inputs, side by side).

Exit codes: 0 success, 2 when an iteration did not converge, 1 for usage
or I/O problems.  All randomness flows from ``--seed``; rerunning with the
same arguments produces byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .barycenters import (
    BarycenterProblem,
    MapProvider,
    make_schedule,
    stream_barycenter,
    weak_barycenter,
    weak_barycenter_energy,
    optimal_energy_closed_form,
)
from .datagen import GeneratorSpec, generate, iter_measures
from .errors import InstanceTooLarge, NotConverged, WeakOtError
from .fileio import read_measure, write_measure, write_trace
from .measures import DiscreteMeasure
from .ot import SinkhornConfig, solve_exact_ot
from .owt import SolverConfig, solve_owt

__all__ = ["main", "entrypoint"]

PROVIDER_LABELS = {"owt": "weak barycenter", "ot": "OT barycenter", "sinkhorn": "OT Sinkhorn barycenter"}


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; this front end uses 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _parse_span(text: str) -> tuple[float, float]:
    lo, _, hi = text.partition(":")
    return float(lo), float(hi)


def _parse_box(text: str) -> tuple[tuple[float, float], tuple[float, float]]:
    first, _, second = text.partition(",")
    return _parse_span(first), _parse_span(second)


def _parse_samples(text: str):
    if ":" in text:
        lo, _, hi = text.partition(":")
        return int(lo), int(hi)
    return int(text)


def _parse_schedule(text: str):
    kind, _, params = text.partition(":")
    parts = [p for p in params.split(",") if p] if params else []
    if kind == "harmonic":
        c = float(parts[0]) if parts else 1.0
        return make_schedule("harmonic", c=c)
    if kind == "power":
        if len(parts) != 2:
            raise WeakOtError("power schedule needs 'power:c,p'")
        return make_schedule("power", c=float(parts[0]), p=float(parts[1]))
    raise WeakOtError(f"unknown schedule {text!r}; use 'harmonic:c' or 'power:c,p'")


def _add_solver_options(parser):
    parser.add_argument("--obj-tol", type=float, default=1e-7, help="relative objective tolerance")
    parser.add_argument("--marginal-tol", type=float, default=1e-8, help="plan feasibility tolerance")
    parser.add_argument("--max-iters", type=int, default=5000, help="solver iteration cap")
    parser.add_argument("--seed", type=int, default=0, help="single source of randomness")


def _add_provider_options(parser):
    parser.add_argument("--provider", choices=("owt", "ot", "sinkhorn"), default="owt")
    parser.add_argument("--epsilon", type=float, default=1.0, help="Sinkhorn regularization")
    parser.add_argument(
        "--sinkhorn-tol", type=float, default=1e-6, help="Sinkhorn marginal tolerance"
    )


def _add_generator_options(parser):
    parser.add_argument("--family", choices=("gaussian", "spiral", "ellipse", "pair-ellipses"))
    parser.add_argument("--num-measures", type=int, default=15)
    parser.add_argument("--samples", type=_parse_samples, default=100, help="count or 'lo:hi'")
    parser.add_argument("--mean-box", type=_parse_box, default=((-3.0, 3.0), (-5.0, 5.0)))
    parser.add_argument("--ratio-range", type=_parse_span, default=(0.0, 3.0))
    parser.add_argument("--center-box", type=_parse_box, default=((-5.0, 5.0), (-5.0, 5.0)))
    parser.add_argument("--axis-range", type=_parse_span, default=(6.0, 14.0))
    parser.add_argument("--inner-axis-range", type=_parse_span, default=(1.0, 7.0))
    parser.add_argument("--outer-axis-range", type=_parse_span, default=(7.0, 13.0))
    parser.add_argument("--jitter", type=float, default=0.05)


def _solver_config(args) -> SolverConfig:
    return SolverConfig(
        max_iters=args.max_iters,
        obj_tol=args.obj_tol,
        marginal_tol=args.marginal_tol,
        seed=args.seed,
    )


def _provider(kind: str, args) -> MapProvider:
    cfg = _solver_config(args)
    if kind == "sinkhorn":
        sink = SinkhornConfig(epsilon=args.epsilon, marginal_tol=args.sinkhorn_tol)
        return MapProvider("sinkhorn", owt_config=cfg, sinkhorn_config=sink)
    return MapProvider(kind, owt_config=cfg)


def _generator_spec(args) -> GeneratorSpec:
    return GeneratorSpec(
        family=args.family,
        num_measures=args.num_measures,
        samples=args.samples,
        seed=args.seed,
        mean_box=args.mean_box,
        ratio_range=args.ratio_range,
        center_box=args.center_box,
        axis_range=args.axis_range,
        inner_axis_range=args.inner_axis_range,
        outer_axis_range=args.outer_axis_range,
        jitter=args.jitter,
    )


def _input_measures(args, parser) -> list[DiscreteMeasure]:
    if bool(args.inputs) == bool(args.family):
        parser.error("provide either measure files or --family, not both")
    if args.family:
        return generate(_generator_spec(args))
    return [read_measure(p) for p in args.inputs]


def _input_stream(args, parser):
    if bool(args.inputs) == bool(args.family):
        parser.error("provide either measure files or --family, not both")
    if args.family:
        return iter_measures(_generator_spec(args)), args.num_measures
    paths = list(args.inputs)
    return (read_measure(p) for p in paths), len(paths)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_owt(args, parser) -> int:
    mu = read_measure(args.source)
    nu = read_measure(args.target)
    solution = solve_owt(mu, nu, _solver_config(args))
    print(f"V={solution.value:.17g}")
    out = _out_dir(args)
    payload = {
        "value": solution.value,
        "matrix": [[float(v) for v in row] for row in solution.plan.matrix],
        "row_marginal": [float(v) for v in solution.plan.row_marginal],
        "col_marginal": [float(v) for v in solution.plan.col_marginal],
        "feasibility_gap": solution.plan.feasibility_gap,
        "converged": solution.trace.converged,
        "iterations": solution.trace.iterations_used,
    }
    (out / "plan.json").write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")
    write_measure(out / "map.csv", solution.projection.push())
    return 0 if solution.trace.converged else 2


def cmd_barycenter(args, parser) -> int:
    measures = [read_measure(p) for p in args.inputs]
    lambdas = np.array([float(x) for x in args.lambdas.split(",")]) if args.lambdas else None
    prob = BarycenterProblem(tuple(measures), lambdas)
    provider = _provider(args.provider, args)
    result = weak_barycenter(
        prob, provider, stop_tol=args.stop_tol, max_steps=args.steps, jobs=args.jobs
    )
    out = _out_dir(args)
    write_measure(out / "barycenter.csv", result.barycenter)
    write_trace(out / "trace.json", result, algorithm="fixed-point", provider=args.provider)
    print(
        f"energy={result.energy_trace[-1]:.17g} iterations={result.iterations} "
        f"converged={result.converged}"
    )
    return 0 if result.converged else 2


def cmd_stream(args, parser) -> int:
    stream, available = _input_stream(args, parser)
    steps = args.steps if args.steps is not None else max(available - 1, 1)
    schedule = _parse_schedule(args.schedule)
    provider = _provider(args.provider, args)
    result = stream_barycenter(stream, schedule, provider, steps)
    out = _out_dir(args)
    write_measure(out / "barycenter.csv", result.barycenter)
    write_trace(out / "trace.json", result, algorithm="stream", provider=args.provider)
    print(
        f"steps={result.iterations} "
        f"population_energy_estimate={result.population_energy_estimate:.17g}"
    )
    return 0 if result.converged else 2


def cmd_generate(args, parser) -> int:
    if not args.family:
        parser.error("generate requires --family")
    measures = generate(_generator_spec(args))
    out = _out_dir(args)
    for index, measure in enumerate(measures):
        write_measure(out / f"measure_{index:03d}.csv", measure)
    print(f"wrote {len(measures)} measures to {out}")
    return 0


def cmd_compare(args, parser) -> int:
    measures = _input_measures(args, parser)
    lambdas = np.array([float(x) for x in args.lambdas.split(",")]) if args.lambdas else None
    prob = BarycenterProblem(tuple(measures), lambdas)
    out = _out_dir(args)
    eval_cfg = _solver_config(args)

    barycenters = {}
    report: dict = {"algorithm": args.algorithm, "providers": {}, "pairwise_w2_squared": {}}
    all_converged = True
    for kind in ("owt", "ot", "sinkhorn"):
        provider = _provider(kind, args)
        if args.algorithm == "fixed-point":
            result = weak_barycenter(
                prob, provider, stop_tol=args.stop_tol, max_steps=args.steps, jobs=args.jobs
            )
        else:
            result = stream_barycenter(
                iter(measures), _parse_schedule(args.schedule), provider, len(measures) - 1
            )
        all_converged = all_converged and result.converged
        barycenters[kind] = result.barycenter
        energy = weak_barycenter_energy(result.barycenter, prob, eval_cfg)
        write_measure(out / f"barycenter_{kind}.csv", result.barycenter)
        write_trace(out / f"trace_{kind}.json", result, algorithm=args.algorithm, provider=kind)
        report["providers"][kind] = {
            "label": PROVIDER_LABELS[kind],
            "weak_objective_energy": energy,
            "iterations": result.iterations,
            "converged": result.converged,
        }
    report["closed_form_optimum"] = optimal_energy_closed_form(prob)

    kinds = ("owt", "ot", "sinkhorn")
    for i, first in enumerate(kinds):
        for second in kinds[i + 1 :]:
            try:
                value = solve_exact_ot(barycenters[first], barycenters[second]).value
            except InstanceTooLarge:
                value = None
            report["pairwise_w2_squared"][f"{first}-{second}"] = value

    (out / "compare.json").write_text(json.dumps(report, sort_keys=True, indent=1) + "\n")
    print(f"closed-form optimum: {report['closed_form_optimum']:.6g}")
    for kind in kinds:
        entry = report["providers"][kind]
        print(f"{entry['label']:>24}: weak objective {entry['weak_objective_energy']:.6g}")
    return 0 if all_converged else 2


def _build_parser() -> _Parser:
    parser = _Parser(prog="weakot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_owt = sub.add_parser("owt", help="solve one weak-transport problem between two measure files")
    p_owt.add_argument("source")
    p_owt.add_argument("target")
    p_owt.add_argument("--out", default="out")
    _add_solver_options(p_owt)
    p_owt.set_defaults(func=cmd_owt)

    p_bary = sub.add_parser("barycenter", help="fixed-point barycenter of measure files")
    p_bary.add_argument("inputs", nargs="+")
    p_bary.add_argument("--lambda", dest="lambdas", default=None, help="comma list, default uniform")
    p_bary.add_argument("--stop-tol", type=float, default=1e-5)
    p_bary.add_argument("--steps", type=int, default=50, help="maximum iterations")
    p_bary.add_argument("--jobs", type=int, default=1)
    p_bary.add_argument("--out", default="out")
    _add_solver_options(p_bary)
    _add_provider_options(p_bary)
    p_bary.set_defaults(func=cmd_barycenter)

    p_stream = sub.add_parser("stream", help="streaming barycenter over files or a generator")
    p_stream.add_argument("inputs", nargs="*")
    p_stream.add_argument("--schedule", default="harmonic:1", help="'harmonic:c' or 'power:c,p'")
    p_stream.add_argument("--steps", type=int, default=None)
    p_stream.add_argument("--out", default="out")
    _add_solver_options(p_stream)
    _add_provider_options(p_stream)
    _add_generator_options(p_stream)
    p_stream.set_defaults(func=cmd_stream)

    p_gen = sub.add_parser("generate", help="materialize a generator spec to measure files")
    p_gen.add_argument("--out", default="out")
    p_gen.add_argument("--seed", type=int, default=0)
    _add_generator_options(p_gen)
    p_gen.set_defaults(func=cmd_generate)

    p_cmp = sub.add_parser("compare", help="run all three providers on the same inputs")
    p_cmp.add_argument("inputs", nargs="*")
    p_cmp.add_argument("--algorithm", choices=("fixed-point", "stream"), default="stream")
    p_cmp.add_argument("--lambda", dest="lambdas", default=None)
    p_cmp.add_argument("--schedule", default="harmonic:1")
    p_cmp.add_argument("--stop-tol", type=float, default=1e-5)
    p_cmp.add_argument("--steps", type=int, default=50)
    p_cmp.add_argument("--jobs", type=int, default=1)
    p_cmp.add_argument("--out", default="out")
    _add_solver_options(p_cmp)
    _add_provider_options(p_cmp)
    _add_generator_options(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return args.func(args, parser)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    except NotConverged as exc:
        print(f"weakot: not converged: {exc}", file=sys.stderr)
        return 2
    except (WeakOtError, OSError, ValueError) as exc:
        print(f"weakot: error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    raise SystemExit(main())
