import numpy as np
import pytest

from helpers import random_measure
from weakot import (
    BarycenterProblem,
    MapProvider,
    SinkhornConfig,
    SolverConfig,
    check_convex_order_1d,
    fixed_point_step,
    make_measure,
    make_schedule,
    optimal_energy_closed_form,
    push_forward,
    stream_barycenter,
    stream_barycenter_step,
    w2_squared,
    weak_barycenter,
    weak_barycenter_energy,
)
from weakot.errors import (
    DimensionMismatch,
    InvalidScheduleParameter,
    StreamExhausted,
)

OWT = MapProvider("owt")


def dirac(*coords):
    return make_measure([list(coords)])


class TestProblemAndSchedules:
    def test_uniform_lambdas_default(self):
        prob = BarycenterProblem((dirac(0.0), dirac(1.0), dirac(2.0)))
        assert np.allclose(prob.lambdas, 1 / 3)

    def test_lambdas_normalized(self):
        prob = BarycenterProblem((dirac(0.0), dirac(1.0)), np.array([2.0, 2.0]))
        assert np.allclose(prob.lambdas, 0.5)
        assert abs(prob.lambdas.sum() - 1.0) <= 1e-12

    def test_negative_lambda_rejected(self):
        with pytest.raises(ValueError):
            BarycenterProblem((dirac(0.0), dirac(1.0)), np.array([1.5, -0.5]))

    def test_dimension_consistency(self):
        with pytest.raises(DimensionMismatch):
            BarycenterProblem((dirac(0.0), dirac(0.0, 1.0)))

    def test_harmonic_values(self):
        schedule = make_schedule("harmonic", 1.0)
        assert schedule(0) == 1.0
        assert schedule(1) == 0.5
        assert schedule(9) == pytest.approx(0.1)

    def test_harmonic_capped_at_one(self):
        schedule = make_schedule("harmonic", 5.0)
        assert schedule(0) == 1.0
        assert schedule(9) == pytest.approx(0.5)

    def test_power_law_accepted(self):
        schedule = make_schedule("power", 1.0, 0.75)
        # square-summable but divergent partial sums, by the p-series facts
        assert schedule(0) == 1.0
        assert schedule(15) == pytest.approx(16.0**-0.75)

    def test_power_law_out_of_range(self):
        with pytest.raises(InvalidScheduleParameter):
            make_schedule("power", 1.0, 0.4)
        with pytest.raises(InvalidScheduleParameter):
            make_schedule("power", 1.0, 1.2)

    def test_positive_constant_required(self):
        with pytest.raises(InvalidScheduleParameter):
            make_schedule("harmonic", 0.0)

    def test_sinkhorn_provider_requires_config(self):
        with pytest.raises(ValueError):
            MapProvider("sinkhorn")
        MapProvider("sinkhorn", sinkhorn_config=SinkhornConfig(epsilon=1.0))


class TestEnergies:
    def test_closed_form_dirac_pair(self):
        prob = BarycenterProblem((dirac(0.0, 0.0), dirac(2.0, 0.0)))
        assert optimal_energy_closed_form(prob) == pytest.approx(1.0)

    def test_closed_form_zero_when_means_coincide(self):
        rng = np.random.default_rng(0)
        base = random_measure(rng, n=8)
        centered = make_measure(base.points - base.mean())
        other = make_measure(-centered.points)
        prob = BarycenterProblem((centered, other))
        assert optimal_energy_closed_form(prob) == pytest.approx(0.0, abs=1e-15)

    def test_energy_zero_when_inputs_equal_candidate(self):
        rng = np.random.default_rng(1)
        m = random_measure(rng, n=6)
        prob = BarycenterProblem((m, m))
        assert weak_barycenter_energy(m, prob) == 0.0

    def test_dirac_energy_closed_form(self):
        prob = BarycenterProblem((dirac(0.0, 0.0), dirac(2.0, 0.0)))
        assert weak_barycenter_energy(dirac(1.0, 0.0), prob) == pytest.approx(1.0, abs=1e-12)

    def test_pooled_mean_dirac_attains_closed_form(self):
        rng = np.random.default_rng(2)
        inputs = tuple(random_measure(rng, n=6, shift=rng.uniform(-2, 2)) for _ in range(3))
        lambdas = np.array([0.5, 0.3, 0.2])
        prob = BarycenterProblem(inputs, lambdas)
        pooled = lambdas @ np.stack([m.mean() for m in inputs])
        candidate = make_measure(pooled.reshape(1, -1))
        assert weak_barycenter_energy(candidate, prob) == pytest.approx(
            optimal_energy_closed_form(prob), abs=1e-7
        )


class TestFixedPointStep:
    def test_dirac_targets_collapse_in_one_step(self):
        rng = np.random.default_rng(3)
        mu = random_measure(rng, n=5)
        prob = BarycenterProblem((dirac(1.0, 0.0), dirac(0.0, 2.0)), np.array([0.25, 0.75]))
        stepped = fixed_point_step(mu, prob, OWT)
        expected = np.array([0.25 * 1.0, 0.75 * 2.0])
        assert np.allclose(stepped.points, expected, atol=1e-12)

    def test_identity_when_single_input_equals_iterate(self):
        rng = np.random.default_rng(4)
        mu = random_measure(rng, n=6)
        stepped = fixed_point_step(mu, BarycenterProblem((mu,)), OWT)
        assert np.array_equal(stepped.points, mu.points)

    def test_translated_copies_give_translation_maps(self):
        # per-atom accuracy is bounded by sqrt of the objective residual, so
        # the translation structure is checked at the percent level and the
        # translated mean exactly
        rng = np.random.default_rng(5)
        base = random_measure(rng, n=40)
        shifts = [np.array([2.0, 0.0]), np.array([-1.0, 1.0])]
        inputs = tuple(make_measure(base.points + s) for s in shifts)
        tight = MapProvider("owt", owt_config=SolverConfig(obj_tol=1e-11, max_iters=20000))
        for nu, shift in zip(inputs, shifts):
            outcome = tight.barycentric_map(base, nu)
            predicted = base.points + (nu.mean() - base.mean())
            errors = np.linalg.norm(outcome.projection.images - predicted, axis=1)
            assert np.sqrt(np.mean(errors**2)) < 2e-2
            assert errors.max() < 8e-2
            assert outcome.value == pytest.approx(float(shift @ shift), abs=1e-3)
            image_mean = base.weights @ outcome.projection.images
            assert np.allclose(image_mean, base.mean() + shift, atol=1e-9)

    def test_jobs_do_not_change_result(self):
        rng = np.random.default_rng(6)
        mu = random_measure(rng, n=8)
        inputs = tuple(random_measure(rng, n=7, shift=0.5) for _ in range(3))
        prob = BarycenterProblem(inputs)
        serial = fixed_point_step(mu, prob, OWT, jobs=1)
        threaded = fixed_point_step(mu, prob, OWT, jobs=3)
        assert np.array_equal(serial.points, threaded.points)


class TestWeakBarycenter:
    def test_two_diracs_converge_to_average(self):
        prob = BarycenterProblem((dirac(0.0, 0.0), dirac(2.0, 0.0)))
        result = weak_barycenter(prob, OWT, stop_tol=1e-5, max_steps=10)
        assert result.converged
        assert result.barycenter.n == 1
        assert np.allclose(result.barycenter.points, [[1.0, 0.0]], atol=1e-12)
        assert result.energy_trace[-1] == pytest.approx(optimal_energy_closed_form(prob), abs=1e-12)

    def test_identical_inputs_stay_put(self):
        rng = np.random.default_rng(7)
        m = random_measure(rng, n=6)
        result = weak_barycenter(BarycenterProblem((m, m)), OWT, max_steps=5)
        assert result.converged
        assert result.energy_trace[-1] == 0.0
        assert np.array_equal(result.barycenter.points, m.points)

    def test_energy_monotone_and_bounded_below(self):
        rng = np.random.default_rng(8)
        inputs = tuple(random_measure(rng, n=12, shift=rng.uniform(-1, 1)) for _ in range(3))
        prob = BarycenterProblem(inputs)
        result = weak_barycenter(prob, OWT, stop_tol=1e-7, max_steps=30)
        cfg = OWT.owt_config
        assert np.all(np.diff(result.energy_trace) <= 10 * cfg.obj_tol)
        lower = optimal_energy_closed_form(prob) - 10 * cfg.obj_tol
        assert np.all(result.energy_trace >= lower)

    def test_mean_identity_after_first_step(self):
        rng = np.random.default_rng(9)
        inputs = tuple(random_measure(rng, n=10, shift=rng.uniform(-2, 2)) for _ in range(3))
        lambdas = np.array([0.2, 0.5, 0.3])
        prob = BarycenterProblem(inputs, lambdas)
        pooled = lambdas @ np.stack([m.mean() for m in inputs])
        diameter = max(np.linalg.norm(np.vstack([m.points for m in inputs]) - pooled, axis=1).max(), 1.0)
        mu1 = fixed_point_step(inputs[0], prob, OWT)
        assert np.linalg.norm(mu1.mean() - pooled) <= 1e-8 * diameter
        mu2 = fixed_point_step(mu1, prob, OWT)
        assert np.linalg.norm(mu2.mean() - pooled) <= 1e-8 * diameter

    def test_fixed_point_residual_inequality(self):
        # terminate mid-descent so both sides of the inequality are
        # macroscopic compared to solver noise
        rng = np.random.default_rng(10)
        inputs = tuple(random_measure(rng, n=12, shift=rng.uniform(-1, 1)) for _ in range(2))
        prob = BarycenterProblem(inputs)
        for max_steps in (1, 2, 4):
            result = weak_barycenter(prob, OWT, stop_tol=1e-9, max_steps=max_steps)
            final = result.barycenter
            stepped = fixed_point_step(final, prob, OWT)
            residual = w2_squared(final, stepped)
            drop = weak_barycenter_energy(final, prob) - weak_barycenter_energy(stepped, prob)
            assert residual <= drop + 10 * OWT.owt_config.obj_tol

    def test_displacement_stop_variant(self):
        rng = np.random.default_rng(11)
        inputs = tuple(random_measure(rng, n=8, shift=rng.uniform(-1, 1)) for _ in range(2))
        prob = BarycenterProblem(inputs)
        result = weak_barycenter(prob, OWT, stop_tol=1e-7, max_steps=30, stop_on="displacement")
        assert result.converged

    def test_trace_records_shape(self):
        prob = BarycenterProblem((dirac(0.0), dirac(2.0)))
        result = weak_barycenter(prob, OWT, max_steps=5)
        assert len(result.steps) == len(result.energy_trace)
        record = result.steps[0]
        assert record.k == 0 and record.step_size is None
        assert record.support_diameter == 0.0


class TestStreaming:
    def test_step_identity_at_gamma_zero_rejected(self):
        rng = np.random.default_rng(12)
        mu = random_measure(rng, n=4)
        with pytest.raises(ValueError):
            stream_barycenter_step(mu, mu, 0.0, OWT)

    def test_full_step_to_dirac(self):
        rng = np.random.default_rng(13)
        mu = random_measure(rng, n=5)
        target = dirac(3.0, -2.0)
        stepped = stream_barycenter_step(mu, target, 1.0, OWT)
        assert np.allclose(stepped.points, [3.0, -2.0], atol=1e-12)

    def test_half_step_between_diracs(self):
        stepped = stream_barycenter_step(dirac(0.0), dirac(2.0), 0.5, OWT)
        assert np.allclose(stepped.points, [[1.0]])

    def test_constant_stream_is_fixed_point(self):
        rng = np.random.default_rng(14)
        mu = random_measure(rng, n=6)
        result = stream_barycenter(iter([mu] * 13), make_schedule("harmonic", 1.0), OWT, 12)
        assert np.array_equal(result.barycenter.points, mu.points)
        assert np.array_equal(result.barycenter.weights, mu.weights)
        assert result.energy_trace.max() == 0.0
        assert result.population_energy_estimate == 0.0

    def test_constant_dirac_mean_recursion(self):
        rng = np.random.default_rng(15)
        mu0 = random_measure(rng, n=7)
        target = np.array([4.0, -1.0])
        stream = iter([mu0] + [dirac(*target)] * 60)
        schedule = make_schedule("power", 0.5, 0.75)
        result = stream_barycenter(stream, schedule, OWT, 60)
        expected = mu0.mean()
        for k in range(60):
            gamma = schedule(k)
            expected = (1 - gamma) * expected + gamma * target
        assert np.linalg.norm(result.barycenter.mean() - expected) <= 1e-10

    def test_support_size_constant(self):
        rng = np.random.default_rng(16)
        measures = [random_measure(rng, n=int(rng.integers(3, 9)), shift=0.3) for _ in range(8)]
        result = stream_barycenter(iter(measures), make_schedule("harmonic", 1.0), OWT, 7)
        assert result.barycenter.n == measures[0].n
        assert all(r.support_diameter >= 0 for r in result.steps)

    def test_stream_exhausted(self):
        rng = np.random.default_rng(17)
        measures = [random_measure(rng, n=4) for _ in range(3)]
        with pytest.raises(StreamExhausted):
            stream_barycenter(iter(measures), make_schedule("harmonic", 1.0), OWT, 5)
        with pytest.raises(StreamExhausted):
            stream_barycenter(iter([]), make_schedule("harmonic", 1.0), OWT, 1)

    def test_lazy_consumption_order(self):
        rng = np.random.default_rng(18)
        measures = [random_measure(rng, n=4, shift=0.2) for _ in range(6)]
        fetched = []

        def recording():
            for index, m in enumerate(measures):
                fetched.append(index)
                yield m

        seen = []

        def observer(k, mu, nu, outcome):
            # measure k+1 is fetched for step k; nothing further may be read yet
            seen.append((k, len(fetched)))

        stream_barycenter(recording(), make_schedule("harmonic", 1.0), OWT, 5, observer=observer)
        assert fetched == [0, 1, 2, 3, 4, 5]
        assert seen == [(k, k + 2) for k in range(5)]

    def test_energy_trace_and_estimate(self):
        rng = np.random.default_rng(19)
        measures = [random_measure(rng, n=5, shift=0.5) for _ in range(6)]
        result = stream_barycenter(iter(measures), make_schedule("harmonic", 1.0), OWT, 5)
        assert len(result.energy_trace) == 5
        assert result.population_energy_estimate == pytest.approx(result.energy_trace.mean())

    def test_conservative_in_convex_order_1d(self):
        # inputs are dilations of one centered shape; starting from the
        # narrowest, every iterate must stay dominated by it in convex order
        rng = np.random.default_rng(20)
        base_points = np.sort(rng.standard_normal(15))
        base_points -= base_points.mean()
        base = make_measure(base_points.reshape(-1, 1))
        scales = [1.0, 1.4, 2.0, 1.7, 2.5, 1.2, 1.9, 1.1, 1.6, 2.2]
        measures = [make_measure(base.points * s) for s in scales]
        schedule = make_schedule("harmonic", 1.0)
        tight = MapProvider("owt", owt_config=SolverConfig(obj_tol=1e-10, max_iters=20000))
        iterates = []

        def observer(k, mu, nu, outcome):
            iterates.append(mu)

        result = stream_barycenter(iter(measures), schedule, tight, 9, observer=observer)
        iterates.append(result.barycenter)
        for mu in iterates:
            centered = make_measure(mu.points - mu.mean(), mu.weights)
            assert not check_convex_order_1d(centered, base, tol=1e-5).fails
