import logging
import math

import numpy as np
import pytest

from trigwave.harness import (
    Diagnostics,
    RunConfig,
    clear_reference_cache,
    convergence_study,
    energy_identity_experiment,
    error_vs_reference,
    fit_order,
    reference_solution,
    run_trajectory,
    spatial_convergence_study,
)
from trigwave.integrators import (
    BlowUpError,
    builtin_method,
    compose_trajectory_via_splitting,
    linear_flow,
)
from trigwave.problem import (
    NonlinearityWorkspace,
    builtin_problem,
    discretize_initial_data,
    eval_fhatK,
)
from trigwave.spectral import PairState, SpectralField, pair_norm

logging.getLogger("trigwave").setLevel(logging.ERROR)


def rel_state_err(got, want):
    return pair_norm(got - want, 1.0) / max(pair_norm(want, 1.0), 1e-300)


class TestRunConfig:
    def test_h_must_divide_T(self):
        p = builtin_problem("linear", 0.0)
        with pytest.raises(ValueError, match="divide"):
            RunConfig(builtin_method("TI1"), p, 8, 0.3, 1.0)

    def test_kappa_defaults_to_problem(self):
        p = builtin_problem("gauckler_test", 0.02)
        cfg = RunConfig(builtin_method("TI1"), p, 8, 0.25, 1.0)
        assert cfg.kappa == 0.02

    def test_n_steps(self):
        p = builtin_problem("linear", 0.0)
        cfg = RunConfig(builtin_method("TI1"), p, 8, 2.0**-4, 1.0)
        assert cfg.n_steps == 16


class TestRunTrajectory:
    def test_linear_problem_matches_exact_flow(self):
        p = builtin_problem("linear", 0.0)
        for name in ("TI1", "TI2", "TI3", "NTI"):
            cfg = RunConfig(builtin_method(name), p, 16, 0.1, 1.0)
            record = run_trajectory(cfg)
            exact = linear_flow(discretize_initial_data(p, 16), 1.0)
            assert rel_state_err(record.final, exact) < 1e-12

    def test_matches_splitting_composition(self):
        p = builtin_problem("gauckler_test", 0.01)
        cfg = RunConfig(builtin_method("TI2"), p, 8, 2.0**-6, 0.5)
        record = run_trajectory(cfg)
        ws = NonlinearityWorkspace(8)
        rhs = lambda u: eval_fhatK(u, p, ws)
        composed = compose_trajectory_via_splitting(
            discretize_initial_data(p, 8), 2.0**-6, cfg.n_steps, cfg.method, rhs, 0.01
        )
        assert rel_state_err(record.final, composed) < 1e-10

    def test_record_every_full_span_gives_two_samples(self):
        p = builtin_problem("linear", 0.0)
        cfg = RunConfig(builtin_method("TI1"), p, 8, 0.1, 1.0, record_every=10)
        record = run_trajectory(cfg)
        assert len(record.samples) == 2
        assert record.samples[0].step == 0
        assert record.samples[1].step == 10

    def test_subsampling(self):
        p = builtin_problem("linear", 0.0)
        cfg = RunConfig(builtin_method("TI1"), p, 8, 0.125, 1.0, record_every=2)
        record = run_trajectory(cfg)
        assert [s.step for s in record.samples] == [0, 2, 4, 6, 8]

    def test_determinism_bit_identical(self):
        p = builtin_problem("gauckler_test", 0.01)
        cfg = RunConfig(builtin_method("TI3"), p, 12, 2.0**-4, 0.5)
        a = run_trajectory(cfg)
        b = run_trajectory(cfg)
        assert np.array_equal(a.final.u.coeffs, b.final.u.coeffs)
        assert np.array_equal(a.final.udot.coeffs, b.final.udot.coeffs)

    def test_blow_up_carries_step_index(self):
        p = builtin_problem("gauckler_test", 10.0)
        cfg = RunConfig(builtin_method("TI2"), p, 32, 0.5, 8.0)
        with pytest.raises(BlowUpError) as excinfo:
            run_trajectory(cfg)
        assert excinfo.value.step_index is not None
        assert excinfo.value.step_index >= 1

    def test_hyperbolicity_monitor(self):
        p = builtin_problem("gauckler_test", 0.01)
        cfg = RunConfig(
            builtin_method("TI1"),
            p,
            8,
            0.25,
            1.0,
            diagnostics=Diagnostics(hyperbolicity=True),
        )
        record = run_trajectory(cfg)
        for sample in record.samples:
            assert sample.hyperbolicity_min is not None
            # kappa a(u) is tiny here, so the monitored minimum stays near 1
            assert 0.5 < sample.hyperbolicity_min < 1.5


class TestReference:
    def test_linear_reference_is_exact_flow(self):
        clear_reference_cache()
        p = builtin_problem("linear", 0.0)
        ref = reference_solution(p, 0.0, 16, 1.0, 2.0**-6)
        exact = linear_flow(discretize_initial_data(p, 16), 1.0)
        assert rel_state_err(ref, exact) < 1e-12

    def test_cache_returns_same_object(self):
        clear_reference_cache()
        p = builtin_problem("gauckler_test", 0.01)
        a = reference_solution(p, 0.01, 8, 0.5, 2.0**-6)
        b = reference_solution(p, 0.01, 8, 0.5, 2.0**-6)
        assert a is b


class TestErrorMeasure:
    def test_zero_for_equal_states(self):
        p = builtin_problem("linear", 0.0)
        st = discretize_initial_data(p, 8)
        assert error_vs_reference(st, st) == 0.0

    def test_velocity_mode_zero(self):
        base = SpectralField.zeros(4)
        st = PairState(base, SpectralField.from_modes(4, {0: 1e-6}))
        ref = PairState(base, SpectralField.zeros(4))
        assert error_vs_reference(st, ref) == pytest.approx(1e-6, rel=1e-12)

    def test_position_mode_one_weighted(self):
        # a position defect at mode 1 is weighted by <1>^2 = 2 in the s+1 norm
        st = PairState(SpectralField.from_modes(4, {1: 1e-6}), SpectralField.zeros(4))
        ref = PairState(SpectralField.zeros(4), SpectralField.zeros(4))
        assert error_vs_reference(st, ref) == pytest.approx(2e-6, rel=1e-12)

    def test_degree_mismatch(self):
        p = builtin_problem("linear", 0.0)
        with pytest.raises(ValueError, match="degree"):
            error_vs_reference(
                discretize_initial_data(p, 8), discretize_initial_data(p, 9)
            )


class TestFitOrder:
    def test_exact_power_laws(self):
        h = np.array([0.5, 0.25, 0.125, 0.0625])
        for power in (2.0, 3.0, 0.0):
            order, resid = fit_order(list(zip(h, 3.0 * h**power)))
            assert order == pytest.approx(power, abs=1e-10)
            assert resid < 1e-10

    def test_needs_three_points(self):
        with pytest.raises(ValueError, match="3 points"):
            fit_order([(0.5, 1.0), (0.25, 0.5)])

    def test_rejects_nonpositive_errors(self):
        with pytest.raises(ValueError, match="positive"):
            fit_order([(0.5, 1.0), (0.25, 0.0), (0.125, 0.1)])


class TestEnergyIdentity:
    def test_kappa_zero_gap_is_invariant(self):
        # for kappa = 0 the squared gap must be exactly conserved
        p = builtin_problem("linear", 0.0)
        from trigwave.integrators import step
        from trigwave.problem import eval_fhatK

        ws = NonlinearityWorkspace(16)
        rhs = lambda u: eval_fhatK(u, p, ws)
        for name in ("TI1", "TI2", "TI3"):
            m = builtin_method(name)
            ua = discretize_initial_data(p, 16)
            ub = PairState(
                SpectralField(1.01 * ua.u.coeffs), SpectralField(1.01 * ua.udot.coeffs)
            )
            gap0 = pair_norm(ua - ub, 1.0)
            for _ in range(32):
                ua = step(ua, 2.0**-5, m, rhs, 0.0)
                ub = step(ub, 2.0**-5, m, rhs, 0.0)
                assert abs(pair_norm(ua - ub, 1.0) / gap0 - 1.0) < 1e-12

    def test_residual_small_for_gauckler(self):
        p = builtin_problem("gauckler_test", 0.01)
        for name in ("TI1", "TI2"):
            cfg = RunConfig(builtin_method(name), p, 8, 2.0**-4, 0.5)
            assert energy_identity_experiment(cfg, 1e-3) < 1e-10

    def test_zero_perturbation_gives_zero(self):
        p = builtin_problem("gauckler_test", 0.01)
        cfg = RunConfig(builtin_method("TI1"), p, 8, 2.0**-4, 0.25)
        assert energy_identity_experiment(cfg, 0.0) == 0.0

    def test_requires_symmetric_method(self):
        p = builtin_problem("gauckler_test", 0.01)
        cfg = RunConfig(builtin_method("NTI"), p, 8, 2.0**-4, 0.25)
        with pytest.raises(ValueError, match="symmetric"):
            energy_identity_experiment(cfg)


class TestConvergenceStudy:
    def test_linear_study_degenerates(self):
        clear_reference_cache()
        p = builtin_problem("linear", 0.0)
        report = convergence_study(
            ["TI1"], [2.0**-j for j in range(1, 5)], [8], p, 1.0, 0.0
        )
        for cell in report.cells:
            assert cell.error <= 1e-12

    def test_small_gauckler_study_orders(self):
        clear_reference_cache()
        p = builtin_problem("gauckler_test", 0.01)
        report = convergence_study(
            ["TI1", "TI2"], [2.0**-j for j in range(2, 7)], [8], p, 0.5, 0.01
        )
        for name in ("TI1", "TI2"):
            fit = report.fit_for(name, 8)
            assert 1.8 <= fit.order <= 2.2
            assert fit.residual < 0.15

    def test_blow_up_recorded_not_fatal(self):
        # kappa = 10 leaves the hyperbolic regime entirely: the study must
        # still return, with every failed cell carrying an infinite error
        clear_reference_cache()
        p = builtin_problem("gauckler_test", 10.0)
        report = convergence_study(
            ["TI2"], [0.5, 0.25], [32], p, 8.0, 10.0, reference_refinement=16
        )
        assert len(report.cells) == 2
        blown = [c for c in report.cells if c.blowup_step is not None]
        assert blown
        for cell in report.cells:
            assert math.isinf(cell.error)

    def test_empty_method_list_rejected(self):
        p = builtin_problem("linear", 0.0)
        with pytest.raises(ValueError, match="method"):
            convergence_study([], [0.5], [8], p, 1.0, 0.0)

    def test_parallel_matches_serial(self):
        clear_reference_cache()
        p = builtin_problem("gauckler_test", 0.01)
        serial = convergence_study(
            ["TI1"], [2.0**-j for j in range(2, 5)], [8], p, 0.5, 0.01
        )
        clear_reference_cache()
        parallel = convergence_study(
            ["TI1"], [2.0**-j for j in range(2, 5)], [8], p, 0.5, 0.01, jobs=2
        )
        for a, b in zip(serial.cells, parallel.cells):
            assert a.method == b.method and a.K == b.K and a.h == b.h
            assert a.error == b.error

    def test_spatial_study_shape(self):
        clear_reference_cache()
        p = builtin_problem("gauckler_test", 0.01)
        report = spatial_convergence_study(
            "TI3", 2.0**-6, [4, 8, 16], 64, p, 0.5, 0.01
        )
        errors = [c.error for c in report.cells]
        assert errors[0] > errors[1] > errors[2]
        assert report.order > 1.5
