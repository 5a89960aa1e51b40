"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one pass/fail line; run with ``pytest tests/test_acceptance.py -v -s``
to see them.  The heavy studies (criteria 1-3) share module-scoped fixtures.
"""

import logging
import math

import numpy as np
import pytest

from trigwave.cli import main
from trigwave.harness import (
    RunConfig,
    clear_reference_cache,
    convergence_study,
    energy_identity_experiment,
    reference_solution,
    spatial_convergence_study,
)
from trigwave.integrators import (
    builtin_method,
    check_assumption1,
    coefficient_identity_residuals,
    compose_trajectory_via_splitting,
    linear_flow,
    step,
)
from trigwave.problem import (
    NonlinearityWorkspace,
    builtin_problem,
    discretize_initial_data,
    eval_fhatK,
)
from trigwave.spectral import pair_norm, random_pair_state

logging.getLogger("trigwave").setLevel(logging.ERROR)

KAPPA = 1.0 / 100.0
H_GRID = [2.0**-j for j in range(3, 10)]
SYMMETRIC = ("TI1", "TI2", "TI3")
ALL_METHODS = ("TI1", "TI2", "TI3", "NTI")


def report(criterion, ok, detail):
    print(f"[acceptance] {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{criterion} failed: {detail}"


def rel_state_err(got, want):
    return pair_norm(got - want, 1.0) / max(pair_norm(want, 1.0), 1e-300)


def make_rhs(problem, degree):
    ws = NonlinearityWorkspace(degree)
    return lambda u: eval_fhatK(u, problem, ws)


@pytest.fixture(scope="module")
def gauckler():
    return builtin_problem("gauckler_test", KAPPA)


@pytest.fixture(scope="module")
def study_k32(gauckler):
    clear_reference_cache()
    return convergence_study(SYMMETRIC, H_GRID, [32], gauckler, 1.0, KAPPA)


@pytest.fixture(scope="module")
def study_k128(gauckler):
    return convergence_study(SYMMETRIC, H_GRID, [128], gauckler, 1.0, KAPPA)


def test_criterion_1_temporal_order_two(gauckler, study_k32):
    details = []
    ok = True
    for name in SYMMETRIC:
        fit = study_k32.fit_for(name, 32)
        details.append(f"{name}: order {fit.order:.3f}, residual {fit.residual:.4f}")
        ok = ok and 1.8 <= fit.order <= 2.2 and fit.residual < 0.15

    # halving h inside the fitted window must shrink the error by about 4
    for name in SYMMETRIC:
        errors = sorted(
            [(c.h, c.error) for c in study_k32.cells if c.method == name],
            reverse=True,
        )
        window = errors[2:-2]
        for (_, coarse), (_, fine) in zip(window, window[1:]):
            ratio = coarse / fine
            ok = ok and 3.2 <= ratio <= 4.8

    # self-consistency of the reference: refining it again moves it by far
    # less than a tenth of the smallest study error
    h_ref = min(H_GRID) / 16.0
    ref = reference_solution(gauckler, KAPPA, 32, 1.0, h_ref)
    ref_finer = reference_solution(gauckler, KAPPA, 32, 1.0, h_ref / 2.0)
    drift = pair_norm(ref - ref_finer, 1.0)
    smallest_error = min(c.error for c in study_k32.cells)
    ok = ok and drift < smallest_error / 10.0
    details.append(f"reference drift {drift:.2e} vs {smallest_error / 10:.2e}")
    report("criterion 1 (temporal order 2, K=32)", ok, "; ".join(details))


def test_criterion_2_cfl_freedom(study_k128):
    details = []
    ok = not any(c.blowup_step is not None for c in study_k128.cells)
    for name in SYMMETRIC:
        fit = study_k128.fit_for(name, 128)
        details.append(f"{name}: order {fit.order:.3f}")
        ok = ok and 1.8 <= fit.order <= 2.2
    details.append(f"h*K up to {max(H_GRID) * 128:.0f}, no blow-ups")
    report("criterion 2 (order 2 at K=128, no CFL coupling)", ok, "; ".join(details))


def test_criterion_3_spatial_error_shape(gauckler):
    sp = spatial_convergence_study(
        "TI3", 2.0**-10, [8, 16, 32, 64], 256, gauckler, 1.0, KAPPA
    )
    ok = sp.order >= 1.7
    detail = f"spatial order {sp.order:.3f}, residual {sp.residual:.4f}"
    report("criterion 3 (spatial self-convergence order >= 1.7)", ok, detail)


def test_criterion_4_kappa_zero_exactness():
    problem = builtin_problem("linear", 0.0)
    worst = 0.0
    for name in ALL_METHODS:
        method = builtin_method(name)
        for h in (0.37, 7.3):
            state = discretize_initial_data(problem, 32)
            rhs = make_rhs(problem, 32)
            current = state
            for _ in range(100):
                current = step(current, h, method, rhs, 0.0)
            exact = linear_flow(state, 100.0 * h)
            worst = max(worst, rel_state_err(current, exact))
    ok = worst < 1e-12
    report(
        "criterion 4 (kappa = 0 reproduces the exact linear flow)",
        ok,
        f"worst relative error {worst:.2e} over {len(ALL_METHODS)} methods x 2 step sizes",
    )


def test_criterion_5_splitting_equivalence(gauckler):
    rng = np.random.default_rng(2024)
    state = random_pair_state(8, rng, decay=3.0)
    rhs = make_rhs(gauckler, 8)
    method = builtin_method("TI2")
    h = 0.1
    single = rel_state_err(
        compose_trajectory_via_splitting(state, h, 1, method, rhs, KAPPA),
        step(state, h, method, rhs, KAPPA),
    )
    direct = state
    for _ in range(8):
        direct = step(direct, h, method, rhs, KAPPA)
    eight = rel_state_err(
        compose_trajectory_via_splitting(state, h, 8, method, rhs, KAPPA), direct
    )
    ok = single < 1e-10 and eight < 1e-10
    report(
        "criterion 5 (splitting composition matches direct TI2 steps)",
        ok,
        f"1 step: {single:.2e}, 8 steps: {eight:.2e}",
    )


def test_criterion_6_energy_identity(gauckler):
    details = []
    ok = True
    for name in ("TI1", "TI3"):
        cfg = RunConfig(builtin_method(name), gauckler, 16, 2.0**-5, 1.0, KAPPA)
        residual = energy_identity_experiment(cfg, 1e-3)
        details.append(f"{name}: {residual:.2e}")
        ok = ok and residual <= 1e-10
    report(
        "criterion 6 (energy identity residual over 32 steps)", ok, "; ".join(details)
    )


def test_criterion_7_assumption_verification(capsys):
    code = main(["verify-coefficients", "--quiet"])
    rep1 = check_assumption1(builtin_method("TI1"), 1e4)
    rep2 = check_assumption1(builtin_method("TI2"), 1e4)
    rep3 = check_assumption1(builtin_method("TI3"), 1e4)
    ok = (
        code == 0
        and rep1.all_pass(10.0)
        and rep3.all_pass(10.0)
        and all(rep2.passes(10.0)[:5])
        and rep2.suprema[5] > 1e3
    )
    report(
        "criterion 7 (coefficient bounds: TI1/TI3 pass, TI2 fails the sixth)",
        ok,
        f"exit {code}; TI2 sixth-bound supremum {rep2.suprema[5]:.4g}",
    )


def test_criterion_8_symmetry_and_time_reversal(gauckler):
    xi = np.linspace(0.0, 1e3, 10_000)
    worst_identity = max(
        coefficient_identity_residuals(builtin_method(name), xi)["symmetry"]
        for name in SYMMETRIC
    )
    state = discretize_initial_data(gauckler, 16)
    rhs = make_rhs(gauckler, 16)
    worst_reversal = 0.0
    for name in SYMMETRIC:
        method = builtin_method(name)
        for h in (0.1, 2.0**-5):
            forward = step(state, h, method, rhs, KAPPA)
            back = step(forward, -h, method, rhs, KAPPA)
            worst_reversal = max(worst_reversal, rel_state_err(back, state))
    ok = worst_identity <= 1e-12 and worst_reversal <= 1e-10
    report(
        "criterion 8 (symmetry identity and time reversal)",
        ok,
        f"identity residual {worst_identity:.2e}, reversal error {worst_reversal:.2e}",
    )


def test_criterion_9_nonlinearity_oracle():
    from test_problem import fhat_quadrature_oracle
    from trigwave.spectral import random_field

    rng = np.random.default_rng(7)
    problems = (builtin_problem("gauckler_test", KAPPA), builtin_problem("linear", 0.0))
    worst = 0.0
    for _ in range(50):
        degree = int(rng.integers(1, 17))
        u = random_field(degree, rng, decay=2.5)
        ws = NonlinearityWorkspace(degree)
        for problem in problems:
            got = eval_fhatK(u, problem, ws).coeffs
            want = fhat_quadrature_oracle(u, problem)
            scale = max(float(np.max(np.abs(want))), 1.0)
            worst = max(worst, float(np.max(np.abs(got - want))) / scale)
    ok = worst < 1e-10
    report(
        "criterion 9 (discrete nonlinearity matches the quadrature oracle)",
        ok,
        f"worst relative deviation {worst:.2e} over 50 random fields",
    )
