"""Trajectory driver, self-convergence references and order estimation.

Reference solutions stand in for the unknown exact solution: the same
problem is run with TI3 at a much finer step on the same spatial degree, so
time-convergence studies see no spatial error component.
"""

from __future__ import annotations

import logging
import math
import threading
import time as _time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from trigwave.integrators import (
    BlowUpError,
    MethodCoefficients,
    _filter_table,
    builtin_method,
    internal_stage,
    step,
)
from trigwave.problem import (
    NonlinearityWorkspace,
    ProblemSpec,
    discretize_initial_data,
    eval_fhatK,
)
from trigwave.spectral import (
    PairState,
    SpectralField,
    pair_norm,
    project,
    scalar_product,
    synthesize,
)

__all__ = [
    "Diagnostics",
    "RunConfig",
    "RunRecord",
    "Sample",
    "StudyCell",
    "GroupFit",
    "ConvergenceReport",
    "run_trajectory",
    "reference_solution",
    "clear_reference_cache",
    "error_vs_reference",
    "fit_order",
    "energy_identity_experiment",
    "convergence_study",
    "spatial_convergence_study",
]

log = logging.getLogger("trigwave")

NORM_INDICES = (0.0, 1.0, 2.0)
DEFAULT_REFERENCE_METHOD = "TI3"
DEFAULT_REFERENCE_REFINEMENT = 16
DEFAULT_FIT_DROP = (2, 2)


@dataclass(frozen=True)
class Diagnostics:
    """Optional per-run diagnostics switches."""

    energy_identity: bool = False
    hyperbolicity: bool = False


@dataclass(frozen=True)
class RunConfig:
    """One trajectory: method, problem, resolution and diagnostics flags.

    ``kappa`` defaults to the problem's own strength parameter; ``h`` must
    divide T to round-off.  ``record_every`` of None records only the
    initial and final samples.
    """

    method: MethodCoefficients
    problem: ProblemSpec
    K: int
    h: float
    T: float
    kappa: float | None = None
    record_every: int | None = None
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.h <= 0 or self.T <= 0:
            raise ValueError("h and T must be positive")
        n = round(self.T / self.h)
        if n < 1 or abs(n * self.h - self.T) > 1e-12 * self.T:
            raise ValueError(
                f"h = {self.h:g} does not divide T = {self.T:g} to round-off"
            )
        if self.kappa is None:
            object.__setattr__(self, "kappa", self.problem.kappa)

    @property
    def n_steps(self):
        return round(self.T / self.h)


@dataclass(frozen=True)
class Sample:
    """Recorded trajectory sample: pair norms by Sobolev index and diagnostics."""

    step: int
    time: float
    norms: dict
    hyperbolicity_min: float | None = None


@dataclass(frozen=True)
class RunRecord:
    """Outcome of one trajectory run."""

    config: RunConfig
    final: PairState
    samples: tuple
    wall_time: float
    blowup_step: int | None = None


def _sample(cfg, state, step_index, ws):
    norms = {s: pair_norm(state, s) for s in NORM_INDICES}
    hyp = None
    if cfg.diagnostics.hyperbolicity:
        vals = synthesize(state.u, ws.n_padded)
        hyp = float(np.min(1.0 + cfg.kappa * np.asarray(cfg.problem.a(vals))))
    return Sample(step_index, state.time, norms, hyp)


def run_trajectory(cfg):
    """Run the configured trajectory and record samples.

    Deterministic for a fixed config.  Raises :class:`BlowUpError` carrying
    the offending step index when the run leaves the stable regime.
    """
    if cfg.h < cfg.kappa:
        log.warning(
            "h = %g below kappa = %g: outside the step-size regime the "
            "second-order bounds assume",
            cfg.h,
            cfg.kappa,
        )
    ws = NonlinearityWorkspace(cfg.K)
    problem = cfg.problem

    def rhs(u):
        return eval_fhatK(u, problem, ws)

    state = discretize_initial_data(problem, cfg.K)
    n = cfg.n_steps
    every = cfg.record_every if cfg.record_every else n
    samples = [_sample(cfg, state, 0, ws)]
    started = _time.perf_counter()
    for i in range(1, n + 1):
        try:
            state = step(state, cfg.h, cfg.method, rhs, cfg.kappa)
        except BlowUpError as err:
            raise BlowUpError(str(err), step_index=i, time=state.time) from None
        if i % every == 0 or i == n:
            samples.append(_sample(cfg, state, i, ws))
    wall = _time.perf_counter() - started
    return RunRecord(cfg, state, tuple(samples), wall)


# ---------------------------------------------------------------------------
# reference solutions

_reference_cache = {}
_reference_lock = threading.Lock()


def clear_reference_cache():
    with _reference_lock:
        _reference_cache.clear()


def reference_solution(problem, kappa, K, T, h_ref, method_name=DEFAULT_REFERENCE_METHOD):
    """Self-convergence reference: a much finer run of the reference method.

    Cached per (problem, kappa, K, T, h_ref, method) so repeated studies
    reuse the expensive fine run.
    """
    key = (problem, float(kappa), int(K), float(T), float(h_ref), method_name)
    with _reference_lock:
        hit = _reference_cache.get(key)
    if hit is not None:
        return hit
    cfg = RunConfig(builtin_method(method_name), problem, K, h_ref, T, kappa)
    final = run_trajectory(cfg).final
    with _reference_lock:
        _reference_cache[key] = final
    return final


def error_vs_reference(state, reference):
    """Error in the pair norm at s = 1 (position in H^2, velocity in H^1)."""
    if state.degree != reference.degree:
        raise ValueError(
            f"degree mismatch: state has {state.degree}, reference has {reference.degree}"
        )
    return pair_norm(state - reference, 1.0)


def fit_order(points):
    """Least-squares slope of log(error) against log(h).

    Returns (order, residual) where the residual is the RMS deviation of the
    fit in log space.  Needs at least three points with positive errors.
    """
    points = list(points)
    if len(points) < 3:
        raise ValueError("order fit needs at least 3 points")
    h = np.array([p[0] for p in points], dtype=float)
    err = np.array([p[1] for p in points], dtype=float)
    if np.any(err <= 0) or not np.all(np.isfinite(err)):
        raise ValueError("order fit needs positive finite errors")
    x = np.log(h)
    y = np.log(err)
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return float(slope), resid


# ---------------------------------------------------------------------------
# energy identity

def energy_identity_experiment(cfg, perturbation=1e-3):
    """Verify the exact per-step energy identity between two nearby runs.

    Both trajectories start from the configured initial data, the second
    with all coefficients scaled by (1 + perturbation).  At every step the
    squared pair-norm gap must grow by exactly kappa times the filtered
    cross term; the returned value is the largest residual relative to the
    squared-gap scale.
    """
    method = cfg.method
    if not method.symmetric:
        raise ValueError("the energy identity requires a symmetric method")
    ws = NonlinearityWorkspace(cfg.K)
    problem = cfg.problem

    def rhs(u):
        return eval_fhatK(u, problem, ws)

    tab = _filter_table(method, cfg.h, cfg.K)
    ua = discretize_initial_data(problem, cfg.K)
    ub = PairState(
        SpectralField((1.0 + perturbation) * ua.u.coeffs),
        SpectralField((1.0 + perturbation) * ua.udot.coeffs),
        0.0,
    )
    gap = pair_norm(ua - ub, 1.0) ** 2
    worst = 0.0
    for _ in range(cfg.n_steps):
        fa = rhs(internal_stage(ua, cfg.h, method))
        fb = rhs(internal_stage(ub, cfg.h, method))
        ua_next = step(ua, cfg.h, method, rhs, cfg.kappa)
        ub_next = step(ub, cfg.h, method, rhs, cfg.kappa)
        gap_next = pair_norm(ua_next - ub_next, 1.0) ** 2
        increment = (ua_next.u - ua.u) - (ub_next.u - ub.u)
        filtered = SpectralField(2.0 * tab.theta * increment.coeffs)
        remainder = scalar_product(filtered, fa - fb, 1.0)
        residual = abs(gap_next - gap - cfg.kappa * remainder)
        scale = max(gap, gap_next, 1e-300)
        worst = max(worst, residual / scale)
        ua, ub, gap = ua_next, ub_next, gap_next
    return worst


# ---------------------------------------------------------------------------
# convergence studies

@dataclass(frozen=True)
class StudyCell:
    """One (method, K, h) run compared against its reference."""

    method: str
    K: int
    h: float
    error: float
    runtime_s: float
    blowup_step: int | None = None


@dataclass(frozen=True)
class GroupFit:
    order: float
    residual: float
    fit_points: int


@dataclass(frozen=True)
class ConvergenceReport:
    """Study cells plus one fitted order per (method, K) group."""

    cells: tuple
    fits: dict
    reference: str

    def fit_for(self, method, K):
        return self.fits.get((method, int(K)))


def _run_cell(cfg, reference):
    try:
        record = run_trajectory(cfg)
    except BlowUpError as err:
        return StudyCell(
            cfg.method.name, cfg.K, cfg.h, math.inf, 0.0, err.step_index
        )
    if reference is None:
        # reference run blew up: the cell survives but has no error value
        return StudyCell(cfg.method.name, cfg.K, cfg.h, math.inf, record.wall_time)
    err = error_vs_reference(record.final, reference)
    return StudyCell(cfg.method.name, cfg.K, cfg.h, err, record.wall_time)


def _cell_task(task):
    cfg, reference = task
    return _run_cell(cfg, reference)


def _reference_task(task):
    problem, kappa, K, T, h_ref, method_name = task
    try:
        return reference_solution(problem, kappa, K, T, h_ref, method_name)
    except BlowUpError:
        log.warning("reference run at K = %d blew up; its cells get error = inf", K)
        return None


def _window(h_sorted, drop):
    coarse, fine = drop
    if len(h_sorted) - coarse - fine >= 3:
        return h_sorted[coarse : len(h_sorted) - fine]
    return h_sorted


def _fit_groups(cells, drop):
    fits = {}
    groups = {}
    for cell in cells:
        groups.setdefault((cell.method, cell.K), []).append(cell)
    for key, members in groups.items():
        members.sort(key=lambda c: -c.h)
        usable = [c for c in members if math.isfinite(c.error) and c.error > 0]
        window = _window(usable, drop)
        if len(window) < 3:
            fits[key] = GroupFit(math.nan, math.nan, len(window))
            continue
        order, resid = fit_order([(c.h, c.error) for c in window])
        fits[key] = GroupFit(order, resid, len(window))
    return fits


def convergence_study(
    methods,
    h_list,
    K_list,
    problem,
    T,
    kappa,
    reference_method=DEFAULT_REFERENCE_METHOD,
    reference_refinement=DEFAULT_REFERENCE_REFINEMENT,
    fit_drop=DEFAULT_FIT_DROP,
    jobs=1,
):
    """Cross product of (method, K, h) runs against per-K references.

    Blow-ups are recorded per cell as infinite error, never fatal to the
    study.  The fitted order per (method, K) group uses the h window with
    ``fit_drop`` coarsest/finest points removed (all points when too few).
    """
    methods = [m if isinstance(m, MethodCoefficients) else builtin_method(m) for m in methods]
    if not methods:
        raise ValueError("the study needs at least one method")
    h_list = sorted(set(float(h) for h in h_list), reverse=True)
    if not h_list:
        raise ValueError("the study needs at least one step size")
    K_list = sorted(set(int(K) for K in K_list))
    h_ref = min(h_list) / reference_refinement

    ref_tasks = [(problem, kappa, K, T, h_ref, reference_method) for K in K_list]
    if jobs > 1 and len(ref_tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(ref_tasks))) as pool:
            ref_results = list(pool.map(_reference_task, ref_tasks))
        references = dict(zip(K_list, ref_results))
        with _reference_lock:
            for task, result in zip(ref_tasks, ref_results):
                if result is not None:
                    _reference_cache.setdefault(task, result)
    else:
        references = {K: _reference_task(t) for K, t in zip(K_list, ref_tasks)}

    tasks = []
    for method in methods:
        for K in K_list:
            for h in h_list:
                cfg = RunConfig(method, problem, K, h, T, kappa)
                tasks.append((cfg, references[K]))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = tuple(pool.map(_cell_task, tasks))
    else:
        cells = tuple(_cell_task(t) for t in tasks)

    fits = _fit_groups(list(cells), fit_drop)
    reference = (
        f"{reference_method} at h = {h_ref:g} "
        f"(finest study h / {reference_refinement}), same K as each group"
    )
    return ConvergenceReport(cells, fits, reference)


@dataclass(frozen=True)
class SpatialReport:
    """Spatial self-convergence cells (K varying at fixed h) and fitted order."""

    cells: tuple
    order: float
    residual: float
    reference: str


def spatial_convergence_study(
    method, h, K_list, K_reference, problem, T, kappa
):
    """Fix h, vary K, and compare against a high-degree run of the same method.

    Each study state is zero-padded into the reference degree before the
    pair-norm difference is taken, so the recorded error includes the
    unresolved tail of the reference.
    """
    method = method if isinstance(method, MethodCoefficients) else builtin_method(method)
    K_list = sorted(set(int(K) for K in K_list))
    if K_list and K_list[-1] >= K_reference:
        raise ValueError("the reference degree must exceed every study degree")
    ref_cfg = RunConfig(method, problem, int(K_reference), float(h), T, kappa)
    ref_final = run_trajectory(ref_cfg).final
    cells = []
    for K in K_list:
        record = run_trajectory(RunConfig(method, problem, K, float(h), T, kappa))
        embedded = PairState(
            project(record.final.u, int(K_reference)),
            project(record.final.udot, int(K_reference)),
            record.final.time,
        )
        cells.append(
            StudyCell(method.name, K, float(h), error_vs_reference(embedded, ref_final), record.wall_time)
        )
    # err ~ K^-order, so fitting against 1/K makes the slope the spatial order
    order, resid = fit_order([(1.0 / c.K, c.error) for c in cells])
    return SpatialReport(
        tuple(cells),
        order,
        resid,
        f"{method.name} at K = {K_reference}, same h = {float(h):g}",
    )
