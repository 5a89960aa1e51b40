"""Command-line front end: solve, converge and verify-coefficients.

Configs are TOML files with one section per command ([run] or [study]);
step sizes are written as exponents j meaning h = 2^-j so configs never
carry rounded float literals.  CSV is the output contract; converge also
renders a log-log figure next to the CSV unless told not to.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from trigwave.harness import (
    DEFAULT_FIT_DROP,
    DEFAULT_REFERENCE_METHOD,
    DEFAULT_REFERENCE_REFINEMENT,
    Diagnostics,
    RunConfig,
    convergence_study,
    energy_identity_experiment,
    run_trajectory,
)
from trigwave.integrators import (
    BlowUpError,
    builtin_method,
    check_assumption1,
    coefficient_identity_residuals,
    method_names,
)
from trigwave.problem import builtin_problem, problem_names
from trigwave.spectral import mode_numbers

__all__ = [
    "ConfigError",
    "CliConfig",
    "main",
    "entry",
    "load_config",
    "report_rows",
    "read_convergence_csv",
    "CONVERGE_CSV_HEADER",
]

log = logging.getLogger("trigwave")

CONVERGE_CSV_HEADER = (
    "method",
    "K",
    "h",
    "error_h2h1",
    "order_fit",
    "order_residual",
    "runtime_s",
)

SOLVE_CSV_HEADER = ("j", "u_re", "u_im", "udot_re", "udot_im")

IDENTITY_TOL = 1e-12
TI2_SIXTH_BOUND_FLOOR = 1e3


class ConfigError(Exception):
    """Configuration rejected before any numerical work; names the bad field."""

    def __init__(self, field, message):
        super().__init__(f"config error in {field}: {message}")
        self.field = field


@dataclass(frozen=True)
class StudyParams:
    methods: tuple
    K_list: tuple
    h_list: tuple
    problem: object
    T: float
    kappa: float
    reference_method: str
    reference_refinement: int
    fit_drop: tuple


@dataclass(frozen=True)
class CliConfig:
    """Validated bundle of config-file content plus command-line flags."""

    command: str
    out: str
    fmt: str
    jobs: int
    quiet: bool
    seed: int | None = None
    run: RunConfig | None = None
    study: StudyParams | None = None


# ---------------------------------------------------------------------------
# config parsing

def load_config(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError("--config", f"file not found: {path}") from None
    except tomllib.TOMLDecodeError as err:
        raise ConfigError("--config", f"not valid TOML: {err}") from None


def _check_keys(section, allowed, where):
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}.{unknown[0]}", "unknown field")


def _require(section, key, where):
    if key not in section:
        raise ConfigError(f"{where}.{key}", "required field is missing")
    return section[key]


def _as_number(value, field):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(field, f"expected a number, got {value!r}")
    return float(value)


def _as_int(value, field):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(field, f"expected an integer, got {value!r}")
    return value


def _build_problem(section, where):
    name = _require(section, "problem", where)
    kappa = _as_number(_require(section, "kappa", where), f"{where}.kappa")
    if name not in problem_names():
        raise ConfigError(
            f"{where}.problem",
            f"unknown problem {name!r}; available: {', '.join(problem_names())}",
        )
    params = section.get("problem_params", {})
    if not isinstance(params, dict):
        raise ConfigError(f"{where}.problem_params", "expected a table")
    try:
        return builtin_problem(name, kappa, **params)
    except (ValueError, KeyError, TypeError) as err:
        raise ConfigError(f"{where}.problem_params", str(err)) from None


def _build_method(name, field):
    if name not in method_names():
        raise ConfigError(
            field, f"unknown method {name!r}; available: {', '.join(method_names())}"
        )
    return builtin_method(name)


def _parse_run(doc):
    if "run" not in doc:
        raise ConfigError("run", "solve configs need a [run] section")
    section = doc["run"]
    _check_keys(
        section,
        {
            "method",
            "problem",
            "problem_params",
            "kappa",
            "K",
            "h_exponent",
            "T",
            "record_every",
            "diagnostics",
        },
        "run",
    )
    method = _build_method(_require(section, "method", "run"), "run.method")
    problem = _build_problem(section, "run")
    K = _as_int(_require(section, "K", "run"), "run.K")
    exponent = _as_number(_require(section, "h_exponent", "run"), "run.h_exponent")
    h = 2.0 ** (-exponent)
    T = _as_number(section.get("T", 1.0), "run.T")
    record_every = section.get("record_every")
    if record_every is not None:
        record_every = _as_int(record_every, "run.record_every")
        if record_every < 1:
            raise ConfigError("run.record_every", "must be at least 1")
    diag_section = section.get("diagnostics", {})
    if not isinstance(diag_section, dict):
        raise ConfigError("run.diagnostics", "expected a table")
    _check_keys(diag_section, {"energy_identity", "hyperbolicity"}, "run.diagnostics")
    diagnostics = Diagnostics(
        energy_identity=bool(diag_section.get("energy_identity", False)),
        hyperbolicity=bool(diag_section.get("hyperbolicity", False)),
    )
    if diagnostics.energy_identity and not method.symmetric:
        raise ConfigError(
            "run.diagnostics.energy_identity",
            f"requires a symmetric method, and {method.name} is not",
        )
    try:
        return RunConfig(
            method,
            problem,
            K,
            h,
            T,
            kappa=problem.kappa,
            record_every=record_every,
            diagnostics=diagnostics,
        )
    except ValueError as err:
        raise ConfigError("run", str(err)) from None


def _parse_study(doc):
    if "study" not in doc:
        raise ConfigError("study", "converge configs need a [study] section")
    section = doc["study"]
    _check_keys(
        section,
        {
            "methods",
            "problem",
            "problem_params",
            "kappa",
            "K",
            "h_exponents",
            "T",
            "reference_method",
            "reference_refinement",
            "fit_drop_coarse",
            "fit_drop_fine",
        },
        "study",
    )
    raw_methods = _require(section, "methods", "study")
    if not isinstance(raw_methods, list) or not raw_methods:
        raise ConfigError("study.methods", "expected a non-empty list of method names")
    methods = tuple(_build_method(m, "study.methods") for m in raw_methods)
    problem = _build_problem(section, "study")
    raw_K = _require(section, "K", "study")
    if isinstance(raw_K, int):
        raw_K = [raw_K]
    if not isinstance(raw_K, list) or not raw_K:
        raise ConfigError("study.K", "expected an integer or a non-empty list")
    K_list = tuple(_as_int(k, "study.K") for k in raw_K)
    raw_h = _require(section, "h_exponents", "study")
    if not isinstance(raw_h, list) or not raw_h:
        raise ConfigError("study.h_exponents", "expected a non-empty list of exponents")
    h_list = tuple(2.0 ** (-_as_number(j, "study.h_exponents")) for j in raw_h)
    T = _as_number(section.get("T", 1.0), "study.T")
    ref_method = section.get("reference_method", DEFAULT_REFERENCE_METHOD)
    if ref_method not in method_names():
        raise ConfigError("study.reference_method", f"unknown method {ref_method!r}")
    refinement = _as_int(
        section.get("reference_refinement", DEFAULT_REFERENCE_REFINEMENT),
        "study.reference_refinement",
    )
    if refinement < 2:
        raise ConfigError("study.reference_refinement", "must be at least 2")
    drop = (
        _as_int(section.get("fit_drop_coarse", DEFAULT_FIT_DROP[0]), "study.fit_drop_coarse"),
        _as_int(section.get("fit_drop_fine", DEFAULT_FIT_DROP[1]), "study.fit_drop_fine"),
    )
    if min(drop) < 0:
        raise ConfigError("study.fit_drop_coarse", "drop counts must be nonnegative")
    for h in h_list:
        n = round(T / h)
        if n < 1 or abs(n * h - T) > 1e-12 * T:
            raise ConfigError(
                "study.h_exponents", f"h = {h:g} does not divide T = {T:g}"
            )
    return StudyParams(
        methods, K_list, h_list, problem, T, problem.kappa, ref_method, refinement, drop
    )


def _parse_common(doc, args, command):
    allowed_top = {"run", "study", "seed"}
    _check_keys(doc, allowed_top, "config")
    seed = doc.get("seed")
    if seed is not None:
        seed = _as_int(seed, "seed")
    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    if jobs < 1:
        raise ConfigError("--jobs", "must be at least 1")
    if args.format not in ("csv", "json"):
        raise ConfigError("--format", f"expected csv or json, got {args.format!r}")
    return CliConfig(
        command=command,
        out=args.out,
        fmt=args.format,
        jobs=jobs,
        quiet=args.quiet,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# output helpers

def _fnum(x):
    """Full round-trip float formatting (17 significant digits)."""
    return f"{float(x):.17g}"


def report_rows(report):
    """Flatten a convergence report into CSV/JSON row dicts."""
    rows = []
    for cell in report.cells:
        fit = report.fit_for(cell.method, cell.K)
        rows.append(
            {
                "method": cell.method,
                "K": cell.K,
                "h": cell.h,
                "error_h2h1": cell.error,
                "order_fit": fit.order,
                "order_residual": fit.residual,
                "runtime_s": cell.runtime_s,
            }
        )
    return rows


def _open_out(path):
    if path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _write_converge(report, path, fmt):
    rows = report_rows(report)
    stream, close = _open_out(path)
    try:
        if fmt == "csv":
            writer = csv.writer(stream)
            writer.writerow(CONVERGE_CSV_HEADER)
            for row in rows:
                writer.writerow(
                    [
                        row["method"],
                        row["K"],
                        _fnum(row["h"]),
                        _fnum(row["error_h2h1"]),
                        _fnum(row["order_fit"]),
                        _fnum(row["order_residual"]),
                        _fnum(row["runtime_s"]),
                    ]
                )
        else:
            json.dump(rows, stream, indent=2)
            stream.write("\n")
    finally:
        if close:
            stream.close()


def read_convergence_csv(path):
    """Parse a converge CSV back into row dicts (exact float round trip)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            rows.append(
                {
                    "method": raw["method"],
                    "K": int(raw["K"]),
                    "h": float(raw["h"]),
                    "error_h2h1": float(raw["error_h2h1"]),
                    "order_fit": float(raw["order_fit"]),
                    "order_residual": float(raw["order_residual"]),
                    "runtime_s": float(raw["runtime_s"]),
                }
            )
    return rows


def _write_solve(record, diagnostics_extra, path, fmt):
    state = record.final
    j_modes = mode_numbers(state.degree)
    stream, close = _open_out(path)
    try:
        if fmt == "csv":
            writer = csv.writer(stream)
            writer.writerow(SOLVE_CSV_HEADER)
            for i, j in enumerate(j_modes):
                writer.writerow(
                    [
                        j,
                        _fnum(state.u.coeffs[i].real),
                        _fnum(state.u.coeffs[i].imag),
                        _fnum(state.udot.coeffs[i].real),
                        _fnum(state.udot.coeffs[i].imag),
                    ]
                )
        else:
            payload = {
                "method": record.config.method.name,
                "problem": record.config.problem.name,
                "K": record.config.K,
                "h": record.config.h,
                "T": record.config.T,
                "kappa": record.config.kappa,
                "time": state.time,
                "wall_time_s": record.wall_time,
                "u": [[c.real, c.imag] for c in state.u.coeffs],
                "udot": [[c.real, c.imag] for c in state.udot.coeffs],
                "samples": [
                    {
                        "step": s.step,
                        "time": s.time,
                        "pair_norms": {str(k): v for k, v in s.norms.items()},
                        "hyperbolicity_min": s.hyperbolicity_min,
                    }
                    for s in record.samples
                ],
            }
            payload.update(diagnostics_extra)
            json.dump(payload, stream, indent=2)
            stream.write("\n")
    finally:
        if close:
            stream.close()


# ---------------------------------------------------------------------------
# commands

def _cmd_solve(args):
    doc = load_config(args.config)
    cli = _parse_common(doc, args, "solve")
    cfg = _parse_run(doc)
    try:
        record = run_trajectory(cfg)
    except BlowUpError as err:
        print(
            f"blow-up at step {err.step_index} (t = {err.time:g}): {err}",
            file=sys.stderr,
        )
        return 2
    extra = {}
    if cfg.diagnostics.energy_identity:
        extra["energy_identity_residual"] = energy_identity_experiment(cfg)
    _write_solve(record, extra, cli.out, cli.fmt)
    if not cli.quiet:
        last = record.samples[-1]
        log.info(
            "solve done: %s on %s, K=%d, h=%g, T=%g; final pair norm (s=1) %.6g",
            cfg.method.name,
            cfg.problem.name,
            cfg.K,
            cfg.h,
            cfg.T,
            last.norms[1.0],
        )
        for key, value in extra.items():
            log.info("%s = %.3e", key, value)
    return 0


def _cmd_converge(args):
    doc = load_config(args.config)
    cli = _parse_common(doc, args, "converge")
    study = _parse_study(doc)
    report = convergence_study(
        study.methods,
        study.h_list,
        study.K_list,
        study.problem,
        study.T,
        study.kappa,
        reference_method=study.reference_method,
        reference_refinement=study.reference_refinement,
        fit_drop=study.fit_drop,
        jobs=cli.jobs,
    )
    _write_converge(report, cli.out, cli.fmt)
    plot_path = args.plot
    if plot_path is None and not args.no_plot and cli.out != "-":
        root, _ = os.path.splitext(cli.out)
        plot_path = root + ".png"
    if plot_path is not None and not args.no_plot:
        from trigwave.plots import render_convergence_figure

        render_convergence_figure(report, plot_path)
        if not cli.quiet:
            log.info("figure written to %s", plot_path)
    if not cli.quiet:
        for (method, K), fit in sorted(report.fits.items()):
            log.info(
                "%s K=%d: fitted order %.3f (residual %.3f, %d points)",
                method,
                K,
                fit.order,
                fit.residual,
                fit.fit_points,
            )
    if all(not math.isfinite(c.error) for c in report.cells):
        print("every study cell failed (blow-up or missing reference)", file=sys.stderr)
        return 2
    return 0


def _cmd_verify(args):
    xi_max = args.xi_max
    samples = args.samples
    threshold = args.threshold
    reports = {name: check_assumption1(builtin_method(name), xi_max, samples) for name in ("TI1", "TI2", "TI3")}
    residuals = {
        name: coefficient_identity_residuals(builtin_method(name))
        for name in ("TI1", "TI2", "TI3")
    }
    if not args.quiet:
        print(f"coefficient bounds over (0, {xi_max:g}], pass threshold c = {threshold:g}")
        label_width = max(len(lbl) for lbl in next(iter(reports.values())).labels)
        for name, rep in reports.items():
            print(f"\n{name}:")
            for label, sup, ok in zip(rep.labels, rep.suprema, rep.passes(threshold)):
                print(f"  {label:<{label_width}}  {sup:12.6g}  {'pass' if ok else 'FAIL'}")
        print("\nidentity residuals (max over 10000 xi in [0, 1000]):")
        for name, res in residuals.items():
            parts = "  ".join(f"{k}={v:.3e}" for k, v in res.items())
            print(f"  {name}: {parts}")
    ok = (
        reports["TI1"].all_pass(threshold)
        and reports["TI3"].all_pass(threshold)
        and all(reports["TI2"].passes(threshold)[:5])
        and reports["TI2"].suprema[5] > TI2_SIXTH_BOUND_FLOOR
        and all(
            v <= IDENTITY_TOL for res in residuals.values() for v in res.values()
        )
    )
    if not args.quiet:
        print(f"\nverdict: {'ok' if ok else 'FAILED'}")
    return 0 if ok else 2


# ---------------------------------------------------------------------------
# entry points

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="trigwave",
        description=(
            "Trigonometric integrators for 1D periodic quasilinear wave "
            "equations: run trajectories, convergence studies and "
            "coefficient checks."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config):
        if needs_config:
            p.add_argument("--config", required=True, help="TOML config file")
        p.add_argument("--out", default="-", help="output path ('-' for stdout)")
        p.add_argument("--format", default="csv", choices=("csv", "json"))
        p.add_argument("--jobs", type=int, default=None, help="worker processes (default: cores)")
        p.add_argument("--quiet", action="store_true")

    p_solve = sub.add_parser("solve", help="run one trajectory")
    add_common(p_solve, True)

    p_conv = sub.add_parser("converge", help="run a convergence study")
    add_common(p_conv, True)
    p_conv.add_argument("--plot", default=None, help="figure path (default: next to --out)")
    p_conv.add_argument("--no-plot", action="store_true", help="skip the figure")

    p_ver = sub.add_parser("verify-coefficients", help="check method coefficient bounds")
    p_ver.add_argument("--xi-max", type=float, default=1e4)
    p_ver.add_argument("--samples", type=int, default=10_000)
    p_ver.add_argument("--threshold", type=float, default=10.0)
    p_ver.add_argument("--quiet", action="store_true")
    return parser


def _setup_logging(quiet):
    if not log.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
        log.addHandler(handler)
        log.propagate = False
    log.setLevel(logging.ERROR if quiet else logging.INFO)


def main(argv=None):
    args = _build_parser().parse_args(argv)
    _setup_logging(getattr(args, "quiet", False))
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "converge":
            return _cmd_converge(args)
        return _cmd_verify(args)
    except ConfigError as err:
        print(str(err), file=sys.stderr)
        return 1


def entry():
    raise SystemExit(main())
