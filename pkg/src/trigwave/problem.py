"""Quasilinear wave problems and their fully discrete nonlinearity.

The continuous right-hand side a(u) u_xx + g(u, u_x) is discretized by
sampling a and g pointwise on the canonical 2K+1 grid, interpolating back
to degree K, and forming the quasilinear product alias-free on a padded
grid before truncating to degree K.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np

from trigwave.integrators import BlowUpError
from trigwave.spectral import (
    PairState,
    SpectralField,
    differentiate,
    interpolate,
    mode_numbers,
    synthesize,
)

__all__ = [
    "ProblemSpec",
    "NonlinearityWorkspace",
    "builtin_problem",
    "problem_names",
    "eval_fhatK",
    "discretize_initial_data",
    "padded_grid_size",
]


@dataclass(frozen=True)
class ProblemSpec:
    """Pointwise nonlinearities and initial data generators for one problem.

    ``a`` maps grid values of u to a(u); ``g`` maps grid values of (u, u_x)
    to g(u, u_x); both must vanish at the origin.  The strength prefactor
    kappa multiplies the whole nonlinearity inside the integrator, not here;
    builtin problems may additionally embed kappa inside g itself.
    ``initial_u`` and ``initial_udot`` map an array of mode numbers j to
    real coefficients, even in j so the initial fields are real-valued.
    """

    name: str
    a: Callable
    g: Callable
    kappa: float
    initial_u: Callable
    initial_udot: Callable

    def __post_init__(self):
        zero = np.zeros(1)
        a0 = float(np.asarray(self.a(zero))[0])
        g0 = float(np.asarray(self.g(zero, zero))[0])
        if abs(a0) > 1e-12 or abs(g0) > 1e-12:
            raise ValueError(
                f"problem {self.name!r} must satisfy a(0) = 0 and g(0, 0) = 0, "
                f"got a(0) = {a0:g}, g(0, 0) = {g0:g}"
            )
        j = np.arange(-8, 9)
        for label, gen in (("initial_u", self.initial_u), ("initial_udot", self.initial_udot)):
            c = np.asarray(gen(j))
            if np.iscomplexobj(c) and np.max(np.abs(c.imag)) > 0:
                raise ValueError(f"{label} generator must produce real coefficients")
            if not np.allclose(c, c[::-1], rtol=0, atol=1e-14):
                raise ValueError(f"{label} generator must be even in j")


def _identity(u):
    return u


def _zero_of_u(u):
    return np.zeros_like(u)


def _zero_of_u_ux(u, ux):
    return np.zeros_like(u)


def _gauckler_g(u, ux, kappa):
    return ux * ux + kappa * u**3


def _power_law(j, exponent, amplitude=1.0):
    return amplitude / np.sqrt(1.0 + np.abs(np.asarray(j, dtype=float)) ** exponent)


def _cosine_series(j, coefficients):
    """c_0 at mode 0 and c_|j|/2 elsewhere, i.e. sum_k c_k cos(kx)."""
    c = np.asarray(coefficients, dtype=float)
    j = np.abs(np.asarray(j))
    out = np.zeros(j.shape, dtype=float)
    inside = j < c.size
    out[inside] = c[j[inside]]
    out[inside & (j > 0)] *= 0.5
    return out


def _poly_in_u(u, coefficients):
    return np.polynomial.polynomial.polyval(u, np.asarray(coefficients, dtype=float))


def _poly_in_u_ux(u, ux, coefficients):
    c = np.asarray(coefficients, dtype=float)
    if c.ndim != 2:
        raise ValueError("bivariate polynomial needs a 2D coefficient table")
    return np.polynomial.polynomial.polyval2d(u, ux, c)


_INITIAL_EXPONENT_U = 11.0 + 1.0 / 50.0
_INITIAL_EXPONENT_UDOT = 9.0 + 1.0 / 50.0


def _initial_generator(spec, default_exponent):
    if spec is None:
        return partial(_power_law, exponent=default_exponent)
    kind = spec.get("type")
    if kind == "power":
        return partial(
            _power_law,
            exponent=float(spec["exponent"]),
            amplitude=float(spec.get("amplitude", 1.0)),
        )
    if kind == "cosine":
        return partial(_cosine_series, coefficients=tuple(spec["coefficients"]))
    raise ValueError(f"unknown initial data type {kind!r}; use 'power' or 'cosine'")


def problem_names():
    return ("gauckler_test", "linear", "custom-polynomial")


def builtin_problem(name, kappa, **params):
    """Build a registered problem.

    gauckler_test
        a(u) = u and g(u, v) = v^2 + kappa u^3, power-law initial data with
        exponents 11 + 1/50 (u) and 9 + 1/50 (udot).
    linear
        a = g = 0 with the same initial data (kappa is irrelevant).
    custom-polynomial
        a given by the coefficient list ``a`` (polynomial in u, constant
        term zero) and g by the 2D coefficient table ``g`` (bivariate in
        (u, u_x), constant term zero); optional ``initial_u``/``initial_udot``
        dicts select power-law or cosine-series initial data.
    """
    kappa = float(kappa)
    if name == "gauckler_test":
        if params:
            raise ValueError(f"gauckler_test accepts no extra parameters, got {sorted(params)}")
        return ProblemSpec(
            name,
            _identity,
            partial(_gauckler_g, kappa=kappa),
            kappa,
            partial(_power_law, exponent=_INITIAL_EXPONENT_U),
            partial(_power_law, exponent=_INITIAL_EXPONENT_UDOT),
        )
    if name == "linear":
        if params:
            raise ValueError(f"linear accepts no extra parameters, got {sorted(params)}")
        return ProblemSpec(
            name,
            _zero_of_u,
            _zero_of_u_ux,
            kappa,
            partial(_power_law, exponent=_INITIAL_EXPONENT_U),
            partial(_power_law, exponent=_INITIAL_EXPONENT_UDOT),
        )
    if name == "custom-polynomial":
        allowed = {"a", "g", "initial_u", "initial_udot"}
        unknown = set(params) - allowed
        if unknown:
            raise ValueError(f"unknown custom-polynomial parameters: {sorted(unknown)}")
        a_coeffs = np.asarray(params.get("a", [0.0]), dtype=float)
        g_coeffs = np.asarray(params.get("g", [[0.0]]), dtype=float)
        return ProblemSpec(
            name,
            partial(_poly_in_u, coefficients=a_coeffs),
            partial(_poly_in_u_ux, coefficients=g_coeffs),
            kappa,
            _initial_generator(params.get("initial_u"), _INITIAL_EXPONENT_U),
            _initial_generator(params.get("initial_udot"), _INITIAL_EXPONENT_UDOT),
        )
    raise ValueError(
        f"unknown problem {name!r}; available: {', '.join(problem_names())}"
    )


def padded_grid_size(degree):
    """Smallest 5-smooth integer >= 4K+2, enough for alias-free degree-2K products."""
    n = 4 * int(degree) + 2
    while True:
        m = n
        for p in (2, 3, 5):
            while m % p == 0:
                m //= p
        if m == 1:
            return n
        n += 1


class NonlinearityWorkspace:
    """Scratch sizes and buffers for one trajectory's nonlinearity evaluations.

    Not thread-safe: use one workspace per trajectory.
    """

    def __init__(self, degree):
        degree = int(degree)
        if degree < 1:
            raise ValueError("degree must be at least 1")
        self.degree = degree
        self.n_canonical = 2 * degree + 1
        self.n_padded = padded_grid_size(degree)
        # packing buffer for padded synthesis, reused across calls
        self._padded_spec = np.zeros(self.n_padded, dtype=complex)

    def _synthesize_padded(self, field):
        k = field.degree
        spec = self._padded_spec
        spec[:] = 0.0
        spec[: k + 1] = field.coeffs[k:]
        spec[self.n_padded - k :] = field.coeffs[:k]
        return self.n_padded * np.fft.ifft(spec).real


def _truncate_product(values, degree):
    """Fourier coefficients |j| <= K of grid values holding a degree <= 2K polynomial."""
    n = values.size
    spec = np.fft.fft(values) / n
    out = np.empty(2 * degree + 1, dtype=complex)
    out[degree:] = spec[: degree + 1]
    out[:degree] = spec[n - degree :]
    return out


def eval_fhatK(u, problem, workspace):
    """Fully discrete nonlinearity: project(a_K(u) u_xx) + g_K(u, u_x).

    a and g are sampled on the canonical 2K+1 grid and interpolated back to
    degree K; the quasilinear product is formed pointwise on the padded grid
    (alias-free for the degree-2K product) and truncated to degree K.
    Raises :class:`BlowUpError` if a or g evaluates to a non-finite value.
    """
    degree = u.degree
    if degree != workspace.degree:
        raise ValueError(
            f"workspace degree {workspace.degree} does not match field degree {degree}"
        )
    u_vals = synthesize(u, workspace.n_canonical)
    a_vals = np.asarray(problem.a(u_vals), dtype=float)
    if not np.all(np.isfinite(a_vals)):
        raise BlowUpError("a(u) evaluated to a non-finite value")
    a_k = interpolate(a_vals, degree)

    u_xx = differentiate(u, 2)
    prod_vals = workspace._synthesize_padded(a_k) * workspace._synthesize_padded(u_xx)
    quasi = _truncate_product(prod_vals, degree)

    u_x = differentiate(u, 1)
    ux_vals = synthesize(u_x, workspace.n_canonical)
    g_vals = np.asarray(problem.g(u_vals, ux_vals), dtype=float)
    if not np.all(np.isfinite(g_vals)):
        raise BlowUpError("g(u, u_x) evaluated to a non-finite value")
    g_k = interpolate(g_vals, degree)

    return SpectralField(quasi + g_k.coeffs, real=True)


def discretize_initial_data(problem, degree):
    """Truncate the problem's initial coefficient generators at |j| <= K."""
    j = mode_numbers(degree)
    u = SpectralField(np.asarray(problem.initial_u(j), dtype=float), real=True)
    udot = SpectralField(np.asarray(problem.initial_udot(j), dtype=float), real=True)
    return PairState(u, udot, 0.0)
