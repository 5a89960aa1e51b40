"""Fourier-side representation of real 2*pi-periodic fields.

A field of degree K keeps its complex coefficients c_j for j = -K..K in a
single contiguous array, index i holding mode j = i - K.  Norms,
projections, derivatives and mode-wise filters act directly on this
layout; the FFT-native ordering appears only inside ``synthesize`` and
``interpolate``.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

__all__ = [
    "SpectralField",
    "PairState",
    "OperatorSpectrum",
    "sinc",
    "mode_numbers",
    "mode_weights",
    "sobolev_norm",
    "scalar_product",
    "pair_norm",
    "project",
    "synthesize",
    "interpolate",
    "differentiate",
    "apply_filter",
    "is_hermitian",
    "random_field",
    "random_pair_state",
]

_SINC_TAYLOR_CUTOFF = 1e-4


def sinc(xi):
    """sin(xi)/xi with the removable singularity patched by a Taylor branch.

    Below |xi| = 1e-4 the polynomial 1 - xi^2/6 + xi^4/120 is used, which
    is accurate to full double precision there.
    """
    arr = np.asarray(xi, dtype=float)
    small = np.abs(arr) < _SINC_TAYLOR_CUTOFF
    safe = np.where(small, 1.0, arr)
    out = np.where(small, 1.0 - arr * arr / 6.0 + arr**4 / 120.0, np.sin(safe) / safe)
    if arr.ndim == 0:
        return float(out)
    return out


def mode_numbers(degree):
    """Integer mode indices j = -K..K."""
    return np.arange(-int(degree), int(degree) + 1)


@lru_cache(maxsize=None)
def _cached_weights(degree):
    j = np.arange(-degree, degree + 1, dtype=float)
    w = np.sqrt(j * j + 1.0)
    w.flags.writeable = False
    return w


def mode_weights(degree):
    """Weights <j> = sqrt(j^2 + 1) for j = -K..K (read-only array)."""
    return _cached_weights(int(degree))


class OperatorSpectrum:
    """Diagonal spectrum of sqrt(1 - d^2/dx^2): mode j carries weight <j>."""

    __slots__ = ("degree", "weights")

    def __init__(self, degree):
        degree = int(degree)
        if degree < 1:
            raise ValueError("degree must be at least 1")
        self.degree = degree
        self.weights = mode_weights(degree)


class SpectralField:
    """Trigonometric polynomial of degree K stored as coefficients c_j, j = -K..K.

    Pass ``real=True`` to symmetrize the coefficients once, making the field
    exactly Hermitian (c_{-j} = conj(c_j)) so it synthesizes to real values.
    Instances are immutable; arithmetic returns new fields.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs, real=False):
        c = np.array(coeffs, dtype=complex)
        if c.ndim != 1 or c.size < 3 or c.size % 2 == 0:
            raise ValueError("need an odd-length coefficient array (2K+1 entries, K >= 1)")
        if real:
            c = 0.5 * (c + np.conj(c[::-1]))
        c.flags.writeable = False
        self.coeffs = c

    @property
    def degree(self):
        return (self.coeffs.size - 1) // 2

    @classmethod
    def zeros(cls, degree):
        return cls(np.zeros(2 * int(degree) + 1, dtype=complex))

    @classmethod
    def from_modes(cls, degree, modes, real=False):
        """Build a field from a {j: coefficient} mapping."""
        degree = int(degree)
        c = np.zeros(2 * degree + 1, dtype=complex)
        for j, value in modes.items():
            if abs(j) > degree:
                raise ValueError(f"mode {j} exceeds degree {degree}")
            c[degree + j] = value
        return cls(c, real=real)

    def _check_degree(self, other):
        if self.degree != other.degree:
            raise ValueError(
                f"degree mismatch: {self.degree} vs {other.degree}"
            )

    def __add__(self, other):
        self._check_degree(other)
        return SpectralField(self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_degree(other)
        return SpectralField(self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return SpectralField(self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(-self.coeffs)

    def __repr__(self):
        return f"SpectralField(degree={self.degree})"


class PairState:
    """A (position, velocity) pair of equal-degree fields at a model time."""

    __slots__ = ("u", "udot", "time")

    def __init__(self, u, udot, time=0.0):
        if u.degree != udot.degree:
            raise ValueError(
                f"degree mismatch: u has {u.degree}, udot has {udot.degree}"
            )
        self.u = u
        self.udot = udot
        self.time = float(time)

    @property
    def degree(self):
        return self.u.degree

    def __sub__(self, other):
        return PairState(self.u - other.u, self.udot - other.udot, self.time)

    def __repr__(self):
        return f"PairState(degree={self.degree}, time={self.time})"


def sobolev_norm(v, s):
    """Weighted norm (sum_j <j>^(2s) |c_j|^2)^(1/2)."""
    w = mode_weights(v.degree)
    return float(np.sqrt(np.sum(w ** (2.0 * s) * np.abs(v.coeffs) ** 2)))


def scalar_product(v, w, s):
    """Weighted scalar product sum_j <j>^(2s) conj(v_j) w_j.

    Returns the real part; the imaginary part is round-off for Hermitian
    inputs, which is the intended use.
    """
    v._check_degree(w)
    om = mode_weights(v.degree)
    return float(np.real(np.sum(om ** (2.0 * s) * np.conj(v.coeffs) * w.coeffs)))


def pair_norm(state, s):
    """Pair norm (|u|_{s+1}^2 + |udot|_s^2)^(1/2)."""
    return math.hypot(sobolev_norm(state.u, s + 1.0), sobolev_norm(state.udot, s))


def project(v, new_degree):
    """L2-orthogonal projection onto degree ``new_degree``.

    Truncates modes beyond the new degree and zero-pads when the new degree
    is larger.  Idempotent and norm-nonincreasing in every Sobolev index.
    """
    new_degree = int(new_degree)
    if new_degree < 1:
        raise ValueError("projection degree must be at least 1")
    old = v.degree
    if new_degree == old:
        return v
    shared = min(old, new_degree)
    out = np.zeros(2 * new_degree + 1, dtype=complex)
    out[new_degree - shared : new_degree + shared + 1] = v.coeffs[
        old - shared : old + shared + 1
    ]
    return SpectralField(out)


def synthesize(v, n_points=None):
    """Evaluate the field on the grid x_m = 2*pi*m/M, m = 0..M-1.

    M defaults to 2K+1 and must be at least 2K+1 so the round trip through
    ``interpolate`` is exact.  Real parts are returned; the imaginary residue
    of a Hermitian field is round-off.
    """
    degree = v.degree
    n_min = 2 * degree + 1
    n_points = n_min if n_points is None else int(n_points)
    if n_points < n_min:
        raise ValueError(
            f"grid of {n_points} points cannot hold degree {degree}; need >= {n_min}"
        )
    spec = np.zeros(n_points, dtype=complex)
    spec[: degree + 1] = v.coeffs[degree:]
    spec[n_points - degree :] = v.coeffs[:degree]
    return n_points * np.fft.ifft(spec).real


def interpolate(values, degree):
    """Degree-K trigonometric interpolant through 2K+1 equispaced samples."""
    degree = int(degree)
    vals = np.asarray(values, dtype=float)
    if vals.shape != (2 * degree + 1,):
        raise ValueError(
            f"interpolation of degree {degree} needs exactly {2 * degree + 1} samples, "
            f"got {vals.shape}"
        )
    spec = np.fft.fft(vals) / (2 * degree + 1)
    return SpectralField(np.fft.fftshift(spec))


def differentiate(v, order):
    """Spatial derivative: mode j is multiplied by (i*j)^order."""
    if order not in (1, 2):
        raise ValueError("derivative order must be 1 or 2")
    j = mode_numbers(v.degree)
    return SpectralField(v.coeffs * (1j * j) ** order)


def apply_filter(v, chi, h):
    """Multiply mode j by chi(h <j>).

    ``chi`` should accept an ndarray of nonnegative arguments; a scalar-only
    callable is applied elementwise as a fallback.
    """
    if h < 0:
        raise ValueError("filter step h must be nonnegative")
    xi = h * mode_weights(v.degree)
    try:
        vals = np.asarray(chi(xi), dtype=float)
        if vals.shape != xi.shape:
            raise TypeError
    except (TypeError, ValueError):
        vals = np.fromiter((float(chi(float(x))) for x in xi), dtype=float, count=xi.size)
    if not np.all(np.isfinite(vals)):
        raise ValueError("filter evaluated to a non-finite value on the spectrum")
    return SpectralField(v.coeffs * vals)


def is_hermitian(v, tol=1e-12):
    """True when c_{-j} agrees with conj(c_j) to ``tol`` relative to the field size."""
    c = v.coeffs
    defect = float(np.max(np.abs(c - np.conj(c[::-1]))))
    scale = float(np.max(np.abs(c)))
    if scale == 0.0:
        return True
    return defect <= tol * max(scale, 1.0)


def random_field(degree, rng, decay=2.0, scale=1.0):
    """Random Hermitian field with coefficients damped like <j>^-decay."""
    w = mode_weights(degree)
    raw = rng.standard_normal(2 * int(degree) + 1) + 1j * rng.standard_normal(
        2 * int(degree) + 1
    )
    return SpectralField(scale * raw / w**decay, real=True)


def random_pair_state(degree, rng, decay=2.0, scale=1.0):
    """Random Hermitian (u, udot) pair at time zero."""
    return PairState(
        random_field(degree, rng, decay, scale),
        random_field(degree, rng, decay, scale),
        0.0,
    )
