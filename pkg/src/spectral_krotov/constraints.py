"""Amplitude and spectral constraints on the field change.

The spectral constraint is the quadratic form

    J_spec = (1/2pi) int int deps(t) K(t - t') deps(t') dt dt'
           = int Kbar(omega) |deps(omega)|^2 domega

with the Gaussian kernel family

    Kbar(omega) = lambda_a
        - sum_i (lambda_b_i / 2) [ exp(-(omega - omega_i)^2 / 2 sigma_i^2)
                                 + exp(-(omega + omega_i)^2 / 2 sigma_i^2) ],

    K(tau) = 2 pi lambda_a delta(tau)
        - sum_i lambda_b_i sqrt(2 pi sigma_i^2) cos(omega_i tau)
          exp(-sigma_i^2 tau^2 / 2).

Components with lambda_b_i < 0 are frequency filters (penalize change near
omega_i), lambda_b_i > 0 are frequency passes.  Monotonic convergence of
the optimizer requires Kbar(omega) >= 0 everywhere; for well-separated
passes this is the per-component bound lambda_b_i <= 2 lambda_a.

Fourier convention: eps(omega) = (1/sqrt(2pi)) int eps(t) e^{-i omega t} dt.
The delta part of K is carried symbolically as the coefficient
2 pi lambda_a and is never sampled pointwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np

from .dynamics import NDArrayComplex, NDArrayFloat, TimeGrid
from .errors import InvalidInputError

__all__ = [
    "KernelComponent",
    "SpectralKernel",
    "AmplitudeConstraint",
    "FieldSpectrum",
    "KernelTimeValue",
    "PSDReport",
    "kernel_time",
    "kernel_freq",
    "check_psd",
    "spectral_cost",
    "amplitude_cost",
    "field_spectrum",
    "band_power_fraction",
    "spectral_centroid",
    "trapezoid_weights",
    "sin2_ramp",
]

FloatOrArray = Union[float, NDArrayFloat]


@dataclass(frozen=True)
class KernelComponent:
    """One Gaussian component (omega_i, sigma_i, lambda_b_i) of the kernel."""

    omega: float
    sigma: float
    lambda_b: float

    def __post_init__(self):
        if not (np.isfinite(self.omega) and self.omega >= 0):
            raise InvalidInputError(f"component omega must be >= 0, got {self.omega!r}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidInputError(f"component sigma must be > 0, got {self.sigma!r}")
        if not np.isfinite(self.lambda_b):
            raise InvalidInputError(f"component lambda_b must be finite, got {self.lambda_b!r}")


@dataclass(frozen=True)
class SpectralKernel:
    """lambda_a plus a list of Gaussian filter/pass components."""

    lambda_a: float = 0.0
    components: tuple[KernelComponent, ...] = ()

    def __post_init__(self):
        if not (np.isfinite(self.lambda_a) and self.lambda_a >= 0):
            raise InvalidInputError(f"lambda_a must be >= 0, got {self.lambda_a!r}")
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def has_passes(self) -> bool:
        return any(c.lambda_b > 0 for c in self.components)

    @property
    def is_trivial(self) -> bool:
        """True when no component carries weight (pure delta kernel or empty)."""
        return all(c.lambda_b == 0 for c in self.components)


@dataclass(frozen=True)
class AmplitudeConstraint:
    """Amplitude-change penalty (lambda0 / S(t)) deps(t)^2.

    ``shape`` holds S(t_j) on the grid, values in [0, 1]; where S = 0 the
    field change is frozen (the update is gated to zero there).
    """

    lambda0: float
    shape: NDArrayFloat

    def __post_init__(self):
        if not (np.isfinite(self.lambda0) and self.lambda0 > 0):
            raise InvalidInputError(f"lambda0 must be > 0, got {self.lambda0!r}")
        shape = np.asarray(self.shape, dtype=float)
        object.__setattr__(self, "shape", shape)
        if shape.ndim != 1:
            raise InvalidInputError(f"shape must be a vector, got shape {shape.shape}")
        if not np.all(np.isfinite(shape)):
            raise InvalidInputError("shape values must be finite")
        if np.any(shape < 0) or np.any(shape > 1):
            raise InvalidInputError("shape values must lie in [0, 1]")


@dataclass(frozen=True)
class FieldSpectrum:
    """Field spectrum samples eps(omega_m), frequencies ascending."""

    frequencies: NDArrayFloat
    amplitudes: NDArrayComplex

    def __post_init__(self):
        frequencies = np.asarray(self.frequencies, dtype=float)
        amplitudes = np.asarray(self.amplitudes, dtype=complex)
        object.__setattr__(self, "frequencies", frequencies)
        object.__setattr__(self, "amplitudes", amplitudes)
        if frequencies.shape != amplitudes.shape or frequencies.ndim != 1:
            raise InvalidInputError(
                f"frequencies and amplitudes must be vectors of equal length, got "
                f"{frequencies.shape} and {amplitudes.shape}"
            )


class KernelTimeValue(NamedTuple):
    """Smooth part of K(tau) plus the symbolic delta coefficient 2 pi lambda_a."""

    smooth: FloatOrArray
    delta_coefficient: float


class PSDReport(NamedTuple):
    is_psd: bool
    min_value: float
    argmin: float


def kernel_time(kernel: SpectralKernel, tau: FloatOrArray) -> KernelTimeValue:
    """Evaluate the time-domain kernel K at lag tau.

    Returns the smooth part
    ``-sum_i lambda_b_i sqrt(2 pi sigma_i^2) cos(omega_i tau) exp(-sigma_i^2 tau^2 / 2)``
    together with the delta-spike coefficient ``2 pi lambda_a`` reported
    separately (the spike is never sampled pointwise).
    """
    tau = np.asarray(tau, dtype=float)
    smooth = np.zeros_like(tau)
    for c in kernel.components:
        smooth -= (
            c.lambda_b
            * np.sqrt(2.0 * np.pi * c.sigma**2)
            * np.cos(c.omega * tau)
            * np.exp(-0.5 * c.sigma**2 * tau**2)
        )
    return KernelTimeValue(smooth if smooth.ndim else float(smooth), 2.0 * np.pi * kernel.lambda_a)


def kernel_freq(kernel: SpectralKernel, omega: FloatOrArray) -> FloatOrArray:
    """Evaluate the frequency-domain kernel Kbar(omega)."""
    omega = np.asarray(omega, dtype=float)
    value = np.full_like(omega, kernel.lambda_a)
    for c in kernel.components:
        value -= (c.lambda_b / 2.0) * (
            np.exp(-((omega - c.omega) ** 2) / (2.0 * c.sigma**2))
            + np.exp(-((omega + c.omega) ** 2) / (2.0 * c.sigma**2))
        )
    return value if value.ndim else float(value)


def _auto_sampling(kernel: SpectralKernel) -> tuple[float, int]:
    """Default (omega_max, n_samples) meeting the coverage and density rules."""
    if not kernel.components:
        return 1.0, 1000
    omega_max = max(c.omega + 8.0 * c.sigma for c in kernel.components)
    sigma_min = min(c.sigma for c in kernel.components)
    n_samples = max(1000, int(np.ceil(10.0 * omega_max / sigma_min)) + 1)
    return omega_max, n_samples


def check_psd(
    kernel: SpectralKernel,
    omega_max: float | None = None,
    n_samples: int | None = None,
) -> PSDReport:
    """Certify Kbar(omega) >= 0 by dense sampling on [0, omega_max].

    Monotonic convergence of the constrained optimizer is guaranteed iff
    the kernel is positive semi-definite; for approximately
    non-overlapping passes this is lambda_b_i <= 2 lambda_a.  Filters
    (lambda_b_i < 0) with lambda_a >= 0 always pass.

    Parameters
    ----------
    kernel
        Kernel to check.
    omega_max
        Sampling range; must cover every omega_i + 6 sigma_i.  Defaults to
        max(omega_i + 8 sigma_i).
    n_samples
        Number of samples, >= 1000 and at least 10 per smallest sigma_i.
        Defaults to the densest of both rules.

    Returns
    -------
    PSDReport
        ``(is_psd, min_value, argmin)`` with the verdict
        ``min_value >= -1e-12 * lambda_a``.
    """
    auto_omega_max, auto_n = _auto_sampling(kernel)
    if omega_max is None:
        omega_max = auto_omega_max
    if n_samples is None:
        n_samples = auto_n
    if not (np.isfinite(omega_max) and omega_max > 0):
        raise InvalidInputError(f"omega_max must be > 0, got {omega_max!r}")
    if kernel.components:
        required = max(c.omega + 6.0 * c.sigma for c in kernel.components)
        if omega_max < required:
            raise InvalidInputError(
                f"omega_max={omega_max!r} does not cover the kernel components; "
                f"need at least max(omega_i + 6 sigma_i) = {required!r}"
            )
    if n_samples < 1000:
        raise InvalidInputError(f"n_samples must be >= 1000, got {n_samples!r}")
    if kernel.components:
        sigma_min = min(c.sigma for c in kernel.components)
        spacing = omega_max / (n_samples - 1)
        if spacing > sigma_min / 10.0:
            raise InvalidInputError(
                f"n_samples={n_samples} gives spacing {spacing!r} coarser than "
                f"sigma_min/10 = {sigma_min / 10.0!r}; increase n_samples"
            )
    omegas = np.linspace(0.0, omega_max, n_samples)
    values = np.asarray(kernel_freq(kernel, omegas))
    k = int(np.argmin(values))
    min_value = float(values[k])
    return PSDReport(min_value >= -1e-12 * kernel.lambda_a, min_value, float(omegas[k]))


def trapezoid_weights(grid: TimeGrid) -> NDArrayFloat:
    """Composite-trapezoid quadrature weights on the grid nodes."""
    w = np.full(grid.n_t, grid.dt)
    w[0] = w[-1] = 0.5 * grid.dt
    return w


def spectral_cost(
    delta_eps: NDArrayFloat, kernel: SpectralKernel, grid: TimeGrid
) -> float:
    """Quadratic spectral cost of a field change.

    Evaluates ``(1/2pi) iint deps(t) K(t-t') deps(t') dt dt'`` by
    trapezoidal quadrature of the smooth kernel part plus
    ``lambda_a int deps^2 dt`` for the delta part.  Nonnegative whenever
    the kernel passes :func:`check_psd` (up to quadrature error).
    """
    delta_eps = np.asarray(delta_eps, dtype=float)
    if delta_eps.shape != (grid.n_t,):
        raise InvalidInputError(
            f"delta_eps must have {grid.n_t} samples, got shape {delta_eps.shape}"
        )
    w = trapezoid_weights(grid)
    v = w * delta_eps
    cost = kernel.lambda_a * float(np.dot(w, delta_eps**2))
    if not kernel.is_trivial:
        n = grid.n_t
        lags = grid.dt * np.arange(-(n - 1), n)
        smooth = np.asarray(kernel_time(kernel, lags).smooth)
        # sum_{j,k} v_j K(t_j - t_k) v_k collected by lag; the
        # autocorrelation is symmetric and K is even, so orientation of
        # the lag axis does not matter.
        corr = np.correlate(v, v, mode="full")
        cost += float(np.dot(smooth, corr)) / (2.0 * np.pi)
    return cost


def amplitude_cost(
    delta_eps: NDArrayFloat, amplitude: AmplitudeConstraint, grid: TimeGrid
) -> float:
    """Discretized amplitude-change penalty int (lambda0 / S) deps^2 dt.

    Nodes with S = 0 contribute nothing: the update gates the field change
    to zero there, so the 0/0 limit is 0.
    """
    delta_eps = np.asarray(delta_eps, dtype=float)
    if delta_eps.shape != (grid.n_t,) or amplitude.shape.shape != (grid.n_t,):
        raise InvalidInputError(
            f"delta_eps and shape must both have {grid.n_t} samples, got "
            f"{delta_eps.shape} and {amplitude.shape.shape}"
        )
    w = trapezoid_weights(grid)
    s = amplitude.shape
    integrand = np.where(s > 0.0, delta_eps**2 / np.where(s > 0.0, s, 1.0), 0.0)
    return amplitude.lambda0 * float(np.dot(w, integrand))


def field_spectrum(eps: NDArrayFloat, grid: TimeGrid) -> FieldSpectrum:
    """Discrete Fourier transform of field samples.

    Uses the convention ``eps(omega) = (1/sqrt(2pi)) int eps(t) e^{-i omega t} dt``
    realised as ``dt/sqrt(2pi) * DFT``; frequencies are returned ascending
    (negative to positive).  Hermitian symmetry eps(-omega) = eps(omega)*
    holds for real input up to the unpaired top frequency of an even-length
    grid.
    """
    eps = np.asarray(eps, dtype=float)
    if eps.shape != (grid.n_t,):
        raise InvalidInputError(
            f"eps must have {grid.n_t} samples, got shape {eps.shape}"
        )
    freqs = np.fft.fftshift(2.0 * np.pi * np.fft.fftfreq(grid.n_t, d=grid.dt))
    amps = np.fft.fftshift(grid.dt / np.sqrt(2.0 * np.pi) * np.fft.fft(eps))
    return FieldSpectrum(frequencies=freqs, amplitudes=amps)


def band_power_fraction(
    spectrum: FieldSpectrum, center: float, half_width: float
) -> float:
    """Fraction of total spectral power with | |omega| - center | <= half_width.

    Both signs of omega count toward the band, matching the symmetric
    spectrum of a real field.
    """
    if not (np.isfinite(half_width) and half_width > 0):
        raise InvalidInputError(f"half_width must be > 0, got {half_width!r}")
    power = np.abs(spectrum.amplitudes) ** 2
    total = float(power.sum())
    if total == 0.0:
        return 0.0
    sel = np.abs(np.abs(spectrum.frequencies) - center) <= half_width
    return float(power[sel].sum()) / total


def spectral_centroid(spectrum: FieldSpectrum) -> float:
    """Power-weighted mean of |omega|; 0 for an all-zero spectrum."""
    power = np.abs(spectrum.amplitudes) ** 2
    total = float(power.sum())
    if total == 0.0:
        return 0.0
    return float(np.dot(np.abs(spectrum.frequencies), power)) / total


def sin2_ramp(grid: TimeGrid, ramp_fraction: float = 0.05) -> NDArrayFloat:
    """sin^2 switch-on/off shape: ramps over ``ramp_fraction * T``, flat at 1 between.

    S(0) = S(T) = 0, so updates leave the field endpoints untouched.
    """
    if not (0.0 < ramp_fraction <= 0.5):
        raise InvalidInputError(
            f"ramp_fraction must be in (0, 0.5], got {ramp_fraction!r}"
        )
    t = grid.times
    t_ramp = ramp_fraction * grid.duration
    s = np.ones(grid.n_t)
    rising = t < t_ramp
    falling = t > grid.duration - t_ramp
    s[rising] = np.sin(0.5 * np.pi * t[rising] / t_ramp) ** 2
    s[falling] = np.sin(0.5 * np.pi * (grid.duration - t[falling]) / t_ramp) ** 2
    return s
