"""Kernel, cost, and spectrum tests.

The time-domain kernel value is cross-checked against a direct quadrature
of its frequency representation, so the closed form and the Fourier
convention are verified independently of each other.
"""

import numpy as np
import pytest

from spectral_krotov import (
    AmplitudeConstraint,
    ControlField,
    InvalidInputError,
    KernelComponent,
    SpectralKernel,
    TimeGrid,
    amplitude_cost,
    band_power_fraction,
    check_psd,
    field_spectrum,
    kernel_freq,
    kernel_time,
    sin2_ramp,
    spectral_centroid,
    spectral_cost,
)


def single_filter(omega=1.0, sigma=0.1, lambda_b=-4.0, lambda_a=0.0):
    return SpectralKernel(
        lambda_a=lambda_a,
        components=(KernelComponent(omega=omega, sigma=sigma, lambda_b=lambda_b),),
    )


def test_component_validation():
    with pytest.raises(InvalidInputError):
        KernelComponent(omega=-1.0, sigma=0.1, lambda_b=1.0)
    with pytest.raises(InvalidInputError):
        KernelComponent(omega=1.0, sigma=0.0, lambda_b=1.0)
    with pytest.raises(InvalidInputError):
        SpectralKernel(lambda_a=-0.5)


def test_kernel_time_at_zero_lag():
    kernel = single_filter(omega=2.0, sigma=0.3, lambda_b=-5.0, lambda_a=1.5)
    value = kernel_time(kernel, 0.0)
    # smooth part: -lambda_b sqrt(2 pi sigma^2), delta carries 2 pi lambda_a
    assert value.smooth == pytest.approx(5.0 * np.sqrt(2.0 * np.pi * 0.09))
    assert value.delta_coefficient == pytest.approx(2.0 * np.pi * 1.5)


def test_kernel_freq_values():
    kernel = single_filter(omega=1.0, sigma=0.1, lambda_b=-4.0, lambda_a=0.5)
    # at the component centre the mirrored Gaussian is e^{-200}, negligible
    assert kernel_freq(kernel, 1.0) == pytest.approx(0.5 + 2.0, rel=1e-12)
    # far away only lambda_a remains
    assert kernel_freq(kernel, 50.0) == pytest.approx(0.5)
    # even in omega
    omegas = np.array([-1.3, -0.2, 0.4])
    assert np.allclose(kernel_freq(kernel, omegas), kernel_freq(kernel, -omegas))


def test_kernel_time_matches_freq_quadrature():
    """K(tau) must be the inverse transform of Kbar(omega).

    The smooth part equals int (Kbar - lambda_a) e^{i omega tau} d omega,
    integrated here by trapezoid on a dense grid.
    """
    kernel = SpectralKernel(
        lambda_a=0.8,
        components=(
            KernelComponent(omega=1.2, sigma=0.15, lambda_b=-3.0),
            KernelComponent(omega=2.5, sigma=0.35, lambda_b=0.9),
        ),
    )
    omega = np.linspace(-8.0, 8.0, 40001)
    kbar = kernel_freq(kernel, omega) - 0.8
    for tau in (0.0, 0.4, 1.1, -2.3):
        quadrature = np.trapezoid(kbar * np.exp(1j * omega * tau), omega)
        closed = kernel_time(kernel, tau).smooth
        assert abs(quadrature.imag) < 1e-9
        assert closed == pytest.approx(quadrature.real, abs=1e-8)


def test_check_psd_filters_always_pass():
    kernel = SpectralKernel(
        lambda_a=0.0,
        components=(
            KernelComponent(omega=1.0, sigma=0.1, lambda_b=-10.0),
            KernelComponent(omega=2.0, sigma=0.2, lambda_b=-3.0),
        ),
    )
    report = check_psd(kernel)
    assert report.is_psd
    assert report.min_value >= 0.0


def test_check_psd_boundary_pass():
    """An isolated pass at lambda_b = 2 lambda_a sits exactly on the edge."""
    kernel = SpectralKernel(
        lambda_a=1.0,
        components=(KernelComponent(omega=3.0, sigma=0.2, lambda_b=2.0),),
    )
    report = check_psd(kernel)
    assert report.is_psd
    # minimum at the pass centre, margin ~ the mirrored-Gaussian tail
    assert abs(report.argmin - 3.0) < 0.05
    assert abs(report.min_value) < 1e-3


def test_check_psd_rejects_overweight_pass():
    kernel = SpectralKernel(
        lambda_a=1.0,
        components=(KernelComponent(omega=3.0, sigma=0.2, lambda_b=3.0),),
    )
    report = check_psd(kernel)
    assert not report.is_psd
    assert report.min_value < -0.4


def test_check_psd_overlapping_passes_fail():
    """Two passes at the individual bound overlap into a violation."""
    kernel = SpectralKernel(
        lambda_a=1.0,
        components=(
            KernelComponent(omega=3.0, sigma=0.5, lambda_b=2.0),
            KernelComponent(omega=3.4, sigma=0.5, lambda_b=2.0),
        ),
    )
    report = check_psd(kernel)
    assert not report.is_psd


def test_check_psd_sampling_preconditions():
    kernel = single_filter(omega=5.0, sigma=0.01)
    with pytest.raises(InvalidInputError):
        check_psd(kernel, omega_max=1.0)  # does not cover the component
    with pytest.raises(InvalidInputError):
        check_psd(kernel, n_samples=500)  # below the 1000-sample floor
    with pytest.raises(InvalidInputError):
        # coverage fine but spacing coarser than sigma/10
        check_psd(kernel, omega_max=200.0, n_samples=1000)


def test_spectral_cost_matches_direct_double_sum():
    rng = np.random.default_rng(3)
    grid = TimeGrid(duration=6.0, n_t=48)
    kernel = single_filter(omega=2.0, sigma=0.4, lambda_b=-1.7, lambda_a=0.3)
    delta = rng.normal(size=48) * np.hanning(48)

    w = np.full(48, grid.dt)
    w[0] = w[-1] = grid.dt / 2.0
    lags = grid.times[:, None] - grid.times[None, :]
    smooth = kernel_time(kernel, lags).smooth
    direct = w @ (smooth * np.outer(delta, delta)) @ w / (2.0 * np.pi)
    direct += 0.3 * np.dot(w, delta**2)

    assert spectral_cost(delta, kernel, grid) == pytest.approx(direct, rel=1e-12)


def test_spectral_cost_frequency_route():
    """Time-domain quadrature vs int Kbar |deps(omega)|^2 d omega."""
    rng = np.random.default_rng(5)
    grid = TimeGrid(duration=120.0, n_t=4096)
    kernel = single_filter(omega=1.0, sigma=0.08, lambda_b=-6.0, lambda_a=0.2)
    t = grid.times
    env = np.exp(-((t - 60.0) ** 2) / 200.0)
    delta = env * (np.cos(1.0 * t) + 0.4 * np.cos(1.8 * t) + 0.05 * rng.normal(size=t.size))

    spectrum = field_spectrum(delta, grid)
    kbar = kernel_freq(kernel, spectrum.frequencies)
    domega = spectrum.frequencies[1] - spectrum.frequencies[0]
    freq_route = float(np.sum(kbar * np.abs(spectrum.amplitudes) ** 2) * domega)

    time_route = spectral_cost(delta, kernel, grid)
    assert time_route == pytest.approx(freq_route, rel=2e-3)
    assert time_route > 0.0  # PSD kernel


def test_spectral_cost_trivial_cases():
    grid = TimeGrid(duration=10.0, n_t=100)
    kernel = SpectralKernel(lambda_a=2.0)
    delta = np.ones(100)
    # pure delta kernel: lambda_a * int deps^2 dt
    assert spectral_cost(delta, kernel, grid) == pytest.approx(2.0 * 10.0)
    assert spectral_cost(np.zeros(100), single_filter(), grid) == 0.0


def test_amplitude_cost_values():
    grid = TimeGrid(duration=4.0, n_t=5)
    shape = np.array([0.0, 1.0, 1.0, 1.0, 0.0])
    amp = AmplitudeConstraint(lambda0=3.0, shape=shape)
    delta = np.array([9.9, 1.0, 2.0, 1.0, 9.9])  # edge values gated out by S = 0
    # trapezoid weights: [0.5, 1, 1, 1, 0.5] * dt=1
    assert amplitude_cost(delta, amp, grid) == pytest.approx(3.0 * (1.0 + 4.0 + 1.0))


def test_amplitude_constraint_validation():
    with pytest.raises(InvalidInputError):
        AmplitudeConstraint(lambda0=0.0, shape=np.array([0.5]))
    with pytest.raises(InvalidInputError):
        AmplitudeConstraint(lambda0=1.0, shape=np.array([0.5, 1.2]))


def test_field_spectrum_parseval():
    rng = np.random.default_rng(9)
    grid = TimeGrid(duration=50.0, n_t=1024)
    eps = rng.normal(size=1024)
    spectrum = field_spectrum(eps, grid)
    time_power = np.sum(eps**2) * grid.dt
    domega = spectrum.frequencies[1] - spectrum.frequencies[0]
    freq_power = np.sum(np.abs(spectrum.amplitudes) ** 2) * domega
    assert freq_power == pytest.approx(time_power, rel=1e-9)


def test_field_spectrum_single_tone_and_symmetry():
    grid = TimeGrid(duration=200.0, n_t=2048)
    tone = 1.5
    eps = np.sin(np.pi * grid.times / 200.0) ** 2 * np.cos(tone * grid.times)
    spectrum = field_spectrum(eps, grid)
    peak = spectrum.frequencies[np.argmax(np.abs(spectrum.amplitudes))]
    assert abs(abs(peak) - tone) < 2.0 * np.pi / 200.0  # one frequency bin
    # real input: eps(-omega) = conj(eps(omega)); compare mirrored bins
    amps = spectrum.amplitudes
    n = len(amps)
    mid = n // 2  # even-length grid, omega = 0 at index n/2
    assert np.allclose(amps[mid + 1 :], np.conj(amps[1:mid][::-1]), atol=1e-12)

    assert np.allclose(field_spectrum(np.zeros(2048), grid).amplitudes, 0.0)


def test_band_power_fraction_two_tones():
    grid = TimeGrid(duration=400.0, n_t=4096)
    t = grid.times
    window = np.sin(np.pi * t / 400.0) ** 2
    eps = window * (np.cos(1.0 * t) + 0.5 * np.cos(2.0 * t))
    spectrum = field_spectrum(eps, grid)
    f1 = band_power_fraction(spectrum, 1.0, 0.2)
    f2 = band_power_fraction(spectrum, 2.0, 0.2)
    assert f1 == pytest.approx(0.8, abs=0.01)  # amplitude 1 vs 0.5: power 4:1
    assert f2 == pytest.approx(0.2, abs=0.01)
    everything = band_power_fraction(spectrum, 0.0, 100.0)
    assert everything == pytest.approx(1.0)
    assert band_power_fraction(field_spectrum(np.zeros(4096), grid), 1.0, 0.2) == 0.0


def test_spectral_centroid_single_tone():
    grid = TimeGrid(duration=400.0, n_t=4096)
    eps = np.sin(np.pi * grid.times / 400.0) ** 2 * np.cos(1.3 * grid.times)
    centroid = spectral_centroid(field_spectrum(eps, grid))
    assert centroid == pytest.approx(1.3, rel=0.01)


def test_sin2_ramp_shape():
    grid = TimeGrid(duration=100.0, n_t=1001)
    shape = sin2_ramp(grid, ramp_fraction=0.1)
    assert shape[0] == 0.0
    assert shape[-1] == pytest.approx(0.0, abs=1e-12)
    assert np.all((shape >= 0.0) & (shape <= 1.0))
    t = grid.times
    flat = (t >= 10.0) & (t <= 90.0)
    assert np.all(shape[flat] == 1.0)
    # ramp midpoint: sin^2(pi/4) = 1/2
    k = np.argmin(np.abs(t - 5.0))
    assert shape[k] == pytest.approx(0.5, abs=1e-6)


def test_sin2_ramp_fraction_validation():
    grid = TimeGrid(duration=1.0, n_t=10)
    with pytest.raises(InvalidInputError):
        sin2_ramp(grid, ramp_fraction=0.0)
    with pytest.raises(InvalidInputError):
        sin2_ramp(grid, ramp_fraction=0.6)
