"""Scenario configuration: parsing, validation, and guess construction.

A scenario is described by a YAML document with six blocks::

    system:       labels, energies, dipole entries
    grid:         T, n_t (n_t optional, derived from the fastest transition)
    guess:        carrier, envelope, amplitude
    constraints:  lambda0, shape, lambda_a, filters
    target:       initial, target
    run:          max_iterations, stop_error, fredholm_order, refinement,
                  sigma_t, deterministic

Validation is collective: every problem found is reported, each prefixed
with a path-like locator such as ``constraints.filters[1].sigma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .constraints import (
    AmplitudeConstraint,
    KernelComponent,
    SpectralKernel,
    check_psd,
    sin2_ramp,
)
from .dynamics import LevelSystem, TargetSpec, TimeGrid
from .errors import ConfigError, InvalidInputError, PathwayError
from .krotov import ControlField, OptimizationConfig, RefinementSettings

__all__ = [
    "EnvelopeSpec",
    "GuessSpec",
    "RunSettings",
    "ScenarioConfig",
    "parse_config",
    "build_guess",
]

# Grid density floor: samples per optical cycle of the fastest transition,
# chosen so the guess-pulse bandwidth resolves typical filter widths.
SAMPLES_PER_CYCLE = 16


@dataclass(frozen=True)
class EnvelopeSpec:
    kind: str  # "gaussian" | "sin2"
    fwhm: Optional[float] = None
    center: Optional[float] = None

    def samples(self, grid: TimeGrid) -> np.ndarray:
        t = grid.times
        if self.kind == "gaussian":
            center = grid.duration / 2.0 if self.center is None else self.center
            return np.exp(-4.0 * math.log(2.0) * (t - center) ** 2 / self.fwhm**2)
        if self.kind == "sin2":
            return np.sin(np.pi * t / grid.duration) ** 2
        raise InvalidInputError(f"unknown envelope kind {self.kind!r}")


@dataclass(frozen=True)
class GuessSpec:
    carrier: float
    envelope: EnvelopeSpec
    amplitude_mode: str  # "peak" | "fraction"
    amplitude_value: float


@dataclass(frozen=True)
class RunSettings:
    max_iterations: int = 200
    stop_error: float = 1e-3
    fredholm_order: Optional[int] = None
    refinement: RefinementSettings = dataclass_field(default_factory=RefinementSettings)
    sigma_t: float = 0.0
    deterministic: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    labels: tuple[str, ...]
    system: LevelSystem
    grid: TimeGrid
    guess: GuessSpec
    lambda0: float
    ramp_fraction: float
    kernel: SpectralKernel
    initial_label: str
    target_label: str
    run: RunSettings = dataclass_field(default_factory=RunSettings)

    def level_index(self, label: str) -> int:
        return self.labels.index(label)

    def basis_state(self, label: str) -> np.ndarray:
        psi = np.zeros(len(self.labels), dtype=complex)
        psi[self.level_index(label)] = 1.0
        return psi

    def target_spec(self) -> TargetSpec:
        return TargetSpec(
            initial=self.basis_state(self.initial_label),
            target=self.basis_state(self.target_label),
        )

    def amplitude(self) -> AmplitudeConstraint:
        return AmplitudeConstraint(
            lambda0=self.lambda0, shape=sin2_ramp(self.grid, self.ramp_fraction)
        )

    def optimization(self) -> OptimizationConfig:
        return OptimizationConfig(
            amplitude=self.amplitude(),
            kernel=self.kernel,
            sigma_t=self.run.sigma_t,
            max_iterations=self.run.max_iterations,
            stop_error=self.run.stop_error,
            refinement=self.run.refinement,
            fredholm_order=self.run.fredholm_order,
        )


class _Collector:
    """Accumulates locator-prefixed validation problems."""

    def __init__(self):
        self.problems: list[str] = []

    def add(self, locator: str, message: str):
        self.problems.append(f"{locator}: {message}")

    def check_keys(self, block: dict, allowed: set[str], locator: str):
        for key in block:
            if key not in allowed:
                self.add(f"{locator}.{key}", "unknown key")

    def require(self, block: dict, key: str, locator: str):
        if key not in block:
            self.add(f"{locator}.{key}", "missing required field")
            return None
        return block[key]

    def number(self, value: Any, locator: str) -> Optional[float]:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.add(locator, f"expected a number, got {value!r}")
            return None
        if not math.isfinite(value):
            self.add(locator, f"must be finite, got {value!r}")
            return None
        return float(value)

    def integer(self, value: Any, locator: str) -> Optional[int]:
        if isinstance(value, bool) or not isinstance(value, int):
            self.add(locator, f"expected an integer, got {value!r}")
            return None
        return value


def _parse_system(raw: Any, col: _Collector) -> Optional[tuple[tuple[str, ...], LevelSystem]]:
    if not isinstance(raw, dict):
        col.add("system", "must be a mapping")
        return None
    col.check_keys(raw, {"labels", "energies", "dipole"}, "system")
    labels = col.require(raw, "labels", "system")
    energies = col.require(raw, "energies", "system")
    dipole = col.require(raw, "dipole", "system")
    if labels is None or energies is None or dipole is None:
        return None
    if not (isinstance(labels, list) and all(isinstance(s, str) for s in labels)):
        col.add("system.labels", "must be a list of strings")
        return None
    if len(set(labels)) != len(labels):
        dupes = sorted({s for s in labels if labels.count(s) > 1})
        col.add("system.labels", f"labels must be unique, repeated: {dupes}")
        return None
    if not isinstance(energies, list) or len(energies) != len(labels):
        col.add("system.energies", f"must list one energy per label ({len(labels)})")
        return None
    e_values = [col.number(e, f"system.energies[{k}]") for k, e in enumerate(energies)]
    if any(e is None for e in e_values):
        return None
    n = len(labels)
    mu = np.zeros((n, n))
    ok = True
    if not isinstance(dipole, list):
        col.add("system.dipole", "must be a list of [label_a, label_b, value] entries")
        return None
    for k, entry in enumerate(dipole):
        loc = f"system.dipole[{k}]"
        if not (isinstance(entry, list) and len(entry) == 3):
            col.add(loc, f"expected [label_a, label_b, value], got {entry!r}")
            ok = False
            continue
        a, b, value = entry
        if a not in labels or b not in labels:
            missing = [s for s in (a, b) if s not in labels]
            col.add(loc, f"unknown label(s) {missing}")
            ok = False
            continue
        if a == b:
            col.add(loc, "diagonal dipole entries are not allowed")
            ok = False
            continue
        v = col.number(value, f"{loc}[2]")
        if v is None:
            ok = False
            continue
        i, j = labels.index(a), labels.index(b)
        mu[i, j] = mu[j, i] = v
    if not ok:
        return None
    try:
        system = LevelSystem(energies=np.array(e_values), dipole=mu)
    except InvalidInputError as exc:
        col.add("system", str(exc))
        return None
    return tuple(labels), system


def _default_n_t(duration: float, system: LevelSystem) -> int:
    gaps = np.abs(system.energies[:, None] - system.energies[None, :])
    coupled = system.dipole != 0.0
    omega_max = float(gaps[coupled].max()) if coupled.any() else 0.0
    if omega_max == 0.0:
        return 1024
    cycles = duration * omega_max / (2.0 * np.pi)
    return max(1024, int(np.ceil(SAMPLES_PER_CYCLE * cycles)) + 1)


def _parse_grid(raw: Any, system: Optional[LevelSystem], col: _Collector) -> Optional[TimeGrid]:
    if not isinstance(raw, dict):
        col.add("grid", "must be a mapping")
        return None
    col.check_keys(raw, {"T", "n_t"}, "grid")
    duration = col.require(raw, "T", "grid")
    if duration is None:
        return None
    duration = col.number(duration, "grid.T")
    if duration is None:
        return None
    if duration <= 0:
        col.add("grid.T", f"must be > 0, got {duration!r}")
        return None
    if "n_t" in raw:
        n_t = col.integer(raw["n_t"], "grid.n_t")
        if n_t is None:
            return None
    elif system is not None:
        n_t = _default_n_t(duration, system)
    else:
        return None
    try:
        return TimeGrid(duration=duration, n_t=n_t)
    except InvalidInputError as exc:
        col.add("grid", str(exc))
        return None


def _parse_guess(raw: Any, energies: Optional[dict[str, float]],
                 initial: Optional[str], target: Optional[str],
                 col: _Collector) -> Optional[GuessSpec]:
    if not isinstance(raw, dict):
        col.add("guess", "must be a mapping")
        return None
    col.check_keys(raw, {"carrier", "envelope", "amplitude"}, "guess")
    carrier_raw = col.require(raw, "carrier", "guess")
    env_raw = col.require(raw, "envelope", "guess")
    amp_raw = col.require(raw, "amplitude", "guess")
    if carrier_raw is None or env_raw is None or amp_raw is None:
        return None

    carrier: Optional[float]
    if carrier_raw == "two_photon":
        if energies is None or initial is None or target is None:
            col.add("guess.carrier", "two_photon carrier needs valid system and target blocks")
            carrier = None
        else:
            carrier = abs(energies[target] - energies[initial]) / 2.0
    else:
        carrier = col.number(carrier_raw, "guess.carrier")
        if carrier is not None and carrier < 0:
            col.add("guess.carrier", f"must be >= 0, got {carrier!r}")
            carrier = None

    envelope: Optional[EnvelopeSpec] = None
    if not isinstance(env_raw, dict):
        col.add("guess.envelope", "must be a mapping")
    else:
        col.check_keys(env_raw, {"type", "fwhm", "center"}, "guess.envelope")
        kind = col.require(env_raw, "type", "guess.envelope")
        if kind == "gaussian":
            fwhm = col.require(env_raw, "fwhm", "guess.envelope")
            if fwhm is not None:
                fwhm = col.number(fwhm, "guess.envelope.fwhm")
            center = None
            if "center" in env_raw:
                center = col.number(env_raw["center"], "guess.envelope.center")
            if fwhm is not None:
                if fwhm <= 0:
                    col.add("guess.envelope.fwhm", f"must be > 0, got {fwhm!r}")
                else:
                    envelope = EnvelopeSpec(kind="gaussian", fwhm=fwhm, center=center)
        elif kind == "sin2":
            if "fwhm" in env_raw or "center" in env_raw:
                col.add("guess.envelope", "sin2 envelope takes no fwhm/center")
            else:
                envelope = EnvelopeSpec(kind="sin2")
        elif kind is not None:
            col.add("guess.envelope.type", f"must be 'gaussian' or 'sin2', got {kind!r}")

    mode = value = None
    if not isinstance(amp_raw, dict):
        col.add("guess.amplitude", "must be a mapping")
    else:
        keys = set(amp_raw)
        if keys == {"peak"}:
            mode, value = "peak", col.number(amp_raw["peak"], "guess.amplitude.peak")
        elif keys == {"fraction_of_two_photon_pi"}:
            mode = "fraction"
            value = col.number(
                amp_raw["fraction_of_two_photon_pi"],
                "guess.amplitude.fraction_of_two_photon_pi",
            )
        else:
            col.add(
                "guess.amplitude",
                "exactly one of 'peak' or 'fraction_of_two_photon_pi' is required",
            )
        if value is not None and value <= 0:
            col.add(f"guess.amplitude.{sorted(keys)[0]}", f"must be > 0, got {value!r}")
            value = None

    if carrier is None or envelope is None or mode is None or value is None:
        return None
    return GuessSpec(carrier=carrier, envelope=envelope,
                     amplitude_mode=mode, amplitude_value=value)


def _parse_constraints(
    raw: Any, energies: Optional[dict[str, float]], col: _Collector,
    require_psd: bool,
) -> Optional[tuple[float, float, SpectralKernel]]:
    if not isinstance(raw, dict):
        col.add("constraints", "must be a mapping")
        return None
    col.check_keys(raw, {"lambda0", "lambda_a", "shape", "filters"}, "constraints")
    lambda0 = col.require(raw, "lambda0", "constraints")
    if lambda0 is not None:
        lambda0 = col.number(lambda0, "constraints.lambda0")
        if lambda0 is not None and lambda0 <= 0:
            col.add("constraints.lambda0", f"must be > 0, got {lambda0!r}")
            lambda0 = None

    lambda_a = 0.0
    if "lambda_a" in raw:
        lambda_a = col.number(raw["lambda_a"], "constraints.lambda_a")
        if lambda_a is not None and lambda_a < 0:
            col.add("constraints.lambda_a", f"must be >= 0, got {lambda_a!r}")
            lambda_a = None

    ramp_fraction = 0.05
    shape_raw = raw.get("shape")
    if shape_raw is not None:
        if not isinstance(shape_raw, dict):
            col.add("constraints.shape", "must be a mapping")
        else:
            col.check_keys(shape_raw, {"ramp_fraction"}, "constraints.shape")
            if "ramp_fraction" in shape_raw:
                rf = col.number(shape_raw["ramp_fraction"], "constraints.shape.ramp_fraction")
                if rf is not None and not (0.0 < rf <= 0.5):
                    col.add(
                        "constraints.shape.ramp_fraction",
                        f"must be in (0, 0.5], got {rf!r}",
                    )
                elif rf is not None:
                    ramp_fraction = rf

    components: list[KernelComponent] = []
    filters_ok = True
    filters_raw = raw.get("filters", [])
    if not isinstance(filters_raw, list):
        col.add("constraints.filters", "must be a list")
        filters_ok = False
        filters_raw = []
    for k, entry in enumerate(filters_raw):
        loc = f"constraints.filters[{k}]"
        if not isinstance(entry, dict):
            col.add(loc, "must be a mapping")
            filters_ok = False
            continue
        col.check_keys(entry, {"omega", "transition", "sigma", "lambda_b"}, loc)
        omega = None
        if ("omega" in entry) == ("transition" in entry):
            col.add(loc, "exactly one of 'omega' or 'transition' is required")
        elif "omega" in entry:
            omega = col.number(entry["omega"], f"{loc}.omega")
            if omega is not None and omega < 0:
                col.add(f"{loc}.omega", f"must be >= 0, got {omega!r}")
                omega = None
        else:
            pair = entry["transition"]
            if not (isinstance(pair, list) and len(pair) == 2
                    and all(isinstance(s, str) for s in pair)):
                col.add(f"{loc}.transition", f"expected [label_a, label_b], got {pair!r}")
            elif energies is None:
                col.add(f"{loc}.transition", "needs a valid system block to resolve")
            elif pair[0] not in energies or pair[1] not in energies:
                missing = [s for s in pair if s not in energies]
                col.add(f"{loc}.transition", f"unknown label(s) {missing}")
            else:
                omega = abs(energies[pair[1]] - energies[pair[0]])
        sigma = col.require(entry, "sigma", loc)
        if sigma is not None:
            sigma = col.number(sigma, f"{loc}.sigma")
            if sigma is not None and sigma <= 0:
                col.add(f"{loc}.sigma", f"must be > 0, got {sigma!r}")
                sigma = None
        lambda_b = col.require(entry, "lambda_b", loc)
        if lambda_b is not None:
            lambda_b = col.number(lambda_b, f"{loc}.lambda_b")
        if omega is None or sigma is None or lambda_b is None:
            filters_ok = False
            continue
        components.append(KernelComponent(omega=omega, sigma=sigma, lambda_b=lambda_b))

    if lambda0 is None or lambda_a is None or not filters_ok:
        return None
    kernel = SpectralKernel(lambda_a=lambda_a, components=tuple(components))
    if require_psd and kernel.components:
        report = check_psd(kernel)
        if not report.is_psd:
            col.add(
                "constraints.filters",
                f"kernel is not positive semi-definite (min Kbar = "
                f"{report.min_value:.6e} at omega = {report.argmin:.6g}); "
                f"monotonic convergence requires lambda_b <= 2*lambda_a for "
                f"each non-overlapping pass",
            )
            return None
    return lambda0, ramp_fraction, kernel


def _parse_target(raw: Any, labels: Optional[tuple[str, ...]], col: _Collector):
    if not isinstance(raw, dict):
        col.add("target", "must be a mapping")
        return None, None
    col.check_keys(raw, {"initial", "target"}, "target")
    initial = col.require(raw, "initial", "target")
    target = col.require(raw, "target", "target")
    ok = True
    for key, label in (("initial", initial), ("target", target)):
        if label is None:
            ok = False
        elif not isinstance(label, str):
            col.add(f"target.{key}", f"must be a label string, got {label!r}")
            ok = False
        elif labels is not None and label not in labels:
            col.add(f"target.{key}", f"unknown label {label!r}")
            ok = False
    return (initial, target) if ok else (None, None)


def _parse_run(raw: Any, col: _Collector) -> Optional[RunSettings]:
    if raw is None:
        return RunSettings()
    if not isinstance(raw, dict):
        col.add("run", "must be a mapping")
        return None
    allowed = {"max_iterations", "stop_error", "fredholm_order",
               "refinement", "sigma_t", "deterministic"}
    col.check_keys(raw, allowed, "run")
    ok = True
    kwargs: dict[str, Any] = {}
    if "max_iterations" in raw:
        v = col.integer(raw["max_iterations"], "run.max_iterations")
        if v is None or v < 1:
            if v is not None:
                col.add("run.max_iterations", f"must be >= 1, got {v!r}")
            ok = False
        else:
            kwargs["max_iterations"] = v
    if "stop_error" in raw:
        v = col.number(raw["stop_error"], "run.stop_error")
        if v is None or not (0.0 < v < 1.0):
            if v is not None:
                col.add("run.stop_error", f"must be in (0, 1), got {v!r}")
            ok = False
        else:
            kwargs["stop_error"] = v
    if "fredholm_order" in raw and raw["fredholm_order"] is not None:
        v = col.integer(raw["fredholm_order"], "run.fredholm_order")
        if v is None or v < 1:
            if v is not None:
                col.add("run.fredholm_order", f"must be >= 1, got {v!r}")
            ok = False
        else:
            kwargs["fredholm_order"] = v
    if "sigma_t" in raw:
        v = col.number(raw["sigma_t"], "run.sigma_t")
        if v is None:
            ok = False
        else:
            kwargs["sigma_t"] = v
    if "deterministic" in raw:
        if not isinstance(raw["deterministic"], bool):
            col.add("run.deterministic", f"must be a boolean, got {raw['deterministic']!r}")
            ok = False
        else:
            kwargs["deterministic"] = raw["deterministic"]
    if "refinement" in raw:
        ref_raw = raw["refinement"]
        if not isinstance(ref_raw, dict):
            col.add("run.refinement", "must be a mapping")
            ok = False
        else:
            col.check_keys(ref_raw, {"max_passes", "field_tol"}, "run.refinement")
            ref_kwargs: dict[str, Any] = {}
            if "max_passes" in ref_raw:
                v = col.integer(ref_raw["max_passes"], "run.refinement.max_passes")
                if v is None or v < 1:
                    if v is not None:
                        col.add("run.refinement.max_passes", f"must be >= 1, got {v!r}")
                    ok = False
                else:
                    ref_kwargs["max_passes"] = v
            if "field_tol" in ref_raw and ref_raw["field_tol"] is not None:
                v = col.number(ref_raw["field_tol"], "run.refinement.field_tol")
                if v is None or v <= 0:
                    if v is not None:
                        col.add("run.refinement.field_tol", f"must be > 0, got {v!r}")
                    ok = False
                else:
                    ref_kwargs["field_tol"] = v
            if ok:
                kwargs["refinement"] = RefinementSettings(**ref_kwargs)
    return RunSettings(**kwargs) if ok else None


def parse_config(path: str | Path, *, require_psd: bool = True) -> ScenarioConfig:
    """Parse and fully validate a scenario file.

    Raises :class:`ConfigError` carrying every problem found, not just the
    first; each message is prefixed with the offending field's path.
    ``require_psd=False`` skips the kernel definiteness gate so diagnostic
    commands can inspect a kernel that optimization would refuse.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read file ({exc})"]) from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"{path}: invalid YAML ({exc})"]) from exc
    if not isinstance(raw, dict):
        raise ConfigError([f"{path}: top level must be a mapping of blocks"])

    col = _Collector()
    col.check_keys(raw, {"system", "grid", "guess", "constraints", "target", "run"}, "config")
    for block in ("system", "grid", "guess", "constraints", "target"):
        if block not in raw:
            col.add(block, "missing required block")
    if col.problems and any("missing required block" in p for p in col.problems):
        raise ConfigError(col.problems)

    parsed_system = _parse_system(raw["system"], col)
    labels, system = parsed_system if parsed_system else (None, None)
    energy_map = (
        dict(zip(labels, system.energies.tolist())) if parsed_system else None
    )
    grid = _parse_grid(raw["grid"], system, col)
    initial_label, target_label = _parse_target(raw["target"], labels, col)
    guess = _parse_guess(raw["guess"], energy_map, initial_label, target_label, col)
    constraint_parts = _parse_constraints(raw["constraints"], energy_map, col, require_psd)
    run = _parse_run(raw.get("run"), col)

    if guess is not None and grid is not None and guess.envelope.kind == "gaussian":
        center = guess.envelope.center
        if center is not None and not (0.0 <= center <= grid.duration):
            col.add(
                "guess.envelope.center",
                f"must lie inside [0, T] = [0, {grid.duration}], got {center!r}",
            )

    if col.problems:
        raise ConfigError(col.problems)
    assert labels and system and grid and guess and constraint_parts and run
    lambda0, ramp_fraction, kernel = constraint_parts
    return ScenarioConfig(
        labels=labels,
        system=system,
        grid=grid,
        guess=guess,
        lambda0=lambda0,
        ramp_fraction=ramp_fraction,
        kernel=kernel,
        initial_label=initial_label,
        target_label=target_label,
        run=run,
    )


def two_photon_pi_amplitude(config: ScenarioConfig) -> float:
    """Peak amplitude giving unit pulse area of the two-photon Rabi rate.

    The effective rate through the intermediate manifold is
    ``Omega2(E) = sum_p mu_ip mu_pf E^2 / (2 Delta_p)`` with
    ``Delta_p = E_p - E_i - omega_c``; the peak solves
    ``int Omega2(E0 env(t)) dt = pi``.
    """
    system = config.system
    i = config.level_index(config.initial_label)
    f = config.level_index(config.target_label)
    omega_c = config.guess.carrier
    kappa = 0.0
    for p in range(system.n_levels):
        if p in (i, f):
            continue
        coupling = system.dipole[i, p] * system.dipole[p, f]
        if coupling == 0.0:
            continue
        detuning = system.energies[p] - system.energies[i] - omega_c
        if detuning == 0.0:
            raise PathwayError(
                f"intermediate level {config.labels[p]!r} is resonant with the "
                f"carrier; the second-order amplitude formula diverges"
            )
        kappa += coupling / (2.0 * detuning)
    if kappa == 0.0:
        raise PathwayError(
            f"no two-photon pathway couples {config.initial_label!r} to "
            f"{config.target_label!r}: every intermediate product "
            f"mu_ip * mu_pf vanishes, so no pi-pulse amplitude exists"
        )
    env = config.guess.envelope.samples(config.grid)
    area = float(np.trapezoid(env**2, config.grid.times))
    if area == 0.0:
        raise PathwayError("envelope has zero integrated intensity")
    return math.sqrt(math.pi / (abs(kappa) * area))


def build_guess(config: ScenarioConfig) -> ControlField:
    """Construct the guess pulse eps(t) = E0 env(t) cos(omega_c t).

    With ``fraction_of_two_photon_pi`` amplitude, E0 is the two-photon
    pi-pulse amplitude scaled by sqrt(fraction): the integrated two-photon
    Rabi rate scales with E0^2, so the requested fraction applies to the
    pulse area, not the peak field.
    """
    guess = config.guess
    if guess.amplitude_mode == "peak":
        e0 = guess.amplitude_value
    else:
        e0 = two_photon_pi_amplitude(config) * math.sqrt(guess.amplitude_value)
    t = config.grid.times
    eps = e0 * guess.envelope.samples(config.grid) * np.cos(guess.carrier * t)
    return ControlField(grid=config.grid, eps=eps)
