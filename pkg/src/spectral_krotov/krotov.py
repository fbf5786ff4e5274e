"""Monotonically convergent field optimization.

Each iteration back-propagates the adjoint state under the current field,
then sweeps forward through the grid updating the field time-locally,

    eps_new(t) = eps(t) + (S(t)/lambda0) * Im <chi(t)| dH/deps |psi_new(t)>,

with psi_new propagated concurrently under the already-updated field.
With spectral components the update becomes implicit and is obtained by
solving a Fredholm integral equation of the second kind,

    deps(t) = I(t) + gamma int_0^T F(t, t') deps(t') dt',

where the inhomogeneity I is the explicit update evaluated with the
approximate new states and

    F(t, t') = sum_i (lambda_b_i S(t) / (2 pi (lambda0 + lambda_a S(t))))
               sqrt(2 pi sigma_i^2) cos(omega_i (t - t'))
               exp(-sigma_i^2 (t - t')^2 / 2),      gamma = 1 on [0, T].

The lambda_a term in the denominator keeps the exact functional decrease
when the kernel carries a delta weight (frequency passes); it reduces to
the plain S/lambda0 form for lambda_a = 0.  The total functional

    J = (1 - J_T) + J_a,   J_T = |<target|psi(T)>|^2,

never increases provided the kernel passes the positive-semi-definiteness
check, which :func:`optimize` enforces as a hard precondition.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Optional

import numpy as np

from . import fredholm
from .constraints import (
    AmplitudeConstraint,
    SpectralKernel,
    amplitude_cost,
    check_psd,
    spectral_cost,
)
from .dynamics import (
    LevelSystem,
    NDArrayComplex,
    NDArrayFloat,
    StateTrajectory,
    TargetSpec,
    TimeGrid,
    adjoint_boundary,
    propagate,
)
from .errors import IndefiniteKernelError, InvalidInputError

__all__ = [
    "ControlField",
    "RefinementSettings",
    "OptimizationConfig",
    "IterationEntry",
    "OptimizationRecord",
    "RefinementReport",
    "krotov_step_unconstrained",
    "compute_inhomogeneity",
    "krotov_step_spectral",
    "optimize",
    "functional_value",
]

# Tolerance (relative to the total functional) within which an iteration
# still counts as monotone; discretization noise lives well below this.
MONOTONE_RTOL = 1e-10

# Cap on the per-interval fixed-point iterations that make the forward
# sweep self-consistent with the midpoint propagation rule.
_MAX_INNER = 8


@dataclass(frozen=True)
class ControlField:
    """Real field samples on a grid plus the reference field for deps.

    ``eps_ref`` is the previous-iteration field the constraint costs are
    measured against; a fresh guess is its own reference.
    """

    grid: TimeGrid
    eps: NDArrayFloat
    eps_ref: Optional[NDArrayFloat] = None

    def __post_init__(self):
        eps = np.asarray(self.eps, dtype=float)
        object.__setattr__(self, "eps", eps)
        if eps.shape != (self.grid.n_t,):
            raise InvalidInputError(
                f"field must have {self.grid.n_t} samples, got shape {eps.shape}"
            )
        if not np.all(np.isfinite(eps)):
            raise InvalidInputError("field samples must be finite")
        ref = self.eps_ref
        ref = eps.copy() if ref is None else np.asarray(ref, dtype=float)
        object.__setattr__(self, "eps_ref", ref)
        if ref.shape != eps.shape:
            raise InvalidInputError(
                f"eps_ref must match eps shape {eps.shape}, got {ref.shape}"
            )
        if not np.all(np.isfinite(ref)):
            raise InvalidInputError("eps_ref samples must be finite")

    @property
    def delta(self) -> NDArrayFloat:
        return self.eps - self.eps_ref


@dataclass(frozen=True)
class RefinementSettings:
    """Iterative refinement of the spectrally constrained step.

    ``field_tol = None`` resolves to 1e-6 times the max-norm of the
    current field at each step.
    """

    max_passes: int = 3
    field_tol: Optional[float] = None

    def __post_init__(self):
        if self.max_passes < 1:
            raise InvalidInputError(f"max_passes must be >= 1, got {self.max_passes!r}")
        if self.field_tol is not None and not (
            np.isfinite(self.field_tol) and self.field_tol > 0
        ):
            raise InvalidInputError(f"field_tol must be > 0, got {self.field_tol!r}")


@dataclass(frozen=True)
class OptimizationConfig:
    amplitude: AmplitudeConstraint
    kernel: SpectralKernel = SpectralKernel()
    sigma_t: float = 0.0
    max_iterations: int = 100
    stop_error: float = 1e-3
    refinement: RefinementSettings = dataclass_field(default_factory=RefinementSettings)
    fredholm_order: Optional[int] = None

    def __post_init__(self):
        if not (0.0 < self.stop_error < 1.0):
            raise InvalidInputError(
                f"stop_error must be in (0, 1), got {self.stop_error!r}"
            )
        if self.max_iterations < 1:
            raise InvalidInputError(
                f"max_iterations must be >= 1, got {self.max_iterations!r}"
            )
        if not np.isfinite(self.sigma_t):
            raise InvalidInputError(f"sigma_t must be finite, got {self.sigma_t!r}")
        if self.fredholm_order is not None and self.fredholm_order < 1:
            raise InvalidInputError(
                f"fredholm_order must be >= 1, got {self.fredholm_order!r}"
            )


@dataclass(frozen=True)
class RefinementReport:
    """Passes used by a spectral step and how the pass loop ended."""

    passes: int
    last_delta: float
    tol_met: bool
    collapsed: bool = False


@dataclass(frozen=True)
class IterationEntry:
    index: int
    j_target: float
    j_constraint: float
    j_total: float
    delta_j: float
    monotone: bool
    refinement_passes: int
    eps: NDArrayFloat


@dataclass
class OptimizationRecord:
    """Per-iteration audit trail plus the final field and trajectory."""

    entries: list[IterationEntry] = dataclass_field(default_factory=list)
    converged: bool = False
    final_field: Optional[ControlField] = None
    final_trajectory: Optional[StateTrajectory] = None

    @property
    def iterations(self) -> int:
        return len(self.entries) - 1

    @property
    def final_error(self) -> float:
        return 1.0 - self.entries[-1].j_target

    @property
    def monotonicity_violations(self) -> int:
        return sum(not e.monotone for e in self.entries)

    @property
    def total_refinement_passes(self) -> int:
        return sum(e.refinement_passes for e in self.entries)


def functional_value(j_target: float, j_constraint: float) -> float:
    """Total functional (1 - J_T) + J_a in the minimization convention."""
    return (1.0 - j_target) + j_constraint


def _transfer(target: TargetSpec, psi_final: NDArrayComplex) -> float:
    return float(np.abs(np.vdot(target.target, psi_final)) ** 2)


def _update_weights(
    amplitude: AmplitudeConstraint, lambda_a: float
) -> NDArrayFloat:
    """Gain S / (lambda0 + lambda_a S) of the explicit update."""
    s = amplitude.shape
    return s / (amplitude.lambda0 + lambda_a * s)


def _forward_sweep(
    system: LevelSystem,
    grid: TimeGrid,
    eps_old: NDArrayFloat,
    chi: NDArrayComplex,
    psi0: NDArrayComplex,
    gain: NDArrayFloat,
    sigma_t: float,
    old_vectors: NDArrayComplex,
) -> tuple[NDArrayFloat, NDArrayComplex]:
    """Sequential time-local update with concurrent propagation.

    At each node the increment depends on the new state there, which in
    turn depends on the not-yet-fixed next field sample through the
    midpoint propagation rule; a short fixed-point loop per interval makes
    the pair self-consistent, after which the stored trajectory equals a
    plain propagation under the returned field to machine precision.
    """
    dt = grid.dt
    n_t = grid.n_t
    h0 = np.diag(system.energies)
    mu = system.dipole
    eps_new = np.empty(n_t)
    psi_new = np.empty((n_t, system.n_levels), dtype=complex)

    scale = max(float(np.abs(eps_old).max()), 1e-30)
    inner_tol = 1e-13 * scale

    def increment(j: int, psi: NDArrayComplex) -> float:
        g = -np.imag(np.vdot(chi[j], mu @ psi))
        if sigma_t != 0.0:
            g += -0.5 * sigma_t * np.imag(np.vdot(psi - old_vectors[j], mu @ psi))
        return gain[j] * g

    psi = np.asarray(psi0, dtype=complex)
    psi_new[0] = psi
    eps_new[0] = eps_old[0] + increment(0, psi)

    for j in range(n_t - 1):
        de = eps_new[j] - eps_old[j]
        psi_next = psi
        for _ in range(_MAX_INNER):
            e_mid = 0.5 * (eps_new[j] + eps_old[j + 1] + de)
            w, v = np.linalg.eigh(h0 - e_mid * mu)
            psi_next = v @ (np.exp(-1j * dt * w) * (v.T @ psi))
            de_next = increment(j + 1, psi_next)
            done = abs(de_next - de) <= inner_tol
            de = de_next
            if done:
                break
        eps_new[j + 1] = eps_old[j + 1] + de
        e_mid = 0.5 * (eps_new[j] + eps_new[j + 1])
        w, v = np.linalg.eigh(h0 - e_mid * mu)
        psi = v @ (np.exp(-1j * dt * w) * (v.T @ psi))
        psi_new[j + 1] = psi
    return eps_new, psi_new


def _pointwise_inhomogeneity(
    chi: NDArrayComplex,
    vectors: NDArrayComplex,
    old_vectors: NDArrayComplex,
    mu: NDArrayFloat,
    gain: NDArrayFloat,
    sigma_t: float,
) -> NDArrayFloat:
    """Explicit update evaluated on stored trajectories (refinement passes)."""
    mu_psi = vectors @ mu
    g = -np.imag(np.einsum("ij,ij->i", chi.conj(), mu_psi))
    if sigma_t != 0.0:
        g += -0.5 * sigma_t * np.imag(
            np.einsum("ij,ij->i", (vectors - old_vectors).conj(), mu_psi)
        )
    return gain * g


def _prepare(
    system: LevelSystem,
    field: ControlField,
    target: TargetSpec,
    config: OptimizationConfig,
    chi: Optional[StateTrajectory],
    forward_old: Optional[StateTrajectory],
) -> tuple[StateTrajectory, StateTrajectory]:
    if config.amplitude.shape.shape != (field.grid.n_t,):
        raise InvalidInputError(
            f"amplitude shape has {config.amplitude.shape.size} samples but the "
            f"grid has {field.grid.n_t} nodes"
        )
    if forward_old is None:
        forward_old = propagate(system, field, target.initial, "forward")
    if chi is None:
        boundary = adjoint_boundary(target, forward_old.final)
        chi = propagate(system, field, boundary, "backward")
    return chi, forward_old


def krotov_step_unconstrained(
    system: LevelSystem,
    field: ControlField,
    target: TargetSpec,
    config: OptimizationConfig,
    *,
    chi: Optional[StateTrajectory] = None,
    forward_old: Optional[StateTrajectory] = None,
) -> tuple[ControlField, StateTrajectory]:
    """One sequential update without spectral components.

    ``chi`` and ``forward_old`` are the adjoint and forward trajectories
    under the current field; they are computed on demand when omitted.
    Returns the updated field (referencing the input field) and the
    forward trajectory under it.
    """
    chi, forward_old = _prepare(system, field, target, config, chi, forward_old)
    gain = config.amplitude.shape / config.amplitude.lambda0
    eps_new, psi_new = _forward_sweep(
        system,
        field.grid,
        field.eps,
        chi.vectors,
        target.initial,
        gain,
        config.sigma_t,
        forward_old.vectors,
    )
    new_field = ControlField(grid=field.grid, eps=eps_new, eps_ref=field.eps.copy())
    return new_field, StateTrajectory(grid=field.grid, vectors=psi_new)


def compute_inhomogeneity(
    system: LevelSystem,
    field: ControlField,
    target: TargetSpec,
    config: OptimizationConfig,
    *,
    chi: Optional[StateTrajectory] = None,
    forward_old: Optional[StateTrajectory] = None,
) -> NDArrayFloat:
    """Inhomogeneity I(t_j) of the spectrally constrained update equation.

    Runs the explicit update (no spectral term) to approximate the new
    states, then evaluates the update integrand along them.  I equals the
    explicit update's field increment; for lambda_a = 0 that is exactly
    (S/lambda0) Im <chi| dH/deps |psi_new>.
    """
    inhom, _ = _inhomogeneity_sweep(system, field, target, config, chi, forward_old)
    return inhom


def _inhomogeneity_sweep(
    system, field, target, config, chi=None, forward_old=None
) -> tuple[NDArrayFloat, NDArrayComplex]:
    chi, forward_old = _prepare(system, field, target, config, chi, forward_old)
    gain = _update_weights(config.amplitude, config.kernel.lambda_a)
    eps_new, psi_new = _forward_sweep(
        system,
        field.grid,
        field.eps,
        chi.vectors,
        target.initial,
        gain,
        config.sigma_t,
        forward_old.vectors,
    )
    return eps_new - field.eps, psi_new


def _default_fredholm_order(kernel: SpectralKernel, grid: TimeGrid) -> int:
    """Hat-basis order resolving the fastest kernel oscillation.

    The nodal degenerate expansion aliases cos(omega_i (t - t')) badly
    below ~2 nodes per period, which can amplify in-band content instead
    of suppressing it; 4 nodes per period keeps the represented kernel
    faithful.  Capped by the time grid, floored for smooth kernels.
    """
    active = [c.omega for c in kernel.components if c.lambda_b != 0.0]
    order = 512
    if active:
        periods = grid.duration * max(active) / (2.0 * np.pi)
        order = max(order, int(np.ceil(4.0 * periods)))
    return min(grid.n_t - 1, order)


def _spectral_kernel_evaluator(
    config: OptimizationConfig, grid: TimeGrid
) -> fredholm.KernelEvaluator:
    """Fredholm kernel F(t, t') of the constrained update on [0, T]."""
    times = grid.times
    shape = config.amplitude.shape
    lam0 = config.amplitude.lambda0
    lam_a = config.kernel.lambda_a
    components = [c for c in config.kernel.components if c.lambda_b != 0.0]

    def evaluator(t, tp):
        t = np.asarray(t, dtype=float)
        tp = np.asarray(tp, dtype=float)
        s_t = np.interp(t, times, shape)
        prefactor = s_t / (2.0 * np.pi * (lam0 + lam_a * s_t))
        tau = t - tp
        total = np.zeros(np.broadcast(t, tp).shape)
        for c in components:
            total += (
                c.lambda_b
                * np.sqrt(2.0 * np.pi * c.sigma**2)
                * np.cos(c.omega * tau)
                * np.exp(-0.5 * c.sigma**2 * tau**2)
            )
        return prefactor * total

    return evaluator


def krotov_step_spectral(
    system: LevelSystem,
    field: ControlField,
    target: TargetSpec,
    config: OptimizationConfig,
    *,
    chi: Optional[StateTrajectory] = None,
    forward_old: Optional[StateTrajectory] = None,
) -> tuple[ControlField, StateTrajectory, RefinementReport]:
    """One spectrally constrained update via the Fredholm equation.

    Builds the inhomogeneity from the explicit update, solves the integral
    equation with the degenerate-kernel method, and optionally refines:
    each extra pass re-propagates under the candidate field, rebuilds I
    against the same adjoint, and re-solves, until successive candidate
    fields differ by less than ``field_tol`` in max-norm or ``max_passes``
    is reached.  The re-solve map is not a contraction in general, so
    every candidate is scored by the total functional under its own
    trajectory and the best one is returned; refining stops early when a
    pass makes that score worse.

    A kernel with no weighted components collapses to the explicit
    update (the integral term vanishes identically, so the Fredholm
    solution equals its inhomogeneity).
    """
    kernel = config.kernel
    if kernel.is_trivial and kernel.lambda_a == 0.0:
        new_field, traj = krotov_step_unconstrained(
            system, field, target, config, chi=chi, forward_old=forward_old
        )
        return new_field, traj, RefinementReport(1, 0.0, True, collapsed=True)

    chi, forward_old = _prepare(system, field, target, config, chi, forward_old)
    inhom, _ = _inhomogeneity_sweep(
        system, field, target, config, chi=chi, forward_old=forward_old
    )
    grid = field.grid

    if kernel.is_trivial:
        # Pure delta kernel (lambda_a > 0): the update is explicit.
        eps_new = field.eps + inhom
        new_field = ControlField(grid=grid, eps=eps_new, eps_ref=field.eps.copy())
        traj = propagate(system, new_field, target.initial, "forward")
        return new_field, traj, RefinementReport(1, 0.0, True, collapsed=True)

    order = config.fredholm_order
    if order is None:
        order = _default_fredholm_order(kernel, grid)
    evaluator = _spectral_kernel_evaluator(config, grid)
    tol = config.refinement.field_tol
    if tol is None:
        tol = 1e-6 * max(float(np.abs(field.eps).max()), 1e-30)

    problem = fredholm.rescale_problem(inhom, evaluator, 1.0, grid.duration)
    delta = fredholm.solve_degenerate(problem, order)
    eps_cand = field.eps + delta

    gain = _update_weights(config.amplitude, kernel.lambda_a)

    def candidate_total(eps, traj):
        d = eps - field.eps
        j_a = amplitude_cost(d, config.amplitude, grid) + spectral_cost(
            d, config.kernel, grid
        )
        return functional_value(_transfer(target, traj.final), j_a)

    cand_traj = propagate(
        system, ControlField(grid=grid, eps=eps_cand), target.initial, "forward"
    )
    best_eps, best_traj = eps_cand, cand_traj
    best_total = candidate_total(eps_cand, cand_traj)

    passes = 1
    last_change = np.inf
    tol_met = False
    while passes < config.refinement.max_passes:
        inhom = _pointwise_inhomogeneity(
            chi.vectors,
            cand_traj.vectors,
            forward_old.vectors,
            system.dipole,
            gain,
            config.sigma_t,
        )
        problem = fredholm.rescale_problem(inhom, evaluator, 1.0, grid.duration)
        delta = fredholm.solve_degenerate(problem, order)
        eps_next = field.eps + delta
        last_change = float(np.abs(eps_next - eps_cand).max())
        eps_cand = eps_next
        passes += 1
        cand_traj = propagate(
            system, ControlField(grid=grid, eps=eps_cand), target.initial, "forward"
        )
        cand_total = candidate_total(eps_cand, cand_traj)
        if cand_total > best_total:
            # The re-solve stopped improving the actual functional: the
            # Picard map behind the refinement is not contracting here.
            # Keep the best candidate seen instead of trusting the last.
            break
        best_eps, best_traj, best_total = eps_cand, cand_traj, cand_total
        if last_change < tol:
            tol_met = True
            break

    new_field = ControlField(grid=grid, eps=best_eps, eps_ref=field.eps.copy())
    return new_field, best_traj, RefinementReport(passes, last_change, tol_met)


def optimize(
    system: LevelSystem,
    guess: ControlField,
    target: TargetSpec,
    config: OptimizationConfig,
) -> OptimizationRecord:
    """Run the optimization loop until stop_error or max_iterations.

    The kernel must be positive semi-definite whenever it carries
    components; this is a hard precondition checked before the first
    iteration.  A non-monotone step (beyond the 1e-10 relative tolerance)
    is flagged in the record but does not abort the run.
    """
    if config.kernel.components:
        report = check_psd(config.kernel)
        if not report.is_psd:
            raise IndefiniteKernelError(
                f"kernel fails positive semi-definiteness: min Kbar = "
                f"{report.min_value:.6e} at omega = {report.argmin:.6g}; "
                f"monotonic convergence requires Kbar(omega) >= 0 everywhere "
                f"(for non-overlapping passes, lambda_b <= 2 lambda_a)"
            )
    if config.amplitude.shape.shape != (guess.grid.n_t,):
        raise InvalidInputError(
            f"amplitude shape has {config.amplitude.shape.size} samples but the "
            f"grid has {guess.grid.n_t} nodes"
        )

    record = OptimizationRecord()
    traj = propagate(system, guess, target.initial, "forward")
    j_t = _transfer(target, traj.final)
    j_a = amplitude_cost(guess.delta, config.amplitude, guess.grid) + spectral_cost(
        guess.delta, config.kernel, guess.grid
    )
    j_total = functional_value(j_t, j_a)
    record.entries.append(
        IterationEntry(0, j_t, j_a, j_total, 0.0, True, 0, guess.eps.copy())
    )
    record.final_field = guess
    record.final_trajectory = traj
    if 1.0 - j_t <= config.stop_error:
        record.converged = True
        return record

    field = guess
    spectral = (not config.kernel.is_trivial) or config.kernel.lambda_a > 0.0
    for iteration in range(1, config.max_iterations + 1):
        boundary = adjoint_boundary(target, traj.final)
        chi = propagate(system, field, boundary, "backward")
        if spectral:
            field_new, traj_new, refinement = krotov_step_spectral(
                system, field, target, config, chi=chi, forward_old=traj
            )
            passes = refinement.passes
        else:
            field_new, traj_new = krotov_step_unconstrained(
                system, field, target, config, chi=chi, forward_old=traj
            )
            passes = 1

        j_t_new = _transfer(target, traj_new.final)
        j_a_new = amplitude_cost(
            field_new.delta, config.amplitude, field.grid
        ) + spectral_cost(field_new.delta, config.kernel, field.grid)
        j_total_new = functional_value(j_t_new, j_a_new)
        prev = record.entries[-1].j_total
        delta_j = j_total_new - prev
        monotone = j_total_new <= prev + MONOTONE_RTOL * abs(prev)
        record.entries.append(
            IterationEntry(
                iteration,
                j_t_new,
                j_a_new,
                j_total_new,
                delta_j,
                monotone,
                passes,
                field_new.eps.copy(),
            )
        )
        field = field_new
        traj = traj_new
        record.final_field = field
        record.final_trajectory = traj
        if 1.0 - j_t_new <= config.stop_error:
            record.converged = True
            break
    return record
