"""Finite-level quantum systems and piecewise-constant-field propagation.

Atomic units are used throughout (hbar = 1), so energies and angular
frequencies are interchangeable.  The control enters the Hamiltonian
linearly with the sign convention

    H(eps) = diag(energies) - eps * dipole,

hence dH/deps = -dipole.  Any consistent sign choice only flips the sign
of the optimal field.

Propagation treats the field as constant on each grid interval, using the
midpoint of the two node samples; each step is the exact matrix
exponential obtained from an eigendecomposition of the (small) Hermitian
matrix, so the evolution is exactly unitary per step and second-order
accurate in the time step.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING

import numpy as np
import numpy.typing as npt

from .errors import InvalidInputError

if TYPE_CHECKING:  # pragma: no cover
    from .krotov import ControlField

NDArrayFloat = npt.NDArray[np.float64]
NDArrayComplex = npt.NDArray[np.complex128]

__all__ = [
    "LevelSystem",
    "TimeGrid",
    "StateTrajectory",
    "TargetSpec",
    "hamiltonian",
    "propagate",
    "adjoint_boundary",
    "populations",
    "interval_eigensystems",
]


@dataclass(frozen=True)
class LevelSystem:
    """An n-level system with energies and a real dipole coupling matrix.

    Parameters
    ----------
    energies
        Level energies in atomic units, length ``n``.
    dipole
        Real symmetric ``n x n`` dipole-moment matrix with zero diagonal.
    """

    energies: NDArrayFloat
    dipole: NDArrayFloat

    def __post_init__(self):
        energies = np.asarray(self.energies, dtype=float)
        dipole = np.asarray(self.dipole, dtype=float)
        object.__setattr__(self, "energies", energies)
        object.__setattr__(self, "dipole", dipole)
        if energies.ndim != 1 or energies.size < 2:
            raise InvalidInputError(
                f"energies must be a vector of length >= 2, got shape {energies.shape}"
            )
        if not np.all(np.isfinite(energies)):
            raise InvalidInputError("energies must be finite")
        n = energies.size
        if dipole.shape != (n, n):
            raise InvalidInputError(
                f"dipole must have shape {(n, n)} to match energies, got {dipole.shape}"
            )
        if not np.all(np.isfinite(dipole)):
            raise InvalidInputError("dipole entries must be finite")
        if not np.array_equal(dipole, dipole.T):
            raise InvalidInputError("dipole matrix must be exactly symmetric")
        if np.any(np.diag(dipole) != 0.0):
            raise InvalidInputError("dipole matrix must have zero diagonal")

    @property
    def n_levels(self) -> int:
        return self.energies.size


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_j = j * duration / (n_t - 1), j = 0 .. n_t - 1."""

    duration: float
    n_t: int

    def __post_init__(self):
        if not (np.isfinite(self.duration) and self.duration > 0):
            raise InvalidInputError(f"duration must be positive, got {self.duration!r}")
        if self.n_t < 2:
            raise InvalidInputError(f"n_t must be >= 2, got {self.n_t!r}")

    @property
    def dt(self) -> float:
        return self.duration / (self.n_t - 1)

    @cached_property
    def times(self) -> NDArrayFloat:
        return np.linspace(0.0, self.duration, self.n_t)


@dataclass(frozen=True)
class StateTrajectory:
    """State vectors on every node of a time grid.

    ``vectors`` has shape ``(n_t, n)``; row ``j`` is the state at ``t_j``
    regardless of the direction the trajectory was generated in.
    """

    grid: TimeGrid
    vectors: NDArrayComplex

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=complex)
        object.__setattr__(self, "vectors", vectors)
        if vectors.ndim != 2 or vectors.shape[0] != self.grid.n_t:
            raise InvalidInputError(
                f"vectors must have shape (n_t, n) = ({self.grid.n_t}, n), "
                f"got {vectors.shape}"
            )

    @property
    def final(self) -> NDArrayComplex:
        return self.vectors[-1]


@dataclass(frozen=True)
class TargetSpec:
    """Initial and target states of a state-to-state transfer objective."""

    initial: NDArrayComplex
    target: NDArrayComplex

    def __post_init__(self):
        initial = np.asarray(self.initial, dtype=complex)
        target = np.asarray(self.target, dtype=complex)
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "target", target)
        if initial.shape != target.shape or initial.ndim != 1:
            raise InvalidInputError(
                f"initial and target must be vectors of equal length, got "
                f"{initial.shape} and {target.shape}"
            )
        for name, vec in (("initial", initial), ("target", target)):
            norm = np.linalg.norm(vec)
            if abs(norm - 1.0) > 1e-12:
                raise InvalidInputError(
                    f"{name} state must be unit-norm within 1e-12, got norm {norm!r}"
                )


def hamiltonian(system: LevelSystem, eps: float) -> NDArrayComplex:
    """Assemble H(eps) = diag(energies) - eps * dipole.

    Parameters
    ----------
    system
        The level system.
    eps
        Field value (atomic units).

    Returns
    -------
    numpy.ndarray
        Hermitian ``n x n`` matrix.
    """
    if not np.isfinite(eps):
        raise InvalidInputError(f"eps must be finite, got {eps!r}")
    h = np.diag(system.energies) - eps * system.dipole
    return h.astype(complex)


def interval_eigensystems(
    system: LevelSystem, eps_mid: NDArrayFloat
) -> tuple[NDArrayFloat, NDArrayFloat]:
    """Eigendecompose H(eps) for a batch of field values.

    Returns ``(evals, evecs)`` with shapes ``(m, n)`` and ``(m, n, n)``;
    the matrices are real symmetric so the eigenvectors are real
    orthogonal.
    """
    eps_mid = np.asarray(eps_mid, dtype=float)
    h = np.diag(system.energies)[None, :, :] - eps_mid[:, None, None] * system.dipole
    return np.linalg.eigh(h)


def propagate(
    system: LevelSystem,
    field: "ControlField",
    psi0: NDArrayComplex,
    direction: str = "forward",
) -> StateTrajectory:
    """Propagate a state under a piecewise-constant control field.

    On each interval the field takes the midpoint value
    ``(eps[j] + eps[j+1]) / 2`` and the state advances by the exact
    exponential ``exp(-i H dt)``.  The backward direction applies the
    adjoint step ``exp(+i H dt)`` and fills the trajectory from the final
    node down, so ``vectors[j]`` is the state at ``t_j`` either way.

    Parameters
    ----------
    system
        The level system.
    field
        Control field on the grid (only ``field.grid`` and ``field.eps``
        are used).
    psi0
        Boundary state: the state at ``t = 0`` for ``direction="forward"``
        or at ``t = T`` for ``direction="backward"``.
    direction
        Either ``"forward"`` or ``"backward"``.

    Returns
    -------
    StateTrajectory
    """
    psi0 = np.asarray(psi0, dtype=complex)
    n = system.n_levels
    if psi0.shape != (n,):
        raise InvalidInputError(
            f"psi0 has shape {psi0.shape} but the system has {n} levels "
            f"(expected shape {(n,)})"
        )
    if direction not in ("forward", "backward"):
        raise InvalidInputError(f"direction must be 'forward' or 'backward', got {direction!r}")
    grid = field.grid
    eps = field.eps
    if eps.shape != (grid.n_t,):
        raise InvalidInputError(
            f"field has {eps.shape[0]} samples but the grid has {grid.n_t} nodes"
        )
    dt = grid.dt
    eps_mid = 0.5 * (eps[:-1] + eps[1:])
    evals, evecs = interval_eigensystems(system, eps_mid)

    vectors = np.empty((grid.n_t, n), dtype=complex)
    if direction == "forward":
        phases = np.exp(-1j * dt * evals)
        vectors[0] = psi0
        psi = psi0
        for j in range(grid.n_t - 1):
            v = evecs[j]
            psi = v @ (phases[j] * (v.T @ psi))
            vectors[j + 1] = psi
    else:
        phases = np.exp(1j * dt * evals)
        vectors[-1] = psi0
        psi = psi0
        for j in range(grid.n_t - 2, -1, -1):
            v = evecs[j]
            psi = v @ (phases[j] * (v.T @ psi))
            vectors[j] = psi
    return StateTrajectory(grid=grid, vectors=vectors)


def adjoint_boundary(target: TargetSpec, psiT: NDArrayComplex) -> NDArrayComplex:
    """Final-time boundary condition of the adjoint state.

    For the maximized transfer functional J_T = |<target|psi(T)>|^2 the
    adjoint starts from the target vector weighted by the final-time
    overlap; the phase is the one for which each iteration decreases the
    total functional.
    """
    psiT = np.asarray(psiT, dtype=complex)
    if psiT.shape != target.target.shape:
        raise InvalidInputError(
            f"psiT has shape {psiT.shape}, expected {target.target.shape}"
        )
    return np.vdot(target.target, psiT) * target.target


def populations(traj: StateTrajectory) -> NDArrayFloat:
    """Level populations |psi_m(t_j)|^2 as an ``(n_t, n)`` table."""
    return np.abs(traj.vectors) ** 2
