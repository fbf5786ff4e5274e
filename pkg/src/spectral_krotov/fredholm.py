"""Fredholm integral equations of the second kind on [0, 1].

Solves

    f(s) = I(s) + gamma * int_0^1 K(s, s') f(s') ds'

two independent ways: a degenerate-kernel method that interpolates K in a
piecewise-linear hat basis and reduces the equation to an (N+1)-dim
linear system, and a Nystrom (quadrature-collocation) method used as a
cross-check oracle.  Problems posed on [0, T] are mapped here by
s = t / T, which multiplies gamma by the Jacobian T.

The degenerate method writes K_N(s, s') = sum_jk d_jk alpha_j(s)
alpha_k(s') with d_jk = K(j/N, k/N) and nodal hats alpha_j; the solution
is f(s) = I(s) + sum_j X_j alpha_j(s) where

    (1 - gamma C) X = gamma b,
    C_jk = sum_i K(s_j, s_i) A_ik,
    b_k  = sum_i K(s_k, s_i) int I(s) alpha_i(s) ds,

and A_ik = int alpha_i alpha_k is the symmetric tridiagonal overlap
matrix with closed-form entries 1/(3N), 2/(3N), 1/(6N).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .dynamics import NDArrayFloat
from .errors import InvalidInputError, SingularSystemError

__all__ = [
    "KernelEvaluator",
    "FredholmProblem",
    "DegenerateApproximation",
    "hat_basis",
    "overlap_matrix",
    "assemble_system",
    "solve_degenerate",
    "solve_nystrom",
    "rescale_problem",
    "fine_residual",
]

# Called with broadcastable float arrays (s, s'); must return elementwise
# kernel values of the broadcast shape.
KernelEvaluator = Callable[[NDArrayFloat, NDArrayFloat], NDArrayFloat]

# Relative pivot threshold below which the LU-factored system counts as
# singular (proxy for a vanishing determinant that does not under/overflow).
_PIVOT_RTOL = 1e-14


@dataclass(frozen=True)
class FredholmProblem:
    """Inhomogeneity samples on a uniform [0, 1] grid, kernel, and gamma."""

    inhomogeneity: NDArrayFloat
    kernel: KernelEvaluator
    gamma: float

    def __post_init__(self):
        inhom = np.asarray(self.inhomogeneity, dtype=float)
        object.__setattr__(self, "inhomogeneity", inhom)
        if inhom.ndim != 1 or inhom.size < 2:
            raise InvalidInputError(
                f"inhomogeneity must be a vector of length >= 2, got shape {inhom.shape}"
            )
        if not np.all(np.isfinite(inhom)):
            raise InvalidInputError("inhomogeneity samples must be finite")
        if not np.isfinite(self.gamma):
            raise InvalidInputError(f"gamma must be finite, got {self.gamma!r}")

    @property
    def s_samples(self) -> NDArrayFloat:
        return np.linspace(0.0, 1.0, self.inhomogeneity.size)


@dataclass(frozen=True)
class DegenerateApproximation:
    """Kernel node values d_jk = K(j/N, k/N) of the order-N approximation."""

    order: int
    nodes: NDArrayFloat

    @classmethod
    def from_problem(cls, problem: FredholmProblem, N: int) -> "DegenerateApproximation":
        s = np.linspace(0.0, 1.0, N + 1)
        d = np.asarray(problem.kernel(s[:, None], s[None, :]), dtype=float)
        if d.shape != (N + 1, N + 1):
            raise InvalidInputError(
                f"kernel evaluator returned shape {d.shape}, expected {(N + 1, N + 1)}"
            )
        return cls(order=N, nodes=d)


def hat_basis(j: int, N: int, s) -> NDArrayFloat:
    """Piecewise-linear nodal hat alpha_j(s) = max(0, 1 - N|s - j/N|).

    The hats peak at s = j/N, vanish at the neighbouring nodes, and form a
    partition of unity on [0, 1].
    """
    if N < 1:
        raise InvalidInputError(f"N must be >= 1, got {N!r}")
    if not (0 <= j <= N):
        raise InvalidInputError(f"j must be in [0, {N}], got {j!r}")
    s = np.asarray(s, dtype=float)
    value = np.maximum(0.0, 1.0 - N * np.abs(s - j / N))
    return value if value.ndim else float(value)


def overlap_matrix(N: int) -> NDArrayFloat:
    """Hat-basis overlap matrix A_ik = int_0^1 alpha_i alpha_k ds.

    Symmetric tridiagonal: 1/(3N) at the two corner diagonal entries,
    2/(3N) on the interior diagonal, 1/(6N) on the off-diagonals.
    """
    if N < 1:
        raise InvalidInputError(f"N must be >= 1, got {N!r}")
    a = np.zeros((N + 1, N + 1))
    diag = np.full(N + 1, 2.0 / (3.0 * N))
    diag[0] = diag[-1] = 1.0 / (3.0 * N)
    np.fill_diagonal(a, diag)
    off = 1.0 / (6.0 * N)
    idx = np.arange(N)
    a[idx, idx + 1] = off
    a[idx + 1, idx] = off
    return a


def _hat_integrals(samples: NDArrayFloat, N: int) -> NDArrayFloat:
    """int I(s) alpha_i(s) ds for all i by composite trapezoid on the fine grid."""
    n_s = samples.size
    s = np.linspace(0.0, 1.0, n_s)
    w = np.full(n_s, 1.0 / (n_s - 1))
    w[0] = w[-1] = 0.5 / (n_s - 1)
    u = w * samples
    pos = s * N
    idx = np.minimum(pos.astype(int), N - 1)
    frac = pos - idx
    out = np.zeros(N + 1)
    np.add.at(out, idx, u * (1.0 - frac))
    np.add.at(out, idx + 1, u * frac)
    return out


def assemble_system(
    problem: FredholmProblem, N: int
) -> tuple[NDArrayFloat, NDArrayFloat]:
    """Assemble the degenerate-kernel linear system (M, rhs).

    Returns ``M = 1 - gamma C`` and ``rhs = gamma b``.  Raises
    :class:`SingularSystemError` (naming gamma) when M is numerically
    singular.
    """
    if N < 1:
        raise InvalidInputError(f"N must be >= 1, got {N!r}")
    d = DegenerateApproximation.from_problem(problem, N).nodes
    # C = d @ A exploiting the tridiagonal structure of A.
    diag = np.full(N + 1, 2.0 / (3.0 * N))
    diag[0] = diag[-1] = 1.0 / (3.0 * N)
    off = 1.0 / (6.0 * N)
    c = d * diag[None, :]
    c[:, 1:] += off * d[:, :-1]
    c[:, :-1] += off * d[:, 1:]

    b = d @ _hat_integrals(problem.inhomogeneity, N)

    m = np.eye(N + 1) - problem.gamma * c
    _check_nonsingular(m, problem.gamma)
    return m, problem.gamma * b


def _check_nonsingular(m: NDArrayFloat, gamma: float) -> None:
    try:
        lu, _ = scipy.linalg.lu_factor(m, check_finite=False)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystemError(gamma, str(exc)) from exc
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= _PIVOT_RTOL * pivots.max():
        raise SingularSystemError(
            gamma, f"relative pivot {pivots.min() / pivots.max():.3e}"
        )


def _detect_bandwidth(d: NDArrayFloat, rtol: float = 1e-12) -> int:
    """Largest |j - k| with |d_jk| above rtol times the kernel peak."""
    peak = np.abs(d).max()
    if peak == 0.0:
        return 0
    rows, cols = np.nonzero(np.abs(d) > rtol * peak)
    return int(np.abs(rows - cols).max()) if rows.size else 0


def solve_degenerate(
    problem: FredholmProblem, N: int, *, banded: bool = False
) -> NDArrayFloat:
    """Solve by the degenerate-kernel method; samples on the problem's fine grid.

    The returned solution is ``I(s) + sum_j X_j alpha_j(s)``, i.e. the
    inhomogeneity plus the piecewise-linear interpolant of the nodal
    coefficients X.

    With ``banded=True`` the linear solve uses banded LU when the kernel's
    envelope makes the system matrix effectively banded (entries below
    1e-12 of the peak treated as zero); results match the dense path to
    solver precision.  Dense is the default.
    """
    m, rhs = assemble_system(problem, N)
    x = None
    if banded:
        d = DegenerateApproximation.from_problem(problem, N).nodes
        width = min(_detect_bandwidth(d) + 1, N)
        if width < (N + 1) // 3:
            bands = np.zeros((2 * width + 1, N + 1))
            for k in range(-width, width + 1):
                bands[width - k, max(k, 0) : N + 1 + min(k, 0)] = np.diagonal(m, k)
            try:
                x = scipy.linalg.solve_banded(
                    (width, width), bands, rhs, check_finite=False
                )
            except scipy.linalg.LinAlgError as exc:
                raise SingularSystemError(problem.gamma, str(exc)) from exc
    if x is None:
        x = np.linalg.solve(m, rhs)
    nodes = np.linspace(0.0, 1.0, N + 1)
    return problem.inhomogeneity + np.interp(problem.s_samples, nodes, x)


def solve_nystrom(problem: FredholmProblem, n_quad: int) -> NDArrayFloat:
    """Solve by trapezoidal Nystrom collocation; samples on the fine grid.

    Collocates on ``n_quad`` uniform points, then extends to the fine grid
    with the natural Nystrom interpolation
    ``f(s) = I(s) + gamma sum_j w_j K(s, s_j) f(s_j)``.
    """
    if n_quad < 2:
        raise InvalidInputError(f"n_quad must be >= 2, got {n_quad!r}")
    sq = np.linspace(0.0, 1.0, n_quad)
    w = np.full(n_quad, 1.0 / (n_quad - 1))
    w[0] = w[-1] = 0.5 / (n_quad - 1)
    kq = np.asarray(problem.kernel(sq[:, None], sq[None, :]), dtype=float)
    m = np.eye(n_quad) - problem.gamma * kq * w[None, :]
    _check_nonsingular(m, problem.gamma)
    iq = np.interp(sq, problem.s_samples, problem.inhomogeneity)
    xq = np.linalg.solve(m, iq)
    s_fine = problem.s_samples
    k_fine = np.asarray(problem.kernel(s_fine[:, None], sq[None, :]), dtype=float)
    return problem.inhomogeneity + problem.gamma * (k_fine @ (w * xq))


def rescale_problem(
    inhomogeneity: NDArrayFloat,
    kernel_t: KernelEvaluator,
    gamma: float,
    duration: float,
) -> FredholmProblem:
    """Map a problem posed on [0, T] to the solver's [0, 1] domain.

    ``kernel_t`` takes time arguments in [0, T]; the change of variables
    s = t / T turns int_0^T K dt' into T int_0^1 K ds', so gamma picks up
    the factor T.
    """
    if not (np.isfinite(duration) and duration > 0):
        raise InvalidInputError(f"duration must be > 0, got {duration!r}")

    def kernel_s(s, sp):
        return kernel_t(np.asarray(s) * duration, np.asarray(sp) * duration)

    return FredholmProblem(
        inhomogeneity=inhomogeneity, kernel=kernel_s, gamma=gamma * duration
    )


def fine_residual(problem: FredholmProblem, solution: NDArrayFloat) -> float:
    """Max-norm residual of a solution under fine trapezoidal back-substitution.

    Evaluates ``f - I - gamma int K f`` on the problem's own sample grid,
    row blocks at a time to bound memory.
    """
    solution = np.asarray(solution, dtype=float)
    s = problem.s_samples
    if solution.shape != s.shape:
        raise InvalidInputError(
            f"solution must have {s.size} samples, got shape {solution.shape}"
        )
    n_s = s.size
    w = np.full(n_s, 1.0 / (n_s - 1))
    w[0] = w[-1] = 0.5 / (n_s - 1)
    wf = w * solution
    worst = 0.0
    for start in range(0, n_s, 256):
        rows = s[start : start + 256]
        k_block = np.asarray(problem.kernel(rows[:, None], s[None, :]), dtype=float)
        integral = k_block @ wf
        res = (
            solution[start : start + 256]
            - problem.inhomogeneity[start : start + 256]
            - problem.gamma * integral
        )
        worst = max(worst, float(np.abs(res).max()))
    return worst
