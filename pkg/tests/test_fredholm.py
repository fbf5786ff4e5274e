"""Degenerate-kernel and Nystrom solver tests.

The two solvers are independent routes to the same integral equation and
are cross-checked against each other and against analytic solutions for
constant and separable kernels.
"""

import numpy as np
import pytest

from spectral_krotov import (
    FredholmProblem,
    InvalidInputError,
    SingularSystemError,
    assemble_system,
    fine_residual,
    hat_basis,
    overlap_matrix,
    rescale_problem,
    solve_degenerate,
    solve_nystrom,
)


def oscillatory_kernel(omega, sigma):
    def k(s, t):
        tau = np.asarray(s) - np.asarray(t)
        return np.cos(omega * tau) * np.exp(-0.5 * sigma**2 * tau**2)
    return k


def test_hat_basis_partition_of_unity():
    s = np.linspace(0.0, 1.0, 1537)
    for order in (4, 17, 64):
        total = sum(hat_basis(j, order, s) for j in range(order + 1))
        assert np.max(np.abs(total - 1.0)) < 1e-14


def test_hat_basis_nodal_values():
    order = 8
    nodes = np.linspace(0.0, 1.0, order + 1)
    for j in range(order + 1):
        values = hat_basis(j, order, nodes)
        expected = np.zeros(order + 1)
        expected[j] = 1.0
        assert np.allclose(values, expected, atol=1e-15)
    assert np.all(hat_basis(3, order, np.linspace(0, 1, 200)) >= 0.0)


def test_hat_basis_index_bounds():
    with pytest.raises(InvalidInputError):
        hat_basis(-1, 4, np.array([0.5]))
    with pytest.raises(InvalidInputError):
        hat_basis(5, 4, np.array([0.5]))


def test_overlap_matrix_closed_forms():
    for order in (3, 10, 57):
        a = overlap_matrix(order)
        assert a.shape == (order + 1, order + 1)
        assert a[0, 0] == 1.0 / (3.0 * order)
        assert a[order, order] == 1.0 / (3.0 * order)
        for j in range(1, order):
            assert a[j, j] == 2.0 / (3.0 * order)
        for j in range(order):
            assert a[j, j + 1] == 1.0 / (6.0 * order)
            assert a[j + 1, j] == 1.0 / (6.0 * order)
        # nothing beyond the first off-diagonal
        assert np.count_nonzero(a) == 3 * (order + 1) - 2


def test_overlap_matrix_against_quadrature():
    """Rows integrate hat products; verify a few against dense quadrature."""
    order = 6
    s = np.linspace(0.0, 1.0, 200001)
    a = overlap_matrix(order)
    for j, k in ((0, 0), (2, 2), (3, 4), (0, 5)):
        product = hat_basis(j, order, s) * hat_basis(k, order, s)
        assert a[j, k] == pytest.approx(np.trapezoid(product, s), abs=1e-9)


def test_constant_kernel_fixed_point():
    """K = 1, I = 1, gamma = 1/2: exact solution is the constant 2."""
    n = 401
    problem = FredholmProblem(
        inhomogeneity=np.ones(n),
        kernel=lambda s, t: np.ones(np.broadcast(np.asarray(s), np.asarray(t)).shape),
        gamma=0.5,
    )
    solution = solve_degenerate(problem, 24)
    assert np.max(np.abs(solution - 2.0)) < 1e-10
    assert np.max(np.abs(solve_nystrom(problem, 101) - 2.0)) < 1e-10


def test_separable_kernel_analytic():
    """K(s,t) = s t with I = 1 solves to 1 + c s, c = gamma/(2 - 2 gamma/3)."""
    gamma = 0.7
    n = 801
    problem = FredholmProblem(
        inhomogeneity=np.ones(n),
        kernel=lambda s, t: np.asarray(s) * np.asarray(t),
        gamma=gamma,
    )
    c = gamma / (2.0 - 2.0 * gamma / 3.0)
    s = problem.s_samples
    exact = 1.0 + c * s
    degenerate = solve_degenerate(problem, 256)
    nystrom = solve_nystrom(problem, 801)
    # the hat basis represents s*t exactly, so the degenerate route is sharp;
    # the Nystrom route carries the O(h^2) trapezoid error of its quadrature
    assert np.max(np.abs(degenerate - exact)) < 5e-13
    assert np.max(np.abs(nystrom - exact)) < 1e-6


def test_assemble_system_small_order():
    """Hand-build the N = 4 system from its definition."""
    order = 4
    n = 201
    kernel = oscillatory_kernel(3.0, 1.0)
    rng = np.random.default_rng(2)
    inhom = rng.normal(size=n)
    problem = FredholmProblem(inhomogeneity=inhom, kernel=kernel, gamma=0.8)
    matrix, rhs = assemble_system(problem, order)

    nodes = np.linspace(0.0, 1.0, order + 1)
    d = kernel(nodes[:, None], nodes[None, :])
    a = overlap_matrix(order)
    c = d @ a
    s = problem.s_samples
    b = np.array([np.trapezoid(inhom * hat_basis(j, order, s), s) for j in range(order + 1)])
    assert np.allclose(matrix, np.eye(order + 1) - 0.8 * c, atol=1e-12)
    assert np.allclose(rhs, 0.8 * (d @ b), atol=1e-10)


def test_residual_drops_with_order():
    """Doubling N must cut the fine-grid residual at least threefold."""
    kernels = [
        oscillatory_kernel(2.0, 0.5),
        oscillatory_kernel(5.0, 1.0),
        oscillatory_kernel(8.0, 2.0),
        oscillatory_kernel(0.0, 0.8),
        oscillatory_kernel(12.0, 4.0),
    ]
    n = 2001
    s = np.linspace(0.0, 1.0, n)
    inhom = np.exp(-((s - 0.4) ** 2) / 0.05) * np.cos(7.0 * s)
    for kernel in kernels:
        problem = FredholmProblem(inhomogeneity=inhom, kernel=kernel, gamma=0.9)
        residuals = []
        for order in (32, 64, 128):
            solution = solve_degenerate(problem, order)
            residuals.append(fine_residual(problem, solution))
        assert residuals[0] / residuals[1] >= 3.0, residuals
        assert residuals[1] / residuals[2] >= 3.0, residuals


def test_degenerate_vs_nystrom_cross_check():
    n = 2001
    s = np.linspace(0.0, 1.0, n)
    inhom = np.sin(4.0 * s) * np.exp(-s)
    problem = FredholmProblem(
        inhomogeneity=inhom, kernel=oscillatory_kernel(5.0, 1.5), gamma=0.8
    )
    degenerate = solve_degenerate(problem, 200)
    nystrom = solve_nystrom(problem, 600)
    scale = np.max(np.abs(nystrom))
    assert np.max(np.abs(degenerate - nystrom)) <= 1e-4 * max(scale, 1.0)


def test_nystrom_residual_near_machine():
    n = 901
    s = np.linspace(0.0, 1.0, n)
    problem = FredholmProblem(
        inhomogeneity=np.cos(3.0 * s), kernel=oscillatory_kernel(4.0, 1.0), gamma=0.6
    )
    solution = solve_nystrom(problem, n)
    assert fine_residual(problem, solution) < 1e-12


def test_solution_linearity():
    n = 501
    s = np.linspace(0.0, 1.0, n)
    kernel = oscillatory_kernel(3.0, 1.0)
    inhom = np.exp(-2.0 * s)
    p1 = FredholmProblem(inhomogeneity=inhom, kernel=kernel, gamma=0.8)
    p2 = FredholmProblem(inhomogeneity=2.5 * inhom, kernel=kernel, gamma=0.8)
    x1 = solve_degenerate(p1, 64)
    x2 = solve_degenerate(p2, 64)
    assert np.max(np.abs(x2 - 2.5 * x1)) < 1e-12


def test_zero_inhomogeneity_gives_zero():
    problem = FredholmProblem(
        inhomogeneity=np.zeros(301), kernel=oscillatory_kernel(2.0, 1.0), gamma=0.9
    )
    assert np.all(solve_degenerate(problem, 48) == 0.0)


def test_rescale_problem_round_trip():
    """Solving on [0, T] via the unit-interval rescaling is consistent."""
    duration = 7.0
    n = 1001
    t = np.linspace(0.0, duration, n)
    omega, sigma = 2.0, 0.7

    def kernel_t(x, y):
        tau = np.asarray(x) - np.asarray(y)
        return np.cos(omega * tau) * np.exp(-0.5 * sigma**2 * tau**2)

    inhom = np.exp(-((t - 3.0) ** 2)) * np.sin(3.0 * t)
    problem = rescale_problem(inhom, kernel_t, 0.3, duration)
    assert problem.gamma == pytest.approx(0.3 * duration)

    # direct trapezoid collocation in t-coordinates as the reference
    w = np.full(n, t[1] - t[0])
    w[0] = w[-1] = (t[1] - t[0]) / 2.0
    k = kernel_t(t[:, None], t[None, :])
    reference = np.linalg.solve(np.eye(n) - 0.3 * k * w[None, :], inhom)
    scale = np.max(np.abs(reference))
    # the Nystrom route shares the reference's quadrature, so the rescaling
    # itself is checked at machine precision; the degenerate route adds its
    # own O(1/N^2) basis error on top
    nystrom = solve_nystrom(problem, n)
    assert np.max(np.abs(nystrom - reference)) < 1e-12 * scale
    degenerate = solve_degenerate(problem, 256)
    assert np.max(np.abs(degenerate - reference)) < 5e-4 * scale


def test_banded_solve_matches_dense():
    """A short-range kernel takes the banded path without changing results."""
    n = 1201
    s = np.linspace(0.0, 1.0, n)
    inhom = np.cos(5.0 * s)

    def short_range(x, y):
        tau = np.asarray(x) - np.asarray(y)
        out = np.exp(-0.5 * (tau / 0.01) ** 2)
        return np.where(np.abs(tau) < 0.05, out, 0.0)

    problem = FredholmProblem(inhomogeneity=inhom, kernel=short_range, gamma=0.5)
    dense = solve_degenerate(problem, 300, banded=False)
    banded = solve_degenerate(problem, 300, banded=True)
    assert np.max(np.abs(dense - banded)) < 1e-12


def test_singular_system_raises():
    """gamma = 1 with K = 1 hits the rank-one operator's eigenvalue."""
    problem = FredholmProblem(
        inhomogeneity=np.ones(101),
        kernel=lambda s, t: np.ones(np.broadcast(np.asarray(s), np.asarray(t)).shape),
        gamma=1.0,
    )
    with pytest.raises(SingularSystemError) as err:
        solve_degenerate(problem, 32)
    assert "gamma" in str(err.value)


def test_problem_validation():
    with pytest.raises(InvalidInputError):
        FredholmProblem(inhomogeneity=np.ones((3, 2)), kernel=lambda s, t: s, gamma=1.0)
    with pytest.raises(InvalidInputError):
        FredholmProblem(inhomogeneity=np.array([1.0]), kernel=lambda s, t: s, gamma=1.0)
    problem = FredholmProblem(
        inhomogeneity=np.ones(51), kernel=lambda s, t: np.zeros_like(np.asarray(s)), gamma=1.0
    )
    with pytest.raises(InvalidInputError):
        solve_degenerate(problem, 0)
