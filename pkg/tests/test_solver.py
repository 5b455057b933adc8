import numpy as np
import pytest

from weakkam import (build_kernel, conjugate_pair, critical_value_bisection,
                     lax_oleinik_minus, lax_oleinik_plus, solve_weak_kam)
from weakkam.kernel import GridSpec
from weakkam.solver import ConvergenceError, make_grid


@pytest.fixture(scope="module")
def free_kernel(free_model):
    grid = make_grid(free_model, 32, 0.1, c=1.0)
    return grid, build_kernel(free_model, grid, [0.0])


def test_minus_operator_zero_fixed_point(free_kernel):
    grid, kern = free_kernel
    u = np.zeros(kern.n_nodes)
    assert np.array_equal(lax_oleinik_minus(kern, u), u)
    assert np.array_equal(lax_oleinik_plus(kern, u), u)


def test_operators_commute_with_constants(free_kernel, rng):
    _, kern = free_kernel
    u = rng.normal(size=kern.n_nodes)
    kappa = 0.7321
    assert np.array_equal(lax_oleinik_minus(kern, u + kappa), lax_oleinik_minus(kern, u) + kappa)
    assert np.array_equal(lax_oleinik_plus(kern, u + kappa), lax_oleinik_plus(kern, u) + kappa)


def test_operators_monotone(free_kernel, rng):
    _, kern = free_kernel
    for _ in range(10):
        u = rng.normal(size=kern.n_nodes)
        w = u + rng.random(kern.n_nodes)
        assert (lax_oleinik_minus(kern, u) <= lax_oleinik_minus(kern, w) + 1e-15).all()
        assert (lax_oleinik_plus(kern, u) <= lax_oleinik_plus(kern, w) + 1e-15).all()


def test_operators_nonexpansive(free_kernel, rng):
    _, kern = free_kernel
    for _ in range(10):
        u = rng.normal(size=kern.n_nodes)
        w = rng.normal(size=kern.n_nodes)
        gap = np.abs(u - w).max()
        assert np.abs(lax_oleinik_minus(kern, u) - lax_oleinik_minus(kern, w)).max() <= gap + 1e-15
        assert np.abs(lax_oleinik_plus(kern, u) - lax_oleinik_plus(kern, w)).max() <= gap + 1e-15


def test_plus_minus_duality_via_transpose(pendulum, rng):
    grid = make_grid(pendulum, 32, 0.1, c=0.5)
    kern = build_kernel(pendulum, grid, [0.5])
    u = rng.normal(size=kern.n_nodes)
    direct = lax_oleinik_plus(kern, u)
    flipped = kern.with_alpha(0.0)
    flipped.cost = kern.cost.T.copy()
    dual = -lax_oleinik_minus(flipped, -u)
    assert np.abs(direct - dual).max() < 1e-14


def test_free_alpha_zero(free_model):
    grid = make_grid(free_model, 64, 0.1, c=0.0)
    sol = solve_weak_kam(free_model, grid, [0.0])
    assert sol.converged
    assert sol.alpha == pytest.approx(0.0, abs=1e-12)
    assert np.abs(sol.u).max() < 1e-12
    assert sol.residual < 1e-12


def test_free_alpha_matches_velocity_grid_oracle(free_model):
    # the discrete critical value is the best discrete velocity trade-off
    n, tau = 64, 0.1
    grid = make_grid(free_model, n, tau, c=1.0)
    reach = int(np.floor(grid.v_max * tau * n + 1e-9))
    vels = np.arange(-reach, reach + 1) / (n * tau)
    for c in (0.3, 0.55, 1.0):
        sol = solve_weak_kam(free_model, grid, [c])
        oracle = -(0.5 * vels ** 2 - c * vels).min()
        assert sol.alpha == pytest.approx(oracle, abs=1e-12)
        assert sol.alpha == pytest.approx(c * c / 2.0, abs=1.0 / (8.0 * (n * tau) ** 2) + 1e-12)


def test_pendulum_alpha_is_max_potential(pendulum):
    grid = make_grid(pendulum, 128, 0.05, c=0.0)
    sol = solve_weak_kam(pendulum, grid, [0.0])
    assert sol.converged
    assert sol.alpha == pytest.approx(1.0, abs=1e-12)
    assert sol.residual <= 1e-8 * grid.tau


def test_two_harmonic_alpha_is_max_potential(two_harmonic):
    grid = make_grid(two_harmonic, 64, 0.1, c=0.0)
    sol = solve_weak_kam(two_harmonic, grid, [0.0])
    nodes = grid.nodes(1)
    assert sol.alpha == pytest.approx(float(two_harmonic.potential(nodes).max()), abs=1e-10)


def test_bisection_agrees_with_iteration(free_model, pendulum):
    for model, c in ((free_model, 0.0), (free_model, 0.7), (pendulum, 0.0), (pendulum, 1.8)):
        grid = make_grid(model, 128, 0.05, c=c)
        kern = build_kernel(model, grid, [c])
        sol = solve_weak_kam(model, grid, [c], kernel=kern)
        bis = critical_value_bisection(model, grid, [c], tol=1e-3, kernel=kern)
        assert abs(bis - sol.alpha) < 5e-3


def test_pendulum_alpha_large_class_growth(pendulum):
    grid = make_grid(pendulum, 128, 0.05, c=3.0)
    sol = solve_weak_kam(pendulum, grid, [3.0])
    assert abs(sol.alpha - 4.5) < 0.15    # c^2/2 plus a bounded correction


def test_alpha_midpoint_convexity(pendulum):
    cs = np.linspace(-2.0, 2.0, 21)
    grid = make_grid(pendulum, 64, 0.1, c=2.0)
    alphas = np.array([solve_weak_kam(pendulum, grid, [c]).alpha for c in cs])
    defect = alphas[1:-1] - 0.5 * (alphas[:-2] + alphas[2:])
    assert defect.max() < 1e-9


def test_deterministic_from_zero(pendulum):
    grid = make_grid(pendulum, 32, 0.1, c=0.4)
    a = solve_weak_kam(pendulum, grid, [0.4])
    b = solve_weak_kam(pendulum, grid, [0.4])
    assert np.array_equal(a.u, b.u) and a.alpha == b.alpha


def test_hj_consistency_free(free_model):
    # for the free model H(q, c + Du) should reproduce alpha(c)
    from weakkam.sets import grid_gradient

    n, tau = 128, 0.1
    grid = make_grid(free_model, n, tau, c=0.6)
    sol = solve_weak_kam(free_model, grid, [0.6])
    du = grid_gradient(sol.u, n, 1)
    h_vals = free_model.hamiltonian(grid.nodes(1), 0.6 + du)
    assert np.abs(h_vals - sol.alpha).max() < 5e-3


def test_conjugate_pair_free_is_identity(free_model):
    grid = make_grid(free_model, 32, 0.1, c=0.0)
    minus = solve_weak_kam(free_model, grid, [0.0])
    minus2, plus = conjugate_pair(free_model, grid, minus)
    assert np.abs(plus.u - minus.u).max() < 1e-12
    assert plus.direction == "plus"


def test_conjugate_pair_pendulum(pendulum):
    grid = make_grid(pendulum, 128, 0.05, c=0.0)
    minus = solve_weak_kam(pendulum, grid, [0.0], tol=1e-10)
    _, plus = conjugate_pair(pendulum, grid, minus)
    gap = minus.u - plus.u
    assert gap.min() > -1e-9                      # u+ <= u- pointwise
    assert abs(gap[0]) < 1e-9                     # equality at the hilltop
    assert gap.max() > 0.5                        # strict elsewhere


def test_conjugate_requires_converged_input(pendulum):
    grid = make_grid(pendulum, 32, 0.1, c=0.0)
    bad = solve_weak_kam(pendulum, grid, [0.0], max_iters=1)
    assert not bad.converged
    with pytest.raises(ConvergenceError):
        conjugate_pair(pendulum, grid, bad)


def test_supercritical_rotational_class(pendulum):
    # rotational classes converge through the recurrence detector
    grid = make_grid(pendulum, 128, 0.05, c=2.0)
    kern = build_kernel(pendulum, grid, [2.0], quadrature="midpoint")
    sol = solve_weak_kam(pendulum, grid, [2.0], kernel=kern)
    assert sol.converged
    assert sol.residual < 1e-10
    assert 1.9 < sol.alpha < 2.3
