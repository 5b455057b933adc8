import itertools

import numpy as np
import pytest

from weakkam import GridSpec, build_kernel, finite_horizon, recover_path
from weakkam.kernel import KernelError, UnreachableError, default_v_max, path_cost
from weakkam.tropical import INF


def test_grid_validation():
    with pytest.raises(KernelError):
        GridSpec(n=4, tau=0.1, v_max=1.0)
    with pytest.raises(KernelError):
        GridSpec(n=16, tau=-0.1, v_max=1.0)
    with pytest.raises(KernelError):
        GridSpec(n=16, tau=0.01, v_max=1.0)   # cannot reach past neighbors
    GridSpec(n=16, tau=0.5, v_max=1.0)


def test_free_kernel_diagonal_zero(free_model):
    grid = GridSpec(n=16, tau=0.1, v_max=2.0)
    kern = build_kernel(free_model, grid, [0.0])
    assert np.abs(np.diag(kern.cost)).max() == 0.0


def test_free_kernel_adjacent_cost(free_model):
    n, tau = 16, 0.1
    kern = build_kernel(free_model, GridSpec(n=n, tau=tau, v_max=2.0), [0.0])
    expected = 1.0 / (2.0 * n * n * tau)
    assert kern.cost[0, 1] == pytest.approx(expected, rel=1e-14)
    assert kern.cost[3, 2] == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("tau", [0.1, 0.4, 1.0, 2.0])
def test_free_kernel_winding_lifts_hand_oracle(free_model, tau):
    # x = y with lifts {-1, 0, +1} admissible: cost is the best of
    # 0, 1/(2 tau) - 1 and 1/(2 tau) + 1
    n = 16
    kern = build_kernel(free_model, GridSpec(n=n, tau=tau, v_max=1.0 / tau), [1.0])
    expected = min(0.0, 1.0 / (2.0 * tau) - 1.0, 1.0 / (2.0 * tau) + 1.0)
    assert kern.cost[0, 0] == pytest.approx(expected, abs=1e-14)


def test_diagonal_zero_lift_is_class_independent(pendulum):
    grid = GridSpec(n=16, tau=0.2, v_max=1.0)   # reach < 1: no winding lifts
    k0 = build_kernel(pendulum, grid, [0.0])
    k1 = build_kernel(pendulum, grid, [0.8])
    assert np.array_equal(np.diag(k0.cost), np.diag(k1.cost))


def test_class_shift_bound(pendulum, rng):
    grid = GridSpec(n=16, tau=0.2, v_max=2.0)
    c0, c1 = np.array([0.2]), np.array([0.5])
    k0 = build_kernel(pendulum, grid, c0)
    k1 = build_kernel(pendulum, grid, c1)
    disp = k0.lift.astype(float)[..., 0] / grid.n
    # the c1 kernel minimizes over lifts, so it is at most the c0 choice re-priced
    bound = k0.cost - (c1 - c0)[0] * disp
    assert (k1.cost <= bound + 1e-12).all()


def test_kernel_deterministic_tie_break(free_model):
    # with c = 0 and tau = 1, lifts -1 and +1 tie on cost at distance-8 pairs
    # (n = 16); the lexicographically smaller lift must win
    grid = GridSpec(n=16, tau=1.0, v_max=1.2)
    kern = build_kernel(free_model, grid, [0.0])
    assert kern.lift[0, 8, 0] == -8


def test_finite_horizon_one_step_is_kernel(free_model):
    grid = GridSpec(n=16, tau=0.25, v_max=2.0)
    kern = build_kernel(free_model, grid, [0.0], alpha_shift=0.3)
    fha = finite_horizon(kern, 1)
    assert np.array_equal(fha.table, kern.cost + 0.3 * grid.tau)


def test_finite_horizon_free_diag_zero(free_model):
    grid = GridSpec(n=16, tau=0.25, v_max=2.0)
    kern = build_kernel(free_model, grid, [0.0])
    for m in (1, 2, 5):
        assert np.abs(np.diag(finite_horizon(kern, m).table)).max() == 0.0


def enumerate_paths_cost(a, m):
    """Exhaustive m-step minimum, summing costs in path order."""
    n = a.shape[0]
    out = np.full((n, n), INF)
    for x in range(n):
        for inner in itertools.product(range(n), repeat=m - 1):
            seq = (x,) + inner
            total = 0.0
            for i in range(m - 1):
                total = total + a[seq[i], seq[i + 1]]
            for y in range(n):
                val = total + a[seq[-1], y]
                if val < out[x, y]:
                    out[x, y] = val
    return out


@pytest.mark.parametrize("n,m", [(8, 2), (8, 3), (8, 4), (12, 3)])
def test_dp_equals_exhaustive_enumeration(free_model, pendulum, n, m):
    for model, tau in ((free_model, 0.25), (pendulum, 0.5)):
        grid = GridSpec(n=n, tau=tau, v_max=2.5 / (n * tau))
        kern = build_kernel(model, grid, [0.0], alpha_shift=0.125)
        fha = finite_horizon(kern, m)
        brute = enumerate_paths_cost(kern.normalized(), m)
        assert np.array_equal(fha.table, brute)


def test_concatenation_inequality(pendulum):
    grid = GridSpec(n=16, tau=0.2, v_max=2.0)
    kern = build_kernel(pendulum, grid, [0.3], alpha_shift=1.0)
    t2 = finite_horizon(kern, 2).table
    t3 = finite_horizon(kern, 3).table
    t5 = finite_horizon(kern, 5).table
    combo = (t2[:, :, None] + t3[None, :, :]).min(axis=1)
    assert (t5 <= combo + 1e-12).all()


def test_recover_path_resums_table(pendulum):
    grid = GridSpec(n=16, tau=0.2, v_max=2.0)
    kern = build_kernel(pendulum, grid, [0.4], alpha_shift=0.9)
    m = 4
    fha = finite_horizon(kern, m)
    for (x, y) in ((0, 5), (3, 3), (7, 12)):
        nodes, vels = recover_path(fha, x, y)
        assert len(nodes) == m + 1
        assert nodes[0] == x and nodes[-1] == y
        assert path_cost(kern, nodes) == pytest.approx(fha.table[x, y], abs=1e-10)
        assert vels.shape == (m, 1)


def test_recover_path_constant_at_hilltop(pendulum):
    # with the normalization at the potential maximum, waiting there is free
    grid = GridSpec(n=16, tau=0.2, v_max=2.0)
    kern = build_kernel(pendulum, grid, [0.0], alpha_shift=1.0)
    fha = finite_horizon(kern, 3)
    nodes, vels = recover_path(fha, 0, 0)
    assert (nodes == 0).all()
    assert np.abs(vels).max() == 0.0
    assert fha.table[0, 0] == pytest.approx(0.0, abs=1e-14)


def test_unreachable_raises(free_model):
    grid = GridSpec(n=16, tau=0.1, v_max=1.5)   # reach is 2 nodes per step
    kern = build_kernel(free_model, grid, [0.0])
    assert kern.cost[0, 8] == INF
    fha = finite_horizon(kern, 1)
    with pytest.raises(UnreachableError):
        recover_path(fha, 0, 8)


def test_diagonal_drift_tracks_alpha_shift(free_model):
    grid = GridSpec(n=32, tau=0.25, v_max=1.5)
    for shift, slope in ((0.0, 0.0), (0.1, 0.1), (-0.1, -0.1)):
        kern = build_kernel(free_model, grid, [0.0], alpha_shift=shift)
        mins = []
        for m in (2, 4, 8):
            mins.append(np.diag(finite_horizon(kern, m, track_paths=False).table).min())
        for m, value in zip((2, 4, 8), mins):
            assert value == pytest.approx(slope * m * grid.tau, abs=1e-12)


def test_default_v_max_never_saturates(pendulum):
    n, tau = 64, 0.1
    for c in (0.0, 1.0, 2.5):
        v = default_v_max(pendulum, [c], n, tau)
        kern = build_kernel(pendulum, GridSpec(n=n, tau=tau, v_max=v), [c])
        assert not kern.saturated


def test_2d_kernel_shapes(aniso_2d):
    grid = GridSpec(n=8, tau=0.25, v_max=1.5)
    kern = build_kernel(aniso_2d, grid, [0.1, -0.2])
    assert kern.cost.shape == (64, 64)
    assert kern.lift.shape == (64, 64, 2)
    assert np.isfinite(np.diag(kern.cost)).all()
    # anisotropic diagonal: staying put costs tau * (-U)
    nodes = grid.nodes(2)
    expect = grid.tau * (-aniso_2d.potential(nodes))
    assert np.abs(np.diag(kern.cost) - expect).max() < 1e-14
