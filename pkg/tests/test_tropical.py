import numpy as np
import pytest

from weakkam import GridSpec, build_kernel, mp_closure, mp_identity, mp_power, mp_product
from weakkam.tropical import INF


def naive_product(a, b):
    n, k = a.shape
    m = b.shape[1]
    out = np.full((n, m), INF)
    for i in range(n):
        for j in range(m):
            best = INF
            for l in range(k):
                best = min(best, a[i, l] + b[l, j])
            out[i, j] = best
    return out


def test_identity_is_neutral(rng):
    a = rng.integers(-5, 10, size=(5, 5)).astype(float)
    eye = mp_identity(5)
    assert np.array_equal(mp_product(a, eye), a)
    assert np.array_equal(mp_product(eye, a), a)


def test_product_hand_example():
    a = np.array([[0.0, 1.0], [INF, 0.0]])
    b = np.array([[0.0, INF], [2.0, 0.0]])
    assert np.array_equal(mp_product(a, b), np.array([[0.0, 1.0], [2.0, 0.0]]))


def test_product_matches_naive_oracle(rng):
    for _ in range(5):
        a = rng.integers(-4, 12, size=(3, 3)).astype(float)
        b = rng.integers(-4, 12, size=(3, 3)).astype(float)
        a[rng.random((3, 3)) < 0.2] = INF
        assert np.array_equal(mp_product(a, b), naive_product(a, b))


def test_product_associative_on_integers(rng):
    a, b, c = (rng.integers(-6, 15, size=(6, 6)).astype(float) for _ in range(3))
    left = mp_product(mp_product(a, b), c)
    right = mp_product(a, mp_product(b, c))
    assert np.array_equal(left, right)


def test_product_shape_mismatch():
    with pytest.raises(ValueError):
        mp_product(np.zeros((2, 3)), np.zeros((2, 3)))


def test_power_one_is_input(rng):
    a = rng.normal(size=(4, 4))
    assert np.array_equal(mp_power(a, 1), a)


def test_power_squaring_matches_sequential(rng):
    a = rng.integers(-3, 9, size=(8, 8)).astype(float)
    seq = a.copy()
    for _ in range(5):
        seq = mp_product(seq, a)
    assert np.array_equal(mp_power(a, 6), seq)


def test_power_zero_diagonal_monotone(rng):
    a = rng.integers(0, 9, size=(6, 6)).astype(float)
    np.fill_diagonal(a, 0.0)
    prev = np.diag(mp_power(a, 1)).copy()
    for m in (2, 3, 5, 8):
        cur = np.diag(mp_power(a, m))
        assert (cur <= prev + 1e-15).all()
        prev = cur


def test_blocked_product_matches_plain(rng):
    import weakkam.tropical as trop

    a = rng.normal(size=(40, 40))
    plain = mp_product(a, a)
    old = trop._BLOCK_ENTRIES
    try:
        trop._BLOCK_ENTRIES = 40 * 40 * 3
        blocked = mp_product(a, a)
    finally:
        trop._BLOCK_ENTRIES = old
    assert np.array_equal(plain, blocked)


def test_closure_already_stable():
    a = np.array([[0.0, 1.0], [1.0, 0.0]])
    res = mp_closure(a, window=4, tol=1e-12)
    assert res.converged and not res.diverged
    assert np.array_equal(res.barrier, a)
    assert np.array_equal(res.mane, a)


def test_closure_flags_negative_cycle():
    a = np.array([[-0.1, 1.0], [1.0, 0.5]])
    res = mp_closure(a, window=4, tol=1e-9, max_doublings=24)
    assert res.diverged


def test_closure_free_barrier_vanishes(free_model):
    grid = GridSpec(n=64, tau=1.0, v_max=1.2)
    kern = build_kernel(free_model, grid, [0.0])
    res = mp_closure(kern.cost, window=16, tol=1e-9)
    assert res.converged
    assert np.abs(res.barrier).max() < 5e-3
    assert np.abs(res.mane).max() < 5e-3


def test_mane_below_barrier_and_inequalities(pendulum):
    from weakkam.solver import make_grid, barrier_tables

    grid = make_grid(pendulum, 32, 0.1, c=0.0)
    res, alpha, _ = barrier_tables(pendulum, grid, [0.0])
    m, h = res.mane, res.barrier
    assert (m <= h + 1e-12).all()
    assert (m - mp_product(m, m)).max() < 1e-9          # triangle inequality
    assert (h - mp_product(h, h)).max() < 1e-9
    assert (m + m.T).min() > -1e-9                       # symmetrized nonnegativity
    assert (h + h.T).min() > -1e-9
    assert np.diag(h).min() > -1e-12


def test_window_oscillation_shrinks(pendulum):
    from weakkam.solver import make_grid, barrier_tables

    grid = make_grid(pendulum, 32, 0.1, c=0.0)
    res_small, _, _ = barrier_tables(pendulum, grid, [0.0], window=8)
    res_large, _, _ = barrier_tables(pendulum, grid, [0.0], window=16)
    assert res_large.oscillation <= res_small.oscillation + 1e-9
