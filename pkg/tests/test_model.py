import numpy as np
import pytest

from weakkam import LagrangianModel, el_flow, torus_distance, wrap
from weakkam.model import ModelError


def test_wrap_canonical_range(rng):
    q = rng.normal(size=(50, 1)) * 10
    w = wrap(q)
    assert (w >= 0).all() and (w < 1).all()


def test_torus_metric_axioms(rng):
    for _ in range(200):
        x, y, z = rng.random(3)
        dxy = torus_distance([x], [y])
        assert dxy == pytest.approx(torus_distance([y], [x]))
        assert torus_distance([x], [x]) == 0.0
        assert dxy <= torus_distance([x], [z]) + torus_distance([z], [y]) + 1e-12
        assert dxy <= 0.5 + 1e-12


def test_legendre_trivials(free_model, pendulum):
    assert free_model.legendre([0.3], [0.7]) == pytest.approx([0.7])
    aniso = LagrangianModel.from_spec(
        {"catalog": "anisotropic-kinetic", "dimension": 1, "potential": [], "kinetic": [[2.0]]}
    )
    assert aniso.legendre([0.0], [0.5]) == pytest.approx([1.0])
    assert aniso.legendre_inverse([0.0], [1.0]) == pytest.approx([0.5])
    # the potential never enters dL/dv
    assert pendulum.legendre([0.25], [-0.3]) == pytest.approx([-0.3])
    assert free_model.legendre_inverse([0.1], [1.2]) == pytest.approx([1.2])


def test_legendre_round_trip(aniso_2d, rng):
    q = rng.random((100, 2))
    p = rng.normal(size=(100, 2))
    back = aniso_2d.legendre(q, aniso_2d.legendre_inverse(q, p))
    assert np.abs(back - p).max() < 1e-12


def test_hamiltonian_values(free_model, pendulum):
    assert free_model.hamiltonian([0.0], [0.8]) == pytest.approx(0.32)
    assert pendulum.hamiltonian([0.0], [0.0]) == pytest.approx(1.0)
    assert pendulum.hamiltonian([0.5], [0.0]) == pytest.approx(-1.0)


def test_fiber_hessian_positive_definite(aniso_2d, rng):
    qs = rng.random((32, 2))
    vs = rng.normal(size=(32, 2)) * 3
    for q, v in zip(qs, vs):
        eig = np.linalg.eigvalsh(aniso_2d.fiber_hessian(q, v))
        assert eig.min() >= 1.0 - 1e-12


def test_superlinearity_witness(pendulum, rng):
    lam_min, _ = pendulum.kinetic_eig_range()
    _, u_max = pendulum.potential_bounds()
    q = rng.random((64, 1))
    v = rng.normal(size=(64, 1)) * 5
    lower = 0.5 * lam_min * (v ** 2).sum(axis=1) - abs(u_max)
    assert (pendulum.lagrangian(q, v) >= lower - 1e-12).all()


def test_model_spec_rejects_unknown_keys():
    with pytest.raises(ModelError, match="unknown model key"):
        LagrangianModel.from_spec(
            {"catalog": "free", "dimension": 1, "potential": [], "kinetic": None, "mass": 2.0}
        )
    with pytest.raises(ModelError):
        LagrangianModel.from_spec({"catalog": "nope", "dimension": 1})
    with pytest.raises(ModelError):
        LagrangianModel.from_spec(
            {"catalog": "two-harmonic-mechanical", "dimension": 1, "potential": [{"k": [1], "a": 1.0}]}
        )
    with pytest.raises(ModelError):
        LagrangianModel.from_spec(
            {"catalog": "anisotropic-kinetic", "dimension": 1, "potential": [], "kinetic": [[-1.0]]}
        )


def test_spec_round_trip(two_harmonic):
    again = LagrangianModel.from_spec(two_harmonic.to_spec())
    assert again.to_spec() == two_harmonic.to_spec()


def test_flow_free_straight_line(free_model):
    out = el_flow(free_model, [0.1], [0.5], t=1.0, dt=1e-3)
    assert out.q[-1] == pytest.approx([0.6], abs=1e-12)
    assert out.p[-1] == pytest.approx([0.5], abs=1e-15)


def test_flow_pendulum_equilibrium(pendulum):
    out = el_flow(pendulum, [0.5], [0.0], t=5.0, dt=1e-2)
    assert np.abs(out.q - 0.5).max() < 1e-14
    assert np.abs(out.p).max() < 1e-14


def test_flow_energy_drift_short(pendulum):
    out = el_flow(pendulum, [0.25], [0.7], t=10.0, dt=1e-3)
    h = pendulum.hamiltonian(out.q, out.p)
    assert np.abs(h - h[0]).max() < 1e-6


def test_flow_energy_drift_long(pendulum):
    out = el_flow(pendulum, [0.15], [1.1], t=100.0, dt=1e-3)
    h = pendulum.hamiltonian(out.q, out.p)
    assert np.abs(h - h[0]).max() < 1e-5


def test_flow_rejects_bad_steps(free_model):
    with pytest.raises(ValueError):
        el_flow(free_model, [0.0], [0.1], t=-1.0, dt=0.1)
    with pytest.raises(ValueError):
        el_flow(free_model, [0.0], [0.1], t=1.0, dt=0.0)
    with pytest.raises(ValueError):
        el_flow(free_model, [0.0], [0.1], t=1.0, dt=2.0)


def test_flow_batch_matches_single(pendulum):
    q0 = np.array([[0.1], [0.3]])
    p0 = np.array([[0.4], [-0.2]])
    batch = el_flow(pendulum, q0, p0, t=2.0, dt=1e-2)
    single = el_flow(pendulum, [0.3], [-0.2], t=2.0, dt=1e-2)
    assert np.abs(batch.q[:, 1, :] - single.q).max() < 1e-14
