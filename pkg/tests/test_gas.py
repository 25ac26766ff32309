"""
Tests for the gas module.
"""

import numpy as np
import pytest

from ddgic_ns.errors import CompatibilityError, ConfigError, InadmissibleStateError
from ddgic_ns.gas import (
    GasModel,
    NavierStokesEquations,
    antiderivative_matrix,
    conserved,
    convective_flux,
    diffusion_matrices,
    diffusion_matrix,
    direction_vector,
    direction_vectors,
    primitives,
    viscous_flux,
)


def _random_states(rng, n, gas):
    rho = rng.uniform(0.5, 2.0, n)
    u = rng.uniform(-1.0, 1.0, n)
    v = rng.uniform(-1.0, 1.0, n)
    p = rng.uniform(0.5, 3.0, n)
    return conserved(rho, u, v, p, gas)


@pytest.mark.parametrize('viscosity', ['constant', 'sutherland'])
def test_viscous_flux_decomposition(viscosity):
    """Test that sum_m A^(lm) grad Q^(m) reproduces the viscous flux."""
    rng = np.random.default_rng(3)
    gas = GasModel(viscosity=viscosity, mu=2e-2, mu_ref=2e-2, t_ref=1.5, cv=1.7)
    Q = _random_states(rng, 50, gas)
    gradQ = rng.normal(size=(50, 4, 2))

    fv, gv = viscous_flux(Q, gradQ, gas)
    A = diffusion_matrices(Q, gas)
    split = np.einsum('nlmij,nmj->nli', A, gradQ)

    assert np.allclose(split[..., 0], fv, rtol=1e-12, atol=1e-14)
    assert np.allclose(split[..., 1], gv, rtol=1e-12, atol=1e-14)


def test_continuity_has_no_diffusion():
    """Test that A^(1m) vanishes and the momentum rows ignore grad E."""
    gas = GasModel(mu=1e-2)
    Q = _random_states(np.random.default_rng(0), 5, gas)
    A = diffusion_matrices(Q, gas)

    assert np.all(A[:, 0] == 0.0)
    assert np.all(A[:, 1:3, 3] == 0.0)


def test_single_matrix_and_direction_vector():
    """Test the 1-based accessors against the stacked arrays."""
    gas = GasModel(mu=1e-2)
    Q = _random_states(np.random.default_rng(1), 4, gas)
    n = np.array([0.6, 0.8])
    xi = direction_vectors(Q, np.broadcast_to(n, (4, 2)), gas)

    assert np.array_equal(diffusion_matrix(4, 2, Q, gas), diffusion_matrices(Q, gas)[:, 3, 1])
    assert np.allclose(direction_vector(4, 2, Q, n, gas), xi[:, 3, 1])
    assert np.allclose(xi[:, 3, 1], np.einsum('nij,i->nj', diffusion_matrix(4, 2, Q, gas), n))
    with pytest.raises(IndexError):
        diffusion_matrix(0, 1, Q, gas)


@pytest.mark.parametrize('l', [2, 3])
def test_antiderivative_jacobian(l):
    """Test that dB^(l)/dQ_m equals A^(lm) by central differences."""
    gas = GasModel(mu=3e-2)
    Q = _random_states(np.random.default_rng(l), 6, gas)
    A = diffusion_matrices(Q, gas)
    step = 1e-6

    for m in range(4):
        dq = np.zeros(4)
        dq[m] = step
        jac = (antiderivative_matrix(l, Q + dq, gas) - antiderivative_matrix(l, Q - dq, gas)) / (2 * step)
        assert np.allclose(jac, A[:, l - 1, m], rtol=1e-7, atol=1e-9)


def test_no_antiderivative_for_continuity_or_energy():
    """Test that the continuity and energy equations have no antiderivative matrix."""
    gas = GasModel(mu=1e-2)
    Q = _random_states(np.random.default_rng(2), 3, gas)

    with pytest.raises(CompatibilityError):
        antiderivative_matrix(4, Q, gas)
    with pytest.raises(CompatibilityError):
        antiderivative_matrix(1, Q, gas)
    with pytest.raises(CompatibilityError):
        antiderivative_matrix(2, Q, GasModel(viscosity='sutherland', mu_ref=1e-2))


def test_primitives_and_convective_flux():
    """Test primitives and the Euler flux of a known state."""
    gas = GasModel(gamma=1.4)
    Q = conserved(2.0, 3.0, -1.0, 5.0, gas)
    w = primitives(Q, gas)

    assert w.u == pytest.approx(3.0)
    assert w.v == pytest.approx(-1.0)
    assert w.p == pytest.approx(5.0)
    assert w.a == pytest.approx(np.sqrt(1.4 * 5.0 / 2.0))
    f, g = convective_flux(Q, gas)
    E = 5.0 / 0.4 + 0.5 * 2.0 * 10.0
    assert np.allclose(f, [6.0, 18.0 + 5.0, -6.0, 3.0 * (E + 5.0)])
    assert np.allclose(g, [-2.0, -6.0, 2.0 + 5.0, -(E + 5.0)])


def test_inadmissible_state_is_located():
    """Test that a negative density names the cell and point."""
    gas = GasModel()
    Q = np.broadcast_to(conserved(1.0, 0.0, 0.0, 1.0, gas), (3, 4, 4)).copy()
    Q[2, 1, 0] = -0.1

    with pytest.raises(InadmissibleStateError) as excinfo:
        primitives(Q, gas, cells=[10, 11, 12])
    assert excinfo.value.cell == 12
    assert excinfo.value.point == 1
    assert excinfo.value.variable == 'rho'

    Q[2, 1, 0] = 1.0
    Q[0, 3, 3] = -1.0
    with pytest.raises(InadmissibleStateError) as excinfo:
        primitives(Q, gas)
    assert excinfo.value.variable == 'e'
    assert excinfo.value.cell == 0


def test_sutherland_law():
    """Test that mu(T_ref) = mu_ref and viscosity grows with temperature."""
    gas = GasModel(viscosity='sutherland', mu_ref=1e-3, t_ref=288.15)

    assert gas.dynamic_viscosity(288.15) == pytest.approx(1e-3)
    assert gas.dynamic_viscosity(400.0) > gas.dynamic_viscosity(300.0)
    assert GasModel(mu=0.5).dynamic_viscosity(np.ones(3)).tolist() == [0.5, 0.5, 0.5]


def test_gas_model_validation():
    """Test rejection of unphysical gas parameters."""
    with pytest.raises(ConfigError):
        GasModel(gamma=1.0)
    with pytest.raises(ConfigError):
        GasModel(prandtl=0.0)
    with pytest.raises(ConfigError):
        GasModel(viscosity='power')


def test_navier_stokes_flux_and_scales():
    """Test the physics adapter on a uniform state."""
    gas = GasModel(mu=0.1)
    physics = NavierStokesEquations(gas)
    Q = np.broadcast_to(conserved(1.0, 2.0, 0.0, 1.0, gas), (2, 3, 4))
    flux = physics.flux(Q, np.zeros((2, 3, 4, 2)))
    f, g = convective_flux(Q, gas)

    assert flux.shape == (2, 3, 4, 2)
    assert np.allclose(flux[..., 0], f)
    assert np.allclose(flux[..., 1], g)
    speed, diffusivity = physics.time_step_scales(Q)
    assert np.allclose(speed, 2.0 + np.sqrt(1.4))
    assert np.allclose(diffusivity, 0.1)
    assert NavierStokesEquations(gas, viscous=False).direction_vectors(Q[0], np.ones((3, 2))) is None
