"""
Tests for the ddgic module.
"""

import numpy as np
import pytest

from ddgic_ns.basis import build_basis
from ddgic_ns.boundary import BoundaryConditions, FreestreamState
from ddgic_ns.ddgic import (
    BETA_TABLE,
    EdgeTrace,
    FluxCoefficients,
    ResidualAssembler,
    SolutionField,
    compute_residual,
    convective_numerical_flux,
    ddg_gradient_flux,
    interface_correction,
    residual_norm,
    variable_names,
    viscous_numerical_flux,
)
from ddgic_ns.errors import ConfigError
from ddgic_ns.gas import GasModel, NavierStokesEquations, conserved, convective_flux, viscous_flux
from ddgic_ns.mesh import INFLOW_FARFIELD, BoundaryTag
from ddgic_ns.meshgen import builtin_mesh

GAS = GasModel(mu=1e-2)
# relative free-stream residual allowed for k <= 4
FREESTREAM_ROUNDOFF = 1e-11


def _wavy_field(mesh, k, amplitude=0.05):
    basis = build_basis(mesh, k)

    def initial(x, y):
        bump = amplitude * np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y)
        return conserved(1.0 + bump, 0.5 + bump, -0.3 * bump, 20.0 + bump, GAS)

    return SolutionField.project(mesh, basis, initial, 4)


def test_flux_coefficient_table():
    """Test beta0 = (k+1)^2 and beta1 = 1/(2k(k+1)), with beta1 = 0 at k = 1."""
    for k, (beta0, beta1) in BETA_TABLE.items():
        coeff = FluxCoefficients.for_degree(k)
        assert coeff.beta0 == beta0
        assert coeff.beta1 == pytest.approx(beta1)
    assert FluxCoefficients.for_degree(1).beta1 == 0.0
    assert FluxCoefficients.for_degree(2).beta1 == pytest.approx(1.0 / 12.0)


def test_gradient_flux_of_continuous_linear_field():
    """Test that the gradient flux is exact for a continuous linear trace."""
    grad = np.array([[[1.0, -3.0]]])
    trace = EdgeTrace(np.array([[2.0]]), np.array([[2.0]]), grad, grad, np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 2, 2)))
    flux = ddg_gradient_flux(trace, np.array([0.6, 0.8]), 0.1, FluxCoefficients.for_degree(2))

    assert np.allclose(flux, [[[1.0, -3.0]]])


def test_gradient_flux_jump_terms():
    """Test the penalty and Hessian-jump contributions."""
    hp = np.zeros((1, 1, 2, 2))
    hp[0, 0, 0, 0] = 2.0
    trace = EdgeTrace(np.array([[0.0]]), np.array([[1.0]]), np.zeros((1, 1, 2)), np.zeros((1, 1, 2)),
                      np.zeros((1, 1, 2, 2)), hp)
    n = np.array([[1.0, 0.0]])

    k1 = ddg_gradient_flux(trace, n, np.array([0.5]), FluxCoefficients.for_degree(1))
    assert np.allclose(k1, [[[8.0, 0.0]]])
    k2 = ddg_gradient_flux(trace, n, np.array([0.5]), FluxCoefficients.for_degree(2))
    assert np.allclose(k2, [[[9.0 / 0.5 + 0.5 / 12.0 * 2.0, 0.0]]])


def test_lax_friedrichs_consistency():
    """Test that equal traces give the physical normal flux."""
    Q = conserved(np.array([1.0, 1.3]), np.array([0.2, -0.1]), np.array([0.0, 0.4]), np.array([2.0, 1.5]), GAS)
    n = np.array([[0.0, 1.0], [0.8, -0.6]])
    f, g = convective_flux(Q, GAS)

    flux = convective_numerical_flux(Q, Q, n, GAS)
    assert np.allclose(flux, f * n[:, 0:1] + g * n[:, 1:2])


def test_lax_friedrichs_conservative():
    """Test that swapping sides and flipping the normal negates the flux."""
    qm = conserved(1.0, 0.3, 0.1, 2.0, GAS)
    qp = conserved(1.2, 0.1, -0.2, 2.4, GAS)
    n = np.array([0.6, 0.8])

    assert np.allclose(convective_numerical_flux(qm, qp, n, GAS), -convective_numerical_flux(qp, qm, -n, GAS))


def test_viscous_flux_and_correction_vanish_for_uniform_state():
    """Test that a uniform trace produces no viscous flux and no correction."""
    Q = np.broadcast_to(conserved(1.0, 0.5, 0.2, 3.0, GAS), (3, 4))
    zeros = np.zeros((3, 4, 2))
    trace = EdgeTrace(Q, Q, zeros, zeros, np.zeros((3, 4, 2, 2)), np.zeros((3, 4, 2, 2)))
    n = np.broadcast_to([0.0, 1.0], (3, 2))

    assert np.allclose(viscous_numerical_flux(trace, n, np.full(3, 0.1), FluxCoefficients.for_degree(2), GAS), 0.0)
    assert np.allclose(interface_correction(trace, n, GAS, np.ones((3, 2))), 0.0)


@pytest.mark.parametrize('k', [1, 2, 3, 4])
def test_freestream_preservation_periodic(k):
    """Test that a uniform flow on the periodic square has zero residual up to roundoff."""
    mesh = builtin_mesh('square:0')
    basis = build_basis(mesh, k)
    q_inf = conserved(1.0, 1.0, 0.5, 17.857, GAS)
    field = SolutionField.project(mesh, basis, lambda x, y: np.broadcast_to(q_inf, np.shape(x) + (4,)), 4)

    rates = compute_residual(field, NavierStokesEquations(GAS))
    assert np.abs(rates).max() <= FREESTREAM_ROUNDOFF * np.abs(field.coefficients).max()


def test_freestream_preservation_farfield():
    """Test that a uniform flow with far-field boundaries has zero residual."""
    mesh = builtin_mesh('plate')
    tags = {name: BoundaryTag(name, INFLOW_FARFIELD) for name in mesh.tags}
    mesh = builtin_mesh('plate', tags)
    freestream = FreestreamState(1.0, 1.0, 0.0, 1.0 / (1.4 * 0.09))
    q_inf = freestream.conserved(GAS)
    basis = build_basis(mesh, 2)
    field = SolutionField.project(mesh, basis, lambda x, y: np.broadcast_to(q_inf, np.shape(x) + (4,)), 4)
    boundary = BoundaryConditions(tags, GAS, freestream)

    rates = compute_residual(field, NavierStokesEquations(GAS), boundary)
    assert np.abs(rates).max() < 1e-9


def _quadratic_state(x, y):
    """rho = 1 with linear u, v and e, so every conserved variable is at most quadratic."""
    u = 1.0 + 0.2 * x - 0.1 * y
    v = 0.3 + 0.1 * x + 0.2 * y
    e = 20.0 + x + 0.5 * y
    return conserved(np.ones_like(u), u, v, (GAS.gamma - 1.0) * e, GAS)


def _quadratic_state_gradient(x, y):
    u = 1.0 + 0.2 * x - 0.1 * y
    v = 0.3 + 0.1 * x + 0.2 * y
    grad = np.zeros(np.shape(x) + (4, 2))
    grad[..., 1, :] = [0.2, -0.1]
    grad[..., 2, :] = [0.1, 0.2]
    grad[..., 3, 0] = 1.0 + 0.2 * u + 0.1 * v
    grad[..., 3, 1] = 0.5 - 0.1 * u + 0.2 * v
    return grad


def _navier_stokes_operator(x, y, h=1e-4):
    """-div F_c + div F_v by central differences of the exact fluxes."""
    def total_flux(px, py):
        f_c, g_c = convective_flux(_quadratic_state(px, py), GAS)
        f_v, g_v = viscous_flux(_quadratic_state(px, py), _quadratic_state_gradient(px, py), GAS)
        return f_c - f_v, g_c - g_v

    dfdx = (total_flux(x + h, y)[0] - total_flux(x - h, y)[0]) / (2 * h)
    dgdy = (total_flux(x, y + h)[1] - total_flux(x, y - h)[1]) / (2 * h)
    return -(dfdx + dgdy)


def test_residual_consistent_with_smooth_operator():
    """Test that a continuous quadratic field gives the quadrature of the exact operator away from the boundary."""
    mesh = builtin_mesh('square:0')
    basis = build_basis(mesh, 2)
    field = SolutionField.project(mesh, basis, _quadratic_state, 4)

    rates = compute_residual(field, NavierStokesEquations(GAS))

    xy = basis.volume.xy
    operator = _navier_stokes_operator(xy[..., 0], xy[..., 1])
    expected = np.einsum('cq,cqv,cqb->cvb', basis.volume.weights, operator, basis.volume.phi)
    corners = mesh.vertices[mesh.cells]
    inner = np.flatnonzero(np.all((corners > 1e-9) & (corners < 1.0 - 1e-9), axis=(1, 2)))
    assert len(inner) == 18
    scale = np.abs(expected[inner]).max()
    assert scale > 1e-2
    assert np.allclose(rates[inner], expected[inner], rtol=0.0, atol=1e-6 * scale)


@pytest.mark.parametrize('k', [1, 2])
def test_periodic_residual_is_conservative(k):
    """Test that the cell-average rates sum to zero on a periodic mesh."""
    mesh = builtin_mesh('square:0')
    field = _wavy_field(mesh, k)

    rates = compute_residual(field, NavierStokesEquations(GAS))
    total_rate = (rates[:, :, 0] * np.sqrt(mesh.cell_area)[:, None]).sum(axis=0)
    assert np.abs(rates).max() > 1e-3
    assert np.allclose(total_rate, 0.0, atol=1e-11)


def test_threads_give_identical_rates():
    """Test that threaded volume assembly matches the serial result."""
    mesh = builtin_mesh('square:0')
    field = _wavy_field(mesh, 2)
    physics = NavierStokesEquations(GAS)

    serial = ResidualAssembler(mesh, field.basis, physics)(field.coefficients)
    threaded = ResidualAssembler(mesh, field.basis, physics, threads=3)(field.coefficients)
    assert np.allclose(serial, threaded, rtol=1e-14, atol=1e-14)


def test_missing_boundary_conditions():
    """Test that non-periodic edges require boundary conditions."""
    mesh = builtin_mesh('cylinder')
    basis = build_basis(mesh, 1)

    with pytest.raises(ConfigError):
        ResidualAssembler(mesh, basis, NavierStokesEquations(GAS))


def test_solution_field_helpers():
    """Test averages, totals and point evaluation of a solution field."""
    mesh = builtin_mesh('square:0')
    field = _wavy_field(mesh, 2, amplitude=0.0)

    assert np.allclose(field.cell_averages(), conserved(1.0, 0.5, 0.0, 20.0, GAS)[None])
    assert np.allclose(field.totals(), conserved(1.0, 0.5, 0.0, 20.0, GAS))
    values, grads = field.evaluate([0, 3], np.array([[0.2, 0.2]]), derivatives=True)
    assert values.shape == (2, 1, 4)
    assert np.allclose(grads, 0.0, atol=1e-12)
    assert field.copy().coefficients is not field.coefficients


def test_residual_norm_and_names():
    """Test the per-variable residual norm and variable names."""
    rates = np.zeros((2, 4, 3))
    rates[0, 1, 2] = 3.0
    rates[1, 1, 0] = 4.0

    assert np.allclose(residual_norm(rates), [0.0, 5.0, 0.0, 0.0])
    assert variable_names(NavierStokesEquations(GAS)) == ('rho', 'rhou', 'rhov', 'E')
