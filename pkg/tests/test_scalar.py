"""
Tests for the scalar module.
"""

import numpy as np
import pytest

from ddgic_ns.basis import build_basis
from ddgic_ns.ddgic import EdgeTrace, FluxCoefficients, ResidualAssembler, SolutionField
from ddgic_ns.errors import CompatibilityError, ConfigError
from ddgic_ns.meshgen import builtin_mesh
from ddgic_ns.scalar import (
    SCALAR_PROBLEMS,
    AntiderivativeAssembler,
    LinearDiffusionSystem,
    ScalarDiffusionEquation,
    ScalarDiffusionProblem,
    heat_problem,
    linear_problem,
    nonlinear_problem,
    scalar_ddg_gradient_flux,
    scalar_residual_new,
    scalar_residual_original,
)
from ddgic_ns.timestep import FINAL_TIME, TimeConfig, TimeIntegrator

ANISOTROPIC = np.array([[1.0, 0.3], [0.3, 0.5]])


def _field(problem, k, level=0):
    mesh = builtin_mesh(f'square:{level}')
    basis = build_basis(mesh, k)
    return SolutionField.project(mesh, basis, lambda x, y: problem.initial(x, y)[..., None], 1)


@pytest.mark.parametrize('k', [1, 2, 3])
def test_linear_schemes_coincide(k):
    """Test that both scalar schemes give the same rates for a constant matrix."""
    problem = linear_problem(ANISOTROPIC)
    field = _field(problem, k)

    new = scalar_residual_new(field, problem)
    original = scalar_residual_original(field, problem)
    assert np.abs(new - original).max() <= 1e-13 * max(1.0, np.abs(new).max())


def test_linear_schemes_coincide_on_random_fields():
    """Test the equivalence on random modal coefficients, discontinuities included."""
    problem = linear_problem(ANISOTROPIC)
    field = _field(problem, 2)
    rng = np.random.default_rng(11)
    new_assembler = ResidualAssembler(field.mesh, field.basis, ScalarDiffusionEquation(problem))
    original_assembler = AntiderivativeAssembler(field.mesh, field.basis, problem)

    for _ in range(20):
        coeffs = rng.normal(size=field.coefficients.shape)
        new = new_assembler(coeffs)
        original = original_assembler(coeffs)
        assert np.abs(new - original).max() <= 1e-13 * np.abs(new).max()


def test_nonlinear_schemes_differ_but_conserve():
    """Test that the nonlinear schemes differ and both conserve the total."""
    problem = nonlinear_problem()
    field = _field(problem, 2)
    area = np.sqrt(field.mesh.cell_area)

    new = scalar_residual_new(field, problem)
    original = scalar_residual_original(field, problem)
    assert np.abs(new - original).max() > 1e-8
    assert abs((new[:, 0, 0] * area).sum()) < 1e-10
    assert abs((original[:, 0, 0] * area).sum()) < 1e-10


def test_heat_equation_decay():
    """Test the decaying sine mode of the heat equation against its exact solution."""
    problem = heat_problem()
    field = _field(problem, 2, level=1)
    assembler = ResidualAssembler(field.mesh, field.basis, ScalarDiffusionEquation(problem))
    final_time = 0.005

    final, _ = TimeIntegrator(assembler, TimeConfig(cfl=0.1, final_time=final_time)).run(field, FINAL_TIME)
    xy = final.basis.volume.xy
    exact = problem.exact(xy[..., 0], xy[..., 1], final_time)
    error = np.sqrt(np.sum(final.basis.volume.weights * (final.volume_values()[..., 0] - exact) ** 2))
    assert error < 1e-2
    assert np.abs(final.volume_values()).max() < np.abs(field.volume_values()).max()


def test_linear_system_matches_scalar_equation():
    """Test that every component of the decoupled system evolves like the scalar equation."""
    problem = linear_problem(ANISOTROPIC)
    field = _field(problem, 2)
    system_coeffs = np.repeat(field.coefficients, 4, axis=1)

    scalar = ResidualAssembler(field.mesh, field.basis, ScalarDiffusionEquation(problem))(field.coefficients)
    system = ResidualAssembler(field.mesh, field.basis, LinearDiffusionSystem(ANISOTROPIC))(system_coeffs)
    for v in range(4):
        assert np.allclose(system[:, v], scalar[:, 0], atol=1e-13)


def test_scalar_gradient_flux():
    """Test the scalar wrapper of the DDG gradient flux."""
    trace = EdgeTrace(np.array([0.0]), np.array([2.0]), np.zeros((1, 2)), np.array([[2.0, 0.0]]),
                      np.zeros((1, 2, 2)), np.zeros((1, 2, 2)))
    flux = scalar_ddg_gradient_flux(trace, np.array([[0.0, 1.0]]), np.array([0.5]), FluxCoefficients.for_degree(1))

    assert np.allclose(flux, [[1.0, 4.0 / 0.5 * 2.0]])


def test_missing_antiderivative():
    """Test that the antiderivative scheme needs b(u)."""
    problem = ScalarDiffusionProblem('plain', heat_problem().diffusion, heat_problem().initial)
    field = _field(problem, 1)

    with pytest.raises(CompatibilityError):
        AntiderivativeAssembler(field.mesh, field.basis, problem)


def test_positive_definite_check():
    """Test rejection of an indefinite diffusion matrix."""
    problem = linear_problem(np.array([[1.0, 0.0], [0.0, -0.1]]))

    with pytest.raises(ConfigError):
        problem.check_positive_definite(np.linspace(-1.0, 1.0, 5))
    nonlinear_problem().check_positive_definite(np.linspace(-2.0, 2.0, 9))


def test_scalar_equation_scales():
    """Test the time-step scales of the scalar equation."""
    physics = ScalarDiffusionEquation(nonlinear_problem())
    speed, diffusivity = physics.time_step_scales(np.array([[0.0], [2.0]]))

    assert np.allclose(speed, 0.0)
    assert np.allclose(diffusivity, [1.0, 5.0])
    assert set(SCALAR_PROBLEMS) == {'heat', 'nonlinear'}
