"""
Tests for the timestep module.
"""

import math

import numpy as np
import pytest

from ddgic_ns.basis import build_basis
from ddgic_ns.ddgic import ResidualAssembler, SolutionField
from ddgic_ns.errors import ConfigError, InadmissibleStateError
from ddgic_ns.gas import GasModel, NavierStokesEquations, conserved
from ddgic_ns.meshgen import builtin_mesh
from ddgic_ns.scalar import ScalarDiffusionEquation, heat_problem
from ddgic_ns.timestep import FINAL_TIME, STEADY, TimeConfig, TimeIntegrator, compute_dt, ssp_rk3_step

GAS = GasModel(mu=1e-2)


def _uniform(mesh, k, state):
    basis = build_basis(mesh, k)
    return SolutionField.project(mesh, basis, lambda x, y: np.broadcast_to(state, np.shape(x) + (4,)), 4)


def test_ssp_rk3_linear_amplification():
    """Test the RK3 stability polynomial 1 + z + z^2/2 + z^3/6."""
    lam = -2.0
    dt = 0.1
    u = ssp_rk3_step(np.array([1.0]), dt, lambda v, t: lam * v)
    z = lam * dt

    assert u[0] == pytest.approx(1.0 + z + z * z / 2.0 + z ** 3 / 6.0, rel=1e-14)


def test_ssp_rk3_stage_times():
    """Test that du/dt = t^2 is integrated exactly over one step."""
    dt = 0.3
    u = ssp_rk3_step(np.array([0.0]), dt, lambda v, t: np.array([t * t]), t=1.0)

    assert u[0] == pytest.approx(((1.0 + dt) ** 3 - 1.0) / 3.0, rel=1e-13)


def test_ssp_rk3_reports_failing_stage():
    """Test that a failure inside a stage is tagged with its index."""
    calls = []

    def operator(v, t):
        calls.append(t)
        if len(calls) == 2:
            raise InadmissibleStateError("Nonpositive density", cell=3)
        return -v

    with pytest.raises(InadmissibleStateError) as excinfo:
        ssp_rk3_step(np.ones(2), 0.1, operator)
    assert excinfo.value.stage == 2
    assert excinfo.value.cell == 3


def test_compute_dt_convective_limit():
    """Test dt = safety * omega * cfl * h / (|u| + a) for an inviscid uniform state."""
    mesh = builtin_mesh('square:0')
    field = _uniform(mesh, 2, conserved(1.0, 0.6, 0.8, 1.0 / 1.4, GAS))
    physics = NavierStokesEquations(GasModel(mu=0.0))
    omega = field.basis.rules.omega

    dt = compute_dt(field, physics, omega, cfl=0.2, dt_safety=0.9)
    assert dt == pytest.approx(0.9 * omega * 0.2 * mesh.h_min / 2.0)


def test_compute_dt_diffusive_limit():
    """Test the mu / h^2 limit dominating at large viscosity."""
    mesh = builtin_mesh('square:0')
    field = _uniform(mesh, 1, conserved(1.0, 0.0, 0.0, 1.0, GAS))
    physics = NavierStokesEquations(GasModel(mu=10.0))

    dt = compute_dt(field, physics, 0.5, cfl=0.1, dt_safety=1.0)
    assert dt == pytest.approx(0.5 * 0.1 * mesh.h_min ** 2 / 10.0)


def test_final_time_is_hit_exactly():
    """Test that a final-time run stops exactly at T."""
    mesh = builtin_mesh('square:0')
    problem = heat_problem()
    basis = build_basis(mesh, 1)
    field = SolutionField.project(mesh, basis, lambda x, y: problem.initial(x, y)[..., None], 1)
    assembler = ResidualAssembler(mesh, basis, ScalarDiffusionEquation(problem))

    final, history = TimeIntegrator(assembler, TimeConfig(cfl=0.1, final_time=1e-3)).run(field, FINAL_TIME)
    assert final.time == 1e-3
    assert history.times[-1] == 1e-3
    assert history.converged
    assert history.as_array().shape == (len(history.steps), 4)
    assert field.time == 0.0


def test_steady_mode_stops_on_residual():
    """Test that a uniform flow is steady from the first step."""
    mesh = builtin_mesh('square:0')
    field = _uniform(mesh, 1, conserved(1.0, 1.0, 0.0, 10.0, GAS))
    assembler = ResidualAssembler(mesh, field.basis, NavierStokesEquations(GAS))

    final, history = TimeIntegrator(assembler, TimeConfig(steady_tol=1e-8)).run(field, STEADY)
    assert history.converged
    assert history.steps == []
    assert np.allclose(final.coefficients, field.coefficients)


def test_max_steps_and_monitor():
    """Test the step limit and that monitor records are kept."""
    mesh = builtin_mesh('square:0')
    field = _uniform(mesh, 1, conserved(1.0, 1.0, 0.0, 10.0, GAS))
    assembler = ResidualAssembler(mesh, field.basis, NavierStokesEquations(GAS))
    config = TimeConfig(final_time=1.0, max_steps=4, record_every=2)

    _, history = TimeIntegrator(assembler, config).run(field, FINAL_TIME, lambda step, f: {'step': step})
    assert len(history.steps) == 4
    assert not history.converged
    assert 'max_steps' in history.reason
    assert [r['step'] for r in history.records] == [2, 4]


def test_mode_requirements():
    """Test that each mode needs its stopping parameter."""
    mesh = builtin_mesh('square:0')
    field = _uniform(mesh, 1, conserved(1.0, 1.0, 0.0, 10.0, GAS))
    assembler = ResidualAssembler(mesh, field.basis, NavierStokesEquations(GAS))

    with pytest.raises(ConfigError):
        TimeIntegrator(assembler, TimeConfig()).run(field, FINAL_TIME)
    with pytest.raises(ConfigError):
        TimeIntegrator(assembler, TimeConfig()).run(field, STEADY)
    with pytest.raises(ConfigError):
        TimeIntegrator(assembler, TimeConfig(final_time=1.0)).run(field, 'forever')


def test_time_config_validation():
    """Test rejection of invalid step parameters."""
    with pytest.raises(ConfigError):
        TimeConfig(cfl=0.0)
    with pytest.raises(ConfigError):
        TimeConfig(dt_safety=1.5)
    with pytest.raises(ConfigError):
        TimeConfig(final_time=-1.0)
    assert math.isclose(TimeConfig().cfl, 0.1)
