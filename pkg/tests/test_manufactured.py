"""
Tests for the manufactured module.
"""

import numpy as np
import pytest

from ddgic_ns.errors import ConfigError
from ddgic_ns.gas import GasModel, primitives
from ddgic_ns.manufactured import (
    EXACT_SOLUTIONS,
    Jet,
    Mode,
    TrigField,
    finite_difference_source,
    manufactured_solution_1,
    manufactured_solution_2,
    mms_source,
    pressure_pulse,
    relative_source_mismatch,
    uniform_flow,
)

POINTS = [(0.1, 0.2, 0.0), (0.37, 0.81, 0.3), (0.9, 0.05, 0.77), (0.5, 0.5, 1.0)]


def test_mode_jet_derivatives():
    """Test a single mode's jet against its closed-form derivatives."""
    mode = Mode('sin', 2.0, 3.0, -1.0, 0.5)
    x, y, t = 0.3, -0.2, 0.7
    theta = 2.0 * x + 3.0 * y - t + 0.5
    jet = mode.jet(np.array(x), np.array(y), t)

    assert jet.val == pytest.approx(np.sin(theta))
    assert jet.t == pytest.approx(-np.cos(theta))
    assert jet.x == pytest.approx(2.0 * np.cos(theta))
    assert jet.xy == pytest.approx(-6.0 * np.sin(theta))
    with pytest.raises(ConfigError):
        Mode('tan', 1.0, 1.0)


def test_jet_product_rule():
    """Test products of jets against finite differences of the product."""
    a = TrigField(1.0, ((0.5, (Mode('sin', 1.0, 2.0, 0.3),)),))
    b = TrigField(2.0, ((0.3, (Mode('cos', -1.5, 0.5, 1.0),)),))
    x, y, t = 0.4, 0.1, 0.2
    product = a.jet(x, y, t) * b.jet(x, y, t)

    def value(dx=0.0, dy=0.0):
        return a(x + dx, y + dy, t) * b(x + dx, y + dy, t)

    h = 1e-4
    assert product.val == pytest.approx(value())
    assert product.x == pytest.approx((value(h) - value(-h)) / (2 * h), rel=1e-7, abs=1e-8)
    assert product.yy == pytest.approx((value(dy=h) - 2 * value() + value(dy=-h)) / h ** 2, rel=1e-5, abs=1e-6)
    assert product.xy == pytest.approx(
        (value(h, h) - value(h, -h) - value(-h, h) + value(-h, -h)) / (4 * h * h), rel=1e-5, abs=1e-6)


def test_jet_arithmetic():
    """Test sums, differences and scalar products of jets."""
    one = Jet.constant(1.0, (2,))
    two = one + one
    assert np.allclose((two - one).val, 1.0)
    assert np.allclose((3.0 * two).val, 6.0)
    assert np.allclose((two + 1.0).val, 3.0)
    assert np.allclose((-two).x, 0.0)


@pytest.mark.parametrize('factory', [manufactured_solution_1, manufactured_solution_2])
def test_source_matches_finite_difference_oracle(factory):
    """Test the analytic source against central differences of the discrete fluxes."""
    exact = factory()
    gas = GasModel(mu=exact.mu)

    assert relative_source_mismatch(exact, POINTS, gas) < 1e-7


def test_source_shape_and_vectorization():
    """Test that the source evaluates on arrays and agrees with point evaluation."""
    exact = manufactured_solution_2()
    gas = GasModel(mu=exact.mu)
    x = np.array([[0.1, 0.2], [0.3, 0.4]])
    y = np.array([[0.5, 0.6], [0.7, 0.8]])

    S = exact.source(gas)(x, y, 0.25)
    assert S.shape == (2, 2, 4)
    assert np.allclose(S[1, 0], mms_source(exact, 0.3, 0.7, 0.25, gas))


def test_uniform_flow_has_zero_source():
    """Test that a constant state needs no forcing."""
    exact = uniform_flow(1.2, 0.5, -0.3, 2.0, mu=0.1)
    gas = GasModel(mu=0.1)

    assert np.allclose(mms_source(exact, np.array([0.2, 0.7]), np.array([0.1, 0.9]), 0.5, gas), 0.0)
    assert np.allclose(finite_difference_source(exact, 0.2, 0.1, 0.5, gas), 0.0, atol=1e-8)
    assert primitives(exact.conserved(0.0, 0.0, 0.0, gas), gas).p == pytest.approx(2.0)


def test_source_requires_constant_viscosity():
    """Test that a Sutherland gas is rejected for manufactured sources."""
    exact = manufactured_solution_1()
    with pytest.raises(ConfigError):
        mms_source(exact, 0.1, 0.1, 0.0, GasModel(viscosity='sutherland', mu_ref=1e-3))


@pytest.mark.parametrize('name', ['mms1', 'mms2'])
def test_manufactured_fields_are_periodic_and_admissible(name):
    """Test periodicity on the unit square and positive density and energy."""
    exact = EXACT_SOLUTIONS[name]()
    gas = GasModel(mu=exact.mu)
    x, y = np.meshgrid(np.linspace(0.0, 1.0, 21), np.linspace(0.0, 1.0, 21))
    t = 0.3

    q = exact.conserved(x, y, t, gas)
    assert np.allclose(exact.conserved(x + 1.0, y, t, gas), q)
    assert np.allclose(exact.conserved(x, y + 1.0, t, gas), q)
    w = primitives(q, gas)
    assert np.all(w.rho > 0.0) and np.all(w.p > 0.0)
    assert np.allclose(exact.initial(gas)(x, y), exact.conserved(x, y, 0.0, gas))
    assert exact.final_time > 0.0


def test_pressure_pulse_initial_state():
    """Test the pulse: fluid at rest, unit density, bounded energy."""
    gas = GasModel(gamma=1.4)
    x, y = np.meshgrid(np.linspace(0.0, 1.0, 11), np.linspace(0.0, 1.0, 11))
    q = pressure_pulse(gas)(x, y)

    assert np.allclose(q[..., 0], 1.0)
    assert np.allclose(q[..., 1:3], 0.0)
    assert np.all(q[..., 3] > 12.0 / 0.4)
    assert q[..., 3].max() == pytest.approx(12.0 / 0.4 + 0.5)
