"""
Tests for the diagnostics module.
"""

import math

import numpy as np
import pytest

from ddgic_ns.basis import build_basis
from ddgic_ns.boundary import FreestreamState
from ddgic_ns.ddgic import SolutionField
from ddgic_ns.diagnostics import (
    BLASIUS_FPP0,
    ForceRecord,
    PointLocator,
    WallSamples,
    aero_coefficients,
    blasius_skin_friction,
    blasius_solution,
    convergence_order,
    error_norms,
    evaluate_points,
    force_history_arrays,
    mean_and_amplitude,
    observed_orders,
    reference_field_error,
    separation_angle,
    strouhal,
    wall_quantities,
)
from ddgic_ns.errors import DiagnosticsError
from ddgic_ns.gas import GasModel, conserved
from ddgic_ns.meshgen import builtin_mesh


@pytest.fixture(scope='module')
def square():
    return builtin_mesh('square:0')


def _linear_field(mesh, degree=1):
    basis = build_basis(mesh, degree)

    def func(x, y):
        return np.stack([1.0 + 0.5 * x, 2.0 * y - x, 0.25 * x + y], axis=-1)

    return SolutionField.project(mesh, basis, func, 3), func


def test_convergence_order():
    """Test the observed order from two error levels."""
    assert convergence_order(4e-3, 5e-4) == pytest.approx(3.0)
    assert convergence_order(1e-2, 1e-2 / 9.0, h_ratio=3.0) == pytest.approx(2.0)
    with pytest.raises(DiagnosticsError):
        convergence_order(0.0, 1e-3)
    with pytest.raises(DiagnosticsError):
        convergence_order(1e-2, 1e-3, h_ratio=1.0)


def test_observed_orders():
    """Test orders across a sequence of halved meshes."""
    orders = observed_orders([1.0, 0.25, 0.0625], [0.2, 0.1, 0.05])

    assert orders[0] is None
    assert orders[1:] == [pytest.approx(2.0), pytest.approx(2.0)]


def test_error_norms_of_exactly_represented_field(square):
    """Test that a projected linear field has zero error and a constant offset is measured exactly."""
    field, func = _linear_field(square)

    norms = error_norms(field, func, names=['a', 'b', 'c'])
    assert set(norms) == {'a', 'b', 'c'}
    assert all(l2 < 1e-12 and linf < 1e-12 for l2, linf in norms.values())

    shifted = error_norms(field, lambda x, y: func(x, y) + 0.1, names=['a', 'b', 'c'])
    for l2, linf in shifted.values():
        assert l2 == pytest.approx(0.1, rel=1e-10)
        assert linf == pytest.approx(0.1, rel=1e-10)


def test_point_locator(square):
    """Test that centroids are found in their own cells and outside points are rejected."""
    locator = PointLocator.for_mesh(square)
    cells, rs = locator.locate(square.centroids)

    assert np.array_equal(cells, np.arange(square.num_cells))
    assert np.allclose(rs, 1.0 / 3.0)
    with pytest.raises(DiagnosticsError):
        locator.locate([(1.5, 0.5)])


def test_evaluate_points(square):
    """Test point evaluation of a linear field and its gradient."""
    field, func = _linear_field(square)
    xy = np.array([[0.13, 0.71], [0.5, 0.5], [0.99, 0.02]])

    values, grads = evaluate_points(field, xy, derivatives=True)
    assert np.allclose(values, func(xy[:, 0], xy[:, 1]), atol=1e-12)
    assert np.allclose(grads[:, 1], [-1.0, 2.0], atol=1e-10)


def test_reference_field_error(square):
    """Test comparison against a stored field on the same domain."""
    field, _ = _linear_field(square, degree=2)
    norms = reference_field_error(field, field.copy())
    assert all(l2 < 1e-12 for l2, _ in norms.values())

    later = field.copy()
    later.time = 1.0
    with pytest.raises(DiagnosticsError):
        reference_field_error(field, later)


def test_strouhal_of_synthetic_lift():
    """Test the shedding frequency of a pure sine after a transient."""
    t = np.arange(0.0, 100.0, 0.05)
    lift = 0.3 * np.sin(2.0 * math.pi * 0.2 * t) + np.exp(-t)

    assert strouhal(t, lift, diameter=1.0, speed=1.0) == pytest.approx(0.2, rel=1e-3)
    assert strouhal(t, lift, diameter=2.0, speed=0.5) == pytest.approx(0.8, rel=1e-3)


def test_strouhal_invariant_to_time_shift_and_amplitude():
    """Test that shifting the time axis or rescaling C_l leaves St unchanged."""
    t = np.arange(0.0, 100.0, 0.04)
    lift = 0.05 + 0.3 * np.sin(2.0 * math.pi * 0.17 * t + 0.4)
    reference = strouhal(t, lift)

    assert reference == pytest.approx(0.17, rel=1e-3)
    assert strouhal(t + 123.4, lift) == pytest.approx(reference, rel=1e-9)
    assert strouhal(t, 25.0 * lift) == pytest.approx(reference, rel=1e-9)
    assert strouhal(t, 1e-3 * lift) == pytest.approx(reference, rel=1e-9)


def test_strouhal_rejects_unusable_histories():
    """Test that steady or short lift histories give DiagnosticsError."""
    t = np.linspace(0.0, 10.0, 200)
    with pytest.raises(DiagnosticsError):
        strouhal(t, np.full_like(t, 0.1))
    with pytest.raises(DiagnosticsError):
        strouhal(t, np.sin(2.0 * math.pi * 0.2 * t))
    with pytest.raises(DiagnosticsError):
        strouhal(t[:3], t[:3])


def test_mean_and_amplitude():
    """Test mean and half peak-to-peak of an offset sine."""
    t = np.arange(0.0, 100.0, 0.05)
    mean, amplitude = mean_and_amplitude(1.3 + 0.2 * np.sin(2.0 * math.pi * 0.2 * t))

    assert mean == pytest.approx(1.3, abs=2e-3)
    assert amplitude == pytest.approx(0.2, rel=1e-6)
    assert mean_and_amplitude(np.full(10, 2.0)) == (2.0, 0.0)
    with pytest.raises(DiagnosticsError):
        mean_and_amplitude([1.0, 2.0])


def test_force_records():
    """Test record validation and conversion to arrays."""
    records = [ForceRecord(0.0, 1.5, 0.0), ForceRecord(1.0, 1.4, 0.1)]
    t, cd, cl = force_history_arrays(records)

    assert np.array_equal(t, [0.0, 1.0])
    assert np.array_equal(cd, [1.5, 1.4])
    assert np.array_equal(cl, [0.0, 0.1])
    with pytest.raises(DiagnosticsError):
        ForceRecord(2.0, float('nan'), 0.0)


def test_blasius_solution():
    """Test the wall shear of the similarity solution and the edge velocity."""
    blasius = blasius_solution()

    assert blasius.fpp0 == pytest.approx(BLASIUS_FPP0, abs=1e-6)
    assert blasius.velocity(0.0) == pytest.approx(0.0)
    assert blasius.velocity(20.0) == pytest.approx(1.0)
    assert blasius.velocity(5.0) == pytest.approx(0.9915, abs=1e-3)


def test_blasius_skin_friction():
    """Test c_f = 0.664 / sqrt(Re_x)."""
    fs = FreestreamState(1.0, 1.0, 0.0, 1.0)
    assert blasius_skin_friction(0.5, fs, 1e-4) == pytest.approx(0.664 / math.sqrt(5000.0))


def test_wall_shear_of_linear_shear_flow():
    """Test wall shear, C_f and C_p for u = y over the flat plate."""
    mesh = builtin_mesh('plate')
    basis = build_basis(mesh, 2)
    gas = GasModel(mu=0.01)
    fs = FreestreamState(1.0, 1.0, 0.0, 2.0)
    field = SolutionField.project(mesh, basis, lambda x, y: conserved(1.0, y, 0.0, 2.0, gas), 4)

    samples = wall_quantities(field, ['wall'], gas, fs, samples_per_edge=4)
    assert np.all(samples.xy[:, 0] >= -1e-12)
    assert np.allclose(samples.normal, [0.0, 1.0])
    assert np.allclose(samples.tau_w, 0.01, rtol=1e-8)
    assert np.allclose(samples.cf, 0.02, rtol=1e-8)
    assert np.allclose(samples.cp, 0.0, atol=1e-10)
    with pytest.raises(DiagnosticsError):
        aero_coefficients(field, ['wall'], gas, fs)
    with pytest.raises(DiagnosticsError):
        wall_quantities(field, ['nothing'], gas, fs)


def test_uniform_flow_has_no_force():
    """Test that a uniform state around the closed cylinder contour gives zero drag and lift."""
    mesh = builtin_mesh('cylinder')
    basis = build_basis(mesh, 1)
    gas = GasModel(mu=1.0 / 40.0)
    fs = FreestreamState(1.0, 1.0, 0.0, 1.0 / (1.4 * 0.2 ** 2))
    field = SolutionField.project(mesh, basis, lambda x, y: conserved(1.0, 1.0, 0.0, fs.p, gas)
                                  + 0.0 * x[..., None], 4)

    cd, cl = aero_coefficients(field, ['cylinder'], gas, fs)
    assert abs(cd) < 1e-10
    assert abs(cl) < 1e-10


def _circle_samples(tau):
    phi = np.linspace(-math.pi, math.pi, 721)[:-1]
    xy = 0.5 * np.column_stack([np.cos(phi), np.sin(phi)])
    theta = 180.0 - np.degrees(np.arctan2(xy[:, 1], xy[:, 0]))
    zeros = np.zeros(len(phi))
    return WallSamples(xy=xy, normal=xy / 0.5, tangent=xy, weights=zeros, p=zeros, tau_w=tau(theta),
                       traction=np.zeros((len(phi), 2)), cf=zeros, cp=zeros, edge=zeros.astype(int))


def test_separation_angle():
    """Test the angle where the upper-surface wall shear changes sign."""
    assert separation_angle(_circle_samples(lambda th: 126.5 - th)) == pytest.approx(126.5, abs=1e-9)
    with pytest.raises(DiagnosticsError):
        separation_angle(_circle_samples(lambda th: 1.0 + 0.0 * th))
