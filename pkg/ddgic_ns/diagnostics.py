"""
Post-processing: error norms and convergence orders, point evaluation, wall
loads, wake metrics, shedding frequency and the Blasius boundary layer.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize
from scipy.signal import argrelextrema
from scipy.spatial import cKDTree

from .basis import edge_reference_points
from .boundary import FreestreamState
from .ddgic import SolutionField, variable_names
from .errors import DiagnosticsError
from .gas import GasModel, primitives, velocity_gradients
from .quadrature import duffy_sample_points, volume_rule

logger = logging.getLogger('ddgic-ns')

WALL_SAMPLES_PER_EDGE = 20


# -- error norms -----------------------------------------------------------

def error_norms(field: SolutionField, exact: Callable, names: Optional[Sequence[str]] = None,
                linf_points: int = 19) -> Dict[str, Tuple[float, float]]:
    """
    Per-variable (L2, Linf) errors of ``field`` against ``exact(x, y) -> (..., nvar)``.

    L2 uses a positive volume rule exact to degree 2k + 2; Linf is the
    maximum over ``linf_points``^2 collapsed-grid samples per cell.
    """
    mesh, basis = field.mesh, field.basis
    cells = np.arange(mesh.num_cells)
    nvar = field.nvar
    names = list(names or (('rho', 'rhou', 'rhov', 'E') if nvar == 4 else [f"u{i}" for i in range(nvar)]))

    rule = volume_rule(2 * field.degree + 2)
    pts = rule.points
    values = field.evaluate(cells, pts)
    xy = basis.to_physical(cells, pts)
    reference = np.asarray(exact(xy[..., 0], xy[..., 1]), dtype=float).reshape(values.shape)
    weights = rule.weights[None, :] * (0.5 * basis.det)[:, None]
    l2 = np.sqrt(np.einsum('cq,cqv->v', weights, (values - reference) ** 2))

    samples = duffy_sample_points(linf_points)
    values = field.evaluate(cells, samples)
    xy = basis.to_physical(cells, samples)
    reference = np.asarray(exact(xy[..., 0], xy[..., 1]), dtype=float).reshape(values.shape)
    linf = np.abs(values - reference).max(axis=(0, 1))
    return {name: (float(l2[i]), float(linf[i])) for i, name in enumerate(names)}


def convergence_order(e_coarse: float, e_fine: float, h_ratio: float = 2.0) -> float:
    """log(e_coarse / e_fine) / log(h_coarse / h_fine)."""
    if not (e_coarse > 0.0 and e_fine > 0.0):
        raise DiagnosticsError(f"Convergence order needs positive errors, got {e_coarse} and {e_fine}")
    if not h_ratio > 1.0:
        raise DiagnosticsError(f"Mesh-size ratio must exceed 1, got {h_ratio}")
    return math.log(e_coarse / e_fine) / math.log(h_ratio)


def observed_orders(errors: Sequence[float], sizes: Sequence[float]) -> List[Optional[float]]:
    """Orders between consecutive levels; the first level has none."""
    orders = [None]
    for i in range(1, len(errors)):
        orders.append(convergence_order(errors[i - 1], errors[i], sizes[i - 1] / sizes[i]))
    return orders


# -- point evaluation ------------------------------------------------------

class PointLocator:
    """Finds the cell containing physical points using a KD-tree of centroids."""

    def __init__(self, vertices: np.ndarray, cells: np.ndarray, neighbours: int = 12):
        self.vertices = np.asarray(vertices, dtype=float)
        self.cells = np.asarray(cells, dtype=int)
        self.tree = cKDTree(self.vertices[self.cells].mean(axis=1))
        self.neighbours = min(neighbours, len(self.cells))
        corners = self.vertices[self.cells]
        self._origin = corners[:, 0, :]
        jac = np.stack([corners[:, 1, :] - self._origin, corners[:, 2, :] - self._origin], axis=-1)
        self._inverse = np.linalg.inv(jac)

    @classmethod
    def for_mesh(cls, mesh) -> 'PointLocator':
        return cls(mesh.vertices, mesh.cells)

    def _reference(self, cells, xy):
        return np.einsum('cij,cj->ci', self._inverse[cells], xy - self._origin[cells])

    def locate(self, xy, tol: float = 1e-10) -> Tuple[np.ndarray, np.ndarray]:
        """Containing cells (n,) and reference coordinates (n, 2) of points (n, 2)."""
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        found = np.full(len(xy), -1)
        rs = np.zeros((len(xy), 2))
        for k in (self.neighbours, len(self.cells)):
            todo = np.flatnonzero(found < 0)
            if len(todo) == 0:
                break
            _, candidates = self.tree.query(xy[todo], k=k)
            candidates = np.asarray(candidates).reshape(len(todo), -1)
            for col in range(candidates.shape[1]):
                open_ = found[todo] < 0
                if not np.any(open_):
                    break
                pts = todo[open_]
                cells = candidates[open_, col]
                ref = self._reference(cells, xy[pts])
                inside = (ref[:, 0] >= -tol) & (ref[:, 1] >= -tol) & (ref.sum(axis=1) <= 1.0 + tol)
                found[pts[inside]] = cells[inside]
                rs[pts[inside]] = ref[inside]
        if np.any(found < 0):
            bad = xy[np.flatnonzero(found < 0)[0]]
            raise DiagnosticsError(f"Point ({bad[0]:.6g}, {bad[1]:.6g}) lies outside the mesh")
        return found, rs


def evaluate_points(field: SolutionField, xy, locator: Optional[PointLocator] = None,
                    derivatives: bool = False):
    """Field values (n, nvar), and gradients (n, nvar, 2) if asked, at physical points."""
    locator = locator or PointLocator.for_mesh(field.mesh)
    cells, rs = locator.locate(xy)
    result = field.evaluate(cells, rs[:, None, :], derivatives=derivatives)
    if derivatives:
        return result[0][:, 0], result[1][:, 0]
    return result[:, 0]


def reference_field_error(field: SolutionField, reference: SolutionField,
                          names: Optional[Sequence[str]] = None) -> Dict[str, Tuple[float, float]]:
    """Error norms of ``field`` measured against a finer stored solution on the same domain."""
    lo, hi = field.mesh.vertices.min(axis=0), field.mesh.vertices.max(axis=0)
    rlo, rhi = reference.mesh.vertices.min(axis=0), reference.mesh.vertices.max(axis=0)
    tol = 1e-8 * max(field.mesh.extent, 1.0)
    if np.any(np.abs(lo - rlo) > tol) or np.any(np.abs(hi - rhi) > tol):
        raise DiagnosticsError("Reference solution covers a different domain")
    if reference.nvar != field.nvar:
        raise DiagnosticsError(f"Reference has {reference.nvar} variables, run has {field.nvar}")
    if abs(reference.time - field.time) > 1e-10 * max(1.0, abs(field.time)):
        raise DiagnosticsError(f"Reference time {reference.time} differs from run time {field.time}")
    locator = PointLocator.for_mesh(reference.mesh)

    def exact(x, y):
        pts = np.column_stack([np.ravel(x), np.ravel(y)])
        return evaluate_points(reference, pts, locator).reshape(np.shape(x) + (reference.nvar,))

    return error_norms(field, exact, names)


# -- wall loads --------------------------------------------------------------

@dataclass
class WallSamples:
    """Samples along wall edges; ``normal`` points from the wall into the fluid."""

    xy: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    weights: np.ndarray
    p: np.ndarray
    tau_w: np.ndarray
    traction: np.ndarray
    cf: np.ndarray
    cp: np.ndarray
    edge: np.ndarray


def _wall_edges(field: SolutionField, tags: Sequence[str]) -> np.ndarray:
    if isinstance(tags, str):
        tags = [tags]
    edges = field.mesh.boundary_edges.select(tags)
    if len(edges) == 0:
        raise DiagnosticsError(f"No wall edges tagged {', '.join(tags)}")
    return edges


def _wall_traces(field: SolutionField, edges, s, weights, gas: GasModel,
                 freestream: FreestreamState) -> WallSamples:
    be = field.mesh.boundary_edges
    nv = field.nvar
    ns = len(s)
    cells = be.cell[edges]
    rs = np.stack([edge_reference_points(e, s) for e in be.local_edge[edges]])
    Q, grad = field.evaluate(cells, rs, derivatives=True)
    Q = Q.reshape(-1, nv)
    grad = grad.reshape(-1, nv, 2)
    w = primitives(Q, gas)
    du, dv, _ = velocity_gradients(Q, grad, w)
    div = du[:, 0] + dv[:, 1]
    tau = np.empty((len(Q), 2, 2))
    tau[:, 0, 0] = w.mu * (2.0 * du[:, 0] - 2.0 / 3.0 * div)
    tau[:, 1, 1] = w.mu * (2.0 * dv[:, 1] - 2.0 / 3.0 * div)
    tau[:, 0, 1] = tau[:, 1, 0] = w.mu * (du[:, 1] + dv[:, 0])

    normal = -np.repeat(be.normal[edges], ns, axis=0)
    tangent = np.column_stack([normal[:, 1], -normal[:, 0]])
    traction = np.einsum('nij,nj->ni', tau, normal)
    tau_w = np.sum(traction * tangent, axis=1)
    q_inf = freestream.dynamic_pressure()
    xy = field.basis.to_physical(cells, rs).reshape(-1, 2)
    return WallSamples(
        xy=xy,
        normal=normal,
        tangent=tangent,
        weights=(be.length[edges][:, None] * np.asarray(weights)[None, :]).ravel(),
        p=w.p,
        tau_w=tau_w,
        traction=traction,
        cf=tau_w / q_inf,
        cp=(w.p - freestream.p) / q_inf,
        edge=np.repeat(edges, ns),
    )


def wall_quantities(field: SolutionField, wall_tags, gas: GasModel, freestream: FreestreamState,
                    samples_per_edge: int = WALL_SAMPLES_PER_EDGE) -> WallSamples:
    """Wall pressure, shear, C_f and C_p at evenly spaced points of every wall edge."""
    edges = _wall_edges(field, wall_tags)
    s = (np.arange(samples_per_edge) + 0.5) / samples_per_edge
    return _wall_traces(field, edges, s, np.full(samples_per_edge, 1.0 / samples_per_edge), gas, freestream)


def aero_coefficients(field: SolutionField, wall_tags, gas: GasModel, freestream: FreestreamState,
                      diameter: float = 1.0) -> Tuple[float, float]:
    """
    Drag and lift coefficients of the body bounded by the wall edges.

    F = oint (-p n + tau n) ds with n pointing into the fluid, resolved along
    and across the freestream direction and scaled by q_inf * D.
    """
    edges = _wall_edges(field, wall_tags)
    be = field.mesh.boundary_edges
    closure = np.abs((be.normal[edges] * be.length[edges][:, None]).sum(axis=0)).max()
    if closure > 1e-10 * be.length[edges].sum():
        raise DiagnosticsError("Wall contour is not closed; force coefficients are undefined")
    rule = field.basis.rules.edge
    samples = _wall_traces(field, edges, rule.points, rule.weights, gas, freestream)
    local = -samples.p[:, None] * samples.normal + samples.traction
    force = (samples.weights[:, None] * local).sum(axis=0)
    speed = freestream.speed
    drag_dir = np.array([freestream.u, freestream.v]) / speed
    lift_dir = np.array([-drag_dir[1], drag_dir[0]])
    scale = freestream.dynamic_pressure() * diameter
    return float(force @ drag_dir / scale), float(force @ lift_dir / scale)


@dataclass
class ForceRecord:
    time: float
    cd: float
    cl: float
    wall: Optional[WallSamples] = field(default=None, repr=False)

    def __post_init__(self):
        if not (math.isfinite(self.cd) and math.isfinite(self.cl)):
            raise DiagnosticsError(f"Non-finite force coefficients at t={self.time}")


def force_history_arrays(records: Sequence[ForceRecord]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    return (np.array([r.time for r in records]), np.array([r.cd for r in records]),
            np.array([r.cl for r in records]))


def mean_and_amplitude(values, discard: float = 0.5) -> Tuple[float, float]:
    """
    Mean and half peak-to-peak of a periodic signal after dropping the leading transient.

    Peaks are averaged over every local extremum in the retained window.
    """
    values = np.asarray(values, dtype=float)
    tail = values[int(math.ceil(len(values) * discard)):]
    if len(tail) < 3:
        raise DiagnosticsError("Force history too short for statistics")
    maxima = argrelextrema(tail, np.greater)[0]
    minima = argrelextrema(tail, np.less)[0]
    if len(maxima) == 0 or len(minima) == 0:
        return float(tail.mean()), 0.5 * float(tail.max() - tail.min())
    window = tail[min(maxima[0], minima[0]):max(maxima[-1], minima[-1]) + 1]
    return float(window.mean()), 0.5 * float(tail[maxima].mean() - tail[minima].mean())


def strouhal(times, lift, diameter: float = 1.0, speed: float = 1.0, min_periods: int = 5,
             discard: float = 0.5) -> float:
    """
    St = f D / U with f from the mean spacing of upward zero crossings of C_l - mean(C_l).

    The first ``discard`` fraction of the history is dropped as transient.
    """
    times = np.asarray(times, dtype=float)
    lift = np.asarray(lift, dtype=float)
    start = int(math.ceil(len(times) * discard))
    t, c = times[start:], lift[start:]
    if len(c) < 3:
        raise DiagnosticsError("Lift history too short for a frequency estimate")
    signal = c - c.mean()
    if np.ptp(signal) <= 1e-12 * max(1.0, float(np.abs(c).max())):
        raise DiagnosticsError("Lift signal is not oscillatory")
    up = np.flatnonzero((signal[:-1] < 0.0) & (signal[1:] >= 0.0))
    crossings = t[up] - signal[up] * (t[up + 1] - t[up]) / (signal[up + 1] - signal[up])
    periods = len(crossings) - 1
    if periods < min_periods:
        raise DiagnosticsError(f"Only {max(periods, 0)} lift periods after transient removal, "
                               f"need {min_periods}")
    frequency = periods / (crossings[-1] - crossings[0])
    return frequency * diameter / speed


# -- wake of a cylinder ------------------------------------------------------

@dataclass
class WakeMetrics:
    separation_angle: float
    wake_length: float
    vortex_a: float
    vortex_b: float

    def as_dict(self) -> Dict[str, float]:
        return {'theta': self.separation_angle, 'Lw/D': self.wake_length,
                'a/D': self.vortex_a, 'b/D': self.vortex_b}


def separation_angle(samples: WallSamples, center=(0.0, 0.0), skip: float = 10.0) -> float:
    """
    Angle in degrees from the front stagnation point where the upper-surface
    wall shear turns from positive to negative.
    """
    rel = samples.xy - np.asarray(center)
    theta = 180.0 - np.degrees(np.arctan2(rel[:, 1], rel[:, 0]))
    upper = (rel[:, 1] > 0.0) & (theta > skip)
    order = np.argsort(theta[upper])
    th = theta[upper][order]
    tw = samples.tau_w[upper][order]
    change = np.flatnonzero((tw[:-1] > 0.0) & (tw[1:] <= 0.0))
    if len(change) == 0:
        raise DiagnosticsError("Wall shear never changes sign: flow is attached")
    i = change[0]
    return float(th[i] - tw[i] * (th[i + 1] - th[i]) / (tw[i + 1] - tw[i]))


def wake_metrics(field: SolutionField, wall_tags, gas: GasModel, freestream: FreestreamState,
                 center=(0.0, 0.0), diameter: float = 1.0, resolution: int = 400) -> WakeMetrics:
    """
    Separation angle, recirculation length L_w/D and vortex-centre position (a/D, b/D).

    L_w runs from the rear of the body to where the centreline u turns
    positive; a is the streamwise distance of the upper vortex centre behind
    the body and b the distance between the two vortex centres.
    """
    cx, cy = center
    radius = 0.5 * diameter
    samples = wall_quantities(field, wall_tags, gas, freestream)
    theta = separation_angle(samples, center)
    locator = PointLocator.for_mesh(field.mesh)

    def velocity(xy):
        w = primitives(evaluate_points(field, xy, locator), gas)
        return w.u, w.v

    xs = cx + radius + diameter * np.linspace(1e-3, 10.0, resolution)
    u, _ = velocity(np.column_stack([xs, np.full_like(xs, cy)]))
    if u[0] >= 0.0:
        raise DiagnosticsError("No reversed flow behind the body: flow is attached")
    positive = np.flatnonzero(u >= 0.0)
    if len(positive) == 0:
        raise DiagnosticsError("Recirculation extends past the sampled wake")
    j = positive[0]
    x_end = xs[j - 1] - u[j - 1] * (xs[j] - xs[j - 1]) / (u[j] - u[j - 1])
    wake_length = (x_end - (cx + radius)) / diameter

    gx = np.linspace(cx + radius, x_end, 40)[1:-1]
    gy = cy + diameter * np.linspace(0.02, 1.0, 40)
    XX, YY = np.meshgrid(gx, gy, indexing='ij')
    pts = np.column_stack([XX.ravel(), YY.ravel()])
    keep = np.hypot(pts[:, 0] - cx, pts[:, 1] - cy) > radius * 1.02
    pts = pts[keep]
    gu, gv = velocity(pts)
    start = pts[np.argmin(gu ** 2 + gv ** 2)]

    def speed2(p):
        if np.hypot(p[0] - cx, p[1] - cy) <= radius:
            return 1e6
        uu, vv = velocity(np.asarray(p)[None, :])
        return float(uu[0] ** 2 + vv[0] ** 2)

    result = minimize(speed2, start, method='Nelder-Mead', options={'xatol': 1e-6, 'fatol': 1e-14})
    xc, yc = result.x
    return WakeMetrics(theta, wake_length, (xc - (cx + radius)) / diameter, 2.0 * (yc - cy) / diameter)


# -- flat plate ----------------------------------------------------------------

BLASIUS_FPP0 = 0.332057


@dataclass
class BlasiusSolution:
    """Similarity profile f'(eta) of f''' + f f''/2 = 0 with eta = y / sqrt(nu x / U)."""

    fpp0: float
    eta: np.ndarray
    fp: np.ndarray

    def velocity(self, eta) -> np.ndarray:
        eta = np.asarray(eta, dtype=float)
        return np.where(eta >= self.eta[-1], 1.0, np.interp(eta, self.eta, self.fp))


def blasius_solution(eta_max: float = 10.0, samples: int = 2001) -> BlasiusSolution:
    """Shoot on f''(0) so that f'(eta_max) = 1."""
    def rhs(_, f):
        return [f[1], f[2], -0.5 * f[0] * f[2]]

    def miss(fpp0):
        sol = solve_ivp(rhs, (0.0, eta_max), [0.0, 0.0, fpp0], rtol=1e-11, atol=1e-12)
        return sol.y[1, -1] - 1.0

    fpp0 = brentq(miss, 0.1, 1.0, xtol=1e-12)
    eta = np.linspace(0.0, eta_max, samples)
    sol = solve_ivp(rhs, (0.0, eta_max), [0.0, 0.0, fpp0], t_eval=eta, rtol=1e-11, atol=1e-12)
    return BlasiusSolution(fpp0, eta, sol.y[1])


def blasius_skin_friction(x, freestream: FreestreamState, mu: float, leading_edge: float = 0.0):
    """0.664 / sqrt(Re_x)."""
    re_x = freestream.rho * freestream.speed * (np.asarray(x, dtype=float) - leading_edge) / mu
    return 0.664 / np.sqrt(re_x)


@dataclass
class ProfileComparison:
    y: np.ndarray
    eta: np.ndarray
    u: np.ndarray
    blasius: np.ndarray

    def max_deviation(self, eta_max: float = 6.0) -> float:
        mask = self.eta <= eta_max
        return float(np.abs(self.u[mask] - self.blasius[mask]).max())


def exit_plane_profile(field: SolutionField, outflow_tags, gas: GasModel, freestream: FreestreamState,
                       leading_edge: float = 0.0, blasius: Optional[BlasiusSolution] = None) -> ProfileComparison:
    """u / u_inf at the centre of every exit-plane face against the Blasius profile."""
    edges = _wall_edges(field, outflow_tags)
    be = field.mesh.boundary_edges
    rs = np.stack([edge_reference_points(e, np.array([0.5])) for e in be.local_edge[edges]])
    cells = be.cell[edges]
    Q = field.evaluate(cells, rs)[:, 0]
    xy = field.basis.to_physical(cells, rs)[:, 0]
    w = primitives(Q, gas)
    x = float(np.mean(xy[:, 0])) - leading_edge
    delta = math.sqrt(gas.mu * x / (freestream.rho * freestream.speed))
    order = np.argsort(xy[:, 1])
    y = xy[order, 1]
    eta = y / delta
    blasius = blasius or blasius_solution()
    return ProfileComparison(y, eta, w.u[order] / freestream.speed, blasius.velocity(eta))


def field_summary(field: SolutionField, physics) -> Dict[str, List[float]]:
    """Domain totals and extrema of the cell averages, per variable."""
    names = variable_names(physics)
    avg = field.cell_averages()
    totals = field.totals()
    return {name: [float(totals[i]), float(avg[:, i].min()), float(avg[:, i].max())]
            for i, name in enumerate(names)}
