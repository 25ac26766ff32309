"""
Manufactured and analytic fields with their Navier-Stokes source terms.

Fields are sums of products of sines and cosines of affine phases, so every
space-time derivative the source needs is available in closed form. Each
field is evaluated as a second-order jet (value, d/dt, gradient, Hessian)
and the source S = dQ/dt + div F_c - div F_v is assembled from the jets.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError
from .gas import GasModel, conserved, convective_flux, primitives, viscous_flux


@dataclass
class Jet:
    """Value with its time derivative and first and second space derivatives."""

    val: np.ndarray
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    xx: np.ndarray
    xy: np.ndarray
    yy: np.ndarray

    @classmethod
    def constant(cls, value, shape) -> 'Jet':
        zero = np.zeros(shape)
        return cls(np.full(shape, float(value)), zero, zero, zero, zero, zero, zero)

    def __add__(self, other: 'Jet') -> 'Jet':
        if not isinstance(other, Jet):
            return Jet(self.val + other, self.t, self.x, self.y, self.xx, self.xy, self.yy)
        return Jet(self.val + other.val, self.t + other.t, self.x + other.x, self.y + other.y,
                   self.xx + other.xx, self.xy + other.xy, self.yy + other.yy)

    __radd__ = __add__

    def __neg__(self) -> 'Jet':
        return self * -1.0

    def __sub__(self, other: 'Jet') -> 'Jet':
        return self + (-other)

    def __mul__(self, other) -> 'Jet':
        if not isinstance(other, Jet):
            return Jet(self.val * other, self.t * other, self.x * other, self.y * other,
                       self.xx * other, self.xy * other, self.yy * other)
        a, b = self, other
        return Jet(a.val * b.val,
                   a.t * b.val + a.val * b.t,
                   a.x * b.val + a.val * b.x,
                   a.y * b.val + a.val * b.y,
                   a.xx * b.val + 2.0 * a.x * b.x + a.val * b.xx,
                   a.xy * b.val + a.x * b.y + a.y * b.x + a.val * b.xy,
                   a.yy * b.val + 2.0 * a.y * b.y + a.val * b.yy)

    __rmul__ = __mul__


@dataclass(frozen=True)
class Mode:
    """sin or cos of kx x + ky y + kt t + phase."""

    kind: str
    kx: float
    ky: float
    kt: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if self.kind not in ('sin', 'cos'):
            raise ConfigError(f"Mode kind must be 'sin' or 'cos', got '{self.kind}'")

    def jet(self, x, y, t) -> Jet:
        theta = self.kx * x + self.ky * y + self.kt * t + self.phase
        if self.kind == 'sin':
            s, ds = np.sin(theta), np.cos(theta)
        else:
            s, ds = np.cos(theta), -np.sin(theta)
        return Jet(s, ds * self.kt, ds * self.kx, ds * self.ky,
                   -s * self.kx ** 2, -s * self.kx * self.ky, -s * self.ky ** 2)


@dataclass(frozen=True)
class TrigField:
    """base + sum over terms of amplitude * product of modes."""

    base: float
    terms: Tuple[Tuple[float, Tuple[Mode, ...]], ...] = ()

    def jet(self, x, y, t) -> Jet:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        result = Jet.constant(self.base, x.shape)
        for amplitude, modes in self.terms:
            product = Jet.constant(amplitude, x.shape)
            for mode in modes:
                product = product * mode.jet(x, y, t)
            result = result + product
        return result

    def __call__(self, x, y, t) -> np.ndarray:
        return self.jet(x, y, t).val


@dataclass
class ExactSolution:
    """Exact primitive fields rho, u, v and e as functions of (x, y, t)."""

    name: str
    rho: TrigField
    u: TrigField
    v: TrigField
    e: TrigField
    mu: float = 0.0
    final_time: Optional[float] = None
    description: str = field(default='', compare=False)

    def primitive(self, x, y, t):
        return self.rho(x, y, t), self.u(x, y, t), self.v(x, y, t), self.e(x, y, t)

    def conserved(self, x, y, t, gas: GasModel) -> np.ndarray:
        rho, u, v, e = self.primitive(x, y, t)
        return conserved(rho, u, v, (gas.gamma - 1.0) * rho * e, gas)

    def initial(self, gas: GasModel) -> Callable:
        return lambda x, y: self.conserved(x, y, 0.0, gas)

    def at_time(self, t: float, gas: GasModel) -> Callable:
        return lambda x, y: self.conserved(x, y, t, gas)

    def source(self, gas: GasModel) -> Callable:
        return lambda x, y, t: mms_source(self, x, y, t, gas)


def _wave(k_x, k_y, k_t, kind='sin'):
    return Mode(kind, k_x, k_y, k_t)


TWO_PI = 2.0 * math.pi


def manufactured_solution_1() -> ExactSolution:
    """Travelling waves of 2 pi (x + y) - 2 t with 10 % amplitude."""
    s = _wave(TWO_PI, TWO_PI, -2.0, 'sin')
    c = _wave(TWO_PI, TWO_PI, -2.0, 'cos')
    return ExactSolution(
        name='mms1',
        rho=TrigField(1.0, ((0.1, (s,)),)),
        u=TrigField(1.0, ((0.1, (s,)),)),
        v=TrigField(1.0, ((0.1, (c,)),)),
        e=TrigField(1.0, ((0.1, (c,)),)),
        mu=1e-3,
        final_time=TWO_PI,
        description='travelling wave, periodic unit square',
    )


def manufactured_solution_2() -> ExactSolution:
    """Wave packet with distinct wave numbers per variable."""
    pi = math.pi
    return ExactSolution(
        name='mms2',
        rho=TrigField(1.0, ((-0.1, (Mode('sin', 4 * pi, 0.0, 4 * pi), Mode('cos', 0.0, 2 * pi, -2 * pi))),)),
        u=TrigField(2.0, ((0.2, (Mode('sin', 2 * pi, 0.0, -2 * pi), Mode('cos', 0.0, 4 * pi, -4 * pi))),)),
        v=TrigField(3.0, ((0.3, (Mode('cos', 2 * pi, 0.0, -2 * pi), Mode('sin', 0.0, 4 * pi, 4 * pi))),)),
        e=TrigField(50.0, ((-10.0, (Mode('cos', 2 * pi, 0.0, -4 * pi), Mode('sin', 0.0, 4 * pi, 4 * pi))),)),
        mu=1e-2,
        final_time=1.0,
        description='wave packet, periodic unit square',
    )


def uniform_flow(rho: float = 1.0, u: float = 1.0, v: float = 0.0, p: float = 1.0,
                 gamma: float = 1.4, mu: float = 0.0) -> ExactSolution:
    """Constant state; an exact steady solution with zero source."""
    return ExactSolution(
        name='freestream',
        rho=TrigField(rho), u=TrigField(u), v=TrigField(v),
        e=TrigField(p / ((gamma - 1.0) * rho)),
        mu=mu,
        description='uniform flow',
    )


EXACT_SOLUTIONS = {
    'mms1': manufactured_solution_1,
    'mms2': manufactured_solution_2,
    'freestream': uniform_flow,
}


def pressure_pulse(gas: GasModel) -> Callable:
    """Fluid at rest with E = 12/(gamma-1) + exp(-(cos^2(pi x) + cos^2(pi y)))/2."""
    def initial(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        E = 12.0 / (gas.gamma - 1.0) + 0.5 * np.exp(-(np.cos(np.pi * x) ** 2 + np.cos(np.pi * y) ** 2))
        zero = np.zeros_like(x)
        return np.stack([np.ones_like(x), zero, zero, E], axis=-1)
    return initial


def mms_source(exact: ExactSolution, x, y, t, gas: GasModel) -> np.ndarray:
    """
    S = dQ/dt + div F_c(Q) - div F_v(Q, grad Q) of the exact fields, shape (..., 4).

    Requires constant viscosity (the exact fields fix mu).
    """
    if gas.viscosity != 'constant':
        raise ConfigError("Manufactured sources require constant viscosity", key='viscosity')
    rho, u, v, e = (f.jet(x, y, t) for f in (exact.rho, exact.u, exact.v, exact.e))
    gm1 = gas.gamma - 1.0
    mu = gas.mu
    kappa = mu * gas.gamma / gas.prandtl

    mx = rho * u
    my = rho * v
    p = (rho * e) * gm1
    E = rho * e + (rho * (u * u + v * v)) * 0.5
    H = E + p

    dt = [rho.t, mx.t, my.t, E.t]
    f = [mx, mx * u + p, mx * v, u * H]
    g = [my, my * u, my * v + p, v * H]
    div_c = [fi.x + gi.y for fi, gi in zip(f, g)]

    txx = mu * (4.0 / 3.0 * u.x - 2.0 / 3.0 * v.y)
    tyy = mu * (4.0 / 3.0 * v.y - 2.0 / 3.0 * u.x)
    txy = mu * (u.y + v.x)
    txx_x = mu * (4.0 / 3.0 * u.xx - 2.0 / 3.0 * v.xy)
    tyy_y = mu * (4.0 / 3.0 * v.yy - 2.0 / 3.0 * u.xy)
    txy_x = mu * (u.xy + v.xx)
    txy_y = mu * (u.yy + v.xy)
    energy = (u.x * txx + u.val * txx_x + v.x * txy + v.val * txy_x
              + u.y * txy + u.val * txy_y + v.y * tyy + v.val * tyy_y
              + kappa * (e.xx + e.yy))
    div_v = [np.zeros_like(rho.val), txx_x + txy_y, txy_x + tyy_y, energy]

    return np.stack([dt[i] + div_c[i] - div_v[i] for i in range(4)], axis=-1)


def _central(func: Callable, h: float):
    """Fourth-order central difference of ``func`` at offset 0."""
    return (func(-2.0 * h) - 8.0 * func(-h) + 8.0 * func(h) - func(2.0 * h)) / (12.0 * h)


def finite_difference_source(exact: ExactSolution, x: float, y: float, t: float, gas: GasModel,
                             step: float = 1e-4) -> np.ndarray:
    """
    Source of the exact fields by fourth-order central differences of the
    discrete flux functions, independent of the analytic jets.
    """
    def Q(xx, yy, tt):
        return exact.conserved(xx, yy, tt, gas)

    def grad_Q(xx, yy, tt):
        dx = _central(lambda s: Q(xx + s, yy, tt), step)
        dy = _central(lambda s: Q(xx, yy + s, tt), step)
        return np.stack([dx, dy], axis=-1)

    def flux(xx, yy, tt, direction):
        q = Q(xx, yy, tt)
        w = primitives(q, gas)
        fc = convective_flux(q, gas, w)[direction]
        fv = viscous_flux(q, grad_Q(xx, yy, tt), gas, w)[direction]
        return fc - fv

    dQdt = _central(lambda s: Q(x, y, t + s), step)
    dfdx = _central(lambda s: flux(x + s, y, t, 0), step)
    dgdy = _central(lambda s: flux(x, y + s, t, 1), step)
    return dQdt + dfdx + dgdy


def relative_source_mismatch(exact: ExactSolution, points: Sequence[Tuple[float, float, float]],
                             gas: GasModel, step: float = 1e-4) -> float:
    """Largest |S_analytic - S_fd| / max(1, |S_analytic|) over the given (x, y, t) points."""
    worst = 0.0
    for x, y, t in points:
        analytic = mms_source(exact, x, y, t, gas)
        oracle = finite_difference_source(exact, x, y, t, gas, step)
        scale = max(1.0, float(np.max(np.abs(analytic))))
        worst = max(worst, float(np.max(np.abs(analytic - oracle))) / scale)
    return worst
