"""
Calorically perfect gas: primitives, physical fluxes, viscosity laws and the
diffusion matrices A^(lm) that split the viscous flux per conserved variable.

Every function is vectorized over leading axes: a state has shape (..., 4)
and a gradient (..., 4, 2) with the last axis (d/dx, d/dy).
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import CompatibilityError, ConfigError, InadmissibleStateError

RHO_MIN = 1e-12
E_MIN = 1e-12

CONSERVED_NAMES = ('rho', 'rhou', 'rhov', 'E')


@dataclass(frozen=True)
class GasModel:
    """Ideal gas with constant or Sutherland viscosity."""

    gamma: float = 1.4
    prandtl: float = 0.72
    viscosity: str = 'constant'
    mu: float = 0.0
    mu_ref: float = 0.0
    t_ref: float = 288.15
    sutherland: float = 110.4
    cv: float = 1.0

    def __post_init__(self):
        if self.gamma <= 1.0:
            raise ConfigError(f"gamma must exceed 1, got {self.gamma}", key='gamma')
        if self.prandtl <= 0.0:
            raise ConfigError(f"Prandtl number must be positive, got {self.prandtl}", key='prandtl')
        if self.viscosity not in ('constant', 'sutherland'):
            raise ConfigError(f"Unknown viscosity law '{self.viscosity}'", key='viscosity')
        if self.cv <= 0.0:
            raise ConfigError(f"cv must be positive, got {self.cv}", key='cv')

    def dynamic_viscosity(self, T) -> np.ndarray:
        """mu(T): constant, or mu_ref (T/T_ref)^1.5 (T_ref + C_s)/(T + C_s)."""
        T = np.asarray(T, dtype=float)
        if self.viscosity == 'constant':
            return np.full(T.shape, self.mu)
        ratio = T / self.t_ref
        return self.mu_ref * ratio * np.sqrt(ratio) * (self.t_ref + self.sutherland) / (T + self.sutherland)


class Primitives(NamedTuple):
    rho: np.ndarray
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    e: np.ndarray
    T: np.ndarray
    a: np.ndarray
    mu: np.ndarray


def _locate(mask: np.ndarray, cells: Optional[Sequence[int]]):
    idx = np.argwhere(mask)[0]
    cell = point = None
    if mask.ndim >= 2:
        cell = int(idx[0]) if cells is None else int(np.asarray(cells)[idx[0]])
        point = int(idx[1])
    elif len(idx) == 1:
        point = int(idx[0])
    return cell, point


def primitives(Q, gas: GasModel, cells: Optional[Sequence[int]] = None) -> Primitives:
    """
    Primitive variables of conserved states ``Q``.

    Raises InadmissibleStateError for nonpositive density or internal energy;
    when ``Q`` is (nc, nq, 4) the error names the cell (through ``cells``
    if given) and the point.
    """
    Q = np.asarray(Q, dtype=float)
    rho = Q[..., 0]
    bad = ~(rho > RHO_MIN)
    if np.any(bad):
        cell, point = _locate(bad, cells)
        raise InadmissibleStateError("Nonpositive density", cell=cell, point=point, variable='rho')
    u = Q[..., 1] / rho
    v = Q[..., 2] / rho
    e = Q[..., 3] / rho - 0.5 * (u * u + v * v)
    bad = ~(e > E_MIN)
    if np.any(bad):
        cell, point = _locate(bad, cells)
        raise InadmissibleStateError("Nonpositive internal energy", cell=cell, point=point,
                                     variable='e')
    p = (gas.gamma - 1.0) * rho * e
    T = e / gas.cv
    a = np.sqrt(gas.gamma * p / rho)
    return Primitives(rho, u, v, p, e, T, a, gas.dynamic_viscosity(T))


def conserved(rho, u, v, p, gas: GasModel) -> np.ndarray:
    """Conserved state (rho, rho u, rho v, E) from density, velocity and pressure."""
    rho, u, v, p = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (rho, u, v, p)))
    E = p / (gas.gamma - 1.0) + 0.5 * rho * (u * u + v * v)
    return np.stack([rho, rho * u, rho * v, E], axis=-1)


def convective_flux(Q, gas: GasModel, prim: Optional[Primitives] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Euler fluxes (f_c, g_c), each (..., 4)."""
    Q = np.asarray(Q, dtype=float)
    w = prim if prim is not None else primitives(Q, gas)
    rhou, rhov, E = Q[..., 1], Q[..., 2], Q[..., 3]
    f = np.stack([rhou, rhou * w.u + w.p, rhov * w.u, w.u * (E + w.p)], axis=-1)
    g = np.stack([rhov, rhou * w.v, rhov * w.v + w.p, w.v * (E + w.p)], axis=-1)
    return f, g


def velocity_gradients(Q, gradQ, prim: Primitives):
    """Chain rule for grad u, grad v and grad e from conserved gradients."""
    Q = np.asarray(Q, dtype=float)
    gradQ = np.asarray(gradQ, dtype=float)
    rho = prim.rho[..., None]
    u = prim.u[..., None]
    v = prim.v[..., None]
    drho = gradQ[..., 0, :]
    du = (gradQ[..., 1, :] - u * drho) / rho
    dv = (gradQ[..., 2, :] - v * drho) / rho
    de = (gradQ[..., 3, :] - (Q[..., 3:4] / rho) * drho) / rho - u * du - v * dv
    return du, dv, de


def viscous_flux(Q, gradQ, gas: GasModel, prim: Optional[Primitives] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Viscous fluxes (f_v, g_v), each (..., 4)."""
    w = prim if prim is not None else primitives(Q, gas)
    du, dv, de = velocity_gradients(Q, gradQ, w)
    mu = w.mu
    kappa = mu * gas.gamma / gas.prandtl
    t11 = mu * (4.0 / 3.0 * du[..., 0] - 2.0 / 3.0 * dv[..., 1])
    t22 = mu * (4.0 / 3.0 * dv[..., 1] - 2.0 / 3.0 * du[..., 0])
    t12 = mu * (du[..., 1] + dv[..., 0])
    zero = np.zeros_like(t11)
    f = np.stack([zero, t11, t12, w.u * t11 + w.v * t12 + kappa * de[..., 0]], axis=-1)
    g = np.stack([zero, t12, t22, w.u * t12 + w.v * t22 + kappa * de[..., 1]], axis=-1)
    return f, g


def diffusion_matrices(Q, gas: GasModel, prim: Optional[Primitives] = None) -> np.ndarray:
    """
    All diffusion matrices at once, shape (..., 4, 4, 2, 2) indexed [l, m, i, j].

    Row l of the viscous flux satisfies (f_v, g_v)_l = sum_m A^(lm) grad Q^(m),
    where entry [i, j] multiplies d/dx_j in flux direction i.
    """
    w = prim if prim is not None else primitives(Q, gas)
    r = w.mu / w.rho
    u, v, e = w.u, w.v, w.e
    g = gas.gamma / gas.prandtl
    A = np.zeros(np.shape(r) + (4, 4, 2, 2))

    A[..., 1, 0, 0, 0] = -r * 4.0 / 3.0 * u
    A[..., 1, 0, 0, 1] = r * 2.0 / 3.0 * v
    A[..., 1, 0, 1, 0] = -r * v
    A[..., 1, 0, 1, 1] = -r * u
    A[..., 1, 1, 0, 0] = r * 4.0 / 3.0
    A[..., 1, 1, 1, 1] = r
    A[..., 1, 2, 0, 1] = -r * 2.0 / 3.0
    A[..., 1, 2, 1, 0] = r

    A[..., 2, 0, 0, 0] = -r * v
    A[..., 2, 0, 0, 1] = -r * u
    A[..., 2, 0, 1, 0] = r * 2.0 / 3.0 * u
    A[..., 2, 0, 1, 1] = -r * 4.0 / 3.0 * v
    A[..., 2, 1, 0, 1] = r
    A[..., 2, 1, 1, 0] = -r * 2.0 / 3.0
    A[..., 2, 2, 0, 0] = r
    A[..., 2, 2, 1, 1] = r * 4.0 / 3.0

    uu, vv, uv = u * u, v * v, u * v
    A[..., 3, 0, 0, 0] = r * ((0.5 * g - 4.0 / 3.0) * uu + (0.5 * g - 1.0) * vv - g * e)
    A[..., 3, 0, 0, 1] = -r * uv / 3.0
    A[..., 3, 0, 1, 0] = -r * uv / 3.0
    A[..., 3, 0, 1, 1] = r * ((0.5 * g - 1.0) * uu + (0.5 * g - 4.0 / 3.0) * vv - g * e)
    A[..., 3, 1, 0, 0] = r * (4.0 / 3.0 - g) * u
    A[..., 3, 1, 0, 1] = r * v
    A[..., 3, 1, 1, 0] = -r * 2.0 / 3.0 * v
    A[..., 3, 1, 1, 1] = r * (1.0 - g) * u
    A[..., 3, 2, 0, 0] = r * (1.0 - g) * v
    A[..., 3, 2, 0, 1] = -r * 2.0 / 3.0 * u
    A[..., 3, 2, 1, 0] = r * u
    A[..., 3, 2, 1, 1] = r * (4.0 / 3.0 - g) * v
    A[..., 3, 3, 0, 0] = r * g
    A[..., 3, 3, 1, 1] = r * g
    return A


def diffusion_matrix(l: int, m: int, Q, gas: GasModel) -> np.ndarray:
    """A^(lm)(Q) for equation ``l`` and variable ``m``, both 1-based."""
    if not (1 <= l <= 4 and 1 <= m <= 4):
        raise IndexError(f"Diffusion matrix index ({l}, {m}) out of range 1..4")
    return diffusion_matrices(Q, gas)[..., l - 1, m - 1, :, :]


def direction_vectors(Q, n, gas: GasModel, prim: Optional[Primitives] = None) -> np.ndarray:
    """xi^(lm) = A^(lm)(Q)^T n for all l, m, shape (..., 4, 4, 2)."""
    A = diffusion_matrices(Q, gas, prim)
    n = np.asarray(n, dtype=float)
    return np.einsum('...lmij,...i->...lmj', A, n)


def direction_vector(l: int, m: int, Q, n, gas: GasModel) -> np.ndarray:
    """xi^(lm) for one (l, m) pair (1-based)."""
    return np.einsum('...ij,...i->...j', diffusion_matrix(l, m, Q, gas), np.asarray(n, dtype=float))


def antiderivative_matrix(l: int, Q, gas: GasModel) -> np.ndarray:
    """
    B^(l)(Q) whose conserved-variable Jacobians are A^(l1), A^(l2), A^(l3).

    Only the momentum equations (l = 2, 3) admit one, and only for constant viscosity.
    """
    if l not in (2, 3):
        raise CompatibilityError(f"No antiderivative matrix exists for equation {l}")
    if gas.viscosity != 'constant':
        raise CompatibilityError("Antiderivative matrices require constant viscosity")
    Q = np.asarray(Q, dtype=float)
    u = Q[..., 1] / Q[..., 0]
    v = Q[..., 2] / Q[..., 0]
    mu = gas.mu
    B = np.empty(u.shape + (2, 2))
    if l == 2:
        B[..., 0, 0] = 4.0 / 3.0 * u
        B[..., 0, 1] = -2.0 / 3.0 * v
        B[..., 1, 0] = v
        B[..., 1, 1] = u
    else:
        B[..., 0, 0] = v
        B[..., 0, 1] = u
        B[..., 1, 0] = -2.0 / 3.0 * u
        B[..., 1, 1] = 4.0 / 3.0 * v
    return mu * B


class NavierStokesEquations:
    """Compressible Navier-Stokes system as seen by the residual assembler."""

    nvar = 4
    names = CONSERVED_NAMES

    def __init__(self, gas: GasModel, viscous: bool = True):
        self.gas = gas
        self.viscous = viscous

    def check(self, Q, cells=None) -> Primitives:
        return primitives(Q, self.gas, cells)

    def flux(self, Q, gradQ, cells=None) -> np.ndarray:
        """Physical F_c - F_v stacked as (..., 4, 2)."""
        w = primitives(Q, self.gas, cells)
        f, g = convective_flux(Q, self.gas, w)
        if self.viscous:
            fv, gv = viscous_flux(Q, gradQ, self.gas, w)
            f = f - fv
            g = g - gv
        return np.stack([f, g], axis=-1)

    def normal_convective_flux(self, Q, n, prim: Primitives) -> np.ndarray:
        f, g = convective_flux(Q, self.gas, prim)
        return f * n[..., 0:1] + g * n[..., 1:2]

    def max_speed(self, prim: Primitives) -> np.ndarray:
        return np.hypot(prim.u, prim.v) + prim.a

    def direction_vectors(self, Q_avg, n, prim: Optional[Primitives] = None) -> Optional[np.ndarray]:
        if not self.viscous:
            return None
        return direction_vectors(Q_avg, n, self.gas, prim)

    def time_step_scales(self, Q, cells=None) -> Tuple[np.ndarray, np.ndarray]:
        """Wave speed a + |u| and diffusivity mu at each point."""
        w = primitives(Q, self.gas, cells)
        return np.hypot(w.u, w.v) + w.a, (w.mu if self.viscous else np.zeros_like(w.mu))
