"""
Ghost states for weakly imposed boundary conditions.

Given the interior trace (Q, grad Q, Hessian Q) at boundary quadrature points
and the outward unit normal, each kind builds the exterior trace that the
numerical fluxes and the interface correction consume. Periodic edges never
reach this module: they are coupled to their partner edge by the assembler.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import ConfigError, InadmissibleStateError
from .gas import GasModel, conserved, primitives, velocity_gradients
from .mesh import (
    ADIABATIC_WALL,
    INFLOW_FARFIELD,
    OUTFLOW,
    PERIODIC,
    SYMMETRY_PLANE,
    BoundaryTag,
)

Trace = Tuple[np.ndarray, np.ndarray, np.ndarray]


@dataclass(frozen=True)
class FreestreamState:
    """Uniform reference state (rho, u, v, p)."""

    rho: float = 1.0
    u: float = 1.0
    v: float = 0.0
    p: float = 1.0

    def __post_init__(self):
        if not (self.rho > 0.0 and self.p > 0.0):
            raise ConfigError(f"Freestream state must have positive density and pressure: {self}")

    @property
    def speed(self) -> float:
        return float(np.hypot(self.u, self.v))

    def conserved(self, gas: GasModel) -> np.ndarray:
        return conserved(self.rho, self.u, self.v, self.p, gas)

    def dynamic_pressure(self) -> float:
        return 0.5 * self.rho * self.speed ** 2


def _farfield(Q, grad, hess, n, gas, freestream, back_pressure):
    ghost = np.broadcast_to(freestream.conserved(gas), Q.shape).copy()
    return ghost, grad.copy(), hess.copy()


def _outflow(Q, grad, hess, n, gas, freestream, back_pressure):
    w = primitives(Q, gas)
    p_b = freestream.p if back_pressure is None else back_pressure
    p_ghost = 2.0 * p_b - w.p
    if np.any(p_ghost <= 0.0):
        point = int(np.argwhere(p_ghost <= 0.0)[0][-1])
        raise InadmissibleStateError("Outflow ghost pressure is nonpositive (interior p exceeds 2 p_b)",
                                     point=point, variable='p')
    ghost = Q.copy()
    ghost[..., 3] = p_ghost / (gas.gamma - 1.0) + 0.5 * w.rho * (w.u ** 2 + w.v ** 2)
    return ghost, grad.copy(), hess.copy()


def _adiabatic_wall(Q, grad, hess, n, gas, freestream, back_pressure):
    w = primitives(Q, gas)
    ghost = Q.copy()
    ghost[..., 1:3] = 0.0
    # wall pressure equals the interior pressure, so E+ reduces to E-
    ghost[..., 3] = w.p / (gas.gamma - 1.0) + 0.5 * w.rho * (w.u ** 2 + w.v ** 2)

    du, dv, de = velocity_gradients(Q, grad, w)
    de_n = np.sum(de * n, axis=-1, keepdims=True)
    de_wall = de - de_n * n
    drho = grad[..., 0, :]
    # grad of 1/2 rho |u|^2 from the interior
    dkin = w.u[..., None] * grad[..., 1, :] + w.v[..., None] * grad[..., 2, :] \
        - 0.5 * (w.u ** 2 + w.v ** 2)[..., None] * drho
    ghost_grad = grad.copy()
    ghost_grad[..., 3, :] = drho * w.e[..., None] + w.rho[..., None] * de_wall + dkin
    return ghost, ghost_grad, hess.copy()


def _symmetry_plane(Q, grad, hess, n, gas, freestream, back_pressure):
    primitives(Q, gas)
    ghost = Q.copy()
    mn = np.sum(Q[..., 1:3] * n, axis=-1, keepdims=True)
    ghost[..., 1:3] = Q[..., 1:3] - 2.0 * mn * n
    dn = np.sum(grad * n[..., None, :], axis=-1, keepdims=True)
    ghost_grad = grad - 2.0 * dn * n[..., None, :]
    return ghost, ghost_grad, hess.copy()


GHOST_BUILDERS = {
    INFLOW_FARFIELD: _farfield,
    OUTFLOW: _outflow,
    ADIABATIC_WALL: _adiabatic_wall,
    SYMMETRY_PLANE: _symmetry_plane,
}


def ghost_state(kind: str, interior: Trace, n, freestream: FreestreamState, gas: GasModel,
                back_pressure: Optional[float] = None) -> Trace:
    """
    Exterior trace (Q+, grad Q+, Hessian Q+) for a boundary of the given kind.

    Args:
        kind: boundary kind (not periodic)
        interior: (Q, grad Q, Hessian Q) with shapes (..., 4), (..., 4, 2), (..., 4, 2, 2)
        n: outward unit normal, broadcastable to (..., 2)
        freestream: far-field reference state
        gas: gas model
        back_pressure: outflow exit pressure, defaults to the freestream pressure
    """
    if kind == PERIODIC:
        raise ConfigError("Periodic edges are coupled to their partner, not given a ghost state")
    builder = GHOST_BUILDERS.get(kind)
    if builder is None:
        raise ConfigError(f"Unknown boundary kind '{kind}'")
    Q, grad, hess = (np.asarray(a, dtype=float) for a in interior)
    n = np.broadcast_to(np.asarray(n, dtype=float), Q.shape[:-1] + (2,))
    return builder(Q, grad, hess, n, gas, freestream, back_pressure)


class BoundaryConditions:
    """Boundary tag table together with the reference values the ghost states need."""

    def __init__(self, tags: Dict[str, BoundaryTag], gas: GasModel,
                 freestream: Optional[FreestreamState] = None,
                 back_pressure: Optional[float] = None):
        self.tags = dict(tags)
        self.gas = gas
        self.freestream = freestream or FreestreamState()
        self.back_pressure = back_pressure

    def kind(self, name: str) -> str:
        tag = self.tags.get(name)
        if tag is None or tag.kind is None:
            raise ConfigError(f"No boundary condition for tag '{name}'", key=f"bc.{name}")
        return tag.kind

    def ghost(self, kind: str, interior: Trace, n) -> Trace:
        return ghost_state(kind, interior, n, self.freestream, self.gas, self.back_pressure)
