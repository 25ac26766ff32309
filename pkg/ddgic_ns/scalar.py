"""
Scalar nonlinear diffusion u_t = div(A(u) grad u) on periodic meshes.

Two DDGIC discretizations share the face machinery of the system assembler:
the direction-vector scheme (flux grad_hat(u) . A({{u}})^T n) and the
antiderivative scheme, whose flux is built from jumps of b_ij(u) with
b_ij' = a_ij.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .ddgic import (
    EdgeTrace,
    FluxCoefficients,
    ResidualAssembler,
    SolutionField,
    ddg_gradient_flux,
)
from .errors import CompatibilityError, ConfigError, InadmissibleStateError

MatrixFunction = Callable[[np.ndarray], np.ndarray]


@dataclass
class ScalarDiffusionProblem:
    """
    Diffusion matrix A(u) with optional derivative and antiderivative.

    ``diffusion``, ``diffusion_derivative`` and ``antiderivative`` map an
    array u of any shape to matrices of shape u.shape + (2, 2).
    A missing derivative means A does not depend on u.
    """

    name: str
    diffusion: MatrixFunction
    initial: Callable
    diffusion_derivative: Optional[MatrixFunction] = None
    antiderivative: Optional[MatrixFunction] = None
    exact: Optional[Callable] = None

    def check_positive_definite(self, samples) -> None:
        A = self.diffusion(np.asarray(samples, dtype=float))
        sym = 0.5 * (A + np.swapaxes(A, -1, -2))
        if np.any(np.linalg.eigvalsh(sym) <= 0.0):
            raise ConfigError(f"Diffusion matrix of '{self.name}' is not positive definite on the sampled range")


def _constant(matrix) -> MatrixFunction:
    matrix = np.asarray(matrix, dtype=float)
    return lambda u: np.broadcast_to(matrix, np.shape(u) + (2, 2)).copy()


def linear_problem(matrix, initial: Optional[Callable] = None) -> ScalarDiffusionProblem:
    """Constant diffusion matrix with b(u) = A u."""
    matrix = np.asarray(matrix, dtype=float)
    return ScalarDiffusionProblem(
        name='linear',
        diffusion=_constant(matrix),
        initial=initial or (lambda x, y: np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y)),
        antiderivative=lambda u: np.asarray(u, dtype=float)[..., None, None] * matrix,
    )


def heat_problem() -> ScalarDiffusionProblem:
    """A = I with the decaying mode sin(2 pi x) sin(2 pi y) exp(-8 pi^2 t)."""
    problem = linear_problem(np.eye(2))
    problem.name = 'heat'
    problem.exact = lambda x, y, t: (np.exp(-8.0 * math.pi ** 2 * t)
                                     * np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y))
    return problem


def nonlinear_problem() -> ScalarDiffusionProblem:
    """A(u) = (1 + u^2) I with b(u) = (u + u^3 / 3) I."""
    eye = np.eye(2)

    def diffusion(u):
        u = np.asarray(u, dtype=float)
        return (1.0 + u * u)[..., None, None] * eye

    def derivative(u):
        return (2.0 * np.asarray(u, dtype=float))[..., None, None] * eye

    def antiderivative(u):
        u = np.asarray(u, dtype=float)
        return (u + u ** 3 / 3.0)[..., None, None] * eye

    return ScalarDiffusionProblem(
        name='nonlinear',
        diffusion=diffusion,
        diffusion_derivative=derivative,
        antiderivative=antiderivative,
        initial=lambda x, y: 0.5 * np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y),
    )


SCALAR_PROBLEMS = {
    'heat': heat_problem,
    'nonlinear': nonlinear_problem,
}


def _check_finite(Q, cells=None):
    bad = ~np.isfinite(Q)
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        cell = int(idx[0]) if cells is None else int(np.asarray(cells)[idx[0]])
        raise InadmissibleStateError("Non-finite value", cell=cell, variable='u')


class ScalarDiffusionEquation:
    """Single-variable diffusion seen by the residual assembler."""

    nvar = 1
    names = ('u',)
    convective = False

    def __init__(self, problem: ScalarDiffusionProblem):
        self.problem = problem

    def check(self, Q, cells=None):
        _check_finite(Q, cells)
        return None

    def flux(self, Q, gradQ, cells=None) -> np.ndarray:
        A = self.problem.diffusion(Q[..., 0])
        return -np.einsum('...ij,...j->...i', A, gradQ[..., 0, :])[..., None, :]

    def direction_vectors(self, Q_avg, n, prim=None) -> np.ndarray:
        A = self.problem.diffusion(Q_avg[..., 0])
        return np.einsum('...ij,...i->...j', A, n)[..., None, None, :]

    def time_step_scales(self, Q, cells=None):
        A = self.problem.diffusion(Q[..., 0])
        sym = 0.5 * (A + np.swapaxes(A, -1, -2))
        return np.zeros(Q.shape[:-1]), np.linalg.eigvalsh(sym)[..., -1]


class LinearDiffusionSystem:
    """``nvar`` decoupled copies of u_t = div(M grad u) with a constant matrix M."""

    convective = False

    def __init__(self, matrix, nvar: int = 4):
        self.matrix = np.asarray(matrix, dtype=float)
        self.nvar = nvar
        self.names = tuple(f"u{i + 1}" for i in range(nvar))

    def check(self, Q, cells=None):
        _check_finite(Q, cells)
        return None

    def flux(self, Q, gradQ, cells=None) -> np.ndarray:
        return -np.einsum('ij,...vj->...vi', self.matrix, gradQ)

    def direction_vectors(self, Q_avg, n, prim=None) -> np.ndarray:
        xi = np.einsum('ij,...i->...j', self.matrix, n)
        eye = np.eye(self.nvar)
        return eye[..., None] * xi[..., None, None, :]

    def time_step_scales(self, Q, cells=None):
        sym = 0.5 * (self.matrix + self.matrix.T)
        radius = float(np.linalg.eigvalsh(sym)[-1])
        return np.zeros(Q.shape[:-1]), np.full(Q.shape[:-1], radius)


def scalar_ddg_gradient_flux(trace: EdgeTrace, n, h_e, coeff: FluxCoefficients) -> np.ndarray:
    """(u_x_hat, u_y_hat) for scalar traces with shapes (...), (..., 2), (..., 2, 2)."""
    lifted = EdgeTrace(trace.q_minus[..., None], trace.q_plus[..., None],
                       trace.grad_minus[..., None, :], trace.grad_plus[..., None, :],
                       trace.hess_minus[..., None, :, :], trace.hess_plus[..., None, :, :])
    return ddg_gradient_flux(lifted, n, h_e, coeff)[..., 0, :]


class AntiderivativeAssembler(ResidualAssembler):
    """
    Residual of the antiderivative-based scheme.

    Flux component i of A grad u is
    (beta0 / h_e) [[b_ij]] n_j + {{a_ij u_xj}} + beta1 h_e [[b_ij,xk xj n_k]],
    and the interface correction pairs 1/2 [[b_ij]] n_i with d(phi)/dx_j.
    """

    def __init__(self, mesh, basis, problem: ScalarDiffusionProblem,
                 coeff: Optional[FluxCoefficients] = None, threads: int = 1):
        if problem.antiderivative is None:
            raise CompatibilityError(f"Problem '{problem.name}' has no antiderivative b_ij(u)")
        self.problem = problem
        super().__init__(mesh, basis, ScalarDiffusionEquation(problem), coeff=coeff, threads=threads)

    def _face_fluxes(self, trace: EdgeTrace, n, h, cells_minus, cells_plus):
        problem = self.problem
        nq = trace.q_minus.shape[1]
        n = np.broadcast_to(n[:, None, :], (len(n), nq, 2))
        h = np.broadcast_to(h[:, None], (len(h), nq))[..., None]
        self.physics.check(trace.q_minus, cells_minus)
        self.physics.check(trace.q_plus, cells_plus)

        um, up = trace.q_minus[..., 0], trace.q_plus[..., 0]
        gm, gp = trace.grad_minus[..., 0, :], trace.grad_plus[..., 0, :]
        hm, hp = trace.hess_minus[..., 0, :, :], trace.hess_plus[..., 0, :, :]
        am, ap = problem.diffusion(um), problem.diffusion(up)
        db = problem.antiderivative(up) - problem.antiderivative(um)

        flux = (self.coeff.beta0 / h) * np.einsum('...ij,...j->...i', db, n) \
            + 0.5 * (np.einsum('...ij,...j->...i', am, gm) + np.einsum('...ij,...j->...i', ap, gp))
        if self.coeff.beta1 != 0.0:
            def second(a, u, g, H):
                # sum_j sum_k d2 b_ij / dx_k dx_j n_k
                value = np.einsum('...ij,...j->...i', a, np.einsum('...kj,...k->...j', H, n))
                if problem.diffusion_derivative is not None:
                    gn = np.sum(g * n, axis=-1, keepdims=True)
                    value = value + np.einsum('...ij,...j->...i', problem.diffusion_derivative(u), g) * gn
                return value
            flux = flux + self.coeff.beta1 * h * (second(ap, up, gp, hp) - second(am, um, gm, hm))

        normal_flux = -np.sum(flux * n, axis=-1)[..., None]
        correction = 0.5 * np.einsum('...ij,...i->...j', db, n)[..., None, :]
        return normal_flux, correction


def scalar_residual_new(field: SolutionField, problem: ScalarDiffusionProblem,
                        coeff: Optional[FluxCoefficients] = None) -> np.ndarray:
    """Direction-vector DDGIC rates for a scalar field."""
    assembler = ResidualAssembler(field.mesh, field.basis, ScalarDiffusionEquation(problem), coeff=coeff)
    return assembler(field.coefficients, field.time)


def scalar_residual_original(field: SolutionField, problem: ScalarDiffusionProblem,
                             coeff: Optional[FluxCoefficients] = None) -> np.ndarray:
    """Antiderivative-based DDGIC rates for a scalar field."""
    assembler = AntiderivativeAssembler(field.mesh, field.basis, problem, coeff)
    return assembler(field.coefficients, field.time)
