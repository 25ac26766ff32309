"""
Semi-discrete DDGIC residual for systems with nonlinear diffusion.

The residual of mode j on cell K is

    int_K (F_c - F_v) . grad(phi_j)
    - oint_dK (Fc_hat - Fv_hat) . n phi_j
    - oint_dK I_corr(phi_j) . n
    + int_K S phi_j

with Fc_hat the local Lax-Friedrichs flux, Fv_hat . n assembled from the
DDG gradient flux of every conserved variable along the direction vectors
xi^(lm) = A^(lm)({{Q}})^T n, and I_corr = 1/2 sum_m [[Q^m]] xi^(lm) . grad(phi_j).
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .basis import BasisSet
from .boundary import BoundaryConditions
from .errors import ConfigError, InadmissibleStateError
from .gas import GasModel, NavierStokesEquations
from .mesh import PERIODIC, Mesh

logger = logging.getLogger('ddgic-ns')


@dataclass(frozen=True)
class FluxCoefficients:
    """Penalty beta0 and second-derivative jump beta1 of the DDG gradient flux."""

    beta0: float
    beta1: float

    @classmethod
    def for_degree(cls, k: int) -> 'FluxCoefficients':
        beta1 = 1.0 / (2.0 * k * (k + 1)) if k >= 2 else 0.0
        return cls(float((k + 1) ** 2), beta1)


BETA_TABLE = {1: (4.0, 0.0), 2: (9.0, 1.0 / 12.0), 3: (16.0, 1.0 / 24.0), 4: (25.0, 1.0 / 40.0)}

for _k, (_b0, _b1) in BETA_TABLE.items():
    _c = FluxCoefficients.for_degree(_k)
    if _c.beta0 != _b0 or abs(_c.beta1 - _b1) > 1e-15:
        raise RuntimeError(f"Flux coefficient table mismatch at k={_k}")


@dataclass
class EdgeTrace:
    """Traces from both sides of an edge at its quadrature points."""

    q_minus: np.ndarray     # (..., nvar)
    q_plus: np.ndarray
    grad_minus: np.ndarray  # (..., nvar, 2)
    grad_plus: np.ndarray
    hess_minus: np.ndarray  # (..., nvar, 2, 2)
    hess_plus: np.ndarray

    @property
    def jump(self) -> np.ndarray:
        return self.q_plus - self.q_minus

    @property
    def average(self) -> np.ndarray:
        return 0.5 * (self.q_plus + self.q_minus)

    @property
    def grad_average(self) -> np.ndarray:
        return 0.5 * (self.grad_plus + self.grad_minus)

    def normal_hessian_jump(self, n) -> np.ndarray:
        """[[H n]] per variable, (..., nvar, 2)."""
        n = np.asarray(n, dtype=float)
        return (np.einsum('...vij,...j->...vi', self.hess_plus, n)
                - np.einsum('...vij,...j->...vi', self.hess_minus, n))


def _as_physics(model):
    return NavierStokesEquations(model) if isinstance(model, GasModel) else model


def ddg_gradient_flux(trace: EdgeTrace, n, h_e, coeff: FluxCoefficients) -> np.ndarray:
    """
    Numerical gradient of every variable, (..., nvar, 2).

    (beta0 / h_e) [[Q]] n + {{grad Q}} + beta1 h_e [[H n]]; ``n`` broadcasts to
    (..., 2) and ``h_e`` to the leading shape.
    """
    n = np.asarray(n, dtype=float)
    h_e = np.asarray(h_e, dtype=float)[..., None, None]
    flux = (coeff.beta0 / h_e) * trace.jump[..., None] * n[..., None, :] + trace.grad_average
    if coeff.beta1 != 0.0:
        flux = flux + coeff.beta1 * h_e * trace.normal_hessian_jump(n)
    return flux


def viscous_numerical_flux(trace: EdgeTrace, n, h_e, coeff: FluxCoefficients, model,
                           xi: Optional[np.ndarray] = None) -> np.ndarray:
    """Fv_hat . n, (..., nvar): row l is sum_m grad_hat Q^m . xi^(lm)({{Q}})."""
    physics = _as_physics(model)
    grad_hat = ddg_gradient_flux(trace, n, h_e, coeff)
    if xi is None:
        xi = physics.direction_vectors(trace.average, np.asarray(n, dtype=float))
    return np.einsum('...mj,...lmj->...l', grad_hat, xi)


def convective_numerical_flux(q_minus, q_plus, n, model) -> np.ndarray:
    """Local Lax-Friedrichs flux {{f_c}} n1 + {{g_c}} n2 - alpha [[Q]]."""
    physics = _as_physics(model)
    q_minus = np.asarray(q_minus, dtype=float)
    q_plus = np.asarray(q_plus, dtype=float)
    n = np.broadcast_to(np.asarray(n, dtype=float), q_minus.shape[:-1] + (2,))
    pm = physics.check(q_minus)
    pp = physics.check(q_plus)
    alpha = np.maximum(physics.max_speed(pm), physics.max_speed(pp))
    average = 0.5 * (physics.normal_convective_flux(q_minus, n, pm)
                     + physics.normal_convective_flux(q_plus, n, pp))
    return average - alpha[..., None] * (q_plus - q_minus)


def correction_vectors(trace: EdgeTrace, xi: np.ndarray) -> np.ndarray:
    """1/2 sum_m [[Q^m]] xi^(lm), (..., nvar, 2); dotting with grad(phi_j) gives I_corr."""
    return 0.5 * np.einsum('...m,...lmj->...lj', trace.jump, xi)


def interface_correction(trace: EdgeTrace, n, model, grad_phi) -> np.ndarray:
    """I_corr . n for one test-function gradient, (..., nvar)."""
    physics = _as_physics(model)
    xi = physics.direction_vectors(trace.average, np.asarray(n, dtype=float))
    return np.einsum('...lj,...j->...l', correction_vectors(trace, xi), np.asarray(grad_phi, dtype=float))


def residual_norm(rates: np.ndarray) -> np.ndarray:
    """Euclidean norm of the rates of every conserved variable over all cells and modes."""
    rates = np.asarray(rates, dtype=float)
    return np.sqrt(np.einsum('cvb,cvb->v', rates, rates))


@dataclass
class SolutionField:
    """Modal coefficients (nc, nvar, nb) on a mesh at a given time."""

    mesh: Mesh
    basis: BasisSet
    coefficients: np.ndarray
    time: float = 0.0

    @classmethod
    def project(cls, mesh: Mesh, basis: BasisSet, func: Callable, nvar: int,
                time: float = 0.0) -> 'SolutionField':
        return cls(mesh, basis, basis.project(func, nvar), time)

    @property
    def degree(self) -> int:
        return self.basis.degree

    @property
    def nvar(self) -> int:
        return self.coefficients.shape[1]

    def copy(self) -> 'SolutionField':
        return SolutionField(self.mesh, self.basis, self.coefficients.copy(), self.time)

    def volume_values(self) -> np.ndarray:
        """Values at the volume quadrature points, (nc, nq, nvar)."""
        return np.einsum('cqb,cvb->cqv', self.basis.volume.phi, self.coefficients)

    def evaluate(self, cells, rs, derivatives: bool = False):
        """Values (and gradients) of the field at reference points of ``cells``."""
        cells = np.atleast_1d(np.asarray(cells, dtype=int))
        phi, grad, _ = self.basis.evaluate(cells, rs)
        coeffs = self.coefficients[cells]
        values = np.einsum('cqb,cvb->cqv', phi, coeffs)
        if not derivatives:
            return values
        return values, np.einsum('cqbd,cvb->cqvd', grad, coeffs)

    def cell_averages(self) -> np.ndarray:
        return self.coefficients[:, :, 0] / np.sqrt(self.mesh.cell_area)[:, None]

    def totals(self) -> np.ndarray:
        """Domain integral of every variable."""
        return (self.coefficients[:, :, 0] * np.sqrt(self.mesh.cell_area)[:, None]).sum(axis=0)


@dataclass
class _FaceTables:
    """Static basis data of one group of faces gathered at aligned quadrature points."""

    cells: np.ndarray
    phi: np.ndarray   # (nf, nq, nb)
    grad: np.ndarray  # (nf, nq, nb, 2)
    hess: np.ndarray  # (nf, nq, nb, 2, 2)

    @classmethod
    def gather(cls, basis: BasisSet, cells, edges, reverse) -> '_FaceTables':
        nq = basis.rules.edge.size
        q = np.arange(nq)
        qidx = np.where(np.asarray(reverse, dtype=bool)[:, None], nq - 1 - q[None, :], q[None, :])
        c = np.asarray(cells, dtype=int)[:, None]
        e = np.asarray(edges, dtype=int)[:, None]
        return cls(np.asarray(cells, dtype=int), basis.trace.phi[c, e, qidx],
                   basis.trace.grad[c, e, qidx], basis.trace.hess[c, e, qidx])

    def trace(self, coefficients):
        coeffs = coefficients[self.cells]
        return (np.einsum('fqb,fvb->fqv', self.phi, coeffs),
                np.einsum('fqbd,fvb->fqvd', self.grad, coeffs),
                np.einsum('fqbde,fvb->fqvde', self.hess, coeffs))


class ResidualAssembler:
    """
    Assembles dQ/dt for every cell and mode.

    Interior and periodic faces are visited once: the single-valued flux is
    scattered to both neighbours with opposite signs, while the interface
    correction is applied to each side with its own test-function gradients.
    """

    def __init__(self, mesh: Mesh, basis: BasisSet, physics, boundary: Optional[BoundaryConditions] = None,
                 coeff: Optional[FluxCoefficients] = None, source: Optional[Callable] = None,
                 threads: int = 1):
        self.mesh = mesh
        self.basis = basis
        self.physics = physics
        self.boundary = boundary
        self.coeff = coeff or FluxCoefficients.for_degree(basis.degree)
        self.source = source
        self.threads = max(1, int(threads))
        self.logger = None
        self.evaluations = 0
        self._build_faces()

    def set_logger(self, logger):
        """Set logger for this assembler."""
        self.logger = logger

    def _build_faces(self):
        mesh, basis = self.mesh, self.basis
        edge_w = basis.rules.edge.weights
        ie = mesh.interior_edges
        be = mesh.boundary_edges

        left, right = [ie.left], [ie.right]
        left_edge, right_edge = [ie.left_edge], [ie.right_edge]
        normal, length, h, rev = [ie.normal], [ie.length], [ie.h], [ie.reversed]
        for pairing in mesh.periodic_pairs:
            s, t = pairing.source, pairing.target
            left.append(be.cell[s])
            right.append(be.cell[t])
            left_edge.append(be.local_edge[s])
            right_edge.append(be.local_edge[t])
            normal.append(be.normal[s])
            length.append(be.length[s])
            h.append(0.5 * (mesh.cell_diameter[be.cell[s]] + mesh.cell_diameter[be.cell[t]]))
            rev.append(pairing.reversed)

        self.face_left = np.concatenate(left).astype(int)
        self.face_right = np.concatenate(right).astype(int)
        self.face_normal = np.concatenate(normal).reshape(-1, 2)
        self.face_h = np.concatenate(h)
        self.face_weights = np.concatenate(length)[:, None] * edge_w[None, :]
        nf = len(self.face_left)
        self._left = _FaceTables.gather(basis, self.face_left, np.concatenate(left_edge),
                                        np.zeros(nf, dtype=bool))
        self._right = _FaceTables.gather(basis, self.face_right, np.concatenate(right_edge),
                                         np.concatenate(rev))

        periodic_names = [name for name, tag in mesh.tags.items() if tag.kind == PERIODIC]
        paired = set()
        for pairing in mesh.periodic_pairs:
            paired.update(pairing.source.tolist())
            paired.update(pairing.target.tolist())
        unpaired = [int(i) for i in be.select(periodic_names) if int(i) not in paired]
        if unpaired:
            raise ConfigError(f"{len(unpaired)} periodic boundary edges have no partner")

        self.boundary_groups = []
        others = np.array([i for i in range(len(be)) if be.tag[i] not in periodic_names], dtype=int)
        if len(others):
            if self.boundary is None:
                raise ConfigError("Mesh has non-periodic boundary edges but no boundary conditions")
            kinds = np.array([self.boundary.kind(be.tag[i]) for i in others])
            for kind in sorted(set(kinds)):
                idx = others[kinds == kind]
                tables = _FaceTables.gather(basis, be.cell[idx], be.local_edge[idx],
                                            np.zeros(len(idx), dtype=bool))
                self.boundary_groups.append({
                    'kind': kind,
                    'edges': idx,
                    'tables': tables,
                    'normal': be.normal[idx],
                    'h': be.h[idx],
                    'weights': be.length[idx][:, None] * edge_w[None, :],
                })
        logger.debug(f"Assembler: {nf} coupled faces, "
                     f"{sum(len(g['edges']) for g in self.boundary_groups)} boundary faces")

    def _face_fluxes(self, trace: EdgeTrace, n, h, cells_minus, cells_plus):
        """Normal flux (Fc_hat - Fv_hat) . n and correction vectors at face points."""
        physics = self.physics
        nq = trace.q_minus.shape[1]
        n_pts = np.broadcast_to(n[:, None, :], (len(n), nq, 2))
        h_pts = np.broadcast_to(h[:, None], (len(h), nq))
        pm = physics.check(trace.q_minus, cells_minus)
        pp = physics.check(trace.q_plus, cells_plus)

        flux = np.zeros_like(trace.q_minus)
        if getattr(physics, 'convective', True):
            alpha = np.maximum(physics.max_speed(pm), physics.max_speed(pp))
            flux = 0.5 * (physics.normal_convective_flux(trace.q_minus, n_pts, pm)
                          + physics.normal_convective_flux(trace.q_plus, n_pts, pp)) \
                - alpha[..., None] * trace.jump

        correction = None
        average = trace.average
        xi = physics.direction_vectors(average, n_pts, physics.check(average, cells_minus))
        if xi is not None:
            flux = flux - viscous_numerical_flux(trace, n_pts, h_pts, self.coeff, physics, xi=xi)
            correction = correction_vectors(trace, xi)
        return flux, correction

    def _volume(self, coefficients, cells, t):
        vol = self.basis.volume
        phi, grad, w = vol.phi[cells], vol.grad[cells], vol.weights[cells]
        coeffs = coefficients[cells]
        Q = np.einsum('cqb,cvb->cqv', phi, coeffs)
        dQ = np.einsum('cqbd,cvb->cqvd', grad, coeffs)
        F = self.physics.flux(Q, dQ, cells)
        rates = np.einsum('cq,cqvd,cqbd->cvb', w, F, grad)
        if self.source is not None:
            xy = vol.xy[cells]
            S = np.asarray(self.source(xy[..., 0], xy[..., 1], t), dtype=float)
            rates += np.einsum('cq,cqv,cqb->cvb', w, S, phi)
        return rates

    def volume_terms(self, coefficients, t: float = 0.0) -> np.ndarray:
        nc = self.mesh.num_cells
        if self.threads == 1 or nc < 2 * self.threads:
            return self._volume(coefficients, np.arange(nc), t)
        chunks = np.array_split(np.arange(nc), self.threads)
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            parts = list(pool.map(lambda idx: self._volume(coefficients, idx, t), chunks))
        return np.concatenate(parts)

    def __call__(self, coefficients: np.ndarray, t: float = 0.0) -> np.ndarray:
        return self.compute(coefficients, t)

    def compute(self, coefficients: np.ndarray, t: float = 0.0) -> np.ndarray:
        """Residual rates (nc, nvar, nb) for the given coefficients at time ``t``."""
        coefficients = np.asarray(coefficients, dtype=float)
        rates = self.volume_terms(coefficients, t)

        if len(self.face_left):
            qm, gm, hm = self._left.trace(coefficients)
            qp, gp, hp = self._right.trace(coefficients)
            trace = EdgeTrace(qm, qp, gm, gp, hm, hp)
            flux, corr = self._face_fluxes(trace, self.face_normal, self.face_h,
                                           self.face_left, self.face_right)
            w = self.face_weights
            np.add.at(rates, self.face_left, -np.einsum('fq,fqv,fqb->fvb', w, flux, self._left.phi))
            np.add.at(rates, self.face_right, np.einsum('fq,fqv,fqb->fvb', w, flux, self._right.phi))
            if corr is not None:
                np.add.at(rates, self.face_left,
                          -np.einsum('fq,fqvd,fqbd->fvb', w, corr, self._left.grad))
                np.add.at(rates, self.face_right,
                          -np.einsum('fq,fqvd,fqbd->fvb', w, corr, self._right.grad))

        for group in self.boundary_groups:
            tables = group['tables']
            qm, gm, hm = tables.trace(coefficients)
            self.physics.check(qm, tables.cells)
            qp, gp, hp = self.boundary.ghost(group['kind'], (qm, gm, hm), group['normal'][:, None, :])
            trace = EdgeTrace(qm, qp, gm, gp, hm, hp)
            flux, corr = self._face_fluxes(trace, group['normal'], group['h'],
                                           tables.cells, tables.cells)
            w = group['weights']
            np.add.at(rates, tables.cells, -np.einsum('fq,fqv,fqb->fvb', w, flux, tables.phi))
            if corr is not None:
                np.add.at(rates, tables.cells, -np.einsum('fq,fqvd,fqbd->fvb', w, corr, tables.grad))

        self.evaluations += 1
        if not np.all(np.isfinite(rates)):
            cell = int(np.argwhere(~np.isfinite(rates))[0][0])
            raise InadmissibleStateError("Non-finite residual", cell=cell)
        return rates

    def check(self, coefficients: np.ndarray):
        """Admissibility of the field at every volume quadrature point."""
        Q = np.einsum('cqb,cvb->cqv', self.basis.volume.phi, coefficients)
        return self.physics.check(Q)


def compute_residual(field: SolutionField, physics, boundary: Optional[BoundaryConditions] = None,
                     coeff: Optional[FluxCoefficients] = None, source: Optional[Callable] = None,
                     threads: int = 1) -> np.ndarray:
    """One-shot residual of ``field``; build a ResidualAssembler to reuse face tables."""
    assembler = ResidualAssembler(field.mesh, field.basis, _as_physics(physics), boundary, coeff,
                                  source, threads)
    return assembler(field.coefficients, field.time)


def variable_names(physics) -> Sequence[str]:
    return tuple(getattr(physics, 'names', [f"u{i}" for i in range(physics.nvar)]))
