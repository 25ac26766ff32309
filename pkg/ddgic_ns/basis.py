"""
Orthonormal modal bases on affine triangles.

The reference basis is obtained by Gram-Schmidt (through a Cholesky
factorization of the Gram matrix) of centred monomials on the reference
triangle, then rescaled by 1/sqrt(det J) on each physical cell so that
the physical basis is orthonormal in L2(K).
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import DegenerateCellError
from .quadrature import QuadratureRule, collapsed_rule, rules_for_degree

logger = logging.getLogger('ddgic-ns')

REFERENCE_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
REFERENCE_AREA = 0.5


def basis_count(k: int) -> int:
    """Number of modes N_b = (k+1)(k+2)/2."""
    return (k + 1) * (k + 2) // 2


def monomial_exponents(k: int) -> np.ndarray:
    """Exponents (a, b) ordered by total degree, constant first."""
    pairs = [(d - b, b) for d in range(k + 1) for b in range(d + 1)]
    return np.array(pairs, dtype=int)


def _centred_monomials(k: int, rs: np.ndarray):
    """Values, gradients and Hessians of (r-1/3)^a (s-1/3)^b at points ``rs``."""
    rs = np.atleast_2d(rs)
    x = rs[:, 0] - 1.0 / 3.0
    y = rs[:, 1] - 1.0 / 3.0
    exps = monomial_exponents(k)
    a = exps[:, 0]
    b = exps[:, 1]

    def power(base, e):
        e = np.asarray(e)
        out = np.where(e[None, :] >= 0, base[:, None] ** np.maximum(e, 0)[None, :], 0.0)
        return out

    xa, yb = power(x, a), power(y, b)
    xa1, yb1 = power(x, a - 1), power(y, b - 1)
    xa2, yb2 = power(x, a - 2), power(y, b - 2)

    values = xa * yb
    grads = np.stack([a * xa1 * yb, b * xa * yb1], axis=-1)
    hess = np.empty(values.shape + (2, 2))
    hess[..., 0, 0] = a * (a - 1) * xa2 * yb
    hess[..., 1, 1] = b * (b - 1) * xa * yb2
    hess[..., 0, 1] = a * b * xa1 * yb1
    hess[..., 1, 0] = hess[..., 0, 1]
    return values, grads, hess


def reference_coefficients(k: int) -> np.ndarray:
    """Lower-triangular map C with phi_hat = C @ monomials, orthonormal on the reference triangle."""
    rule = collapsed_rule(2 * k)
    values, _, _ = _centred_monomials(k, rule.points)
    w = rule.weights * REFERENCE_AREA
    gram = values.T @ (w[:, None] * values)
    chol = np.linalg.cholesky(gram)
    return np.linalg.inv(chol)


@dataclass
class TraceTable:
    """Basis data at the edge quadrature points of every cell and local edge."""

    xy: np.ndarray      # (nc, 3, nqe, 2)
    phi: np.ndarray     # (nc, 3, nqe, nb)
    grad: np.ndarray    # (nc, 3, nqe, nb, 2)
    hess: np.ndarray    # (nc, 3, nqe, nb, 2, 2)


@dataclass
class VolumeTable:
    """Basis data at the volume quadrature points of every cell."""

    xy: np.ndarray       # (nc, nq, 2)
    weights: np.ndarray  # (nc, nq), physical weights (sum to area)
    phi: np.ndarray      # (nc, nq, nb)
    grad: np.ndarray     # (nc, nq, nb, 2)


@dataclass
class BasisSet:
    """Per-cell orthonormal basis of degree k with tabulated values and derivatives."""

    degree: int
    count: int
    origin: np.ndarray        # (nc, 2), image of reference vertex 0
    jacobian: np.ndarray      # (nc, 2, 2), columns v1-v0, v2-v0
    inverse_jacobian: np.ndarray
    det: np.ndarray           # (nc,)
    coefficients: np.ndarray  # (nb, nb)
    rules: QuadratureRule
    volume: VolumeTable = field(repr=False)
    trace: TraceTable = field(repr=False)

    @property
    def num_cells(self) -> int:
        return len(self.det)

    @property
    def scale(self) -> np.ndarray:
        return 1.0 / np.sqrt(self.det)

    def reference_tabulation(self, rs: np.ndarray):
        """Reference values (n, nb), gradients (n, nb, 2), Hessians (n, nb, 2, 2)."""
        values, grads, hess = _centred_monomials(self.degree, rs)
        c = self.coefficients
        return (values @ c.T,
                np.einsum('ij,njd->nid', c, grads),
                np.einsum('ij,njde->nide', c, hess))

    def evaluate(self, cells, rs: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Evaluate the physical basis of ``cells`` at reference points.

        ``rs`` is either (n, 2), shared by all cells, or (len(cells), n, 2).
        Returns values (nc, n, nb), gradients (nc, n, nb, 2) and Hessians
        (nc, n, nb, 2, 2).
        """
        cells = np.atleast_1d(np.asarray(cells, dtype=int))
        rs = np.asarray(rs, dtype=float)
        scale = self.scale[cells]
        g = np.transpose(self.inverse_jacobian[cells], (0, 2, 1))  # J^{-T}
        if rs.ndim == 2:
            v, dv, hv = self.reference_tabulation(rs)
            values = v[None] * scale[:, None, None]
            grads = np.einsum('cij,qbj->cqbi', g, dv) * scale[:, None, None, None]
            hess = np.einsum('cik,qbkl,cjl->cqbij', g, hv, g) * scale[:, None, None, None, None]
            return values, grads, hess
        n = rs.shape[1]
        v, dv, hv = self.reference_tabulation(rs.reshape(-1, 2))
        v = v.reshape(len(cells), n, self.count)
        dv = dv.reshape(len(cells), n, self.count, 2)
        hv = hv.reshape(len(cells), n, self.count, 2, 2)
        values = v * scale[:, None, None]
        grads = np.einsum('cij,cqbj->cqbi', g, dv) * scale[:, None, None, None]
        hess = np.einsum('cik,cqbkl,cjl->cqbij', g, hv, g) * scale[:, None, None, None, None]
        return values, grads, hess

    def to_physical(self, cells, rs: np.ndarray) -> np.ndarray:
        cells = np.atleast_1d(np.asarray(cells, dtype=int))
        rs = np.asarray(rs, dtype=float)
        if rs.ndim == 2:
            return self.origin[cells, None, :] + np.einsum('cij,qj->cqi', self.jacobian[cells], rs)
        return self.origin[cells, None, :] + np.einsum('cij,cqj->cqi', self.jacobian[cells], rs)

    def to_reference(self, cells, xy: np.ndarray) -> np.ndarray:
        """Inverse affine map; ``xy`` has shape (len(cells), 2) or (len(cells), n, 2)."""
        cells = np.atleast_1d(np.asarray(cells, dtype=int))
        xy = np.asarray(xy, dtype=float)
        if xy.ndim == 2:
            return np.einsum('cij,cj->ci', self.inverse_jacobian[cells], xy - self.origin[cells])
        return np.einsum('cij,cqj->cqi', self.inverse_jacobian[cells], xy - self.origin[cells, None, :])

    def project(self, func, nvar: int) -> np.ndarray:
        """
        L2-project ``func(x, y) -> (..., nvar)`` onto the basis.

        Returns coefficients of shape (nc, nvar, nb).
        """
        xy = self.volume.xy
        values = np.asarray(func(xy[..., 0], xy[..., 1]), dtype=float).reshape(xy.shape[:2] + (nvar,))
        return np.einsum('cq,cqv,cqb->cvb', self.volume.weights, values, self.volume.phi)


def edge_reference_points(edge: int, s: np.ndarray) -> np.ndarray:
    """Reference coordinates of parameter ``s`` along local edge ``edge`` (vertex e to e+1)."""
    s = np.asarray(s, dtype=float)
    a = REFERENCE_VERTICES[edge]
    b = REFERENCE_VERTICES[(edge + 1) % 3]
    return a[None, :] + s.reshape(-1, 1) * (b - a)[None, :]


def build_basis(mesh, k: int, rules: Optional[QuadratureRule] = None) -> BasisSet:
    """
    Build and tabulate the orthonormal basis of degree ``k`` on every cell of ``mesh``.

    Args:
        mesh: Mesh instance
        k: polynomial degree (1..4 tested, higher accepted)
        rules: quadrature rules, exact to 2k+1 by default

    Returns:
        BasisSet with volume and trace tables
    """
    if k < 0:
        raise ValueError(f"Polynomial degree must be nonnegative, got {k}")
    rules = rules or rules_for_degree(k)
    verts = mesh.vertices[mesh.cells]  # (nc, 3, 2)
    origin = verts[:, 0, :]
    jac = np.stack([verts[:, 1, :] - origin, verts[:, 2, :] - origin], axis=-1)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    bad = np.flatnonzero(det <= 0.0)
    if len(bad):
        raise DegenerateCellError(f"Cell {int(bad[0])} has a nonpositive Jacobian")
    inv = np.empty_like(jac)
    inv[:, 0, 0] = jac[:, 1, 1] / det
    inv[:, 1, 1] = jac[:, 0, 0] / det
    inv[:, 0, 1] = -jac[:, 0, 1] / det
    inv[:, 1, 0] = -jac[:, 1, 0] / det

    coeffs = reference_coefficients(k)
    nb = basis_count(k)
    basis = BasisSet(k, nb, origin, jac, inv, det, coeffs, rules,
                     volume=None, trace=None)

    cells = np.arange(len(det))
    vol_pts = rules.volume.points
    phi, grad, _ = basis.evaluate(cells, vol_pts)
    basis.volume = VolumeTable(
        xy=basis.to_physical(cells, vol_pts),
        weights=rules.volume.weights[None, :] * (0.5 * det)[:, None],
        phi=phi,
        grad=grad,
    )

    xy_t, phi_t, grad_t, hess_t = [], [], [], []
    for edge in range(3):
        rs = edge_reference_points(edge, rules.edge.points)
        p, g, h = basis.evaluate(cells, rs)
        xy_t.append(basis.to_physical(cells, rs))
        phi_t.append(p)
        grad_t.append(g)
        hess_t.append(h)
    basis.trace = TraceTable(
        xy=np.stack(xy_t, axis=1),
        phi=np.stack(phi_t, axis=1),
        grad=np.stack(grad_t, axis=1),
        hess=np.stack(hess_t, axis=1),
    )
    logger.debug(f"Built degree-{k} basis on {len(det)} cells ({nb} modes, "
                 f"{rules.volume.size} volume points, {rules.edge.size} edge points)")
    return basis


def eval_trace(basis: BasisSet, cell: int, edge: int, s):
    """
    Values, gradients and Hessians of all basis functions of ``cell`` on local ``edge``.

    ``s`` is the edge parameter in [0, 1] (scalar or array).
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    rs = edge_reference_points(edge, s)
    values, grads, hess = basis.evaluate([cell], rs)
    return values[0], grads[0], hess[0]
