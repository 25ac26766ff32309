"""
Quadrature rules on the reference triangle and on the unit interval.

Triangle rules are stored with barycentric points and weights normalized to
sum to one, so that ``sum(w * f) * area`` integrates ``f`` over a physical
cell. The reference triangle has vertices (0,0), (1,0), (0,1).
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi

logger = logging.getLogger('ddgic-ns')


@dataclass(frozen=True)
class TriangleRule:
    """Symmetric or collapsed-product rule on the reference triangle."""

    name: str
    degree: int
    barycentric: np.ndarray  # (n, 3)
    weights: np.ndarray      # (n,), sum to 1

    @property
    def points(self) -> np.ndarray:
        """Reference coordinates (r, s) of the quadrature points."""
        return self.barycentric[:, 1:3]

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def is_positive(self) -> bool:
        return bool(np.all(self.weights > 0.0))


@dataclass(frozen=True)
class EdgeRule:
    """Gauss-Legendre rule on [0, 1] with weights summing to one."""

    degree: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class QuadratureRule:
    """Volume and edge rules used together for a polynomial degree k."""

    volume: TriangleRule
    edge: EdgeRule

    @property
    def omega(self) -> float:
        return min_quadrature_weight(self)


def _orbit3(a: float) -> List[List[float]]:
    b = 1.0 - 2.0 * a
    return [[b, a, a], [a, b, a], [a, a, b]]


def _symmetric_rule(name: str, degree: int, orbits) -> TriangleRule:
    bary = []
    weights = []
    for weight, a in orbits:
        if a is None:
            bary.append([1.0 / 3.0] * 3)
            weights.append(weight)
        else:
            pts = _orbit3(a)
            bary.extend(pts)
            weights.extend([weight] * len(pts))
    return TriangleRule(name, degree, np.array(bary, dtype=float), np.array(weights, dtype=float))


_SQRT15 = math.sqrt(15.0)

# Tabulated symmetric rules, weights normalized to the reference measure.
TABULATED_RULES = (
    _symmetric_rule('centroid-1', 1, [(1.0, None)]),
    _symmetric_rule('strang-fix-3', 2, [(1.0 / 3.0, 1.0 / 6.0)]),
    _symmetric_rule('strang-fix-4', 3, [(-27.0 / 48.0, None), (25.0 / 48.0, 0.2)]),
    _symmetric_rule('dunavant-6', 4, [
        (0.223381589678011, 0.445948490915965),
        (0.109951743655322, 0.091576213509771),
    ]),
    _symmetric_rule('radon-7', 5, [
        (9.0 / 40.0, None),
        ((155.0 - _SQRT15) / 1200.0, (6.0 - _SQRT15) / 21.0),
        ((155.0 + _SQRT15) / 1200.0, (6.0 + _SQRT15) / 21.0),
    ]),
)


def collapsed_rule(degree: int) -> TriangleRule:
    """
    Conical-product rule exact for polynomials of total degree ``degree``.

    Gauss-Legendre points in the collapsed coordinate a and Gauss-Jacobi(1, 0)
    points in b are mapped through r = a(1 - b), s = b. All weights are
    positive for every degree.
    """
    n = max(1, int(math.ceil((degree + 1) / 2.0)))
    xa, wa = leggauss(n)
    xb, wb = roots_jacobi(n, 1.0, 0.0)
    a = 0.5 * (xa + 1.0)
    b = 0.5 * (xb + 1.0)
    aa, bb = np.meshgrid(a, b, indexing='ij')
    ww = np.outer(wa, wb)
    r = (aa * (1.0 - bb)).ravel()
    s = bb.ravel()
    w = ww.ravel()
    w = w / w.sum()
    bary = np.column_stack([1.0 - r - s, r, s])
    return TriangleRule(f'collapsed-{n}x{n}', degree, bary, w)


def volume_rule(degree: int) -> TriangleRule:
    """
    Return the positive-weight rule with the fewest points exact to ``degree``.

    Tabulated rules with a negative weight are never selected.
    """
    degree = max(int(degree), 1)
    candidates = []
    for rule in TABULATED_RULES:
        if rule.degree < degree:
            continue
        if not rule.is_positive:
            logger.debug(f"Rejected quadrature rule {rule.name}: negative weight")
            continue
        candidates.append(rule)
    candidates.append(collapsed_rule(degree))
    candidates.sort(key=lambda rule: rule.size)
    return candidates[0]


def edge_rule(degree: int) -> EdgeRule:
    """Gauss-Legendre rule on [0, 1] exact to ``degree``, mirror-symmetric."""
    n = max(1, int(math.ceil((degree + 1) / 2.0)))
    x, w = leggauss(n)
    points = 0.5 * (x + 1.0)
    # upper half is the mirror of the lower half; both sides of an edge see identical weights
    half = n // 2
    points[n - half:] = 1.0 - points[:half][::-1]
    if n % 2:
        points[half] = 0.5
    w = 0.5 * (w + w[::-1])
    return EdgeRule(degree, points, 0.5 * w)


def rules_for_degree(k: int, exactness: Optional[int] = None) -> QuadratureRule:
    """Rules exact to 2k + 1 unless ``exactness`` is given."""
    degree = 2 * k + 1 if exactness is None else exactness
    return QuadratureRule(volume_rule(degree), edge_rule(degree))


def min_quadrature_weight(rule) -> float:
    """Minimum volume weight of ``rule`` normalized so the weights sum to one."""
    volume = rule.volume if isinstance(rule, QuadratureRule) else rule
    weights = np.asarray(volume.weights, dtype=float)
    return float(weights.min() / weights.sum())


def reference_monomial_integral(a: int, b: int) -> float:
    """Exact integral of r^a s^b over the reference triangle."""
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


def duffy_sample_points(n: int = 19) -> np.ndarray:
    """
    ``n`` x ``n`` tensor grid on the unit square collapsed onto the reference triangle.

    With the default n = 19 this gives the 361 samples per cell used for
    maximum-norm errors.
    """
    t = np.linspace(0.0, 1.0, n)
    aa, bb = np.meshgrid(t, t, indexing='ij')
    r = (aa * (1.0 - bb)).ravel()
    s = bb.ravel()
    return np.column_stack([r, s])
