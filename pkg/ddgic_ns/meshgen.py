"""
Built-in mesh families: periodic unit square, stretched flat plate, cylinder O-grid.
"""

import logging
from typing import Dict, Tuple

import numpy as np

from .errors import MeshError
from .mesh import (
    ADIABATIC_WALL,
    INFLOW_FARFIELD,
    OUTFLOW,
    PERIODIC,
    SYMMETRY_PLANE,
    BoundaryTag,
    Mesh,
    build_mesh,
)
from .parser import RawMesh

logger = logging.getLogger('ddgic-ns')

BASE_SEGMENT = 0.2


def _triangulate_grid(index: np.ndarray, flip: np.ndarray) -> np.ndarray:
    """Split each grid quad (i, j) into two triangles along one of its diagonals."""
    a = index[:-1, :-1].ravel()
    b = index[1:, :-1].ravel()
    c = index[1:, 1:].ravel()
    d = index[:-1, 1:].ravel()
    f = flip.ravel()
    t1 = np.where(f[:, None], np.stack([a, b, d], 1), np.stack([a, b, c], 1))
    t2 = np.where(f[:, None], np.stack([b, c, d], 1), np.stack([a, c, d], 1))
    return np.concatenate([t1, t2])


def square_tags() -> Dict[str, BoundaryTag]:
    return {
        'left': BoundaryTag('left', PERIODIC, (1.0, 0.0)),
        'right': BoundaryTag('right', PERIODIC, (-1.0, 0.0)),
        'bottom': BoundaryTag('bottom', PERIODIC, (0.0, 1.0)),
        'top': BoundaryTag('top', PERIODIC, (0.0, -1.0)),
    }


def unit_square(level: int = 0, jitter: float = 0.15, seed: int = 1) -> RawMesh:
    """
    Jittered triangulation of [0,1]^2 with boundary segments h = 0.2 / 2**level.

    Interior vertices move by up to ``jitter * h`` in each direction and the
    quad diagonals are chosen at random, so cells are irregular but the
    boundary segmentation matches on opposite sides.
    """
    if level < 0:
        raise MeshError(f"Mesh level must be nonnegative, got {level}")
    n = int(round(1.0 / BASE_SEGMENT)) * 2 ** level
    h = 1.0 / n
    rng = np.random.default_rng(seed + level)
    x, y = np.meshgrid(np.linspace(0.0, 1.0, n + 1), np.linspace(0.0, 1.0, n + 1), indexing='ij')
    inner = (slice(1, n), slice(1, n))
    x[inner] += jitter * h * rng.uniform(-1.0, 1.0, size=(n - 1, n - 1))
    y[inner] += jitter * h * rng.uniform(-1.0, 1.0, size=(n - 1, n - 1))
    vertices = np.column_stack([x.ravel(), y.ravel()])
    index = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    triangles = _triangulate_grid(index, rng.random((n, n)) < 0.5)

    segments = []
    for j in range(n):
        segments.append((index[0, j], index[0, j + 1], 'left'))
        segments.append((index[n, j], index[n, j + 1], 'right'))
        segments.append((index[j, 0], index[j + 1, 0], 'bottom'))
        segments.append((index[j, n], index[j + 1, n], 'top'))
    return RawMesh(vertices, triangles, segments)


def _geometric(n: int, ratio: float) -> np.ndarray:
    """``n + 1`` points on [0, 1] whose spacing grows by ``ratio``."""
    if abs(ratio - 1.0) < 1e-12:
        return np.linspace(0.0, 1.0, n + 1)
    steps = ratio ** np.arange(n)
    return np.concatenate([[0.0], np.cumsum(steps) / steps.sum()])


def plate_tags() -> Dict[str, BoundaryTag]:
    return {
        'inflow': BoundaryTag('inflow', INFLOW_FARFIELD),
        'farfield': BoundaryTag('farfield', INFLOW_FARFIELD),
        'outflow': BoundaryTag('outflow', OUTFLOW),
        'symmetry': BoundaryTag('symmetry', SYMMETRY_PLANE),
        'wall': BoundaryTag('wall', ADIABATIC_WALL),
    }


def flat_plate(plate_cells: int = 32, upstream_cells: int = 16, vertical_cells: int = 20,
               plate_ratio: float = 1.08, upstream_ratio: float = 1.15,
               vertical_ratio: float = 1.3) -> RawMesh:
    """
    Stretched mesh of [-1,1] x [0,1] clustered at the wall and the leading edge x = 0.

    The symmetry plane covers -1 < x < 0 and the adiabatic plate 0 < x < 1.
    """
    xs_plate = _geometric(plate_cells, plate_ratio)
    xs_up = -_geometric(upstream_cells, upstream_ratio)[::-1]
    xs = np.concatenate([xs_up[:-1], xs_plate])
    ys = _geometric(vertical_cells, vertical_ratio)
    nx, ny = len(xs) - 1, len(ys) - 1
    x, y = np.meshgrid(xs, ys, indexing='ij')
    vertices = np.column_stack([x.ravel(), y.ravel()])
    index = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing='ij')
    triangles = _triangulate_grid(index, (ii + jj) % 2 == 1)

    segments = []
    for j in range(ny):
        segments.append((index[0, j], index[0, j + 1], 'inflow'))
        segments.append((index[nx, j], index[nx, j + 1], 'outflow'))
    for i in range(nx):
        segments.append((index[i, ny], index[i + 1, ny], 'farfield'))
        tag = 'wall' if xs[i] >= 0.0 else 'symmetry'
        segments.append((index[i, 0], index[i + 1, 0], tag))
    return RawMesh(vertices, triangles, segments)


def cylinder_tags() -> Dict[str, BoundaryTag]:
    return {
        'cylinder': BoundaryTag('cylinder', ADIABATIC_WALL),
        'farfield': BoundaryTag('farfield', INFLOW_FARFIELD),
    }


def cylinder(wall_cells: int = 41, radial_cells: int = 40, diameter: float = 1.0,
             far_radius: float = 20.0) -> RawMesh:
    """
    O-grid around a cylinder centred at the origin, 2 * wall_cells * radial_cells triangles.

    Radii grow geometrically from D/2 to ``far_radius`` (in diameters).
    """
    r0 = 0.5 * diameter
    r1 = far_radius * diameter
    radii = r0 * (r1 / r0) ** (np.arange(radial_cells + 1) / radial_cells)
    theta = 2.0 * np.pi * np.arange(wall_cells) / wall_cells
    rr, tt = np.meshgrid(radii, theta, indexing='ij')
    vertices = np.column_stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()])
    index = np.arange((radial_cells + 1) * wall_cells).reshape(radial_cells + 1, wall_cells)
    wrapped = np.concatenate([index, index[:, :1]], axis=1)
    ii, jj = np.meshgrid(np.arange(radial_cells), np.arange(wall_cells), indexing='ij')
    triangles = _triangulate_grid(wrapped, (ii + jj) % 2 == 1)

    segments = []
    for j in range(wall_cells):
        segments.append((wrapped[0, j], wrapped[0, j + 1], 'cylinder'))
        segments.append((wrapped[-1, j], wrapped[-1, j + 1], 'farfield'))
    return RawMesh(vertices, triangles, segments)


BUILTIN_MESHES = {
    'square': (unit_square, square_tags),
    'plate': (flat_plate, plate_tags),
    'cylinder': (cylinder, cylinder_tags),
}


def parse_builtin(label: str) -> Tuple[str, Dict]:
    """Split ``square:2`` or ``cylinder`` into a family name and generator options."""
    name, _, arg = label.partition(':')
    name = name.strip().lower()
    if name not in BUILTIN_MESHES:
        raise MeshError(f"Unknown built-in mesh '{label}' (choose from {', '.join(BUILTIN_MESHES)})")
    options = {}
    if arg:
        if name != 'square':
            raise MeshError(f"Built-in mesh '{name}' takes no level")
        try:
            options['level'] = int(arg)
        except ValueError:
            raise MeshError(f"Mesh level must be an integer, got '{arg}'")
    return name, options


def builtin_mesh(label: str, tags: Dict[str, BoundaryTag] = None, seed: int = None) -> Mesh:
    """Generate a built-in mesh such as ``square:1``, ``plate`` or ``cylinder``."""
    name, options = parse_builtin(label)
    if seed is not None and name == 'square':
        options['seed'] = seed
    generator, default_tags = BUILTIN_MESHES[name]
    raw = generator(**options)
    mesh = build_mesh(raw, tags if tags is not None else default_tags(), name=label)
    logger.debug(f"Generated built-in mesh {label} with {mesh.num_cells} cells")
    return mesh
