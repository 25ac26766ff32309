"""
Unstructured triangular meshes: validation, edge connectivity, boundary tags,
periodic pairing and geometric metrics.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    DegenerateCellError,
    MeshTaggingError,
    MeshTopologyError,
    PeriodicMatchError,
)
from .parser import MeshFileParser, RawMesh

logger = logging.getLogger('ddgic-ns')

PERIODIC = 'periodic'
INFLOW_FARFIELD = 'inflow_farfield'
OUTFLOW = 'outflow'
ADIABATIC_WALL = 'adiabatic_wall'
SYMMETRY_PLANE = 'symmetry_plane'

BOUNDARY_KINDS = (PERIODIC, INFLOW_FARFIELD, OUTFLOW, ADIABATIC_WALL, SYMMETRY_PLANE)


@dataclass(frozen=True)
class BoundaryTag:
    """Boundary condition attached to a named set of boundary edges."""

    name: str
    kind: Optional[str] = None
    shift: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if self.kind is not None and self.kind not in BOUNDARY_KINDS:
            raise MeshTaggingError(f"Unknown boundary kind '{self.kind}' for tag '{self.name}'")
        if self.kind == PERIODIC and self.shift is None:
            raise MeshTaggingError(f"Periodic tag '{self.name}' needs a shift")


@dataclass
class InteriorEdges:
    """Edges shared by two cells; normals point out of the left cell."""

    left: np.ndarray
    right: np.ndarray
    left_edge: np.ndarray
    right_edge: np.ndarray
    normal: np.ndarray    # (n, 2)
    length: np.ndarray
    h: np.ndarray
    reversed: np.ndarray  # right-side trace parameter runs opposite to the left

    def __len__(self):
        return len(self.left)


@dataclass
class BoundaryEdges:
    """Edges owned by a single cell, each carrying a boundary tag."""

    cell: np.ndarray
    local_edge: np.ndarray
    normal: np.ndarray
    length: np.ndarray
    h: np.ndarray
    tag: np.ndarray       # tag names (object array)
    vertices: np.ndarray  # (n, 2) vertex indices in the owner's orientation

    def __len__(self):
        return len(self.cell)

    def select(self, names: Sequence[str]) -> np.ndarray:
        """Indices of the boundary edges whose tag is in ``names``."""
        return np.flatnonzero(np.isin(self.tag, list(names)))


@dataclass
class PeriodicPairing:
    """Bijection between two sets of boundary edges related by a translation."""

    shift: Tuple[float, float]
    source: np.ndarray    # boundary-edge indices
    target: np.ndarray    # boundary-edge indices
    reversed: np.ndarray

    def __len__(self):
        return len(self.source)


@dataclass
class Mesh:
    """Immutable triangular mesh with counterclockwise cells."""

    vertices: np.ndarray
    cells: np.ndarray
    cell_area: np.ndarray
    cell_diameter: np.ndarray
    interior_edges: InteriorEdges
    boundary_edges: BoundaryEdges
    tags: Dict[str, BoundaryTag]
    periodic_pairs: List[PeriodicPairing] = field(default_factory=list)
    name: str = 'mesh'

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    @property
    def h_min(self) -> float:
        return float(self.cell_diameter.min())

    @property
    def extent(self) -> float:
        """Diagonal of the bounding box."""
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(np.hypot(*(hi - lo)))

    @property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.cells].mean(axis=1)

    def edge_points(self, cell: int, local_edge: int) -> Tuple[np.ndarray, np.ndarray]:
        a = self.vertices[self.cells[cell, local_edge]]
        b = self.vertices[self.cells[cell, (local_edge + 1) % 3]]
        return a, b

    def summary(self) -> Dict:
        counts = {}
        for name in self.boundary_edges.tag:
            counts[name] = counts.get(name, 0) + 1
        return {
            'name': self.name,
            'vertices': len(self.vertices),
            'cells': self.num_cells,
            'interior_edges': len(self.interior_edges),
            'boundary_edges': len(self.boundary_edges),
            'periodic_pairs': sum(len(p) for p in self.periodic_pairs),
            'area': float(self.cell_area.sum()),
            'h_min': self.h_min,
            'h_max': float(self.cell_diameter.max()),
            'tags': {name: (self.tags[name].kind if name in self.tags else None, count)
                     for name, count in sorted(counts.items())},
        }


def signed_area(points: np.ndarray) -> np.ndarray:
    """Signed areas of triangles given as (..., 3, 2)."""
    a, b, c = points[..., 0, :], points[..., 1, :], points[..., 2, :]
    return 0.5 * ((b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1])
                  - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0]))


def inscribed_diameter(points) -> np.ndarray:
    """
    Diameter of the inscribed circle, 4 * area / perimeter.

    ``points`` is a single triangle (3, 2) or a stack (n, 3, 2).
    """
    points = np.asarray(points, dtype=float)
    area = np.abs(signed_area(points))
    perimeter = sum(np.linalg.norm(points[..., (i + 1) % 3, :] - points[..., i, :], axis=-1)
                    for i in range(3))
    if np.any(area <= 0.0):
        raise DegenerateCellError("Degenerate triangle (zero area)")
    return 4.0 * area / perimeter


def _outward_normals(vertices, cells):
    """Unit outward normals (nc, 3, 2) and lengths (nc, 3) of local edges e -> e+1."""
    a = vertices[cells]
    b = vertices[np.roll(cells, -1, axis=1)]
    t = b - a
    length = np.linalg.norm(t, axis=-1)
    normal = np.stack([t[..., 1], -t[..., 0]], axis=-1) / length[..., None]
    return normal, length


def build_mesh(raw: RawMesh, tags: Optional[Dict[str, BoundaryTag]] = None,
               name: str = 'mesh') -> Mesh:
    """
    Validate raw mesh data and build connectivity.

    Args:
        raw: vertices, triangles and tagged boundary segments
        tags: boundary tag table; when None every segment tag is accepted
            without a boundary kind and no periodic pairing is done
        name: label used in logs and summaries

    Returns:
        Mesh satisfying orientation, connectivity and tagging invariants
    """
    vertices = np.asarray(raw.vertices, dtype=float)
    triangles = np.array(raw.triangles, dtype=int)
    if triangles.ndim != 2 or triangles.shape[1] != 3 or len(triangles) == 0:
        raise MeshTopologyError("Mesh has no triangles")

    # drop unreferenced vertices
    used = np.unique(triangles)
    renumber = -np.ones(len(vertices), dtype=int)
    renumber[used] = np.arange(len(used))
    vertices = vertices[used]
    triangles = renumber[triangles]
    segments = []
    for v0, v1, tag in raw.segments:
        a, b = renumber[v0], renumber[v1]
        if a < 0 or b < 0:
            raise MeshTaggingError(f"Boundary segment ({v0}, {v1}) uses an unreferenced vertex")
        segments.append((int(a), int(b), tag))

    area = signed_area(vertices[triangles])
    scale = max(float(np.ptp(vertices[:, 0])), float(np.ptp(vertices[:, 1])), 1.0)
    degenerate = np.flatnonzero(np.abs(area) <= 1e-14 * scale ** 2)
    if len(degenerate):
        raise DegenerateCellError(f"Cell {int(degenerate[0])} has zero area")
    flipped = area < 0.0
    if np.any(flipped):
        logger.debug(f"Reoriented {int(flipped.sum())} clockwise cells")
        triangles[flipped] = triangles[flipped][:, [0, 2, 1]]
        area = np.abs(area)

    diameter = inscribed_diameter(vertices[triangles])
    normal, length = _outward_normals(vertices, triangles)

    # edge -> owners
    owners: Dict[Tuple[int, int], List[Tuple[int, int]]] = {}
    for c, tri in enumerate(triangles):
        for e in range(3):
            a, b = int(tri[e]), int(tri[(e + 1) % 3])
            owners.setdefault((min(a, b), max(a, b)), []).append((c, e))

    interior, boundary = [], []
    for key, own in owners.items():
        if len(own) == 2:
            interior.append(own)
        elif len(own) == 1:
            boundary.append(own[0])
        else:
            raise MeshTopologyError(f"Edge {key} is shared by {len(own)} cells")

    if interior:
        il = np.array([o[0][0] for o in interior])
        ile = np.array([o[0][1] for o in interior])
        ir = np.array([o[1][0] for o in interior])
        ire = np.array([o[1][1] for o in interior])
        # consistently oriented neighbours traverse a shared edge in opposite directions
        rev = triangles[il, ile] == triangles[ir, (ire + 1) % 3]
        if not np.all(rev):
            raise MeshTopologyError("Inconsistent orientation across an interior edge")
    else:
        il = ile = ir = ire = np.zeros(0, dtype=int)
        rev = np.zeros(0, dtype=bool)
    interior_edges = InteriorEdges(
        left=il, right=ir, left_edge=ile, right_edge=ire,
        normal=normal[il, ile].reshape(-1, 2), length=length[il, ile],
        h=0.5 * (diameter[il] + diameter[ir]), reversed=rev,
    )

    seg_tags = {}
    for a, b, tag in segments:
        seg_tags[(min(a, b), max(a, b))] = tag
    bc = np.array([o[0] for o in boundary], dtype=int)
    be = np.array([o[1] for o in boundary], dtype=int)
    names = []
    for c, e in boundary:
        a, b = int(triangles[c, e]), int(triangles[c, (e + 1) % 3])
        tag = seg_tags.get((min(a, b), max(a, b)))
        if tag is None:
            raise MeshTaggingError(f"Boundary edge ({a}, {b}) of cell {c} has no tag")
        names.append(tag)
    if tags is not None:
        missing = sorted(set(names) - set(tags))
        if missing:
            raise MeshTaggingError(f"No boundary condition for tag(s): {', '.join(missing)}")
        table = dict(tags)
    else:
        table = {n: BoundaryTag(n) for n in sorted(set(names))}

    boundary_edges = BoundaryEdges(
        cell=bc, local_edge=be,
        normal=normal[bc, be].reshape(-1, 2), length=length[bc, be],
        h=diameter[bc].copy(),
        tag=np.array(names, dtype=object),
        vertices=(np.stack([triangles[bc, be], triangles[bc, (be + 1) % 3]], axis=-1)
                  if len(bc) else np.zeros((0, 2), dtype=int)),
    )

    mesh = Mesh(vertices, triangles, area, diameter, interior_edges, boundary_edges,
                table, name=name)
    _check_closure(mesh, normal, length)
    if tags is not None:
        mesh.periodic_pairs = _pair_all(mesh)
    logger.debug(f"Built mesh {name}: {mesh.num_cells} cells, {len(interior_edges)} interior "
                 f"and {len(boundary_edges)} boundary edges")
    return mesh


def _check_closure(mesh: Mesh, normal, length):
    perimeter = length.sum(axis=1)
    residual = np.linalg.norm((normal * length[..., None]).sum(axis=1), axis=-1)
    bad = np.flatnonzero(residual > 1e-13 * perimeter)
    if len(bad):
        raise MeshTopologyError(f"Cell {int(bad[0])} does not close (sum n ds = {residual[bad[0]]:.3e})")


def _pair_all(mesh: Mesh) -> List[PeriodicPairing]:
    shifts = []
    for tag in mesh.tags.values():
        if tag.kind == PERIODIC:
            shift = tuple(float(s) for s in tag.shift)
            if shift not in shifts and tuple(-s for s in shift) not in shifts:
                shifts.append(shift)
    return [pair_periodic_edges(mesh, shift) for shift in shifts]


def pair_periodic_edges(mesh: Mesh, shift: Tuple[float, float]) -> PeriodicPairing:
    """
    Pair periodic edges tagged with ``shift`` to those tagged with ``-shift``.

    Each source edge translated by ``shift`` must coincide with exactly one
    target edge, within 1e-10 of the bounding-box diagonal.
    """
    shift = np.asarray(shift, dtype=float)
    edges = mesh.boundary_edges

    def tagged(sign):
        names = [t.name for t in mesh.tags.values()
                 if t.kind == PERIODIC and np.allclose(np.asarray(t.shift, dtype=float), sign * shift)]
        return edges.select(names)

    source = tagged(1.0)
    target = tagged(-1.0)
    if len(source) != len(target):
        raise PeriodicMatchError(
            f"Periodic shift {tuple(shift)}: {len(source)} source edges but {len(target)} targets"
        )
    if len(source) == 0:
        return PeriodicPairing(tuple(shift), source, target, np.zeros(0, dtype=bool))

    tol = 1e-10 * mesh.extent
    pts = mesh.vertices[edges.vertices]  # (nb, 2, 2)
    mid_target = pts[target].mean(axis=1)
    tree = cKDTree(mid_target)

    matched = np.empty(len(source), dtype=int)
    rev = np.empty(len(source), dtype=bool)
    for i, s in enumerate(source):
        a, b = pts[s, 0] + shift, pts[s, 1] + shift
        hits = tree.query_ball_point(0.5 * (a + b), tol)
        if len(hits) != 1:
            what = 'no' if not hits else 'an ambiguous'
            raise PeriodicMatchError(
                f"Periodic edge {pts[s, 0].tolist()}-{pts[s, 1].tolist()} has {what} "
                f"counterpart under shift {tuple(shift)}"
            )
        t = target[hits[0]]
        p, q = pts[t, 0], pts[t, 1]
        if np.linalg.norm(a - q) <= tol and np.linalg.norm(b - p) <= tol:
            rev[i] = True
        elif np.linalg.norm(a - p) <= tol and np.linalg.norm(b - q) <= tol:
            rev[i] = False
        else:
            raise PeriodicMatchError(f"Periodic edge endpoints do not translate onto edge {int(t)}")
        if abs(edges.length[s] - edges.length[t]) > 1e-12 * max(edges.length[s], 1.0):
            raise PeriodicMatchError(f"Periodic edges {int(s)} and {int(t)} differ in length")
        matched[i] = t

    if len(np.unique(matched)) != len(matched):
        raise PeriodicMatchError(f"Periodic shift {tuple(shift)} maps two edges onto one")
    return PeriodicPairing(tuple(shift), source, matched, rev)


def load_mesh(path: Path, tags: Optional[Dict[str, BoundaryTag]] = None,
              parser: Optional[MeshFileParser] = None) -> Mesh:
    """Load a native or Gmsh mesh file and build a validated Mesh."""
    parser = parser or MeshFileParser()
    raw = parser.parse(Path(path))
    return build_mesh(raw, tags, name=Path(path).stem)
