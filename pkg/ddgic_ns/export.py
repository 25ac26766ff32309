"""
Field output: legacy VTK, CSV samples and tables, and the reference-solution container.
"""

import logging
from dataclasses import asdict
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from .basis import build_basis
from .boundary import FreestreamState
from .ddgic import SolutionField
from .errors import ExportError
from .gas import GasModel, primitives, velocity_gradients
from .mesh import build_mesh
from .parser import RawMesh

logger = logging.getLogger('ddgic-ns')

VTK_TRIANGLE = 5
FIELD_NAMES = ('rho', 'u', 'v', 'p', 'mach', 'vorticity')


def subcell_lattice(m: int) -> Tuple[np.ndarray, np.ndarray]:
    """Reference points (i/m, j/m), i + j <= m, and the m^2 sub-triangles joining them."""
    m = max(1, int(m))
    index = {}
    points = []
    for j in range(m + 1):
        for i in range(m + 1 - j):
            index[i, j] = len(points)
            points.append((i / m, j / m))
    triangles = []
    for j in range(m):
        for i in range(m - j):
            triangles.append((index[i, j], index[i + 1, j], index[i, j + 1]))
            if i + j < m - 1:
                triangles.append((index[i + 1, j], index[i + 1, j + 1], index[i, j + 1]))
    return np.array(points), np.array(triangles, dtype=int)


def sample_flow(field: SolutionField, gas: GasModel, freestream: Optional[FreestreamState] = None,
                diameter: float = 1.0, subdivisions: Optional[int] = None):
    """
    Discontinuous per-cell samples of rho, u, v, p, Mach and omega D / U_inf.

    Returns (points (n, 2), triangles (t, 3), fields dict of (n,) arrays).
    """
    freestream = freestream or FreestreamState()
    rs, sub = subcell_lattice(subdivisions or max(1, field.degree))
    cells = np.arange(field.mesh.num_cells)
    Q, grad = field.evaluate(cells, rs, derivatives=True)
    npc = len(rs)
    Q = Q.reshape(-1, field.nvar)
    grad = grad.reshape(-1, field.nvar, 2)
    w = primitives(Q, gas)
    du, dv, _ = velocity_gradients(Q, grad, w)
    fields = {
        'rho': w.rho,
        'u': w.u,
        'v': w.v,
        'p': w.p,
        'mach': np.hypot(w.u, w.v) / w.a,
        'vorticity': (dv[:, 0] - du[:, 1]) * diameter / freestream.speed,
    }
    points = field.basis.to_physical(cells, rs).reshape(-1, 2)
    triangles = (sub[None, :, :] + npc * cells[:, None, None]).reshape(-1, 3)
    return points, triangles, fields


def write_vtk(path: Path, field: SolutionField, gas: GasModel,
              freestream: Optional[FreestreamState] = None, diameter: float = 1.0,
              title: str = 'ddgic-ns solution') -> Path:
    """Legacy ASCII VTK 2.0 unstructured grid with per-point scalars."""
    points, triangles, fields = sample_flow(field, gas, freestream, diameter)
    path = Path(path)
    try:
        with open(path, 'w', encoding='utf-8') as f:
            f.write("# vtk DataFile Version 2.0\n")
            f.write(f"{title} t={field.time:.17g}\n")
            f.write("ASCII\n")
            f.write("DATASET UNSTRUCTURED_GRID\n")
            f.write(f"POINTS {len(points)} double\n")
            for x, y in points:
                f.write(f"{x:.17g} {y:.17g} 0\n")
            f.write(f"\nCELLS {len(triangles)} {4 * len(triangles)}\n")
            for a, b, c in triangles:
                f.write(f"3 {a} {b} {c}\n")
            f.write(f"\nCELL_TYPES {len(triangles)}\n")
            f.write(f"{VTK_TRIANGLE}\n" * len(triangles))
            f.write(f"\nPOINT_DATA {len(points)}\n")
            for name in FIELD_NAMES:
                f.write(f"SCALARS {name} double 1\n")
                f.write("LOOKUP_TABLE default\n")
                f.write('\n'.join(f"{value:.17g}" for value in fields[name]))
                f.write('\n')
    except OSError as e:
        raise ExportError(f"Cannot write VTK file: {e}", str(path)) from e
    logger.debug(f"Wrote {path} ({len(triangles)} sub-triangles)")
    return path


def write_table(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Comma-separated table with a header row; floats keep 17 significant digits."""
    def fmt(value):
        if isinstance(value, (float, np.floating)):
            return f"{float(value):.17g}"
        return str(value)

    path = Path(path)
    try:
        with open(path, 'w', encoding='utf-8') as f:
            f.write(','.join(header) + '\n')
            for row in rows:
                f.write(','.join(fmt(value) for value in row) + '\n')
    except OSError as e:
        raise ExportError(f"Cannot write CSV file: {e}", str(path)) from e
    return path


def write_csv(path: Path, field: SolutionField, gas: GasModel,
              freestream: Optional[FreestreamState] = None, diameter: float = 1.0) -> Path:
    """One row per sample point: x, y, cell and the flow fields."""
    points, _, fields = sample_flow(field, gas, freestream, diameter)
    npc = len(points) // field.mesh.num_cells
    cell = np.repeat(np.arange(field.mesh.num_cells), npc)
    rows = (
        [float(points[i, 0]), float(points[i, 1]), int(cell[i])] + [float(fields[n][i]) for n in FIELD_NAMES]
        for i in range(len(points))
    )
    return write_table(path, ('x', 'y', 'cell') + FIELD_NAMES, rows)


def export_field(field: SolutionField, path: Path, fmt: str, gas: GasModel,
                 freestream: Optional[FreestreamState] = None, diameter: float = 1.0) -> Path:
    """Write ``field`` as 'vtk' or 'csv'."""
    if fmt == 'vtk':
        return write_vtk(path, field, gas, freestream, diameter)
    if fmt == 'csv':
        return write_csv(path, field, gas, freestream, diameter)
    raise ExportError(f"Unknown export format '{fmt}'", str(path))


def save_reference(path: Path, field: SolutionField, case: str, gas: GasModel) -> Path:
    """Store mesh, degree, coefficients, time and gas parameters in a .npz container."""
    mesh = field.mesh
    be = mesh.boundary_edges
    gas_items = asdict(gas)
    path = Path(path)
    try:
        np.savez(
            path,
            vertices=mesh.vertices,
            cells=mesh.cells,
            segments=np.asarray(be.vertices, dtype=int).reshape(-1, 2),
            segment_tags=np.array([str(t) for t in be.tag]),
            degree=np.array(field.degree),
            coefficients=field.coefficients,
            time=np.array(field.time),
            case=np.array(case),
            gas_keys=np.array(list(gas_items)),
            gas_values=np.array([str(v) for v in gas_items.values()]),
        )
    except OSError as e:
        raise ExportError(f"Cannot write reference solution: {e}", str(path)) from e
    if path.suffix != '.npz':
        path = path.with_name(path.name + '.npz')
    logger.debug(f"Saved reference solution {path}")
    return path


def load_reference(path: Path) -> Tuple[SolutionField, Dict]:
    """Rebuild the stored field; returns (field, metadata with 'case' and 'gas')."""
    path = Path(path)
    if not path.exists():
        raise ExportError("Reference solution not found", str(path))
    try:
        with np.load(path, allow_pickle=False) as data:
            stored = {key: data[key] for key in data.files}
    except (OSError, ValueError) as e:
        raise ExportError(f"Unreadable reference solution: {e}", str(path)) from e
    required = ('vertices', 'cells', 'segments', 'segment_tags', 'degree', 'coefficients', 'time')
    missing = [key for key in required if key not in stored]
    if missing:
        raise ExportError(f"Reference solution lacks {', '.join(missing)}", str(path))

    segments = [(int(a), int(b), str(tag)) for (a, b), tag in zip(stored['segments'], stored['segment_tags'])]
    mesh = build_mesh(RawMesh(stored['vertices'], stored['cells'], segments), name=path.stem)
    basis = build_basis(mesh, int(stored['degree']))
    coefficients = stored['coefficients']
    if coefficients.shape[0] != mesh.num_cells or coefficients.shape[2] != basis.count:
        raise ExportError("Coefficient array does not match the stored mesh and degree", str(path))
    field = SolutionField(mesh, basis, coefficients, float(stored['time']))
    gas = dict(zip(stored.get('gas_keys', []), stored.get('gas_values', [])))
    return field, {'case': str(stored.get('case', '')), 'gas': {str(k): str(v) for k, v in gas.items()}}
