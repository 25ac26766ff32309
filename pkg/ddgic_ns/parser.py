"""
Parser module for triangular mesh files (native text format and Gmsh 2.2 ASCII).
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple

import numpy as np

from .errors import MeshParseError


@dataclass
class RawMesh:
    """Unvalidated mesh data as read from a file."""

    vertices: np.ndarray                  # (nv, 2)
    triangles: np.ndarray                 # (nt, 3), 0-based
    segments: List[Tuple[int, int, str]]  # boundary segments with tag names


class MeshFileParser:
    """Reads native and Gmsh 2.2 ASCII mesh files."""

    def __init__(self):
        self.logger = None

    def set_logger(self, logger):
        """Set logger for this parser."""
        self.logger = logger

    def parse(self, filepath: Path) -> RawMesh:
        """
        Parse a mesh file, detecting its format from the first line.

        Args:
            filepath: Path to the mesh file

        Returns:
            RawMesh with vertices, triangles and tagged boundary segments
        """
        filepath = Path(filepath)
        if not filepath.exists():
            raise MeshParseError("Mesh file not found", str(filepath))
        try:
            with open(filepath, 'r', encoding='utf-8') as f:
                lines = f.read().splitlines()
        except OSError as e:
            raise MeshParseError(f"Cannot read mesh file: {e}", str(filepath))

        first = next((line.strip() for line in lines if line.strip()), '')
        if first.startswith('$MeshFormat'):
            raw = self.parse_gmsh(lines, str(filepath))
            fmt = 'gmsh'
        else:
            raw = self.parse_native(lines, str(filepath))
            fmt = 'native'

        if self.logger:
            self.logger.debug(
                f"Parsed {filepath.name} ({fmt}): {len(raw.vertices)} vertices, "
                f"{len(raw.triangles)} triangles, {len(raw.segments)} boundary segments"
            )
        return raw

    def parse_native(self, lines: List[str], source: str = '<native>') -> RawMesh:
        """
        Parse the native format.

        Line 1 holds ``NV NT NB``, followed by NV lines ``x y``, NT lines
        ``v0 v1 v2`` and NB lines ``v0 v1 tagname`` (0-based indices).
        """
        body = [(i + 1, line.split()) for i, line in enumerate(lines)
                if line.strip() and not line.lstrip().startswith('#')]
        if not body:
            raise MeshParseError("Empty mesh file", source)

        lineno, header = body[0]
        try:
            nv, nt, nb = (int(tok) for tok in header[:3])
        except ValueError:
            raise MeshParseError("Header must be 'NV NT NB'", source, lineno)
        if len(header) != 3:
            raise MeshParseError("Header must be 'NV NT NB'", source, lineno)
        if len(body) < 1 + nv + nt + nb:
            raise MeshParseError(
                f"Expected {nv + nt + nb} records after the header, found {len(body) - 1}", source
            )

        vertices = np.empty((nv, 2))
        triangles = np.empty((nt, 3), dtype=int)
        segments = []
        pos = 1
        for i in range(nv):
            lineno, toks = body[pos + i]
            try:
                vertices[i] = [float(toks[0]), float(toks[1])]
            except (ValueError, IndexError):
                raise MeshParseError("Vertex record must be 'x y'", source, lineno)
        pos += nv
        for i in range(nt):
            lineno, toks = body[pos + i]
            try:
                triangles[i] = [int(toks[0]), int(toks[1]), int(toks[2])]
            except (ValueError, IndexError):
                raise MeshParseError("Triangle record must be 'v0 v1 v2'", source, lineno)
        pos += nt
        for i in range(nb):
            lineno, toks = body[pos + i]
            try:
                segments.append((int(toks[0]), int(toks[1]), toks[2]))
            except (ValueError, IndexError):
                raise MeshParseError("Boundary record must be 'v0 v1 tagname'", source, lineno)

        self._check_indices(triangles, segments, nv, source)
        return RawMesh(vertices, triangles, segments)

    def parse_gmsh(self, lines: List[str], source: str = '<gmsh>') -> RawMesh:
        """
        Parse the Gmsh 2.2 ASCII subset: ``$PhysicalNames``, ``$Nodes`` and
        ``$Elements`` with element types 1 (boundary line) and 2 (triangle).

        Boundary tags are the physical names when present, otherwise the
        physical tag numbers.
        """
        names = {}
        node_index = {}
        coords = []
        triangles = []
        segments = []
        i = 0
        n = len(lines)
        try:
            while i < n:
                line = lines[i].strip()
                if line == '$MeshFormat':
                    version = lines[i + 1].split()[0]
                    if not version.startswith('2'):
                        raise MeshParseError(f"Unsupported Gmsh version {version}", source, i + 2)
                    i += 3
                elif line == '$PhysicalNames':
                    count = int(lines[i + 1])
                    for j in range(count):
                        toks = lines[i + 2 + j].split(maxsplit=2)
                        names[int(toks[1])] = toks[2].strip().strip('"')
                    i += count + 3
                elif line == '$Nodes':
                    count = int(lines[i + 1])
                    for j in range(count):
                        toks = lines[i + 2 + j].split()
                        node_index[int(toks[0])] = len(coords)
                        coords.append((float(toks[1]), float(toks[2])))
                    i += count + 3
                elif line == '$Elements':
                    count = int(lines[i + 1])
                    for j in range(count):
                        toks = [int(tok) for tok in lines[i + 2 + j].split()]
                        etype, ntags = toks[1], toks[2]
                        tags = toks[3:3 + ntags]
                        nodes = [node_index[t] for t in toks[3 + ntags:]]
                        physical = tags[0] if tags else 0
                        if etype == 1:
                            segments.append((nodes[0], nodes[1], names.get(physical, str(physical))))
                        elif etype == 2:
                            triangles.append(nodes[:3])
                    i += count + 3
                else:
                    i += 1
        except MeshParseError:
            raise
        except (ValueError, IndexError, KeyError) as e:
            raise MeshParseError(f"Malformed Gmsh section near line {i + 1}: {e}", source, i + 1)

        if not coords or not triangles:
            raise MeshParseError("Gmsh file has no nodes or no triangles", source)
        vertices = np.array(coords, dtype=float)
        tri = np.array(triangles, dtype=int)
        self._check_indices(tri, segments, len(vertices), source)
        return RawMesh(vertices, tri, segments)

    @staticmethod
    def _check_indices(triangles, segments, nv, source):
        if triangles.size and (triangles.min() < 0 or triangles.max() >= nv):
            raise MeshParseError("Triangle references a vertex out of range", source)
        for v0, v1, _ in segments:
            if not (0 <= v0 < nv and 0 <= v1 < nv):
                raise MeshParseError("Boundary segment references a vertex out of range", source)


def write_native(path: Path, vertices: np.ndarray, triangles: np.ndarray,
                 segments: List[Tuple[int, int, str]]) -> None:
    """Write a mesh in the native text format."""
    with open(path, 'w', encoding='utf-8') as f:
        f.write(f"{len(vertices)} {len(triangles)} {len(segments)}\n")
        for x, y in vertices:
            f.write(f"{float(x)!r} {float(y)!r}\n")
        for v0, v1, v2 in triangles:
            f.write(f"{v0} {v1} {v2}\n")
        for v0, v1, tag in segments:
            f.write(f"{v0} {v1} {tag}\n")
