"""STL input, background grids and legacy VTK output.

Binary STL layout: an 80-byte header, a little-endian uint32 triangle count,
then 50-byte records of 12 float32 values (normal + 3 corners) followed by a
2-byte attribute.  The ASCII variant uses the ``solid``/``facet``/``vertex``
keywords.  Stored facet normals are read but never used: the corner winding is
the orientation.
"""
from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

HEADER_BYTES = 80
RECORD_BYTES = 50
_RECORD = np.dtype([("normal", "<f4", (3,)), ("corners", "<f4", (3, 3)), ("attr", "<u2")])

VTK_TRIANGLE = 5
VTK_POLYGON = 7
VTK_TETRA = 10


class StlParseError(ValueError):
    pass


class MeshError(ValueError):
    """Welded mesh is not a closed, consistently oriented 2-manifold."""

    def __init__(self, message: str, kind: str = "non-manifold"):
        super().__init__(message)
        self.kind = kind


@dataclass
class TriangleSoup:
    triangles: np.ndarray  # (n, 3, 3) float64 corners
    normals: np.ndarray  # (n, 3) stored facet normals (ignored downstream)
    header: str = ""
    binary: bool = True

    def __len__(self) -> int:
        return len(self.triangles)

    def area(self) -> float:
        a, b, c = self.triangles[:, 0], self.triangles[:, 1], self.triangles[:, 2]
        return math.fsum(0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1))


def _looks_ascii(data: bytes) -> bool:
    if not data.lstrip()[:5].lower() == b"solid":
        return False
    if len(data) >= HEADER_BYTES + 4:
        count = int.from_bytes(data[HEADER_BYTES:HEADER_BYTES + 4], "little")
        if HEADER_BYTES + 4 + RECORD_BYTES * count == len(data):
            # some binary exporters write "solid" into the header
            return False
    return b"facet" in data[:4096] or b"endsolid" in data


def parse_stl(data: bytes) -> TriangleSoup:
    """Parse binary or ASCII STL content."""
    if not data:
        raise StlParseError("empty input")
    if _looks_ascii(data):
        return _parse_ascii(data.decode("ascii", errors="replace"))
    return _parse_binary(data)


def _parse_binary(data: bytes) -> TriangleSoup:
    if len(data) < HEADER_BYTES + 4:
        raise StlParseError(f"truncated: header/count incomplete at byte offset {len(data)}")
    count = int.from_bytes(data[HEADER_BYTES:HEADER_BYTES + 4], "little")
    expected = HEADER_BYTES + 4 + RECORD_BYTES * count
    if len(data) < expected:
        nfull = (len(data) - HEADER_BYTES - 4) // RECORD_BYTES
        offset = HEADER_BYTES + 4 + RECORD_BYTES * nfull
        raise StlParseError(
            f"truncated: record {nfull} of {count} incomplete at byte offset {offset}")
    if len(data) > expected:
        raise StlParseError(
            f"triangle count mismatch: header says {count} records, "
            f"file holds {(len(data) - HEADER_BYTES - 4) / RECORD_BYTES:g}")
    rec = np.frombuffer(data, dtype=_RECORD, count=count, offset=HEADER_BYTES + 4)
    tris = rec["corners"].astype(np.float64)
    if not np.all(np.isfinite(tris)):
        bad = int(np.nonzero(~np.isfinite(tris).all(axis=(1, 2)))[0][0])
        raise StlParseError(
            f"non-finite coordinate in record {bad} at byte offset "
            f"{HEADER_BYTES + 4 + RECORD_BYTES * bad}")
    header = data[:HEADER_BYTES].split(b"\0", 1)[0].decode("ascii", errors="replace")
    return TriangleSoup(tris, rec["normal"].astype(np.float64), header.strip(), True)


_FLOAT = r"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?nan|[-+]?inf)"
_FACET = re.compile(
    r"facet\s+normal\s+" + r"\s+".join([_FLOAT] * 3) + r"\s+outer\s+loop\s+"
    + r"\s+".join([r"vertex\s+" + r"\s+".join([_FLOAT] * 3)] * 3)
    + r"\s+endloop\s+endfacet", re.IGNORECASE)


def _parse_ascii(text: str) -> TriangleSoup:
    first = text.lstrip().split("\n", 1)[0]
    header = first[5:].strip()
    values = []
    pos = 0
    nfacet = len(re.findall(r"\bfacet\b", text, re.IGNORECASE))
    for m in _FACET.finditer(text):
        values.append([float(v) for v in m.groups()])
        pos = m.end()
    if len(values) != nfacet:
        raise StlParseError(
            f"truncated: malformed facet block after character offset {pos} "
            f"({len(values)} of {nfacet} facets parsed)")
    if not values:
        raise StlParseError("truncated: no facet blocks found")
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr[:, 3:])):
        raise StlParseError("non-finite vertex coordinate")
    return TriangleSoup(arr[:, 3:].reshape(-1, 3, 3), arr[:, :3], header, False)


def read_stl(path) -> TriangleSoup:
    return parse_stl(Path(path).read_bytes())


def stl_bytes(triangles, binary: bool = True, header: str = "cutcell") -> bytes:
    """Serialize corner triples to STL (normals are written from the winding)."""
    tris = np.asarray(triangles, dtype=np.float64).reshape(-1, 3, 3)
    n = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
    norm = np.linalg.norm(n, axis=1)
    n = np.divide(n, norm[:, None], out=np.zeros_like(n), where=norm[:, None] > 0)
    if binary:
        rec = np.zeros(len(tris), dtype=_RECORD)
        rec["normal"] = n
        rec["corners"] = tris
        head = header.encode("ascii")[:HEADER_BYTES].ljust(HEADER_BYTES, b"\0")
        return head + len(tris).to_bytes(4, "little") + rec.tobytes()
    lines = [f"solid {header}"]
    for t, nn in zip(tris, n):
        lines.append("  facet normal {:.17g} {:.17g} {:.17g}".format(*nn))
        lines.append("    outer loop")
        for p in t:
            lines.append("      vertex {:.17g} {:.17g} {:.17g}".format(*p))
        lines.append("    endloop")
        lines.append("  endfacet")
    lines.append(f"endsolid {header}")
    return ("\n".join(lines) + "\n").encode("ascii")


def write_stl(path, triangles, binary: bool = True) -> None:
    Path(path).write_bytes(stl_bytes(triangles, binary))


@dataclass
class SurfaceMesh:
    """Welded closed triangle mesh; faces are counter-clockwise seen from outside."""

    vertices: np.ndarray
    faces: np.ndarray
    edges: np.ndarray = field(repr=False, default=None)  # (E, 2) sorted vertex pairs
    edge_faces: np.ndarray = field(repr=False, default=None)  # (E, 2) incident faces

    @property
    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def triangles(self) -> np.ndarray:
        return self.vertices[self.faces]

    def face_areas(self) -> np.ndarray:
        t = self.triangles()
        return 0.5 * np.linalg.norm(np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]), axis=1)

    def area(self) -> float:
        return math.fsum(self.face_areas())

    def volume(self) -> float:
        t = self.triangles()
        return math.fsum(np.einsum("ij,ij->i", t[:, 0], np.cross(t[:, 1], t[:, 2]))) / 6.0


def weld(soup: TriangleSoup, eps_weld: float = 0.0) -> SurfaceMesh:
    """Merge coincident corners and check the result is a closed oriented manifold.

    With ``eps_weld == 0`` only bitwise-equal coordinates are merged.  Vertex ids
    follow the order of first appearance in the soup.
    """
    corners = soup.triangles.reshape(-1, 3)
    if len(corners) == 0:
        raise MeshError("empty triangle soup", "non-manifold")
    if eps_weld > 0:
        from scipy.sparse import coo_matrix
        from scipy.sparse.csgraph import connected_components
        from scipy.spatial import cKDTree

        pairs = cKDTree(corners).query_pairs(eps_weld, output_type="ndarray")
        n = len(corners)
        g = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
        _, label = connected_components(g, directed=False)
        key = label
    else:
        _, key = np.unique(corners, axis=0, return_inverse=True)
        key = key.ravel()
    # renumber by first appearance
    _, first, inverse = np.unique(key, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    ids = rank[inverse.ravel()]
    vertices = corners[np.sort(first)]
    faces = ids.reshape(-1, 3).astype(np.int64)

    collapsed = (faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 0] == faces[:, 2])
    if eps_weld > 0:
        faces = faces[~collapsed]
    elif collapsed.any():
        raise MeshError(f"degenerate face {int(np.nonzero(collapsed)[0][0])}", "degenerate")
    t = vertices[faces]
    cross = np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])
    zero = ~np.any(cross != 0.0, axis=1)
    if zero.any():
        raise MeshError(f"degenerate (zero-area) face {int(np.nonzero(zero)[0][0])}", "degenerate")

    directed = np.stack([faces, np.roll(faces, -1, axis=1)], axis=2).reshape(-1, 2)
    undirected = np.sort(directed, axis=1)
    uniq, inv, counts = np.unique(undirected, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    if np.any(counts != 2):
        bad = uniq[np.nonzero(counts != 2)[0][0]]
        raise MeshError(
            f"not closed/manifold: edge ({bad[0]}, {bad[1]}) has "
            f"{counts[counts != 2][0]} incident faces", "non-manifold")
    dir_uniq = np.unique(directed, axis=0)
    if len(dir_uniq) != len(directed):
        raise MeshError("non-orientable: a directed edge is used by two faces", "non-orientable")
    order = np.argsort(inv, kind="stable")
    edge_faces = (order // 3).reshape(-1, 2)
    return SurfaceMesh(vertices, faces, uniq, edge_faces)


@dataclass(frozen=True)
class CartesianGrid:
    """Isotropic structured grid, optionally moved by a rigid transform.

    A grid point (i, j, k) sits at ``origin + shift + (i, j, k) * h`` in the
    grid's local frame and is mapped to the world by
    ``x -> rotation @ (x - center) + center``.
    """

    origin: tuple
    h: float
    dims: tuple
    shift: tuple = (0.0, 0.0, 0.0)
    rotation: Optional[tuple] = None
    center: tuple = (0.0, 0.0, 0.0)

    @property
    def effective_origin(self) -> tuple:
        return tuple(o + s for o, s in zip(self.origin, self.shift))

    @property
    def ncells(self) -> int:
        return int(self.dims[0] * self.dims[1] * self.dims[2])

    @property
    def extent(self) -> np.ndarray:
        return np.array(self.dims, dtype=np.float64) * self.h

    @property
    def box_volume(self) -> float:
        e = self.extent
        return float(e[0] * e[1] * e[2])

    def rotation_matrix(self) -> np.ndarray:
        if self.rotation is None:
            return np.eye(3)
        return np.array(self.rotation, dtype=np.float64)

    def to_world(self, local: np.ndarray) -> np.ndarray:
        local = np.asarray(local, dtype=np.float64)
        if self.rotation is None:
            return local.copy()
        c = np.array(self.center)
        return (local - c) @ self.rotation_matrix().T + c

    def to_local(self, world: np.ndarray) -> np.ndarray:
        world = np.asarray(world, dtype=np.float64)
        if self.rotation is None:
            return world.copy()
        c = np.array(self.center)
        return (world - c) @ self.rotation_matrix() + c

    def cell_index(self, flat) -> tuple:
        return tuple(int(v) for v in np.unravel_index(flat, self.dims))

    def flat_index(self, i: int, j: int, k: int) -> int:
        return int(np.ravel_multi_index((i, j, k), self.dims))

    def locate(self, world: np.ndarray) -> np.ndarray:
        """Cell indices (n, 3) of world points; -1 rows for points outside."""
        local = self.to_local(np.atleast_2d(world))
        idx = np.floor((local - np.array(self.effective_origin)) / self.h).astype(np.int64)
        out = np.any((idx < 0) | (idx >= np.array(self.dims)), axis=1)
        idx[out] = -1
        return idx


def _ceil_count(x: float) -> int:
    # guard against scale*ext/h landing a few ulps above an integer
    n = math.ceil(x - 1e-10 * abs(x))
    return max(n, 1)


def background_grid(bbox_min, bbox_max, n_max: int = 100, n_min: int = 10,
                    scale: float = 1.4) -> CartesianGrid:
    lo = np.asarray(bbox_min, dtype=np.float64)
    hi = np.asarray(bbox_max, dtype=np.float64)
    ext = hi - lo
    if np.any(ext <= 0):
        raise ValueError(f"degenerate bounding box with extents {ext.tolist()}")
    if not (n_max >= n_min >= 1):
        raise ValueError("need n_max >= n_min >= 1")
    if scale < 1:
        raise ValueError("scale must be >= 1")
    h = scale * min(max(ext / n_max), min(ext / n_min))
    origin = lo - ((scale - 1) / 2) * ext
    dims = tuple(_ceil_count(scale * e / h) for e in ext)
    return CartesianGrid(tuple(float(v) for v in origin), float(h), dims)


def _axis_rotations(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    rx = np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
    ry = np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])
    rz = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    return rz @ ry @ rx


def perturb(grid: CartesianGrid, kind: str, alpha: float, center=None,
            direction: float = 1.0) -> CartesianGrid:
    """Translate the origin by ``(p_max - p_min) * 10**-alpha`` or rotate by ``10**-alpha``.

    ``center`` is the rotation centre (the STL bounding-box barycentre);
    ``direction = -1`` applies the opposite motion.
    """
    if not 1 <= alpha <= 17:
        raise ValueError("alpha must lie in [1, 17]")
    delta = 10.0 ** (-alpha)
    if kind == "translate":
        d = grid.extent * delta * direction
        shift = tuple(float(s + v) for s, v in zip(grid.shift, d))
        return replace(grid, shift=shift)
    if kind == "rotate":
        if center is None:
            raise ValueError("rotation needs a centre")
        r = _axis_rotations(direction * delta) @ grid.rotation_matrix()
        return replace(grid, rotation=tuple(tuple(float(v) for v in row) for row in r),
                       center=tuple(float(v) for v in center))
    raise ValueError(f"unknown perturbation kind {kind!r}")


def export_vtk(cutmesh, directory, stem: str = "cut") -> list:
    """Write interior tetrahedra and boundary polygons as legacy VTK files.

    ``cutmesh`` must have been produced with geometry kept.  Returns the two
    written paths.
    """
    from .measures import simplexify

    if not cutmesh.has_geometry:
        raise ValueError("cut mesh was computed without geometry")
    active = cutmesh.active_cells()
    if len(active) == 0:
        raise ValueError("no active cells")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    points, tets, tet_cell, tet_state = [], [], [], []
    for cid, state, pieces in cutmesh.interior_pieces():
        for poly in pieces:
            for tet in simplexify(poly):
                base = len(points)
                points.extend(tet)
                tets.append((base, base + 1, base + 2, base + 3))
                tet_cell.append(cid)
                tet_state.append(state)
    vol_path = directory / f"{stem}_interior.vtk"
    _write_unstructured(vol_path, "interior sub-cells", points,
                        [(VTK_TETRA, t) for t in tets],
                        {"cell_id": tet_cell, "state": tet_state})

    points, polys, poly_cell, poly_face = [], [], [], []
    for cid, polygons in cutmesh.boundary_pieces():
        for face_id, coords in polygons:
            base = len(points)
            points.extend(coords)
            polys.append(tuple(range(base, base + len(coords))))
            poly_cell.append(cid)
            poly_face.append(face_id)
    bnd_path = directory / f"{stem}_boundary.vtk"
    _write_unstructured(bnd_path, "boundary sub-faces", points,
                        [(VTK_POLYGON, p) for p in polys],
                        {"cell_id": poly_cell, "stl_face": poly_face})
    return [vol_path, bnd_path]


def _write_unstructured(path, title, points, cells, cell_data) -> None:
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {len(points)} double"]
    lines.extend("{:.17g} {:.17g} {:.17g}".format(*p) for p in points)
    size = sum(len(c) + 1 for _, c in cells)
    lines.append(f"CELLS {len(cells)} {size}")
    lines.extend(" ".join(str(v) for v in (len(c),) + tuple(c)) for _, c in cells)
    lines.append(f"CELL_TYPES {len(cells)}")
    lines.extend(str(t) for t, _ in cells)
    if cells:
        lines.append(f"CELL_DATA {len(cells)}")
        for name, values in cell_data.items():
            lines.append(f"SCALARS {name} int 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(str(int(v)) for v in values)
    Path(path).write_text("\n".join(lines) + "\n")
