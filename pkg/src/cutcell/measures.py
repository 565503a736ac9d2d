"""Simplex decomposition, volumes, areas and the conservation errors of a cut."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Sequence

from .graph_core import RotationSystem, faces


def _fan_faces(P: RotationSystem):
    """Anchor vertex and the fans (rotated to start at their lowest id) of faces avoiding it."""
    anchor = min(P.adj)
    out = []
    for f in faces(P):
        vs = f.vertices
        if anchor in vs:
            continue
        if len(vs) < 3:
            raise ValueError(f"face {vs} has fewer than 3 vertices")
        k = vs.index(min(vs))
        out.append(vs[k:] + vs[:k])
    return anchor, out


def simplexify(P: RotationSystem) -> List[tuple]:
    """Tetrahedra (4 corner coordinates each) covering a convex polyhedron.

    All tetrahedra share the lowest-id vertex; every face not containing it
    is fanned from its own lowest-id vertex.
    """
    if not P.adj:
        return []
    pts = P.points
    anchor, fans = _fan_faces(P)
    a = pts[anchor]
    tets = []
    for vs in fans:
        p0 = pts[vs[0]]
        for i in range(1, len(vs) - 1):
            tets.append((a, p0, pts[vs[i]], pts[vs[i + 1]]))
    return tets


def tet_det(a, b, c, d) -> float:
    """Six times the signed volume of (a, b, c, d); positive when (b, c, d) is
    counter-clockwise seen from outside, i.e. from the side away from a."""
    ux, uy, uz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    vx, vy, vz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    wx, wy, wz = d[0] - a[0], d[1] - a[1], d[2] - a[2]
    return ux * (vy * wz - vz * wy) + uy * (vz * wx - vx * wz) + uz * (vx * wy - vy * wx)


def volume(P) -> float:
    """Signed volume of a closed polyhedron (rotation system) or a list of tetrahedra."""
    tets = simplexify(P) if isinstance(P, RotationSystem) else P
    total = 0.0
    for t in tets:
        total += tet_det(*t)
    return total / 6.0


def polygon_vector_area(coords: Sequence) -> tuple:
    p0 = coords[0]
    sx = sy = sz = 0.0
    for i in range(1, len(coords) - 1):
        p, q = coords[i], coords[i + 1]
        ux, uy, uz = p[0] - p0[0], p[1] - p0[1], p[2] - p0[2]
        vx, vy, vz = q[0] - p0[0], q[1] - p0[1], q[2] - p0[2]
        sx += uy * vz - uz * vy
        sy += uz * vx - ux * vz
        sz += ux * vy - uy * vx
    return 0.5 * sx, 0.5 * sy, 0.5 * sz


def polygon_area(coords: Sequence) -> float:
    """Area of a planar polygon from the fan of cross products at its first vertex."""
    x, y, z = polygon_vector_area(coords)
    return math.sqrt(x * x + y * y + z * z)


def area(polygons) -> float:
    """Total area of planar polygons (coordinate lists) or of a closed rotation system."""
    if isinstance(polygons, RotationSystem):
        pts = polygons.points
        polygons = [[pts[v] for v in f.vertices] for f in faces(polygons)]
    return math.fsum(polygon_area(p) for p in polygons)


def volume_divergence(P: RotationSystem) -> float:
    """Volume from the divergence theorem, as an independent check of ``volume``."""
    pts = P.points
    terms = []
    for f in faces(P):
        coords = [pts[v] for v in f.vertices]
        ax, ay, az = polygon_vector_area(coords)
        c = coords[0]
        terms.append(c[0] * ax + c[1] * ay + c[2] * az)
    return math.fsum(terms) / 3.0


@dataclass
class MetricsReport:
    V_in: float
    V_out: float
    V_box: float
    area_stl: float
    area_cut: float
    eps_V: float
    eps_Gamma: float
    timings: Dict[str, float] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


def relative_errors(V_in: float, V_out: float, V_box: float, area_stl: float, area_cut: float):
    eps_v = abs(V_in + V_out - V_box) / V_box
    eps_g = abs(area_stl - area_cut) / area_stl if area_stl > 0 else 0.0
    return eps_v, eps_g


def error_metrics(cutmesh, mesh, timings: Dict[str, float] = None) -> MetricsReport:
    """Volume and surface conservation errors of a cut.

    Needs the exterior pieces for ``V_out``.
    """
    if not cutmesh.exteriors:
        raise ValueError("volume error needs exterior pieces")
    V_box = cutmesh.grid.box_volume
    a_stl = mesh.area()
    eps_v, eps_g = relative_errors(cutmesh.V_in, cutmesh.V_out, V_box, a_stl, cutmesh.area)
    return MetricsReport(cutmesh.V_in, cutmesh.V_out, V_box, a_stl, cutmesh.area, eps_v, eps_g,
                         dict(timings or {}))
