"""Convex decomposition of a cell against a non-convex surface patch.

Reflex edges of the surface get a wall: a plane through the edge that bisects
the two faces.  Splitting the cell and the surface recursively by the walls
leaves, at each leaf, surface components that are convex.  Components that
contain each other mutually bound the same convex region and are grouped
(coloured) together; the interior of the leaf is then the leaf polyhedron
clipped by the faces of each colour.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .clip import clip_by_halfspace, clip_by_rows
from .graph_core import CAP, OPEN, Face, RotationSystem, components, faces
from .halfspace import DistanceMatrix, Plane


class ColouringError(RuntimeError):
    pass


def _half_edge_label(S: RotationSystem, u: int, v: int) -> int:
    return S.lab[u][S.adj[u].index(v)]


def bisector(nt, nu, xu, xv) -> Tuple[tuple, tuple]:
    """Plane through edge (xu, xv) separating two faces with normals nt, nu.

    The normal is ``nt - nu`` with its component along the edge removed; on
    that plane both faces are equally far, so each side sees one face only.
    Nearly coplanar faces fall back to the plane through the edge
    perpendicular to ``nt``.
    """
    ex, ey, ez = xv[0] - xu[0], xv[1] - xu[1], xv[2] - xu[2]
    ee = ex * ex + ey * ey + ez * ez
    nx, ny, nz = nt[0] - nu[0], nt[1] - nu[1], nt[2] - nu[2]
    if math.sqrt(nx * nx + ny * ny + nz * nz) < 1e-6:
        nx = ey * nt[2] - ez * nt[1]
        ny = ez * nt[0] - ex * nt[2]
        nz = ex * nt[1] - ey * nt[0]
    k = (nx * ex + ny * ey + nz * ez) / ee
    nx, ny, nz = nx - k * ex, ny - k * ey, nz - k * ez
    norm = math.sqrt(nx * nx + ny * ny + nz * nz)
    mid = ((xu[0] + xv[0]) * 0.5, (xu[1] + xv[1]) * 0.5, (xu[2] + xv[2]) * 0.5)
    return (nx / norm, ny / norm, nz / norm), mid


def walls(S: RotationSystem, H: DistanceMatrix) -> List[Plane]:
    """Bisector walls of the reflex edges of ``S``.

    Face labels of ``S`` are row indices of ``H``.  An edge shared by faces
    T and U is convex when every vertex of U is in the closed half-space of
    T and vice versa; otherwise it is reflex.
    """
    cols = H.cols
    fverts = {f.label: f.vertices for f in faces(S)}
    out = []
    for u, nbrs in S.adj.items():
        for i, v in enumerate(nbrs):
            if v == OPEN or v < u:
                continue
            t = S.lab[u][i]
            w = _half_edge_label(S, v, u)
            if t == CAP or w == CAP or t == w:
                continue
            tv, uv = fverts[t], fverts[w]
            reflex = False
            for x in uv:
                if cols[x][t] > 0.0:
                    reflex = True
                    break
            if not reflex:
                for x in tv:
                    if cols[x][w] > 0.0:
                        reflex = True
                        break
            if not reflex:
                continue
            n, p = bisector(H.rows[t].normal, H.rows[w].normal, S.points[u], S.points[v])
            out.append(Plane(n, p, "W", len(out)))
    return out


@dataclass
class SurfaceComponent:
    vertices: List[int]  # vertices of its faces
    faces: List[Face]


def surface_components(S: RotationSystem) -> List[SurfaceComponent]:
    """Faces of ``S`` grouped by shared vertices, ordered by smallest vertex id."""
    fs = faces(S)
    parent = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for f in fs:
        for v in f.vertices:
            parent.setdefault(v, v)
        r0 = find(f.vertices[0])
        for v in f.vertices[1:]:
            r = find(v)
            if r != r0:
                if r < r0:
                    parent[r0] = r
                    r0 = r
                else:
                    parent[r] = r0
    per: Dict[int, list] = {}
    for f in fs:
        per.setdefault(find(f.vertices[0]), []).append(f)
    out = []
    for k in sorted(per):
        flist = per[k]
        seen = set()
        verts = []
        for f in flist:
            for v in f.vertices:
                if v not in seen:
                    seen.add(v)
                    verts.append(v)
        out.append(SurfaceComponent(verts, flist))
    return out


def _inside(H: DistanceMatrix, comp: SurfaceComponent, other: SurfaceComponent) -> bool:
    """Every vertex of ``comp`` in the closed half-space of every face of ``other``."""
    cols = H.cols
    rows = sorted({f.label for f in other.faces})
    for v in comp.vertices:
        c = cols[v]
        for r in rows:
            if c[r] > 0.0:
                return False
    return True


def colour_graph(comps: Sequence[SurfaceComponent], H: DistanceMatrix):
    n = len(comps)
    inside = [[False] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i != j:
                inside[i][j] = _inside(H, comps[i], comps[j])
    mutual = [[inside[i][j] and inside[j][i] for j in range(n)] for i in range(n)]
    return inside, mutual


def colour_classes(inside, mutual) -> List[List[int]]:
    """The grouping loop on the containment graphs (component indices)."""
    V = list(range(len(inside)))
    W = []
    while V:
        v = V[0]
        nf = [u for u in V if u == v or mutual[v][u]]
        dg = [u for u in V if u != v and not inside[v][u]]
        blocked = set()
        for d in dg:
            for u in V:
                if mutual[d][u]:
                    blocked.add(u)
        C = [u for u in nf if u not in blocked]
        if not C:
            raise ColouringError("colouring makes no progress")
        W.append(C)
        cset = set(C)
        V = [u for u in V if u not in cset]
    return W


def colouring(S: RotationSystem, H: DistanceMatrix) -> List[List[SurfaceComponent]]:
    """Group the convex components of ``S`` into well-defined interiors."""
    comps = surface_components(S)
    if not comps:
        return []
    inside, mutual = colour_graph(comps, H)
    return [[comps[k] for k in cls] for cls in colour_classes(inside, mutual)]


def drop_flat_faces(S: RotationSystem, H: DistanceMatrix, row: int) -> RotationSystem:
    """Remove faces lying entirely on plane ``row`` (zero-area leftovers of a closed clip).

    Their half-edges are relabelled ``CAP`` so that face traversal skips them.
    ``S`` is modified in place.
    """
    cols = H.cols
    adj, lab = S.adj, S.lab
    for f in faces(S):
        vs = f.vertices
        flat = True
        for v in vs:
            if cols[v][row] != 0.0:
                flat = False
                break
        if not flat:
            continue
        n = len(vs)
        for i in range(n):
            a, b = vs[i], vs[i + 1 if i + 1 < n else 0]
            lab[a][adj[a].index(b)] = CAP
    return S


@dataclass
class ConvexPair:
    P: RotationSystem
    S: RotationSystem


def convex_decompose(P: RotationSystem, S: RotationSystem, H: DistanceMatrix,
                     wall_rows: Sequence[int]) -> List[ConvexPair]:
    """Split (P, S) by the walls; returns the leaves in depth-first order.

    Each wall splits both pieces by its closed half-space and the closed
    complement; surface faces left flat on the wall are dropped.  A side on
    which P has no vertex strictly inside has zero volume and is not explored.
    """
    out: List[ConvexPair] = []
    cols = H.cols
    nwalls = len(wall_rows)

    def rec(P, S, k):
        if not P.adj:
            return
        if k == nwalls:
            out.append(ConvexPair(P, S))
            return
        w = wall_rows[k]
        has_neg = has_pos = False
        for v in P.adj:
            d = cols[v][w]
            if d < 0.0:
                has_neg = True
            elif d > 0.0:
                has_pos = True
        if has_neg:
            P1 = clip_by_halfspace(P, H, w, closed=True, sign=1, cap_label=w).poly if has_pos else P
            S1 = drop_flat_faces(clip_by_halfspace(S, H, w, closed=True, sign=1).poly, H, w) if S.adj else S
            rec(P1, S1, k + 1)
        if has_pos:
            P2 = clip_by_halfspace(P, H, w, closed=True, sign=-1, cap_label=w).poly if has_neg else P
            S2 = drop_flat_faces(clip_by_halfspace(S, H, w, closed=True, sign=-1).poly, H, w) if S.adj else S
            rec(P2, S2, k + 1)

    rec(P, S, 0)
    return out


def clip_by_surface(X: RotationSystem, H: DistanceMatrix, planes: Sequence, closed: bool = False
                    ) -> RotationSystem:
    """Clip ``X`` by each plane in turn; planes are row ids or (row, sign) pairs."""
    return clip_by_rows(X, H, planes, closed=closed)
