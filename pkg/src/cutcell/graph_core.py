"""Rotation systems for polyhedra and open surfaces.

A rotation system stores, for each vertex, its neighbours in clockwise order
as seen from outside.  ``next(a; b)`` is the neighbour following ``b`` around
``a``; the faces are the closed paths ``v[i+1] = next(v[i]; v[i-1])`` and come
out counter-clockwise seen from outside.

Open surfaces carry a sentinel vertex ``OPEN`` (id -1) inserted in the
adjacency of boundary vertices.  A traversal reaching it is discarded, which
is how the boundary loop of a surface patch stops being a face.

Each directed edge ``a -> adj[a][i]`` also carries a label, the id of the face
on its left (``CAP`` when it bounds no face).  Labels survive clipping and let
callers map faces back to their supporting planes.
"""
from __future__ import annotations

from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence

OPEN = -1
CAP = -1


class CorruptRotationSystem(RuntimeError):
    pass


class Face(NamedTuple):
    vertices: tuple
    label: int


class RotationSystem:
    """Vertex ids -> cyclic adjacency, with a shared coordinate store.

    ``points`` is indexed by vertex id and may be shared by several systems
    (clipping appends new vertices to it).  ``adj`` is kept in ascending id
    order.
    """

    __slots__ = ("adj", "lab", "points", "is_open_surface")

    def __init__(self, adj: Dict[int, List[int]], lab: Dict[int, List[int]], points: list,
                 is_open_surface: bool = False):
        self.adj = adj
        self.lab = lab
        self.points = points
        self.is_open_surface = is_open_surface

    def __len__(self) -> int:
        return len(self.adj)

    def __repr__(self) -> str:
        kind = "surface" if self.is_open_surface else "polyhedron"
        return f"RotationSystem({kind}, {len(self.adj)} vertices)"

    def vertices(self) -> List[int]:
        return list(self.adj)

    def copy(self) -> "RotationSystem":
        return RotationSystem({v: list(n) for v, n in self.adj.items()},
                              {v: list(n) for v, n in self.lab.items()},
                              self.points, self.is_open_surface)

    def coords(self, v: int) -> tuple:
        return self.points[v]

    def edges(self) -> List[tuple]:
        """Undirected real edges (a, b) with a < b."""
        out = []
        for a, nbrs in self.adj.items():
            for b in nbrs:
                if b != OPEN and a < b:
                    out.append((a, b))
        return out

    def directed_edges(self) -> List[tuple]:
        return [(a, b) for a, nbrs in self.adj.items() for b in nbrs if b != OPEN]


def next_vertex(R: RotationSystem, alpha: int, beta: int) -> int:
    nbrs = R.adj[alpha]
    try:
        i = nbrs.index(beta)
    except ValueError:
        raise ValueError(f"vertex {beta} is not adjacent to {alpha}") from None
    i += 1
    return nbrs[i if i < len(nbrs) else 0]


def faces(R: RotationSystem) -> List[Face]:
    """Closed face paths, each directed real edge consumed once.

    Paths through ``OPEN`` are dropped; on open surfaces cycles whose label is
    ``CAP`` (closing loops that are not part of the surface) are dropped too.
    """
    adj = R.adj
    lab = R.lab
    limit = sum(len(n) for n in adj.values()) + 1
    seen = set()
    out = []
    for v, nbrs in adj.items():
        for i in range(len(nbrs)):
            if nbrs[i] == OPEN or (v, i) in seen:
                continue
            label = lab[v][i]
            cycle = []
            a, ia = v, i
            closed = False
            for _ in range(limit):
                seen.add((a, ia))
                cycle.append(a)
                b = adj[a][ia]
                if b == OPEN:
                    break
                nb = adj[b]
                j = nb.index(a) + 1
                if j == len(nb):
                    j = 0
                a, ia = b, j
                if a == v and ia == i:
                    closed = True
                    break
            else:
                raise CorruptRotationSystem(f"face traversal from ({v}, {i}) does not terminate")
            if not closed:
                continue
            if R.is_open_surface and label == CAP:
                continue
            out.append(Face(tuple(cycle), label))
    return out


def components(R: RotationSystem) -> List[List[int]]:
    """Vertex sets of the connected components, ordered by smallest id.

    Edges to ``OPEN`` do not connect anything.
    """
    parent = {v: v for v in R.adj}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, nbrs in R.adj.items():
        for b in nbrs:
            if b != OPEN:
                ra, rb = find(a), find(b)
                if ra != rb:
                    if ra < rb:
                        parent[rb] = ra
                    else:
                        parent[ra] = rb
    groups: Dict[int, List[int]] = {}
    for v in R.adj:
        groups.setdefault(find(v), []).append(v)
    return [groups[k] for k in sorted(groups)]


def subsystem(R: RotationSystem, vids: Iterable[int]) -> RotationSystem:
    keep = set(vids)
    adj = {v: list(R.adj[v]) for v in R.adj if v in keep}
    lab = {v: list(R.lab[v]) for v in R.adj if v in keep}
    return RotationSystem(adj, lab, R.points, R.is_open_surface)


def from_polygons(polygons: Sequence[Sequence[int]], labels: Sequence[int], points: list,
                  ) -> RotationSystem:
    """Build the rotation system of oriented polygons (CCW from outside).

    For a polygon ``(..., p, v, n, ...)`` vertex ``v`` gets ``n`` right after
    ``p``.  Around a vertex whose fan is open the neighbours form chains; the
    chains are concatenated, so the result still has the would-be boundary
    face until ``pol`` breaks it.  The half-edge ``v -> chain start`` is the
    boundary half-edge and keeps the label ``CAP``.
    """
    succ: Dict[int, Dict[int, int]] = {}
    elab: Dict[int, Dict[int, int]] = {}
    first_pred: Dict[int, List[int]] = {}
    for poly, label in zip(polygons, labels):
        m = len(poly)
        for k in range(m):
            p, v, n = poly[k - 1], poly[k], poly[(k + 1) % m]
            sv = succ.setdefault(v, {})
            if p in sv:
                raise CorruptRotationSystem(
                    f"edge ({p}, {v}) is used twice in the same direction")
            sv[p] = n
            elab.setdefault(v, {})[n] = label
            first_pred.setdefault(v, []).append(p)
    adj, lab = {}, {}
    for v in sorted(succ):
        sv = succ[v]
        targets = set(sv.values())
        starts = [p for p in first_pred[v] if p not in targets]
        order: List[int] = []
        used = set()
        for s in starts:
            x = s
            while x is not None and x not in used:
                used.add(x)
                order.append(x)
                x = sv.get(x)
        for p in first_pred[v]:
            # closed fans (or closed parts of a pinched vertex)
            if p in used:
                continue
            x = p
            while x not in used:
                used.add(x)
                order.append(x)
                x = sv[x]
        adj[v] = order
        ev = elab[v]
        lab[v] = [ev.get(u, CAP) for u in order]
    return RotationSystem(adj, lab, points, False)


def boundary_vertices(R: RotationSystem) -> List[int]:
    """Vertices incident to an edge with a single face (a CAP-labelled half-edge)."""
    out = []
    for v, nbrs in R.adj.items():
        lv = R.lab[v]
        for u, l in zip(nbrs, lv):
            if u != OPEN and l == CAP:
                out.append(v)
                break
    return out


def pol(R: RotationSystem, bou: Optional[Iterable[int]] = None) -> RotationSystem:
    """Close a surface patch with the open vertex.

    ``OPEN`` is placed right before each boundary half-edge ``v -> u``, i.e.
    after the inbound boundary edge in cyclic order, so the boundary cycle is
    broken and nothing else is.
    """
    if bou is None:
        bou = boundary_vertices(R)
    bset = set(bou)
    adj, lab = {}, {}
    for v, nbrs in R.adj.items():
        lv = R.lab[v]
        if v not in bset:
            adj[v] = list(nbrs)
            lab[v] = list(lv)
            continue
        na, nl = [], []
        for u, l in zip(nbrs, lv):
            if u != OPEN and l == CAP:
                na.append(OPEN)
                nl.append(CAP)
            na.append(u)
            nl.append(l)
        adj[v], lab[v] = na, nl
    return RotationSystem(adj, lab, R.points, True)


# corner c = i + 2j + 4k of a box; faces counter-clockwise seen from outside,
# ordered x-, x+, y-, y+, z-, z+
BOX_FACES = ((0, 4, 6, 2), (1, 3, 7, 5), (0, 1, 5, 4), (2, 6, 7, 3), (0, 2, 3, 1), (4, 5, 7, 6))
# corner used as the reference point of each face plane
BOX_FACE_ANCHOR = (0, 1, 0, 2, 0, 4)


def box_corners(lo, hi) -> list:
    return [(hi[0] if c & 1 else lo[0], hi[1] if c & 2 else lo[1], hi[2] if c & 4 else lo[2])
            for c in range(8)]


def cell_polyhedron(lo, hi=None, points: Optional[list] = None) -> RotationSystem:
    """Hexahedron with vertex ids 0..7 and face labels 0..5 (x-, x+, y-, y+, z-, z+).

    ``lo, hi`` are opposite corners of an axis-aligned box; alternatively pass
    the 8 corners directly as ``lo`` with ``hi=None`` (e.g. a rotated cell).
    """
    corners = box_corners(lo, hi) if hi is not None else [tuple(map(float, c)) for c in lo]
    if hi is not None and any(b <= a for a, b in zip(lo, hi)):
        raise ValueError("box needs positive extents")
    if points is None:
        points = []
    if len(points) != 0:
        raise ValueError("cell corners must be the first 8 entries of the point store")
    points.extend(corners)
    return from_polygons(BOX_FACES, range(6), points)


def euler_characteristic(R: RotationSystem) -> int:
    nv = len(R.adj)
    ne = len(R.edges())
    nf = len(faces(R))
    return nv - ne + nf
