"""Clipping a rotation system against one half-space.

Every interior vertex with an exterior neighbour gets a new vertex on that
edge, placed by the convex weights of the two signed distances.  The new
vertices are then linked along the cut by walking each old face from the new
vertex until the next new vertex is reached.  Exterior vertices are dropped.

The distances of a new vertex to every other plane are the same convex
combination of its parents' distances, never recomputed from coordinates.
Its distance to the clipping plane, and to any row that equals the clipping
row up to sign on the cut edge, is exactly zero; a row on which both parents
agree keeps that value exactly.
That keeps all decisions symbolic and identical on both sides of a shared
plane.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

from .graph_core import CAP, OPEN, CorruptRotationSystem, RotationSystem
from .halfspace import DistanceMatrix


def edge_plane_point(xa, xb, ha: float, hb: float):
    """Point where the plane with distances ``ha``, ``hb`` crosses edge (a, b)."""
    if ha == hb:
        raise ValueError("edge does not cross the plane")
    wa = -hb / (ha - hb)
    wb = ha / (ha - hb)
    return (wa * xa[0] + wb * xb[0], wa * xa[1] + wb * xb[1], wa * xa[2] + wb * xb[2]), wa, wb


def propagate_distance(wa: float, wb: float, ha: float, hb: float) -> float:
    # equal parents give the value itself: constant fields stay exact
    if ha == hb:
        return ha
    return wa * ha + wb * hb


@dataclass
class ClipResult:
    poly: RotationSystem
    H: DistanceMatrix
    row: int
    created: List[int] = field(default_factory=list)
    removed: List[int] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return len(self.poly.adj) == 0


def clip_by_halfspace(P: RotationSystem, H: DistanceMatrix, row: int, *, closed: bool = False,
                      sign: int = 1, cap_label: int = CAP) -> ClipResult:
    """Intersect ``P`` with the half-space of row ``row`` (negated when ``sign < 0``).

    Open membership is ``d < 0``; closed is ``d <= 0``.  Half-edges of the
    new cut face get ``cap_label``.  The input is not modified; new vertices
    are appended to the shared coordinate store and to ``H``.
    """
    adj = P.adj
    lab = P.lab
    cols = H.cols
    pts = P.points
    neg = sign < 0

    inside = {}
    nin = 0
    for v in adj:
        d = cols[v][row]
        if neg:
            d = -d
        ok = d <= 0.0 if closed else d < 0.0
        inside[v] = ok
        nin += ok
    if nin == len(adj):
        return ClipResult(P.copy(), H, row)
    if nin == 0:
        return ClipResult(RotationSystem({}, {}, pts, P.is_open_surface), H, row,
                          removed=list(adj))

    new_adj = {}
    new_lab = {}
    for v in adj:
        if inside[v]:
            new_adj[v] = list(adj[v])
            new_lab[v] = list(lab[v])
    olds = list(new_adj)
    created = []
    for a in olds:
        na = new_adj[a]
        for i in range(len(na)):
            b = na[i]
            if b == OPEN or inside[b]:
                continue
            ca = cols[a]
            cb = cols[b]
            ha = ca[row]
            hb = cb[row]
            if neg:
                ha = -ha
                hb = -hb
            wa = -hb / (ha - hb)
            wb = ha / (ha - hb)
            xa = pts[a]
            xb = pts[b]
            d = len(pts)
            pts.append((wa * xa[0] + wb * xb[0], wa * xa[1] + wb * xb[1], wa * xa[2] + wb * xb[2]))
            # rows equal to the clipping row on this edge (up to sign) vanish exactly
            ra, rb = ca[row], cb[row]
            cols.append([0.0 if (u == ra and w == rb) or (u == -ra and w == -rb)
                         else (u if u == w else wa * u + wb * w) for u, w in zip(ca, cb)])
            na[i] = d
            nb = adj[b]
            new_adj[d] = [a, OPEN, OPEN]
            new_lab[d] = [lab[b][nb.index(a)], CAP, CAP]
            created.append(d)

    # link the new vertices along the cut, walking each old face forward
    is_new = set(created)
    limit = sum(len(n) for n in new_adj.values()) + 1
    assigned = set()
    for a in created:
        prev, cur = a, new_adj[a][0]
        for _ in range(limit):
            nc = new_adj[cur]
            j = nc.index(prev) + 1
            nxt = nc[j if j < len(nc) else 0]
            prev, cur = cur, nxt
            if cur == OPEN or cur in is_new:
                break
        else:
            raise CorruptRotationSystem("cut walk does not reach a new vertex")
        if cur == OPEN:
            continue
        na = new_adj[a]
        na[2] = cur
        new_lab[a][2] = cap_label
        if cur in assigned:
            raise CorruptRotationSystem(f"new vertex {cur} reached twice")
        assigned.add(cur)
        new_adj[cur][1] = a
        new_lab[cur][1] = new_lab[a][0]

    removed = [v for v in adj if not inside[v]]
    return ClipResult(RotationSystem(new_adj, new_lab, pts, P.is_open_surface), H, row,
                      created, removed)


def clip_by_rows(P: RotationSystem, H: DistanceMatrix, rows: Sequence, *, closed: bool = False,
                 cap_labels: Sequence[int] = None) -> RotationSystem:
    """Fold ``clip_by_halfspace`` over ``rows``; entries may be ``(row, sign)`` pairs."""
    for k, r in enumerate(rows):
        if not P.adj:
            break
        row, sign = (r, 1) if isinstance(r, int) else r
        cap = cap_labels[k] if cap_labels is not None else (CAP if P.is_open_surface else row)
        P = clip_by_halfspace(P, H, row, closed=closed, sign=sign, cap_label=cap).poly
    return P
