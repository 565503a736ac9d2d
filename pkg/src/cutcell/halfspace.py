"""Planes as discrete level sets.

A plane is only ever seen through its signed distances to the vertices at
hand (negative = interior).  Distances below the snap tolerance are forced to
exactly zero; vertices are never moved.  Planes whose distance rows agree up
to sign within ``eps_hs`` are merged so that later decisions on them are
consistent.

The distance matrix is stored column-wise: ``cols[v]`` holds the distances of
vertex ``v`` to every plane.  New vertices append a column, so several clipped
pieces of one cell can share the store.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, NamedTuple, Sequence, Tuple

import numpy as np

EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class Tolerances:
    eps_sn: float
    eps_hs: float

    @classmethod
    def from_length(cls, length: float, snap_factor: float = 1e2, hs_factor: float = 1e3):
        """Tolerances for a model whose largest bounding-box side is ``length``."""
        return cls(length * snap_factor * EPS, length * hs_factor * EPS)

    @classmethod
    def from_mesh(cls, mesh, snap_factor: float = 1e2, hs_factor: float = 1e3):
        lo, hi = mesh.bbox
        return cls.from_length(float(np.max(hi - lo)), snap_factor, hs_factor)

    def __post_init__(self):
        if not self.eps_sn <= self.eps_hs:
            raise ValueError("need eps_sn <= eps_hs")


class Plane(NamedTuple):
    normal: tuple  # unit outward normal
    point: tuple
    kind: str = ""  # "K" cell face, "S" surface face, "W" wall
    ref: int = -1


def plane_from_points(a, b, c, kind: str = "S", ref: int = -1) -> Plane:
    """Oriented plane of the triangle (a, b, c), counter-clockwise = outward."""
    ux, uy, uz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    vx, vy, vz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    cx = uy * vz - uz * vy
    cy = uz * vx - ux * vz
    cz = ux * vy - uy * vx
    norm = math.sqrt(cx * cx + cy * cy + cz * cz)
    if norm == 0.0:
        raise ValueError("collinear points do not define a plane")
    return Plane((cx / norm, cy / norm, cz / norm), (a[0], a[1], a[2]), kind, ref)


def signed_distance(plane: Plane, x, eps_sn: float) -> float:
    n, p = plane.normal, plane.point
    d = n[0] * (x[0] - p[0]) + n[1] * (x[1] - p[1]) + n[2] * (x[2] - p[2])
    if -eps_sn <= d <= eps_sn:
        return 0.0
    return d


def distance_column(planes: Sequence[Plane], x, eps_sn: float) -> List[float]:
    return [signed_distance(p, x, eps_sn) for p in planes]


class DistanceMatrix:
    """Plane-by-vertex signed distances, stored by columns.

    ``rows`` describes the planes (row index = position); ``cols`` is a list
    indexed by vertex id, aligned with the coordinate store of the rotation
    systems it serves.
    """

    __slots__ = ("rows", "cols")

    def __init__(self, rows: List[Plane], cols: List[List[float]]):
        self.rows = rows
        self.cols = cols

    @property
    def nrows(self) -> int:
        return len(self.rows)

    def entry(self, r: int, v: int) -> float:
        return self.cols[v][r]

    def row(self, r: int, vids: Iterable[int]) -> List[float]:
        cols = self.cols
        return [cols[v][r] for v in vids]

    def block(self, rows: Sequence[int], vids: Sequence[int]) -> np.ndarray:
        """Dense copy of H[rows, vids]."""
        out = np.empty((len(rows), len(vids)))
        for j, v in enumerate(vids):
            c = self.cols[v]
            for i, r in enumerate(rows):
                out[i, j] = c[r]
        return out

    def add_planes(self, planes: Sequence[Plane], points: list, eps_sn: float) -> List[int]:
        """Append rows for ``planes`` to every existing column."""
        first = len(self.rows)
        self.rows.extend(planes)
        for v, col in enumerate(self.cols):
            x = points[v]
            for p in planes:
                col.append(signed_distance(p, x, eps_sn))
        return list(range(first, first + len(planes)))

    def add_vertices(self, points: Sequence, eps_sn: float) -> List[int]:
        first = len(self.cols)
        for x in points:
            self.cols.append(distance_column(self.rows, x, eps_sn))
        return list(range(first, first + len(points)))


def signed_distances(planes: Sequence[Plane], verts: Sequence, eps_sn: float) -> DistanceMatrix:
    """Snapped distances of every vertex to every plane."""
    for x in verts:
        if not all(math.isfinite(c) for c in x):
            raise ValueError(f"non-finite coordinate {x}")
    return DistanceMatrix(list(planes), [distance_column(planes, x, eps_sn) for x in verts])


def alignment_sign(hi: Sequence[float], hj: Sequence[float]) -> int:
    """+1 if two quasi-aligned rows are coplanar, -1 if complementary.

    The sign is read at the furthest vertex: the column with the largest
    entry magnitude among those where both rows are non-zero (lowest column
    on ties).  All-zero rows give +1.
    """
    best = -1.0
    sign = 1
    for a, b in zip(hi, hj):
        if a == 0.0 or b == 0.0:
            continue
        m = abs(a) if abs(a) >= abs(b) else abs(b)
        if m > best:
            best = m
            sign = 1 if (a > 0.0) == (b > 0.0) else -1
    return sign


def quasi_aligned(hi: Sequence[float], hj: Sequence[float], eps_hs: float) -> bool:
    """min(max|hi - hj|, max|hi + hj|) <= eps_hs."""
    dmax = 0.0
    smax = 0.0
    for a, b in zip(hi, hj):
        d = abs(a - b)
        if d > dmax:
            dmax = d
        s = abs(a + b)
        if s > smax:
            smax = s
    return (dmax if dmax < smax else smax) <= eps_hs


def align_surface(H: DistanceMatrix, k_rows: Sequence[int], s_rows: Sequence[int],
                  s_vids: Sequence[int], all_vids: Sequence[int], eps_hs: float) -> List[Tuple[int, int, int]]:
    """Copy cell-face rows onto quasi-aligned surface-face rows.

    The test runs over the surface vertices ``s_vids``; the sign is read and
    the overwrite done over ``all_vids``.  A surface row usually vanishes on
    all of its own vertices, so the sign needs the cell corners as well.
    Cell rows never change.  Returns (s_row, k_row, sign) for each overwrite.
    """
    cols = H.cols
    done = []
    for fk in k_rows:
        hk = [cols[v][fk] for v in s_vids]
        for fs in s_rows:
            hs = [cols[v][fs] for v in s_vids]
            if not quasi_aligned(hk, hs, eps_hs):
                continue
            sign = alignment_sign([cols[v][fk] for v in all_vids], [cols[v][fs] for v in all_vids])
            copy_row(H, fk, fs, sign, all_vids)
            done.append((fs, fk, sign))
    return done


def copy_row(H: DistanceMatrix, src: int, dst: int, sign: int, vids: Iterable[int]) -> None:
    cols = H.cols
    if sign > 0:
        for v in vids:
            c = cols[v]
            c[dst] = c[src]
    else:
        for v in vids:
            c = cols[v]
            c[dst] = -c[src]


def merge_rows(H: DistanceMatrix, rows: Sequence[int], vids: Sequence[int]) -> List[int]:
    """Make a block of quasi-aligned rows exactly equal up to sign.

    Per column: if any row has an exact zero, all become zero; otherwise all
    take the first row's value times their sign relative to the first row.
    Returns the signs.
    """
    cols = H.cols
    first = rows[0]
    h0 = [cols[v][first] for v in vids]
    signs = [1] + [alignment_sign(h0, [cols[v][r] for v in vids]) for r in rows[1:]]
    for v in vids:
        c = cols[v]
        zero = False
        for r in rows:
            if c[r] == 0.0:
                zero = True
                break
        if zero:
            for r in rows:
                c[r] = 0.0
        else:
            d = c[first]
            for r, s in zip(rows, signs):
                c[r] = d if s > 0 else -d
    return signs


def align_planes(H: DistanceMatrix, rows: Sequence[int], vids: Sequence[int],
                 eps_hs: float) -> Dict[int, Tuple[int, int]]:
    """Merge every connected group of quasi-aligned rows.

    Returns the canonical form of each row: ``row -> (representative, sign)``
    with the representative the smallest row of its group.
    """
    cols = H.cols
    vals = {r: [cols[v][r] for v in vids] for r in rows}
    parent = {r: r for r in rows}

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    rows = list(rows)
    for a in range(len(rows)):
        ra = rows[a]
        for b in range(a + 1, len(rows)):
            rb = rows[b]
            if quasi_aligned(vals[ra], vals[rb], eps_hs):
                x, y = find(ra), find(rb)
                if x != y:
                    if x < y:
                        parent[y] = x
                    else:
                        parent[x] = y
    groups: Dict[int, List[int]] = {}
    for r in rows:
        groups.setdefault(find(r), []).append(r)
    canon = {}
    for rep in sorted(groups):
        members = sorted(groups[rep])
        if len(members) == 1:
            canon[rep] = (rep, 1)
            continue
        signs = merge_rows(H, members, vids)
        for r, s in zip(members, signs):
            canon[r] = (members[0], s)
    return canon
