"""Cell-wise intersection of a background grid with a closed surface mesh.

For each cell K the surface faces near K are gathered and closed with the
open vertex.  The pipeline then runs as follows:

1. Distances of all vertices to the cell faces, surface faces and walls.
2. Surface rows that are quasi-aligned with a cell face are replaced by it.
3. The surface is clipped to the open cell, which gives the boundary pieces.
4. Quasi-aligned surface and wall rows are merged.
5. The cell is split by the walls.
6. Each leaf is clipped by the faces of each colour of its surface.

The exterior pieces come from the same pipeline run on the reversed surface.
Cells without surface are classified afterwards by propagating the side
information that cut cells leave on their faces.

Surface faces lying on a cell face need care.  The open cell would drop them
in both neighbours.  Instead a face whose vertices all have snapped distance
zero to a cell plane belongs to the cell on its inner side: there it is
exempt from that one plane, and on the outer side it is dropped.  Faces only
near a plane are clipped like any other face.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .clip import clip_by_rows
from .convexify import colouring, convex_decompose, walls
from .graph_core import BOX_FACES, OPEN, RotationSystem, faces, from_polygons, pol
from .halfspace import (EPS, DistanceMatrix, Plane, Tolerances, align_planes, align_surface,
                        copy_row, plane_from_points, signed_distances)
from .measures import polygon_area, tet_det

# face j of a cell: axis j // 2, outward direction -1 for even j, +1 for odd j
FACE_OFFSETS = ((-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1))
BOX_FACE_ANCHOR = (0, 1, 0, 2, 0, 4)


class CellState(IntEnum):
    UNKNOWN = -1
    EXTERIOR = 0
    INTERIOR = 1
    CUT = 2


class CutError(RuntimeError):
    def __init__(self, cell, cause):
        super().__init__(f"cell {cell}: {cause}")
        self.cell = cell
        self.cause = cause


# --------------------------------------------------------------------------
# per-cell geometry


@dataclass
class CutContext:
    """Immutable data shared by all cells of one cut."""

    verts: list  # world coordinates (tuples)
    faces: list  # vertex-id triples
    origin: tuple  # effective origin of the grid (local frame)
    h: float
    rotation: Optional[tuple]
    center: tuple
    eps_sn: float
    eps_hs: float
    triangles: np.ndarray = field(repr=False, default=None)  # (nf, 3, 3) for point queries

    @classmethod
    def build(cls, mesh, grid, tol: Tolerances) -> "CutContext":
        verts = [tuple(map(float, v)) for v in mesh.vertices]
        fcs = [tuple(map(int, f)) for f in mesh.faces]
        return cls(verts, fcs, grid.effective_origin, float(grid.h), grid.rotation,
                   tuple(map(float, grid.center)), float(tol.eps_sn), float(tol.eps_hs),
                   mesh.vertices[mesh.faces])


def grid_point(ctx: CutContext, i: int, j: int, k: int) -> tuple:
    h = ctx.h
    o = ctx.origin
    l0 = o[0] + i * h
    l1 = o[1] + j * h
    l2 = o[2] + k * h
    R = ctx.rotation
    if R is None:
        return (l0, l1, l2)
    c = ctx.center
    d0, d1, d2 = l0 - c[0], l1 - c[1], l2 - c[2]
    return (R[0][0] * d0 + R[0][1] * d1 + R[0][2] * d2 + c[0],
            R[1][0] * d0 + R[1][1] * d1 + R[1][2] * d2 + c[1],
            R[2][0] * d0 + R[2][1] * d1 + R[2][2] * d2 + c[2])


def cell_corners(ctx: CutContext, i: int, j: int, k: int) -> list:
    return [grid_point(ctx, i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)) for c in range(8)]


def cell_planes(ctx: CutContext, corners: list) -> list:
    """Outward planes x-, x+, y-, y+, z-, z+.

    Opposite faces of neighbouring cells share the anchor grid point and have
    exactly negated normals, so their distance rows are exact negatives.
    """
    R = ctx.rotation
    if R is None:
        axes = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    else:
        axes = tuple((R[0][a], R[1][a], R[2][a]) for a in range(3))
    out = []
    for j in range(6):
        a = axes[j // 2]
        n = (-a[0], -a[1], -a[2]) if j % 2 == 0 else a
        out.append(Plane(n, corners[BOX_FACE_ANCHOR[j]], "K", j))
    return out


def box_planes(lo, hi) -> list:
    from .graph_core import box_corners

    corners = box_corners(lo, hi)
    axes = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    return corners, [Plane((-axes[j // 2][0], -axes[j // 2][1], -axes[j // 2][2]) if j % 2 == 0
                           else axes[j // 2], corners[BOX_FACE_ANCHOR[j]], "K", j) for j in range(6)]


@dataclass
class CellOutcome:
    """Per-cell result of the kernel, in plain data."""

    cut: bool
    v_in: float = 0.0
    v_out: float = 0.0
    area: float = 0.0
    marks: tuple = (0.0,) * 6  # interior side area seen across each cell face, in units of h**2
    pieces: list = None  # interior pieces as (points, adjacency) pairs
    exterior: list = None
    polygons: list = None  # (stl face id, coordinates)
    nleaves: int = 0


def compact(R: RotationSystem) -> RotationSystem:
    """Copy of ``R`` with its own coordinate store and ids 0..n-1 (order kept)."""
    ids = {v: k for k, v in enumerate(R.adj)}
    ids[OPEN] = OPEN
    pts = [R.points[v] for v in R.adj]
    adj = {ids[v]: [ids[u] for u in n] for v, n in R.adj.items()}
    lab = {ids[v]: list(l) for v, l in R.lab.items()}
    return RotationSystem(adj, lab, pts, R.is_open_surface)


def _poly_volume(P: RotationSystem) -> float:
    pts = P.points
    anchor = min(P.adj)
    a = pts[anchor]
    total = 0.0
    for f in faces(P):
        vs = f.vertices
        if anchor in vs:
            continue
        k = vs.index(min(vs))
        vs = vs[k:] + vs[:k]
        p0 = pts[vs[0]]
        for i in range(1, len(vs) - 1):
            total += tet_det(a, p0, pts[vs[i]], pts[vs[i + 1]])
    return total / 6.0


def _centroid(P: RotationSystem) -> tuple:
    pts = P.points
    n = len(P.adj)
    sx = sy = sz = 0.0
    for v in P.adj:
        p = pts[v]
        sx += p[0]
        sy += p[1]
        sz += p[2]
    return (sx / n, sy / n, sz / n)


def _segment_crossings(points: list, tris: list, skip: int, x, y):
    """Number of triangles crossed by the segment (x, y), or None if a test is degenerate."""
    count = 0
    for q, (a, b, c) in enumerate(tris):
        if q == skip:
            continue
        pa, pb, pc = points[a], points[b], points[c]
        o1 = tet_det(pa, pb, pc, x)
        o2 = tet_det(pa, pb, pc, y)
        if (o1 > 0.0 and o2 > 0.0) or (o1 < 0.0 and o2 < 0.0):
            continue
        s1 = tet_det(x, y, pa, pb)
        s2 = tet_det(x, y, pb, pc)
        s3 = tet_det(x, y, pc, pa)
        if (s1 > 0.0 and s2 > 0.0 and s3 > 0.0) or (s1 < 0.0 and s2 < 0.0 and s3 < 0.0):
            if o1 == 0.0 or o2 == 0.0:
                return None
            count += 1
        elif not ((s1 > 0.0 or s2 > 0.0 or s3 > 0.0) and (s1 < 0.0 or s2 < 0.0 or s3 < 0.0)):
            return None
    return count


def _cut_side(ctx: CutContext, corners: list, kplanes: list, ftri: list, flip: bool,
              classifier: Callable, keep: bool, interior_marks: bool):
    """One run of the pipeline for the interior (``flip=False``) or the exterior.

    Returns None when the clipped surface is empty, else
    (volume, area, marks, pieces, polygons, nleaves).
    """
    eps_sn, eps_hs, h = ctx.eps_sn, ctx.eps_hs, ctx.h
    points = list(corners)
    gid = {}
    tris = []
    for fid, tri in ftri:
        loc = []
        for g in tri:
            l = gid.get(g)
            if l is None:
                l = len(points)
                gid[g] = l
                points.append(ctx.verts[g])
            loc.append(l)
        tris.append((loc[0], loc[2], loc[1]) if flip else (loc[0], loc[1], loc[2]))
    m = len(tris)
    ns0 = len(points)
    planes = list(kplanes)
    for f, (a, b, c) in enumerate(tris):
        planes.append(plane_from_points(points[a], points[b], points[c], "S", ftri[f][0]))
    H = signed_distances(planes, points, eps_sn)
    cols = H.cols

    # faces lying on a cell plane: kept (exempt from that plane) or dropped
    group = []
    any_kept = False
    for f, (a, b, c) in enumerate(tris):
        g = -1
        for j in range(6):
            if cols[a][j] == 0.0 and cols[b][j] == 0.0 and cols[c][j] == 0.0:
                nf = planes[6 + f].normal
                nk = planes[j].normal
                dot = nf[0] * nk[0] + nf[1] * nk[1] + nf[2] * nk[2]
                if dot > 0.5:
                    g = j
                    break
                if dot < -0.5:
                    g = -2
                    break
        group.append(g)
        if g != -2:
            any_kept = True
    if not any_kept:
        return None

    srows = list(range(6, 6 + m))
    S0 = pol(from_polygons(tris, srows, points))
    wall_planes = walls(S0, H)
    wrows = H.add_planes(wall_planes, points, eps_sn)

    all0 = list(range(ns0))
    on_cell = {}  # surface row -> (cell row, sign) for faces lying on a cell face
    for fs, fk, sg in align_surface(H, range(6), srows, list(range(8, ns0)), all0, eps_hs):
        on_cell[fs] = (fk, sg)
    for f, g in enumerate(group):
        if g >= 0:
            copy_row(H, g, 6 + f, 1, all0)
            on_cell[6 + f] = (g, 1)

    # clip each group of faces to the open cell
    parts = []
    rest = [f for f in range(m) if group[f] == -1]
    if rest:
        Sr = pol(from_polygons([tris[f] for f in rest], [6 + f for f in rest], points))
        parts.append(clip_by_rows(Sr, H, list(range(6))))
    for j in range(6):
        on = [f for f in range(m) if group[f] == j]
        if not on:
            continue
        remap = {}
        ltris = []
        for f in on:
            t = []
            for v in tris[f]:
                nv = remap.get(v)
                if nv is None:
                    nv = len(points)
                    remap[v] = nv
                    points.append(points[v])
                    cols.append(list(cols[v]))
                t.append(nv)
            ltris.append(tuple(t))
        Sj = pol(from_polygons(ltris, [6 + f for f in on], points))
        Sj = clip_by_rows(Sj, H, [r for r in range(6) if r != j])
        parts.append(Sj)
    adj, lab = {}, {}
    for part in parts:
        adj.update(part.adj)
        lab.update(part.lab)
    order = sorted(adj)
    S = RotationSystem({v: adj[v] for v in order}, {v: lab[v] for v in order}, points, True)
    bfaces = faces(S)
    if not bfaces:
        return None

    polygons = []
    area = 0.0
    best, best_area = None, -1.0  # reference face for classifying surface-free leaves
    # surface area lying on each cell face, by orientation relative to the face
    on_same = [0.0] * 6
    on_opp = [0.0] * 6
    for f in bfaces:
        coords = [points[v] for v in f.vertices]
        a = polygon_area(coords)
        area += a
        if a > best_area:
            best, best_area = f, a
        oc = on_cell.get(f.label)
        if oc is not None:
            if oc[1] > 0:
                on_same[oc[0]] += a
            else:
                on_opp[oc[0]] += a
        if keep:
            polygons.append((planes[f.label].ref, coords))

    live_rows = sorted({f.label for f in bfaces}) + wrows
    live = list(range(8)) + order
    canon = align_planes(H, live_rows, live, eps_hs)

    P = from_polygons(BOX_FACES, range(6), points)
    leaves = convex_decompose(P, S, H, wrows)
    # a point inside the largest surface piece and the side its face bounds
    n = len(best.vertices)
    sx = sy = sz = 0.0
    for v in best.vertices:
        p = points[v]
        sx += p[0]
        sy += p[1]
        sz += p[2]
    yref = (sx / n, sy / n, sz / n)
    nref = planes[best.label].normal

    thr = eps_sn * h * h
    pieces = []
    for leaf in leaves:
        classes = colouring(leaf.S, H)
        if not classes:
            # the segment to the reference point stays in the cell, so only
            # restricted faces can cross it
            x = _centroid(leaf.P)
            cnt = _segment_crossings(points, tris, best.label - 6, x, yref)
            side = nref[0] * (x[0] - yref[0]) + nref[1] * (x[1] - yref[1]) + nref[2] * (x[2] - yref[2])
            if cnt is None or side == 0.0:
                w = classifier(x)
                inside = w > 0.5 if not flip else w < 0.5
            else:
                inside = (side < 0.0) != (cnt % 2 == 1)
            if inside and _poly_volume(leaf.P) > thr:
                pieces.append(leaf.P)
            continue
        for cls in classes:
            rows = []
            seen = set()
            for comp in cls:
                for f in comp.faces:
                    key = canon[f.label]
                    if key not in seen:
                        seen.add(key)
                        rows.append(key)
            Q = clip_by_rows(leaf.P, H, rows, cap_labels=[r for r, _ in rows])
            if Q.adj and _poly_volume(Q) > thr:
                pieces.append(Q)

    vol = 0.0
    for Q in pieces:
        vol += _poly_volume(Q)
    marks = None
    if interior_marks:
        at = [0.0] * 6
        for Q in pieces:
            for f in faces(Q):
                vs = f.vertices
                for j in range(6):
                    ok = True
                    for v in vs:
                        if cols[v][j] != 0.0:
                            ok = False
                            break
                    if ok:
                        at[j] += polygon_area([points[v] for v in vs])
        marks = tuple((at[j] - on_same[j] + on_opp[j]) / (h * h) for j in range(6))
    return vol, area, marks, pieces, polygons, len(leaves)


def cut_cell_core(ctx: CutContext, corners: list, kplanes: list, face_ids: Sequence[int],
                  exteriors: bool = True, keep: bool = False,
                  classifier: Callable = None) -> CellOutcome:
    """Interior (and exterior) pieces of one cell given its candidate faces."""
    if classifier is None:
        classifier = lambda p: winding_number(ctx.triangles, p)
    ftri = [(int(f), ctx.faces[f]) for f in face_ids]
    res = _cut_side(ctx, corners, kplanes, ftri, False, classifier, keep, True)
    if res is None:
        return CellOutcome(False)
    vol, area, marks, pieces, polygons, nleaves = res
    out = CellOutcome(True, vol, 0.0, area, marks, nleaves=nleaves)
    ext_pieces = []
    if exteriors:
        rx = _cut_side(ctx, corners, kplanes, ftri, True, classifier, keep, False)
        if rx is None:
            K = from_polygons(BOX_FACES, range(6), list(corners))
            vk = _poly_volume(K)
            if not vol > 0.5 * vk:
                out.v_out = vk
                ext_pieces = [K]
        else:
            out.v_out = rx[0]
            ext_pieces = rx[3]
    if keep:
        out.pieces = [compact(Q) for Q in pieces]
        out.exterior = [compact(Q) for Q in ext_pieces]
        out.polygons = polygons
    return out


# --------------------------------------------------------------------------
# point queries


def winding_number(triangles: np.ndarray, p) -> float:
    """Generalized winding number of a closed triangle mesh at point ``p``."""
    t = triangles - np.asarray(p, dtype=np.float64)
    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    la = np.linalg.norm(a, axis=1)
    lb = np.linalg.norm(b, axis=1)
    lc = np.linalg.norm(c, axis=1)
    det = np.einsum("ij,ij->i", a, np.cross(b, c))
    den = (la * lb * lc + np.einsum("ij,ij->i", a, b) * lc
           + np.einsum("ij,ij->i", b, c) * la + np.einsum("ij,ij->i", c, a) * lb)
    return float(np.sum(np.arctan2(det, den)) / (2.0 * math.pi))


# --------------------------------------------------------------------------
# restriction


def candidate_pairs(mesh, grid, eps_hs: float):
    """(cell flat id, face id) pairs whose boxes overlap, sorted by cell then face.

    Faces are binned by the index range of their bounding box (in the grid's
    frame) enlarged by ``eps_hs``; pairs whose face plane misses the enlarged
    cell are dropped.  False positives are harmless, misses are not, so every
    bound carries slack.
    """
    tris = grid.to_local(mesh.vertices)[mesh.faces]
    o = np.array(grid.effective_origin)
    h = grid.h
    dims = np.array(grid.dims)
    margin = eps_hs + 8 * EPS * (float(np.max(np.abs(tris))) + float(np.max(np.abs(o))) + h)
    lo = np.floor((tris.min(axis=1) - margin - o) / h).astype(np.int64)
    hi = np.floor((tris.max(axis=1) + margin - o) / h).astype(np.int64)
    lo = np.maximum(lo, 0)
    hi = np.minimum(hi, dims - 1)
    ok = np.all(hi >= lo, axis=1)
    fids = np.nonzero(ok)[0]
    lo, hi = lo[ok], hi[ok]
    span = hi - lo + 1
    count = span.prod(axis=1)
    if count.sum() == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    face = np.repeat(fids, count)
    start = np.repeat(np.cumsum(count) - count, count)
    r = np.arange(count.sum()) - start
    sp = span[np.repeat(np.arange(len(fids)), count)]
    base = lo[np.repeat(np.arange(len(fids)), count)]
    k = base[:, 2] + r % sp[:, 2]
    j = base[:, 1] + (r // sp[:, 2]) % sp[:, 1]
    i = base[:, 0] + r // (sp[:, 2] * sp[:, 1])

    # plane test against the enlarged cell
    t = tris[face]
    n = np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])
    n /= np.linalg.norm(n, axis=1)[:, None]
    centre = o + (np.stack([i, j, k], axis=1) + 0.5) * h
    dist = np.abs(np.einsum("ij,ij->i", n, centre - t[:, 0]))
    radius = (0.5 * h + margin) * np.abs(n).sum(axis=1)
    keep = dist <= radius + 1e-9 * h
    cell = (i * dims[1] + j) * dims[2] + k
    cell, face = cell[keep], face[keep]
    order = np.lexsort((face, cell))
    return cell[order], face[order]


def restrict(mesh, lo, hi, eps_hs: float) -> np.ndarray:
    """Faces whose bounding box overlaps the box [lo, hi] enlarged by ``eps_hs``."""
    t = mesh.vertices[mesh.faces]
    lo = np.asarray(lo) - eps_hs
    hi = np.asarray(hi) + eps_hs
    ok = np.all(t.min(axis=1) <= hi, axis=1) & np.all(t.max(axis=1) >= lo, axis=1)
    return np.nonzero(ok)[0]


# --------------------------------------------------------------------------
# batch processing (pure Python implementation of the kernel)


@dataclass
class BatchResult:
    cut: np.ndarray
    v_in: np.ndarray
    v_out: np.ndarray
    area: np.ndarray
    marks: np.ndarray
    nleaves: np.ndarray
    geometry: Optional[dict] = None


def process_cells_py(ctx: CutContext, cells: np.ndarray, ptr: np.ndarray, idx: np.ndarray,
                     dims: tuple, exteriors: bool, keep: bool, classifier=None) -> BatchResult:
    n = len(cells)
    cut = np.zeros(n, bool)
    v_in = np.zeros(n)
    v_out = np.zeros(n)
    area = np.zeros(n)
    marks = np.zeros((n, 6))
    nleaves = np.zeros(n, np.int64)
    geometry = {} if keep else None
    ny, nz = dims[1], dims[2]
    for q in range(n):
        c = int(cells[q])
        i, j, k = c // (ny * nz), (c // nz) % ny, c % nz
        corners = cell_corners(ctx, i, j, k)
        try:
            out = cut_cell_core(ctx, corners, cell_planes(ctx, corners), idx[ptr[q]:ptr[q + 1]],
                                exteriors, keep, classifier)
        except Exception as exc:  # attach the cell id
            raise CutError((i, j, k), exc) from exc
        if not out.cut:
            continue
        cut[q] = True
        v_in[q], v_out[q], area[q] = out.v_in, out.v_out, out.area
        marks[q] = out.marks
        nleaves[q] = out.nleaves
        if keep:
            geometry[c] = (out.pieces, out.exterior, out.polygons)
    return BatchResult(cut, v_in, v_out, area, marks, nleaves, geometry)


# --------------------------------------------------------------------------
# classification


def classify_cells(dims: tuple, cut_cells: np.ndarray, marks: np.ndarray):
    """States of all cells from the face marks left by the cut cells.

    Returns (states, diagnostics).  Uncut cells form face-connected regions;
    each region takes the state its neighbouring cut cells report.  Regions
    nobody reports on are exterior.
    """
    from scipy import ndimage

    states = np.full(dims, CellState.UNKNOWN, dtype=np.int8)
    flat = states.reshape(-1)
    flat[cut_cells] = CellState.CUT
    uncut = states != CellState.CUT
    regions, nreg = ndimage.label(uncut)
    votes_in = np.zeros(nreg + 1, np.int64)
    votes_out = np.zeros(nreg + 1, np.int64)
    if len(cut_cells):
        ijk = np.stack(np.unravel_index(cut_cells, dims), axis=1)
        for j, off in enumerate(FACE_OFFSETS):
            nb = ijk + np.array(off)
            inside = np.all((nb >= 0) & (nb < np.array(dims)), axis=1)
            nbi = nb[inside]
            reg = regions[nbi[:, 0], nbi[:, 1], nbi[:, 2]]
            val = marks[inside, j] > 0.5
            sel = reg > 0
            np.add.at(votes_in, reg[sel & val], 1)
            np.add.at(votes_out, reg[sel & ~val], 1)
    region_state = np.where(votes_in > votes_out, CellState.INTERIOR, CellState.EXTERIOR).astype(np.int8)
    diagnostics = []
    for r in np.nonzero((votes_in > 0) & (votes_out > 0))[0]:
        cell = tuple(int(v) for v in np.argwhere(regions == r)[0])
        diagnostics.append(f"inconsistent classification: region of cell {cell} has "
                           f"{votes_in[r]} interior and {votes_out[r]} exterior marks")
    states[uncut] = region_state[regions[uncut]]
    return states, diagnostics


# --------------------------------------------------------------------------
# whole-grid driver


@dataclass
class CutCellResult:
    cell: tuple
    state: CellState
    pieces: list = field(default_factory=list)
    boundary: list = field(default_factory=list)  # (stl face id, coordinates)
    exterior: list = field(default_factory=list)


class CutMesh:
    """Outcome of cutting a grid with a surface."""

    def __init__(self, grid, states, cut_ids, batch: BatchResult, exteriors: bool,
                 diagnostics: list, stats: dict = None):
        self.grid = grid
        self.states = states
        self.cut_ids = cut_ids
        self.exteriors = exteriors
        self.diagnostics = diagnostics
        self.stats = stats or {}
        self._batch = batch
        h3 = grid.h ** 3
        n_in = int(np.count_nonzero(states == CellState.INTERIOR))
        n_out = int(np.count_nonzero(states == CellState.EXTERIOR))
        sel = batch.cut
        self.cell_v_in = batch.v_in[sel]
        self.cell_v_out = batch.v_out[sel]
        self.cell_area = batch.area[sel]
        self.V_in = math.fsum(list(self.cell_v_in) + [n_in * h3])
        self.V_out = math.fsum(list(self.cell_v_out) + [n_out * h3]) if exteriors else float("nan")
        self.area = math.fsum(self.cell_area)
        self.n_interior, self.n_exterior = n_in, n_out

    @property
    def n_cut(self) -> int:
        return len(self.cut_ids)

    @property
    def has_geometry(self) -> bool:
        return self._batch.geometry is not None

    def state(self, i: int, j: int, k: int) -> CellState:
        return CellState(int(self.states[i, j, k]))

    def active_cells(self) -> np.ndarray:
        flat = self.states.reshape(-1)
        return np.nonzero((flat == CellState.INTERIOR) | (flat == CellState.CUT))[0]

    def _uncut_cell(self, flat: int) -> RotationSystem:
        ctx = CutContext([], [], self.grid.effective_origin, self.grid.h, self.grid.rotation,
                         self.grid.center, 0.0, 0.0)
        i, j, k = self.grid.cell_index(flat)
        return from_polygons(BOX_FACES, range(6), cell_corners(ctx, i, j, k))

    def cell(self, i: int, j: int, k: int) -> CutCellResult:
        flat = self.grid.flat_index(i, j, k)
        st = self.state(i, j, k)
        if st == CellState.CUT and self.has_geometry:
            pieces, ext, polys = self._batch.geometry[flat]
            return CutCellResult((i, j, k), st, pieces, polys, ext)
        if st == CellState.INTERIOR and self.has_geometry:
            return CutCellResult((i, j, k), st, [self._uncut_cell(flat)])
        if st == CellState.EXTERIOR and self.has_geometry and self.exteriors:
            return CutCellResult((i, j, k), st, [], [], [self._uncut_cell(flat)])
        return CutCellResult((i, j, k), st)

    def interior_pieces(self):
        """(flat cell id, state, convex pieces) for every active cell."""
        flat_states = self.states.reshape(-1)
        for c in self.active_cells():
            c = int(c)
            st = int(flat_states[c])
            if st == CellState.CUT:
                yield c, st, self._batch.geometry[c][0]
            else:
                yield c, st, [self._uncut_cell(c)]

    def boundary_pieces(self):
        for c in self.cut_ids:
            c = int(c)
            yield c, self._batch.geometry[c][2]


def _kernel():
    from . import kernels

    return kernels.process_cells


_WORKER = {}


def _worker_init(ctx, dims, exteriors, keep, impl):
    _WORKER.update(ctx=ctx, dims=dims, exteriors=exteriors, keep=keep, impl=impl)


def _worker_run(args):
    cells, ptr, idx = args
    w = _WORKER
    return w["impl"](w["ctx"], cells, ptr, idx, w["dims"], w["exteriors"], w["keep"])


def _concat(parts: List[BatchResult], keep: bool) -> BatchResult:
    geometry = None
    if keep:
        geometry = {}
        for p in parts:
            geometry.update(p.geometry)
    return BatchResult(np.concatenate([p.cut for p in parts]),
                       np.concatenate([p.v_in for p in parts]),
                       np.concatenate([p.v_out for p in parts]),
                       np.concatenate([p.area for p in parts]),
                       np.concatenate([p.marks for p in parts]),
                       np.concatenate([p.nleaves for p in parts]), geometry)


def cut_mesh(grid, mesh, tol: Tolerances, exteriors: bool = True, keep_geometry: bool = False,
             workers: int = 1, impl: Callable = None) -> CutMesh:
    """Cut every cell of ``grid`` with ``mesh`` and classify the rest."""
    ctx = CutContext.build(mesh, grid, tol)
    pair_cell, pair_face = candidate_pairs(mesh, grid, tol.eps_hs)
    cells, first = np.unique(pair_cell, return_index=True)
    ptr = np.append(first, len(pair_cell)).astype(np.int64)
    idx = pair_face.astype(np.int64)
    dims = tuple(int(d) for d in grid.dims)
    impl = impl or _kernel()

    if workers <= 1 or len(cells) < 2:
        batch = impl(ctx, cells, ptr, idx, dims, exteriors, keep_geometry)
    else:
        nchunk = min(len(cells), 4 * workers)
        bounds = np.linspace(0, len(cells), nchunk + 1).astype(np.int64)
        jobs = []
        for a, b in zip(bounds[:-1], bounds[1:]):
            p = ptr[a:b + 1]
            jobs.append((cells[a:b], p - p[0], idx[p[0]:p[-1]]))
        with ProcessPoolExecutor(workers, initializer=_worker_init,
                                 initargs=(ctx, dims, exteriors, keep_geometry, impl)) as ex:
            parts = list(ex.map(_worker_run, jobs))
        batch = _concat(parts, keep_geometry)

    cut_ids = cells[batch.cut]
    states, diagnostics = classify_cells(dims, cut_ids, batch.marks[batch.cut])
    stats = {"candidate_cells": int(len(cells)), "pairs": int(len(pair_cell)),
             "cut_cells": int(len(cut_ids)), "leaves": int(batch.nleaves.sum())}
    return CutMesh(grid, states, cut_ids, batch, exteriors, diagnostics, stats)


def cut_cell(lo, hi, mesh, tol: Tolerances, exteriors: bool = True) -> CutCellResult:
    """Cut a single axis-aligned box.

    Without surface in the box the state stays ``UNKNOWN``: only the global
    classification can decide it.
    """
    corners, kplanes = box_planes(lo, hi)
    ctx = CutContext.build(mesh, _unit_grid(), tol)
    fids = restrict(mesh, lo, hi, tol.eps_hs)
    ctx.h = float(min(b - a for a, b in zip(lo, hi)))
    out = cut_cell_core(ctx, corners, kplanes, fids, exteriors, True)
    if not out.cut:
        return CutCellResult((0, 0, 0), CellState.UNKNOWN)
    return CutCellResult((0, 0, 0), CellState.CUT, out.pieces, out.polygons, out.exterior)


def _unit_grid():
    from .mesh_io import CartesianGrid

    return CartesianGrid((0.0, 0.0, 0.0), 1.0, (1, 1, 1))
