"""Independent reference computations used by the tests.

Nothing here calls into the clipping or cutting code: volumes come from
scipy's convex hulls, inside/outside from ray parity against the raw STL
triangles.
"""
from itertools import combinations

import numpy as np
from scipy.spatial import ConvexHull

from cutcell.graph_core import from_polygons
from cutcell.halfspace import Plane


def hull_volume(points) -> float:
    pts = np.asarray(points, float)
    if len(pts) < 4:
        return 0.0
    try:
        return float(ConvexHull(pts).volume)
    except Exception:  # flat or degenerate point set
        return 0.0


def halfspace_cut_volume(points, normal, offset) -> float:
    """Volume of conv(points) intersected with {x : normal.x <= offset}.

    The cut polytope is the hull of the kept points and of every crossing of a
    segment between two points with the plane.
    """
    pts = np.asarray(points, float)
    d = pts @ np.asarray(normal, float) - offset
    kept = [p for p, s in zip(pts, d) if s <= 0]
    for i, j in combinations(range(len(pts)), 2):
        if (d[i] < 0 < d[j]) or (d[j] < 0 < d[i]):
            t = d[i] / (d[i] - d[j])
            kept.append(pts[i] + t * (pts[j] - pts[i]))
    return hull_volume(kept)


def convex_rotation_system(points):
    """Rotation system of conv(points), triangulated, faces oriented outward.

    Returns (R, planes) with one plane per face; face labels index ``planes``.
    """
    pts = np.asarray(points, float)
    hull = ConvexHull(pts)
    used = sorted(set(hull.simplices.ravel().tolist()))
    remap = {v: k for k, v in enumerate(used)}
    store = [tuple(map(float, pts[v])) for v in used]
    polys, planes = [], []
    for tri, eq in zip(hull.simplices, hull.equations):
        a, b, c = (pts[v] for v in tri)
        if np.dot(np.cross(b - a, c - a), eq[:3]) < 0:
            tri = tri[::-1]
        polys.append(tuple(remap[v] for v in tri))
        planes.append(Plane(tuple(eq[:3]), tuple(pts[tri[0]]), "S", len(planes)))
    return from_polygons(polys, range(len(polys)), store), planes


def ray_parity_inside(points, triangles, axis=0) -> np.ndarray:
    """Point-in-solid by counting crossings of an axis-parallel ray.

    Rays that pass within 1e-9 (barycentric) of a triangle edge are recast
    along the next axis.
    """
    P = np.asarray(points, float)
    T = np.asarray(triangles, float)
    out = np.zeros(len(P), bool)
    todo = np.arange(len(P))
    for k in range(3):
        ax = (axis + k) % 3
        if len(todo) == 0:
            break
        inside, ambiguous = _axis_parity(P[todo], T, ax)
        out[todo] = inside
        todo = todo[ambiguous]
    if len(todo):
        raise RuntimeError(f"{len(todo)} points ambiguous along every axis")
    return out


def _axis_parity(P, T, ax):
    u, w = [i for i in range(3) if i != ax]
    a, b, c = T[:, 0], T[:, 1], T[:, 2]
    # 2D barycentric coordinates of each point in each projected triangle
    det = (b[:, u] - a[:, u]) * (c[:, w] - a[:, w]) - (c[:, u] - a[:, u]) * (b[:, w] - a[:, w])
    ok = det != 0
    a, b, c, det = a[ok], b[ok], c[ok], det[ok]
    inside = np.zeros(len(P), bool)
    ambiguous = np.zeros(len(P), bool)
    for s in range(0, len(P), 256):
        p = P[s:s + 256]
        pu, pw = p[:, u][:, None], p[:, w][:, None]
        l1 = ((pu - a[:, u]) * (c[:, w] - a[:, w]) - (c[:, u] - a[:, u]) * (pw - a[:, w])) / det
        l2 = ((b[:, u] - a[:, u]) * (pw - a[:, w]) - (pu - a[:, u]) * (b[:, w] - a[:, w])) / det
        l0 = 1.0 - l1 - l2
        hit = (l0 >= 0) & (l1 >= 0) & (l2 >= 0)
        z = l0 * a[:, ax] + l1 * b[:, ax] + l2 * c[:, ax]
        ahead = hit & (z > p[:, ax][:, None])
        near = np.minimum(np.minimum(np.abs(l0), np.abs(l1)), np.abs(l2)) < 1e-9
        inside[s:s + 256] = (ahead.sum(axis=1) % 2) == 1
        ambiguous[s:s + 256] = np.any(near & (z > p[:, ax][:, None]), axis=1)
    return inside, ambiguous


def min_plane_distance(points, triangles) -> np.ndarray:
    """Smallest distance from each point to the supporting planes of the triangles.

    A lower bound of the distance to the surface.
    """
    P = np.asarray(points, float)
    T = np.asarray(triangles, float)
    n = np.cross(T[:, 1] - T[:, 0], T[:, 2] - T[:, 0])
    n /= np.linalg.norm(n, axis=1)[:, None]
    off = np.einsum("ij,ij->i", n, T[:, 0])
    out = np.empty(len(P))
    for s in range(0, len(P), 512):
        out[s:s + 512] = np.abs(P[s:s + 512] @ n.T - off).min(axis=1)
    return out


def mutual_partition(sets_of_vertices, sets_of_planes, tol=0.0):
    """Partition of components into classes of pairwise mutual containment.

    Brute force over all set partitions: a valid partition has every class
    pairwise mutually inside and no mutual pair across classes.  Component i
    is inside component j when every vertex of i is on the non-positive side
    (within ``tol``) of every plane of j.  Returns the sorted partition, or
    None when no partition qualifies (mutual containment is not transitive).
    """
    n = len(sets_of_vertices)

    def inside(i, j):
        for (nrm, p) in sets_of_planes[j]:
            d = (np.asarray(sets_of_vertices[i]) - p) @ nrm
            if np.any(d > tol):
                return False
        return True

    mutual = [[i == j or (inside(i, j) and inside(j, i)) for j in range(n)] for i in range(n)]
    found = []
    for part in _set_partitions(list(range(n))):
        cls = {i: k for k, c in enumerate(part) for i in c}
        if all(mutual[a][b] == (cls[a] == cls[b]) for a in range(n) for b in range(n)):
            found.append(part)
    if len(found) != 1:
        return None
    return sorted(sorted(c) for c in found[0])


def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1:]
        yield [[first]] + part
