import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import meshes
from cutcell.convexify import (ColouringError, bisector, clip_by_surface, colour_classes, colouring,
                               convex_decompose, surface_components, walls)
from cutcell.graph_core import cell_polyhedron, faces, from_polygons, pol
from cutcell.halfspace import plane_from_points, signed_distances
from cutcell.measures import polygon_vector_area, volume
from oracles import mutual_partition

EPS_SN = 1e-14


def _surface(polys, pts):
    """Open surface with one plane row per polygon (label = row)."""
    S = pol(from_polygons(polys, range(len(polys)), pts))
    planes = [plane_from_points(*(pts[v] for v in p[:3]), ref=k) for k, p in enumerate(polys)]
    return S, planes


def _with_box(polys, pts, lo=(0, 0, 0), hi=(1, 1, 1)):
    """Cell box (ids 0..7) plus a surface patch; rows = surface planes then walls."""
    store = []
    P = cell_polyhedron(lo, hi, store)
    base = len(store)
    store.extend(pts)
    polys = [tuple(v + base for v in p) for p in polys]
    S, planes = _surface(polys, store)
    H = signed_distances(planes, store, EPS_SN)
    W = walls(S, H)
    wrows = H.add_planes(W, store, EPS_SN)
    return P, S, H, W, wrows


def _l_surface():
    # two faces meeting along x = 0.5, z = 0.5 with a 270 degree interior dihedral:
    # the solid is {x < 0.5} union {z < 0.5} (an L), its surface has one reflex edge
    pts = [(0.5, 0.0, 1.2), (0.5, 1.0, 1.2), (0.5, 1.0, 0.5), (0.5, 0.0, 0.5),
           (1.2, 0.0, 0.5), (1.2, 1.0, 0.5)]
    polys = [(0, 3, 2, 1), (3, 4, 5, 2)]  # x = 0.5 facing +x, z = 0.5 facing +z
    return polys, pts


def test_l_surface_orientation():
    polys, pts = _l_surface()
    n0 = polygon_vector_area([pts[v] for v in polys[0]])
    n1 = polygon_vector_area([pts[v] for v in polys[1]])
    assert n0[0] > 0 and n1[2] > 0


def test_no_walls_on_convex_surface():
    m = meshes.cube()
    pts = [tuple(p) for p in m.vertices]
    S, planes = _surface([tuple(int(v) for v in f) for f in m.faces], pts)
    H = signed_distances(planes, pts, EPS_SN)
    assert walls(S, H) == []


def test_reflex_edge_gives_one_wall_through_edge():
    polys, pts = _l_surface()
    P, S, H, W, wrows = _with_box(polys, pts)
    assert len(W) == 1
    n = np.array(W[0].normal)
    # the edge runs along y at x = z = 0.5; the wall bisects +x and +z
    np.testing.assert_allclose(np.abs(n), [2 ** -0.5, 0, 2 ** -0.5], atol=1e-15)
    for v in (8 + 2, 8 + 3):
        assert H.cols[v][wrows[0]] == 0.0
    # each face lies on its own closed side of the wall
    side0 = {np.sign(H.cols[8 + v][wrows[0]]) for v in polys[0]} - {0.0}
    side1 = {np.sign(H.cols[8 + v][wrows[0]]) for v in polys[1]} - {0.0}
    assert len(side0) == 1 and len(side1) == 1 and side0 != side1


def test_coplanar_faces_no_wall():
    pts = [(0.0, 0, 0), (1.0, 0, 0), (1.0, 1, 0), (0.0, 1, 0)]
    S, planes = _surface([(0, 1, 2), (0, 2, 3)], pts)
    H = signed_distances(planes, pts, EPS_SN)
    assert walls(S, H) == []


def test_convex_edge_no_wall():
    # same faces as the L, reversed: the solid is the quarter x > 0.5 and z > 0.5
    polys, pts = _l_surface()
    polys = [p[::-1] for p in polys]
    P, S, H, W, wrows = _with_box(polys, pts)
    assert W == []


def test_bisector_fallback_coplanar():
    n, p = bisector((0, 0, 1), (0, 0, 1), (0, 0, 0), (1, 0, 0))
    assert abs(np.dot(n, (1, 0, 0))) < 1e-15 and abs(np.dot(n, (0, 0, 1))) < 1e-15


def test_colouring_single_component():
    m = meshes.cube()
    pts = [tuple(p) for p in m.vertices]
    S, planes = _surface([tuple(int(v) for v in f) for f in m.faces], pts)
    H = signed_distances(planes, pts, EPS_SN)
    cols = colouring(S, H)
    assert len(cols) == 1 and len(cols[0]) == 1


def _classes(cols, pieces):
    index = {min(p): k for k, p in enumerate(pieces)}
    return sorted(sorted(index[min(c.vertices)] for c in cls) for cls in cols)


def test_colouring_five_pieces():
    S, H, pieces = meshes.five_piece_surface()
    assert len(surface_components(S)) == 5
    assert _classes(colouring(S, H), pieces) == [[0, 1, 2], [3, 4]]


def test_colour_classes_five_piece_graph():
    # S1..S5 as 0..4: S1, S2, S3, S5 pairwise mutual; S4-S5 mutual; S1 not inside S4
    n = 5
    mutual = [[False] * n for _ in range(n)]
    for grp in ((0, 1, 2, 4), (3, 4)):
        for a in grp:
            for b in grp:
                if a != b:
                    mutual[a][b] = True
    inside = [[mutual[i][j] for j in range(n)] for i in range(n)]
    for i in (0, 1, 2):
        inside[3][i] = True  # S4 inside S1, S2, S3 but not the reverse
    assert colour_classes(inside, mutual) == [[0, 1, 2], [3, 4]]


def test_colouring_lens_one_colour():
    # two caps of a lens: each inside the other
    pts = [(0.0, 0, 0), (1.0, 0, 0), (0.5, 1, 0.3), (0.0, 0, 1), (0.5, 1, 0.7), (1.0, 0, 1)]
    S, planes = _surface([(0, 2, 1), (3, 5, 4)], pts)
    H = signed_distances(planes, pts, EPS_SN)
    assert len(surface_components(S)) == 2
    cols = colouring(S, H)
    assert len(cols) == 1 and len(cols[0]) == 2


def test_colouring_non_progress_guard():
    # graphs that geometry cannot produce (asymmetric mutual relation) must not loop
    inside = [[False, False], [True, False]]
    mutual = [[False, False], [True, False]]
    with pytest.raises(ColouringError):
        colour_classes(inside, mutual)


def test_decompose_convex_surface_single_leaf():
    pts = [(0.2, 0.2, 0.5), (0.8, 0.2, 0.5), (0.8, 0.8, 0.5), (0.2, 0.8, 0.5)]
    P, S, H, W, wrows = _with_box([(0, 1, 2, 3)], pts)
    leaves = convex_decompose(P, S, H, wrows)
    assert len(leaves) == 1 and leaves[0].P.adj == P.adj


def test_decompose_l_surface():
    polys, pts = _l_surface()
    P, S, H, W, wrows = _with_box(polys, pts)
    leaves = convex_decompose(P, S, H, wrows)
    assert len(leaves) == 2
    assert sum(volume(c.P) for c in leaves) == pytest.approx(1.0, abs=1e-15)
    # each leaf carries exactly one (convex) face of the L
    assert sorted(len(faces(c.S)) for c in leaves) == [1, 1]
    interior = 0.0
    for c in leaves:
        rows = sorted({f.label for f in faces(c.S)})
        X = clip_by_surface(c.P, H, rows)
        interior += volume(X) if X.adj else 0.0
    # the L occupies {x < 0.5} u {z < 0.5} of the unit box
    assert interior == pytest.approx(0.75, abs=1e-15)


def test_clip_by_surface_containment():
    m = meshes.cube((-1, -1, -1), (2, 2, 2))
    store = []
    P = cell_polyhedron((0, 0, 0), (1, 1, 1), store)
    base = len(store)
    store.extend(tuple(p) for p in m.vertices)
    S, planes = _surface([tuple(int(v) + base for v in f) for f in m.faces], store)
    H = signed_distances(planes, store, EPS_SN)
    X = clip_by_surface(P, H, sorted({f.label for f in faces(S)}))
    assert X.adj == P.adj


@st.composite
def zigzag(draw):
    """A height-field surface z = f(x) with random kinks across the unit box."""
    k = draw(st.integers(2, 5))
    xs = sorted(set(draw(st.lists(st.floats(0.05, 0.95), min_size=k, max_size=k))))
    zs = draw(st.lists(st.floats(0.1, 0.9), min_size=len(xs) + 2, max_size=len(xs) + 2))
    xs = [-0.1] + xs + [1.1]
    pts, polys = [], []
    for x, z in zip(xs, zs):
        pts += [(x, -0.1, z), (x, 1.1, z)]
    for i in range(len(xs) - 1):
        a, b = 2 * i, 2 * i + 2
        polys.append((a, b, b + 1, a + 1))  # facing +z
    return polys, pts, xs, zs


@given(zigzag())
def test_decompose_conservation_and_convexity(case):
    polys, pts, xs, zs = case
    P, S, H, W, wrows = _with_box(polys, pts)
    leaves = convex_decompose(P, S, H, wrows)
    assert sum(volume(c.P) for c in leaves) == pytest.approx(1.0, rel=1e-12)
    interior = 0.0
    for c in leaves:
        if not faces(c.S):
            # no surface in this leaf: wholly inside or outside, decided by the height field
            x, _, z = np.mean([c.P.points[v] for v in c.P.adj], axis=0)
            if z < np.interp(x, xs, zs):
                interior += volume(c.P)
            continue
        for cls in colouring(c.S, H):
            # colour well-definedness: pairwise mutual containment inside the class
            for a in cls:
                for b in cls:
                    rows = {f.label for f in b.faces}
                    assert all(H.cols[v][r] <= 0.0 for v in a.vertices for r in rows)
            rows = sorted({f.label for comp in cls for f in comp.faces})
            X = clip_by_surface(c.P, H, rows)
            if not X.adj:
                continue
            # interior piece is convex
            for f in faces(X):
                coords = [X.points[v] for v in f.vertices]
                n = np.array(polygon_vector_area(coords))
                if np.linalg.norm(n) < 1e-12:
                    continue
                n /= np.linalg.norm(n)
                d = (np.array([X.points[v] for v in X.adj]) - coords[0]) @ n
                assert d.max() <= 1e-12
            interior += volume(X)
    # exact area under the piecewise-linear height field, clipped to [0, 1]
    exact = 0.0
    for i in range(len(xs) - 1):
        x0, x1, z0, z1 = xs[i], xs[i + 1], zs[i], zs[i + 1]
        a, b = max(x0, 0.0), min(x1, 1.0)
        if b <= a:
            continue
        za = z0 + (z1 - z0) * (a - x0) / (x1 - x0)
        zb = z0 + (z1 - z0) * (b - x0) / (x1 - x0)
        exact += 0.5 * (za + zb) * (b - a)
    assert interior == pytest.approx(exact, rel=1e-12)


@given(st.integers(0, 10 ** 6))
def test_colouring_matches_partition_oracle(seed):
    S, H, pieces, body = meshes.nested_components(seed)
    V = [[S.points[v] for v in p] for p in pieces]
    planes = [[(np.array(H.rows[k].normal), np.array(H.rows[k].point))] for k in range(len(pieces))]
    cols = colouring(S, H)
    got = _classes(cols, pieces)
    assert sorted(i for c in got for i in c) == list(range(len(pieces)))
    expected = mutual_partition(V, planes, tol=EPS_SN)
    if expected is not None:
        assert got == expected
