import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cutcell.clip import clip_by_halfspace, clip_by_rows, edge_plane_point, propagate_distance
from cutcell.graph_core import CAP, OPEN, cell_polyhedron, components, euler_characteristic, faces, \
    from_polygons, pol, subsystem
from cutcell.halfspace import EPS, Plane, signed_distances
from cutcell.measures import area, polygon_vector_area, volume
from oracles import convex_rotation_system, halfspace_cut_volume

EPS_SN = 1e-14


def test_edge_plane_point_examples():
    x, wa, wb = edge_plane_point((0, 0, 0), (2, 4, 6), -2.0, 2.0)
    assert (wa, wb) == (0.5, 0.5) and x == (1.0, 2.0, 3.0)
    _, wa, wb = edge_plane_point((0, 0, 0), (1, 1, 1), -1.0, 3.0)
    assert (wa, wb) == (0.75, 0.25)
    xb = (0.1, 0.7, 0.3)
    x, wa, wb = edge_plane_point((0.9, 0.2, 0.5), xb, -1.0, 0.0)
    assert (wa, wb) == (0.0, 1.0) and x == xb
    with pytest.raises(ValueError):
        edge_plane_point((0, 0, 0), (1, 1, 1), 1.0, 1.0)


def test_propagate_distance_examples():
    assert propagate_distance(0.5, 0.5, -4.0, 2.0) == -1.0
    assert propagate_distance(0.0, 1.0, 0.3, 0.7) == 0.7
    assert propagate_distance(0.75, 0.25, 1.0, 1.0) == 1.0


@given(st.floats(-1e3, -1e-9), st.floats(1e-9, 1e3), st.floats(-1e3, 1e3))
def test_weights_sum_and_constant_field(ha, hb, c):
    _, wa, wb = edge_plane_point((0, 0, 0), (1, 1, 1), ha, hb)
    assert 0 <= wa <= 1 and 0 <= wb <= 1
    assert abs(wa + wb - 1.0) <= 4 * EPS
    assert propagate_distance(wa, wb, c, c) == c


def _cube_with(planes, lo=(0, 0, 0), hi=(1, 1, 1)):
    pts = []
    P = cell_polyhedron(lo, hi, pts)
    H = signed_distances(planes, pts, EPS_SN)
    return P, H


def test_half_cube_slab():
    P, H = _cube_with([Plane((0.0, 0.0, 1.0), (0.0, 0.0, 0.5))])
    r = clip_by_halfspace(P, H, 0, cap_label=9)
    Q = r.poly
    assert len(Q.adj) == 8 and len(r.created) == 4 and len(r.removed) == 4
    assert volume(Q) == 0.5
    new = [f for f in faces(Q) if f.label == 9]
    assert len(new) == 1 and len(new[0].vertices) == 4
    assert all(Q.points[v][2] == 0.5 for v in new[0].vertices)
    assert area([[Q.points[v] for v in new[0].vertices]]) == 1.0
    # new face is counter-clockwise from outside (normal +z)
    assert polygon_vector_area([Q.points[v] for v in new[0].vertices])[2] > 0


def test_clip_input_not_modified():
    P, H = _cube_with([Plane((0.0, 0.0, 1.0), (0.0, 0.0, 0.5))])
    before = {v: list(n) for v, n in P.adj.items()}
    clip_by_halfspace(P, H, 0)
    assert P.adj == before


def test_clip_all_inside_or_outside():
    P, H = _cube_with([Plane((0.0, 0.0, 1.0), (0.0, 0.0, 5.0)), Plane((0.0, 0.0, 1.0), (0.0, 0.0, -5.0))])
    assert clip_by_halfspace(P, H, 0).poly.adj == P.adj
    r = clip_by_halfspace(P, H, 1)
    assert r.empty and sorted(r.removed) == list(range(8))


def test_open_clip_on_cube_face_plane():
    # plane z = 1 contains the top face: open membership drops those vertices,
    # the created vertices land on them bitwise and the volume does not change
    P, H = _cube_with([Plane((0.0, 0.0, 1.0), (0.0, 0.0, 1.0))])
    r = clip_by_halfspace(P, H, 0, closed=False, cap_label=7)
    top = {P.points[v] for v in range(8) if P.points[v][2] == 1.0}
    created = {r.poly.points[v] for v in r.created}
    assert len(r.created) == 4 and created == top
    assert volume(r.poly) == 1.0
    closed = clip_by_halfspace(P, H, 0, closed=True)
    assert closed.poly.adj == P.adj and not closed.created


def test_clip_surface_with_open_vertex():
    # a square patch in z = 0 split by x < 0.5: edges to OPEN are never cut
    pts = [(0.0, 0, 0), (1.0, 0, 0), (1.0, 1, 0), (0.0, 1, 0)]
    S = pol(from_polygons([(0, 1, 2), (0, 2, 3)], [0, 1], pts))
    H = signed_distances([Plane((1.0, 0.0, 0.0), (0.5, 0.0, 0.0))], pts, EPS_SN)
    r = clip_by_halfspace(S, H, 0)
    Q = r.poly
    assert Q.is_open_surface
    # cuts of boundary edges get the open vertex, the cut of the diagonal does not
    for v in r.created:
        on_boundary = Q.points[v][1] in (0.0, 1.0)
        assert (OPEN in Q.adj[v]) == on_boundary
    fs = faces(Q)
    assert sorted(f.label for f in fs) == [0, 1]
    assert area([[Q.points[v] for v in f.vertices] for f in fs]) == pytest.approx(0.5, abs=1e-15)


def test_created_rows_exact_zero_and_convex_combination():
    planes = [Plane((0.0, 0.0, 1.0), (0.0, 0.0, 0.3)), Plane((1.0, 0.0, 0.0), (0.25, 0.0, 0.0)),
              Plane((0.0, 0.0, 1.0), (0.0, 0.0, 0.3))]
    P, H = _cube_with(planes)
    r = clip_by_halfspace(P, H, 0)
    for v in r.created:
        c = H.cols[v]
        assert c[0] == 0.0 and c[2] == 0.0  # row 2 equals row 0
        a = r.poly.adj[v][0]
        # x distance is the interpolation of the parents' (constant along z edges)
        assert c[1] == H.cols[a][1]


def test_clip_by_rows_fold():
    planes = [Plane((1.0, 0.0, 0.0), (0.5, 0.0, 0.0)), Plane((0.0, 1.0, 0.0), (0.0, 0.5, 0.0)),
              Plane((0.0, 0.0, -1.0), (0.0, 0.0, 0.5))]
    P, H = _cube_with(planes)
    # (2, -1) keeps z <= 0.5; caps carry their row ids
    Q = clip_by_rows(P, H, [0, 1, (2, -1)], cap_labels=[10, 11, 12])
    assert volume(Q) == 0.125
    assert sorted(f.label for f in faces(Q)) == [0, 2, 4, 10, 11, 12]


@st.composite
def convex_and_plane(draw):
    seed = draw(st.integers(0, 2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 25))
    pts = rng.normal(size=(n, 3)) * rng.uniform(0.2, 3.0, 3) + rng.uniform(-3, 3, 3)
    normal = rng.normal(size=3)
    normal /= np.linalg.norm(normal)
    # plane through a random point of the hull's box
    q = pts.min(axis=0) + rng.uniform(0, 1, 3) * np.ptp(pts, axis=0)
    return pts, normal, q


def _clip_pair(pts, normal, q):
    P, fplanes = convex_rotation_system(pts)
    plane = Plane(tuple(normal), tuple(q), "S")
    H = signed_distances(fplanes + [plane], P.points, EPS_SN)
    row = len(fplanes)
    inside = clip_by_halfspace(P, H, row, closed=False, sign=1, cap_label=row).poly
    outside = clip_by_halfspace(P, H, row, closed=True, sign=-1, cap_label=row).poly
    return P, H, row, inside, outside


@given(convex_and_plane())
def test_volume_additivity_and_oracle(case):
    pts, normal, q = case
    P, H, row, inside, outside = _clip_pair(pts, normal, q)
    v = volume(P)
    vin = volume(inside) if inside.adj else 0.0
    vout = volume(outside) if outside.adj else 0.0
    assert abs(vin + vout - v) <= 1e-12 * v
    assert vin == pytest.approx(halfspace_cut_volume(pts, normal, float(np.dot(normal, q))),
                                rel=1e-9, abs=1e-12 * v)


@given(convex_and_plane())
def test_clip_combinatorics_and_membership(case):
    pts, normal, q = case
    P, H, row, inside, outside = _clip_pair(pts, normal, q)
    for Q, sign in ((inside, 1), (outside, -1)):
        if not Q.adj:
            continue
        for comp in components(Q):
            assert euler_characteristic(subsystem(Q, comp)) == 2
        fs = faces(Q)
        used = sorted((f.vertices[k], f.vertices[(k + 1) % len(f.vertices)])
                      for f in fs for k in range(len(f.vertices)))
        assert used == sorted(Q.directed_edges())
        for v in Q.adj:
            assert sign * H.cols[v][row] <= 0.0
        # quasi-convexity against every face plane of the result
        eps_hs = 1000 * EPS * float(np.max(np.ptp(pts, axis=0)))
        for f in fs:
            coords = [Q.points[u] for u in f.vertices]
            n = np.array(polygon_vector_area(coords))
            nn = np.linalg.norm(n)
            if nn < 1e-9:
                continue
            n /= nn
            d = (np.array([Q.points[u] for u in Q.adj]) - coords[0]) @ n
            assert d.max() <= 10 * eps_hs


def test_cap_label_default_for_surfaces():
    pts = [(0.0, 0, 0), (1.0, 0, 0), (0.0, 1, 0)]
    S = pol(from_polygons([(0, 1, 2)], [0], pts))
    H = signed_distances([Plane((1.0, 0.0, 0.0), (0.5, 0.0, 0.0))], pts, EPS_SN)
    Q = clip_by_rows(S, H, [0])
    assert all(lab in (0, CAP) for labs in Q.lab.values() for lab in labs)
