import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import meshes
from cutcell.halfspace import Tolerances
from cutcell.global_cut import cut_mesh
from cutcell.mesh_io import (CartesianGrid, MeshError, StlParseError, TriangleSoup, background_grid,
                             export_vtk, parse_stl, perturb, read_stl, stl_bytes, weld, write_stl)


# --- parsing -----------------------------------------------------------------

def test_binary_cube_12_records():
    data = stl_bytes(meshes.cube_triangles())
    assert len(data) == 80 + 4 + 12 * 50
    soup = parse_stl(data)
    assert len(soup) == 12
    assert soup.binary
    np.testing.assert_array_equal(soup.triangles, meshes.cube_triangles())


def test_ascii_single_facet():
    text = b"""solid one
  facet normal 0 0 1
    outer loop
      vertex 0 0 0
      vertex 1 0 0
      vertex 0 1 0
    endloop
  endfacet
endsolid one
"""
    soup = parse_stl(text)
    assert len(soup) == 1
    assert not soup.binary
    np.testing.assert_array_equal(soup.triangles[0], [[0, 0, 0], [1, 0, 0], [0, 1, 0]])
    assert soup.header == "one"


def test_header_only_is_truncated():
    with pytest.raises(StlParseError, match="truncated"):
        parse_stl(b"\0" * 80)


def test_truncated_record_names_offset():
    data = stl_bytes(meshes.cube_triangles())[:-10]
    with pytest.raises(StlParseError, match=r"byte offset 634"):
        parse_stl(data)


def test_count_mismatch():
    data = stl_bytes(meshes.cube_triangles()) + b"\0" * 50
    with pytest.raises(StlParseError, match="count mismatch"):
        parse_stl(data)


def test_empty_input():
    with pytest.raises(StlParseError):
        parse_stl(b"")


def test_binary_with_solid_header():
    # some exporters write "solid" into a binary header
    data = stl_bytes(meshes.cube_triangles(), header="solid cube")
    assert len(parse_stl(data)) == 12


def test_ascii_roundtrip_exact(tmp_path):
    tris = meshes.icosphere(1).triangles()
    write_stl(tmp_path / "s.stl", tris, binary=False)
    soup = read_stl(tmp_path / "s.stl")
    np.testing.assert_array_equal(soup.triangles, tris)


def test_stored_normals_ignored():
    tris = meshes.cube_triangles()
    data = bytearray(stl_bytes(tris))
    # overwrite every stored normal with garbage
    for k in range(12):
        off = 84 + 50 * k
        data[off:off + 12] = np.array([9, 9, 9], "<f4").tobytes()
    m = weld(parse_stl(bytes(data)))
    assert m.volume() == 1.0


# --- welding -----------------------------------------------------------------

def test_weld_cube_counts():
    m = meshes.cube()
    assert (len(m.vertices), len(m.faces), len(m.edges)) == (8, 12, 18)
    assert m.area() == 6.0 and m.volume() == 1.0


def test_weld_tetrahedron():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], float)
    m = meshes.from_indexed(v, [(0, 2, 1), (0, 1, 3), (0, 3, 2), (1, 2, 3)])
    assert (len(m.vertices), len(m.edges)) == (4, 6)
    assert m.volume() == pytest.approx(1 / 6)


def test_weld_open_surface():
    tris = [[[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[1, 0, 0], [1, 1, 0], [0, 1, 0]]]
    with pytest.raises(MeshError, match="not closed/manifold"):
        weld(meshes.soup(tris))


def _raw_soup(t):
    return TriangleSoup(np.asarray(t, float), np.zeros((len(t), 3)))


def test_weld_non_orientable():
    # flip a single triangle: its edges run in the same direction as its neighbours'
    bad = meshes.cube_triangles().copy()
    bad[0] = bad[0][::-1].copy()
    with pytest.raises(MeshError) as e:
        weld(_raw_soup(bad))
    assert e.value.kind == "non-orientable"


def test_weld_degenerate_face():
    t = meshes.cube_triangles().copy()
    t[0, 2] = 0.5 * (t[0, 0] + t[0, 1])  # collinear corners
    with pytest.raises(MeshError) as e:
        weld(_raw_soup(t))
    assert e.value.kind in ("degenerate", "non-manifold")


def test_weld_tolerance_merges_near_corners():
    t = meshes.cube_triangles().copy()
    t[5, 1] += 1e-12
    with pytest.raises(MeshError):
        weld(_raw_soup(t))
    m = weld(_raw_soup(t), eps_weld=1e-9)
    assert len(m.vertices) == 8 and len(m.faces) == 12


def test_weld_preserves_area():
    m = meshes.icosphere(2, bumps=0.1)
    soup = meshes.soup(m.triangles())
    assert abs(weld(soup).area() - soup.area()) <= 1e-12 * soup.area()


def test_faces_consistently_oriented():
    m = meshes.torus()
    d = set()
    for f in m.faces:
        for k in range(3):
            d.add((f[k], f[(k + 1) % 3]))
    assert all((b, a) in d for a, b in d)
    assert len(d) == 2 * len(m.edges)


# --- grid --------------------------------------------------------------------

def test_grid_unit_cube_defaults():
    g = background_grid((0, 0, 0), (1, 1, 1))
    assert g.h == pytest.approx(0.014, abs=1e-15)
    assert g.origin == pytest.approx((-0.2, -0.2, -0.2), abs=1e-15)
    assert g.dims == (100, 100, 100)


def test_grid_model_252119():
    g = background_grid((0, 0, 0), (65.06, 37.371, 111.76))
    assert g.h == pytest.approx(1.4 * 1.1176, rel=1e-14)
    assert g.h == pytest.approx(1.564640, abs=5e-7)


def test_grid_single_cell():
    g = background_grid((0, 0, 0), (2, 2, 2), n_max=1, n_min=1, scale=1.0)
    assert g.h == 2.0 and g.dims == (1, 1, 1) and g.origin == (0.0, 0.0, 0.0)


def test_grid_cube_112():
    g = background_grid((0, 0, 0), (1, 1, 1), n_max=112)
    assert g.h == 1.4 / 112 and g.dims == (112, 112, 112)


def test_grid_degenerate_bbox():
    with pytest.raises(ValueError, match="degenerate"):
        background_grid((0, 0, 0), (1, 0, 1))


@given(st.lists(st.floats(0.01, 100), min_size=3, max_size=3),
       st.integers(1, 60), st.integers(1, 60), st.floats(1.0, 2.0))
def test_grid_covers_bbox(ext, a, b, scale):
    n_max, n_min = max(a, b), min(a, b)
    lo = np.array([-1.0, 2.0, 0.5])
    hi = lo + np.array(ext)
    g = background_grid(lo, hi, n_max, n_min, scale)
    o = np.array(g.origin)
    top = o + np.array(g.dims) * g.h
    assert np.all(o <= lo + 1e-12 * np.abs(lo))
    assert np.all(top >= hi - 1e-9 * np.array(ext))


# --- perturbation ------------------------------------------------------------

def test_translate_alpha_1():
    g = background_grid((0, 0, 0), (1, 1, 1), n_max=10)
    p = perturb(g, "translate", 1)
    np.testing.assert_allclose(p.effective_origin, np.array(g.origin) + 0.1 * g.extent, rtol=0,
                               atol=1e-15)
    assert p.rotation is None


def test_translate_alpha_17_negligible():
    g = background_grid((0, 0, 0), (1, 1, 1), n_max=10)
    p = perturb(g, "translate", 17)
    assert np.allclose(p.effective_origin, g.origin, rtol=0, atol=1e-16)


def test_rotate_alpha_17_identity():
    g = background_grid((0, 0, 0), (1, 1, 1), n_max=10)
    p = perturb(g, "rotate", 17, center=(0.5, 0.5, 0.5))
    assert np.max(np.abs(p.rotation_matrix() - np.eye(3))) <= np.finfo(float).eps


def test_rotate_is_rigid_about_center():
    g = background_grid((0, 0, 0), (1, 1, 1), n_max=10)
    c = (0.5, 0.5, 0.5)
    p = perturb(g, "rotate", 2, center=c)
    R = p.rotation_matrix()
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-15)
    assert np.linalg.det(R) == pytest.approx(1.0)
    np.testing.assert_array_equal(p.to_world(np.array([c]))[0], c)


@given(st.integers(1, 17))
def test_translate_back_and_forth_bitwise(alpha):
    g = background_grid((0.1, -2, 3), (1.3, 0.4, 7), n_max=20)
    p = perturb(perturb(g, "translate", alpha), "translate", alpha, direction=-1)
    assert p.effective_origin == g.effective_origin


def test_perturb_bad_args():
    g = background_grid((0, 0, 0), (1, 1, 1), n_max=10)
    with pytest.raises(ValueError):
        perturb(g, "translate", 0)
    with pytest.raises(ValueError):
        perturb(g, "rotate", 3)
    with pytest.raises(ValueError):
        perturb(g, "shear", 3)


def test_locate_roundtrip():
    g = perturb(background_grid((0, 0, 0), (1, 1, 1), n_max=10), "rotate", 3, center=(0.5,) * 3)
    pts = np.array([[0.5, 0.5, 0.5], [0.01, 0.9, 0.3], [5.0, 0, 0]])
    idx = g.locate(pts)
    assert tuple(idx[2]) == (-1, -1, -1)
    for p, ijk in zip(pts[:2], idx[:2]):
        lo = np.array(g.effective_origin) + ijk * g.h
        local = g.to_local(p[None])[0]
        assert np.all(local >= lo) and np.all(local <= lo + g.h)


# --- export ------------------------------------------------------------------

def _single_cell_cube_cut():
    m = meshes.cube()
    g = background_grid(*m.bbox, n_max=1, n_min=1)
    return cut_mesh(g, m, Tolerances.from_mesh(m), keep_geometry=True)


def test_export_single_cell_cube_six_tets(tmp_path):
    meshio = pytest.importorskip("meshio")
    cm = _single_cell_cube_cut()
    vol, bnd = export_vtk(cm, tmp_path)
    mv = meshio.read(vol)
    assert len(mv.cells_dict["tetra"]) == 6
    pts = mv.points[mv.cells_dict["tetra"]]
    v = np.einsum("ij,ij->i", pts[:, 1] - pts[:, 0],
                  np.cross(pts[:, 2] - pts[:, 0], pts[:, 3] - pts[:, 0])) / 6
    assert math.fsum(v) == pytest.approx(1.0, abs=1e-15)
    mb = meshio.read(bnd)
    polys = [c for c in mb.cells if c.type in ("polygon", "quad", "triangle")]
    assert sum(len(c.data) for c in polys) == 12
    # meshio drops polygon cell data; read the field from the file itself
    lines = bnd.read_text().splitlines()
    k = lines.index("SCALARS stl_face int 1")
    assert sorted(int(x) for x in lines[k + 2:k + 14]) == list(range(12))


def test_export_roundtrip_values(tmp_path):
    meshio = pytest.importorskip("meshio")
    m = meshes.icosphere(1)
    g = background_grid(*m.bbox, n_max=4, n_min=4)
    cm = cut_mesh(g, m, Tolerances.from_mesh(m), keep_geometry=True)
    vol, bnd = export_vtk(cm, tmp_path, "sphere")
    mv = meshio.read(vol)
    pts = mv.points[mv.cells_dict["tetra"]]
    v = np.einsum("ij,ij->i", pts[:, 1] - pts[:, 0],
                  np.cross(pts[:, 2] - pts[:, 0], pts[:, 3] - pts[:, 0])) / 6
    assert math.fsum(v) == pytest.approx(m.volume(), rel=1e-13)
    states = np.concatenate(mv.cell_data["state"]).ravel()
    assert set(states.tolist()) <= {1, 2}


def test_export_without_geometry(tmp_path):
    m = meshes.cube()
    g = background_grid(*m.bbox, n_max=2, n_min=2)
    cm = cut_mesh(g, m, Tolerances.from_mesh(m))
    with pytest.raises(ValueError, match="without geometry"):
        export_vtk(cm, tmp_path)


def test_export_empty_cut(tmp_path):
    m = meshes.cube()
    g = CartesianGrid((5.0, 5.0, 5.0), 0.5, (2, 2, 2))
    cm = cut_mesh(g, m, Tolerances.from_mesh(m), keep_geometry=True)
    with pytest.raises(ValueError, match="no active cells"):
        export_vtk(cm, tmp_path)
