import numpy as np
import pytest

from momscat.mesh import (
    MeshError,
    TriangleMesh,
    generate_canonical,
    generate_sphere,
    load_mesh,
    mesh_stats,
)

TET_OFF = """OFF
4 4 6
0 0 0
1 0 0
0 1 0
0 0 1
3 0 2 1
3 0 1 3
3 0 3 2
3 1 2 3
"""

NONMANIFOLD_OFF = """OFF
5 5 9
0 0 0
1 0 0
0 1 0
0 0 1
0 0 -1
3 0 2 1
3 0 1 3
3 0 3 2
3 1 2 3
3 0 1 4
"""

TET_MSH = """$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
4
1 0 0 0
2 1 0 0
3 0 1 0
4 0 0 1
$EndNodes
$Elements
4
1 2 2 0 1 1 3 2
2 2 2 0 1 1 2 4
3 2 2 0 1 1 4 3
4 2 2 0 1 2 3 4
$EndElements
"""


def test_load_off_tetrahedron(tmp_path):
    path = tmp_path / "tet.off"
    path.write_text(TET_OFF)
    mesh = load_mesh(path)
    assert mesh.n_triangles == 4
    assert mesh.n_edges == 6
    assert mesh.signed_volume() == pytest.approx(1.0 / 6.0, rel=1e-12)


def test_load_gmsh_tetrahedron(tmp_path):
    path = tmp_path / "tet.msh"
    path.write_text(TET_MSH)
    mesh = load_mesh(path, fmt="gmsh-ascii")
    assert mesh.n_triangles == 4
    assert mesh.n_edges == 6


def test_nonmanifold_edge_rejected(tmp_path):
    path = tmp_path / "bad.off"
    path.write_text(NONMANIFOLD_OFF)
    with pytest.raises(MeshError, match="non-manifold|open"):
        load_mesh(path)


def test_parse_failure(tmp_path):
    path = tmp_path / "junk.off"
    path.write_text("OFF\n4 4\n")
    with pytest.raises(MeshError, match="parse"):
        load_mesh(path)


def test_unknown_format(tmp_path):
    path = tmp_path / "mesh.xyz"
    path.write_text("")
    with pytest.raises(MeshError, match="format"):
        load_mesh(path)


def test_orientation_repair_mixed_winding(tmp_path):
    # scramble winding of two faces; loader must restore outward orientation
    scrambled = TET_OFF.replace("3 0 2 1", "3 0 1 2").replace("3 1 2 3", "3 1 3 2")
    path = tmp_path / "scrambled.off"
    path.write_text(scrambled)
    mesh = load_mesh(path)
    assert mesh.signed_volume() == pytest.approx(1.0 / 6.0, rel=1e-12)


def test_degenerate_triangle_rejected():
    verts = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 0, 1.0]])
    tris = np.array([[0, 1, 2], [0, 2, 1], [0, 1, 3], [1, 2, 3]])
    with pytest.raises(MeshError):
        TriangleMesh(verts, tris)


def test_cube_counts_and_volume():
    cube = generate_canonical("cube", {"side": 1.0}, 2.0)
    assert cube.n_triangles == 12
    assert cube.n_edges == 18
    assert cube.signed_volume() == pytest.approx(1.0, rel=1e-12)
    stats = mesh_stats(cube)
    assert stats.total_area == pytest.approx(6.0, rel=1e-12)


def test_every_edge_has_two_triangles(sphere_n2, cube_coarse):
    for mesh in (sphere_n2, cube_coarse):
        assert mesh.edge_triangles.shape == (mesh.n_edges, 2)
        assert mesh.n_edges == 3 * mesh.n_triangles // 2
        assert mesh.signed_volume() > 0.0


def test_icosphere_radius_invariant():
    mesh = generate_sphere(1.0, 0.35)
    radii = np.linalg.norm(mesh.vertices, axis=1)
    assert np.abs(radii - 0.5).max() < 1e-12
    # inscribed polyhedron: area below the sphere area
    assert mesh_stats(mesh).total_area < np.pi


def test_icosahedron_stats():
    mesh = generate_sphere(1.0, 0.6)  # icosahedron level
    stats = mesh_stats(mesh)
    assert stats.triangle_count == 20
    assert stats.edge_count == 30
    assert stats.mean_edge_length <= stats.max_edge_length


def test_sphere_target_edge_honored():
    mesh = generate_sphere(1.0, 0.107)
    stats = mesh_stats(mesh)
    assert stats.mean_edge_length <= 0.107
    # lambda/14-class mesh of the 200 MHz study
    lam = 299792458.0 / 200e6
    assert 12.0 <= lam / stats.mean_edge_length <= 16.0


def test_sphere_triangle_cap():
    with pytest.raises(ValueError, match="cap"):
        generate_sphere(1.0, 0.001, max_triangles=1000)


def test_sphere_preconditions():
    with pytest.raises(ValueError):
        generate_sphere(-1.0, 0.1)
    with pytest.raises(ValueError):
        generate_sphere(1.0, 2.0)


@pytest.mark.parametrize(
    "shape,dims,area",
    [
        ("cube", {"side": 1.0}, 6.0),
        ("pyramid", {"base": 0.6, "height": 0.6}, None),
        ("wedge", {"length": 1.0, "base": 0.2, "height": 0.3}, None),
    ],
)
def test_canonical_refinement_area_invariant(shape, dims, area):
    coarse = generate_canonical(shape, dims, 1.0)
    fine = generate_canonical(shape, dims, 0.12)
    a0 = mesh_stats(coarse).total_area
    a1 = mesh_stats(fine).total_area
    assert a1 == pytest.approx(a0, rel=1e-12)
    if area is not None:
        assert a0 == pytest.approx(area, rel=1e-12)


def test_pyramid_refinement_quadruples_triangles():
    coarse = generate_canonical("pyramid", {"base": 0.6, "height": 0.6}, 0.3)
    fine = generate_canonical("pyramid", {"base": 0.6, "height": 0.6}, 0.15)
    assert fine.n_triangles == 4 * coarse.n_triangles


def test_wedge_grading_keeps_mesh_closed():
    mesh = generate_canonical(
        "wedge", {"length": 1.1, "base": 0.1, "height": 0.3, "grading": 0.1}, 0.28
    )
    assert mesh.n_edges == 3 * mesh.n_triangles // 2
    assert mesh.signed_volume() > 0.0


def test_unknown_shape_rejected():
    with pytest.raises(ValueError, match="shape"):
        generate_canonical("torus", {"side": 1.0}, 0.2)


def test_mesh_immutable(sphere_n2):
    with pytest.raises(ValueError):
        sphere_n2.vertices[0, 0] = 7.0
