import numpy as np
import pytest

from rmmfit.geometry import (INCLUSION, GeometryError, Mesh, UnitCellGeometry, build_heterogeneous_mesh,
                             build_homogeneous_mesh, periodic_pairs)


def _triangle_areas(mesh):
    p = mesh.nodes[mesh.elements[:, :3]]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _inclusion_fraction(mesh):
    a = _triangle_areas(mesh)
    return a[mesh.material == INCLUSION].sum() / a.sum()


def test_geometry_rejects_bad_ordering():
    with pytest.raises(GeometryError):
        UnitCellGeometry(1.0, 0.2, 0.3, UnitCellGeometry.swiss_cross().matrix,
                         UnitCellGeometry.swiss_cross().inclusion)


def test_inclusion_fraction_formula(geom):
    assert geom.inclusion_fraction() == pytest.approx(2 * 0.9 * 0.3 - 0.3 ** 2)
    assert geom.inclusion_fraction() == pytest.approx(0.45)


def test_single_cell_mesh(geom):
    mesh = build_heterogeneous_mesh(geom, 1, 1)
    assert mesh.family == "T2"
    assert mesh.grid == 20
    assert mesh.n_elements == 800
    assert np.all(_triangle_areas(mesh) > 0)
    assert _inclusion_fraction(mesh) == pytest.approx(0.45, abs=1e-12)


def test_two_by_two_tiling(geom):
    mesh = build_heterogeneous_mesh(geom, 2, 1)
    assert mesh.grid == 40
    assert _inclusion_fraction(mesh) == pytest.approx(0.45, abs=1e-12)
    # one inclusion region per quadrant, none crossing the quadrant lines
    c = mesh.nodes[mesh.elements[:, :3]].mean(axis=1)[mesh.material == INCLUSION]
    quadrant = (c[:, 0] > 0).astype(int) + 2 * (c[:, 1] > 0)
    counts = np.bincount(quadrant, minlength=4)
    assert counts[0] > 0 and np.all(counts == counts[0])


def _points(x):
    return {tuple(np.round(p, 12)) for p in x}


def test_refined_grid_is_nested(geom):
    coarse = build_heterogeneous_mesh(geom, 1, 1)
    fine = build_heterogeneous_mesh(geom, 1, 2)
    assert _points(coarse.nodes) < _points(fine.nodes)


def test_interface_graded_vertices_are_nested(geom):
    # midside nodes stay at straight-edge midpoints, so only vertices nest
    coarse = build_heterogeneous_mesh(geom, 1, 1, "interface")
    fine = build_heterogeneous_mesh(geom, 1, 2, "interface")
    verts = lambda m: m.nodes[np.unique(m.elements[:, :3])]  # noqa: E731
    assert _points(verts(coarse)) < _points(verts(fine))


@pytest.mark.parametrize("grading", ["uniform", "interface"])
def test_mesh_is_mirror_symmetric(geom, grading):
    mesh = build_heterogeneous_mesh(geom, 1, 2, grading)
    x = np.unique(np.round(mesh.nodes[:, 0], 12))
    np.testing.assert_allclose(x, -x[::-1], atol=1e-12)
    frac = _inclusion_fraction(mesh)
    assert frac == pytest.approx(0.45, abs=1e-12)


def test_interface_grading_refines_thin_ligament(geom):
    uni = build_heterogeneous_mesh(geom, 1, 1, "uniform")
    gr = build_heterogeneous_mesh(geom, 1, 1, "interface")
    x_u, x_g = np.unique(uni.nodes[:, 0]), np.unique(gr.nodes[:, 0])
    ligament = lambda x: np.sum(x < -0.45 + 1e-12)  # noqa: E731
    assert ligament(x_g) > ligament(x_u)


def test_bad_refine_rejected(geom):
    with pytest.raises(GeometryError):
        build_heterogeneous_mesh(geom, 1, 0)
    with pytest.raises(GeometryError):
        build_heterogeneous_mesh(geom, 1, 1, "spiral")


def test_q2_mesh_counts():
    mesh = build_homogeneous_mesh(10, "Q2")
    assert mesh.n_elements == 100
    assert mesh.n_nodes == 21 * 21 == 441


def test_q2nq2_edge_count():
    mesh = build_homogeneous_mesh(10, "Q2NQ2")
    assert len(mesh.edges) == 2 * 10 * 11 == 220
    # each interior edge shared by two elements, boundary edges by one
    counts = np.bincount(mesh.elem_edges.ravel(), minlength=len(mesh.edges))
    assert np.sum(counts == 1) == 40 and np.sum(counts == 2) == 180


def test_single_quad_faces():
    mesh = build_homogeneous_mesh(1, "Q2NQ2")
    faces = mesh.boundary_edges()
    assert sorted(faces) == ["bottom", "left", "right", "top"]
    assert all(len(v) == 1 for v in faces.values())


@pytest.mark.parametrize("grading", ["uniform", "cosine"])
def test_quad_elements_are_rectangles(grading):
    mesh = build_homogeneous_mesh(6, "Q2", 1, grading)
    x = mesh.nodes[mesh.elements]
    # midside nodes sit at the midpoints of their corner nodes
    np.testing.assert_allclose(x[:, 1], 0.5 * (x[:, 0] + x[:, 2]), atol=1e-15)
    np.testing.assert_allclose(x[:, 4], 0.5 * (x[:, 0] + x[:, 8]), atol=1e-15)


def _enumerated_pairs(mesh):
    """Slave nodes: right and top faces without corners, plus three corners."""
    corners = set(mesh.boundary["corners"].values())
    faces = [k for f in ("right", "top") for k in mesh.boundary[f] if k not in corners]
    return len(faces) + len(corners) - 1


@pytest.mark.parametrize("m", [1, 2, 5, 10, 20])
def test_periodic_pair_count(m):
    mesh = build_homogeneous_mesh(m, "Q2")
    pairs = periodic_pairs(mesh)
    side = mesh.lattice
    assert len(pairs) == _enumerated_pairs(mesh) == 2 * (side - 2) + 3
    slaves = [s for _, s in pairs]
    assert len(set(slaves)) == len(slaves)
    assert not set(slaves) & {mm for mm, _ in pairs}


def test_periodic_pairs_single_q2_cell():
    mesh = build_homogeneous_mesh(1, "Q2")
    pairs = periodic_pairs(mesh)
    corner = mesh.boundary["corners"]["bottom_left"]
    corner_pairs = [p for p in pairs if p[0] == corner]
    assert len(pairs) == 5 and len(corner_pairs) == 3


def test_periodic_pairs_heterogeneous_mesh_match(geom):
    mesh = build_heterogeneous_mesh(geom, 1, 1, "interface")
    for m, s in periodic_pairs(mesh):
        d = mesh.nodes[s] - mesh.nodes[m]
        assert np.all(np.isclose(np.abs(d), 0.0) | np.isclose(np.abs(d), 1.0))


def test_periodic_pairs_detect_trace_mismatch():
    mesh = build_homogeneous_mesh(4, "Q2")
    nodes = mesh.nodes.copy()
    right = [k for k in mesh.boundary["right"] if k not in mesh.boundary["corners"].values()]
    nodes[right[1], 1] += 1e-3
    bad = Mesh(nodes, mesh.elements, mesh.family, mesh.material, mesh.grid, mesh.edges, mesh.elem_edges,
               mesh.elem_edge_signs, mesh.boundary)
    with pytest.raises(GeometryError, match="trace"):
        periodic_pairs(bad)
