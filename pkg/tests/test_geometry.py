import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from robinlab.geometry import (
    DomainError,
    MeshError,
    boundary_traversal,
    build_domain,
    coarse_mesh,
    mesh_at_level,
    prolongation,
    read_m2d,
    refine,
    write_m2d,
)


def test_unit_square_catalog():
    d = build_domain("unit_square")
    assert d.vertices == ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))
    assert d.area == pytest.approx(1.0, abs=1e-15)


def test_lshape_catalog():
    d = build_domain("lshape")
    assert d.vertices == ((0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0))
    assert d.area == pytest.approx(3.0, abs=1e-15)


def test_rectangle_and_ngon_catalog():
    r = build_domain("rectangle(2,0.5)")
    assert r.area == pytest.approx(1.0)
    n = build_domain("regular_ngon(64,1)")
    assert n.n_sides == 64
    n2 = build_domain("regular_ngon(8, 2)")
    assert n2.area == pytest.approx(0.5 * 8 * 4 * math.sin(2 * math.pi / 8))


@pytest.mark.parametrize("verts", [
    [(0, 0), (0, 1), (1, 0)],                       # clockwise
    [(0, 0), (1, 1), (1, 0), (0, 1)],               # bowtie
    [(0, 0), (1, 0)],                               # too few
    [(0, 0), (1, 0), (2, 0)],                       # zero area
    [(0, 0), (1, 0), (1, 0), (0, 1)],               # repeated vertex
])
def test_invalid_polygons_rejected(verts):
    with pytest.raises(DomainError):
        build_domain(verts)


def test_unknown_catalog_name():
    with pytest.raises(DomainError):
        build_domain("circle")


def test_square_coarse_mesh():
    m = coarse_mesh(build_domain("unit_square"))
    assert (m.n_nodes, m.n_triangles, len(m.boundary_edges)) == (5, 4, 4)
    assert np.allclose(m.nodes[4], [0.5, 0.5])
    assert m.level == 0


def test_lshape_ear_clipping():
    # hand ear clipping of (0,0),(2,0),(2,1),(1,1),(1,2),(0,2), choosing the
    # ear with the largest minimum angle each time
    m = coarse_mesh(build_domain("lshape"))
    assert m.n_nodes == 6 and m.n_triangles == 4
    tris = sorted(tuple(sorted(t)) for t in m.triangles.tolist())
    assert tris == sorted(tuple(sorted(t)) for t in [[1, 2, 3], [0, 1, 3], [5, 0, 3], [3, 4, 5]])
    assert m.area == pytest.approx(3.0, rel=1e-12)
    assert len(m.interior_nodes) == 0


def test_ngon_area_and_perimeter():
    m = coarse_mesh(build_domain("regular_ngon(64,1)"))
    assert len(m.boundary_edges) == 64
    assert m.area == pytest.approx(32 * math.sin(2 * math.pi / 64), rel=1e-12)
    tr = boundary_traversal(m)
    assert tr.perimeter == pytest.approx(128 * math.sin(math.pi / 64), rel=1e-12)


def test_refine_counts():
    m0 = coarse_mesh(build_domain("unit_square"))
    m1 = refine(m0)
    assert (m1.n_nodes, m1.n_triangles, len(m1.boundary_edges)) == (13, 16, 8)
    assert m1.level == 1
    assert m1.h == pytest.approx(m0.h / 2, rel=1e-12)
    assert m1.area == pytest.approx(m0.area, rel=1e-12)


@pytest.mark.parametrize("name", ["unit_square", "lshape", "regular_ngon(12,1)", "rectangle(3,1)"])
def test_refine_powers_and_normals(name):
    d = build_domain(name)
    m0 = coarse_mesh(d)
    m = m0
    for k in range(1, 4):
        m = refine(m)
        assert m.n_triangles == m0.n_triangles * 4 ** k
        assert m.area == pytest.approx(d.area, rel=1e-12)
        assert np.all(m.triangle_areas() > 0)
    # outward normals: unit length, pointing away from the adjacent centroid
    assert np.allclose(np.linalg.norm(m.normals, axis=1), 1.0)
    edge_to_tri = {}
    for t, tri in enumerate(m.triangles):
        for a, b in ((0, 1), (1, 2), (2, 0)):
            edge_to_tri[(tri[a], tri[b])] = t
    for (i, j), n in zip(m.boundary_edges, m.normals):
        t = edge_to_tri[(i, j)]
        c = m.nodes[m.triangles[t]].mean(axis=0)
        mid = 0.5 * (m.nodes[i] + m.nodes[j])
        assert np.dot(n, c - mid) < 0


convex_polygons = st.lists(st.floats(0.0, 2 * math.pi, allow_nan=False), min_size=3, max_size=9,
                           unique=True).map(sorted).filter(
    lambda a: min(np.diff(a + [a[0] + 2 * math.pi])) > 0.15 and max(np.diff(a + [a[0] + 2 * math.pi])) < math.pi - 0.1)


@given(convex_polygons, st.integers(0, 2))
def test_property_random_convex_polygons(angles, levels):
    verts = [(math.cos(a), math.sin(a)) for a in angles]
    d = build_domain(verts)
    m = mesh_at_level(d, levels)
    assert m.area == pytest.approx(d.area, rel=1e-12)
    tr = boundary_traversal(m)
    assert tr.perimeter == pytest.approx(d.perimeter, rel=1e-12)
    assert np.all(np.diff(tr.node_arclength) > 0)


def test_traversal_square():
    m = mesh_at_level(build_domain("unit_square"), 0)
    tr = boundary_traversal(m)
    assert tr.perimeter == pytest.approx(4.0, abs=1e-14)
    assert tr.loops[0][0] == 0  # (0,0) is lexicographically smallest
    assert np.allclose(tr.quad_weights.sum(axis=1), tr.edge_lengths, atol=1e-14)


def test_traversal_arclength_is_edge_sum_in_order():
    m = mesh_at_level(build_domain("lshape"), 2)
    tr = boundary_traversal(m)
    assert tr.perimeter == np.cumsum(tr.edge_lengths)[-1]
    assert tr.perimeter == pytest.approx(8.0, rel=1e-12)
    s = tr.node_arclength
    assert s[0] == 0.0 and np.all(np.diff(s) > 0)
    # Gauss points sit at the right arclength along each edge
    g = 0.5 - 0.5 / math.sqrt(3)
    assert np.allclose(tr.quad_s[:, 0], tr.edge_start_s + g * tr.edge_lengths)


def test_prolongation_reproduces_linear_functions():
    m = mesh_at_level(build_domain("lshape"), 1)
    f = refine(m)
    p = prolongation(m)
    u = 2 * m.nodes[:, 0] - 3 * m.nodes[:, 1] + 1
    assert np.allclose(p @ u, 2 * f.nodes[:, 0] - 3 * f.nodes[:, 1] + 1, atol=1e-13)


def test_m2d_roundtrip(tmp_path):
    m = mesh_at_level(build_domain("lshape"), 1)
    path = tmp_path / "l.m2d"
    write_m2d(m, path)
    r = read_m2d(path)
    assert np.array_equal(r.triangles, m.triangles)
    assert np.allclose(r.nodes, m.nodes)
    assert r.area == pytest.approx(3.0, rel=1e-12)
    assert path.read_text().startswith("NODES ")


def test_m2d_rejects_bad_input(tmp_path):
    bad = tmp_path / "bad.m2d"
    bad.write_text("NODES 3\n0 0\n1 0\n0 1\nTRIANGLES 1\n0 2 1\nBOUNDARY_EDGES 3\n0 1\n1 2\n2 0\n")
    with pytest.raises(MeshError):
        read_m2d(bad)
    bad.write_text("NODES 3\n0 0\n1 0\n0 1\nTRIANGLES 1\n0 1 7\nBOUNDARY_EDGES 3\n0 1\n1 2\n2 0\n")
    with pytest.raises(MeshError):
        read_m2d(bad)


def test_angle_metadata():
    d = build_domain("lshape")
    assert d.max_angle_deviation == pytest.approx(math.pi / 2)
