import io

import numpy as np
import pytest
import scipy.sparse as sp

from eitcem.analysis import NormMatrices, norms
from eitcem.errors import ConfigurationError, StructuralError
from eitcem.mesh import (Mesh, build_regular_polygon_mesh, prolongation, read_mesh,
                         refine_boundary_layer, refine_levels, refine_uniform,
                         validate_mesh, write_mesh)


def edge_lengths(mesh):
    e = mesh.edges()
    return np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1)


def test_hexadecagon_fan_counts():
    m = build_regular_polygon_mesh(16, 8)
    assert (m.n_vertices, m.n_triangles, len(m.boundary_edges)) == (17, 16, 16)
    assert m.n_electrodes == 8
    for k in range(1, 9):
        assert len(m.electrode_edges(k)) == 1
    assert m.n_vertices - len(m.edges()) + m.n_triangles == 1
    assert np.allclose(np.linalg.norm(m.vertices[1:], axis=1), 1.0)


def test_square_fan_by_hand():
    m = build_regular_polygon_mesh(4, 2)
    assert (m.n_vertices, m.n_triangles) == (5, 4)
    # corners at angles 0, 90, 180, 270 degrees; electrodes on edges 0 and 2
    assert m.boundary_tags.tolist() == [1, 0, 2, 0]
    e1 = m.vertices[m.electrode_edges(1)[0]]
    e2 = m.vertices[m.electrode_edges(2)[0]]
    assert np.allclose(e1.mean(axis=0), -e2.mean(axis=0))


def test_electrode_one_has_smallest_positive_midpoint_angle():
    m = build_regular_polygon_mesh(16, 8)
    mids = m.vertices[m.boundary_edges].mean(axis=1)
    ang = np.mod(np.arctan2(mids[:, 1], mids[:, 0]), 2 * np.pi)
    assert m.boundary_tags[np.argmin(ang)] == 1


@pytest.mark.parametrize("n_sides, M", [(16, 3), (12, 8), (16, 1)])
def test_bad_configuration(n_sides, M):
    with pytest.raises(ConfigurationError):
        build_regular_polygon_mesh(n_sides, M)


def test_refine_uniform_counts(hexadecagon_levels):
    m0, m1 = hexadecagon_levels[:2]
    assert m1.n_triangles == 64
    # V = 1 + E - F with E = (3F + B) / 2 = 112
    assert m1.n_vertices == 49
    assert m1.level == 1 and m1.parent is m0


def test_refine_uniform_halves_edges(hexadecagon_levels):
    for coarse, fine in zip(hexadecagon_levels, hexadecagon_levels[1:]):
        assert fine.n_triangles == 4 * coarse.n_triangles
        assert fine.mesh_size() == pytest.approx(coarse.mesh_size() / 2, rel=1e-14)
        assert np.array_equal(fine.vertices[: coarse.n_vertices], coarse.vertices)
        # every fine edge is half of some coarse edge
        coarse_half = np.unique(np.round(edge_lengths(coarse) / 2, 12))
        assert np.isin(np.round(edge_lengths(fine), 12), coarse_half).all()


def test_tag_inheritance(hexadecagon_levels):
    m1 = hexadecagon_levels[1]
    edges = m1.electrode_edges(1)
    assert len(edges) == 2
    assert len(np.intersect1d(edges[0], edges[1])) == 1


@pytest.mark.parametrize("level", range(4))
def test_electrodes_are_disjoint_polylines(hexadecagon_levels, level):
    m = hexadecagon_levels[level]
    validate_mesh(m)
    seen = set()
    for k in range(1, 9):
        verts = set(m.electrode_vertices(k).tolist())
        assert not verts & seen
        seen |= verts
        assert len(verts) == len(m.electrode_edges(k)) + 1


@pytest.mark.parametrize("level", range(4))
def test_rotational_symmetry(hexadecagon_levels, level):
    m = hexadecagon_levels[level]
    c, s = np.cos(np.pi / 4), np.sin(np.pi / 4)
    rot = m.vertices @ np.array([[c, s], [-s, c]])
    d = np.linalg.norm(rot[:, None, :] - m.vertices[None, :, :], axis=2)
    assert d.min(axis=1).max() < 1e-12
    perm = d.argmin(axis=1)
    tri_set = {tuple(sorted(t)) for t in m.triangles.tolist()}
    assert {tuple(sorted(perm[t])) for t in m.triangles.tolist()} == tri_set


def test_boundary_layer_identity_and_first_round(hexadecagon_levels):
    m0 = hexadecagon_levels[0]
    assert refine_boundary_layer(m0, 0) is m0
    once = refine_boundary_layer(m0, 1)
    uni = hexadecagon_levels[1]
    assert (once.n_vertices, once.n_triangles) == (uni.n_vertices, uni.n_triangles)
    got = {tuple(sorted(map(tuple, np.round(once.vertices[t], 12)))) for t in once.triangles}
    want = {tuple(sorted(map(tuple, np.round(uni.vertices[t], 12)))) for t in uni.triangles}
    assert got == want


def test_graded_mesh_sizes(hexadecagon_levels):
    g = refine_boundary_layer(hexadecagon_levels[4], 4)
    validate_mesh(g)
    h_int, h_bnd = g.mesh_size("interior"), g.mesh_size("boundary")
    assert h_int / h_bnd == pytest.approx(16, rel=1e-9)
    # reported mesh parameters: 0.079 away from the boundary, 0.005 near it
    assert 0.05 < h_int < 0.1
    assert 0.003 < h_bnd < 0.007


def test_graded_mesh_keeps_symmetry(hexadecagon_levels):
    g = refine_boundary_layer(hexadecagon_levels[2], 2)
    c, s = np.cos(np.pi / 4), np.sin(np.pi / 4)
    rot = np.round(g.vertices @ np.array([[c, s], [-s, c]]), 10)
    pts = {tuple(v) for v in np.round(g.vertices, 10)}
    assert all(tuple(v) in pts for v in rot)


def test_prolongation_identity_and_constants(hexadecagon_levels):
    m0, m1, m2 = hexadecagon_levels[:3]
    P = prolongation(m1, m1)
    assert (P != sp.identity(m1.n_vertices)).nnz == 0
    P = prolongation(m0, m2)
    assert P.shape == (m2.n_vertices, m0.n_vertices)
    assert np.allclose(P @ np.ones(m0.n_vertices), 1.0, atol=1e-15)


def test_prolongation_reproduces_linear_functions(hexadecagon_levels):
    m0, m3 = hexadecagon_levels[0], hexadecagon_levels[3]
    f = lambda p: 2.0 * p[:, 0] - 0.5 * p[:, 1] + 0.3
    assert np.allclose(prolongation(m0, m3) @ f(m0.vertices), f(m3.vertices), atol=1e-14)


def test_prolongation_preserves_h1_norm(hexadecagon_levels, rng):
    m1, m3 = hexadecagon_levels[1], hexadecagon_levels[3]
    u = rng.standard_normal(m1.n_vertices)
    n_c = norms(NormMatrices.for_mesh(m1), u)
    n_f = norms(NormMatrices.for_mesh(m3), prolongation(m1, m3) @ u)
    assert n_f.h1 == pytest.approx(n_c.h1, rel=1e-12)
    assert n_f.l2 == pytest.approx(n_c.l2, rel=1e-12)


def test_prolongation_rejects_unrelated(hexadecagon_levels):
    with pytest.raises(StructuralError):  # graded meshes carry no genealogy
        prolongation(hexadecagon_levels[0], refine_boundary_layer(hexadecagon_levels[1], 1))
    with pytest.raises(StructuralError):  # same geometry, different family
        prolongation(hexadecagon_levels[0], refine_uniform(build_regular_polygon_mesh(16, 8)))


def test_invalid_meshes_rejected():
    v = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(StructuralError):  # clockwise
        validate_mesh(Mesh(v, np.array([[0, 2, 1]]), np.array([[0, 1], [1, 2], [2, 0]]),
                           np.array([1, 0, 2])))
    with pytest.raises(StructuralError):  # electrodes 1 and 2 share vertex 1
        validate_mesh(Mesh(v, np.array([[0, 1, 2]]), np.array([[0, 1], [1, 2], [2, 0]]),
                           np.array([1, 2, 0])))


def test_text_round_trip(hexadecagon_levels):
    m = refine_boundary_layer(hexadecagon_levels[1], 1)
    buf = io.StringIO()
    write_mesh(m, buf)
    text = buf.getvalue()
    assert text.splitlines()[0] == f"{m.n_vertices} {m.n_triangles} {len(m.boundary_edges)}"
    back = read_mesh(io.StringIO(text))
    assert np.array_equal(back.vertices, m.vertices)
    assert np.array_equal(back.triangles, m.triangles)
    assert np.array_equal(back.boundary_tags, m.boundary_tags)
    buf2 = io.StringIO()
    write_mesh(back, buf2)
    assert buf2.getvalue() == text
