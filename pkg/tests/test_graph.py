import numpy as np
import pytest

from conftest import small_params
from surfseg.graph import (Column, GraphError, GraphParams, assemble_graph,
                           build_elf_columns, straight_column_graph)
from surfseg.mesh import TriangleMesh, icosphere


def sphere_mesh(radius=10.0, center=(0.0, 0.0, 0.0), subdivisions=2):
    v, f = icosphere(subdivisions)
    return TriangleMesh(vertices=v * radius + np.asarray(center), faces=f)


def test_params_presets():
    g = GraphParams.gradient_preset()
    assert (g.smoothness, g.inter_surface_max, g.inter_object_max,
            g.column_size, g.node_spacing) == (2, 20, 60, 61, 0.20)
    le = GraphParams.learned_preset()
    assert (le.smoothness, le.inter_surface_max, le.inter_object_max,
            le.column_size, le.node_spacing) == (4, 40, 120, 121, 0.15)
    assert g.anchor == 61 // 3
    assert le.anchor == 121 // 3


def test_params_validation():
    with pytest.raises(GraphError):
        GraphParams(smoothness=-1, inter_surface_max=1, inter_object_max=1,
                    column_size=5, node_spacing=0.2)
    with pytest.raises(GraphError):
        GraphParams(smoothness=1, inter_surface_max=6, inter_object_max=1,
                    column_size=5, node_spacing=0.2)
    with pytest.raises(GraphError):
        GraphParams(smoothness=1, inter_surface_max=1, inter_object_max=1,
                    column_size=5, node_spacing=0.0)


def test_elf_columns_radial_on_sphere():
    # unit charges uniformly covering a sphere produce a radial external
    # field, so traced columns must be radial lines through each vertex
    params = small_params(column_size=9)
    mesh = sphere_mesh(radius=10.0, center=(3.0, -2.0, 5.0), subdivisions=3)
    cols = build_elf_columns(mesh, params)
    assert len(cols) == len(mesh.vertices)
    center = np.array([3.0, -2.0, 5.0])
    worst_angle = 0.0
    for c in cols:
        assert np.allclose(c.nodes[params.anchor], mesh.vertices[c.vertex_id],
                           atol=1e-9)
        steps = np.diff(c.nodes, axis=0)
        lens = np.linalg.norm(steps, axis=1)
        assert np.allclose(lens, params.node_spacing, atol=1e-9)
        radial = mesh.vertices[c.vertex_id] - center
        radial /= np.linalg.norm(radial)
        d = steps / lens[:, None]
        ang = np.degrees(np.arccos(np.clip(d @ radial, -1, 1))).max()
        worst_angle = max(worst_angle, ang)
    assert worst_angle < 1.5


def test_elf_columns_respect_bounds():
    params = small_params(column_size=30)
    mesh = sphere_mesh(radius=5.0)
    with pytest.raises(GraphError):
        build_elf_columns(mesh, params,
                          bounds=(np.full(3, -5.5), np.full(3, 5.5)))


def test_assemble_pairs_facing_columns():
    # two three-column objects facing each other along z, 1 mm apart
    params = small_params()  # size 5, anchor 1, spacing 0.2
    h = params.node_spacing
    verts = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    faces = np.array([[0, 1, 2]])

    def make_cols(obj, z0, direction):
        cols = []
        for i, v in enumerate(verts):
            nodes = np.tile(v + [0, 0, z0], (params.column_size, 1))
            nodes[:, 2] += (np.arange(params.column_size) - params.anchor) \
                * h * direction
            cols.append(Column(column_id=i, object_id=obj, vertex_id=i,
                               nodes=nodes, node_spacing=h))
        return cols

    mesh_a = TriangleMesh(vertices=verts, faces=faces)
    mesh_b = TriangleMesh(vertices=verts + [0, 0, 1.0], faces=faces)
    g = assemble_graph([make_cols(0, 0.0, +1), make_cols(1, 1.0, -1)],
                       [mesh_a, mesh_b], params)
    assert len(g.inter_object_pairs) == 3
    for (a, b), gap in zip(g.inter_object_pairs, g.inter_object_gap):
        assert g.column_object[a] == 0 and g.column_object[b] == 1
        assert gap == int(1.0 / h) + 2 * params.anchor


def test_feasible_rejects_each_violation():
    params = small_params(smoothness=1, inter_surface_max=2)
    g = straight_column_graph(2, params)
    ok = np.zeros((2, 2), dtype=np.int64)
    assert g.feasible(ok)
    bad = ok.copy(); bad[0, 0] = -1
    assert not g.feasible(bad)                      # out of range
    bad = ok.copy(); bad[0, 1] = 2
    assert not g.feasible(bad)                      # smoothness
    bad = ok.copy(); bad[0, :] = 3                  # bone above cartilage
    assert not g.feasible(bad)
    bad = ok.copy(); bad[1, :] = 3                  # inter-surface gap > max
    assert not g.feasible(bad)


def test_feasible_checks_inter_object_band():
    params = small_params(inter_object_max=2)
    g = straight_column_graph(1, params, n_objects=2)
    g.inter_object_pairs = np.array([[0, 1]], dtype=np.int64)
    g.inter_object_gap = np.array([4], dtype=np.int64)
    x = np.full((4, 2), -1, dtype=np.int64)
    x[0, 0] = x[1, 0] = 0
    x[2, 1] = x[3, 1] = 0
    # sep = 4 - 0 - 0 = 4 > inter_object_max -> too far apart
    assert not g.feasible(x)
    x[1, 0] = 2; x[3, 1] = 2
    assert g.feasible(x)                            # sep = 0
    x[1, 0] = 3; x[3, 1] = 3
    assert not g.feasible(x)                        # sep < 0: overlap


def test_graph_save_load_round_trip(tmp_path):
    g = straight_column_graph(3, small_params(), n_objects=2)
    g.inter_object_pairs = np.array([[0, 3], [1, 4]], dtype=np.int64)
    g.inter_object_gap = np.array([2, 3], dtype=np.int64)
    path = str(tmp_path / "g.sseg")
    g.save(path)
    back = type(g).load(path)
    assert np.allclose(back.nodes, g.nodes)
    assert np.array_equal(back.column_object, g.column_object)
    assert np.array_equal(back.adjacency, g.adjacency)
    assert back.surfaces == g.surfaces
    assert back.params == g.params
    assert np.array_equal(back.inter_object_pairs, g.inter_object_pairs)
    assert np.array_equal(back.inter_object_gap, g.inter_object_gap)
