import numpy as np
import pytest

from surfseg.mesh import (MeshError, TriangleMesh, VOIBox, fit_to_voi,
                          icosphere, kmeans_parcellate, laplacian_smooth,
                          mean_shape, read_obj, vertex_normals, write_obj)


def sphere_mesh(radius=1.0, subdivisions=2, center=(0.0, 0.0, 0.0)):
    v, f = icosphere(subdivisions)
    return TriangleMesh(vertices=v * radius + np.asarray(center), faces=f)


def test_icosphere_is_closed_and_unit():
    v, f = icosphere(3)
    assert np.allclose(np.linalg.norm(v, axis=1), 1.0, atol=1e-12)
    e = TriangleMesh(vertices=v, faces=f).edges()
    # Euler characteristic of a sphere
    assert len(v) - len(e) + len(f) == 2
    # consistent outward orientation
    m = TriangleMesh(vertices=v, faces=f)
    tri = m.vertices[m.faces]
    fn = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    out = np.einsum("ij,ij->i", fn, m.face_centroids())
    assert np.all(out > 0)


def test_vertex_normals_radial_on_sphere():
    m = sphere_mesh(radius=5.0, subdivisions=3)
    n = vertex_normals(m.vertices, m.faces)
    assert np.allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-12)
    radial = m.vertices / np.linalg.norm(m.vertices, axis=1, keepdims=True)
    assert np.einsum("ij,ij->i", n, radial).min() > 0.99


def test_mean_shape_identity_and_average():
    a = sphere_mesh(radius=2.0)
    b = sphere_mesh(radius=4.0)
    m = mean_shape([a, b])
    r = np.linalg.norm(m.vertices, axis=1)
    assert np.allclose(r, 3.0, atol=1e-9)
    assert np.array_equal(m.faces, a.faces)


def test_laplacian_smooth_reduces_radial_noise():
    rng = np.random.default_rng(4)
    m = sphere_mesh(radius=10.0, subdivisions=3)
    noisy = TriangleMesh(
        vertices=m.vertices * (1 + rng.normal(0, 0.03, size=(len(m.vertices), 1))),
        faces=m.faces)
    sm = laplacian_smooth(noisy, iterations=3, lam=0.5)
    def rad_sd(mesh):
        return np.linalg.norm(mesh.vertices, axis=1).std()
    assert rad_sd(sm) < 0.5 * rad_sd(noisy)
    assert np.array_equal(sm.faces, noisy.faces)


def test_laplacian_smooth_validates_lam():
    m = sphere_mesh()
    with pytest.raises(MeshError):
        laplacian_smooth(m, lam=0.0)
    with pytest.raises(MeshError):
        laplacian_smooth(m, lam=1.5)


def test_fit_to_voi_matches_box():
    m = sphere_mesh(radius=3.0, center=(1.0, 2.0, 3.0))
    voi = VOIBox(lo=np.array([10.0, 10.0, 10.0]), hi=np.array([14.0, 16.0, 18.0]))
    fit = fit_to_voi(m, voi)
    lo, hi = fit.bbox()
    assert np.allclose(lo, voi.lo, atol=1e-9)
    assert np.allclose(hi, voi.hi, atol=1e-9)


def test_kmeans_parcellate_deterministic_and_complete():
    m = sphere_mesh(radius=8.0, subdivisions=3)
    a = kmeans_parcellate(m, k=8, seed=3)
    b = kmeans_parcellate(m, k=8, seed=3)
    assert np.array_equal(a.clusters, b.clusters)
    assert set(np.unique(a.clusters)) == set(range(8))
    # clusters are vertex-aligned
    assert len(a.clusters) == len(m.vertices)


def test_obj_round_trip(tmp_path):
    m = kmeans_parcellate(sphere_mesh(radius=2.5), k=4, seed=1)
    path = str(tmp_path / "m.obj")
    write_obj(m, path)
    back = read_obj(path)
    assert np.allclose(back.vertices, m.vertices, atol=1e-6)
    assert np.array_equal(back.faces, m.faces)


def test_voibox_contains_and_padded():
    box = VOIBox(lo=np.zeros(3), hi=np.ones(3) * 2)
    pts = np.array([[1.0, 1.0, 1.0], [3.0, 0.0, 0.0]])
    assert list(box.contains(pts)) == [True, False]
    pad = box.padded(0.5)
    assert np.allclose(pad.lo, -0.5) and np.allclose(pad.hi, 2.5)
    with pytest.raises(MeshError):
        VOIBox(lo=np.ones(3), hi=np.zeros(3))
