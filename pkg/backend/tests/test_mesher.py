import numpy as np
import pytest

from fracture.mesher import MeshError, SpecimenSpec, boundary_sets, build_mesh, tessellate, write_mesh


def _centroids(mesh):
    return np.array([mesh.nodes[ids].mean(axis=0) for ids in mesh.particles])


def _check_normals_point_a_to_b(mesh):
    c = _centroids(mesh)
    a, b = mesh.iface_particles[:, 0], mesh.iface_particles[:, 1]
    assert np.all(a < b)
    reach = np.einsum("ij,ij->i", c[b] - c[a], mesh.normals)
    assert np.all(reach > 0.0)
    assert np.allclose(np.linalg.norm(mesh.normals, axis=1), 1.0)
    assert np.allclose(np.einsum("ij,ij->i", mesh.normals, mesh.tangents), 0.0)


def _check_interface_nodes_coincide(mesh):
    assert np.array_equal(mesh.nodes[mesh.nodes_a], mesh.nodes[mesh.nodes_b])
    assert np.all(mesh.node_particle[mesh.nodes_a[:, 0]] == mesh.iface_particles[:, 0])
    assert np.all(mesh.node_particle[mesh.nodes_b[:, 0]] == mesh.iface_particles[:, 1])


def test_structured_specimen_counts():
    mesh = tessellate(SpecimenSpec(0.05, 0.1, 0.002, "structured-quad"))
    assert mesh.n_particles == 1250
    assert mesh.n_interfaces == 25 * 49 + 24 * 50 == 2425
    assert mesh.n_nodes == 4 * 1250
    assert mesh.triangles.shape == (2500, 3)
    assert mesh.particle_areas().sum() == pytest.approx(0.005, rel=1e-12)
    assert np.allclose(mesh.lengths, 0.002)

    top = boundary_sets(mesh)["top"]
    assert top.size == 50
    assert np.unique(np.round(mesh.nodes[top, 0], 12)).size == 26


def test_single_particle_has_no_interfaces():
    mesh = tessellate(SpecimenSpec(0.002, 0.002, 0.002, "structured-quad"))
    assert mesh.n_particles == 1
    assert mesh.n_interfaces == 0
    assert mesh.n_nodes == 4


def test_two_stacked_particles_share_one_interface():
    mesh = tessellate(SpecimenSpec(0.002, 0.004, 0.002, "structured-quad"))
    assert mesh.n_particles == 2
    assert mesh.n_interfaces == 1
    assert mesh.n_nodes == 8
    assert tuple(mesh.iface_particles[0]) == (0, 1)
    assert np.allclose(mesh.normals[0], [0.0, 1.0])
    assert mesh.lengths[0] == pytest.approx(0.002)
    assert np.allclose(mesh.nodes[mesh.nodes_a[0], 1], 0.002)
    _check_interface_nodes_coincide(mesh)


def test_crossed_triangles_split_every_cell_in_four():
    mesh = tessellate(SpecimenSpec(0.008, 0.008, 0.002, "crossed-triangle"))
    assert mesh.n_particles == 4 * 16
    assert mesh.n_interfaces == 4 * 16 + 3 * 4 + 4 * 3
    assert mesh.triangles.shape[0] == mesh.n_particles
    assert np.all(mesh.particle_areas() == pytest.approx(0.002 ** 2 / 4.0, rel=1e-9))
    _check_normals_point_a_to_b(mesh)
    _check_interface_nodes_coincide(mesh)


def test_compression_specimen_interface_count():
    mesh = tessellate(SpecimenSpec(0.05, 0.1, 0.002, "crossed-triangle"))
    assert mesh.n_particles == 5000
    assert mesh.n_interfaces == 7425


def test_structured_normals_and_nodes():
    mesh = tessellate(SpecimenSpec(0.006, 0.004, 0.002, "structured-quad"))
    _check_normals_point_a_to_b(mesh)
    _check_interface_nodes_coincide(mesh)


def test_voronoi_fills_the_box():
    spec = SpecimenSpec(0.01, 0.01, 0.002, "voronoi", seed=7)
    mesh = tessellate(spec)
    assert mesh.n_particles == 25
    assert mesh.particle_areas().sum() == pytest.approx(1e-4, rel=1e-9)
    assert np.all(mesh.particle_areas() > 0.0)
    assert np.all(mesh.lengths > 0.0)
    assert mesh.nodes[:, 0].min() >= 0.0 and mesh.nodes[:, 0].max() <= 0.01
    assert mesh.nodes[:, 1].min() >= 0.0 and mesh.nodes[:, 1].max() <= 0.01
    _check_normals_point_a_to_b(mesh)


def test_voronoi_is_deterministic_per_seed():
    first = tessellate(SpecimenSpec(0.01, 0.01, 0.002, "voronoi", seed=3))
    again = tessellate(SpecimenSpec(0.01, 0.01, 0.002, "voronoi", seed=3))
    other = tessellate(SpecimenSpec(0.01, 0.01, 0.002, "voronoi", seed=4))
    assert np.array_equal(first.nodes, again.nodes)
    assert np.array_equal(first.iface_particles, again.iface_particles)
    assert not (first.nodes.shape == other.nodes.shape and np.array_equal(first.nodes, other.nodes))


def test_particle_size_must_divide_the_specimen():
    with pytest.raises(MeshError, match="does not divide width"):
        tessellate(SpecimenSpec(0.05, 0.1, 0.003, "structured-quad"))


@pytest.mark.parametrize("kwargs, message", [
    (dict(width=0.05, height=0.1, particle_size=0.002, pattern="hexagon"), "unknown pattern"),
    (dict(width=-0.05, height=0.1, particle_size=0.002), "width"),
    (dict(width=0.05, height=0.1, particle_size=0.0), "particle_size"),
])
def test_bad_specimens(kwargs, message):
    with pytest.raises(MeshError, match=message):
        SpecimenSpec(**kwargs)


def test_clockwise_polygon_is_rejected():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(MeshError, match="counter-clockwise"):
        build_mesh(1.0, 1.0, verts, [[0, 3, 2, 1]])


def test_write_mesh_blocks(tmp_path):
    mesh = tessellate(SpecimenSpec(0.002, 0.004, 0.002, "structured-quad"))
    path = write_mesh(mesh, tmp_path / "dump" / "mesh.txt")
    lines = path.read_text(encoding="utf-8").splitlines()
    headers = [line for line in lines if line.startswith("#")]
    assert headers == ["# nodes 8", "# triangles 4", "# interfaces 1"]
    assert len(lines) == 3 + 8 + 4 + 1
    iface = lines[-1].split()
    assert iface[:3] == ["0", "0", "1"]
    assert float(iface[-1]) == pytest.approx(0.002)
