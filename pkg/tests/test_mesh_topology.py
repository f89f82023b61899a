"""
Pruebas de lectura, validación y topología de mallas
"""
import numpy as np
import pytest

from pmchwt.errors import (DegenerateTriangleError, MeshParseError, MultiComponentError,
                           OpenSurfaceError, UnsupportedElementError)
from pmchwt.mesh_generators import box, capacitor, icosphere, revolved_sphere, write_msh2, write_off
from pmchwt.mesh_topology import (barycentric_refine, build_connectivity, distance_to_surface, load_mesh,
                                  mesh_from_arrays, winding_numbers)

TETRA_V = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
TETRA_F = np.array([[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]])


class TestMeshReading:
    """Lectura de OFF y MSH v2 con validación"""

    def test_off_reorienta_cara_invertida(self, off_mesh):
        """El tetraedro con una cara mal orientada se reorienta hacia fuera"""
        assert off_mesh.n_faces == 4
        assert off_mesh.signed_volume() == pytest.approx(1.0 / 6.0)
        center = off_mesh.vertices.mean(axis=0)
        outward = np.einsum('ij,ij->i', off_mesh.centroids - center, off_mesh.normals)
        assert np.all(outward > 0)

    def test_msh_ignora_puntos_y_lineas(self, msh_mesh):
        """Los elementos de tipo 15 y 1 se ignoran y los ids de nodo se remapean"""
        assert msh_mesh.n_vertices == 6
        assert msh_mesh.n_faces == 8
        assert msh_mesh.signed_volume() == pytest.approx(4.0 / 3.0)

    def test_cuadrilatero_no_soportado(self, fixtures_dir):
        with pytest.raises(UnsupportedElementError):
            load_mesh(fixtures_dir / 'quad_face.off')

    def test_superficie_abierta(self, fixtures_dir):
        with pytest.raises(OpenSurfaceError):
            load_mesh(fixtures_dir / 'open_square.off')

    def test_archivo_inexistente(self, tmp_path):
        with pytest.raises(MeshParseError) as exc:
            load_mesh(tmp_path / 'no_existe.off')
        assert exc.value.field == 'mesh.path'

    def test_formato_desconocido(self, fixtures_dir):
        with pytest.raises(MeshParseError):
            load_mesh(fixtures_dir / 'tetra_flipped.off', fmt='stl')

    def test_escritura_y_relectura(self, tmp_path, sphere1):
        """Las mallas generadas se pueden escribir en OFF y MSH v2 y volver a leer"""
        for path in (write_off(sphere1, tmp_path / 'esfera.off'), write_msh2(sphere1, tmp_path / 'esfera.msh')):
            mesh = load_mesh(path)
            assert mesh.n_faces == sphere1.n_faces
            assert mesh.signed_volume() == pytest.approx(sphere1.signed_volume())


class TestMeshValidation:
    """Errores de validación de la geometría"""

    def test_dos_componentes(self):
        v = np.vstack([TETRA_V, TETRA_V + 5.0])
        f = np.vstack([TETRA_F, TETRA_F + 4])
        with pytest.raises(MultiComponentError):
            mesh_from_arrays(v, f)

    def test_triangulo_degenerado(self):
        v = TETRA_V.copy()
        v[3] = [0.5, 0.0, 0.0]
        with pytest.raises(DegenerateTriangleError):
            mesh_from_arrays(v, TETRA_F)

    def test_indices_fuera_de_rango(self):
        with pytest.raises(MeshParseError):
            mesh_from_arrays(TETRA_V, TETRA_F + 1)

    def test_escalado_conserva_topologia(self, sphere1):
        scaled = sphere1.transformed(scale=3.0)
        assert scaled.characteristic_length == pytest.approx(3.0 * sphere1.characteristic_length)
        assert scaled.total_area() == pytest.approx(9.0 * sphere1.total_area())
        assert np.array_equal(scaled.triangles, sphere1.triangles)


class TestConnectivity:
    """Aristas, incidencia arista-triángulo y género"""

    def test_icosfera_genero_cero(self, sphere1):
        conn = build_connectivity(sphere1)
        assert (conn.n_vertices, conn.n_edges, conn.n_faces) == (42, 120, 80)
        assert conn.genus == 0

    def test_toro_genero_uno(self, coarse_torus):
        conn = build_connectivity(coarse_torus)
        assert conn.euler_characteristic() == 0
        assert conn.genus == 1

    def test_triangulos_mas_y_menos_distintos(self, sphere1):
        conn = build_connectivity(sphere1)
        assert np.all(conn.edge_to_triangles >= 0)
        assert np.all(conn.edge_to_triangles[:, 0] != conn.edge_to_triangles[:, 1])

    def test_aristas_canonicas(self, octa_mesh):
        conn = build_connectivity(octa_mesh)
        assert np.all(conn.edges[:, 0] < conn.edges[:, 1])
        a, b = conn.edges[3]
        assert conn.edge_index(b, a) == 3

    @pytest.mark.parametrize('mesh_factory', [
        lambda: revolved_sphere(n_theta=6, n_phi=10),
        lambda: box(1.0, 0.5, 2.0, 2, 2, 3),
        lambda: capacitor(plate_radius=1.0, gap=0.2, thickness=0.2, wire_radius=0.1, h=0.3, n_phi=10),
    ])
    def test_generadores_cerrados(self, mesh_factory):
        """Los generadores producen superficies cerradas de género 0"""
        mesh = mesh_factory()
        assert build_connectivity(mesh).genus == 0
        assert mesh.signed_volume() > 0


class TestGeometry:
    """Refinamiento baricéntrico, números de giro y distancias"""

    def test_refinamiento_baricentrico(self, octa_mesh):
        ref = barycentric_refine(octa_mesh)
        conn = build_connectivity(octa_mesh)
        assert ref.mesh.n_faces == 6 * octa_mesh.n_faces
        assert ref.mesh.n_vertices == conn.n_vertices + conn.n_edges + conn.n_faces
        assert ref.mesh.total_area() == pytest.approx(octa_mesh.total_area())
        child_normals = ref.mesh.normals
        parent_normals = octa_mesh.normals[ref.child_parent]
        assert np.allclose(np.einsum('ij,ij->i', child_normals, parent_normals), 1.0)

    def test_numeros_de_giro(self, sphere1):
        w = winding_numbers(sphere1, np.array([[0.0, 0.0, 0.0], [0.2, -0.1, 0.3], [3.0, 0.0, 0.0]]))
        assert w[0] == pytest.approx(1.0, abs=1e-10)
        assert w[1] == pytest.approx(1.0, abs=1e-10)
        assert w[2] == pytest.approx(0.0, abs=1e-10)

    def test_distancia_octaedro(self, octa_mesh):
        d = distance_to_surface(octa_mesh, np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 2.0]]))
        assert d[0] == pytest.approx(1.0 / np.sqrt(3.0))
        assert d[1] == pytest.approx(1.0)

    def test_icosfera_equivolumen(self):
        mesh = icosphere(radius=0.5, level=1, equal_volume=True)
        assert mesh.signed_volume() == pytest.approx(4.0 / 3.0 * np.pi * 0.5 ** 3)
