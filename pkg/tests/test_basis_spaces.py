"""
Pruebas de las funciones RWG, las funciones duales BC y la Gram mixta
"""
import numpy as np
import pytest

from pmchwt.basis_spaces import assemble_gram, build_bc, build_rwg, dual_gram_check
from pmchwt.errors import MismatchedMeshError
from pmchwt.mesh_topology import barycentric_refine, build_connectivity
from pmchwt.pmchwt_system import prepare_discretization
from pmchwt.quasi_helmholtz import build_incidence


class TestRwgSpace:
    """Normalización por longitud de arista: flujo unitario a través de la arista"""

    def test_dimension_igual_a_aristas(self, sphere_disc):
        assert sphere_disc.rwg.dimension == sphere_disc.conn.n_edges

    def test_divergencia_integra_cero(self, sphere_disc):
        """∫ div f_n = A⁺/A⁺ − A⁻/A⁻ = 0"""
        rwg = sphere_disc.rwg
        for n in range(0, rwg.dimension, 7):
            div = rwg.divergence(n)
            assert div[0] * rwg.support_areas[n, 0] + div[1] * rwg.support_areas[n, 1] == pytest.approx(0.0)

    def test_flujo_unitario(self, sphere_disc):
        """La componente normal a la arista por su longitud vale 1 en ambos lados"""
        rwg = sphere_disc.rwg
        v = rwg.mesh.vertices
        for n in (0, 11, 57):
            a, b = sphere_disc.conn.edges[n]
            mid = 0.5 * (v[a] + v[b])
            edge = (v[b] - v[a]) / np.linalg.norm(v[b] - v[a])
            length = np.linalg.norm(v[b] - v[a])
            for side in (0, 1):
                free = v[rwg.free_vertices[n, side]]
                m_hat = (mid - free) - ((mid - free) @ edge) * edge
                m_hat /= np.linalg.norm(m_hat)
                flux = rwg.evaluate(n, side, mid[None])[0] @ m_hat * length
                # sale de T+ y entra en T-
                assert flux == pytest.approx(1.0 if side == 0 else -1.0)

    def test_matriz_estrella_coincide_con_sigma(self, sphere_disc):
        Sigma = build_incidence(sphere_disc.conn).Sigma
        assert (abs(sphere_disc.rwg.star_matrix - Sigma)).max() == 0

    def test_densidad_coincide_con_evaluate(self, sphere_disc):
        rwg = sphere_disc.rwg
        n = 5
        coeffs = np.zeros(rwg.dimension)
        coeffs[n] = 1.0
        t_plus = rwg.plus_minus[n, 0]
        c = rwg.mesh.centroids[t_plus][None]
        assert np.allclose(rwg.density(coeffs, np.array([t_plus]), c), rwg.evaluate(n, 0, c))


class TestGram:
    """Gram mixta G = ⟨n̂×f, g⟩ y Gram dual 𝔾 = −Gᵀ"""

    def test_gram_bien_condicionada(self, sphere_disc):
        grams = sphere_disc.grams
        assert np.isfinite(grams.condition_number)
        assert grams.condition_number < 1e3

    def test_gram_dual_independiente(self, sphere_disc):
        G = sphere_disc.grams.G
        Gd = dual_gram_check(sphere_disc.rwg, sphere_disc.bc)
        assert np.linalg.norm(Gd + G.T) <= 1e-10 * np.linalg.norm(G)

    def test_gram_invariante_al_escalado(self, sphere1):
        """La Gram normalizada es adimensional"""
        G1 = prepare_discretization(sphere1).grams.G
        G3 = prepare_discretization(sphere1.transformed(scale=3.0)).grams.G
        assert np.allclose(G1, G3, rtol=1e-10, atol=1e-12)

    def test_inversas(self, sphere_disc):
        grams = sphere_disc.grams
        x = np.random.default_rng(1).standard_normal(grams.G.shape[0])
        assert np.allclose(grams.G @ grams.solve_G(x), x)
        assert np.allclose(grams.G.T @ grams.solve_GT(x), x)
        assert np.allclose(grams.Gd @ grams.solve_Gd(x), x)
        assert np.allclose(grams.Gd.T @ grams.solve_GdT(x), x)

    def test_mallas_distintas(self, sphere1, sphere2):
        rwg = build_rwg(build_connectivity(sphere1))
        conn2 = build_connectivity(sphere2)
        bc = build_bc(barycentric_refine(sphere2), conn2)
        with pytest.raises(MismatchedMeshError):
            assemble_gram(rwg, bc)

    def test_dimension_bc(self, sphere_disc):
        assert sphere_disc.bc.dimension == sphere_disc.rwg.dimension
