"""
Pruebas de los parámetros de material, la función de Green y las matrices T_A, T_Φ, K
"""
import numpy as np
import pytest

from pmchwt import settings
from pmchwt.bem_operators import (MaterialParams, Wavenumber, assemble_operators, greens,
                                  plane_integral_check, scaling_probe)
from pmchwt.errors import CoincidentPointsError, QuadratureError


class TestMaterial:
    """ε₁ = ε_r′ − jσ/(ωε₀) y números de onda con Im k ≤ 0"""

    def test_permitividad_compleja(self):
        mat = MaterialParams(eps_r_prime=2.0, sigma=3.0)
        omega = 1e6
        eps = mat.relative_permittivity(omega)
        assert eps.real == pytest.approx(2.0)
        assert eps.imag == pytest.approx(-3.0 / (omega * settings.EPS0))

    def test_profundidad_de_penetracion(self):
        mat = MaterialParams(sigma=1.0)
        f = 1e3
        assert mat.skin_depth(2 * np.pi * f) == pytest.approx(1.0 / np.sqrt(np.pi * f * settings.MU0))
        assert MaterialParams(sigma=0.0).skin_depth(1.0) == float('inf')

    def test_buen_conductor(self):
        """En un buen conductor k₁δ ≈ 1 − j"""
        mat = MaterialParams(sigma=1e7)
        omega = 2 * np.pi * 1e3
        k = Wavenumber.interior(omega, mat).k
        assert k.imag <= 0
        assert k * mat.skin_depth(omega) == pytest.approx(1 - 1j, rel=1e-3)

    def test_vacio(self):
        w = Wavenumber.exterior(settings.C0)
        assert w.k == pytest.approx(1.0)
        assert w.eta == pytest.approx(settings.ETA0)


class TestGreens:
    def test_valor(self):
        g = greens(1.0, [0, 0, 0], [0, 0, 2.0])
        assert g == pytest.approx(np.exp(-2j) / (8 * np.pi))

    def test_puntos_coincidentes(self):
        with pytest.raises(CoincidentPointsError):
            greens(1.0, [1, 2, 3], [1, 2, 3])


class TestOperators:
    """Simetría de Galerkin, núcleo de T_Φ y determinismo del ensamblado"""

    @pytest.fixture(scope='class')
    def sphere_ops(self, sphere_disc):
        return assemble_operators(sphere_disc.rwg, Wavenumber.exterior(2 * np.pi * 1e7), threads=1)

    def test_simetria(self, sphere_ops):
        for M in (sphere_ops.TA, sphere_ops.TPhi):
            assert np.linalg.norm(M - M.T) <= 1e-12 * np.linalg.norm(M)

    def test_lazos_en_el_nucleo_de_tphi(self, sphere_disc, sphere_ops):
        Lambda = sphere_disc.incidence.Lambda
        residual = np.linalg.norm(Lambda.T @ sphere_ops.TPhi)
        assert residual <= 1e-10 * np.linalg.norm(sphere_ops.TPhi)

    def test_finitas(self, sphere_ops):
        for M in (sphere_ops.TA, sphere_ops.TPhi, sphere_ops.K):
            assert np.all(np.isfinite(M))

    def test_hilos_no_cambian_el_resultado(self, sphere_disc, sphere_ops):
        """80 triángulos dan más de un bloque de pares; el orden de reducción es fijo"""
        ops2 = assemble_operators(sphere_disc.rwg, sphere_ops.wavenumber, threads=2)
        assert np.array_equal(ops2.TA, sphere_ops.TA)
        assert np.array_equal(ops2.TPhi, sphere_ops.TPhi)
        assert np.array_equal(ops2.K, sphere_ops.K)

    def test_operador_t(self, sphere_ops):
        k = sphere_ops.wavenumber.k
        assert np.allclose(sphere_ops.T, -1j * k * sphere_ops.TA + sphere_ops.TPhi / (1j * k))

    def test_lazos_anulan_k_estatico(self, sphere_disc):
        """La regla graduada en pares que se tocan deja ‖ΛᵀK₀Λ‖/‖K₀‖ por debajo de 1e-6"""
        K0 = assemble_operators(sphere_disc.rwg, Wavenumber.static(), threads=1).K
        Lam = sphere_disc.incidence.Lambda
        assert np.linalg.norm(Lam.T @ (Lam.T @ K0.T).T) <= 1e-6 * np.linalg.norm(K0)

    def test_bloques_de_puntos_cercanos(self, octa_disc, mocker):
        """Partir los pares cercanos en bloques pequeños no cambia las matrices"""
        omega = 2 * np.pi * 1e7
        reference = assemble_operators(octa_disc.rwg, Wavenumber.exterior(omega), threads=1)
        mocker.patch('pmchwt.bem_operators.NEAR_POINT_BUDGET', 500)
        blocked = assemble_operators(octa_disc.rwg, Wavenumber.exterior(omega), threads=1)
        assert np.allclose(blocked.K, reference.K, rtol=1e-12, atol=1e-14 * np.abs(reference.K).max())
        assert np.allclose(blocked.TA, reference.TA, rtol=1e-12, atol=1e-14 * np.abs(reference.TA).max())


class TestPlaneIntegral:
    """∫ G_k sobre el plano = 1/(2jk) cuando Im k < 0"""

    @pytest.mark.parametrize('delta', [1e-3, 0.1, 2.0])
    def test_buen_conductor(self, delta):
        result = plane_integral_check((1 - 1j) / delta)
        assert result['relative_error'] < 1e-8
        assert result['magnitude'] == pytest.approx(delta / (2 * np.sqrt(2)), rel=1e-8)

    def test_k_real_no_converge(self):
        with pytest.raises(QuadratureError):
            plane_integral_check(1.0 + 0j)


@pytest.mark.slow
class TestScalingProbe:
    """En vacío ‖T_A/L‖ y ‖T_Φ·L‖ no dependen de k y ‖K − K₀‖ crece como k²"""

    def test_pendientes(self, octa_disc):
        L = octa_disc.mesh.characteristic_length
        kL = np.logspace(-2, -1, 4)
        wavenumbers = [Wavenumber.exterior(x / L * settings.C0) for x in kL]
        probe = scaling_probe(octa_disc.rwg, wavenumbers, kL, axis_name='kL', threads=1)
        assert list(probe['table'].columns) == ['kL', 'norm_TA_over_L', 'norm_TPhi_times_L',
                                                'norm_K', 'norm_K_ext']
        assert probe['slopes']['norm_K_ext']['slope'] == pytest.approx(2.0, abs=0.1)
        assert probe['slopes']['norm_TA_over_L']['slope'] == pytest.approx(0.0, abs=0.05)
        assert probe['slopes']['norm_TPhi_times_L']['slope'] == pytest.approx(0.0, abs=0.05)
