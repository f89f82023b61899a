"""
Pruebas del sistema PMCHWT: régimen, coeficientes, precondicionadores y solución
"""
import numpy as np
import pytest

from pmchwt import settings
from pmchwt.bem_operators import MaterialParams, Wavenumber, assemble_operators
from pmchwt.errors import ConfigError, MismatchedMeshError
from pmchwt.excitation import PlaneWave, planewave_rhs
from pmchwt.pmchwt_system import (ExcitationType, PreconditionerMode, Regime, assemble_system,
                                  build_preconditioners, classify_regime, coefficients_for,
                                  condition_numbers, loopstar_basis, solve)

DIELECTRIC = MaterialParams(eps_r_prime=4.0, sigma=0.0)
PLANE_WAVE = PlaneWave(direction=[0, 0, 1], polarization=[1, 0, 0])


def _omega(f):
    return 2 * np.pi * f


def _pair(disc, system, mode=PreconditionerMode.PROJECTOR, excitation=ExcitationType.INDUCTIVE):
    reg = classify_regime(system.omega, system.material, disc.mesh.characteristic_length)
    coeffs = coefficients_for(reg, excitation)
    return build_preconditioners(coeffs, disc, excitation, mode, system)


class TestRegime:
    """χ = k₀L, γ = √(ωε₀/σ), ξ = √2·L/δ"""

    def test_dielectrico_siempre_qsr(self):
        reg = classify_regime(_omega(1e9), MaterialParams(eps_r_prime=4.0), 1.0)
        assert reg.regime == Regime.QSR
        assert reg.gamma == float('inf')
        assert reg.xi == 0.0

    @pytest.mark.parametrize('omega, sigma, expected', [
        (1e12, 1.0, Regime.QSR),
        (1.0, 1.0, Regime.ECFR),
        (_omega(1e6), 1e7, Regime.SEDR),
    ])
    def test_clasificacion(self, omega, sigma, expected):
        assert classify_regime(omega, MaterialParams(sigma=sigma), 1.0).regime == expected

    @pytest.mark.parametrize('omega, sigma', [(1.0, 1.0), (1e4, 1e3), (1e9, 1e7), (1e12, 1.0)])
    def test_chi_igual_gamma_por_xi(self, omega, sigma):
        reg = classify_regime(omega, MaterialParams(sigma=sigma), 0.3)
        assert reg.chi == pytest.approx(omega / settings.C0 * 0.3)
        assert reg.gamma * reg.xi == pytest.approx(reg.chi, rel=1e-12)

    def test_frecuencia_no_positiva(self):
        with pytest.raises(ValueError):
            classify_regime(0.0, MaterialParams(), 1.0)

    def test_as_dict(self):
        data = classify_regime(1.0, MaterialParams(sigma=1.0), 1.0).as_dict()
        assert data['regime'] == 'ECFR'
        assert set(data) >= {'chi', 'gamma', 'xi', 'skin_depth'}


class TestCoefficients:
    """Potencias de χ y γ por régimen y tipo de excitación"""

    def test_qsr_inductivo(self):
        reg = classify_regime(1e3, DIELECTRIC, 1.0)
        c = coefficients_for(reg, ExcitationType.INDUCTIVE)
        assert c.a_L == pytest.approx(1.0)
        assert c.b_L == pytest.approx(reg.chi ** -2)
        assert c.d_R == pytest.approx(reg.chi ** 2)

    def test_ecfr_capacitivo(self):
        reg = classify_regime(1.0, MaterialParams(sigma=1.0), 1.0)
        c = coefficients_for(reg, 'capacitive')
        assert c.excitation == ExcitationType.CAPACITIVE
        assert c.d_R == pytest.approx(reg.chi ** -1.5 * reg.gamma ** 2)

    def test_variante_unitaria(self):
        reg = classify_regime(1.0, MaterialParams(sigma=1.0), 1.0)
        c = coefficients_for(reg, ExcitationType.INDUCTIVE, variant='unit')
        values = c.as_dict()
        assert all(values[name] == 1.0 for name in ('a_L', 'b_L', 'c_L', 'd_L', 'a_R', 'b_R', 'c_R', 'd_R'))
        assert values['regime'] == 'ECFR'

    def test_variante_desconocida(self):
        reg = classify_regime(1.0, MaterialParams(sigma=1.0), 1.0)
        with pytest.raises(ConfigError) as exc:
            coefficients_for(reg, ExcitationType.INDUCTIVE, variant='otra')
        assert exc.value.field == 'preconditioner.variant'


class TestSystem:
    """Bloques de Z̄ y equivalencia con el sistema físico"""

    @pytest.fixture(scope='class')
    def octa_system(self, octa_disc):
        return assemble_system(octa_disc, DIELECTRIC, _omega(2e7), threads=1)

    def test_bloques_k(self, octa_system):
        n = octa_system.size
        Zbar = octa_system.Zbar
        assert Zbar.shape == (2 * n, 2 * n)
        assert np.allclose(Zbar[:n, n:], -octa_system.K)
        assert np.allclose(Zbar[n:, :n], octa_system.K)

    def test_escalado_sqrt_eta0(self, octa_system):
        """b̄ = (e/√η₀, √η₀ h) y el desescalado devuelve j = x_up/√η₀, m = √η₀ x_low"""
        n = octa_system.size
        e, h = np.full(n, 2.0 + 0j), np.full(n, 3.0 + 0j)
        b = octa_system.scaled_rhs(e, h)
        root = np.sqrt(octa_system.eta0)
        assert np.allclose(b[:n], 2.0 / root) and np.allclose(b[n:], 3.0 * root)
        j, m = octa_system.unscale(b)
        assert np.allclose(j, 2.0 / octa_system.eta0) and np.allclose(m, 3.0 * octa_system.eta0)

    def test_solucion_satisface_sistema_fisico(self, octa_disc, octa_system):
        e, h = planewave_rhs(PLANE_WAVE, octa_disc.rwg, octa_system.omega)
        pair = build_preconditioners(None, octa_disc, ExcitationType.INDUCTIVE, PreconditionerMode.OFF)
        result = solve(octa_system, pair, e, h)
        lhs = octa_system.Z @ np.concatenate([result.j, result.m])
        rhs = np.concatenate([e, h])
        assert np.linalg.norm(lhs - rhs) <= 1e-8 * np.linalg.norm(rhs)

    def test_dense_y_gmres_coinciden(self, octa_disc, octa_system):
        e, h = planewave_rhs(PLANE_WAVE, octa_disc.rwg, octa_system.omega)
        pair = _pair(octa_disc, octa_system)
        dense = solve(octa_system, pair, e, h, method='dense')
        iterative = solve(octa_system, pair, e, h, method='gmres', tol=1e-12)
        assert iterative.iterations > 0
        assert np.allclose(iterative.j, dense.j, rtol=1e-6, atol=1e-6 * np.abs(dense.j).max())

    def test_precondicionado_no_cambia_la_solucion(self, octa_disc, octa_system):
        e, h = planewave_rhs(PLANE_WAVE, octa_disc.rwg, octa_system.omega)
        plain = solve(octa_system, build_preconditioners(None, octa_disc, 'inductive', 'off'), e, h)
        for excitation in ExcitationType:
            pre = solve(octa_system, _pair(octa_disc, octa_system, excitation=excitation), e, h)
            assert np.linalg.norm(pre.j - plain.j) <= 1e-8 * np.linalg.norm(plain.j)
            assert np.linalg.norm(pre.m - plain.m) <= 1e-8 * np.linalg.norm(plain.m)

    def test_rhs_nulo(self, octa_disc, octa_system):
        zeros = np.zeros(octa_disc.size, dtype=complex)
        result = solve(octa_system, _pair(octa_disc, octa_system), zeros, zeros)
        assert not np.any(result.j) and not np.any(result.m)
        assert result.residual == 0.0

    def test_metodo_desconocido(self, octa_disc, octa_system):
        e, h = planewave_rhs(PLANE_WAVE, octa_disc.rwg, octa_system.omega)
        with pytest.raises(ConfigError):
            solve(octa_system, _pair(octa_disc, octa_system), e, h, method='cholesky')

    def test_mallas_distintas(self, sphere_disc, octa_system):
        with pytest.raises(MismatchedMeshError):
            build_preconditioners(None, sphere_disc, ExcitationType.INDUCTIVE, PreconditionerMode.OFF,
                                  octa_system)

    def test_fuga_estatica_exacta(self, octa_disc):
        """Tras quitar la fuga, K₀ aplicado a un lazo cae entero en el rango de Σ"""
        K0 = assemble_operators(octa_disc.rwg, Wavenumber.static(), threads=1).K
        corrected = K0 - octa_disc.static_loop_leak
        Lam = octa_disc.incidence.Lambda.toarray().astype(float)
        residual = octa_disc.projectors.P_LambdaH(corrected @ Lam)
        assert np.linalg.norm(residual) <= 1e-12 * np.linalg.norm(K0)

    @pytest.mark.slow
    def test_lazos_de_k_escalan_como_k2(self, sphere_disc):
        """‖ΛᵀKΛ‖ baja cien veces por década de frecuencia cuando se cancela la fuga estática"""
        Lam = sphere_disc.incidence.Lambda

        def loop_norm(f, cancel=True):
            system = assemble_system(sphere_disc, DIELECTRIC, _omega(f), threads=1, cancel_static_leak=cancel)
            return np.linalg.norm(Lam.T @ (Lam.T @ system.K.T).T)

        high, low = loop_norm(1e4), loop_norm(1e3)
        assert 50.0 < high / low < 200.0
        assert loop_norm(1e3, cancel=False) > 10.0 * low


class TestPreconditioners:
    """Inversa izquierda, comparador loop-star y mejora del condicionamiento"""

    def test_modo_off_es_identidad(self, octa_disc):
        pair = build_preconditioners(None, octa_disc, ExcitationType.INDUCTIVE, PreconditionerMode.OFF)
        x = np.arange(2 * octa_disc.size, dtype=complex)
        assert np.array_equal(pair.left(x), x)
        assert np.array_equal(pair.right(x), x)

    @pytest.mark.parametrize('excitation', list(ExcitationType))
    def test_inversa_izquierda(self, octa_disc, excitation):
        reg = classify_regime(1.0, MaterialParams(sigma=1.0), octa_disc.mesh.characteristic_length)
        pair = build_preconditioners(coefficients_for(reg, excitation, variant='classical'), octa_disc, excitation)
        x = np.random.default_rng(3).standard_normal(2 * octa_disc.size) + 0j
        assert np.allclose(pair.left_inverse(pair.left(x)), x)

    def test_base_loop_star_cuadrada(self, sphere_disc):
        A = loopstar_basis(sphere_disc)
        assert A.shape == (sphere_disc.size, sphere_disc.size)
        assert np.linalg.matrix_rank(A.toarray()) == sphere_disc.size

    def test_loop_star_en_toro(self, torus_disc):
        with pytest.raises(ConfigError):
            loopstar_basis(torus_disc)

    def test_loop_star_sin_inversa(self, octa_disc):
        reg = classify_regime(1e3, DIELECTRIC, octa_disc.mesh.characteristic_length)
        pair = build_preconditioners(coefficients_for(reg, 'inductive'), octa_disc, 'inductive', 'loopstar')
        with pytest.raises(NotImplementedError):
            pair.left_inverse(np.ones(2 * octa_disc.size))

    @pytest.mark.slow
    def test_baja_frecuencia(self, sphere_disc):
        """Entre 10 MHz y 10 Hz el condicionamiento precondicionado queda acotado y casi constante"""
        cond_pre, cond_rescaled = [], []
        for f in (1e7, 1e5, 1e3, 10.0):
            system = assemble_system(sphere_disc, DIELECTRIC, _omega(f), threads=1)
            cond = condition_numbers(system, _pair(sphere_disc, system))
            assert len(cond['singular_values']) == 2 * sphere_disc.size
            cond_pre.append(cond['cond_preconditioned'])
            cond_rescaled.append(cond['cond_rescaled'])
        assert max(cond_pre) < 1e4
        assert max(cond_pre) / min(cond_pre) < 30.0
        assert cond_rescaled[-1] > 1e6 * cond_pre[-1]
