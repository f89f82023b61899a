"""
Pruebas del validador de identidades algebraicas
"""
import numpy as np
import pytest

from validators.identity_validator import IdentityValidator


@pytest.fixture(scope='module')
def sphere_validator(sphere_disc):
    validator = IdentityValidator(sphere_disc, omega=2 * np.pi * 1e7, threads=1)
    validator.validate_all()
    return validator


class TestIdentityValidator:
    """Identidades exactas y limitadas por la cuadratura sobre la icosfera"""

    def test_todas_pasan(self, sphere_validator):
        summary = sphere_validator.get_summary()
        assert summary['overall_passed'], summary['errors']
        assert summary['total_tests'] == 8

    @pytest.mark.parametrize('rule', ['sigma_t_lambda', 'projectors', 'lambda_t_tphi', 'dual_gram',
                                      'planewave_polarization'])
    def test_identidades_exactas(self, sphere_validator, rule):
        result = sphere_validator.validation_results[rule]
        assert result['passed']
        assert result['value'] <= result['bound']

    def test_incidencia_en_aritmetica_entera(self, sphere_validator):
        assert sphere_validator.validation_results['sigma_t_lambda']['value'] == 0.0

    def test_fallo_registrado(self, octa_disc):
        validator = IdentityValidator(octa_disc, omega=1.0)
        validator._record('regla', 2.0, 1.0, 'forzada')
        summary = validator.get_summary()
        assert not summary['overall_passed']
        assert summary['failed_tests'] == 1
        assert summary['errors'][0].startswith('regla:')

    def test_reporte(self, sphere_validator, capsys):
        sphere_validator.print_report()
        out = capsys.readouterr().out
        assert "REPORTE DE IDENTIDADES ALGEBRAICAS" in out
        assert "✅ dual_gram" in out

    def test_lazos_anulan_k_estatico(self, sphere_validator):
        """‖ΛᵀK₀Λ‖/‖K₀‖ ≤ 1e-6 con la regla graduada de los pares que se tocan"""
        result = sphere_validator.validation_results['lambda_t_k_lambda']
        assert result['bound'] == 1e-6
        assert result['value'] <= 1e-6
