"""
Pruebas del CLI: subcomandos, códigos de salida y artefactos escritos
"""
import json
from pathlib import Path

import pandas as pd
import pytest

import main
from pmchwt.errors import SolverConvergenceError
from pmchwt.experiments import ExperimentResult

CONFIGS = Path(__file__).parent.parent / 'configs'

OCTAHEDRON_IDENTITIES = """
schema_version = 1

[experiment]
kind = "identities"
name = "identidades_octaedro"

[mesh]
generator = "octahedron"

[sweep]
axis = "frequency"
values = [1.0e6, 1.0e7]
"""


@pytest.fixture
def octa_config(tmp_path):
    path = tmp_path / 'identidades.toml'
    path.write_text(OCTAHEDRON_IDENTITIES, encoding='utf-8')
    return path


@pytest.fixture
def fake_result():
    frame = pd.DataFrame({'f_hz': [1.0, 10.0], 'cond_preconditioned': [12.5, 12.75]})
    return ExperimentResult(frame, {'max_rel_err_L': 0.01}, [{'regime': 'QSR'}], [], passed=True)


class TestValidateCommand:
    def test_configuracion_valida(self, capsys):
        assert main.main(['validate', '--config', str(CONFIGS / 'identities.toml')]) == main.EXIT_OK
        assert '"passed": true' in capsys.readouterr().out

    def test_configuracion_invalida(self, octa_config, capsys):
        octa_config.write_text(OCTAHEDRON_IDENTITIES.replace('schema_version = 1', 'schema_version = 7'),
                               encoding='utf-8')
        assert main.main(['validate', '--config', str(octa_config)]) == main.EXIT_CONFIG
        assert 'schema_version' in capsys.readouterr().out

    def test_archivo_inexistente(self, tmp_path, capsys):
        assert main.main(['validate', '--config', str(tmp_path / 'nada.toml')]) == main.EXIT_CONFIG
        record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert record['code'] == 'invalid_config'


class TestRunCommand:
    """Códigos de salida y artefactos de `run`"""

    def test_malla_inexistente(self, octa_config, tmp_path):
        octa_config.write_text(OCTAHEDRON_IDENTITIES.replace('generator = "octahedron"',
                                                             'path = "mallas/no_existe.off"'), encoding='utf-8')
        out = tmp_path / 'salida'
        assert main.main(['run', '--config', str(octa_config), '--out', str(out)]) == main.EXIT_CONFIG
        record = json.loads((out / 'error.json').read_text(encoding='utf-8'))
        assert record['field'] == 'mesh.path'
        assert record['violations']

    def test_ejecucion_correcta(self, octa_config, tmp_path, mocker, fake_result):
        runner = mocker.patch('main.run_experiment', return_value=fake_result)
        out = tmp_path / 'salida'
        assert main.main(['run', '--config', str(octa_config), '--out', str(out), '--threads', '3']) == main.EXIT_OK
        runner.assert_called_once()
        assert runner.call_args.args[1].threads == 3

        frame = pd.read_csv(out / 'identidades_octaedro.csv')
        assert list(frame.columns) == ['f_hz', 'cond_preconditioned']
        metadata = json.loads((out / 'identidades_octaedro_metadata.json').read_text(encoding='utf-8'))
        assert metadata['schema_version'] == 1
        assert metadata['experiment'] == {'kind': 'identities', 'name': 'identidades_octaedro'}
        assert metadata['passed'] is True
        assert metadata['threads'] == 3
        assert set(metadata['versions']) >= {'pmchwt', 'numpy', 'scipy'}
        assert 'gmres_tol' in metadata['tolerances']
        report = json.loads((out / 'pipeline_execution_report.json').read_text(encoding='utf-8'))
        assert report['pipeline_execution']['successful_stages'] == 3
        assert not list(out.glob('*.tmp'))

    def test_comprobaciones_fallidas_no_cambian_el_codigo(self, octa_config, tmp_path, mocker, fake_result, capsys):
        fake_result.passed = False
        fake_result.summary['failures'] = ['cond: pendiente 1.0']
        mocker.patch('main.run_experiment', return_value=fake_result)
        assert main.main(['run', '--config', str(octa_config), '--out', str(tmp_path)]) == main.EXIT_OK
        assert 'cond: pendiente 1.0' in capsys.readouterr().out

    def test_solver_no_converge(self, octa_config, tmp_path, mocker):
        mocker.patch('main.run_experiment', side_effect=SolverConvergenceError("GMRES no convergió", 1e-3))
        assert main.main(['run', '--config', str(octa_config), '--out', str(tmp_path)]) == main.EXIT_ERROR
        record = json.loads((tmp_path / 'error.json').read_text(encoding='utf-8'))
        assert record['code'] == 'solver_nonconvergence'
        assert record['residual'] == pytest.approx(1e-3)
        report = json.loads((tmp_path / 'pipeline_execution_report.json').read_text(encoding='utf-8'))
        assert report['stage_results']['Experimento']['status'] == 'failed'

    def test_modo_determinista(self, octa_config, tmp_path, mocker, fake_result):
        runner = mocker.patch('main.run_experiment', return_value=fake_result)
        main.main(['run', '--config', str(octa_config), '--out', str(tmp_path), '--threads', '4', '--deterministic'])
        ctx = runner.call_args.args[1]
        assert ctx.threads == 1
        assert ctx.progress is False


class TestRegimesCommand:
    def test_tabla_de_regimenes(self, capsys):
        assert main.main(['regimes', '--config', str(CONFIGS / 'impedance_torus.toml')]) == main.EXIT_OK
        out = capsys.readouterr().out
        assert 'ECFR' in out
        assert 'chi' in out and 'gamma' in out and 'xi' in out

    def test_configuracion_invalida(self, tmp_path):
        path = tmp_path / 'mala.toml'
        path.write_text("schema_version = 1\n", encoding='utf-8')
        assert main.main(['regimes', '--config', str(path)]) == main.EXIT_CONFIG


@pytest.mark.integration
class TestDeterminism:
    def test_csv_identicos(self, octa_config, tmp_path):
        outputs = []
        for name in ('a', 'b'):
            out = tmp_path / name
            assert main.main(['run', '--config', str(octa_config), '--out', str(out), '--deterministic']) == main.EXIT_OK
            outputs.append((out / 'identidades_octaedro.csv').read_bytes())
        assert outputs[0] == outputs[1]
