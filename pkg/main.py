#!/usr/bin/env python3
"""
MAIN.PY - ORQUESTADOR DE EXPERIMENTOS PMCHWT
Valida la configuración, ejecuta el experimento y escribe CSV, metadatos y reporte de ejecución
"""

import argparse
import json
import logging
import os
import platform
import sys
import tempfile
import time
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd
import scipy

import pmchwt
from pmchwt import settings
from pmchwt.config import SCHEMA_VERSION, load_run_config, read_config
from pmchwt.errors import ConfigError, PmchwtError
from pmchwt.experiments import RunContext, regime_table, run_experiment
from validators.config_validator import RunConfigValidator

logger = logging.getLogger('pmchwt.cli')

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2


def _jsonable(value: Any) -> Any:
    """Conversión para json.dump de tipos numpy, enums y rutas"""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return {'re': value.real, 'im': value.imag}
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    return str(value)


def write_atomic(path: Path, writer: Callable[[Any], None], mode: str = 'w'):
    """Escribe en un temporal del mismo directorio y lo renombra sobre el destino"""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix='.tmp')
    try:
        with os.fdopen(fd, mode, encoding='utf-8', newline='') as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: Path, data: Dict[str, Any]):
    write_atomic(path, lambda fh: json.dump(data, fh, indent=2, ensure_ascii=False, default=_jsonable))


def write_error_record(error: PmchwtError, out_dir: Optional[Path]) -> Dict[str, Any]:
    """Registro de error legible por máquina en stderr y en <out>/error.json"""
    record = error.to_record()
    print(json.dumps(record, ensure_ascii=False, default=_jsonable), file=sys.stderr)
    if out_dir is not None:
        try:
            write_json(out_dir / 'error.json', record)
        except OSError as exc:
            logger.warning(f"No se pudo escribir error.json en {out_dir}: {exc}")
    return record


def versions() -> Dict[str, str]:
    return {
        'pmchwt': pmchwt.__version__,
        'python': platform.python_version(),
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'pandas': pd.__version__,
    }


class PipelineOrchestrator:
    """Orquesta la ejecución de una configuración: validación, experimento y artefactos"""

    def __init__(self, config_path: str, out_dir: Optional[str] = None, threads: Optional[int] = None,
                 deterministic: bool = False):
        self.config_path = Path(config_path)
        self.out_override = Path(out_dir) if out_dir else None
        self.deterministic = deterministic
        self.threads = 1 if deterministic else (threads or settings.THREADS)
        self.start_time = time.time()
        self.results: Dict[str, Dict[str, Any]] = {}
        self.generated: List[str] = []
        self.config = None

    @property
    def out_dir(self) -> Path:
        if self.out_override is not None:
            return self.out_override
        if self.config is not None:
            return Path(self.config.output.directory)
        return Path(settings.OUTPUT_DIR)

    def print_header(self):
        """Imprime encabezado de la ejecución"""
        print("=" * 80)
        print("PMCHWT - EJECUCIÓN DE EXPERIMENTO")
        print("=" * 80)
        print(f"Inicio: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
        print(f"Configuración: {self.config_path}")
        print(f"Hilos: {self.threads}{' (modo determinista)' if self.deterministic else ''}")
        print("=" * 80)

    def _stage(self, name: str, func: Callable[[], Any]) -> Any:
        print(f"\n{'=' * 80}")
        print(f"ETAPA: {name}")
        print(f"{'=' * 80}")
        t0 = time.time()
        try:
            value = func()
        except PmchwtError as exc:
            self.results[name] = {'status': 'failed', 'error': exc.to_record(),
                                  'elapsed_seconds': round(time.time() - t0, 3)}
            print(f"❌ {name} - FALLÓ: {exc.message}")
            raise
        self.results[name] = {'status': 'ok', 'elapsed_seconds': round(time.time() - t0, 3)}
        print(f"✅ {name} - COMPLETADO ({time.time() - t0:.2f} s)")
        return value

    def load_config(self):
        self.config = load_run_config(self.config_path, RunConfigValidator(self.config_path.parent))
        print(f"📁 Experimento: {self.config.name} ({self.config.kind})")
        return self.config

    def execute(self):
        ctx = RunContext(threads=self.threads, progress=not self.deterministic)
        return run_experiment(self.config, ctx)

    def write_outputs(self, result) -> Dict[str, Path]:
        out = self.out_dir
        csv_path = out / f"{self.config.name}.csv"
        meta_path = out / f"{self.config.name}_metadata.json"
        write_atomic(csv_path, lambda fh: result.frame.to_csv(fh, index=False, float_format='%.12e'))

        metadata = {
            'schema_version': SCHEMA_VERSION,
            'experiment': {'kind': self.config.kind, 'name': self.config.name},
            'csv': csv_path.name,
            'config': self.config.raw,
            'regimes': result.regimes,
            'coefficients': result.coefficients,
            'summary': result.summary,
            'passed': result.passed,
            'tolerances': settings.tolerances(),
            'solver': {'method': self.config.solver.method, 'tolerance': self.config.solver.tolerance,
                       'max_iterations': self.config.solver.max_iterations},
            'threads': self.threads,
            'deterministic': self.deterministic,
            'versions': versions(),
            'wall_times': {name: r['elapsed_seconds'] for name, r in self.results.items()},
        }
        write_json(meta_path, metadata)
        self.generated += [str(csv_path), str(meta_path)]
        print(f"📊 {len(result.frame)} filas en {csv_path}")
        return {'csv': csv_path, 'metadata': meta_path}

    def generate_summary_report(self) -> Dict[str, Any]:
        """Genera el reporte de ejecución junto a los CSV"""
        elapsed_time = time.time() - self.start_time
        report = {
            'pipeline_execution': {
                'start_time': datetime.fromtimestamp(self.start_time).isoformat(),
                'end_time': datetime.now().isoformat(),
                'elapsed_seconds': round(elapsed_time, 2),
                'total_stages': len(self.results),
                'successful_stages': sum(1 for r in self.results.values() if r['status'] == 'ok'),
            },
            'stage_results': self.results,
            'generated_files': self.generated,
        }
        path = self.out_dir / 'pipeline_execution_report.json'
        write_json(path, report)

        print(f"\n📈 RESUMEN DE EJECUCIÓN:")
        print(f"   • Tiempo total: {elapsed_time:.2f} segundos")
        print(f"   • Etapas exitosas: {report['pipeline_execution']['successful_stages']}"
              f"/{report['pipeline_execution']['total_stages']}")
        for file in self.generated:
            print(f"     - {file}")
        print(f"\n📄 Reporte detallado: {path}")
        return report

    def run(self) -> int:
        """Ejecuta la configuración completa y devuelve el código de salida"""
        self.print_header()
        try:
            self._stage("Validación de configuración", self.load_config)
            result = self._stage("Experimento", self.execute)
            self._stage("Escritura de resultados", lambda: self.write_outputs(result))
        except ConfigError as exc:
            write_error_record(exc, self.out_dir)
            return EXIT_CONFIG
        except PmchwtError as exc:
            write_error_record(exc, self.out_dir)
            self.generate_summary_report()
            return EXIT_ERROR

        self.generate_summary_report()
        print("\n" + "=" * 80)
        if result.passed is False:
            print("⚠️  EXPERIMENTO COMPLETADO CON COMPROBACIONES FALLIDAS")
            for failure in result.summary.get('failures', []):
                print(f"   - {failure}")
        else:
            print("🎉 EXPERIMENTO COMPLETADO")
        print("=" * 80)
        return EXIT_OK


def command_validate(args) -> int:
    """Lista todas las violaciones de esquema sin ejecutar nada"""
    path = Path(args.config)
    try:
        raw = read_config(path)
    except ConfigError as exc:
        write_error_record(exc, None)
        return EXIT_CONFIG
    validator = RunConfigValidator(path.parent)
    result = validator.validate(raw)
    print(validator.get_validation_report())
    print(json.dumps(result, indent=2, ensure_ascii=False, default=_jsonable))
    return EXIT_OK if result['passed'] else EXIT_CONFIG


def command_regimes(args) -> int:
    """Imprime χ, γ, ξ y el régimen de cada punto del barrido"""
    try:
        config = load_run_config(args.config, RunConfigValidator(Path(args.config).parent))
        table = regime_table(config)
    except ConfigError as exc:
        write_error_record(exc, None)
        return EXIT_CONFIG
    except PmchwtError as exc:
        write_error_record(exc, None)
        return EXIT_ERROR
    with pd.option_context('display.max_rows', None, 'display.width', 160):
        print(table.to_string(index=False))
    return EXIT_OK


def command_run(args) -> int:
    orchestrator = PipelineOrchestrator(args.config, args.out, args.threads, args.deterministic)
    return orchestrator.run()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='pmchwt', description="Solver PMCHWT con precondicionadores "
                                                                 "de proyectores quasi-Helmholtz")
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help="Ejecuta un experimento")
    run.add_argument('--config', required=True, help="Archivo TOML de configuración")
    run.add_argument('--out', help="Directorio de salida (sustituye a output.directory)")
    run.add_argument('--threads', type=int, help="Hilos para el barrido")
    run.add_argument('--deterministic', action='store_true',
                     help="Un hilo y sin barras de progreso: CSV idénticos byte a byte")
    run.set_defaults(func=command_run)

    validate = sub.add_parser('validate', help="Valida una configuración sin ejecutarla")
    validate.add_argument('--config', required=True)
    validate.set_defaults(func=command_validate)

    regimes = sub.add_parser('regimes', help="Muestra χ, γ, ξ y el régimen de cada punto")
    regimes.add_argument('--config', required=True)
    regimes.set_defaults(func=command_regimes)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Función principal"""
    logging.basicConfig(level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
