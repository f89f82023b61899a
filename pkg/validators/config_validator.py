"""
Validador de esquema para las configuraciones TOML de ejecución
"""
from numbers import Number
from pathlib import Path
from typing import Any, Dict, List, Optional

from pmchwt import settings
from pmchwt.config import GENERATORS, SCHEMA_VERSION

EXPERIMENT_KINDS = ['identities', 'condition_map', 'impedance', 'capacitance', 'skin_depth',
                    'field_probe', 'scaling', 'h_refinement', 'dominant_components',
                    'genus_defect', 'mie']

# Experimentos que necesitan un frill y los que aceptan onda plana
FRILL_KINDS = {'impedance', 'capacitance', 'dominant_components'}
FIELD_KINDS = {'skin_depth', 'field_probe', 'mie'}


class RunConfigValidator:
    """Valida una configuración de ejecución y reúne todas las violaciones de una vez"""

    # Esquema por tabla: tipo, obligatoriedad, rangos y valores permitidos
    SCHEMA = {
        'experiment': {
            'kind': {'type': str, 'required': True, 'allowed_values': EXPERIMENT_KINDS},
            'name': {'type': str},
            'tolerances': {'type': dict},
        },
        'mesh': {
            'path': {'type': str},
            'format': {'type': str, 'allowed_values': ['off', 'gmsh_msh_ascii']},
            'generator': {'type': str, 'allowed_values': sorted(GENERATORS)},
            'params': {'type': dict},
        },
        'material': {
            'eps_r_prime': {'type': Number, 'min': 1.0},
            'sigma': {'type': Number, 'min': 0.0},
            'mu_r': {'type': Number, 'min_exclusive': 0.0},
        },
        'excitation': {
            'type': {'type': str, 'required': True, 'allowed_values': ['frill', 'plane_wave', 'none']},
            'placement': {'type': str, 'allowed_values': ['inductive', 'capacitive']},
            'center': {'type': list, 'length': 3},
            'axis': {'type': list, 'length': 3},
            'radius': {'type': Number, 'min_exclusive': 0.0},
            'voltage': {'type': Number},
            'direction': {'type': list, 'length': 3},
            'polarization': {'type': list, 'length': 3},
            'amplitude': {'type': Number},
        },
        'sweep': {
            'axis': {'type': str, 'required': True,
                     'allowed_values': ['frequency', 'conductivity', 'mesh_size']},
            'start': {'type': Number, 'min_exclusive': 0.0},
            'stop': {'type': Number, 'min_exclusive': 0.0},
            'points': {'type': int, 'min': 2},
            'spacing': {'type': str, 'allowed_values': ['log', 'linear']},
            'values': {'type': list},
            'frequency_hz': {'type': Number, 'min_exclusive': 0.0},
            'conductivities': {'type': list},
            'parameter': {'type': str},
        },
        'solver': {
            'method': {'type': str, 'allowed_values': ['dense', 'gmres']},
            'tolerance': {'type': Number, 'min_exclusive': 0.0},
            'max_iterations': {'type': int, 'min': 1},
        },
        'preconditioner': {
            'mode': {'type': str, 'allowed_values': ['off', 'loopstar', 'projector', 'projector_suboptimal']},
            'variant': {'type': str, 'allowed_values': ['table', 'suboptimal', 'classical', 'unit']},
        },
        'output': {
            'directory': {'type': str},
            'probes': {'type': list},
            'line': {'type': dict},
            'cut': {'type': dict},
        },
    }

    REQUIRED_TABLES = ['experiment', 'mesh', 'sweep']

    def __init__(self, base_dir: Optional[Path] = None):
        self.base_dir = base_dir
        self.errors = []
        self.warnings = []

    def _violation(self, violations: List[Dict], field: str, message: str):
        violations.append({'field': field, 'message': message})
        self.errors.append(f"{field}: {message}")

    def validate(self, raw: Dict[str, Any]) -> Dict:
        """Valida el diccionario completo y devuelve todas las violaciones"""
        self.errors, self.warnings = [], []
        violations: List[Dict] = []

        version = raw.get('schema_version')
        if version != SCHEMA_VERSION:
            self._violation(violations, 'schema_version',
                            f"Versión de esquema {version!r}; se esperaba {SCHEMA_VERSION}")

        for table in self.REQUIRED_TABLES:
            if table not in raw:
                self._violation(violations, table, "Tabla obligatoria ausente")

        for table, schema in self.SCHEMA.items():
            if table in raw:
                if not isinstance(raw[table], dict):
                    self._violation(violations, table, "Debe ser una tabla")
                    continue
                self._validate_table(raw[table], schema, table, violations)

        extra = set(raw) - set(self.SCHEMA) - {'schema_version'}
        if extra:
            self.warnings.append(f"Tablas desconocidas ignoradas: {sorted(extra)}")

        experiment = raw.get('experiment') if isinstance(raw.get('experiment'), dict) else {}
        self._validate_mesh(raw.get('mesh'), violations)
        self._validate_sweep(raw.get('sweep'), experiment, violations)
        self._validate_excitation(raw.get('excitation'), experiment, violations)
        self._validate_tolerances(experiment.get('tolerances'), violations)

        return {
            'violations': violations,
            'warnings': list(self.warnings),
            'passed': not violations,
        }

    def _validate_table(self, data: Dict, schema: Dict, table: str, violations: List[Dict]):
        for key, spec in schema.items():
            name = f"{table}.{key}"
            if key not in data:
                if spec.get('required'):
                    self._violation(violations, name, "Campo obligatorio ausente")
                continue
            value = data[key]
            expected = spec['type']
            # bool es subclase de int: no se acepta como número
            if isinstance(value, bool) or not isinstance(value, expected):
                self._violation(violations, name, f"Tipo esperado {getattr(expected, '__name__', expected)}, "
                                                  f"encontrado {type(value).__name__}")
                continue
            if 'allowed_values' in spec and value not in spec['allowed_values']:
                self._violation(violations, name, f"Valor {value!r} no permitido; opciones: {spec['allowed_values']}")
            if 'min' in spec and value < spec['min']:
                self._violation(violations, name, f"Valor {value} menor que {spec['min']}")
            if 'min_exclusive' in spec and value <= spec['min_exclusive']:
                self._violation(violations, name, f"Valor {value} debe ser mayor que {spec['min_exclusive']}")
            if 'length' in spec and len(value) != spec['length']:
                self._violation(violations, name, f"Se esperaban {spec['length']} componentes")

        extra = set(data) - set(schema)
        if extra and table != 'experiment':
            self.warnings.append(f"Tabla {table}: campos desconocidos {sorted(extra)}")

    def _validate_mesh(self, mesh: Optional[Dict], violations: List[Dict]):
        if not isinstance(mesh, dict):
            return
        has_path, has_generator = 'path' in mesh, 'generator' in mesh
        if has_path == has_generator:
            self._violation(violations, 'mesh', "Indique exactamente uno de 'path' o 'generator'")
        if has_path and isinstance(mesh['path'], str):
            path = Path(mesh['path'])
            if self.base_dir is not None and not path.is_absolute():
                path = self.base_dir / path
            if not path.is_file():
                self._violation(violations, 'mesh.path', f"No existe la malla: {path}")

    def _validate_sweep(self, sweep: Optional[Dict], experiment: Dict, violations: List[Dict]):
        # La ausencia de la tabla ya se reporta como tabla obligatoria
        if sweep is None or not isinstance(sweep, dict):
            return
        if not sweep:
            self._violation(violations, 'sweep', "Barrido vacío")
            return

        if 'values' in sweep:
            values = sweep['values']
            if not isinstance(values, list) or len(values) < 2:
                self._violation(violations, 'sweep.values', "El barrido necesita al menos 2 puntos")
            elif not all(isinstance(v, Number) and not isinstance(v, bool) for v in values):
                self._violation(violations, 'sweep.values', "Todos los valores deben ser numéricos")
            else:
                steps = [b - a for a, b in zip(values, values[1:])]
                if not (all(s > 0 for s in steps) or all(s < 0 for s in steps)):
                    self._violation(violations, 'sweep.values', "Los valores deben ser estrictamente monótonos")
                if sweep.get('axis') != 'mesh_size' and any(v <= 0 for v in values):
                    self._violation(violations, 'sweep.values', "Los valores del barrido deben ser positivos")
                if sweep.get('axis') == 'conductivity' and any(v < 0 for v in values):
                    self._violation(violations, 'sweep.values', "Conductividad negativa")
        else:
            missing = [k for k in ('start', 'stop', 'points') if k not in sweep]
            if missing:
                self._violation(violations, 'sweep', f"Barrido vacío: faltan {missing} o 'values'")
            elif sweep['start'] == sweep['stop']:
                self._violation(violations, 'sweep.stop', "start y stop deben ser distintos")

        axis = sweep.get('axis')
        if axis in ('conductivity', 'mesh_size') and 'frequency_hz' not in sweep:
            self._violation(violations, 'sweep.frequency_hz', f"El eje '{axis}' necesita una frecuencia fija")
        if axis == 'mesh_size' and 'values' not in sweep:
            self._violation(violations, 'sweep.values', "El eje 'mesh_size' necesita valores explícitos")

        conductivities = sweep.get('conductivities')
        if isinstance(conductivities, list):
            if not conductivities:
                self._violation(violations, 'sweep.conductivities', "Lista de conductividades vacía")
            if any(not isinstance(s, Number) or s < 0 for s in conductivities):
                self._violation(violations, 'sweep.conductivities', "Conductividad negativa o no numérica")
        elif experiment.get('kind') == 'condition_map':
            self._violation(violations, 'sweep.conductivities', "El mapa de condición necesita conductividades")

    def _validate_excitation(self, excitation: Optional[Dict], experiment: Dict, violations: List[Dict]):
        kind = experiment.get('kind') if isinstance(experiment, dict) else None
        if not isinstance(excitation, dict):
            if kind in FRILL_KINDS or kind in FIELD_KINDS:
                self._violation(violations, 'excitation', f"El experimento '{kind}' necesita una excitación")
            return
        etype = excitation.get('type')
        if etype == 'frill':
            if 'placement' not in excitation:
                self._violation(violations, 'excitation.placement',
                                "La colocación (inductive/capacitive) es obligatoria para un frill")
            for key in ('center', 'axis', 'radius'):
                if key not in excitation:
                    self._violation(violations, f'excitation.{key}', "Campo obligatorio para un frill")
        elif etype == 'plane_wave':
            for key in ('direction', 'polarization'):
                if key not in excitation:
                    self._violation(violations, f'excitation.{key}', "Campo obligatorio para una onda plana")
        if kind in FRILL_KINDS and etype != 'frill':
            self._violation(violations, 'excitation.type', f"El experimento '{kind}' necesita un frill")
        if kind == 'mie' and etype != 'plane_wave':
            self._violation(violations, 'excitation.type', "El experimento 'mie' necesita una onda plana")

    def _validate_tolerances(self, tolerances: Optional[Dict], violations: List[Dict]):
        if not isinstance(tolerances, dict):
            return
        for key, value in tolerances.items():
            name = f'experiment.tolerances.{key}'
            if key not in settings.ACCEPTANCE:
                self._violation(violations, name, f"Cota desconocida; opciones: {sorted(settings.ACCEPTANCE)}")
            elif isinstance(value, bool) or not isinstance(value, Number) or value <= 0:
                self._violation(violations, name, "La cota debe ser un número positivo")

    def get_validation_report(self) -> str:
        """Genera un reporte de validación"""
        report = []

        if self.errors:
            report.append("❌ ERRORES DE VALIDACIÓN:")
            for error in self.errors:
                report.append(f"  - {error}")

        if self.warnings:
            report.append("⚠️  ADVERTENCIAS:")
            for warning in self.warnings:
                report.append(f"  - {warning}")

        if not self.errors and not self.warnings:
            report.append("✅ Todas las validaciones pasaron exitosamente")

        return "\n".join(report)
