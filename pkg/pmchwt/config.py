"""
Configuración de ejecución: lectura del TOML y conversión a RunConfig
"""
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from pmchwt import mesh_generators, settings
from pmchwt.bem_operators import MaterialParams
from pmchwt.errors import ConfigError
from pmchwt.excitation import FrillSource, PlaneWave
from pmchwt.field_eval import CurrentCut
from pmchwt.mesh_topology import TriangleMesh, load_mesh
from pmchwt.pmchwt_system import ExcitationType, PreconditionerMode

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

GENERATORS = {
    'icosphere': mesh_generators.icosphere,
    'octahedron': mesh_generators.octahedron,
    'torus': mesh_generators.torus,
    'revolved_sphere': mesh_generators.revolved_sphere,
    'capacitor': mesh_generators.capacitor,
    'box': mesh_generators.box,
}


def read_config(path: Union[str, Path]) -> Dict[str, Any]:
    """Lee el TOML; los errores de lectura se convierten en ConfigError"""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"No existe el archivo de configuración: {path}", field='config')
    try:
        with open(path, 'rb') as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML inválido en {path}: {exc}", field='config') from exc


@dataclass(frozen=True)
class MeshSpec:
    path: Optional[str] = None
    format: Optional[str] = None
    generator: Optional[str] = None
    params: Dict[str, Any] = field(default_factory=dict)

    def load(self, base_dir: Optional[Path] = None, **overrides) -> TriangleMesh:
        if self.generator:
            return GENERATORS[self.generator](**{**self.params, **overrides})
        path = Path(self.path)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        if not path.is_file():
            raise ConfigError(f"No existe la malla: {path}", field='mesh.path')
        return load_mesh(path, self.format)


@dataclass(frozen=True)
class SweepSpec:
    """Puntos del barrido principal; `conductivities` da el segundo eje del mapa de condición"""

    axis: str
    values: np.ndarray
    frequency_hz: Optional[float] = None
    conductivities: Optional[np.ndarray] = None
    parameter: str = 'level'


@dataclass(frozen=True)
class SolverOptions:
    method: str = 'dense'
    tolerance: float = settings.GMRES_TOL
    max_iterations: int = 2000


@dataclass(frozen=True)
class PreconditionerSpec:
    mode: PreconditionerMode = PreconditionerMode.PROJECTOR
    variant: str = 'table'


@dataclass(frozen=True)
class OutputSpec:
    directory: str = settings.OUTPUT_DIR
    probes: Optional[List[List[float]]] = None
    line: Optional[Dict[str, Any]] = None
    cut: Optional[CurrentCut] = None


@dataclass(frozen=True)
class RunConfig:
    kind: str
    name: str
    mesh: MeshSpec
    material: MaterialParams
    excitation: Dict[str, Any]
    sweep: SweepSpec
    solver: SolverOptions
    preconditioner: PreconditionerSpec
    output: OutputSpec
    options: Dict[str, Any]
    raw: Dict[str, Any]
    base_dir: Optional[Path] = None

    @property
    def excitation_type(self) -> ExcitationType:
        return ExcitationType(self.excitation.get('placement', 'inductive'))

    def frill(self) -> FrillSource:
        ex = self.excitation
        if ex.get('type') != 'frill':
            raise ConfigError("La configuración no define un frill", field='excitation.type')
        return FrillSource(center=ex['center'], axis=ex['axis'], radius=ex['radius'],
                           voltage=ex.get('voltage', 1.0), placement=ex['placement'])

    def plane_wave(self) -> PlaneWave:
        ex = self.excitation
        if ex.get('type') != 'plane_wave':
            raise ConfigError("La configuración no define una onda plana", field='excitation.type')
        return PlaneWave(direction=ex['direction'], polarization=ex['polarization'],
                         amplitude=ex.get('amplitude', 1.0))

    def load_mesh(self, **overrides) -> TriangleMesh:
        return self.mesh.load(self.base_dir, **overrides)

    def frequencies(self) -> np.ndarray:
        if self.sweep.axis == 'frequency':
            return self.sweep.values
        return np.array([self.sweep.frequency_hz])

    def materials(self) -> List[MaterialParams]:
        if self.sweep.axis == 'conductivity':
            return [MaterialParams(self.material.eps_r_prime, float(s), self.material.mu_r)
                    for s in self.sweep.values]
        return [self.material]


def sweep_values(sweep: Dict[str, Any]) -> np.ndarray:
    """Valores explícitos o `points` valores entre `start` y `stop` (logarítmicos por defecto)"""
    if 'values' in sweep:
        return np.asarray(sweep['values'], dtype=float)
    start, stop, points = sweep['start'], sweep['stop'], int(sweep['points'])
    if sweep.get('spacing', 'log') == 'linear':
        return np.linspace(start, stop, points)
    return np.logspace(np.log10(start), np.log10(stop), points)


def build_run_config(raw: Dict[str, Any], base_dir: Optional[Path] = None) -> RunConfig:
    """Convierte un diccionario ya validado en RunConfig"""
    try:
        exp = raw['experiment']
        mesh = raw.get('mesh', {})
        mat = raw.get('material', {})
        sweep = raw.get('sweep', {})
        solver = raw.get('solver', {})
        pre = raw.get('preconditioner', {})
        out = raw.get('output', {})

        cut = None
        if 'cut' in out:
            cut = CurrentCut(point=out['cut']['point'], normal=out['cut']['normal'],
                             half=out['cut'].get('half'))
        conductivities = sweep.get('conductivities')
        options = {k: v for k, v in exp.items() if k not in ('kind', 'name')}
        return RunConfig(
            kind=exp['kind'],
            name=exp.get('name', exp['kind']),
            mesh=MeshSpec(path=mesh.get('path'), format=mesh.get('format'),
                          generator=mesh.get('generator'), params=dict(mesh.get('params', {}))),
            material=MaterialParams(mat.get('eps_r_prime', 1.0), mat.get('sigma', 0.0), mat.get('mu_r', 1.0)),
            excitation=dict(raw.get('excitation', {'type': 'none'})),
            sweep=SweepSpec(
                axis=sweep.get('axis', 'frequency'),
                values=sweep_values(sweep),
                frequency_hz=sweep.get('frequency_hz'),
                conductivities=None if conductivities is None else np.asarray(conductivities, dtype=float),
                parameter=sweep.get('parameter', 'level')),
            solver=SolverOptions(solver.get('method', 'dense'), solver.get('tolerance', settings.GMRES_TOL),
                                 solver.get('max_iterations', 2000)),
            preconditioner=PreconditionerSpec(PreconditionerMode(pre.get('mode', 'projector')),
                                              pre.get('variant', 'table')),
            output=OutputSpec(out.get('directory', settings.OUTPUT_DIR), out.get('probes'),
                              out.get('line'), cut),
            options=options,
            raw=raw,
            base_dir=base_dir,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"Configuración incompleta o mal formada: {exc}", field='config') from exc


def load_run_config(path: Union[str, Path], validator=None) -> RunConfig:
    """
    Lee, valida y convierte una configuración

    Args:
        validator: Objeto con `validate(raw) -> dict`; si el resultado no pasa se lanza
            ConfigError con todas las violaciones
    """
    path = Path(path)
    raw = read_config(path)
    if validator is not None:
        result = validator.validate(raw)
        if not result['passed']:
            first = result['violations'][0]
            raise ConfigError(f"{len(result['violations'])} violaciones de esquema; primera: {first['message']}",
                              violations=result['violations'], field=first['field'])
    config = build_run_config(raw, base_dir=path.parent)
    logger.info(f"Configuración '{config.name}' ({config.kind}) cargada desde {path}")
    return config


def mesh_file_missing(config: RunConfig) -> bool:
    if config.mesh.generator:
        return False
    path = Path(config.mesh.path)
    if config.base_dir is not None and not path.is_absolute():
        path = config.base_dir / path
    return not path.is_file()

