"""
Experimentos ejecutables desde el CLI

Cada tipo de experimento recibe la RunConfig y devuelve un ExperimentResult con la
tabla que se escribirá como CSV (unidades en las cabeceras) y un resumen para los
metadatos de ejecución.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from pmchwt import settings
from pmchwt.bem_operators import MaterialParams, Wavenumber, plane_integral_check, scaling_probe
from pmchwt.config import RunConfig
from pmchwt.diagnostics import (ScalingReport, SweepPoint, dominant_component_report, h_refinement_study,
                                loopstar_block_scalings, map_points, preconditioned_scalings)
from pmchwt.errors import ConfigError
from pmchwt.excitation import frill_fields, frill_rhs, planewave_rhs
from pmchwt.field_eval import (CurrentCut, CurrentSolution, ProbeGrid, circuit_references, component_field,
                               current_density, extract_impedance, far_field, near_field, skin_depth_fit)
from pmchwt.mesh_topology import distance_to_surface
from pmchwt.mie import bhmie, relative_index
from pmchwt.pmchwt_system import (CoefficientSet, Discretization, ExcitationType, PmchwtSystem, PreconditionerMode,
                                  PreconditionerPair, RegimeParams, SolveResult, assemble_system,
                                  build_preconditioners, classify_regime, coefficients_for, condition_numbers,
                                  prepare_discretization, solve)
from validators.identity_validator import IdentityValidator

logger = logging.getLogger(__name__)


@dataclass
class RunContext:
    threads: int = 1
    progress: bool = True


@dataclass
class ExperimentResult:
    frame: pd.DataFrame
    summary: Dict[str, Any] = field(default_factory=dict)
    regimes: List[Dict[str, Any]] = field(default_factory=list)
    coefficients: List[Dict[str, Any]] = field(default_factory=list)
    passed: Optional[bool] = None


@dataclass(frozen=True, eq=False)
class PointSolution:
    point: SweepPoint
    regime: RegimeParams
    coefficients: Optional[CoefficientSet]
    system: PmchwtSystem
    pair: PreconditionerPair
    result: SolveResult
    solution: CurrentSolution


def sweep_points(cfg: RunConfig) -> List[SweepPoint]:
    """Producto frecuencia × material del barrido principal"""
    return [SweepPoint(2 * np.pi * float(f), mat) for f in cfg.frequencies() for mat in cfg.materials()]


def _inner_threads(ctx: RunContext, n_points: int) -> int:
    # Los puntos se reparten entre hilos; el ensamblado de cada punto va en uno
    return 1 if ctx.threads > 1 and n_points > 1 else ctx.threads


def _variant(cfg: RunConfig) -> str:
    if cfg.preconditioner.mode == PreconditionerMode.PROJECTOR_SUBOPTIMAL:
        return 'suboptimal'
    return cfg.preconditioner.variant


def _base_row(point: SweepPoint, reg: RegimeParams) -> Dict[str, Any]:
    return {
        'f_hz': point.omega / (2 * np.pi),
        'sigma_s_per_m': point.material.sigma,
        'regime': reg.regime.value,
        'chi': reg.chi,
        'gamma': reg.gamma,
        'xi': reg.xi,
    }


def _excitation_rhs(cfg: RunConfig, disc: Discretization) -> Callable[[float], Any]:
    kind = cfg.excitation.get('type')
    if kind == 'frill':
        frill = cfg.frill()
        return lambda omega: frill_rhs(frill, disc.rwg, omega)
    if kind == 'plane_wave':
        pw = cfg.plane_wave()
        return lambda omega: planewave_rhs(pw, disc.rwg, omega)
    raise ConfigError(f"El experimento '{cfg.kind}' necesita una excitación", field='excitation.type')


def _incident(cfg: RunConfig):
    if cfg.excitation.get('type') == 'frill':
        frill = cfg.frill()
        return lambda points, k: frill_fields(frill, points, k)
    pw = cfg.plane_wave()
    return lambda points, k: pw.fields(points, k)


def solve_point(cfg: RunConfig, disc: Discretization, point: SweepPoint, threads: int = 1) -> PointSolution:
    """Ensambla, precondiciona y resuelve un punto del barrido"""
    reg = classify_regime(point.omega, point.material, disc.mesh.characteristic_length)
    system = assemble_system(disc, point.material, point.omega, threads)
    e, h = _excitation_rhs(cfg, disc)(point.omega)
    coeffs = coefficients_for(reg, cfg.excitation_type, _variant(cfg))
    pair = build_preconditioners(coeffs, disc, cfg.excitation_type, cfg.preconditioner.mode, system)
    result = solve(system, pair, e, h, cfg.solver.method, cfg.solver.tolerance, cfg.solver.max_iterations)
    solution = CurrentSolution(result.j, result.m, point.omega, point.material, disc.rwg)
    logger.debug(f"f = {point.omega / (2 * np.pi):.4e} Hz, σ = {point.material.sigma:g}: "
                 f"{reg.regime.value}, residuo {result.residual:.2e}")
    return PointSolution(point, reg, coeffs, system, pair, result, solution)


def _solve_sweep(cfg: RunConfig, disc: Discretization, ctx: RunContext, desc: str) -> List[PointSolution]:
    points = sweep_points(cfg)
    inner = _inner_threads(ctx, len(points))
    disc.static_loop_leak  # antes de repartir los puntos entre hilos
    return map_points(lambda p: solve_point(cfg, disc, p, inner), points, ctx.threads, ctx.progress, desc)


def _bookkeeping(result: ExperimentResult, solved: List[PointSolution]) -> ExperimentResult:
    for ps in solved:
        result.regimes.append(ps.regime.as_dict())
        if ps.coefficients is not None:
            result.coefficients.append(ps.coefficients.as_dict())
    return result


def _geometry_param(cfg: RunConfig, name: str, default: float) -> float:
    return float(cfg.options.get(name, cfg.mesh.params.get(name, default)))


def _require_cut(cfg: RunConfig) -> CurrentCut:
    if cfg.output.cut is None:
        raise ConfigError(f"El experimento '{cfg.kind}' necesita un plano de corte", field='output.cut')
    return cfg.output.cut


def _report_result(report: ScalingReport) -> ExperimentResult:
    summary = report.summary()
    return ExperimentResult(
        frame=report.to_frame(),
        summary={'slopes': summary.to_dict('records'), 'checks': report.checks, 'notes': report.notes,
                 'failures': report.failures()},
        passed=report.passed,
    )


def _tolerance(cfg: RunConfig, name: str) -> float:
    return float(cfg.options.get('tolerances', {}).get(name, settings.ACCEPTANCE[name]))


def _with_acceptance(result: ExperimentResult, failures: List[str]) -> ExperimentResult:
    result.summary['failures'] = failures
    result.passed = not failures
    for failure in failures:
        logger.warning(f"Comprobación fallida: {failure}")
    return result


def _relative_check(frame: pd.DataFrame, column: str, tol: float, label: str) -> List[str]:
    """Filas cuyo error relativo supera la cota; las referencias no definidas (NaN) no cuentan"""
    values = frame[column]
    bad = frame[values.notna() & (values > tol)]
    return [f"{label}: error relativo {row[column]:.2%} > {tol:.0%} a f = {row['f_hz']:.3e} Hz, "
            f"σ = {row['sigma_s_per_m']:g} S/m" for _, row in bad.iterrows()]


# --- Experimentos ---

def run_identities(cfg: RunConfig, ctx: RunContext) -> ExperimentResult:
    disc = prepare_discretization(cfg.load_mesh())
    omega = 2 * np.pi * float(cfg.frequencies()[0])
    validator = IdentityValidator(disc, omega, ctx.threads)
    summary = validator.validate_all()
    frame = pd.DataFrame([{'identity': name, 'value': r['value'], 'bound': r['bound'], 'passed': r['passed']}
                          for name, r in summary['details'].items()])
    return ExperimentResult(frame, {k: v for k, v in summary.items() if k != 'details'},
                            passed=summary['overall_passed'])


def run_condition_map(cfg: RunConfig, ctx: RunContext) -> ExperimentResult:
    disc = prepare_discretization(cfg.load_mesh())
    L = disc.mesh.characteristic_length
    excitations = cfg.options.get('excitation_types', [cfg.excitation_type.value])
    grid = [(float(f), float(s), ex) for f in cfg.frequencies()
            for s in cfg.sweep.conductivities for ex in excitations]
    inner = _inner_threads(ctx, len(grid))
    disc.static_loop_leak  # antes de repartir los puntos entre hilos

    def evaluate(item):
        f, sigma, excitation = item
        mat = MaterialParams(cfg.material.eps_r_prime, sigma, cfg.material.mu_r)
        point = SweepPoint(2 * np.pi * f, mat)
        reg = classify_regime(point.omega, mat, L)
        system = assemble_system(disc, mat, point.omega, inner)
        coeffs = coefficients_for(reg, excitation, _variant(cfg))
        pair = build_preconditioners(coeffs, disc, ExcitationType(excitation), cfg.preconditioner.mode, system)
        conds = condition_numbers(system, pair)
        row = {**_base_row(point, reg), 'excitation': excitation,
               'cond_plain': conds['cond_plain'], 'cond_rescaled': conds['cond_rescaled'],
               'cond_preconditioned': conds['cond_preconditioned']}
        return row, reg.as_dict(), coeffs.as_dict()

    out = map_points(evaluate, grid, ctx.threads, ctx.progress, 'mapa de condición')
    frame = pd.DataFrame([row for row, _, _ in out])
    summary, failures = {}, []
    cond_max = _tolerance(cfg, 'cond_variation_max')
    rescaled_min = _tolerance(cfg, 'rescaled_variation_min')
    for excitation, group in frame.groupby('excitation'):
        variations = {
            'variation_preconditioned': float(group['cond_preconditioned'].max() / group['cond_preconditioned'].min()),
            'variation_rescaled': float(group['cond_rescaled'].max() / group['cond_rescaled'].min()),
            'variation_plain': float(group['cond_plain'].max() / group['cond_plain'].min()),
        }
        summary[excitation] = variations
        if variations['variation_preconditioned'] > cond_max:
            failures.append(f"{excitation}: cond(L Z̄ R) varía {variations['variation_preconditioned']:.1f}× "
                            f"(máximo {cond_max:g}×)")
        if variations['variation_rescaled'] < rescaled_min:
            failures.append(f"{excitation}: cond(Z̄) sólo varía {variations['variation_rescaled']:.2e}× "
                            f"(se esperaba al menos {rescaled_min:.0e}×)")
    result = ExperimentResult(frame, summary, [r for _, r, _ in out], [c for _, _, c in out])
    return _with_acceptance(result, failures)


def run_impedance(cfg: RunConfig, ctx: RunContext) -> ExperimentResult:
    disc = prepare_discretization(cfg.load_mesh())
    frill, cut = cfg.frill(), _require_cut(cfg)
    major = _geometry_param(cfg, 'major', 1.0)
    minor = _geometry_param(cfg, 'minor', 0.2)
    solved = _solve_sweep(cfg, disc, ctx, 'impedancia')

    rows = []
    for ps in solved:
        imp = extract_impedance(ps.solution, frill, cut)
        refs = circuit_references(ps.point.material.sigma, major, minor)
        R_ct = refs.get('R_ct', float('nan'))
        rows.append({**_base_row(ps.point, ps.regime),
                     'R_ohm': imp.R, 'L_henry': imp.L,
                     'R_ct_ohm': R_ct, 'L_ct_henry': refs['L_ct'], 'L_thin_ring_henry': refs['L_thin_ring'],
                     'rel_err_R': abs(imp.R - R_ct) / R_ct if np.isfinite(R_ct) else float('nan'),
                     'rel_err_L': abs(imp.L - refs['L_ct']) / refs['L_ct'],
                     'current_re_a': imp.current.real, 'current_im_a': imp.current.imag,
                     'residual': ps.result.residual})
    frame = pd.DataFrame(rows)
    summary = {'max_rel_err_R': float(frame['rel_err_R'].max()), 'max_rel_err_L': float(frame['rel_err_L'].max())}
    failures = (_relative_check(frame, 'rel_err_R', _tolerance(cfg, 'R_rel'), 'R')
                + _relative_check(frame, 'rel_err_L', _tolerance(cfg, 'L_rel'), 'L'))
    return _with_acceptance(_bookkeeping(ExperimentResult(frame, summary), solved), failures)


def run_capacitance(cfg: RunConfig, ctx: RunContext) -> ExperimentResult:
    disc = prepare_discretization(cfg.load_mesh())
    frill, cut = cfg.frill(), _require_cut(cfg)
    refs = circuit_references(plate_radius=_geometry_param(cfg, 'plate_radius', 4.0),
                              gap=_geometry_param(cfg, 'gap', 0.2))
    solved = _solve_sweep(cfg, disc, ctx, 'capacidad')

    rows = []
    for ps in solved:
        imp = extract_impedance(ps.solution, frill, cut)
        rows.append({**_base_row(ps.point, ps.regime),
                     'C_farad': imp.C, 'C_ct_farad': refs['C_ct'],
                     'rel_err_C': abs(imp.C - refs['C_ct']) / refs['C_ct'],
                     'residual': ps.result.residual})
    frame = pd.DataFrame(rows)
    summary = {'max_rel_err_C': float(frame['rel_err_C'].max()),
               'spread_C': float(frame['C_farad'].max() / frame['C_farad'].min())}
    failures = _relative_check(frame, 'rel_err_C', _tolerance(cfg, 'C_rel'), 'C')
    return _with_acceptance(_bookkeeping(ExperimentResult(frame, summary), solved), failures)


def _probe_grid(cfg: RunConfig, mesh) -> ProbeGrid:
    if cfg.output.probes:
        return ProbeGrid.from_points(mesh, cfg.output.probes)
    if cfg.output.line:
        line = cfg.output.line
        return ProbeGrid.line(mesh, line['start'], line['stop'], int(line.get('n', 20)))
    raise ConfigError("Indique 'output.probes' u 'output.line'", field='output.probes')


def run_skin_depth(cfg: RunConfig, ctx: RunContext) -> ExperimentResult:
    mesh = cfg.load_mesh()
    disc = prepare_discretization(mesh)
    probes = _probe_grid(cfg, mesh)
    if not probes.interior.all():
        raise ConfigError("Los puntos del perfil deben estar dentro del conductor", field='output.line')
    depth = distance_to_surface(mesh, probes.points)
    solved = _solve_sweep(cfg, disc, ctx, 'profundidad de piel')

    rows, fits = [], []
    for ps in solved:
        E, _ = near_field(ps.solution, probes)
        J = np.linalg.norm(current_density(ps.solution, E), axis=1)
        delta = ps.point.material.skin_depth(ps.point.omega)
        delta_fit = skin_depth_fit(depth, J)
        base = _base_row(ps.point, ps.regime)
        for d, j in zip(depth, J):
            rows.append({**base, 'record': 'profile', 'depth_m': d, 'J_abs_a_per_m2': j})
        fit = {**base, 'record': 'fit', 'delta_fit_m': delta_fit, 'delta_m': delta,
               'rel_err_delta': abs(delta_fit - delta) / delta}
        rows.append(fit)
        fits.append(fit)
    frame = pd.DataFrame(rows)
    summary = {'max_rel_err_delta': float(max(f['rel_err_delta'] for f in fits))}
    failures = _relative_check(pd.DataFrame(fits), 'rel_err_delta', _tolerance(cfg, 'skin_depth_rel'), 'δ')
    return _with_acceptance(_bookkeeping(ExperimentResult(frame, summary), solved), failures)


def run_field_probe(cfg: RunConfig, ctx: RunContext) -> ExperimentResult:
    mesh = cfg.load_mesh()
    disc = prepare_discretization(mesh)
    probes = _probe_grid(cfg, mesh)
    incident = _incident(cfg)
    with_components = bool(cfg.options.get('components', False))
    solved = _solve_sweep(cfg, disc, ctx, 'campos')

    rows = []
    for ps in solved:
        fields = [('total', *near_field(ps.solution, probes, incident))]
        if with_components:
            for current in 'jm':
                for subspace in ('LambdaH', 'Sigma'):
                    for part in ('re', 'im'):
                        E, H = component_field(ps.solution, disc.projectors, current, subspace, part, probes)
                        fields.append((f'{current}_{subspace}_{part}', E, H))
        base = _base_row(ps.point, ps.regime)
        for name, E, H in fields:
            for p, inside, e, h in zip(probes.points, probes.interior, E, H):
                row = {**base, 'component': name, 'x_m': p[0], 'y_m': p[1], 'z_m': p[2],
                       'region': 'interior' if inside else 'exterior',
                       'E_abs_v_per_m': float(np.linalg.norm(e)), 'H_abs_a_per_m': float(np.linalg.norm(h))}
                for axis, value in zip('xyz', e):
                    row[f'E{axis}_re_v_per_m'], row[f'E{axis}_im_v_per_m'] = value.real, value.imag
                for axis, value in zip('xyz', h):
                    row[f'H{axis}_re_a_per_m'], row[f'H{axis}_im_a_per_m'] = value.real, value.imag
                rows.append(row)
    return _bookkeeping(ExperimentResult(pd.DataFrame(rows)), solved)


def run_scaling(cfg: RunConfig, ctx: RunContext) -> ExperimentResult:
    disc = prepare_discretization(cfg.load_mesh())
    points = sweep_points(cfg)
    axis = cfg.options.get('axis', 'chi')
    kind = cfg.options.get('report', 'loopstar')
    if kind == 'loopstar':
        report = loopstar_block_scalings(disc, points, axis, threads=ctx.threads, progress=ctx.progress)
    elif kind == 'preconditioned':
        report = preconditioned_scalings(disc, points, cfg.excitation_type, _variant(cfg),
                                         cfg.preconditioner.mode, axis, ctx.threads, ctx.progress)
    elif kind == 'operators':
        L = disc.mesh.characteristic_length
        values = [classify_regime(p.omega, p.material, L).chi for p in points]
        probe = scaling_probe(disc.rwg, [Wavenumber.exterior(p.omega) for p in points], values, 'chi',
                              ctx.threads)
        report = ScalingReport('chi', probe['table'], probe['slopes'])
        for p in points:
            if p.material.sigma > 0:
                check = plane_integral_check(Wavenumber.interior(p.omega, p.material).k)
                report.checks[f"plano a f = {p.omega / (2 * np.pi):.3e} Hz"] = bool(check['relative_error'] < 1e-6)
    else:
        raise ConfigError(f"Informe de escalado desconocido: {kind}", field='experiment.report')
    return _report_result(report)


def run_h_refinement(cfg: RunConfig, ctx: RunContext) -> ExperimentResult:
    meshes = [cfg.load_mesh(**{cfg.sweep.parameter: int(v)}) for v in cfg.sweep.values]
    omega = 2 * np.pi * float(cfg.sweep.frequency_hz)
    report = h_refinement_study(meshes, omega, cfg.material, cfg.excitation_type, ctx.threads, ctx.progress)
    return _report_result(report)


def run_dominant_components(cfg: RunConfig, ctx: RunContext) -> ExperimentResult:
    disc = prepare_discretization(cfg.load_mesh())
    solved = _solve_sweep(cfg, disc, ctx, 'componentes dominantes')
    regimes = {ps.regime.regime for ps in solved}
    if len(regimes) > 1:
        logger.warning(f"El barrido cruza varios regímenes ({sorted(r.value for r in regimes)}); "
                       f"se comparan las expectativas del punto de menor frecuencia")
    lowest = min(solved, key=lambda ps: ps.point.omega)
    report = dominant_component_report([ps.solution for ps in solved], disc.projectors, cfg.excitation_type,
                                       lowest.regime.regime, [ps.coefficients for ps in solved])
    return _bookkeeping(_report_result(report), solved)


def run_genus_defect(cfg: RunConfig, ctx: RunContext) -> ExperimentResult:
    disc = prepare_discretization(cfg.load_mesh())
    points = sweep_points(cfg)
    frames, summary, passed = [], {}, True
    for variant in cfg.options.get('variants', ['suboptimal', 'table']):
        report = preconditioned_scalings(disc, points, cfg.excitation_type, variant, PreconditionerMode.PROJECTOR,
                                         'chi', ctx.threads, ctx.progress, blocks=False)
        frame = report.to_frame()
        frame.insert(0, 'variant', variant)
        frames.append(frame)
        summary[variant] = {'slopes': report.summary().to_dict('records'), 'failures': report.failures()}
        passed = passed and report.passed
    return ExperimentResult(pd.concat(frames, ignore_index=True), summary, passed=passed)


def run_mie(cfg: RunConfig, ctx: RunContext) -> ExperimentResult:
    mesh = cfg.load_mesh()
    disc = prepare_discretization(mesh)
    pw = cfg.plane_wave()
    radius = _geometry_param(cfg, 'radius', 1.0)
    n_angles = int(cfg.options.get('n_angles', 19))
    theta = np.linspace(0.0, np.pi, n_angles)
    d, p = pw.direction, pw.polarization
    planes = {'parallel': p, 'perpendicular': np.cross(d, p)}
    solved = _solve_sweep(cfg, disc, ctx, 'Mie')

    rows, errors = [], []
    for ps in solved:
        k0 = Wavenumber.exterior(ps.point.omega).k.real
        mat = ps.point.material
        amps = bhmie(k0 * radius, relative_index(mat.eps_r_prime, mat.sigma, ps.point.omega, mat.mu_r), theta)
        for plane, u in planes.items():
            directions = np.cos(theta)[:, None] * d + np.sin(theta)[:, None] * u
            bem = np.linalg.norm(far_field(ps.solution, directions), axis=1)
            S = amps.S2 if plane == 'parallel' else amps.S1
            mie = abs(pw.amplitude) * np.abs(S) / k0
            errors.append((bem - mie, mie))
            for t, b, m in zip(theta, bem, mie):
                rows.append({**_base_row(ps.point, ps.regime), 'ka': k0 * radius, 'plane': plane,
                             'theta_deg': np.degrees(t), 'E_far_bem_v': b, 'E_far_mie_v': m})
    diff = np.concatenate([e for e, _ in errors])
    ref = np.concatenate([m for _, m in errors])
    rms = float(np.sqrt(np.mean(diff ** 2)) / np.sqrt(np.mean(ref ** 2)))
    tol = _tolerance(cfg, 'mie_rms')
    failures = [f"campo lejano: error RMS {rms:.2%} > {tol:.0%} frente a la serie de Mie"] if rms > tol else []
    result = _bookkeeping(ExperimentResult(pd.DataFrame(rows), {'rms_relative_error': rms}), solved)
    return _with_acceptance(result, failures)


EXPERIMENTS: Dict[str, Callable[[RunConfig, RunContext], ExperimentResult]] = {
    'identities': run_identities,
    'condition_map': run_condition_map,
    'impedance': run_impedance,
    'capacitance': run_capacitance,
    'skin_depth': run_skin_depth,
    'field_probe': run_field_probe,
    'scaling': run_scaling,
    'h_refinement': run_h_refinement,
    'dominant_components': run_dominant_components,
    'genus_defect': run_genus_defect,
    'mie': run_mie,
}


def run_experiment(cfg: RunConfig, ctx: Optional[RunContext] = None) -> ExperimentResult:
    ctx = ctx or RunContext(threads=settings.THREADS)
    try:
        runner = EXPERIMENTS[cfg.kind]
    except KeyError:
        raise ConfigError(f"Tipo de experimento desconocido: {cfg.kind}", field='experiment.kind') from None
    logger.info(f"Ejecutando experimento '{cfg.name}' ({cfg.kind})")
    return runner(cfg, ctx)


def regime_table(cfg: RunConfig) -> pd.DataFrame:
    """χ, γ, ξ y régimen de cada punto del barrido (subcomando `regimes`)"""
    if cfg.sweep.axis == 'mesh_size':
        meshes = [cfg.load_mesh(**{cfg.sweep.parameter: int(v)}) for v in cfg.sweep.values]
        omega = 2 * np.pi * float(cfg.sweep.frequency_hz)
        rows = [{'mesh_value': v, **_base_row(SweepPoint(omega, cfg.material),
                                              classify_regime(omega, cfg.material, m.characteristic_length))}
                for v, m in zip(cfg.sweep.values, meshes)]
        return pd.DataFrame(rows)
    L = cfg.load_mesh().characteristic_length
    conductivities = cfg.sweep.conductivities if cfg.kind == 'condition_map' else None
    points = sweep_points(cfg)
    if conductivities is not None:
        points = [SweepPoint(p.omega, MaterialParams(cfg.material.eps_r_prime, float(s), cfg.material.mu_r))
                  for p in points for s in conductivities]
    return pd.DataFrame([_base_row(p, classify_regime(p.omega, p.material, L)) for p in points])
