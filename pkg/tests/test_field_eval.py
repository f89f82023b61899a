"""
Pruebas de evaluación de campos, corrientes de corte y parámetros concentrados
"""
import numpy as np
import pytest

from pmchwt import settings
from pmchwt.bem_operators import MaterialParams, Wavenumber
from pmchwt.errors import DimensionMismatchError, ProbeTooCloseError, ZeroCurrentError
from pmchwt.excitation import FrillSource, PlaneWave, planewave_rhs
from pmchwt.field_eval import (_radiate, CurrentCut, CurrentSolution, ProbeGrid, component_current, component_field,
                               current_density,
                               circuit_references, cut_current, extract_impedance, far_field, near_field,
                               skin_depth_fit)
from pmchwt.pmchwt_system import (ExcitationType, assemble_system, build_preconditioners, classify_regime,
                                  coefficients_for, prepare_discretization, solve)

DIELECTRIC = MaterialParams(eps_r_prime=4.0)


def _random_solution(disc, seed=0, omega=1e7):
    rng = np.random.default_rng(seed)
    n = disc.size
    j = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    m = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return CurrentSolution(j, m, omega, DIELECTRIC, disc.rwg)


class TestCurrentSolution:
    def test_dimension(self, sphere_disc):
        with pytest.raises(DimensionMismatchError):
            CurrentSolution(np.zeros(3), np.zeros(sphere_disc.size), 1.0, DIELECTRIC, sphere_disc.rwg)

    def test_escalado(self, sphere_disc):
        sol = _random_solution(sphere_disc)
        assert np.allclose(sol.scaled(2j).m, 2j * sol.m)

    def test_componentes_suman_la_solucion(self, sphere_disc):
        """Las ocho componentes (j|m) × (ΛH|Σ) × (re|im) reconstruyen la solución"""
        sol = _random_solution(sphere_disc)
        j = np.zeros_like(sol.j)
        m = np.zeros_like(sol.m)
        for current in ('j', 'm'):
            for subspace in ('LambdaH', 'Sigma'):
                for part in ('re', 'im'):
                    piece = component_current(sol, sphere_disc.projectors, current, subspace, part)
                    j += piece.j
                    m += piece.m
        assert np.allclose(j, sol.j)
        assert np.allclose(m, sol.m)


class TestProbeGrid:
    """Región de cada punto y distancia mínima a la superficie"""

    def test_region(self, sphere1):
        grid = ProbeGrid.from_points(sphere1, [[0, 0, 0], [0, 0, 3.0]])
        assert grid.interior.tolist() == [True, False]
        assert len(grid) == 2

    def test_punto_sobre_la_superficie(self, sphere1):
        with pytest.raises(ProbeTooCloseError) as exc:
            ProbeGrid.from_points(sphere1, [sphere1.vertices[0]])
        assert exc.value.field == 'output.probes'

    def test_linea_y_plano(self, sphere1):
        assert len(ProbeGrid.line(sphere1, [0, 0, -0.5], [0, 0, 0.5], 5)) == 5
        grid = ProbeGrid.plane(sphere1, [2, -1, -1], [0, 2, 0], [0, 0, 2], 3, 4)
        assert len(grid) == 12
        assert not grid.interior.any()


class TestFields:
    def test_sin_corrientes_solo_incidente(self, sphere_disc):
        zeros = np.zeros(sphere_disc.size, dtype=complex)
        sol = CurrentSolution(zeros, zeros, 1e7, DIELECTRIC, sphere_disc.rwg)
        pw = PlaneWave(direction=[0, 0, 1], polarization=[1, 0, 0])
        grid = ProbeGrid.from_points(sphere_disc.mesh, [[0, 0, 0], [0, 0, 2.0]])
        E, H = near_field(sol, grid, incident=pw.fields)
        assert np.allclose(E[0], 0) and np.allclose(H[0], 0)
        assert np.allclose(np.abs(E[1]), [1, 0, 0])

    def test_campo_lejano_transversal(self, sphere_disc):
        sol = _random_solution(sphere_disc)
        directions = np.random.default_rng(1).standard_normal((10, 3))
        F = far_field(sol, directions)
        r_hat = directions / np.linalg.norm(directions, axis=1, keepdims=True)
        assert np.allclose(np.einsum('dj,dj->d', F, r_hat), 0, atol=1e-10 * np.abs(F).max())

    def test_densidad_de_corriente(self, sphere_disc):
        sol = CurrentSolution(np.zeros(sphere_disc.size), np.zeros(sphere_disc.size), 1.0,
                              MaterialParams(sigma=5.0), sphere_disc.rwg)
        J = current_density(sol, np.array([[1.0, 0, 0]]))
        assert J[0, 0] == pytest.approx(5.0 + 1j * settings.EPS0)

    def test_campos_por_componente_suman_el_total(self, sphere_disc):
        sol = _random_solution(sphere_disc, seed=3)
        grid = ProbeGrid.from_points(sphere_disc.mesh, [[0.0, 0.0, 0.1], [0.0, 2.0, 0.5]])
        E_total, H_total = near_field(sol, grid)
        E_sum = np.zeros_like(E_total)
        H_sum = np.zeros_like(H_total)
        for current in 'jm':
            for subspace in ('LambdaH', 'Sigma'):
                for part in ('re', 'im'):
                    E, H = component_field(sol, sphere_disc.projectors, current, subspace, part, grid)
                    E_sum += E
                    H_sum += H
        assert np.allclose(E_sum, E_total, atol=1e-9 * np.abs(E_total).max())
        assert np.allclose(H_sum, H_total, atol=1e-9 * np.abs(H_total).max())

    @pytest.mark.slow
    def test_esfera_dielectrica_cuasiestatica(self, sphere2):
        """
        Esfera dieléctrica en campo casi uniforme: E interior = 3/(ε + 2)·E₀ y
        los campos radiados por (j, m) con k₀ cancelan al incidente en el interior
        """
        disc = prepare_discretization(sphere2)
        omega = 2 * np.pi * 1e6
        system = assemble_system(disc, DIELECTRIC, omega, threads=1)
        pw = PlaneWave(direction=[0, 0, 1], polarization=[1, 0, 0])
        e, h = planewave_rhs(pw, disc.rwg, omega)
        reg = classify_regime(omega, DIELECTRIC, sphere2.characteristic_length)
        pair = build_preconditioners(coefficients_for(reg, ExcitationType.INDUCTIVE), disc,
                                     ExcitationType.INDUCTIVE, system=system)
        result = solve(system, pair, e, h)
        sol = CurrentSolution(result.j, result.m, omega, DIELECTRIC, disc.rwg)

        grid = ProbeGrid.from_points(sphere2, [[0, 0, 0], [0.2, 0.1, -0.2]])
        E, _ = near_field(sol, grid)
        assert np.allclose(E[:, 0].real, 3.0 / (4.0 + 2.0), rtol=0.08)

        k0 = Wavenumber.exterior(omega)
        Es, _ = _radiate(disc.rwg, grid.points, sol.j, sol.m, k0)
        Ei, _ = pw.fields(grid.points, k0)
        assert np.abs(Es + Ei).max() < 0.08


class TestCutAndImpedance:
    """Corriente a través de un plano y Z = V/I"""

    def test_corriente_de_lazo_no_cruza_un_corte_cerrado(self, sphere_disc):
        """Un corte completo de la esfera separa dos piezas: el flujo de una corriente solenoidal es nulo"""
        coeffs = sphere_disc.incidence.Lambda @ np.random.default_rng(4).standard_normal(sphere_disc.conn.n_vertices)
        scale = np.abs(coeffs).max() * 2 * np.pi
        I = cut_current(sphere_disc.rwg, coeffs.astype(complex), CurrentCut([0, 0, 0.1], [0, 0, 1]))
        assert abs(I) < 1e-10 * scale

    def test_linealidad(self, sphere_disc):
        sol = _random_solution(sphere_disc)
        cut = CurrentCut([0, 0, 0.05], [1, 0, 0], half=[0, 1, 0])
        assert cut_current(sphere_disc.rwg, 3 * sol.j, cut) == pytest.approx(3 * cut_current(sphere_disc.rwg, sol.j, cut))

    def test_corriente_nula(self, sphere_disc):
        zeros = np.zeros(sphere_disc.size, dtype=complex)
        sol = CurrentSolution(zeros, zeros, 1e3, DIELECTRIC, sphere_disc.rwg)
        frill = FrillSource(center=[0, 0, 0], axis=[0, 0, 1], radius=1.5)
        with pytest.raises(ZeroCurrentError):
            extract_impedance(sol, frill, CurrentCut([0, 0, 0], [0, 0, 1]))

    def test_impedancia(self, sphere_disc, mocker):
        sol = _random_solution(sphere_disc, omega=100.0)
        mocker.patch('pmchwt.field_eval.cut_current', return_value=2.0 - 1.0j)
        frill = FrillSource(center=[0, 0, 0], axis=[0, 0, 1], radius=1.5, voltage=5.0)
        result = extract_impedance(sol, frill, CurrentCut([0, 0, 0], [0, 0, 1]))
        assert result.Z == pytest.approx(5.0 / (2.0 - 1.0j))
        assert result.R == pytest.approx(2.0)
        assert result.L == pytest.approx(1.0 / 100.0)
        assert result.C == pytest.approx(-0.2 / 100.0)


class TestReferences:
    def test_profundidad_ajustada(self):
        depth = np.linspace(0, 1e-3, 10)
        assert skin_depth_fit(depth, 7.0 * np.exp(-depth / 2e-4)) == pytest.approx(2e-4)

    def test_perfil_creciente(self):
        assert skin_depth_fit([0, 1, 2], [1, 2, 4]) == float('inf')

    def test_referencias_de_circuito(self):
        refs = circuit_references(sigma=1.0, major=1.0, minor=0.2, plate_radius=2.0, gap=0.2)
        assert refs['R_ct'] == pytest.approx(50.0)
        assert refs['L_ct'] == pytest.approx(1.807e-6)
        assert refs['L_thin_ring'] == pytest.approx(settings.MU0 * (np.log(40.0) - 2.0))
        assert refs['C_ct'] == pytest.approx(settings.EPS0 * np.pi * 4.0 / 0.2)
        assert 'R_ct' not in circuit_references()
