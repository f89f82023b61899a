"""
Pruebas de las reglas de cuadratura y de los potenciales cercanos
"""
import numpy as np
import pytest

from pmchwt import quadrature
from pmchwt.quadrature import graded_rule, near_potentials, polar_node_count, polar_rule, triangle_rule

TRIANGLE = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def _points_over_triangle(n, height=0.05, seed=0):
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(0.05, 0.45, size=(2, n))
    points = np.stack([a, b, np.full(n, height)], axis=1)
    return points, np.repeat(TRIANGLE[None], n, axis=0)


class TestRules:
    @pytest.mark.parametrize('rule', [triangle_rule(4), graded_rule(8), graded_rule(24)])
    def test_pesos_suman_uno(self, rule):
        bary, w = rule
        assert w.sum() == pytest.approx(1.0, rel=1e-8)
        assert np.allclose(bary.sum(axis=1), 1.0)
        assert (bary >= -1e-14).all()

    def test_tamano_graduada(self):
        bary, w = graded_rule(24)
        assert len(w) == len(bary) == 3 * 24 ** 2


class TestPolarRule:
    def test_numero_de_nodos(self):
        points, corners = _points_over_triangle(4)
        nodes, w, d, _ = polar_rule(points, corners, 5)
        assert nodes.shape == (4, polar_node_count(5), 3)
        assert np.allclose(d, 0.05)

    def test_pesos_suman_el_area(self):
        points, corners = _points_over_triangle(3)
        _, w, _, _ = polar_rule(points, corners, 4)
        assert np.allclose(w.sum(axis=1), 0.5)


class TestNearPotentials:
    """Decaimiento fuerte: la regla polar se aplica por bloques acotados en nodos"""

    K = 1.0e3 * (1.0 - 1.0j)

    def test_bloques_acotados(self, mocker):
        points, corners = _points_over_triangle(300)
        spy = mocker.spy(quadrature, '_polar_block')
        near_potentials(points, corners, self.K)
        assert spy.call_count > 1
        for call in spy.call_args_list:
            block_points, _, _, layers = call.args
            assert len(block_points) * polar_node_count(layers) <= quadrature.POLAR_NODE_BUDGET

    def test_bloques_no_cambian_el_resultado(self, mocker):
        points, corners = _points_over_triangle(300, seed=1)
        blocked = near_potentials(points, corners, self.K)
        mocker.patch('pmchwt.quadrature.POLAR_NODE_BUDGET', 10 ** 9)
        single = near_potentials(points, corners, self.K)
        for a, b in zip(blocked, single):
            assert np.allclose(a, b, rtol=1e-12, atol=1e-14 * np.abs(b).max())

    def test_baja_frecuencia_finita(self):
        points, corners = _points_over_triangle(10)
        for values in near_potentials(points, corners, 0j):
            assert np.all(np.isfinite(values))
