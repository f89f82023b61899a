"""
Reglas de cuadratura sobre triángulos e integrales (casi) singulares del núcleo de Helmholtz
"""
import logging
from functools import lru_cache
from typing import Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from pmchwt import settings
from pmchwt.errors import QuadratureError

logger = logging.getLogger(__name__)

# Umbral |k|·distancia máxima por debajo del cual se usa extracción estática
LOW_FREQUENCY_LIMIT = 2.0
SERIES_LIMIT = 1e-3
ROW_CHUNK = 100_000
POLAR_NODE_BUDGET = 200_000


@lru_cache(maxsize=None)
def gauss_01(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre de n puntos en [0, 1]"""
    x, w = leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def triangle_rule(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Regla de Gauss colapsada con n² puntos

    Returns:
        (baricéntricas (n², 3), pesos que suman 1)
    """
    x, w = gauss_01(n)
    U, V = np.meshgrid(x, x, indexing='ij')
    WU, WV = np.meshgrid(w, w, indexing='ij')
    xs = U.ravel()
    ys = (V * (1.0 - U)).ravel()
    weights = (2.0 * WU * WV * (1.0 - U)).ravel()
    bary = np.stack([1.0 - xs - ys, xs, ys], axis=1)
    return bary, weights


@lru_cache(maxsize=None)
def graded_rule(n: int, q: int = 3) -> Tuple[np.ndarray, np.ndarray]:
    """
    Regla graduada hacia aristas y vértices (3 subtriángulos desde el baricentro, 3n² puntos)

    Para triángulos observadores que tocan al triángulo fuente: el integrando
    exterior es regular en el interior pero no en el borde.
    """
    t, w = gauss_01(n)
    u = 1.0 - (1.0 - t) ** q
    du = q * (1.0 - t) ** (q - 1)
    s = t ** q / (t ** q + (1.0 - t) ** q)
    ds = q * t ** (q - 1) * (1.0 - t) ** (q - 1) / (t ** q + (1.0 - t) ** q) ** 2

    U, S = np.meshgrid(u, s, indexing='ij')
    W = np.outer(w * u * du, w * ds)
    centre = np.full(3, 1.0 / 3.0)
    bary, weights = [], []
    for i in range(3):
        e_i, e_j = np.eye(3)[i], np.eye(3)[(i + 1) % 3]
        b = ((1.0 - U)[..., None] * centre
             + U[..., None] * ((1.0 - S)[..., None] * e_i + S[..., None] * e_j))
        bary.append(b.reshape(-1, 3))
        weights.append((2.0 / 3.0) * W.ravel())
    return np.vstack(bary), np.concatenate(weights)


def static_potentials(points: np.ndarray, corners: np.ndarray):
    """
    Integrales analíticas de 1/R sobre un triángulo, fila a fila

    Args:
        points: Puntos de observación (P, 3)
        corners: Vértices del triángulo fuente de cada fila (P, 3, 3)

    Returns:
        I0 = ∫1/R, Irho = ∫(ρ'−ρ)/R, grad = ∇_r ∫1/R y la proyección ρ
    """
    raw = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    n = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    d = np.einsum('pj,pj->p', points - corners[:, 0], n)
    rho = points - d[:, None] * n
    abs_d = np.abs(d)

    I0 = np.zeros(len(points))
    Irho = np.zeros((len(points), 3))
    sum_f_u = np.zeros((len(points), 3))
    sum_beta = np.zeros(len(points))
    tiny = 1e-30

    for i in range(3):
        va, vb = corners[:, i], corners[:, (i + 1) % 3]
        edge = vb - va
        length = np.linalg.norm(edge, axis=1, keepdims=True)
        l_hat = edge / length
        u_hat = np.cross(l_hat, n)
        s_minus = np.einsum('pj,pj->p', va - rho, l_hat)
        s_plus = np.einsum('pj,pj->p', vb - rho, l_hat)
        t0 = np.einsum('pj,pj->p', va - rho, u_hat)
        R0_sq = t0 ** 2 + d ** 2
        R_plus = np.sqrt(R0_sq + s_plus ** 2)
        R_minus = np.sqrt(R0_sq + s_minus ** 2)

        direct = np.log(np.maximum(R_plus + s_plus, tiny) / np.maximum(R_minus + s_minus, tiny))
        mirror = np.log(np.maximum(R_minus - s_minus, tiny) / np.maximum(R_plus - s_plus, tiny))
        f = np.where(s_plus + s_minus < 0, mirror, direct)

        beta = (np.arctan2(t0 * s_plus, R0_sq + abs_d * R_plus)
                - np.arctan2(t0 * s_minus, R0_sq + abs_d * R_minus))

        I0 += np.where(np.abs(t0) > 0, t0 * f, 0.0)
        sum_beta += beta
        Irho += 0.5 * u_hat * (R0_sq * f + s_plus * R_plus - s_minus * R_minus)[:, None]
        sum_f_u += u_hat * f[:, None]

    I0 -= abs_d * sum_beta
    grad = -sum_f_u - n * (np.sign(d) * sum_beta)[:, None]
    return I0, Irho, grad, rho


def _h2(k: complex, R: np.ndarray) -> np.ndarray:
    """(e^{-jkR} − 1 + jkR)/(4πR)"""
    kR = k * R
    small = np.abs(kR) < SERIES_LIMIT
    safe = np.where(small, 1.0, R)
    full = (np.exp(-1j * k * safe) - 1.0 + 1j * k * safe) / (4 * np.pi * safe)
    series = (-k ** 2 * R / 2 + 1j * k ** 3 * R ** 2 / 6 + k ** 4 * R ** 3 / 24) / (4 * np.pi)
    return np.where(small, series, full)


def _h_prime(k: complex, R: np.ndarray) -> np.ndarray:
    """[1 − (1 + jkR) e^{-jkR}]/(4πR²)"""
    kR = k * R
    small = np.abs(kR) < SERIES_LIMIT
    safe = np.where(small, 1.0, R)
    full = (1.0 - (1.0 + 1j * k * safe) * np.exp(-1j * k * safe)) / (4 * np.pi * safe ** 2)
    series = (-k ** 2 / 2 + 1j * k ** 3 * R / 3 + k ** 4 * R ** 2 / 8) / (4 * np.pi)
    return np.where(small, series, full)


def _low_frequency(points, corners, k, n_inner):
    I0, Irho, grad, rho = static_potentials(points, corners)
    g0 = I0 / (4 * np.pi)
    gr = (Irho + rho * I0[:, None]) / (4 * np.pi)
    V = grad / (4 * np.pi)

    area = 0.5 * np.linalg.norm(np.cross(corners[:, 1] - corners[:, 0],
                                         corners[:, 2] - corners[:, 0]), axis=1)
    centroid = corners.mean(axis=1)
    g0 = g0 - 1j * k * area / (4 * np.pi)
    gr = gr - 1j * k * (area[:, None] * centroid) / (4 * np.pi)

    bary, w = triangle_rule(n_inner)
    src = np.einsum('qk,pkj->pqj', bary, corners)
    diff = points[:, None, :] - src
    R = np.linalg.norm(diff, axis=2)
    wa = w[None, :] * area[:, None]
    h2 = _h2(k, R)
    g0 = g0 + np.sum(wa * h2, axis=1)
    gr = gr + np.einsum('pq,pqj->pj', wa * h2, src)
    hp = _h_prime(k, R) / np.where(R > 0, R, 1.0)
    V = V + np.einsum('pq,pqj->pj', wa * hp, diff)
    return g0, gr, V


def polar_node_count(layers: int, n_radial: int = 6, n_angular: int = 6) -> int:
    """Nodos por fila de polar_rule: 3 subtriángulos × (layers + 1) capas × n_radial × n_angular"""
    return 3 * (layers + 1) * n_radial * n_angular


def polar_rule(points: np.ndarray, corners: np.ndarray, layers: int,
               n_radial: int = 6, n_angular: int = 6):
    """
    Nodos y pesos polares alrededor de la proyección de cada punto

    Subtriángulos con signo (ρ, v_i, v_{i+1}) y capas radiales geométricas
    [2^{-l-1}, 2^{-l}] hacia ρ.

    Returns:
        (nodos (P, M, 3), pesos de área (P, M), distancia al plano d (P,), ρ (P, 3))
    """
    raw = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    n = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    d = np.einsum('pj,pj->p', points - corners[:, 0], n)
    rho = points - d[:, None] * n

    breaks = np.concatenate([[0.0], 2.0 ** -np.arange(layers, -1, -1)])
    xr, wr = gauss_01(n_radial)
    u = (breaks[:-1, None] + np.diff(breaks)[:, None] * xr).ravel()
    wu = (np.diff(breaks)[:, None] * wr).ravel()
    v, wv = gauss_01(n_angular)

    nodes, weights = [], []
    for i in range(3):
        va, vb = corners[:, i], corners[:, (i + 1) % 3]
        a = va - rho
        b = vb - va
        signed_area = 0.5 * np.einsum('pj,pj->p', np.cross(a, b), n)
        direction = a[:, None, :] + v[None, :, None] * b[:, None, :]
        p = rho[:, None, None, :] + u[None, :, None, None] * direction[:, None, :, :]
        wgt = 2.0 * signed_area[:, None, None] * (u * wu)[None, :, None] * wv[None, None, :]
        nodes.append(p.reshape(len(points), -1, 3))
        weights.append(wgt.reshape(len(points), -1))
    return np.concatenate(nodes, axis=1), np.concatenate(weights, axis=1), d, rho


def _polar_block(points, corners, k, layers):
    nodes, w, _, _ = polar_rule(points, corners, layers)
    diff = points[:, None, :] - nodes
    R = np.linalg.norm(diff, axis=2)
    G = np.exp(-1j * k * R) / (4 * np.pi * R)
    hp = _h_prime(k, R) / R
    return (np.sum(w * G, axis=1), np.einsum('pm,pmj->pj', w * G, nodes),
            np.einsum('pm,pmj->pj', w * hp, diff))


def _strongly_decaying(points, corners, k):
    """
    Núcleo completo por regla polar; el gradiente conserva la parte estática analítica

    Las filas se procesan en bloques de a lo sumo POLAR_NODE_BUDGET nodos.
    """
    diam = np.max(np.linalg.norm(corners - corners[:, [1, 2, 0]], axis=2), axis=1)
    layers_needed = np.ceil(np.log2(np.maximum(np.abs(k) * diam, 1.0))).astype(int) + 3
    if layers_needed.max() > settings.QUADRATURE_MAX_DEPTH:
        raise QuadratureError(
            f"Se necesitan {int(layers_needed.max())} capas radiales "
            f"(máximo {settings.QUADRATURE_MAX_DEPTH}) para |k| = {abs(k):.3e}")

    g0 = np.zeros(len(points), dtype=complex)
    gr = np.zeros((len(points), 3), dtype=complex)
    V = np.zeros((len(points), 3), dtype=complex)
    for layers in np.unique(layers_needed):
        rows = np.nonzero(layers_needed == layers)[0]
        step = max(1, POLAR_NODE_BUDGET // polar_node_count(int(layers)))
        for start in range(0, len(rows), step):
            idx = rows[start:start + step]
            g0[idx], gr[idx], V[idx] = _polar_block(points[idx], corners[idx], k, int(layers))

    _, _, grad, _ = static_potentials(points, corners)
    V += grad / (4 * np.pi)
    return g0, gr, V


def near_potentials(points: np.ndarray, corners: np.ndarray, k: complex, n_inner: int = 4):
    """
    g0 = ∫G, gr = ∫r'G y V = ∫∇_r G sobre el triángulo fuente de cada fila

    Con |k|·dmax ≤ 2 se usa extracción de la parte estática; si no, la regla polar
    (caso de decaimiento fuerte).
    """
    points = np.asarray(points, dtype=float)
    n_rows = len(points)
    g0 = np.zeros(n_rows, dtype=complex)
    gr = np.zeros((n_rows, 3), dtype=complex)
    V = np.zeros((n_rows, 3), dtype=complex)

    for start in range(0, n_rows, ROW_CHUNK):
        sl = slice(start, min(start + ROW_CHUNK, n_rows))
        p, c = points[sl], corners[sl]
        dmax = np.max(np.linalg.norm(c - p[:, None, :], axis=2), axis=1)
        low = np.abs(k) * dmax <= LOW_FREQUENCY_LIMIT
        if low.any():
            idx = np.nonzero(low)[0] + start
            g0[idx], gr[idx], V[idx] = _low_frequency(p[low], c[low], k, n_inner)
        if (~low).any():
            idx = np.nonzero(~low)[0] + start
            g0[idx], gr[idx], V[idx] = _strongly_decaying(p[~low], c[~low], k)
    return g0, gr, V
