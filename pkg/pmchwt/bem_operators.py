"""
Matrices de Galerkin de los operadores EFIO (T_A, T_Φ) y MFIO (K) para k complejo

Ensamblado por pares de triángulos (T ≤ T'): cuadratura de Gauss en pares lejanos,
potenciales analíticos o regla polar en pares cercanos.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import sparse

from pmchwt import settings
from pmchwt.basis_spaces import RwgSpace
from pmchwt.errors import CoincidentPointsError, QuadratureError
from pmchwt.quadrature import gauss_01, graded_rule, near_potentials, triangle_rule
from pmchwt.slopes import fit_slope

logger = logging.getLogger(__name__)

NEAR_FACTOR = 2.0
MID_FACTOR = 6.0
COPLANAR_TOL = 1e-12
PAIR_CHUNK = 2_000
# Orden de la regla graduada en pares con vértice o arista común; ΛᵀK₀Λ cae por debajo de 1e-6 con 24
TOUCHING_ORDER = 24
TOUCHING_ORDER_SEDR = 8
NEAR_POINT_BUDGET = 200_000


@dataclass(frozen=True)
class MaterialParams:
    """Material del interior: ε_r′, σ (S/m) y μ_r"""

    eps_r_prime: float = 1.0
    sigma: float = 0.0
    mu_r: float = 1.0

    def relative_permittivity(self, omega: float) -> complex:
        """ε₁/ε₀ = ε_r′ − jσ/(ωε₀)"""
        return complex(self.eps_r_prime, -self.sigma / (omega * settings.EPS0))

    def skin_depth(self, omega: float) -> float:
        if self.sigma == 0:
            return float('inf')
        return float(np.sqrt(2.0 / (omega * self.sigma * settings.MU0 * self.mu_r)))


@dataclass(frozen=True)
class Wavenumber:
    """Número de onda con convención e^{-jkR} (Im k ≤ 0) e impedancia del medio"""

    k: complex
    eta: complex
    medium: str = 'exterior'

    @classmethod
    def exterior(cls, omega: float) -> 'Wavenumber':
        return cls(complex(omega / settings.C0), complex(settings.ETA0), 'exterior')

    @classmethod
    def interior(cls, omega: float, material: MaterialParams) -> 'Wavenumber':
        eps = material.relative_permittivity(omega)
        k = omega / settings.C0 * np.sqrt(eps * material.mu_r + 0j)
        eta = settings.ETA0 * np.sqrt(material.mu_r / eps + 0j)
        return cls(complex(k), complex(eta), 'interior')

    @classmethod
    def static(cls) -> 'Wavenumber':
        return cls(0j, complex(settings.ETA0), 'static')


@dataclass(frozen=True, eq=False)
class OperatorMatrices:
    """T_A, T_Φ sin prefactores y K en valor principal"""

    TA: np.ndarray
    TPhi: np.ndarray
    K: np.ndarray
    wavenumber: Wavenumber

    @property
    def T(self) -> np.ndarray:
        k = self.wavenumber.k
        return -1j * k * self.TA + self.TPhi / (1j * k)


def greens(k: complex, r, rp) -> complex:
    """G_k(r, r') = e^{-jkR}/(4πR)"""
    k = k.k if isinstance(k, Wavenumber) else k
    R = float(np.linalg.norm(np.asarray(r, float) - np.asarray(rp, float)))
    if R == 0.0:
        raise CoincidentPointsError("G_k no está definida para r = r'")
    return complex(np.exp(-1j * k * R) / (4 * np.pi * R))


def _classify_pairs(space: RwgSpace, k: complex):
    """Pares T ≤ T' con su clase: 0 lejano, 1 intermedio, 2 cercano, 3 con vértice común"""
    mesh = space.mesh
    n_f = mesh.n_faces
    T, Tp = np.triu_indices(n_f)
    dist = np.linalg.norm(mesh.centroids[T] - mesh.centroids[Tp], axis=1)
    diam = np.maximum(mesh.diameters[T], mesh.diameters[Tp])

    keep = np.abs(k.imag) * (dist - diam) <= settings.DECAY_CUTOFF
    T, Tp, dist, diam = T[keep], Tp[keep], dist[keep], diam[keep]

    incidence = sparse.csr_matrix(
        (np.ones(3 * n_f), (np.repeat(np.arange(n_f), 3), mesh.triangles.ravel())),
        shape=(n_f, mesh.n_vertices))
    touching = sparse.triu(incidence @ incidence.T).tocoo()
    touching_keys = np.sort(touching.row.astype(np.int64) * n_f + touching.col)

    keys = T.astype(np.int64) * n_f + Tp
    pos = np.clip(np.searchsorted(touching_keys, keys), 0, len(touching_keys) - 1)
    is_touching = touching_keys[pos] == keys

    kind = np.zeros(len(T), dtype=int)
    kind[dist < MID_FACTOR * diam] = 1
    kind[dist < NEAR_FACTOR * diam] = 2
    kind[is_touching] = 3
    return T, Tp, kind


def _coplanar(mesh, T, Tp) -> np.ndarray:
    n, n_p = mesh.normals[T], mesh.normals[Tp]
    parallel = np.abs(np.einsum('pj,pj->p', n, n_p)) > 1.0 - COPLANAR_TOL
    offset = np.abs(np.einsum('pj,pj->p', mesh.centroids[Tp] - mesh.centroids[T], n))
    return parallel & (offset < COPLANAR_TOL * mesh.characteristic_length)


def _far_moments(mesh, T, Tp, k, n):
    bary, w = triangle_rule(n)
    r = np.einsum('qk,pkj->pqj', bary, mesh.corners[T])
    rp = np.einsum('qk,pkj->pqj', bary, mesh.corners[Tp])
    wa = w[None, :] * mesh.areas[T][:, None]
    wb = w[None, :] * mesh.areas[Tp][:, None]
    W = wa[:, :, None] * wb[:, None, :]

    diff = r[:, :, None, :] - rp[:, None, :, :]
    R = np.linalg.norm(diff, axis=3)
    if np.any(R == 0):
        raise CoincidentPointsError("Puntos de cuadratura coincidentes en un par lejano")
    E = np.exp(-1j * k * R)
    G = W * E / (4 * np.pi * R)
    g = -W * (1.0 + 1j * k * R) * E / (4 * np.pi * R ** 3)

    M0 = G.sum(axis=(1, 2))
    Mr = np.einsum('pab,paj->pj', G, r)
    Mrp = np.einsum('pab,pbj->pj', G, rp)
    Mrrp = np.einsum('pab,paj,pbj->p', G, r, rp)
    W0 = np.einsum('pab,pabj->pj', g, diff)
    W1 = -np.einsum('pab,pabj->pj', g, np.cross(r[:, :, None, :], rp[:, None, :, :]))
    return M0, Mr, Mrp, Mrrp, W0, W1


def _near_block(mesh, T, Tp, k, bary, w):
    n_q = len(w)
    r = np.einsum('qk,pkj->pqj', bary, mesh.corners[T])
    wa = w[None, :] * mesh.areas[T][:, None]
    src = np.repeat(mesh.corners[Tp], n_q, axis=0)
    g0, gr, V = near_potentials(r.reshape(-1, 3), src, k)
    g0 = g0.reshape(-1, n_q)
    gr = gr.reshape(-1, n_q, 3)
    V = V.reshape(-1, n_q, 3)

    M0 = np.sum(wa * g0, axis=1)
    Mr = np.einsum('pq,pqj->pj', wa * g0, r)
    Mrp = np.einsum('pq,pqj->pj', wa, gr)
    Mrrp = np.einsum('pq,pqj,pqj->p', wa, r, gr)
    W0 = np.einsum('pq,pqj->pj', wa, V)
    W1 = np.einsum('pq,pqj->pj', wa, np.cross(r, V))
    return M0, Mr, Mrp, Mrrp, W0, W1


def _near_moments(mesh, T, Tp, k, rule):
    """Momentos por pares en bloques de a lo sumo NEAR_POINT_BUDGET puntos de observación"""
    bary, w = rule
    step = max(1, NEAR_POINT_BUDGET // len(w))
    blocks = [_near_block(mesh, T[s:s + step], Tp[s:s + step], k, bary, w)
              for s in range(0, len(T), step)]
    return tuple(np.concatenate(parts, axis=0) for parts in zip(*blocks))


def _local_blocks(mesh, T, Tp, moments):
    """Bloques locales 3×3 de T_A y K a partir de los momentos del par"""
    M0, Mr, Mrp, Mrrp, W0, W1 = moments
    p = mesh.corners[T]
    q = mesh.corners[Tp]
    A = (Mrrp[:, None, None]
         - np.einsum('pj,pbj->pb', Mr, q)[:, None, :]
         - np.einsum('paj,pj->pa', p, Mrp)[:, :, None]
         + np.einsum('paj,pbj->pab', p, q) * M0[:, None, None])
    pw = np.einsum('paj,pj->pa', p, W1)
    qw = np.einsum('pbj,pj->pb', q, W1)
    cross = np.cross(q[:, None, :, :], p[:, :, None, :])
    Kl = pw[:, :, None] - qw[:, None, :] + np.einsum('pj,pabj->pab', W0, cross)

    scale = 1.0 / (4.0 * mesh.areas[T] * mesh.areas[Tp])
    return A * scale[:, None, None], Kl * scale[:, None, None], M0


def _pair_chunk(space: RwgSpace, T, Tp, kind, k):
    mesh = space.mesh
    out_A = np.zeros((len(T), 3, 3), dtype=complex)
    out_K = np.zeros((len(T), 3, 3), dtype=complex)
    out_S = np.zeros(len(T), dtype=complex)
    sedr = np.abs(k) * mesh.diameters.max() > 2.0
    for code in (0, 1, 2, 3):
        sel = kind == code
        if not sel.any():
            continue
        a, b = T[sel], Tp[sel]
        if code == 0:
            moments = _far_moments(mesh, a, b, k, 3)
        elif code == 1:
            moments = _far_moments(mesh, a, b, k, 5)
        elif code == 2:
            moments = _near_moments(mesh, a, b, k, triangle_rule(6))
        else:
            moments = _near_moments(mesh, a, b, k, graded_rule(TOUCHING_ORDER_SEDR if sedr else TOUCHING_ORDER))
        A, Kl, S = _local_blocks(mesh, a, b, moments)
        out_A[sel], out_K[sel], out_S[sel] = A, Kl, S

    out_K[_coplanar(mesh, T, Tp)] = 0.0
    self_pair = T == Tp
    out_A[self_pair] = 0.5 * (out_A[self_pair] + out_A[self_pair].transpose(0, 2, 1))
    return out_A, out_K, out_S


def assemble_operators(space: RwgSpace, k: Wavenumber, threads: Optional[int] = None) -> OperatorMatrices:
    """
    T_A, T_Φ y K con prueba de Galerkin ⟨f_m, ·⟩ (equivalente a ⟨n̂×f_m, n̂×·⟩)

    Args:
        space: Espacio RWG
        k: Número de onda del medio
        threads: Hilos para el ensamblado por bloques de pares; la reducción sigue
            el orden de los bloques, así que el resultado no depende del número de hilos
    """
    kv = k.k
    mesh = space.mesh
    threads = settings.THREADS if threads is None else max(1, threads)
    T, Tp, kind = _classify_pairs(space, kv)
    logger.debug(f"k = {kv:.4g}: {len(T)} pares, {int(np.sum(kind >= 2))} cercanos")

    chunks = [slice(s, min(s + PAIR_CHUNK, len(T))) for s in range(0, len(T), PAIR_CHUNK)]
    work = lambda sl: _pair_chunk(space, T[sl], Tp[sl], kind[sl], kv)
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(sl) for sl in chunks]

    n_e, n_f = space.dimension, mesh.n_faces
    TA = np.zeros((n_e, n_e), dtype=complex)
    K = np.zeros((n_e, n_e), dtype=complex)
    S = np.zeros((n_f, n_f), dtype=complex)
    edges, signs = space.triangle_edges, space.triangle_signs

    for sl, (A, Kl, Sv) in zip(chunks, results):
        a, b = T[sl], Tp[sl]
        sign = signs[a][:, :, None] * signs[b][:, None, :]
        A, Kl = A * sign, Kl * sign
        rows = np.broadcast_to(edges[a][:, :, None], A.shape)
        cols = np.broadcast_to(edges[b][:, None, :], A.shape)
        off = a != b
        np.add.at(TA, (rows, cols), A)
        np.add.at(TA, (cols[off], rows[off]), A[off])
        np.add.at(K, (rows, cols), Kl)
        np.add.at(K, (cols[off], rows[off]), Kl[off])
        np.add.at(S, (a, b), Sv)
        np.add.at(S, (b[off], a[off]), Sv[off])

    B = (space.star_matrix @ sparse.diags(1.0 / mesh.areas)).tocsr()
    TPhi = -(B @ (B @ S.T).T)
    return OperatorMatrices(TA, np.asarray(TPhi), K, k)


def scaling_probe(space: RwgSpace, wavenumbers: Sequence[Wavenumber], axis: Sequence[float],
                  axis_name: str = 'chi', threads: Optional[int] = None) -> Dict[str, Any]:
    """
    Normas ‖T_A/L‖, ‖T_Φ·L‖, ‖K‖ y ‖K − K₀‖ a lo largo de un barrido y sus pendientes log-log
    """
    L = space.mesh.characteristic_length
    static = assemble_operators(space, Wavenumber.static(), threads)
    rows: List[Dict[str, float]] = []
    for value, k in zip(axis, wavenumbers):
        ops = assemble_operators(space, k, threads)
        rows.append({
            axis_name: float(value),
            'norm_TA_over_L': float(np.linalg.norm(ops.TA, 2) / L),
            'norm_TPhi_times_L': float(np.linalg.norm(ops.TPhi, 2) * L),
            'norm_K': float(np.linalg.norm(ops.K, 2)),
            'norm_K_ext': float(np.linalg.norm(ops.K - static.K, 2)),
        })
    table = pd.DataFrame(rows)
    slopes = {col: fit_slope(table[axis_name], table[col]) for col in table.columns if col != axis_name}
    return {'table': table, 'slopes': slopes}


def plane_integral_check(k: complex, n_points: int = 16) -> Dict[str, complex]:
    """
    ∫ G_k sobre un plano infinito comparado con 1/(2jk)

    Para k = (1 − j)/δ el módulo es δ/(2√2).
    """
    k = complex(k.k if isinstance(k, Wavenumber) else k)
    if k.imag >= 0:
        raise QuadratureError("La integral sobre el plano solo converge con Im(k) < 0")
    rho_max = (settings.DECAY_CUTOFF + 3.0) / abs(k.imag)
    n_panels = int(np.ceil(abs(k) * rho_max / 2.0)) + 1
    x, w = gauss_01(n_points)
    edges = np.linspace(0.0, rho_max, n_panels + 1)
    rho = (edges[:-1, None] + np.diff(edges)[:, None] * x).ravel()
    wr = (np.diff(edges)[:, None] * w).ravel()
    # 2πρ · e^{-jkρ}/(4πρ) = e^{-jkρ}/2
    numeric = complex(np.sum(wr * 0.5 * np.exp(-1j * k * rho)))
    analytic = 1.0 / (2j * k)
    return {
        'numeric': numeric,
        'analytic': analytic,
        'relative_error': abs(numeric - analytic) / abs(analytic),
        'magnitude': abs(numeric),
    }
