"""
Funciones RWG primales, funciones duales de Buffa-Christiansen y matrices de Gram mixtas
"""
import logging
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List

import numpy as np
from scipy import sparse
from scipy.linalg import lu_factor, lu_solve

from pmchwt import settings
from pmchwt.errors import MismatchedMeshError, SingularGramError
from pmchwt.mesh_topology import (BarycentricRefinement, MeshConnectivity, TriangleMesh,
                                  build_connectivity)
from pmchwt.quadrature import triangle_rule

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RwgSpace:
    """
    Funciones RWG normalizadas por la longitud de arista (flujo unitario)

    f_n = ±(r − p)/(2A) sobre el triángulo más/menos; div f_n = ±1/A.
    """

    conn: MeshConnectivity
    plus_minus: np.ndarray
    free_vertices: np.ndarray
    support_areas: np.ndarray

    @property
    def mesh(self) -> TriangleMesh:
        return self.conn.mesh

    @property
    def dimension(self) -> int:
        return self.conn.n_edges

    @property
    def edge_lengths(self) -> np.ndarray:
        return self.conn.edge_lengths

    @property
    def triangle_edges(self) -> np.ndarray:
        return self.conn.triangle_edges

    @property
    def triangle_signs(self) -> np.ndarray:
        return self.conn.triangle_edge_signs

    def divergence(self, n: int) -> np.ndarray:
        """Divergencia superficial sobre (T+, T-)"""
        return np.array([1.0 / self.support_areas[n, 0], -1.0 / self.support_areas[n, 1]])

    def evaluate(self, n: int, side: int, points: np.ndarray) -> np.ndarray:
        """Valor de f_n en puntos del triángulo más (side=0) o menos (side=1)"""
        p = self.mesh.vertices[self.free_vertices[n, side]]
        sign = 1.0 if side == 0 else -1.0
        return sign * (np.atleast_2d(points) - p) / (2.0 * self.support_areas[n, side])

    @cached_property
    def star_matrix(self) -> sparse.csr_matrix:
        """Mapa triángulo → RWG con signo (+1 en T+, -1 en T-), forma (N_e, N_f)"""
        n_e, n_f = self.dimension, self.mesh.n_faces
        rows = np.repeat(np.arange(n_e), 2)
        cols = self.plus_minus.reshape(-1)
        vals = np.tile([1, -1], n_e)
        return sparse.csr_matrix((vals, (rows, cols)), shape=(n_e, n_f))

    def density(self, coefficients: np.ndarray, tri: np.ndarray, points: np.ndarray) -> np.ndarray:
        """
        Densidad de corriente Σ c_n f_n en puntos situados sobre los triángulos `tri`

        Args:
            coefficients: Coeficientes (N_e,) complejos o reales
            tri: Índice de triángulo por punto (P,)
            points: Puntos (P, 3)
        """
        tri = np.asarray(tri)
        corners = self.mesh.corners[tri]
        coeff = coefficients[self.triangle_edges[tri]] * self.triangle_signs[tri]
        diff = points[:, None, :] - corners
        return np.einsum('pi,pij->pj', coeff, diff) / (2.0 * self.mesh.areas[tri, None])


@dataclass(frozen=True, eq=False)
class BcSpace:
    """Funciones duales: combinaciones de RWG de la malla baricéntrica, una por arista primal"""

    refinement: BarycentricRefinement
    refined: RwgSpace
    coefficients: sparse.csr_matrix

    @property
    def dimension(self) -> int:
        return self.coefficients.shape[1]


@dataclass(frozen=True, eq=False)
class GramMatrices:
    """G_mn = ⟨n̂×f_m, g_n⟩ y 𝔾 = −Gᵀ, con factorización LU reutilizable"""

    G: np.ndarray
    Gd: np.ndarray
    condition_number: float

    @cached_property
    def _lu(self):
        return lu_factor(self.G)

    def solve_G(self, x: np.ndarray) -> np.ndarray:
        return lu_solve(self._lu, x)

    def solve_GT(self, x: np.ndarray) -> np.ndarray:
        return lu_solve(self._lu, x, trans=1)

    def solve_Gd(self, x: np.ndarray) -> np.ndarray:
        # 𝔾⁻¹ = −G⁻ᵀ
        return -lu_solve(self._lu, x, trans=1)

    def solve_GdT(self, x: np.ndarray) -> np.ndarray:
        # 𝔾⁻ᵀ = −G⁻¹
        return -lu_solve(self._lu, x)


def build_rwg(conn: MeshConnectivity) -> RwgSpace:
    """Una función RWG por arista, con triángulo más/menos y vértices libres"""
    mesh = conn.mesh
    pm = conn.edge_to_triangles
    n_e = conn.n_edges
    free = np.empty((n_e, 2), dtype=np.int64)
    for side in range(2):
        tri = pm[:, side]
        local = np.argmax(conn.triangle_edges[tri] == np.arange(n_e)[:, None], axis=1)
        free[:, side] = mesh.triangles[tri, local]
    return RwgSpace(conn, pm, free, mesh.areas[pm])


def _vertex_rings(refined_mesh: TriangleMesh, n_primal: int) -> Dict[int, List[int]]:
    """Hijos que contienen cada vértice primal, en orden cíclico alrededor de él"""
    tri = refined_mesh.triangles
    k = np.arange(len(tri)) % 6
    primal = np.where(k % 2 == 0, tri[:, 0], tri[:, 1])
    # vértice no primal y no baricentro: punto medio
    other = np.where(k % 2 == 0, tri[:, 1], tri[:, 0])
    centre = tri[:, 2]

    by_vertex: Dict[int, List[int]] = defaultdict(list)
    for t, v in enumerate(primal):
        by_vertex[int(v)].append(t)

    rings = {}
    for v in range(n_primal):
        children = by_vertex[v]
        radial: Dict[int, List[int]] = defaultdict(list)
        for t in children:
            radial[int(other[t])].append(t)
            radial[int(centre[t])].append(t)
        start = children[0]
        ring = [start]
        came_from = int(other[start])
        current = start
        for _ in range(len(children) - 1):
            through = int(centre[current]) if came_from == int(other[current]) else int(other[current])
            a, b = radial[through]
            current = b if a == current else a
            came_from = through
            ring.append(current)
        rings[v] = ring
    return rings


def build_bc(refinement: BarycentricRefinement, conn: MeshConnectivity) -> BcSpace:
    """
    Funciones de Buffa-Christiansen sobre el refinamiento baricéntrico

    Para la arista primal a→b el flujo sale de la celda dual de a y entra en la de b;
    cada media arista dual transporta flujo 1 y la carga se reparte por igual entre
    los 2·N_c triángulos de cada celda.
    """
    if refinement.parent is not conn.mesh:
        raise MismatchedMeshError("El refinamiento no procede de la malla de la conectividad")

    rmesh = refinement.mesh
    rconn = build_connectivity(rmesh)
    refined = build_rwg(rconn)
    n_v, n_e = conn.n_vertices, conn.n_edges
    n_rv = rmesh.n_vertices

    keys = rconn.edges[:, 0] * n_rv + rconn.edges[:, 1]

    def refined_edge(a: int, b: int) -> int:
        key = min(a, b) * n_rv + max(a, b)
        return int(np.searchsorted(keys, key))

    rings = _vertex_rings(rmesh, n_v)
    position = {v: {t: i for i, t in enumerate(ring)} for v, ring in rings.items()}
    child_of = lambda parent, v, m: _child(rmesh, parent, v, m)
    r_plus = rconn.edge_to_triangles[:, 0]

    rows, cols, vals = [], [], []
    for e in range(n_e):
        a, b = (int(x) for x in conn.edges[e])
        m = n_v + e
        t_plus, t_minus = (int(x) for x in conn.edge_to_triangles[e])
        c_plus, c_minus = n_v + n_e + t_plus, n_v + n_e + t_minus

        # medias aristas duales: flujo +1 de la celda de a a la de b
        for parent, c in ((t_plus, c_plus), (t_minus, c_minus)):
            eps = refined_edge(m, c)
            source_side = child_of(parent, a, m)
            rows.append(eps)
            cols.append(e)
            vals.append(1.0 if r_plus[eps] == source_side else -1.0)

        for v, sign in ((a, 1.0), (b, -1.0)):
            ring = rings[v]
            n_c = len(ring) // 2
            t_a = child_of(t_plus, v, m)
            t_b = child_of(t_minus, v, m)
            i_a, i_b = position[v][t_a], position[v][t_b]
            step = 1 if (i_a - 1) % len(ring) == i_b else -1
            prev = t_a
            for i in range(1, len(ring)):
                cur = ring[(i_a + step * i) % len(ring)]
                flux = sign * (i / n_c - 1.0)
                shared = _shared_edge(rmesh, prev, cur)
                eps = refined_edge(*shared)
                rows.append(eps)
                cols.append(e)
                vals.append(flux if r_plus[eps] == prev else -flux)
                prev = cur

    coefficients = sparse.csr_matrix((vals, (rows, cols)), shape=(rconn.n_edges, n_e))
    coefficients.eliminate_zeros()
    logger.debug(f"BC: {coefficients.nnz} coeficientes para {n_e} funciones")
    return BcSpace(refinement, refined, coefficients)


def _child(rmesh: TriangleMesh, parent: int, v: int, m: int) -> int:
    """Hijo del triángulo `parent` que contiene el vértice primal v y el punto medio m"""
    children = rmesh.triangles[6 * parent:6 * parent + 6]
    hit = np.nonzero(np.any(children == v, axis=1) & np.any(children == m, axis=1))[0]
    return 6 * parent + int(hit[0])


def _shared_edge(rmesh: TriangleMesh, t1: int, t2: int):
    common = np.intersect1d(rmesh.triangles[t1], rmesh.triangles[t2])
    return int(common[0]), int(common[1])


def _pairing(rwg: RwgSpace, bc: BcSpace, rotate_primal: bool) -> sparse.csr_matrix:
    """
    Integrales de ⟨n̂×f_m, f̂_ε⟩ (o ⟨n̂×f̂_ε, f_m⟩) por triángulo refinado, forma (N_e, N_e_ref)

    El integrando es cuadrático: la regla de grado 5 es exacta.
    """
    refinement = bc.refinement
    rmesh = refinement.mesh
    parent = refinement.child_parent
    bary, w = triangle_rule(3)

    child_corners = rmesh.corners
    parent_corners = rwg.mesh.corners[parent]
    normals = rwg.mesh.normals[parent]
    pts = np.einsum('qk,tkj->tqj', bary, child_corners)

    X = pts[:, :, None, :] - parent_corners[:, None, :, :]
    Y = pts[:, :, None, :] - child_corners[:, None, :, :]
    if rotate_primal:
        cross = np.cross(X[:, :, :, None, :], Y[:, :, None, :, :])
    else:
        cross = np.cross(Y[:, :, None, :, :], X[:, :, :, None, :])
    val = np.einsum('q,tqikj,tj->tik', w, cross, normals) * rmesh.areas[:, None, None]

    s_p = rwg.triangle_signs[parent]
    s_c = bc.refined.triangle_signs
    scale = (s_p[:, :, None] * s_c[:, None, :]
             / (4.0 * rwg.mesh.areas[parent, None, None] * rmesh.areas[:, None, None]))
    rows = np.broadcast_to(rwg.triangle_edges[parent][:, :, None], val.shape).ravel()
    cols = np.broadcast_to(bc.refined.triangle_edges[:, None, :], val.shape).ravel()
    return sparse.csr_matrix(((val * scale).ravel(), (rows, cols)),
                             shape=(rwg.dimension, bc.refined.dimension))


def assemble_gram(rwg: RwgSpace, bc: BcSpace) -> GramMatrices:
    """G por cuadratura exacta sobre la malla refinada; 𝔾 = −Gᵀ"""
    if bc.refinement.parent is not rwg.mesh:
        raise MismatchedMeshError("Los espacios RWG y BC proceden de mallas distintas")
    M = _pairing(rwg, bc, rotate_primal=True)
    G = np.asarray((M @ bc.coefficients).todense())
    cond = float(np.linalg.cond(G))
    if not np.isfinite(cond) or cond > settings.GRAM_COND_LIMIT:
        raise SingularGramError(f"Matriz de Gram singular (cond = {cond:.3e})")
    logger.info(f"Gram mixta {G.shape[0]}x{G.shape[1]}, cond = {cond:.3e}")
    return GramMatrices(G, -G.T, cond)


def dual_gram_check(rwg: RwgSpace, bc: BcSpace) -> np.ndarray:
    """⟨n̂×g_m, f_n⟩ calculado de forma independiente (debe coincidir con −Gᵀ)"""
    Mp = _pairing(rwg, bc, rotate_primal=False)
    return np.asarray((bc.coefficients.T @ Mp.T).todense())
