"""
Matrices de incidencia loop/star y proyectores cuasi-Helmholtz primales y duales
"""
import inspect
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, cg, splu

from pmchwt import settings
from pmchwt.errors import DimensionMismatchError, SolverConvergenceError
from pmchwt.mesh_topology import MeshConnectivity

logger = logging.getLogger(__name__)

_CG_TOL_KEYWORD = 'rtol' if 'rtol' in inspect.signature(cg).parameters else 'tol'


class ProjectorKind(str, Enum):
    P_SIGMA = 'P_Sigma'
    P_LAMBDA_H = 'P_LambdaH'
    PD_LAMBDA = 'Pd_Lambda'
    PD_SIGMA_H = 'Pd_SigmaH'


@dataclass(frozen=True, eq=False)
class IncidenceMatrices:
    """Λ (N_e × N_v) y Σ (N_e × N_f) con entradas en {-1, 0, 1}"""

    Lambda: sparse.csr_matrix
    Sigma: sparse.csr_matrix

    @property
    def n_edges(self) -> int:
        return self.Lambda.shape[0]


def build_incidence(conn: MeshConnectivity) -> IncidenceMatrices:
    """
    Σ[n, T] = ±1 en el triángulo más/menos de la arista n;
    Λ[n, v] = +1 si v es el origen de la arista canónica, -1 si es su extremo.
    """
    n_e = conn.n_edges
    rows = np.repeat(np.arange(n_e), 2)
    signs = np.tile(np.array([1, -1], dtype=np.int64), n_e)

    Lambda = sparse.csr_matrix((signs, (rows, conn.edges.reshape(-1))),
                               shape=(n_e, conn.n_vertices))
    Sigma = sparse.csr_matrix((signs, (rows, conn.edge_to_triangles.reshape(-1))),
                              shape=(n_e, conn.n_faces))
    return IncidenceMatrices(Lambda, Sigma)


class LaplacianPseudoInverse:
    """
    Aplica L⁺ a vectores ortogonales (tras deflación) al vector de unos

    Por debajo de LU_THRESHOLD incógnitas se factoriza la Laplaciana reducida (nodo 0
    fijado) con un paso de refinamiento iterativo; por encima se usa gradiente conjugado
    con deflación.
    """

    def __init__(self, laplacian: sparse.spmatrix, lu_threshold: Optional[int] = None):
        self.laplacian = sparse.csr_matrix(laplacian, dtype=float)
        self.size = self.laplacian.shape[0]
        threshold = settings.LU_THRESHOLD if lu_threshold is None else lu_threshold
        self.direct = self.size <= threshold
        self._lu = None
        if self.direct and self.size > 1:
            reduced = self.laplacian[1:, 1:].tocsc()
            self._lu = splu(reduced)
        elif not self.direct:
            logger.warning(f"Laplaciana de {self.size} nodos: se usa CG en lugar de LU")

    @staticmethod
    def _deflate(x: np.ndarray) -> np.ndarray:
        return x - x.mean(axis=0, keepdims=True)

    def _reduced_solve(self, b: np.ndarray) -> np.ndarray:
        x = np.zeros_like(b)
        x[1:] = self._lu.solve(np.ascontiguousarray(b[1:]))
        return x

    def _solve_real(self, b: np.ndarray) -> np.ndarray:
        b = self._deflate(b)
        if self.size == 1:
            return np.zeros_like(b)
        if self.direct:
            x = self._reduced_solve(b)
            x += self._reduced_solve(b - self.laplacian @ x)
            x = self._deflate(x)
        else:
            x = np.column_stack([self._cg(col) for col in b.T]) if b.ndim == 2 else self._cg(b)

        norm_b = np.linalg.norm(b)
        if norm_b > 0:
            residual = np.linalg.norm(self.laplacian @ x - b) / norm_b
            if residual > settings.PINV_RESIDUAL:
                raise SolverConvergenceError(
                    f"La pseudo-inversa de la Laplaciana deja un residuo relativo {residual:.2e}", residual)
        return x

    def _cg(self, b: np.ndarray) -> np.ndarray:
        norm_b = np.linalg.norm(b)
        if norm_b == 0:
            return np.zeros_like(b)
        kwargs = {_CG_TOL_KEYWORD: settings.PINV_RESIDUAL, 'atol': 1e-12 * norm_b,
                  'maxiter': 10 * self.size}
        x, info = cg(self.laplacian, b, **kwargs)
        x = self._deflate(x)
        residual = np.linalg.norm(self.laplacian @ x - b) / norm_b
        if info != 0 and residual > settings.PINV_RESIDUAL:
            raise SolverConvergenceError("CG no convergió en la Laplaciana", residual)
        return x

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b)
        if np.iscomplexobj(b):
            return self._solve_real(b.real.astype(float)) + 1j * self._solve_real(b.imag.astype(float))
        return self._solve_real(b.astype(float))


class ProjectorSet:
    """
    P^Σ = Σ(ΣᵀΣ)⁺Σᵀ, P^ΛH = I − P^Σ, ℙ^Λ = Λ(ΛᵀΛ)⁺Λᵀ, ℙ^ΣH = I − ℙ^Λ

    Nunca se densifican en el camino del solver; `dense` existe para los oráculos.
    """

    def __init__(self, incidence: IncidenceMatrices, lu_threshold: Optional[int] = None):
        self.incidence = incidence
        S, L = incidence.Sigma.astype(float), incidence.Lambda.astype(float)
        self._S, self._L = S.tocsr(), L.tocsr()
        self.star_laplacian = LaplacianPseudoInverse(S.T @ S, lu_threshold)
        self.loop_laplacian = LaplacianPseudoInverse(L.T @ L, lu_threshold)

    @property
    def size(self) -> int:
        return self.incidence.n_edges

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.ndim not in (1, 2) or x.shape[0] != self.size:
            raise DimensionMismatchError(
                f"Se esperaban {self.size} coeficientes y se recibió forma {x.shape}")
        return x

    def P_Sigma(self, x: np.ndarray) -> np.ndarray:
        x = self._check(x)
        return self._S @ self.star_laplacian.solve(self._S.T @ x)

    def P_LambdaH(self, x: np.ndarray) -> np.ndarray:
        x = self._check(x)
        return x - self.P_Sigma(x)

    def Pd_Lambda(self, x: np.ndarray) -> np.ndarray:
        x = self._check(x)
        return self._L @ self.loop_laplacian.solve(self._L.T @ x)

    def Pd_SigmaH(self, x: np.ndarray) -> np.ndarray:
        x = self._check(x)
        return x - self.Pd_Lambda(x)

    def apply(self, which: ProjectorKind, x: np.ndarray) -> np.ndarray:
        return getattr(self, ProjectorKind(which).value)(x)

    def as_linear_operator(self, which: ProjectorKind) -> LinearOperator:
        return LinearOperator((self.size, self.size), matvec=lambda v: self.apply(which, v),
                              matmat=lambda V: self.apply(which, V), dtype=complex)

    def dense(self, which: ProjectorKind) -> np.ndarray:
        return self.apply(which, np.eye(self.size))


def build_projectors(inc: IncidenceMatrices, lu_threshold: Optional[int] = None) -> ProjectorSet:
    projectors = ProjectorSet(inc, lu_threshold)
    mode = 'LU' if projectors.star_laplacian.direct else 'CG'
    logger.info(f"Proyectores cuasi-Helmholtz listos ({inc.n_edges} aristas, {mode})")
    return projectors


def apply_projector(projectors: ProjectorSet, which: ProjectorKind, x: np.ndarray) -> np.ndarray:
    return projectors.apply(which, x)
