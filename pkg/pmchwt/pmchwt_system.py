"""
Sistema PMCHWT reescalado, clasificación de régimen, coeficientes de precondicionado,
precondicionadores izquierdo/derecho y solución
"""
import inspect
import logging
from dataclasses import asdict, dataclass
from functools import cached_property
from enum import Enum
from typing import Any, Callable, Dict, Optional

import numpy as np
from scipy import sparse
from scipy.linalg import lu_factor, lu_solve
from scipy.sparse.linalg import LinearOperator, gmres

from pmchwt import settings
from pmchwt.basis_spaces import BcSpace, GramMatrices, RwgSpace, assemble_gram, build_bc, build_rwg
from pmchwt.bem_operators import MaterialParams, OperatorMatrices, Wavenumber, assemble_operators
from pmchwt.errors import ConfigError, MismatchedMeshError, SolverConvergenceError
from pmchwt.mesh_topology import MeshConnectivity, TriangleMesh, barycentric_refine, build_connectivity
from pmchwt.quasi_helmholtz import IncidenceMatrices, ProjectorSet, build_incidence, build_projectors

logger = logging.getLogger(__name__)

_GMRES_TOL_KEYWORD = 'rtol' if 'rtol' in inspect.signature(gmres).parameters else 'tol'
GMRES_RESTART = 200


class Regime(str, Enum):
    QSR = 'QSR'
    ECFR = 'ECFR'
    SEDR = 'SEDR'


class ExcitationType(str, Enum):
    INDUCTIVE = 'inductive'
    CAPACITIVE = 'capacitive'


class PreconditionerMode(str, Enum):
    OFF = 'off'
    LOOPSTAR = 'loopstar'
    PROJECTOR = 'projector'
    PROJECTOR_SUBOPTIMAL = 'projector_suboptimal'


@dataclass(frozen=True)
class RegimeParams:
    """χ = k₀L, γ = √(ωε₀/σ), ξ = √(2/μ_r)·L/δ y el régimen resultante"""

    chi: float
    gamma: float
    xi: float
    regime: Regime
    omega: float
    length: float
    skin_depth: float

    def as_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['regime'] = self.regime.value
        return data


def classify_regime(omega: float, mat: MaterialParams, L: float) -> RegimeParams:
    """
    QSR si γ ≥ 1 (o σ = 0); si no, ECFR con ξ < 1 y SEDR en otro caso
    """
    if omega <= 0:
        raise ValueError("ω debe ser positiva")
    chi = omega / settings.C0 * L
    if mat.sigma == 0:
        return RegimeParams(chi, float('inf'), 0.0, Regime.QSR, omega, L, float('inf'))

    gamma = float(np.sqrt(omega * settings.EPS0 / mat.sigma))
    delta = mat.skin_depth(omega)
    xi = float(np.sqrt(2.0 / mat.mu_r) * L / delta)
    if gamma >= 1.0:
        regime = Regime.QSR
    elif xi < 1.0:
        regime = Regime.ECFR
    else:
        regime = Regime.SEDR
    return RegimeParams(chi, gamma, xi, regime, omega, L, delta)


@dataclass(frozen=True, eq=False)
class Discretization:
    """Malla, espacios, Gram mixta y proyectores compartidos por todos los puntos de un barrido"""

    mesh: TriangleMesh
    conn: MeshConnectivity
    rwg: RwgSpace
    bc: BcSpace
    grams: GramMatrices
    incidence: IncidenceMatrices
    projectors: ProjectorSet

    @cached_property
    def static_loop_leak(self) -> np.ndarray:
        return compute_static_loop_leak(self.rwg, self.projectors)

    @property
    def size(self) -> int:
        return self.rwg.dimension


def compute_static_loop_leak(space: RwgSpace, projectors: ProjectorSet,
                             threads: Optional[int] = None) -> np.ndarray:
    """
    ℙ^Λ K₀ P^ΛH + P^ΛH K₀ ℙ^Λ − ℙ^Λ K₀ ℙ^Λ sobre el K estático ensamblado

    K₀ no acopla un lazo local con una corriente sin divergencia, así que esta matriz es
    sólo error de cuadratura. El bloque armónico-armónico queda fuera.
    """
    K0 = assemble_operators(space, Wavenumber.static(), threads).K
    QK = projectors.Pd_Lambda(K0)
    KQ = projectors.Pd_Lambda(K0.T).T
    leak = projectors.P_LambdaH(QK.T).T + projectors.P_LambdaH(KQ) - projectors.Pd_Lambda(KQ)
    scale = np.linalg.norm(K0)
    logger.info(f"Fuga estática lazo-solenoidal de K₀: {np.linalg.norm(leak) / scale:.2e} relativa")
    return leak


def prepare_discretization(mesh: TriangleMesh, lu_threshold: Optional[int] = None) -> Discretization:
    conn = build_connectivity(mesh)
    rwg = build_rwg(conn)
    bc = build_bc(barycentric_refine(mesh), conn)
    grams = assemble_gram(rwg, bc)
    incidence = build_incidence(conn)
    projectors = build_projectors(incidence, lu_threshold)
    logger.info(f"Discretización: {conn.n_edges} aristas, género {conn.genus}")
    return Discretization(mesh, conn, rwg, bc, grams, incidence, projectors)


@dataclass(frozen=True, eq=False)
class PmchwtSystem:
    """
    Bloques del sistema reescalado Z̄ = [[T_u/η₀, −K], [K, η₀T_l]]

    T_u/η₀ = T_{k₀} + (η₁/η₀)T_{k₁}, η₀T_l = T_{k₀} + (η₀/η₁)T_{k₁}, K = K_{k₀} + K_{k₁}
    menos dos veces la fuga estática cuando se proporciona
    """

    space: RwgSpace
    omega: float
    material: MaterialParams
    exterior: OperatorMatrices
    interior: OperatorMatrices
    static_leak: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return self.space.dimension

    @property
    def eta0(self) -> complex:
        return self.exterior.wavenumber.eta

    @property
    def eta1(self) -> complex:
        return self.interior.wavenumber.eta

    @property
    def Tu_over_eta0(self) -> np.ndarray:
        k0 = self.exterior.wavenumber.k
        eps = self.material.relative_permittivity(self.omega)
        return (self.exterior.T - 1j * k0 * self.material.mu_r * self.interior.TA
                + self.interior.TPhi / (1j * k0 * eps))

    @property
    def eta0_Tl(self) -> np.ndarray:
        k0 = self.exterior.wavenumber.k
        eps = self.material.relative_permittivity(self.omega)
        return (self.exterior.T - 1j * k0 * eps * self.interior.TA
                + self.interior.TPhi / (1j * k0 * self.material.mu_r))

    @property
    def K(self) -> np.ndarray:
        K = self.exterior.K + self.interior.K
        if self.static_leak is None:
            return K
        # K = 2K₀ + (K_{k₀} − K₀) + (K_{k₁} − K₀): la fuga estática aparece dos veces
        return K - 2.0 * self.static_leak

    @property
    def Zbar(self) -> np.ndarray:
        K = self.K
        return np.block([[self.Tu_over_eta0, -K], [K, self.eta0_Tl]])

    @property
    def Z(self) -> np.ndarray:
        """Sistema físico en (j, m) antes del reescalado por √η₀"""
        eta0 = self.eta0
        K = self.K
        return np.block([[eta0 * self.Tu_over_eta0, -K], [K, self.eta0_Tl / eta0]])

    def scaled_rhs(self, e: np.ndarray, h: np.ndarray) -> np.ndarray:
        root = np.sqrt(self.eta0)
        return np.concatenate([np.asarray(e) / root, root * np.asarray(h)])

    def unscale(self, x: np.ndarray):
        root = np.sqrt(self.eta0)
        n = self.size
        return x[:n] / root, root * x[n:]


def assemble_system(disc: Discretization, mat: MaterialParams, omega: float,
                    threads: Optional[int] = None, cancel_static_leak: bool = True) -> PmchwtSystem:
    """
    Ensambla los operadores de ambos medios sobre el espacio RWG de la discretización

    Con cancel_static_leak, K se corrige con la fuga estática de la discretización (calculada
    una vez y compartida por el barrido) para que el bloque lazo-solenoidal de K₀ se anule exactamente.
    """
    if omega <= 0:
        raise ValueError("ω debe ser positiva")
    space = disc.rwg
    ext = assemble_operators(space, Wavenumber.exterior(omega), threads)
    inner = assemble_operators(space, Wavenumber.interior(omega, mat), threads)
    leak = disc.static_loop_leak if cancel_static_leak else None
    logger.info(f"Sistema PMCHWT ensamblado a ω = {omega:.4e} rad/s ({2 * space.dimension} incógnitas)")
    return PmchwtSystem(space, omega, mat, ext, inner, leak)


@dataclass(frozen=True)
class CoefficientSet:
    a_L: float
    b_L: float
    c_L: float
    d_L: float
    a_R: float
    b_R: float
    c_R: float
    d_R: float
    excitation: ExcitationType
    regime: Regime
    variant: str = 'table'

    def as_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['excitation'] = self.excitation.value
        data['regime'] = self.regime.value
        return data


# Columnas de la tabla de coeficientes: exponentes (de χ, de γ) por coeficiente
_TABLE = {
    (Regime.QSR, ExcitationType.INDUCTIVE): {
        'a_L': (0, 0), 'b_L': (-2, 0), 'c_L': (-1, 0), 'd_L': (-1, 0),
        'a_R': (1, 0), 'b_R': (1, 0), 'c_R': (0, 0), 'd_R': (2, 0)},
    (Regime.QSR, ExcitationType.CAPACITIVE): {
        'a_L': (-2, 0), 'b_L': (0, 0), 'c_L': (-1, 0), 'd_L': (-1, 0),
        'a_R': (1, 0), 'b_R': (1, 0), 'c_R': (2, 0), 'd_R': (0, 0)},
    (Regime.ECFR, ExcitationType.INDUCTIVE): {
        'a_L': (0.5, -1), 'b_L': (-0.5, 0), 'c_L': (0.5, 0), 'd_L': (-0.5, 1),
        'a_R': (-0.5, 0), 'b_R': (0.5, 1), 'c_R': (-0.5, 1), 'd_R': (0.5, 0)},
    (Regime.ECFR, ExcitationType.CAPACITIVE): {
        'a_L': (-0.5, 0), 'b_L': (1.5, 0), 'c_L': (0.5, 0), 'd_L': (0.5, 0),
        'a_R': (-0.5, 0), 'b_R': (-0.5, 0), 'c_R': (0.5, 0), 'd_R': (-1.5, 2)},
    (Regime.SEDR, ExcitationType.INDUCTIVE): {
        'a_L': (-0.5, 0), 'b_L': (-0.5, 0), 'c_L': (0, 0.5), 'd_L': (0, 0.5),
        'a_R': (-0.5, 0), 'b_R': (1.5, 0), 'c_R': (0, 0.5), 'd_R': (0, 0.5)},
    (Regime.SEDR, ExcitationType.CAPACITIVE): {
        'a_L': (-0.5, 0), 'b_L': (1.5, 0), 'c_L': (0, 0.5), 'd_L': (0, 0.5),
        'a_R': (-0.5, 0), 'b_R': (-0.5, 0), 'c_R': (0, 0.5), 'd_R': (0, 0.5)},
}

# Elección intuitiva en ECFR que deja 2g valores singulares decrecientes en superficies de género g
_SUBOPTIMAL = {
    'a_L': (0.5, 0), 'c_L': (0.5, 0), 'b_R': (0.5, 0), 'd_R': (0.5, 0),
    'b_L': (-0.5, 0), 'a_R': (-0.5, 0), 'd_L': (-0.5, 1), 'c_R': (-0.5, 1)}

# Elección clásica para dieléctricos sin pérdidas
_CLASSICAL = {
    'a_L': (0.5, 0), 'c_L': (0.5, 0), 'b_R': (0.5, 0), 'd_R': (0.5, 0),
    'b_L': (-0.5, 0), 'd_L': (-0.5, 0), 'a_R': (-0.5, 0), 'c_R': (-0.5, 0)}


def coefficients_for(reg: RegimeParams, excitation: ExcitationType,
                     variant: str = 'table') -> CoefficientSet:
    """
    Ocho coeficientes escalares (potencias de χ y γ) para el régimen y el tipo de excitación

    Args:
        variant: 'table' (por defecto), 'suboptimal' (ECFR intuitivo), 'classical' o 'unit'
    """
    excitation = ExcitationType(excitation)
    if variant == 'table':
        exponents = _TABLE[(reg.regime, excitation)]
    elif variant == 'suboptimal':
        exponents = _SUBOPTIMAL
    elif variant == 'classical':
        exponents = _CLASSICAL
    elif variant == 'unit':
        exponents = {name: (0, 0) for name in _CLASSICAL}
    else:
        raise ConfigError(f"Variante de coeficientes desconocida: {variant}", field='preconditioner.variant')

    values = {}
    for name, (p_chi, p_gamma) in exponents.items():
        value = reg.chi ** p_chi * (reg.gamma ** p_gamma if p_gamma else 1.0)
        if not np.isfinite(value) or value <= 0:
            raise ConfigError(
                f"Coeficiente {name} no finito para el régimen {reg.regime.value} (variante {variant})",
                field='preconditioner.variant')
        values[name] = float(value)
    return CoefficientSet(**values, excitation=excitation, regime=reg.regime, variant=variant)


BlockOp = Callable[[np.ndarray], np.ndarray]


class PreconditionerPair:
    """
    L = blockdiag(L_up, L_low) y R = blockdiag(R_up, R_low) como cadenas de operaciones

    Los factores √η₀ se cancelan con el reescalado de Z̄ y no se aplican.
    """

    def __init__(self, size: int, left_blocks, right_blocks, left_inverse_blocks=None,
                 mode: PreconditionerMode = PreconditionerMode.PROJECTOR,
                 coefficients: Optional[CoefficientSet] = None):
        self.size = size
        self._left = left_blocks
        self._right = right_blocks
        self._left_inverse = left_inverse_blocks
        self.mode = mode
        self.coefficients = coefficients

    @staticmethod
    def _apply(blocks, x: np.ndarray) -> np.ndarray:
        n = len(x) // 2
        upper, lower = blocks
        return np.concatenate([upper(x[:n]), lower(x[n:])], axis=0)

    def left(self, x: np.ndarray) -> np.ndarray:
        return self._apply(self._left, np.asarray(x))

    def right(self, x: np.ndarray) -> np.ndarray:
        return self._apply(self._right, np.asarray(x))

    def left_inverse(self, x: np.ndarray) -> np.ndarray:
        if self._left_inverse is None:
            raise NotImplementedError("Este precondicionador no define la inversa izquierda")
        return self._apply(self._left_inverse, np.asarray(x))

    def dense_right(self) -> np.ndarray:
        return self.right(np.eye(2 * self.size, dtype=complex))

    def preconditioned(self, Zbar: np.ndarray) -> np.ndarray:
        """L Z̄ R denso (diagnóstico y solución directa)"""
        return self.left(Zbar @ self.dense_right())


def _gram_sandwich(grams: GramMatrices, projectors: ProjectorSet, a: float, b: float) -> BlockOp:
    # G⁻ᵀ(a ℙ^ΣH + b ℙ^Λ)G⁻¹
    def op(x):
        y = grams.solve_G(x)
        return grams.solve_GT(a * projectors.Pd_SigmaH(y) + b * projectors.Pd_Lambda(y))
    return op


def _gram_sandwich_inverse(grams: GramMatrices, projectors: ProjectorSet, a: float, b: float) -> BlockOp:
    def op(x):
        y = grams.G.T @ x
        return grams.G @ (projectors.Pd_SigmaH(y) / a + projectors.Pd_Lambda(y) / b)
    return op


def _dual_sandwich(grams: GramMatrices, projectors: ProjectorSet, a: float, b: float) -> BlockOp:
    # 𝔾⁻¹(a ℙ^ΣH + b ℙ^Λ)𝔾⁻ᵀ
    def op(x):
        y = grams.solve_GdT(x)
        return grams.solve_Gd(a * projectors.Pd_SigmaH(y) + b * projectors.Pd_Lambda(y))
    return op


def _primal_mix(projectors: ProjectorSet, a: float, b: float) -> BlockOp:
    # a P^ΛH + b P^Σ
    def op(x):
        star = projectors.P_Sigma(x)
        return a * (x - star) + b * star
    return op


def _primal_mix_inverse(projectors: ProjectorSet, a: float, b: float) -> BlockOp:
    return _primal_mix(projectors, 1.0 / a, 1.0 / b)


def loopstar_basis(disc: Discretization) -> sparse.csr_matrix:
    if disc.conn.genus != 0:
        raise ConfigError("El comparador loop-star solo está disponible en superficies de género 0",
                          field='preconditioner.mode')
    Lam = disc.incidence.Lambda[:, 1:].astype(float)
    Sig = disc.incidence.Sigma[:, 1:].astype(float)
    return sparse.hstack([Lam, Sig]).tocsr()


def build_preconditioners(coeffs: Optional[CoefficientSet], disc: Discretization,
                          excitation: ExcitationType,
                          mode: PreconditionerMode = PreconditionerMode.PROJECTOR,
                          system: Optional[PmchwtSystem] = None) -> PreconditionerPair:
    """
    Precondicionadores izquierdo/derecho

    inductivo: L = blockdiag(G⁻ᵀ(a_L ℙ^ΣH + b_L ℙ^Λ)G⁻¹, G⁻ᵀ(c_L ℙ^ΣH + d_L ℙ^Λ)G⁻¹),
               R = blockdiag(a_R P^ΛH + b_R P^Σ, c_R P^ΛH + d_R P^Σ)
    capacitivo: L = blockdiag(a_L P^ΛH + b_L P^Σ, c_L P^ΛH + d_L P^Σ),
                R = blockdiag(𝔾⁻¹(a_R ℙ^ΣH + b_R ℙ^Λ)𝔾⁻ᵀ, 𝔾⁻¹(c_R ℙ^ΣH + d_R ℙ^Λ)𝔾⁻ᵀ)
    """
    mode = PreconditionerMode(mode)
    excitation = ExcitationType(excitation)
    n = disc.size
    if disc.grams.G.shape[0] != n or disc.projectors.size != n:
        raise MismatchedMeshError("Gram, proyectores y espacio RWG proceden de mallas distintas")
    if system is not None and system.space.mesh is not disc.mesh:
        raise MismatchedMeshError("El sistema PMCHWT se ensambló sobre otra malla")

    identity = lambda x: x
    if mode == PreconditionerMode.OFF:
        return PreconditionerPair(n, (identity, identity), (identity, identity),
                                  (identity, identity), mode, coeffs)

    c = coeffs
    P, grams = disc.projectors, disc.grams
    if mode == PreconditionerMode.LOOPSTAR:
        return _loopstar_pair(disc, c, excitation)

    if excitation == ExcitationType.INDUCTIVE:
        left = (_gram_sandwich(grams, P, c.a_L, c.b_L), _gram_sandwich(grams, P, c.c_L, c.d_L))
        left_inv = (_gram_sandwich_inverse(grams, P, c.a_L, c.b_L),
                    _gram_sandwich_inverse(grams, P, c.c_L, c.d_L))
        right = (_primal_mix(P, c.a_R, c.b_R), _primal_mix(P, c.c_R, c.d_R))
    else:
        left = (_primal_mix(P, c.a_L, c.b_L), _primal_mix(P, c.c_L, c.d_L))
        left_inv = (_primal_mix_inverse(P, c.a_L, c.b_L), _primal_mix_inverse(P, c.c_L, c.d_L))
        right = (_dual_sandwich(grams, P, c.a_R, c.b_R), _dual_sandwich(grams, P, c.c_R, c.d_R))
    return PreconditionerPair(n, left, right, left_inv, mode, c)


def _loopstar_pair(disc: Discretization, c: CoefficientSet, excitation: ExcitationType) -> PreconditionerPair:
    """
    Comparador en base loop-star: L = blockdiag(D Aᵀ), R = blockdiag(A D) con A = [Λ̃ Σ̃]

    Las escalas por bloque reproducen las del precondicionador por proyectores.
    """
    A = loopstar_basis(disc)
    n_loops = disc.conn.n_vertices - 1
    n = disc.size

    def weights(loop: float, star: float) -> np.ndarray:
        return np.concatenate([np.full(n_loops, loop), np.full(n - n_loops, star)])

    if excitation == ExcitationType.INDUCTIVE:
        w_up, w_low = weights(c.b_L, c.a_L), weights(c.d_L, c.c_L)
        r_up, r_low = weights(c.a_R, c.b_R), weights(c.c_R, c.d_R)
    else:
        w_up, w_low = weights(c.a_L, c.b_L), weights(c.c_L, c.d_L)
        r_up, r_low = weights(c.b_R, c.a_R), weights(c.d_R, c.c_R)

    def left_op(w):
        return lambda x: (w[:, None] if np.ndim(x) == 2 else w) * (A.T @ x)

    def right_op(w):
        return lambda x: A @ ((w[:, None] if np.ndim(x) == 2 else w) * x)

    return PreconditionerPair(n, (left_op(w_up), left_op(w_low)), (right_op(r_up), right_op(r_low)),
                              None, PreconditionerMode.LOOPSTAR, c)


@dataclass
class SolveResult:
    j: np.ndarray
    m: np.ndarray
    residual: float
    iterations: Optional[int] = None


def solve(system: PmchwtSystem, pair: PreconditionerPair, e: np.ndarray, h: np.ndarray,
          method: str = 'dense', tol: float = settings.GMRES_TOL, maxiter: int = 2000) -> SolveResult:
    """
    Resuelve L Z̄ R y = L b̄, x = R y y deshace el reescalado: j = x_up/√η₀, m = √η₀·x_low

    Args:
        method: 'dense' (LU) o 'gmres'
    """
    b = system.scaled_rhs(e, h)
    if not np.any(b):
        zeros = np.zeros(system.size, dtype=complex)
        return SolveResult(zeros, zeros.copy(), 0.0, 0)

    Zbar = system.Zbar
    rhs = pair.left(b)
    iterations = None
    if method == 'dense':
        A = pair.preconditioned(Zbar)
        y = lu_solve(lu_factor(A), rhs)
        residual = float(np.linalg.norm(A @ y - rhs) / np.linalg.norm(rhs))
    elif method == 'gmres':
        n2 = 2 * system.size
        op = LinearOperator((n2, n2), matvec=lambda v: pair.left(Zbar @ pair.right(v)), dtype=complex)
        counter = {'n': 0}

        def callback(_):
            counter['n'] += 1

        kwargs = {_GMRES_TOL_KEYWORD: tol, 'atol': 0.0, 'restart': GMRES_RESTART,
                  'maxiter': maxiter, 'callback': callback, 'callback_type': 'pr_norm'}
        y, info = gmres(op, rhs, **kwargs)
        residual = float(np.linalg.norm(op.matvec(y) - rhs) / np.linalg.norm(rhs))
        iterations = counter['n']
        if info != 0:
            raise SolverConvergenceError(f"GMRES no convergió tras {iterations} iteraciones", residual)
        logger.info(f"GMRES: {iterations} iteraciones, residuo {residual:.2e}")
    else:
        raise ConfigError(f"Método de solución desconocido: {method}", field='solver.method')

    x = pair.right(y)
    j, m = system.unscale(x)
    return SolveResult(j, m, residual, iterations)


def condition_numbers(system: PmchwtSystem, pair: PreconditionerPair) -> Dict[str, Any]:
    """Números de condición por SVD densa de Z, Z̄ y L Z̄ R, con el espectro de este último"""
    Zbar = system.Zbar
    s_plain = np.linalg.svd(system.Z, compute_uv=False)
    s_scaled = np.linalg.svd(Zbar, compute_uv=False)
    s_pre = np.linalg.svd(pair.preconditioned(Zbar), compute_uv=False)
    return {
        'cond_plain': float(s_plain[0] / s_plain[-1]),
        'cond_rescaled': float(s_scaled[0] / s_scaled[-1]),
        'cond_preconditioned': float(s_pre[0] / s_pre[-1]),
        'singular_values': s_pre,
    }
