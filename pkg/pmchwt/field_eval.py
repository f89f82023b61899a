"""
Campos cercanos y lejanos radiados por las corrientes equivalentes y extracción de
parámetros concentrados (R, L, C)
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from pmchwt import settings
from pmchwt.basis_spaces import RwgSpace
from pmchwt.bem_operators import MaterialParams, Wavenumber
from pmchwt.errors import DimensionMismatchError, ProbeTooCloseError, ZeroCurrentError
from pmchwt.excitation import FrillSource
from pmchwt.mesh_topology import TriangleMesh, distance_to_surface, winding_numbers
from pmchwt.quadrature import gauss_01, near_potentials, triangle_rule
from pmchwt.quasi_helmholtz import ProjectorKind, ProjectorSet

logger = logging.getLogger(__name__)

PROBE_CHUNK = 32
FAR_RULE = 4


@dataclass(frozen=True, eq=False)
class CurrentSolution:
    """Coeficientes RWG de j y m a la pulsación ω"""

    j: np.ndarray
    m: np.ndarray
    omega: float
    material: MaterialParams
    space: RwgSpace

    def __post_init__(self):
        n = self.space.dimension
        if len(self.j) != n or len(self.m) != n:
            raise DimensionMismatchError(f"Se esperaban {n} coeficientes por corriente")

    def scaled(self, factor: complex) -> 'CurrentSolution':
        return CurrentSolution(factor * self.j, factor * self.m, self.omega, self.material, self.space)


@dataclass(frozen=True, eq=False)
class ProbeGrid:
    """Puntos de prueba con su región: True en el interior del cuerpo"""

    points: np.ndarray
    interior: np.ndarray

    @classmethod
    def from_points(cls, mesh: TriangleMesh, points) -> 'ProbeGrid':
        points = np.atleast_2d(np.asarray(points, dtype=float))
        standoff = settings.PROBE_STANDOFF * mesh.mean_edge_length()
        distance = distance_to_surface(mesh, points)
        too_close = distance < standoff
        if too_close.any():
            worst = int(np.argmin(distance))
            raise ProbeTooCloseError(
                f"{int(too_close.sum())} puntos a menos de {standoff:.3e} m de la superficie "
                f"(p. ej. {points[worst].tolist()})", field='output.probes')
        return cls(points, winding_numbers(mesh, points) > 0.5)

    @classmethod
    def line(cls, mesh: TriangleMesh, start, stop, n: int) -> 'ProbeGrid':
        t = np.linspace(0.0, 1.0, n)[:, None]
        return cls.from_points(mesh, (1 - t) * np.asarray(start, float) + t * np.asarray(stop, float))

    @classmethod
    def plane(cls, mesh: TriangleMesh, origin, u, v, nu: int, nv: int) -> 'ProbeGrid':
        s = np.linspace(0.0, 1.0, nu)
        t = np.linspace(0.0, 1.0, nv)
        S, T = np.meshgrid(s, t, indexing='ij')
        pts = (np.asarray(origin, float) + S.reshape(-1, 1) * np.asarray(u, float)
               + T.reshape(-1, 1) * np.asarray(v, float))
        return cls.from_points(mesh, pts)

    def __len__(self) -> int:
        return len(self.points)


def _triangle_potentials(mesh: TriangleMesh, points: np.ndarray, k: complex):
    """g0 = ∫G, gr = ∫r'G, V = ∫∇_r G por (punto, triángulo)"""
    n_p, n_f = len(points), mesh.n_faces
    g0 = np.zeros((n_p, n_f), dtype=complex)
    gr = np.zeros((n_p, n_f, 3), dtype=complex)
    V = np.zeros((n_p, n_f, 3), dtype=complex)

    dist = np.linalg.norm(points[:, None, :] - mesh.centroids[None], axis=2)
    near = dist < 2.0 * mesh.diameters[None, :]

    bary, w = triangle_rule(FAR_RULE)
    src = np.einsum('qk,fkj->fqj', bary, mesh.corners)
    wa = w[None, :] * mesh.areas[:, None]
    diff = points[:, None, None, :] - src[None]
    R = np.linalg.norm(diff, axis=3)
    phase = np.exp(-1j * k * R)
    G = wa[None] * phase / (4 * np.pi * R)
    g = -wa[None] * (1.0 + 1j * k * R) * phase / (4 * np.pi * R ** 3)
    g0[:] = G.sum(axis=2)
    gr[:] = np.einsum('pfq,fqj->pfj', G, src)
    V[:] = np.einsum('pfq,pfqj->pfj', g, diff)

    if near.any():
        ip, it = np.nonzero(near)
        ng0, ngr, nV = near_potentials(points[ip], mesh.corners[it], k)
        g0[ip, it], gr[ip, it], V[ip, it] = ng0, ngr, nV
    return g0, gr, V


def _radiate(space: RwgSpace, points: np.ndarray, j: np.ndarray, m: np.ndarray,
             wavenumber: Wavenumber) -> Tuple[np.ndarray, np.ndarray]:
    """
    E = η[−jk∫Gj + (1/jk)∇∫G∇'·j] − ∫∇G×m,  H = ∫∇G×j + (1/η)[−jk∫Gm + (1/jk)∇∫G∇'·m]
    """
    mesh = space.mesh
    k, eta = wavenumber.k, wavenumber.eta
    corners = mesh.corners
    cj = j[space.triangle_edges] * space.triangle_signs
    cm = m[space.triangle_edges] * space.triangle_signs
    two_area = 2.0 * mesh.areas
    if k == 0:
        raise ValueError("La evaluación de campos requiere k ≠ 0")

    E = np.zeros((len(points), 3), dtype=complex)
    H = np.zeros((len(points), 3), dtype=complex)
    for start in range(0, len(points), PROBE_CHUNK):
        p = points[start:start + PROBE_CHUNK]
        g0, gr, V = _triangle_potentials(mesh, p, k)

        def single_layer(c):
            # ∫_T G Σ c_i (r' − p_i)/(2A)
            weighted = c.sum(axis=1)[None, :, None] * gr - g0[..., None] * np.einsum('fi,fij->fj', c, corners)[None]
            return (weighted / two_area[None, :, None]).sum(axis=1)

        def gradient_term(c):
            div = c.sum(axis=1) / mesh.areas
            return np.einsum('f,pfj->pj', div, V)

        def curl_term(c):
            # ∫_T ∇G × Σ c_i (r' − p_i)/(2A) = Σ c_i V × (r − p_i)/(2A)
            lever = (c.sum(axis=1)[None, :, None] * p[:, None, :]
                     - np.einsum('fi,fij->fj', c, corners)[None])
            return (np.cross(V, lever) / two_area[None, :, None]).sum(axis=1)

        E[start:start + PROBE_CHUNK] = (eta * (-1j * k * single_layer(cj) + gradient_term(cj) / (1j * k))
                                        - curl_term(cm))
        H[start:start + PROBE_CHUNK] = (curl_term(cj)
                                        + (-1j * k * single_layer(cm) + gradient_term(cm) / (1j * k)) / eta)
    return E, H


def near_field(sol: CurrentSolution, probes: ProbeGrid, incident=None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Campos en los puntos de prueba

    Fuera: dispersado por (j, m) con k₀ más el incidente si se pasa `incident(points, k0)`.
    Dentro: transmitido, radiado por (−j, −m) con k₁.
    """
    E = np.zeros((len(probes), 3), dtype=complex)
    H = np.zeros((len(probes), 3), dtype=complex)
    ext, inner = ~probes.interior, probes.interior
    k0 = Wavenumber.exterior(sol.omega)
    k1 = Wavenumber.interior(sol.omega, sol.material)
    if ext.any():
        E[ext], H[ext] = _radiate(sol.space, probes.points[ext], sol.j, sol.m, k0)
        if incident is not None:
            Ei, Hi = incident(probes.points[ext], k0)
            E[ext] += Ei
            H[ext] += Hi
    if inner.any():
        E[inner], H[inner] = _radiate(sol.space, probes.points[inner], -sol.j, -sol.m, k1)
    return E, H


def component_current(sol: CurrentSolution, projectors: ProjectorSet, current: str,
                      subspace: str, part: str) -> CurrentSolution:
    """
    Solución con una sola componente: (j|m) × (LambdaH|Sigma) × (re|im)

    La parte imaginaria conserva el factor j para que las ocho componentes sumen la solución.
    """
    kind = {'LambdaH': ProjectorKind.P_LAMBDA_H, 'Sigma': ProjectorKind.P_SIGMA}[subspace]
    x = sol.j if current == 'j' else sol.m
    projected = projectors.apply(kind, x)
    value = projected.real.astype(complex) if part == 're' else 1j * projected.imag
    zero = np.zeros_like(value)
    if current == 'j':
        return CurrentSolution(value, zero, sol.omega, sol.material, sol.space)
    return CurrentSolution(zero, value, sol.omega, sol.material, sol.space)


def component_field(sol: CurrentSolution, projectors: ProjectorSet, current: str, subspace: str,
                    part: str, probes: ProbeGrid) -> Tuple[np.ndarray, np.ndarray]:
    return near_field(component_current(sol, projectors, current, subspace, part), probes)


@dataclass(frozen=True)
class CurrentCut:
    """Plano de corte (punto, normal) limitado opcionalmente al semiplano con half·(r − p0) > 0"""

    point: Sequence[float]
    normal: Sequence[float]
    half: Optional[Sequence[float]] = None


def cut_current(space: RwgSpace, j: np.ndarray, cut: CurrentCut) -> complex:
    """
    I = ∫ j_s·m̂ dl a lo largo de la intersección del plano con la malla, con m̂·ν > 0
    """
    mesh = space.mesh
    p0 = np.asarray(cut.point, float)
    nu = np.asarray(cut.normal, float)
    nu = nu / np.linalg.norm(nu)
    half = None if cut.half is None else np.asarray(cut.half, float)

    s = (mesh.vertices - p0) @ nu
    tri_s = s[mesh.triangles]
    crossing = (tri_s.min(axis=1) < 0) & (tri_s.max(axis=1) > 0)
    x, w = gauss_01(2)
    total = 0j
    for t in np.nonzero(crossing)[0]:
        pts = []
        for i in range(3):
            a, b = mesh.triangles[t, i], mesh.triangles[t, (i + 1) % 3]
            sa, sb = s[a], s[b]
            if (sa < 0) != (sb < 0) and sa != sb:
                lam = sa / (sa - sb)
                pts.append(mesh.vertices[a] + lam * (mesh.vertices[b] - mesh.vertices[a]))
        if len(pts) != 2:
            continue
        a, b = pts
        if half is not None:
            ha, hb = (a - p0) @ half, (b - p0) @ half
            if ha <= 0 and hb <= 0:
                continue
            if ha < 0 or hb < 0:
                lam = ha / (ha - hb)
                cut_point = a + lam * (b - a)
                a, b = (cut_point, b) if ha < 0 else (a, cut_point)
        seg = b - a
        length = np.linalg.norm(seg)
        if length == 0:
            continue
        m_hat = np.cross(seg / length, mesh.normals[t])
        if m_hat @ nu < 0:
            m_hat = -m_hat
        q = a + x[:, None] * seg
        density = space.density(j, np.full(len(q), t), q)
        total += complex(length * np.sum(w * (density @ m_hat)))
    return total


@dataclass(frozen=True)
class ImpedanceResult:
    Z: complex
    current: complex
    R: float
    L: float
    C: float


def extract_impedance(sol: CurrentSolution, frill: FrillSource, cut: CurrentCut) -> ImpedanceResult:
    """Z = V/I; inductivo: R = Re Z, L = Im Z/ω; capacitivo: C = Im(I/V)/ω"""
    current = cut_current(sol.space, sol.j, cut)
    if abs(current) < settings.ZERO_CURRENT:
        raise ZeroCurrentError(f"Corriente a través del corte demasiado pequeña ({abs(current):.3e} A)")
    Z = frill.voltage / current
    return ImpedanceResult(
        Z=complex(Z),
        current=current,
        R=float(Z.real),
        L=float(Z.imag / sol.omega),
        C=float((current / frill.voltage).imag / sol.omega),
    )


def far_field(sol: CurrentSolution, directions: np.ndarray) -> np.ndarray:
    """
    r·E·e^{jk₀r} en las direcciones dadas: −jk₀/(4π)[η₀ N_⊥ + L×r̂]
    """
    space = sol.space
    mesh = space.mesh
    k0 = Wavenumber.exterior(sol.omega)
    r_hat = np.atleast_2d(directions)
    r_hat = r_hat / np.linalg.norm(r_hat, axis=1, keepdims=True)

    bary, w = triangle_rule(6)
    pts = np.einsum('qk,fkj->fqj', bary, mesh.corners)
    wa = w[None, :] * mesh.areas[:, None]

    def density(coeffs):
        c = coeffs[space.triangle_edges] * space.triangle_signs
        diff = pts[:, :, None, :] - mesh.corners[:, None, :, :]
        return np.einsum('fi,fqij->fqj', c, diff) / (2.0 * mesh.areas[:, None, None])

    J, M = density(sol.j), density(sol.m)
    phase = np.exp(1j * k0.k * np.einsum('dj,fqj->dfq', r_hat, pts)) * wa[None]
    N = np.einsum('dfq,fqj->dj', phase, J)
    Lm = np.einsum('dfq,fqj->dj', phase, M)
    N_perp = N - np.einsum('dj,dj->d', N, r_hat)[:, None] * r_hat
    return -1j * k0.k / (4 * np.pi) * (k0.eta * N_perp + np.cross(Lm, r_hat))


def skin_depth_fit(depth: Sequence[float], magnitude: Sequence[float]) -> float:
    """Longitud de decaimiento 1/e de |J| por mínimos cuadrados de ln|J| frente a la profundidad"""
    depth = np.asarray(depth, dtype=float)
    magnitude = np.abs(np.asarray(magnitude))
    keep = magnitude > 0
    slope, _ = np.polyfit(depth[keep], np.log(magnitude[keep]), 1)
    if slope >= 0:
        return float('inf')
    return float(-1.0 / slope)


def current_density(sol: CurrentSolution, E_interior: np.ndarray) -> np.ndarray:
    """J = (σ + jωε₀ε_r′)E en el interior del conductor"""
    mat = sol.material
    return (mat.sigma + 1j * sol.omega * settings.EPS0 * mat.eps_r_prime) * E_interior


def circuit_references(sigma: Optional[float] = None, major: float = 1.0, minor: float = 0.2,
                       plate_radius: float = 4.0, gap: float = 0.2) -> Dict[str, float]:
    """
    R_ct = 2R_M/(R_m²σ), L_ct = 1.807 µH, C_ct = ε₀πR_p²/d y la inductancia de anillo delgado
    """
    refs = {
        'L_ct': 1.807e-6,
        'L_thin_ring': float(settings.MU0 * major * (np.log(8 * major / minor) - 2.0)),
        'C_ct': float(settings.EPS0 * np.pi * plate_radius ** 2 / gap),
    }
    if sigma:
        refs['R_ct'] = float(2 * major / (minor ** 2 * sigma))
    return refs
