"""
Excitaciones: anillo de corriente magnética (frill) y onda plana, probadas con las RWG
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Tuple

import numpy as np

from pmchwt import settings
from pmchwt.basis_spaces import RwgSpace
from pmchwt.bem_operators import Wavenumber
from pmchwt.errors import ConfigError, RingIntersectionError
from pmchwt.mesh_topology import TriangleMesh, distance_to_surface, winding_numbers
from pmchwt.quadrature import triangle_rule

logger = logging.getLogger(__name__)

RING_POINTS = 64
RING_MAX_POINTS = 4096
RING_TOLERANCE = 1e-8
TEST_RULE = 6

FieldFunction = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]


def _unit(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ConfigError(f"El vector {name} no puede ser nulo", field=f"excitation.{name}")
    return v / norm


@dataclass(frozen=True)
class FrillSource:
    """
    Anillo de corriente magnética I_m = −V a lo largo de φ̂ (regla de la mano derecha sobre `axis`)

    La fuerza electromotriz a lo largo de +axis a través del centro del anillo es +V.
    """

    center: np.ndarray
    axis: np.ndarray
    radius: float
    voltage: float = 1.0
    placement: str = 'inductive'

    def __post_init__(self):
        if self.radius <= 0:
            raise ConfigError("El radio del frill debe ser positivo", field='excitation.radius')
        if self.placement not in ('inductive', 'capacitive'):
            raise ConfigError(f"Colocación desconocida: {self.placement}", field='excitation.placement')
        object.__setattr__(self, 'center', np.asarray(self.center, dtype=float))
        object.__setattr__(self, 'axis', _unit(self.axis, 'axis'))

    def ring(self, n: int) -> Tuple[np.ndarray, np.ndarray, float]:
        """Nodos, tangentes unitarias y paso de arco de la regla trapezoidal periódica"""
        helper = np.eye(3)[int(np.argmin(np.abs(self.axis)))]
        e1 = np.cross(self.axis, helper)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(self.axis, e1)
        phi = 2 * np.pi * np.arange(n) / n
        nodes = self.center + self.radius * (np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2)
        tangents = -np.sin(phi)[:, None] * e1 + np.cos(phi)[:, None] * e2
        return nodes, tangents, 2 * np.pi * self.radius / n


@dataclass(frozen=True)
class PlaneWave:
    """E = E₀ p̂ e^{-jk₀ k̂·r}, H = k̂×E/η₀"""

    direction: np.ndarray
    polarization: np.ndarray
    amplitude: float = 1.0
    medium: str = field(default='exterior')

    def __post_init__(self):
        d = _unit(self.direction, 'direction')
        p = _unit(self.polarization, 'polarization')
        if abs(float(d @ p)) > 1e-12:
            raise ConfigError("La polarización debe ser ortogonal a la dirección de propagación",
                              field='excitation.polarization')
        object.__setattr__(self, 'direction', d)
        object.__setattr__(self, 'polarization', p)

    def fields(self, points: np.ndarray, k: Wavenumber) -> Tuple[np.ndarray, np.ndarray]:
        phase = np.exp(-1j * k.k * (points @ self.direction))
        E = self.amplitude * phase[..., None] * self.polarization
        H = np.cross(self.direction, E) / k.eta
        return E, H


def frill_fields(frill: FrillSource, points: np.ndarray, k: Wavenumber,
                 n_ring: int = RING_POINTS) -> Tuple[np.ndarray, np.ndarray]:
    """
    Campos del anillo: E = −∮∇G × M dl', H = −j(k/η)∮G M dl'

    El término de gradiente de H se anula porque la corriente del anillo es constante.
    """
    points = np.asarray(points, dtype=float)
    shape = points.shape
    p = points.reshape(-1, 3)
    nodes, tangents, dl = frill.ring(n_ring)
    current = -frill.voltage
    E = np.zeros((len(p), 3), dtype=complex)
    H = np.zeros((len(p), 3), dtype=complex)
    kv = k.k
    for start in range(0, len(p), 2048):
        diff = p[start:start + 2048, None, :] - nodes[None]
        R = np.linalg.norm(diff, axis=2)
        phase = np.exp(-1j * kv * R)
        G = phase / (4 * np.pi * R)
        g = -(1.0 + 1j * kv * R) * phase / (4 * np.pi * R ** 3)
        grad = diff * g[..., None]
        E[start:start + 2048] = -current * dl * np.cross(grad, tangents[None]).sum(axis=1)
        H[start:start + 2048] = -1j * kv / k.eta * current * dl * np.einsum('pq,qj->pj', G, tangents)
    return E.reshape(shape), H.reshape(shape)


def tested_moments(space: RwgSpace, fields: FieldFunction, n: int = TEST_RULE) -> Tuple[np.ndarray, np.ndarray]:
    """
    e_m = −⟨f_m, E⟩ y h_m = −⟨f_m, H⟩ (equivalente a ⟨n̂×f_m, −n̂×E⟩)
    """
    mesh = space.mesh
    bary, w = triangle_rule(n)
    points = np.einsum('qk,fkj->fqj', bary, mesh.corners)
    E, H = fields(points)
    wa = w[None, :] * mesh.areas[:, None]

    out = []
    for F in (E, H):
        # ∫_T (r − p_i)·F para el vértice libre p_i de cada arista local
        rF = np.einsum('fq,fqj,fqj->f', wa, points, F)
        intF = np.einsum('fq,fqj->fj', wa, F)
        local = rF[:, None] - np.einsum('fij,fj->fi', mesh.corners, intF)
        local *= space.triangle_signs / (2.0 * mesh.areas[:, None])
        tested = np.zeros(space.dimension, dtype=complex)
        np.add.at(tested, space.triangle_edges, local)
        out.append(-tested)
    return out[0], out[1]


def check_ring_clearance(frill: FrillSource, mesh: TriangleMesh, n: int = 256) -> float:
    """Distancia mínima anillo-superficie; error si el anillo corta la superficie o entra en ella"""
    nodes, _, _ = frill.ring(n)
    winding = winding_numbers(mesh, nodes)
    distance = float(distance_to_surface(mesh, nodes).min())
    if np.any(np.abs(winding) > 0.5) or distance < 1e-9 * mesh.characteristic_length:
        raise RingIntersectionError(
            f"El anillo del frill (radio {frill.radius}) corta la superficie o entra en el cuerpo",
            field='excitation.radius')
    return distance


def frill_rhs(frill: FrillSource, space: RwgSpace, omega: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    RHS (e, h) del frill en el medio exterior; la regla del anillo se duplica
    hasta que el cambio relativo es menor que RING_TOLERANCE
    """
    check_ring_clearance(frill, space.mesh)
    k0 = Wavenumber.exterior(omega)
    if frill.voltage == 0:
        zeros = np.zeros(space.dimension, dtype=complex)
        return zeros, zeros.copy()

    n = RING_POINTS
    e, h = tested_moments(space, lambda p: frill_fields(frill, p, k0, n))
    while n < RING_MAX_POINTS:
        n *= 2
        e2, h2 = tested_moments(space, lambda p: frill_fields(frill, p, k0, n))
        change = (np.linalg.norm(e2 - e) + settings.ETA0 * np.linalg.norm(h2 - h)) / (
            np.linalg.norm(e2) + settings.ETA0 * np.linalg.norm(h2))
        e, h = e2, h2
        if change < RING_TOLERANCE:
            break
    else:
        logger.warning(f"Regla del anillo sin converger con {n} puntos")
    logger.debug(f"Frill: regla del anillo con {n} puntos")
    return e, h


def planewave_rhs(pw: PlaneWave, space: RwgSpace, omega: float) -> Tuple[np.ndarray, np.ndarray]:
    k0 = Wavenumber.exterior(omega)
    if pw.amplitude == 0:
        zeros = np.zeros(space.dimension, dtype=complex)
        return zeros, zeros.copy()
    return tested_moments(space, lambda p: pw.fields(p, k0))
