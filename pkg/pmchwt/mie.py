"""
Serie de Mie para una esfera homogénea (recurrencias de Bohren-Huffman)

Referencia independiente del solver de superficie: amplitudes S1(θ) y S2(θ)
para ángulos arbitrarios, con la derivada logarítmica calculada por recurrencia
descendente.
"""
import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from pmchwt.settings import EPS0

logger = logging.getLogger(__name__)

MAX_TERMS = 150000


@dataclass(frozen=True, eq=False)
class MieAmplitudes:
    S1: np.ndarray
    S2: np.ndarray
    qext: float
    qsca: float
    n_terms: int


def _log_derivative(y: complex, n_start: int) -> np.ndarray:
    d = np.zeros(n_start + 1, dtype=complex)
    for n in range(n_start, 0, -1):
        d[n - 1] = n / y - 1.0 / (d[n] + n / y)
    return d


def mie_coefficients(x: float, m: complex) -> Tuple[np.ndarray, np.ndarray]:
    """Coeficientes a_n, b_n para n = 1..n_stop"""
    if x <= 0:
        raise ValueError("El parámetro de tamaño debe ser positivo")
    y = x * m
    x_stop = x + 4.0 * x ** (1.0 / 3.0) + 2.0
    n_stop = int(x_stop)
    n_mx = int(max(x_stop, abs(y))) + 15
    if n_mx > MAX_TERMS:
        raise ValueError(f"Demasiados términos en la serie: {n_mx}")
    d = _log_derivative(y, n_mx)

    # Riccati-Bessel por recurrencia ascendente
    psi0, psi1 = np.cos(x), np.sin(x)
    chi0, chi1 = -np.sin(x), np.cos(x)
    xi1 = psi1 - 1j * chi1
    a = np.zeros(n_stop, dtype=complex)
    b = np.zeros(n_stop, dtype=complex)
    for n in range(1, n_stop + 1):
        psi = (2.0 * n - 1.0) * psi1 / x - psi0
        chi = (2.0 * n - 1.0) * chi1 / x - chi0
        xi = psi - 1j * chi
        da = d[n] / m + n / x
        db = m * d[n] + n / x
        a[n - 1] = (da * psi - psi1) / (da * xi - xi1)
        b[n - 1] = (db * psi - psi1) / (db * xi - xi1)
        psi0, psi1 = psi1, psi
        chi0, chi1 = chi1, chi
        xi1 = psi1 - 1j * chi1
    return a, b


def bhmie(x: float, m: complex, angles: Sequence[float]) -> MieAmplitudes:
    """
    Amplitudes de dispersión de una esfera

    Args:
        x: Parámetro de tamaño k·a en el medio exterior
        m: Índice de refracción relativo (convención e^{-iωt}: parte imaginaria ≥ 0)
        angles: Ángulos de dispersión en radianes

    Returns:
        MieAmplitudes con S1 (plano perpendicular) y S2 (plano paralelo)
    """
    a, b = mie_coefficients(x, m)
    mu = np.cos(np.asarray(angles, dtype=float))

    pi0 = np.zeros_like(mu)
    pi1 = np.ones_like(mu)
    S1 = np.zeros(mu.shape, dtype=complex)
    S2 = np.zeros(mu.shape, dtype=complex)
    for n in range(1, len(a) + 1):
        fn = (2.0 * n + 1.0) / (n * (n + 1.0))
        pi = pi1
        tau = n * mu * pi - (n + 1.0) * pi0
        S1 += fn * (a[n - 1] * pi + b[n - 1] * tau)
        S2 += fn * (a[n - 1] * tau + b[n - 1] * pi)
        pi1 = ((2.0 * n + 1.0) * mu * pi - (n + 1.0) * pi0) / n
        pi0 = pi

    orders = 2.0 * np.arange(1, len(a) + 1) + 1.0
    forward = np.sum(orders * (a + b)) / 2.0
    qsca = 2.0 / x ** 2 * float(np.sum(orders * (np.abs(a) ** 2 + np.abs(b) ** 2)))
    logger.debug(f"Mie: x={x:.4g}, m={m}, {len(a)} términos")
    return MieAmplitudes(S1=S1, S2=S2, qext=float(4.0 / x ** 2 * forward.real),
                         qsca=qsca, n_terms=len(a))


def relative_index(eps_r_prime: float, sigma: float, omega: float, mu_r: float = 1.0) -> complex:
    """Índice relativo en convención e^{-iωt} a partir de ε_r' y σ del solver (e^{jωt})"""
    eps = eps_r_prime - 1j * sigma / (omega * EPS0)
    return complex(np.conj(np.sqrt(eps * mu_r)))
