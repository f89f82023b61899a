"""
Ajuste de pendientes log-log con semiancho de confianza
"""
from typing import Dict, Sequence

import numpy as np


def fit_slope(x: Sequence[float], y: Sequence[float]) -> Dict[str, float]:
    """
    Pendiente por mínimos cuadrados de log|y| frente a log x

    Returns:
        Diccionario con 'slope', 'intercept' y 'half_width' (2 errores estándar)
    """
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y))
    keep = (x > 0) & (y > 0) & np.isfinite(y)
    lx, ly = np.log(x[keep]), np.log(y[keep])
    if len(lx) < 2:
        return {'slope': float('nan'), 'intercept': float('nan'), 'half_width': float('nan')}
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, residuals, _, _ = np.linalg.lstsq(A, ly, rcond=None)
    half_width = 0.0
    if len(lx) > 2:
        sigma2 = float(np.sum((ly - A @ coef) ** 2)) / (len(lx) - 2)
        half_width = 2.0 * np.sqrt(sigma2 / np.sum((lx - lx.mean()) ** 2))
    return {'slope': float(coef[0]), 'intercept': float(coef[1]), 'half_width': float(half_width)}
