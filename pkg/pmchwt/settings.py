"""
Constantes físicas, tolerancias numéricas y ajustes de entorno
"""
import os
from typing import Any, Dict

import numpy as np
from dotenv import load_dotenv

load_dotenv()

# Constantes físicas (SI)
C0 = 299792458.0
MU0 = 4e-7 * np.pi
EPS0 = 1.0 / (MU0 * C0 ** 2)
ETA0 = np.sqrt(MU0 / EPS0)

# Tolerancias
PINV_RESIDUAL = 1e-12
QUADRATURE_TARGET = 1e-8
QUADRATURE_MAX_DEPTH = 24
GRAM_COND_LIMIT = 1e12
GMRES_TOL = 1e-10
ZERO_CURRENT = 1e-18
PROBE_STANDOFF = 0.1
DECAY_CUTOFF = 37.0

# Cotas de aceptación de los experimentos; [experiment.tolerances] las sustituye
ACCEPTANCE = {
    'cond_variation_max': 30.0,
    'rescaled_variation_min': 1e4,
    'R_rel': 0.05,
    'L_rel': 0.02,
    'C_rel': 0.15,
    'skin_depth_rel': 0.2,
    'mie_rms': 0.02,
}

# Ajustes desde variables de entorno
THREADS = int(os.getenv("PMCHWT_THREADS", "1"))
OUTPUT_DIR = os.getenv("PMCHWT_OUTPUT_DIR", "reportes")
LOG_LEVEL = os.getenv("PMCHWT_LOG_LEVEL", "INFO")
LU_THRESHOLD = int(os.getenv("PMCHWT_LU_THRESHOLD", "50000"))


def tolerances() -> Dict[str, Any]:
    """Tolerancias vigentes, para el eco en los metadatos de ejecución"""
    return {
        'pseudoinverse_residual': PINV_RESIDUAL,
        'quadrature_target': QUADRATURE_TARGET,
        'quadrature_max_depth': QUADRATURE_MAX_DEPTH,
        'gram_condition_limit': GRAM_COND_LIMIT,
        'gmres_tol': GMRES_TOL,
        'zero_current_A': ZERO_CURRENT,
        'laplacian_lu_threshold': LU_THRESHOLD,
        'acceptance': dict(ACCEPTANCE),
    }
