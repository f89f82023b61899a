"""
Solver PMCHWT de baja frecuencia con precondicionadores de proyectores quasi-Helmholtz
"""
import logging

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())
