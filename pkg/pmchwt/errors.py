"""
Jerarquía de errores del solver con registro legible por máquina
"""
from typing import Any, Dict, List, Optional


class PmchwtError(Exception):
    """Error base; `code` es estable y aparece en el registro de error del CLI"""

    code = "pmchwt_error"

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.field = field

    def to_record(self) -> Dict[str, Any]:
        return {
            'error': type(self).__name__,
            'code': self.code,
            'message': self.message,
            'field': self.field,
        }


class MeshParseError(PmchwtError):
    code = "mesh_parse"


class UnsupportedElementError(MeshParseError):
    code = "mesh_unsupported_element"


class OpenSurfaceError(PmchwtError):
    code = "mesh_open_surface"


class NonOrientableError(PmchwtError):
    code = "mesh_non_orientable"


class MultiComponentError(PmchwtError):
    code = "mesh_multi_component"


class DegenerateTriangleError(PmchwtError):
    code = "mesh_degenerate_triangle"


class SingularGramError(PmchwtError):
    code = "gram_singular"


class SolverConvergenceError(PmchwtError):
    """Un solver iterativo no alcanzó la tolerancia pedida"""

    code = "solver_nonconvergence"

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residuo alcanzado {residual:.3e})")
        self.residual = residual

    def to_record(self) -> Dict[str, Any]:
        record = super().to_record()
        record['residual'] = self.residual
        return record


class QuadratureError(PmchwtError):
    code = "quadrature_failure"


class CoincidentPointsError(PmchwtError):
    code = "coincident_points"


class DimensionMismatchError(PmchwtError):
    code = "dimension_mismatch"


class MismatchedMeshError(PmchwtError):
    code = "mismatched_mesh"


class RingIntersectionError(PmchwtError):
    code = "frill_intersects_surface"


class ProbeTooCloseError(PmchwtError):
    code = "probe_too_close"


class ZeroCurrentError(PmchwtError):
    code = "zero_current"


class ConfigError(PmchwtError):
    """Configuración inválida; lleva todas las violaciones encontradas"""

    code = "invalid_config"

    def __init__(self, message: str, violations: Optional[List[Dict[str, Any]]] = None,
                 field: Optional[str] = None):
        self.violations = violations or []
        if field is None and self.violations:
            field = self.violations[0].get('field')
        super().__init__(message, field=field)

    def to_record(self) -> Dict[str, Any]:
        record = super().to_record()
        record['violations'] = self.violations
        return record
