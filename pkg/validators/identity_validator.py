"""
Validador de identidades algebraicas de la discretización
"""
from functools import cached_property
from typing import Dict, Optional

import numpy as np

from pmchwt import settings
from pmchwt.basis_spaces import dual_gram_check
from pmchwt.bem_operators import OperatorMatrices, Wavenumber, assemble_operators
from pmchwt.excitation import PlaneWave, planewave_rhs
from pmchwt.pmchwt_system import Discretization
from pmchwt.quasi_helmholtz import ProjectorKind


class IdentityValidator:
    """Comprueba ΣᵀΛ = 0, proyectores, cancelaciones de Λ y la Gram dual a una pulsación dada"""

    def __init__(self, disc: Discretization, omega: float, threads: Optional[int] = None):
        self.disc = disc
        self.omega = omega
        self.threads = threads
        self.validation_results = {}
        self.errors = []

    @cached_property
    def operators(self) -> OperatorMatrices:
        return assemble_operators(self.disc.rwg, Wavenumber.exterior(self.omega), self.threads)

    @cached_property
    def static_operators(self) -> OperatorMatrices:
        return assemble_operators(self.disc.rwg, Wavenumber.static(), self.threads)

    def _record(self, name: str, value: float, bound: float, message: str) -> Dict:
        result = {
            'rule': name,
            'value': float(value),
            'bound': float(bound),
            'passed': bool(value <= bound),
            'message': message,
        }
        self.validation_results[name] = result
        if not result['passed']:
            self.errors.append(f"{name}: {value:.3e} supera la cota {bound:.1e}")
        return result

    def validate_incidence_orthogonality(self) -> Dict:
        """ΣᵀΛ debe anularse exactamente (aritmética entera)"""
        product = (self.disc.incidence.Sigma.T @ self.disc.incidence.Lambda).tocoo()
        value = float(np.abs(product.data).max()) if product.nnz else 0.0
        return self._record('sigma_t_lambda', value, 0.0, f"max |ΣᵀΛ| = {value:g}")

    def validate_projectors(self, tol: float = 1e-10, n_vectors: int = 4) -> Dict:
        """Idempotencia y complementariedad de los proyectores primales y duales"""
        P = self.disc.projectors
        rng = np.random.default_rng(0)
        X = rng.standard_normal((P.size, n_vectors))
        norm = np.linalg.norm(X)
        worst = 0.0
        for kind in ProjectorKind:
            Y = P.apply(kind, X)
            worst = max(worst, np.linalg.norm(P.apply(kind, Y) - Y) / norm)
        worst = max(worst, np.linalg.norm(P.P_Sigma(P.P_LambdaH(X))) / norm,
                    np.linalg.norm(P.Pd_Lambda(P.Pd_SigmaH(X))) / norm)
        return self._record('projectors', worst, tol, f"idempotencia/complementariedad {worst:.2e}")

    def validate_loop_tphi(self, tol: float = 1e-10) -> Dict:
        """‖ΛᵀT_Φ‖_F / ‖T_Φ‖_F: los lazos no tienen divergencia"""
        TPhi = self.operators.TPhi
        value = np.linalg.norm(self.disc.incidence.Lambda.T @ TPhi) / np.linalg.norm(TPhi)
        return self._record('lambda_t_tphi', value, tol, f"‖ΛᵀT_Φ‖/‖T_Φ‖ = {value:.2e}")

    def validate_loop_k(self, tol: float = 1e-6) -> Dict:
        """‖ΛᵀK₀Λ‖_F / ‖K₀‖_F sobre el operador estático, limitado por la cuadratura"""
        K = self.static_operators.K
        Lam = self.disc.incidence.Lambda
        value = np.linalg.norm(Lam.T @ (Lam.T @ K.T).T) / np.linalg.norm(K)
        return self._record('lambda_t_k_lambda', value, tol, f"‖ΛᵀK₀Λ‖/‖K₀‖ = {value:.2e}")

    def validate_k_symmetry(self, tol: float = 1e-6) -> Dict:
        K = self.operators.K
        value = np.linalg.norm(K - K.T) / np.linalg.norm(K)
        return self._record('k_symmetry', value, tol, f"‖K − Kᵀ‖/‖K‖ = {value:.2e}")

    def validate_dual_gram(self, tol: float = 1e-10) -> Dict:
        """La Gram dual calculada por separado coincide con −Gᵀ"""
        G = self.disc.grams.G
        Gd = dual_gram_check(self.disc.rwg, self.disc.bc)
        value = np.linalg.norm(Gd + G.T) / np.linalg.norm(G)
        return self._record('dual_gram', value, tol, f"‖𝔾 + Gᵀ‖/‖G‖ = {value:.2e}")

    def validate_gram_condition(self) -> Dict:
        cond = self.disc.grams.condition_number
        return self._record('gram_condition', cond, settings.GRAM_COND_LIMIT, f"cond(G) = {cond:.3e}")

    def validate_planewave_polarization(self, tol: float = 1e-10) -> Dict:
        """h(p̂) = e(k̂×p̂)/η₀ para ondas planas en el medio exterior"""
        d = np.array([0.0, 0.0, 1.0])
        p = np.array([1.0, 0.0, 0.0])
        _, h = planewave_rhs(PlaneWave(d, p), self.disc.rwg, self.omega)
        e, _ = planewave_rhs(PlaneWave(d, np.cross(d, p)), self.disc.rwg, self.omega)
        value = np.linalg.norm(h - e / settings.ETA0) / np.linalg.norm(h)
        return self._record('planewave_polarization', value, tol, f"‖h − e/η₀‖/‖h‖ = {value:.2e}")

    def validate_all(self) -> Dict:
        self.validate_incidence_orthogonality()
        self.validate_projectors()
        self.validate_loop_tphi()
        self.validate_loop_k()
        self.validate_k_symmetry()
        self.validate_dual_gram()
        self.validate_gram_condition()
        self.validate_planewave_polarization()
        return self.get_summary()

    def get_summary(self) -> Dict:
        """Retorna un resumen de todas las validaciones"""
        total_tests = len(self.validation_results)
        passed_tests = sum(1 for r in self.validation_results.values() if r['passed'])

        return {
            'overall_passed': passed_tests == total_tests,
            'total_tests': total_tests,
            'passed_tests': passed_tests,
            'failed_tests': total_tests - passed_tests,
            'errors': self.errors,
            'details': self.validation_results
        }

    def print_report(self):
        """Imprime un reporte de validación"""
        summary = self.get_summary()

        print("\n" + "=" * 80)
        print("REPORTE DE IDENTIDADES ALGEBRAICAS")
        print("=" * 80)
        print(f"Total pruebas: {summary['total_tests']}")
        print(f"Pruebas exitosas: {summary['passed_tests']}")
        print(f"Pruebas fallidas: {summary['failed_tests']}")

        if summary['errors']:
            print("\n❌ ERRORES ENCONTRADOS:")
            for error in summary['errors']:
                print(f"  - {error}")

        print("\n📊 DETALLE DE VALIDACIONES:")
        for name, result in self.validation_results.items():
            status = "✅" if result['passed'] else "❌"
            print(f"  {status} {name}: {result['message']}")
