"""Optimality certificates for candidate measurements.

A measurement of a linearly independent ensemble is optimal exactly when it
is projective with the ensemble's rank profile and ``Z = sum_i p_i rho_i Pi_i``
is positive definite. The stationarity and global conditions are evaluated
as well and reported as independent cross-checks.
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import List, Tuple

import numpy as np

try:
    from .complex_linalg import ComplexMatrix, RankProfile, hermiticity_residual, min_eigenvalue, numerical_rank
    from .config import CERT_EIG_TOL, CERT_TOL
    from .ensemble import Ensemble, Povm, success_probability
except ImportError:
    from complex_linalg import ComplexMatrix, RankProfile, hermiticity_residual, min_eigenvalue, numerical_rank
    from config import CERT_EIG_TOL, CERT_TOL
    from ensemble import Ensemble, Povm, success_probability

logger = logging.getLogger(__name__)


@dataclass
class ProjectivityReport:
    projectivity_residual: float
    completeness_residual: float
    ranks: List[int] = field(default_factory=list)
    rank_ok: List[bool] = field(default_factory=list)


@dataclass
class Certificate:
    """Residuals of every optimality condition and the overall verdict."""

    projectivity_residual: float
    completeness_residual: float
    ranks: List[int]
    rank_ok: List[bool]
    stationarity_residual: float
    z_hermiticity_residual: float
    z_min_eigenvalue: float
    global_min_eigenvalue: float
    p_success: float
    trace_z: float
    tol: float = CERT_TOL
    eig_tol: float = CERT_EIG_TOL

    @property
    def passed(self) -> bool:
        return (
            self.projectivity_residual <= self.tol
            and self.completeness_residual <= self.tol
            and all(self.rank_ok)
            and self.stationarity_residual <= self.tol
            and self.z_min_eigenvalue > self.eig_tol
            and self.global_min_eigenvalue >= -self.tol
        )

    def failures(self) -> List[str]:
        """Names of the conditions that do not hold."""
        out = []
        if self.projectivity_residual > self.tol:
            out.append("projectivity")
        if self.completeness_residual > self.tol:
            out.append("completeness")
        if not all(self.rank_ok):
            out.append("rank")
        if self.stationarity_residual > self.tol:
            out.append("stationarity")
        if self.z_min_eigenvalue <= self.eig_tol:
            out.append("z_positivity")
        if self.global_min_eigenvalue < -self.tol:
            out.append("global")
        return out

    def to_dict(self) -> dict:
        data = asdict(self)
        data["passed"] = self.passed
        data["failures"] = self.failures()
        return data


def check_projective(pov: Povm, profile: RankProfile) -> ProjectivityReport:
    """Residuals of ``Pi_i Pi_j = delta_ij Pi_i``, ``sum Pi_i = I`` and the ranks."""
    elements = pov.elements
    projectivity = 0.0
    for i, Pi in enumerate(elements):
        for j, Pj in enumerate(elements):
            target = Pi if i == j else 0.0
            projectivity = max(projectivity, float(np.linalg.norm(Pi @ Pj - target)))
    completeness = float(np.linalg.norm(pov.total() - np.eye(pov.n)))
    ranks = [numerical_rank(el) for el in elements]
    rank_ok = [k < profile.m and r == profile.ranks[k] for k, r in enumerate(ranks)]
    if len(elements) != profile.m:
        rank_ok.append(False)
    return ProjectivityReport(projectivity, completeness, ranks, rank_ok)


def compute_Z(e: Ensemble, pov: Povm) -> Tuple[ComplexMatrix, float]:
    """``Z = sum_i p_i rho_i Pi_i`` and its Hermiticity residual.

    ``Z`` is Hermitian only at stationary points, so the residual is itself
    a stationarity indicator.
    """
    Z = sum(e.weighted(i) @ pov.elements[i] for i in range(e.m))
    return Z, hermiticity_residual(Z)


def stationarity_residual(e: Ensemble, pov: Povm) -> float:
    """``max_ij ||Pi_j (p_j rho_j - p_i rho_i) Pi_i||_F``."""
    worst = 0.0
    for i in range(e.m):
        for j in range(e.m):
            if i == j:
                continue
            term = pov.elements[j] @ (e.weighted(j) - e.weighted(i)) @ pov.elements[i]
            worst = max(worst, float(np.linalg.norm(term)))
    return worst


def dual_objective(e: Ensemble, Z: ComplexMatrix) -> Tuple[float, float]:
    """Dual value ``Tr Z`` and feasibility margin ``min_i lambda_min(Z - p_i rho_i)``.

    When the margin is non-negative, ``Tr Z`` bounds every success probability from above.
    """
    Z = np.asarray(Z, dtype=complex)
    margin = min(min_eigenvalue(Z - e.weighted(i)) for i in range(e.m))
    return float(np.trace(Z).real), margin


def check_optimal(e: Ensemble, pov: Povm, tol: float = CERT_TOL, eig_tol: float = CERT_EIG_TOL) -> Certificate:
    """Evaluate every optimality condition for ``pov`` on ``e``. Never raises.

    A measurement whose element count or dimension does not match the
    ensemble fails every condition.
    """
    if pov.profile.m != e.m or pov.n != e.n:
        logger.info(f"Measurement of profile {pov.profile} cannot measure an ensemble of profile {e.profile}")
        inf = float("inf")
        return Certificate(
            projectivity_residual=inf,
            completeness_residual=inf,
            ranks=[numerical_rank(el) for el in pov.elements],
            rank_ok=[False],
            stationarity_residual=inf,
            z_hermiticity_residual=inf,
            z_min_eigenvalue=-inf,
            global_min_eigenvalue=-inf,
            p_success=float("nan"),
            trace_z=float("nan"),
            tol=tol,
            eig_tol=eig_tol,
        )
    proj = check_projective(pov, e.profile)
    Z, z_herm = compute_Z(e, pov)
    Zh = 0.5 * (Z + Z.conj().T)
    trace_z, global_min = dual_objective(e, Zh)
    cert = Certificate(
        projectivity_residual=proj.projectivity_residual,
        completeness_residual=proj.completeness_residual,
        ranks=proj.ranks,
        rank_ok=proj.rank_ok,
        stationarity_residual=stationarity_residual(e, pov),
        z_hermiticity_residual=z_herm,
        z_min_eigenvalue=min_eigenvalue(Zh),
        global_min_eigenvalue=global_min,
        p_success=success_probability(e, pov),
        trace_z=trace_z,
        tol=tol,
        eig_tol=eig_tol,
    )
    if not cert.passed:
        logger.info(f"Certificate failed: {cert.failures()}")
    return cert
