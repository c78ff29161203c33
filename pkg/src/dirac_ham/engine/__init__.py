"""The Dirac constraint algorithm and the analysis report built from it."""

from .brackets import poisson_bracket
from .pipeline import (
    Constraint,
    DofCount,
    EngineError,
    InconsistentTheory,
    KernelMatrix,
    SingularW,
    Unsupported,
    VelocityResidue,
    canonical_hamiltonian,
    classify,
    compute_momenta,
    constraint_matrix,
    count_dof,
    dirac_bracket,
    hessian,
    primary_constraints,
    reducibility,
    run_consistency,
)
from .report import AnalysisReport, analyze

__all__ = [
    "AnalysisReport", "Constraint", "DofCount", "EngineError", "InconsistentTheory", "KernelMatrix",
    "SingularW", "Unsupported", "VelocityResidue", "analyze", "canonical_hamiltonian", "classify",
    "compute_momenta", "constraint_matrix", "count_dof", "dirac_bracket", "hessian", "poisson_bracket",
    "primary_constraints", "reducibility", "run_consistency",
]
