"""Independent numerical checks on a periodic lattice."""

from .checks import OracleUnsupported, evolution_rhs, run_oracle
from .evolution import Trajectory, evolve, mode_operators, per_mode_ranks, plane_wave
from .lattice import (
    FieldState,
    LatticeConfig,
    LatticeExpr,
    UnstableStep,
    evaluate,
    finite_difference_derivative,
    numeric_functional,
    random_state,
    transverse_project,
    zero_state,
)
from .matrix import (
    NumericMatrix,
    assemble_from_jacobian,
    assemble_symbolic,
    numeric_constraint_matrix,
    numeric_rank,
    read_matrix,
    write_matrix,
)

__all__ = [
    "FieldState", "LatticeConfig", "LatticeExpr", "NumericMatrix", "OracleUnsupported", "Trajectory",
    "UnstableStep", "assemble_from_jacobian", "assemble_symbolic", "evaluate", "evolution_rhs", "evolve",
    "finite_difference_derivative", "mode_operators", "numeric_constraint_matrix", "numeric_functional",
    "numeric_rank", "per_mode_ranks", "plane_wave", "random_state", "read_matrix", "run_oracle",
    "transverse_project", "write_matrix", "zero_state",
]
