"""Model language: parsing, validation, presets, Euler-Lagrange and parity."""

from .model import (
    PRESETS,
    Equation,
    FieldDecl,
    LagrangianModel,
    SymmetryVerdict,
    check_discrete_symmetry,
    euler_lagrange,
    load_model,
    load_preset,
    parity_transform,
    parse_model,
    preset_source,
)
from .parser import DSLSyntaxError, ValidationError, parse_expr

__all__ = [
    "DSLSyntaxError", "Equation", "FieldDecl", "LagrangianModel", "PRESETS", "SymmetryVerdict",
    "ValidationError", "check_discrete_symmetry", "euler_lagrange", "load_model", "load_preset",
    "parity_transform", "parse_expr", "parse_model", "preset_source",
]
