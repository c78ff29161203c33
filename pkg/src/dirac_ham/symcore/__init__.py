"""Symbolic core: exact tensor expressions and the calculus used by the engine."""

from .atoms import (
    DIM,
    Atom,
    Kind,
    constraint_atom,
    dirac,
    eps,
    fderiv,
    field,
    fresh_names,
    fresh_point,
    kron,
    momentum,
    multiplier,
)
from .calculus import (
    D,
    Dt,
    Functional,
    apply_derivs,
    families,
    integrate_by_parts,
    integrate_point,
    is_null_density,
    local_variation,
    localize,
    partial,
    substitute,
    variation,
)
from .coefficient import BUILTIN_SYMBOLS, Coefficient
from .errors import NotAFunctional, SymcoreError, UnbalancedIndices
from .expr import Expr, canonicalize, components, equal_components, expand_components


def functional_derivative(F, kind: Kind, name: str, out_indices=(), point: str = "y") -> Expr:
    """delta F / delta q(point).

    ``F`` may be a :class:`Functional` (result is local at ``point``) or a
    local :class:`Expr` (result is a kernel in ``ddelta``).
    """
    if isinstance(F, Functional):
        return F.derivative(kind, name, out_indices, point)
    return local_variation(F, kind, name, out_indices, point)


__all__ = [
    "Atom", "BUILTIN_SYMBOLS", "Coefficient", "D", "DIM", "Dt", "Expr", "Functional", "Kind",
    "NotAFunctional", "SymcoreError", "UnbalancedIndices", "apply_derivs", "canonicalize",
    "components", "constraint_atom", "dirac", "eps", "equal_components", "expand_components",
    "families", "fderiv", "field", "fresh_names", "fresh_point", "functional_derivative",
    "integrate_by_parts", "integrate_point", "is_null_density", "kron", "local_variation",
    "localize", "momentum", "multiplier", "partial", "substitute", "variation",
]
