"""Helpers for index blocks: Kronecker products, isotropy, explicit components."""

from __future__ import annotations

import itertools
from fractions import Fraction

from .atoms import DIM, kron
from .expr import Expr, expand_components


def kdelta(rows, cols) -> Expr:
    """prod_r delta[rows[r], cols[r]]"""
    out = Expr.number(1)
    for a, b in zip(rows, cols):
        out = out * Expr.atom(kron(a, b))
    return out


def isotropic_scalar(block: Expr, rows, cols):
    """If ``block`` equals ``s * kdelta(rows, cols)`` return ``s``, else None."""
    if block.is_zero():
        return Expr.zero()
    if len(rows) != len(cols):
        return None
    basis = kdelta(rows, cols)
    s = (block * basis) / Fraction(DIM ** len(rows))
    if (block - s * basis).is_zero():
        return s
    return None


def index_values(rank: int) -> list:
    return list(itertools.product(range(1, DIM + 1), repeat=rank))


def component(e: Expr, names, values) -> Expr:
    """The explicit component with free ``names`` set to ``values``."""
    return expand_components(e.rename_indices(dict(zip(names, values))))
