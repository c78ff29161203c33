"""Exact linear algebra over rational functions of the constants.

Thin wrappers around sympy's ``DomainMatrix``; everything here is
infrastructure, the analysis itself lives in :mod:`.pipeline`.
"""

from __future__ import annotations

import sympy
from sympy.polys.matrices import DomainMatrix

from ..symcore import Expr
from ..symcore.bridge import mono_to_sympy


def _dm(M: sympy.Matrix) -> DomainMatrix:
    return DomainMatrix.from_Matrix(M).to_field()


def rank(M: sympy.Matrix) -> int:
    if M.rows == 0 or M.cols == 0 or all(v == 0 for v in M):
        return 0
    return _dm(M).rank()


def nullspace(M: sympy.Matrix) -> list:
    """Right null vectors as column matrices with denominators cleared."""
    if M.cols == 0:
        return []
    if M.rows == 0 or all(v == 0 for v in M):
        return [sympy.eye(M.cols)[:, n] for n in range(M.cols)]
    ns = _dm(M).nullspace().to_Matrix()
    return [clean_vector(ns[n, :].T) for n in range(ns.rows)]


def inverse(M: sympy.Matrix) -> sympy.Matrix:
    return _dm(M).inv().to_Matrix().applyfunc(sympy.factor)


def clean_vector(v: sympy.Matrix) -> sympy.Matrix:
    """Scale to polynomial entries with no common factor; first nonzero entry positive."""
    v = v.applyfunc(sympy.cancel)
    den = sympy.Integer(1)
    for x in v:
        den = sympy.lcm(den, sympy.denom(x))
    v = (v * den).applyfunc(sympy.expand)
    nz = [x for x in v if x != 0]
    if not nz:
        return v
    g = nz[0]
    for x in nz[1:]:
        g = sympy.gcd(g, x)
    v = v.applyfunc(lambda x: sympy.cancel(x / g))
    if sympy.cancel(nz[0] / g).could_extract_minus_sign():
        v = -v
    return v


def jet_vectors(exprs: list) -> tuple:
    """Coordinates of explicit (index-free) expressions in their joint basis of
    atom products.  Returns (matrix with one column per expression, basis)."""
    basis: dict = {}
    cols = []
    for e in exprs:
        col = {}
        for val, mono, atoms in e.terms:
            key = atoms
            if key not in basis:
                basis[key] = len(basis)
            col[basis[key]] = col.get(basis[key], 0) + mono_to_sympy(val, mono)
        cols.append(col)
    M = sympy.zeros(len(basis), len(exprs))
    for c, col in enumerate(cols):
        for r, v in col.items():
            M[r, c] = v
    return M, list(basis)


def in_span(target: list, generators: list) -> bool:
    """True when every expression of ``target`` is a constant-coefficient
    combination of ``generators``."""
    if all(t.is_zero() for t in target):
        return True
    if not generators:
        return False
    M, _ = jet_vectors(list(generators) + list(target))
    g = len(generators)
    return rank(M[:, :g]) == rank(M)


def sympy_text(v) -> str:
    return str(sympy.factor(v)) if v != 0 else "0"


def exact_scalar(e: Expr):
    """sympy value of an atom-free expression (None otherwise)."""
    cv = e.constant_value()
    if cv is None:
        return None
    return mono_to_sympy(*cv)
