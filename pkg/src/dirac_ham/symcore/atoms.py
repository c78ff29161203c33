"""Atomic factors of a product term.

Indices are either symbols (``str``) or concrete spatial components
(``int`` in 1..3).  Upper and lower positions are not distinguished: the
metric is Euclidean.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum
from functools import lru_cache
from typing import Union

Index = Union[str, int]

DIM = 3
ALPHABET = ("i", "j", "k", "l", "m", "n", "p", "q", "r", "s")
POINT_ORDER = ("x", "y", "z", "w", "v", "s", "t")


class Kind(IntEnum):
    # the order is the left-to-right order of factors in canonical products;
    # functional-derivative operators always sit rightmost
    EPSILON = 0
    KRONECKER = 1
    FIELD = 2
    MOMENTUM = 3
    MULTIPLIER = 4
    CONSTRAINT = 5
    DELTA = 6
    FDERIV = 7


TENSOR_KINDS = (Kind.FIELD, Kind.MOMENTUM, Kind.MULTIPLIER, Kind.CONSTRAINT, Kind.FDERIV)


def index_key(ix: Index):
    return (0, ix, "") if isinstance(ix, int) else (1, 0, ix)


def point_key(p: str):
    if p in POINT_ORDER:
        return (0, POINT_ORDER.index(p), "")
    return (1, 0, p)


@dataclass(frozen=True)
class Atom:
    kind: Kind
    name: str = ""
    indices: tuple = ()
    derivs: tuple = ()
    tderiv: int = 0
    points: tuple = ("x",)

    @property
    def point(self) -> str:
        return self.points[0]

    def all_indices(self) -> tuple:
        return self.indices + self.derivs

    def rename(self, mapping: dict) -> "Atom":
        if not mapping:
            return self
        idx = tuple(mapping.get(i, i) for i in self.indices)
        der = tuple(mapping.get(i, i) for i in self.derivs)
        return replace(self, indices=idx, derivs=der)

    def at(self, mapping: dict) -> "Atom":
        pts = tuple(mapping.get(p, p) for p in self.points)
        return self if pts == self.points else replace(self, points=pts)

    def with_deriv(self, ix: Index) -> "Atom":
        return replace(self, derivs=tuple(sorted(self.derivs + (ix,), key=index_key)))


def field(name: str, *indices: Index, point: str = "x", derivs=(), tderiv: int = 0) -> Atom:
    return Atom(Kind.FIELD, name, tuple(indices), tuple(sorted(derivs, key=index_key)), tderiv, (point,))


def momentum(name: str, *indices: Index, point: str = "x", derivs=()) -> Atom:
    return Atom(Kind.MOMENTUM, name, tuple(indices), tuple(sorted(derivs, key=index_key)), 0, (point,))


def multiplier(name: str, *indices: Index, point: str = "x", derivs=()) -> Atom:
    return Atom(Kind.MULTIPLIER, name, tuple(indices), tuple(sorted(derivs, key=index_key)), 0, (point,))


def constraint_atom(label: str, *indices: Index, point: str = "x", derivs=()) -> Atom:
    return Atom(Kind.CONSTRAINT, label, tuple(indices), tuple(sorted(derivs, key=index_key)), 0, (point,))


def fderiv(name: str, *indices: Index, point: str = "x") -> Atom:
    return Atom(Kind.FDERIV, name, tuple(indices), (), 0, (point,))


def eps(a: Index, b: Index, c: Index) -> Atom:
    return Atom(Kind.EPSILON, "", (a, b, c), (), 0, ())


def kron(a: Index, b: Index) -> Atom:
    return Atom(Kind.KRONECKER, "", (a, b), (), 0, ())


def dirac(p: str, q: str, derivs=()) -> Atom:
    """delta(p - q); ``derivs`` act on the first point."""
    return Atom(Kind.DELTA, "", (), tuple(sorted(derivs, key=index_key)), 0, (p, q))


@lru_cache(maxsize=None)
def atom_key(a: Atom) -> tuple:
    return (
        int(a.kind),
        a.name,
        tuple(point_key(p) for p in a.points),
        a.tderiv,
        tuple(index_key(i) for i in a.derivs),
        tuple(index_key(i) for i in a.indices),
    )


def permutation_sign(seq: list) -> int:
    """Sign of the permutation sorting ``seq`` (0 if it has repeats)."""
    keys = [index_key(s) for s in seq]
    if len(set(keys)) != len(keys):
        return 0
    sign = 1
    keys = list(keys)
    for i in range(len(keys)):
        for j in range(len(keys) - 1 - i):
            if keys[j] > keys[j + 1]:
                keys[j], keys[j + 1] = keys[j + 1], keys[j]
                sign = -sign
    return sign


def normalize_atom(a: Atom) -> tuple[int, Atom]:
    """Bring one atom to its normal form.  Returns (sign, atom); sign 0 means
    the atom vanishes identically."""
    if a.kind == Kind.EPSILON:
        s = permutation_sign(list(a.indices))
        if s == 0:
            return 0, a
        return s, replace(a, indices=tuple(sorted(a.indices, key=index_key)))
    if a.kind == Kind.KRONECKER:
        return 1, replace(a, indices=tuple(sorted(a.indices, key=index_key)))
    derivs = tuple(sorted(a.derivs, key=index_key))
    if a.kind == Kind.DELTA:
        p, q = a.points
        if point_key(p) > point_key(q):
            sign = -1 if len(derivs) % 2 else 1
            return sign, replace(a, derivs=derivs, points=(q, p))
    return 1, replace(a, derivs=derivs)


def fresh_names(n: int, avoid) -> list[str]:
    avoid = set(avoid)
    out = []
    for name in ALPHABET:
        if len(out) == n:
            return out
        if name not in avoid:
            out.append(name)
    k = 1
    while len(out) < n:
        name = f"i{k}"
        if name not in avoid:
            out.append(name)
        k += 1
    return out


def fresh_point(avoid) -> str:
    for p in POINT_ORDER[2:] + POINT_ORDER[:2]:
        if p not in avoid:
            return p
    k = 1
    while f"z{k}" in avoid:
        k += 1
    return f"z{k}"
