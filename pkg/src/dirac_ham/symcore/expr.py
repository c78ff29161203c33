"""Polynomial expressions in tensor atoms with exact coefficients.

An :class:`Expr` is a sum of terms ``rational * monomial * product(atoms)``.
Every public operation returns the canonical form, in which

* Kronecker deltas are contracted and at most one Levi-Civita symbol
  survives per product (pairs are expanded into Kronecker determinants),
* dummy indices are renamed to the first free letters of ``i j k l m n ...``
  and the lexicographically smallest relabelling is chosen,
* like terms are collected and zero terms dropped.

Equality of canonical forms is structural equality.  Identities that
depend on the dimension (antisymmetrising over four indices in 3-space)
are not applied; :func:`expand_components` gives the fully explicit form
when that matters.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from functools import lru_cache

from .atoms import (
    DIM,
    Atom,
    Kind,
    atom_key,
    fresh_names,
    index_key,
    kron,
    normalize_atom,
    permutation_sign,
)
from .coefficient import Monomial, mono_mul, mono_pow, mono_text
from .errors import UnbalancedIndices


def _symbols_of(atoms) -> dict:
    counts: dict = {}
    for a in atoms:
        for ix in a.all_indices():
            if isinstance(ix, str):
                counts[ix] = counts.get(ix, 0) + 1
    return counts


@lru_cache(maxsize=None)
def term_free(atoms: tuple) -> frozenset:
    counts = _symbols_of(atoms)
    bad = [s for s, n in counts.items() if n > 2]
    if bad:
        raise UnbalancedIndices(f"index {bad[0]!r} occurs more than twice in one product")
    return frozenset(s for s, n in counts.items() if n == 1)


def _perm_sign(perm) -> int:
    return permutation_sign(list(perm))


def _contract_kroneckers(atoms: list):
    """Contract Kronecker deltas in place.  Returns the scalar factor (0 kills the term)."""
    factor = Fraction(1)
    changed = True
    while changed:
        changed = False
        for n, a in enumerate(atoms):
            if a.kind != Kind.KRONECKER:
                continue
            p, q = a.indices
            others = atoms[:n] + atoms[n + 1:]
            if isinstance(p, int) and isinstance(q, int):
                if p != q:
                    return Fraction(0)
                del atoms[n]
                changed = True
                break
            if p == q:
                if _symbols_of(others).get(p, 0):
                    raise UnbalancedIndices(f"index {p!r} occurs more than twice in one product")
                factor *= DIM
                del atoms[n]
                changed = True
                break
            counts = _symbols_of(others)
            for s, t in ((p, q), (q, p)):
                if isinstance(s, str) and counts.get(s, 0) == 1:
                    atoms[:] = [x.rename({s: t}) for x in others]
                    changed = True
                    break
            if changed:
                break
    return factor


def _evaluate_epsilons(atoms: list):
    factor = 1
    keep = []
    for a in atoms:
        if a.kind == Kind.EPSILON:
            s = permutation_sign(list(a.indices))
            if s == 0:
                return 0
            if all(isinstance(i, int) for i in a.indices):
                factor *= s
                continue
        keep.append(a)
    atoms[:] = keep
    return factor


def _blind_key(a: Atom, dummies: frozenset):
    return (
        int(a.kind),
        a.name,
        a.points,
        a.tderiv,
        tuple(sorted((index_key(i) if i not in dummies else (2, 0, "")) for i in a.derivs)),
        tuple(
            (index_key(i) if i not in dummies else (2, 0, ""))
            for i in (sorted(a.indices, key=index_key) if a.kind in (Kind.EPSILON, Kind.KRONECKER) else a.indices)
        ),
    )


def _dummy_signature(d: str, atoms, dummies: frozenset):
    sig = []
    for a in atoms:
        bk = _blind_key(a, dummies)
        for pos, ix in enumerate(a.indices):
            if ix == d:
                role = pos if a.kind not in (Kind.EPSILON, Kind.KRONECKER) else -1
                sig.append((bk, "idx", role))
        for ix in a.derivs:
            if ix == d:
                sig.append((bk, "der", 0))
    return tuple(sorted(sig))


def _relabel(atoms: tuple, free: frozenset):
    counts = _symbols_of(atoms)
    dummies = frozenset(s for s, n in counts.items() if n == 2)
    if not dummies:
        sign = 1
        out = []
        for a in atoms:
            s, na = normalize_atom(a)
            if s == 0:
                return 0, ()
            sign *= s
            out.append(na)
        out.sort(key=atom_key)
        return sign, tuple(out)

    # group dummies by a renaming-invariant signature; only permute within groups
    sigs = {d: _dummy_signature(d, atoms, dummies) for d in dummies}
    groups: dict = {}
    for d in sorted(dummies):
        groups.setdefault(sigs[d], []).append(d)
    ordered_groups = [groups[k] for k in sorted(groups)]
    names = fresh_names(len(dummies), free)
    slots = []
    pos = 0
    for g in ordered_groups:
        slots.append(names[pos:pos + len(g)])
        pos += len(g)

    best_key = None
    best = None
    signs = set()
    for choice in itertools.product(*[itertools.permutations(s) for s in slots]):
        mapping = {}
        for g, perm in zip(ordered_groups, choice):
            mapping.update(zip(g, perm))
        sign = 1
        out = []
        for a in atoms:
            s, na = normalize_atom(a.rename(mapping))
            if s == 0:
                return 0, ()
            sign *= s
            out.append(na)
        out.sort(key=atom_key)
        key = tuple(atom_key(a) for a in out)
        if best_key is None or key < best_key:
            best_key, best, signs = key, tuple(out), {sign}
        elif key == best_key:
            signs.add(sign)
    if len(signs) > 1:
        return 0, ()
    return signs.pop(), best


@lru_cache(maxsize=None)
def canon_product(atoms: tuple) -> tuple:
    """Canonicalise one product of atoms.

    Returns a tuple of ``(factor, atoms)`` pairs: a product containing two
    Levi-Civita symbols expands into several Kronecker products.
    """
    eps_pos = [n for n, a in enumerate(atoms) if a.kind == Kind.EPSILON]
    if len(eps_pos) >= 2:
        a, b = atoms[eps_pos[0]], atoms[eps_pos[1]]
        rest = [x for n, x in enumerate(atoms) if n not in eps_pos[:2]]
        acc: dict = {}
        for perm in itertools.permutations(range(3)):
            s = _perm_sign(perm)
            new = rest + [kron(a.indices[r], b.indices[perm[r]]) for r in range(3)]
            for f, at in canon_product(tuple(new)):
                acc[at] = acc.get(at, 0) + s * f
        return tuple((f, at) for at, f in sorted(acc.items(), key=lambda kv: [atom_key(x) for x in kv[0]]) if f != 0)

    work = list(atoms)
    factor = _contract_kroneckers(work)
    if factor == 0:
        return ()
    factor *= _evaluate_epsilons(work)
    if factor == 0:
        return ()
    free = term_free(tuple(work))
    sign, out = _relabel(tuple(work), free)
    if sign == 0:
        return ()
    return ((factor * sign, out),)


def _term_sort_key(item):
    atoms, mono = item
    return (tuple(atom_key(a) for a in atoms), mono)


class Expr:
    """Immutable sum of product terms; see the module docstring."""

    __slots__ = ("_terms", "_canonical", "_hash")

    def __init__(self, terms=(), canonical: bool = False):
        # terms: tuple of (atoms, monomial, Fraction)
        self._terms = tuple(terms)
        self._canonical = canonical
        self._hash = None

    # -- construction ------------------------------------------------------
    @classmethod
    def raw(cls, terms) -> "Expr":
        """Build without canonicalising; ``terms`` are (value, monomial, atoms)."""
        return cls(tuple((tuple(at), tuple(m), Fraction(v)) for v, m, at in terms), canonical=False)

    @classmethod
    def zero(cls) -> "Expr":
        return cls((), canonical=True)

    @classmethod
    def number(cls, value) -> "Expr":
        value = Fraction(value)
        if value == 0:
            return cls.zero()
        return cls((((), (), value),), canonical=True)

    @classmethod
    def symbol(cls, name: str, exp: int = 1) -> "Expr":
        sign, m = mono_pow(((name, 1),), exp)
        return cls((((), m, Fraction(sign)),), canonical=True)

    @classmethod
    def atom(cls, a: Atom) -> "Expr":
        return canonicalize(cls.raw([(1, (), (a,))]))

    @classmethod
    def product(cls, atoms, value=1, mono: Monomial = ()) -> "Expr":
        return canonicalize(cls.raw([(value, mono, tuple(atoms))]))

    # -- inspection --------------------------------------------------------
    @property
    def terms(self):
        """Iterate (value, monomial, atoms) of the canonical form."""
        e = self if self._canonical else canonicalize(self)
        for atoms, mono, val in e._terms:
            yield val, mono, atoms

    def __len__(self) -> int:
        return len(canonicalize(self)._terms)

    def is_zero(self) -> bool:
        return len(canonicalize(self)._terms) == 0

    def free_indices(self) -> frozenset:
        e = canonicalize(self)
        if not e._terms:
            return frozenset()
        return term_free(e._terms[0][0])

    def all_symbols(self) -> set:
        out = set()
        for atoms, _, _ in self._terms:
            out.update(_symbols_of(atoms))
        return out

    def points(self) -> set:
        out = set()
        for atoms, _, _ in self._terms:
            for a in atoms:
                out.update(a.points)
        return out

    def atoms(self) -> set:
        out = set()
        for atoms, _, _ in self._terms:
            out.update(atoms)
        return out

    def constant_value(self):
        """Return (Fraction, monomial) if the expression is a single atom-free term, else None."""
        e = canonicalize(self)
        if len(e._terms) == 1 and not e._terms[0][0]:
            return e._terms[0][2], e._terms[0][1]
        if not e._terms:
            return Fraction(0), ()
        return None

    # -- algebra -----------------------------------------------------------
    def _coerce(self, other) -> "Expr":
        if isinstance(other, Expr):
            return other
        if isinstance(other, (int, Fraction)):
            return Expr.number(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return canonicalize(Expr(self._terms + other._terms))

    __radd__ = __add__

    def __neg__(self):
        return Expr(tuple((a, m, -v) for a, m, v in canonicalize(self)._terms), canonical=True)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        left, right = _separate_dummies(canonicalize(self), canonicalize(other))
        terms = []
        for a1, m1, v1 in left._terms:
            for a2, m2, v2 in right._terms:
                sign, m = mono_mul(m1, m2)
                terms.append((a1 + a2, m, v1 * v2 * sign))
        return canonicalize(Expr(terms))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * (Fraction(1) / Fraction(other))
        other = self._coerce(other)
        cv = other.constant_value()
        if cv is None or cv[0] == 0:
            raise ZeroDivisionError("division only by nonzero atom-free monomials")
        sign, m = mono_pow(cv[1], -1)
        return self * Expr((((), m, sign / cv[0]),), canonical=True)

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("only non-negative integer powers")
        out = Expr.number(1)
        for _ in range(n):
            out = out * self
        return out

    def scale(self, value, mono: Monomial = ()) -> "Expr":
        return self * Expr((((), tuple(mono), Fraction(value)),), canonical=True) if value else Expr.zero()

    # -- index and point manipulation --------------------------------------
    def rename_indices(self, mapping: dict) -> "Expr":
        """Rename free indices (mapping values may be symbols or 1..3)."""
        if not mapping:
            return canonicalize(self)
        e = canonicalize(self)
        targets = {v for v in mapping.values() if isinstance(v, str)}
        e = _rename_dummies_away(e, targets | set(mapping))
        return canonicalize(Expr(tuple((tuple(a.rename(mapping) for a in at), m, v) for at, m, v in e._terms)))

    def at(self, point, source: str = None) -> "Expr":
        """Move the expression to another point.  ``point`` may be a label
        (all points are relabelled from ``source`` or the single present
        point) or a mapping of labels."""
        if isinstance(point, dict):
            mapping = point
        else:
            pts = self.points()
            if source is None:
                if len(pts) > 1:
                    raise ValueError("expression lives at several points; give a mapping")
                if not pts:
                    return canonicalize(self)
                source = next(iter(pts))
            mapping = {source: point}
        return canonicalize(Expr(tuple((tuple(a.at(mapping) for a in at), m, v) for at, m, v in self._terms)))

    def map_terms(self, fn) -> "Expr":
        """Apply ``fn(value, monomial, atoms) -> Expr`` to every term and sum."""
        out = []
        for v, m, at in self.terms:
            r = fn(v, m, at)
            out.extend(canonicalize(r)._terms)
        return canonicalize(Expr(out))

    # -- comparison and display -------------------------------------------
    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Expr.number(other)
        if not isinstance(other, Expr):
            return NotImplemented
        return canonicalize(self)._terms == canonicalize(other)._terms

    def __hash__(self):
        e = canonicalize(self)
        if e._hash is None:
            e._hash = hash(e._terms)
        return e._hash

    def __repr__(self):
        return f"Expr({self.to_text()!r})"

    def __str__(self):
        return self.to_text()

    def to_text(self) -> str:
        from .text import expr_text

        return expr_text(canonicalize(self))

    def to_sexpr(self) -> str:
        from .text import expr_sexpr

        return expr_sexpr(canonicalize(self))


def _rename_dummies_away(e: "Expr", avoid: set) -> "Expr":
    """Rename dummy indices of every term so none of them lies in ``avoid``."""
    out = []
    changed = False
    for atoms, m, v in e._terms:
        counts = _symbols_of(atoms)
        dummies = [s for s, n in counts.items() if n == 2]
        clash = [d for d in dummies if d in avoid]
        if clash:
            fresh = fresh_names(len(clash), set(counts) | set(avoid))
            mapping = dict(zip(clash, fresh))
            atoms = tuple(a.rename(mapping) for a in atoms)
            changed = True
        out.append((atoms, m, v))
    return Expr(tuple(out), canonical=not changed and e._canonical)


def _separate_dummies(left: "Expr", right: "Expr"):
    lfree = left.free_indices()
    rfree = right.free_indices()
    lall = left.all_symbols()
    left = _rename_dummies_away(left, set(rfree) | right.all_symbols() - set(lfree))
    lall = left.all_symbols()
    right = _rename_dummies_away(right, lall | set(lfree))
    return left, right


def canonicalize(e: Expr) -> Expr:
    """Return the canonical form of ``e`` (idempotent)."""
    if e._canonical:
        return e
    acc: dict = {}
    for atoms, mono, val in e._terms:
        if val == 0:
            continue
        for f, cat in canon_product(tuple(atoms)):
            key = (cat, mono)
            acc[key] = acc.get(key, 0) + val * f
    items = sorted(((k, v) for k, v in acc.items() if v != 0), key=lambda kv: _term_sort_key(kv[0]))
    free = None
    for (atoms, _), _ in items:
        f = term_free(atoms)
        if free is None:
            free = f
        elif f != free:
            raise UnbalancedIndices(
                f"free indices {sorted(f)} of one term differ from {sorted(free)} of another"
            )
    return Expr(tuple((k[0], k[1], v) for k, v in items), canonical=True)


def expand_components(e: Expr) -> Expr:
    """Sum every dummy index explicitly over 1..3.  Free indices are kept."""
    out = []
    for val, mono, atoms in canonicalize(e).terms:
        counts = _symbols_of(atoms)
        dummies = sorted(s for s, n in counts.items() if n == 2)
        if not dummies:
            out.append((atoms, mono, val))
            continue
        for values in itertools.product(range(1, DIM + 1), repeat=len(dummies)):
            mapping = dict(zip(dummies, values))
            out.append((tuple(a.rename(mapping) for a in atoms), mono, val))
    return canonicalize(Expr(tuple(out)))


def components(e: Expr) -> dict:
    """Map each assignment of the (sorted) free indices to the explicit component."""
    free = sorted(e.free_indices())
    out = {}
    for values in itertools.product(range(1, DIM + 1), repeat=len(free)):
        out[values] = expand_components(e.rename_indices(dict(zip(free, values))))
    return out


def equal_components(a: Expr, b: Expr) -> bool:
    """Dimension-aware equality: compares fully explicit components."""
    return (a - b).is_zero() or all(v.is_zero() for v in components(a - b).values())


def mono_str(m: Monomial) -> str:
    return "*".join(mono_text(m))
