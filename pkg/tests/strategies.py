"""Hypothesis strategies for random tensor expressions, plus a numpy
evaluator that contracts them independently of the symbolic engine."""

import itertools
import string
from fractions import Fraction

import numpy as np
from hypothesis import strategies as st

from dirac_ham.symcore import Expr, Functional, canonicalize, Kind, eps, field, kron, momentum

VECTORS = [(Kind.FIELD, "E"), (Kind.FIELD, "B"), (Kind.MOMENTUM, "Pi_E"), (Kind.MOMENTUM, "Pi_B")]
LETTERS = "pqrstuvwabcdefgh"
CONSTANTS = {"c": 1.7, "pi": np.pi}

rationals = st.builds(
    Fraction,
    st.integers(-6, 6).filter(bool),
    st.integers(1, 4),
)
monomials = st.lists(
    st.tuples(st.sampled_from(sorted(CONSTANTS)), st.integers(-2, 2).filter(bool)),
    max_size=2,
    unique_by=lambda t: t[0],
).map(lambda m: tuple(sorted(m)))


@st.composite
def scalar_product(draw, vectors=VECTORS, max_tensors=3, max_derivs=1, specials=True):
    """Atoms of one fully contracted product: vectors with up to
    ``max_derivs`` derivatives each, optional eps and delta factors."""
    specs = [
        [kind, name, draw(st.integers(0, max_derivs))]
        for kind, name in draw(st.lists(st.sampled_from(vectors), min_size=1, max_size=max_tensors))
    ]
    extras = draw(st.lists(st.sampled_from(["eps", "delta"]), max_size=2)) if specials else []
    slots = sum(1 + d for _, _, d in specs) + sum(3 if x == "eps" else 2 for x in extras)
    if slots % 2:
        specs[0][2] += 1
        slots += 1
    order = draw(st.permutations(range(slots)))
    names = [None] * slots
    for k in range(0, slots, 2):
        names[order[k]] = names[order[k + 1]] = LETTERS[k // 2]
    it = iter(names)
    atoms = []
    for kind, name, d in specs:
        ix = next(it)
        derivs = tuple(next(it) for _ in range(d))
        make = field if kind == Kind.FIELD else momentum
        atoms.append(make(name, ix, derivs=derivs))
    for x in extras:
        atoms.append(eps(next(it), next(it), next(it)) if x == "eps" else kron(next(it), next(it)))
    return tuple(atoms)


@st.composite
def raw_expressions(draw, max_terms=4, **kw):
    terms = draw(st.lists(st.tuples(rationals, monomials, scalar_product(**kw)), min_size=1, max_size=max_terms))
    return Expr.raw(terms)


def functionals(max_terms=2, max_tensors=2):
    return raw_expressions(max_terms=max_terms, max_tensors=max_tensors, max_derivs=1).map(
        lambda e: Functional(canonicalize(e))
    )


# -- numeric contraction ------------------------------------------------------

LEVI_CIVITA = np.zeros((3, 3, 3))
for perm in itertools.permutations(range(3)):
    LEVI_CIVITA[perm] = np.linalg.det(np.eye(3)[list(perm)])


class Evaluator:
    """Random values for every (tensor, derivative count); derivative slots
    are symmetrized so the tables respect commuting partials."""

    def __init__(self, seed=0):
        self.rng = np.random.default_rng(seed)
        self.tables = {}

    def table(self, a):
        key = (a.kind, a.name, len(a.indices), len(a.derivs))
        if key not in self.tables:
            nd = len(a.derivs)
            t = self.rng.standard_normal((3,) * (len(a.indices) + nd))
            if nd > 1:
                lead = len(a.indices)
                perms = list(itertools.permutations(range(nd)))
                t = sum(np.transpose(t, tuple(range(lead)) + tuple(lead + p for p in q)) for q in perms) / len(perms)
            self.tables[key] = t
        return self.tables[key]

    def atom(self, a):
        if a.kind == Kind.EPSILON:
            return LEVI_CIVITA
        if a.kind == Kind.KRONECKER:
            return np.eye(3)
        return self.table(a)

    def __call__(self, e) -> float:
        total = 0.0
        # stored terms, so raw (uncanonicalized) input is evaluated as written
        for atoms, mono, value in e._terms:
            coef = float(value)
            for name, power in mono:
                coef *= CONSTANTS[name] ** power
            if not atoms:
                total += coef
                continue
            letters = {}
            subs = []
            for a in atoms:
                subs.append("".join(letters.setdefault(ix, string.ascii_letters[len(letters)])
                                    for ix in a.indices + a.derivs))
            total += coef * float(np.einsum(",".join(subs) + "->", *(self.atom(a) for a in atoms)))
        return total
