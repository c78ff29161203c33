"""The Dirac constraint algorithm for first-order field theories.

Each stage is a plain function over immutable inputs; :func:`analyze` runs
them in order and collects an :class:`~.report.AnalysisReport`.

Conventions: a constraint *family* carries the free indices ``i``, ``j``
of its rank; brackets between families are kernels in the points ``x``
(row) and ``y`` (column), with the column family's indices taken from
the alphabet after the row family's.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction

import sympy

from ..frontend.model import Equation, LagrangianModel, velocity_atom
from ..symcore import (
    D,
    Expr,
    Functional,
    Kind,
    constraint_atom,
    fresh_names,
    fresh_point,
    integrate_point,
    localize,
    multiplier,
    partial,
    substitute,
    variation,
)
from ..symcore.atoms import ALPHABET, DIM, Atom
from ..symcore.bridge import from_sympy, mono_to_sympy, to_sympy
from ..symcore.coefficient import mono_pow
from ..symcore.names import extra_multiplier_name, momentum_name, multiplier_name, primary_label, secondary_label
from ..symcore.tensor import component, index_values, isotropic_scalar
from . import linalg
from .brackets import poisson_bracket

MAX_ROUNDS = 10


class EngineError(Exception):
    pass


class VelocityResidue(EngineError):
    pass


class InconsistentTheory(EngineError):
    pass


class SingularW(EngineError):
    pass


class Unsupported(EngineError):
    pass


def idx(rank: int, offset: int = 0) -> tuple:
    return ALPHABET[offset:offset + rank]


# -- data --------------------------------------------------------------------

@dataclass(frozen=True)
class MomentumDef:
    momentum: str
    field: str
    rank: int
    expr: Expr

    def __str__(self) -> str:
        lhs = self.momentum + (f"[{','.join(idx(self.rank))}]" if self.rank else "")
        return f"{lhs} = {self.expr.to_text()}"


@dataclass(frozen=True)
class Constraint:
    label: str
    expr: Expr
    stage: str
    rank: int
    cls: str = None
    field: str = None

    def at(self, names, point: str = "x") -> Expr:
        e = self.expr.rename_indices(dict(zip(idx(self.rank), names))) if names != idx(self.rank) else self.expr
        return e.at({"x": point}) if point != "x" else e

    def atom(self, names=None, point: str = "x") -> Expr:
        names = idx(self.rank) if names is None else names
        return Expr.atom(constraint_atom(self.label, *names, point=point))

    @property
    def components(self) -> int:
        return DIM ** self.rank


@dataclass
class HessianResult:
    labels: list
    matrix: sympy.Matrix
    rank: int
    null_vectors: list


@dataclass
class JacobianResult:
    rows: list
    cols: list
    matrix: sympy.Matrix
    rank: int

    @property
    def dependent(self) -> bool:
        return self.rank < len(self.rows)


@dataclass
class KernelMatrix:
    constraints: list
    entries: dict
    symbol: sympy.Matrix
    rank: int
    ultralocal: bool
    null_vectors: list = field(default_factory=list)

    @property
    def labels(self) -> list:
        return [c.label for c in self.constraints]

    @property
    def size(self) -> int:
        return self.symbol.rows

    def scalar_blocks(self):
        """Family-level constants ``w_ab`` with ``W_ab = w_ab * delta * ddelta(x,y)``,
        or None when some block is not of that form."""
        out = {}
        for (a, b), ker in self.entries.items():
            ca, cb = self.constraints[a], self.constraints[b]
            s = isotropic_scalar(ker, idx(ca.rank), idx(cb.rank, ca.rank))
            if s is None:
                return None
            if s.is_zero():
                out[a, b] = sympy.Integer(0)
                continue
            try:
                out[a, b] = to_sympy(s, kernel=("x", "y"))
            except ValueError:
                return None
            if out[a, b].free_symbols & {sympy.Symbol(f"K{n}") for n in range(1, 4)}:
                return None
        return out


@dataclass
class MultiplierSolution:
    label: str
    multiplier: str
    rank: int
    status: str  # SOLVED | UNDETERMINED | UNSOLVED
    expr: Expr = None

    def text(self) -> str:
        return self.expr.to_text() if self.status != "UNSOLVED" else "UNSOLVED"


@dataclass
class ConsistencyResult:
    multipliers: list
    secondary: list
    rounds: int
    conditions: dict


@dataclass
class Relation:
    expr: Expr
    count: int
    uses_auxiliary: bool
    families: tuple
    expanded: Expr = None


@dataclass
class ReducibilityResult:
    relations: list
    identical: int
    with_auxiliary: int
    order: int
    use_auxiliary: bool
    auxiliary_used: list = field(default_factory=list)

    @property
    def counted(self) -> int:
        return self.with_auxiliary if self.use_auxiliary else self.identical


@dataclass(frozen=True)
class DofCount:
    phaseDim: int
    firstClass: int
    secondClass: int
    relations: int
    naive: Fraction
    corrected: Fraction
    firstClassRelations: int = 0
    relationsWithoutAuxiliary: int = 0

    @property
    def pathology(self) -> bool:
        return self.naive < 0 or self.corrected < 0


@dataclass
class AuditVerdict:
    label: str
    verdict: str  # WEAKLY_ZERO | FAILS
    bracket: Expr
    combination: Expr


@dataclass
class EomEntry:
    variation: str
    equation: Equation
    raw: Expr


# -- stages ------------------------------------------------------------------

def field_list(model: LagrangianModel) -> list:
    return [(f.name, f.rank) for f in model.fields]


def compute_momenta(model: LagrangianModel) -> list:
    out = []
    for f in model.fields:
        p = variation(model.density, Kind.FIELD, f.name, f.indices(), tderiv=1)
        out.append(MomentumDef(momentum_name(f.name), f.name, f.rank, p))
    return out


def _velocity_blocks(model: LagrangianModel, momenta: list) -> dict:
    """(f, g) -> d p_f / d dt(g) with rows idx(f) and cols idx(g, rank f)."""
    out = {}
    for m in momenta:
        for g in model.fields:
            block = partial(m.expr, Kind.FIELD, g.name, g.indices(m.rank), tderiv=1)
            if not block.is_zero():
                out[m.field, g.name] = block
    return out


def _component_labels(model: LagrangianModel) -> list:
    labels = []
    for f in model.fields:
        for v in index_values(f.rank):
            labels.append((f.name, v))
    return labels


def _label_text(name, values) -> str:
    return name + (f"[{','.join(map(str, values))}]" if values else "")


def hessian(model: LagrangianModel, momenta: list = None) -> HessianResult:
    momenta = compute_momenta(model) if momenta is None else momenta
    blocks = _velocity_blocks(model, momenta)
    labels = _component_labels(model)
    n = len(labels)
    H = sympy.zeros(n, n)
    pos = {lab: k for k, lab in enumerate(labels)}
    for (fname, gname), block in blocks.items():
        f, g = model.field(fname), model.field(gname)
        for fv in index_values(f.rank):
            for gv in index_values(g.rank):
                comp = component(block, f.indices() + g.indices(f.rank), fv + gv)
                H[pos[fname, fv], pos[gname, gv]] = to_sympy(comp, atoms_as_symbols=True)
    r = linalg.rank(H)
    nulls = linalg.nullspace(H) if r < n else []
    return HessianResult([_label_text(*lab) for lab in labels], H, r, nulls)


def _solvable_families(model, momenta) -> tuple:
    blocks = _velocity_blocks(model, momenta)
    solvable = [f for f in model.fields if any(k[0] == f.name for k in blocks)]
    return solvable, blocks


def primary_constraints(model: LagrangianModel, momenta: list, hess: HessianResult = None) -> list:
    solvable, blocks = _solvable_families(model, momenta)
    names = {f.name for f in solvable}
    for (a, b) in blocks:
        if b not in names:
            raise Unsupported("velocity of a constrained field enters another momentum")
    out = []
    for m in momenta:
        if m.field in names:
            continue
        p = Expr.atom(Atom(Kind.MOMENTUM, m.momentum, idx(m.rank)))
        out.append(Constraint(primary_label(m.field), p - m.expr, "primary", m.rank, field=m.field))
    if hess is not None:
        nullity = len(hess.labels) - hess.rank
        if nullity != sum(c.components for c in out):
            raise Unsupported("null vectors of the Hessian mix field families")
    return out


def _family_matrix(families, blocks: dict, offset_rows: bool = True):
    """Constant family-level matrix of isotropic blocks (None when impossible)."""
    n = len(families)
    M = sympy.zeros(n, n)
    for r, f in enumerate(families):
        for c, g in enumerate(families):
            block = blocks.get((f.name, g.name))
            if block is None:
                continue
            s = isotropic_scalar(block, f.indices(), g.indices(f.rank))
            if s is None or s.constant_value() is None:
                return None
            M[r, c] = to_sympy(s)
    return M


def velocity_solutions(model: LagrangianModel, momenta: list) -> dict:
    """field name -> expression of dt(field) in terms of momenta and fields."""
    solvable, blocks = _solvable_families(model, momenta)
    if not solvable:
        return {}
    M = _family_matrix(solvable, blocks)
    if M is None or M.det() == 0:
        raise Unsupported("velocities are not solvable from isotropic constant blocks")
    Minv = linalg.inverse(M)
    bym = {m.field: m for m in momenta}
    out = {}
    for r, g in enumerate(solvable):
        sol = Expr.zero()
        for c, f in enumerate(solvable):
            coef = Minv[r, c]
            if coef == 0:
                continue
            m = bym[f.name]
            rest = m.expr.map_terms(
                lambda v, mono, at: Expr.zero() if any(a.tderiv for a in at) else Expr(((at, mono, v),))
            )
            p = Expr.atom(Atom(Kind.MOMENTUM, m.momentum, idx(m.rank)))
            sol = sol + from_sympy(coef) * (p - rest).rename_indices(dict(zip(f.indices(), g.indices())))
        out[g.name] = sol
    return out


def canonical_hamiltonian(model: LagrangianModel, momenta: list) -> Expr:
    """Density of ``dt(q).p(q, dt q) - L`` with all velocities eliminated."""
    h = -model.density
    for m in momenta:
        f = model.field(m.field)
        h = h + velocity_atom(f, f.indices()) * m.expr
    for name, sol in velocity_solutions(model, momenta).items():
        f = model.field(name)
        h = substitute(h, Kind.FIELD, name, sol, slots=f.indices(), tderiv=1)
    for a in h.atoms():
        if a.tderiv:
            raise VelocityResidue(f"velocity {a.name} survives in the canonical Hamiltonian")
    return h


def primary_hamiltonian(h_c: Expr, constraints: list) -> Expr:
    h = h_c
    for c in constraints:
        if c.stage != "primary":
            continue
        u = Expr.atom(multiplier(multiplier_name(c.label), *idx(c.rank)))
        h = h + u * c.expr
    return h


def constraint_jacobian(constraints: list, model: LagrangianModel) -> JacobianResult:
    """Jacobian of constraint components with respect to every phase-space
    component; derivative couplings enter through their Fourier symbol."""
    from ..symcore.calculus import local_variation

    rows, cols = [], []
    for c in constraints:
        for v in index_values(c.rank):
            rows.append((c, v))
    for f in model.fields:
        for v in index_values(f.rank):
            cols.append((Kind.FIELD, f.name, f.rank, v))
    for f in model.fields:
        for v in index_values(f.rank):
            cols.append((Kind.MOMENTUM, momentum_name(f.name), f.rank, v))
    J = sympy.zeros(len(rows), len(cols))
    for r, (c, cv) in enumerate(rows):
        comp = component(c.expr, idx(c.rank), cv)
        for k, (kind, name, rank, v) in enumerate(cols):
            ker = local_variation(comp, kind, name, v, "y")
            if not ker.is_zero():
                J[r, k] = to_sympy(ker, kernel=("x", "y"), atoms_as_symbols=True)
    return JacobianResult(
        [_label_text(c.label, v) for c, v in rows],
        [_label_text(name, v) for _, name, _, v in cols],
        J,
        linalg.rank(J),
    )


def weak_reducer(constraints: list) -> dict:
    """momentum name -> (field rank, value on the primary constraint surface)."""
    out = {}
    for c in constraints:
        if c.stage == "primary" and c.field:
            pname = momentum_name(c.field)
            p = Expr.atom(Atom(Kind.MOMENTUM, pname, idx(c.rank)))
            out[pname] = (c.rank, p - c.expr, c)
    return out


def weak_reduce(e: Expr, constraints: list) -> Expr:
    for pname, (rank, value, _) in weak_reducer(constraints).items():
        e = substitute(e, Kind.MOMENTUM, pname, value, slots=idx(rank))
    return e


def constraint_matrix(constraints: list, model: LagrangianModel, log: list = None) -> KernelMatrix:
    fields = field_list(model)
    entries = {}
    for a, ca in enumerate(constraints):
        for b, cb in enumerate(constraints):
            left = ca.at(idx(ca.rank), "x")
            right = cb.at(idx(cb.rank, ca.rank), "y")
            ker = poisson_bracket(left, right, fields, log)
            if not ker.is_zero():
                ker = weak_reduce(ker, constraints)
            if not ker.is_zero():
                entries[a, b] = ker
    return _assemble_kernel_matrix(constraints, entries)


def _assemble_kernel_matrix(constraints, entries) -> KernelMatrix:
    offsets = []
    n = 0
    for c in constraints:
        offsets.append(n)
        n += c.components
    S = sympy.zeros(n, n)
    ultralocal = True
    for (a, b), ker in entries.items():
        ca, cb = constraints[a], constraints[b]
        for at in ker.atoms():
            if at.kind == Kind.DELTA and at.derivs:
                ultralocal = False
        names = idx(ca.rank) + idx(cb.rank, ca.rank)
        for i, av in enumerate(index_values(ca.rank)):
            for j, bv in enumerate(index_values(cb.rank)):
                comp = component(ker, names, av + bv)
                if not comp.is_zero():
                    S[offsets[a] + i, offsets[b] + j] = to_sympy(comp, kernel=("x", "y"), atoms_as_symbols=True)
    r = linalg.rank(S)
    nulls = linalg.nullspace(S) if r < n else []
    return KernelMatrix(list(constraints), entries, S, r, ultralocal, nulls)


def _drop_multipliers(e: Expr) -> Expr:
    return e.map_terms(
        lambda v, m, at: Expr.zero() if any(a.kind == Kind.MULTIPLIER for a in at) else Expr(((at, m, v),))
    )


def _normalize_constraint_expr(e: Expr) -> Expr:
    v, mono, _ = next(iter(e.terms))
    return e / Expr.number(v).scale(1, mono)


def _derivative_generators(constraints: list, order: int = 1) -> list:
    gens = []
    for c in constraints:
        for v in index_values(c.rank):
            comp = component(c.expr, idx(c.rank), v)
            for o in _operators(order):
                g = comp
                for d in o:
                    g = D(g, d, "x")
                gens.append(g)
    return gens


def _operators(order: int) -> list:
    out = [()]
    for n in range(1, order + 1):
        out.extend(itertools.combinations_with_replacement(range(1, DIM + 1), n))
    return out


def _weakly_in_span(candidate: Expr, rank: int, secondary: list) -> bool:
    comps = [component(candidate, idx(rank), v) for v in index_values(rank)]
    return linalg.in_span(comps, _derivative_generators(secondary))


def consistency_step(constraints: list, h_p: Expr, model: LagrangianModel, log: list = None) -> tuple:
    """One round of ``{phi, H_P} ~ 0``.

    Returns (multiplier solutions, new secondary constraints, conditions).
    """
    fields = field_list(model)
    primaries = [c for c in constraints if c.stage == "primary"]
    secondaries = [c for c in constraints if c.stage == "secondary"]
    H = Functional(h_p)
    conditions = {}
    for c in constraints:
        eq = poisson_bracket(c.at(idx(c.rank)), H, fields, log)
        conditions[c.label] = weak_reduce(eq, constraints)

    nonlocal_ = False
    blocks = {}
    for c in constraints:
        eq = conditions[c.label]
        for a in eq.atoms():
            if a.kind == Kind.MULTIPLIER and a.derivs:
                nonlocal_ = True
        for p in primaries:
            u = multiplier_name(p.label)
            blk = partial(eq, Kind.MULTIPLIER, u, idx(p.rank, c.rank))
            if blk.is_zero():
                continue
            s = isotropic_scalar(blk, idx(c.rank), idx(p.rank, c.rank))
            if s is None or s.constant_value() is None:
                nonlocal_ = True
            else:
                blocks[c.label, p.label] = linalg.exact_scalar(s)
    h = {c.label: _drop_multipliers(conditions[c.label]) for c in constraints}

    solutions = {}
    candidates = []
    if nonlocal_:
        for p in primaries:
            solutions[p.label] = MultiplierSolution(p.label, multiplier_name(p.label), p.rank, "UNSOLVED")
        for c in constraints:
            if not any(a.kind == Kind.MULTIPLIER for a in conditions[c.label].atoms()):
                candidates.append((c.rank, h[c.label]))
    else:
        for rank in sorted({c.rank for c in constraints} | {p.rank for p in primaries}):
            rows = [c for c in constraints if c.rank == rank]
            cols = [p for p in primaries if p.rank == rank]
            M = sympy.zeros(len(rows), len(cols))
            for r, c in enumerate(rows):
                for k, p in enumerate(cols):
                    M[r, k] = blocks.get((c.label, p.label), 0)
            if rows:
                for lam in linalg.nullspace(M.T):
                    cand = Expr.zero()
                    for r, c in enumerate(rows):
                        if lam[r] != 0:
                            cand = cand + from_sympy(lam[r]) * h[c.label]
                    candidates.append((rank, cand))
            if cols:
                solutions.update(_solve_multipliers(rows, cols, M, h))

    new = []
    known = list(secondaries)
    for rank, cand in candidates:
        cand = weak_reduce(cand, constraints)
        if cand.is_zero():
            continue
        if cand.constant_value() is not None:
            raise InconsistentTheory(f"consistency requires {cand.to_text()} = 0")
        if known and _weakly_in_span(cand, rank, known):
            continue
        cand = _normalize_constraint_expr(cand)
        label = secondary_label(len(secondaries) + len(new) + 1)
        con = Constraint(label, cand, "secondary", rank)
        new.append(con)
        known.append(con)
    ordered = [solutions[p.label] for p in primaries if p.label in solutions]
    return ordered, new, conditions


def _solve_multipliers(rows, cols, M, h) -> dict:
    hs = sympy.symbols(f"h0:{len(rows)}")
    _, pivots = M.T.rref()
    if not pivots:
        return {p.label: MultiplierSolution(p.label, multiplier_name(p.label), p.rank, "UNDETERMINED",
                                            Expr.atom(multiplier(multiplier_name(p.label), *idx(p.rank))))
                for p in cols}
    Msub = M.extract(list(pivots), list(range(M.cols)))
    rhs = sympy.Matrix([-hs[r] for r in pivots])
    sol, params = Msub.gauss_jordan_solve(rhs)
    free = {}
    for k, p in enumerate(cols):
        for t in params:
            if sol[k] == t:
                free[t] = p
    out = {}
    for k, p in enumerate(cols):
        expr = Expr.zero()
        status = "SOLVED"
        s = sympy.expand(sol[k])
        for r, c in enumerate(rows):
            coef = s.coeff(hs[r])
            if coef != 0:
                expr = expr + from_sympy(sympy.factor(coef)) * h[c.label].rename_indices(
                    dict(zip(idx(c.rank), idx(p.rank))))
        for t in params:
            coef = s.coeff(t)
            if coef != 0:
                status = "UNDETERMINED"
                q = free[t]
                expr = expr + from_sympy(sympy.factor(coef)) * Expr.atom(
                    multiplier(multiplier_name(q.label), *idx(q.rank)))
        out[p.label] = MultiplierSolution(p.label, multiplier_name(p.label), p.rank, status, expr)
    return out


def run_consistency(constraints: list, h_c: Expr, model: LagrangianModel, max_rounds: int = MAX_ROUNDS,
                    log: list = None) -> ConsistencyResult:
    h_p = primary_hamiltonian(h_c, constraints)
    current = list(constraints)
    added = []
    for rounds in range(1, max_rounds + 1):
        sols, new, conditions = consistency_step(current, h_p, model, log)
        if not new:
            return ConsistencyResult(sols, added, rounds, conditions)
        current += new
        added += new
    raise EngineError(f"constraint algorithm did not terminate in {max_rounds} rounds")


def classify(constraints: list, W: KernelMatrix) -> tuple:
    """Label constraint families first or second class; counts per point."""
    offsets = []
    n = 0
    for c in constraints:
        offsets.append(n)
        n += c.components
    out = []
    for a, c in enumerate(constraints):
        rows = range(offsets[a], offsets[a] + c.components)
        zero_row = all(W.symbol[r, k] == 0 for r in rows for k in range(n))
        if zero_row:
            cls = "first"
        elif W.rank == n:
            cls = "second"
        elif any(v[r] != 0 for v in W.null_vectors for r in rows):
            cls = "unresolved"
        else:
            cls = "second"
        out.append(replace(c, cls=cls))
    first = n - W.rank
    return out, {"first": first, "second": W.rank}


# -- reducibility ------------------------------------------------------------

def extended_auxiliary(auxiliary, constraints: list) -> list:
    """Auxiliary conditions plus their images on conjugate momenta.

    A primary constraint ``k * (Pi_g - s * f)`` ties the momentum ``Pi_g``
    to the field ``f``; a condition on ``f`` is then also imposed on ``Pi_g``.
    """
    out = [(a, a.to_text()) for a in auxiliary]
    for c in constraints:
        if c.stage != "primary" or not c.field:
            continue
        pi = Atom(Kind.MOMENTUM, momentum_name(c.field), idx(c.rank))
        lead = [(v, m) for v, m, at in c.expr.terms if at == (pi,)]
        if len(lead) != 1:
            continue
        (v, m), = lead
        sign, inverse = mono_pow(m, -1)
        value = Expr.atom(pi) - c.expr.scale(sign / v, inverse)
        atoms = value.atoms()
        fields = {a.name for a in atoms if a.kind == Kind.FIELD}
        if len(fields) != 1 or any(a.derivs or a.kind != Kind.FIELD for a in atoms):
            continue
        f = fields.pop()
        for a in auxiliary:
            if not any(t.name == f for t in a.atoms() if t.kind == Kind.FIELD):
                continue
            if any(t.kind == Kind.FIELD and t.name != f for t in a.atoms()):
                continue
            img = substitute(a, Kind.FIELD, f, Expr.atom(pi), slots=idx(c.rank))
            out.append((img, img.to_text()))
    seen = set()
    uniq = []
    for e, t in out:
        if t not in seen:
            seen.add(t)
            uniq.append((e, t))
    return uniq


def _relation_space(cgens, agens):
    """Rank of the constraint part of all relations among generators."""
    M, _ = linalg.jet_vectors([g for _, g in cgens] + [g for _, g in agens])
    null = linalg.nullspace(M)
    nc = len(cgens)
    vecs = [v[:nc, 0] for v in null]
    vecs = [v for v in vecs if any(x != 0 for x in v)]
    return vecs


def _space_rank(vectors: list) -> int:
    if not vectors:
        return 0
    return linalg.rank(sympy.Matrix.hstack(*vectors))


def reducibility(constraints: list, auxiliary, order: int = 1, use_auxiliary: bool = True) -> ReducibilityResult:
    """Linear differential relations among constraint components.

    Searches constant-coefficient operators of order <= ``order`` acting on
    constraint components, optionally modulo the auxiliary conditions (and
    their momentum images).  Relations that are derivatives of lower-order
    ones are not counted again.
    """
    aux = extended_auxiliary(auxiliary, constraints) if auxiliary else []

    def cgens_at(n):
        out = []
        for c in constraints:
            for v in index_values(c.rank):
                comp = component(c.expr, idx(c.rank), v)
                for o in _operators(n):
                    g = comp
                    for d in o:
                        g = D(g, d, "x")
                    out.append(((c.label, v, o), g))
        return out

    def agens_at(n):
        out = []
        for k, (a, _) in enumerate(aux):
            free = sorted(a.free_indices())
            for v in index_values(len(free)):
                comp = component(a, free, v)
                for o in _operators(max(n - 1, 0)):
                    g = comp
                    for d in o:
                        g = D(g, d, "x")
                    out.append((("aux", k, v, o), g))
        return out

    def count(with_aux: bool):
        total = 0
        prev_tags, prev_vecs = None, []
        spaces = {}
        for n in range(order + 1):
            cg = cgens_at(n)
            ag = agens_at(n) if with_aux else []
            vecs = _relation_space(cg, ag)
            tags = [t for t, _ in cg]
            lower = []
            if prev_tags is not None:
                pos = {t: k for k, t in enumerate(tags)}
                for v in prev_vecs:
                    lifted = [sympy.zeros(len(tags), 1) for _ in range(DIM + 1)]
                    for k, t in enumerate(prev_tags):
                        if v[k] == 0:
                            continue
                        label, comp, o = t
                        lifted[0][pos[t], 0] += v[k]
                        for d in range(1, DIM + 1):
                            lifted[d][pos[(label, comp, tuple(sorted(o + (d,))))], 0] += v[k]
                    lower.extend(lifted)
            new = _space_rank(vecs) - _space_rank(lower)
            total += new
            spaces[n] = (tags, vecs, lower)
            prev_tags, prev_vecs = tags, vecs
        return total, spaces

    ident, ident_spaces = count(False)
    with_aux, aux_spaces = count(True) if aux else (ident, ident_spaces)
    use = use_auxiliary and bool(aux)
    tags, vecs, lower = (aux_spaces if use else ident_spaces)[order]
    _, ivecs, _ = ident_spaces[order]
    relations = _describe_relations(constraints, tags, vecs, lower, ivecs)
    return ReducibilityResult(relations, ident, with_aux, order, use_auxiliary,
                              [t for _, t in aux] if use else [])


def _template_vectors(c: Constraint, slot: int, tags: list) -> tuple:
    """Divergence of family ``c`` on ``slot``: one vector per value of the other slots."""
    pos = {t: k for k, t in enumerate(tags)}
    others = [s for s in range(c.rank) if s != slot]
    vecs = []
    for ov in index_values(len(others)):
        v = sympy.zeros(len(tags), 1)
        for t in range(1, DIM + 1):
            comp = [0] * c.rank
            comp[slot] = t
            for s, val in zip(others, ov):
                comp[s] = val
            key = (c.label, tuple(comp), (t,))
            if key not in pos:
                return None, None
            v[pos[key], 0] = 1
        vecs.append(v)
    names = list(idx(c.rank))
    names[slot] = ALPHABET[c.rank] if c.rank > 1 else "i"
    dname = names[slot]
    expr = D(Expr.atom(constraint_atom(c.label, *names)), dname, "x")
    return vecs, expr


def _describe_relations(constraints, tags, vecs, lower, ident_vecs) -> list:
    total = _space_rank(vecs)
    if total == 0:
        return []
    chosen = []
    basis = list(lower)
    for c in constraints:
        for slot in range(c.rank):
            tv, expr = _template_vectors(c, slot, tags)
            if tv is None:
                continue
            if _space_rank(vecs + tv) != total:
                continue
            before = _space_rank(basis)
            if _space_rank(basis + tv) == before:
                continue
            basis = basis + tv
            ident = _space_rank(ident_vecs + tv) == _space_rank(ident_vecs) if ident_vecs else False
            rel_count = _space_rank(basis) - before
            chosen.append(Relation(expr, rel_count, not ident, (c.label,),
                                   substitute(expr, Kind.CONSTRAINT, c.label, c.expr, slots=idx(c.rank))))
    if _space_rank(basis) == total:
        return chosen
    # fall back to explicit component relations
    out = []
    basis = list(lower)
    for v in vecs:
        before = _space_rank(basis)
        if _space_rank(basis + [v]) == before:
            continue
        basis.append(v)
        expr = Expr.zero()
        fams = set()
        for k, t in enumerate(tags):
            if v[k] == 0:
                continue
            label, comp, o = t
            fams.add(label)
            term = Expr.atom(constraint_atom(label, *comp))
            for d in o:
                term = D(term, d, "x")
            expr = expr + from_sympy(v[k]) * term
        ident = _space_rank(ident_vecs + [v]) == _space_rank(ident_vecs) if ident_vecs else False
        out.append(Relation(expr, 1, not ident, tuple(sorted(fams))))
    return out


def count_dof(model_or_phase, counts: dict, relations: int, relations_first: int = 0,
              relations_without_aux: int = None) -> DofCount:
    phase = model_or_phase if isinstance(model_or_phase, int) else 2 * model_or_phase.components
    first, second = counts.get("first", 0), counts.get("second", 0)
    naive = Fraction(phase - 2 * first - second, 2)
    corrected = Fraction(phase - 2 * (first - relations_first) - (second - (relations - relations_first)), 2)
    return DofCount(phase, first, second, relations, naive, corrected, relations_first,
                    relations if relations_without_aux is None else relations_without_aux)


# -- Dirac brackets ------------------------------------------------------------

def inverse_blocks(W: KernelMatrix, second: list) -> dict:
    """Family-level inverse of the ultralocal second-class block."""
    blocks = W.scalar_blocks()
    if blocks is None:
        raise SingularW("second-class matrix is not an isotropic ultralocal kernel")
    pos = {c.label: k for k, c in enumerate(W.constraints)}
    sel = [pos[c.label] for c in second]
    M = sympy.zeros(len(sel), len(sel))
    for r, a in enumerate(sel):
        for k, b in enumerate(sel):
            M[r, k] = blocks.get((a, b), 0)
    if len(sel) == 0:
        return {}
    if linalg.rank(M) < len(sel):
        raise SingularW("second-class block is singular")
    C = linalg.inverse(M)
    out = {}
    for r, a in enumerate(second):
        for k, b in enumerate(second):
            if C[r, k] != 0:
                if a.rank != b.rank:
                    raise SingularW("inverse couples families of different rank")
                out[a.label, b.label] = C[r, k]
    return out


def dirac_bracket(F: Expr, G: Expr, second: list, W: KernelMatrix, model: LagrangianModel,
                  cinv: dict = None) -> Expr:
    """{F, G}_D = {F, G} - {F, chi_a} C^{ab} {chi_b, G}, with C the inverse of W."""
    fields = field_list(model)
    cinv = inverse_blocks(W, second) if cinv is None else cinv
    out = poisson_bracket(F, G, fields)
    used = F.all_symbols() | G.all_symbols() | F.free_indices() | G.free_indices()
    u = fresh_point(F.points() | G.points())
    byl = {c.label: c for c in second}
    for (a, b), cab in cinv.items():
        ca, cb = byl[a], byl[b]
        names = tuple(fresh_names(ca.rank, used))
        left = poisson_bracket(F, ca.at(names, u), fields)
        if left.is_zero():
            continue
        right = poisson_bracket(cb.at(names, u), G, fields)
        if right.is_zero():
            continue
        out = out - integrate_point(left * from_sympy(cab) * right, u)
    return localize(out)


# -- extended structures -------------------------------------------------------

def extended_structures(model: LagrangianModel, h_c: Expr, constraints: list, multipliers: list) -> tuple:
    """(extended action density, extended Hamiltonian density)."""
    sols = {m.label: m for m in multipliers}
    h_e = h_c
    for c in constraints:
        if c.stage != "primary":
            continue
        m = sols.get(c.label)
        if m is None or m.status == "UNSOLVED":
            u = Expr.atom(multiplier(multiplier_name(c.label), *idx(c.rank)))
        else:
            u = m.expr
        h_e = h_e + u * c.expr
    action = -h_e
    for f in model.fields:
        action = action + velocity_atom(f, f.indices()) * Expr.atom(Atom(Kind.MOMENTUM, momentum_name(f.name), f.indices()))
    for c in constraints:
        ub = Expr.atom(multiplier(extra_multiplier_name(c.label), *idx(c.rank)))
        action = action - ub * c.expr
    return action, h_e


def _reduce_mod_constraints(e: Expr, constraints: list) -> Expr:
    """Rewrite momenta through constraint atoms: Pi = phi + value."""
    for pname, (rank, value, c) in weak_reducer(constraints).items():
        e = substitute(e, Kind.MOMENTUM, pname, c.atom() + value, slots=idx(rank))
    return e


def first_class_audit(h_e: Expr, constraints: list, model: LagrangianModel, log: list = None) -> list:
    fields = field_list(model)
    H = Functional(h_e)
    secondary = [c for c in constraints if c.stage == "secondary"]
    out = []
    for c in constraints:
        br = poisson_bracket(c.at(idx(c.rank)), H, fields, log)
        red = _reduce_mod_constraints(br, constraints)
        remainder = red.map_terms(
            lambda v, m, at: Expr.zero() if any(a.kind == Kind.CONSTRAINT for a in at) else Expr(((at, m, v),))
        )
        combination = red - remainder
        if remainder.is_zero():
            verdict = "WEAKLY_ZERO"
        elif secondary and _weakly_in_span(weak_reduce(remainder, constraints), c.rank, secondary):
            verdict = "WEAKLY_ZERO"
            combination = red
        else:
            verdict = "FAILS"
            combination = remainder
        out.append(AuditVerdict(c.label, verdict, br, combination))
    return out


def _solve_for_velocity(eq: Expr):
    vel = [a for a in eq.atoms() if a.tderiv == 1 and not a.derivs]
    fams = {(a.kind, a.name) for a in vel}
    if len(fams) != 1 or any(a.tderiv > 1 or (a.tderiv and a.derivs) for a in eq.atoms()):
        return None
    kind, name = fams.pop()
    rank = len(vel[0].indices)
    free = sorted(eq.free_indices())
    if len(free) != rank:
        return None
    cols = tuple(fresh_names(rank, eq.all_symbols()))
    blk = partial(eq, kind, name, cols, tderiv=1)
    s = isotropic_scalar(blk, tuple(free), cols)
    if s is None or s.constant_value() is None or s.is_zero():
        return None
    rest = eq.map_terms(lambda v, m, at: Expr.zero() if any(a.tderiv for a in at) else Expr(((at, m, v),)))
    lhs = Expr.atom(Atom(kind, name, tuple(free), (), 1))
    return Equation(lhs, -rest / s)


def extended_eom(action: Expr, model: LagrangianModel, constraints: list, drop_extra: bool = True) -> list:
    """Variations of the extended action with respect to fields, momenta and
    the extra multipliers.  With ``drop_extra`` the extra multipliers are
    set to zero before solving for the velocities."""
    out = []
    extra = [(c, extra_multiplier_name(c.label)) for c in constraints]
    for f in model.fields:
        for kind, name in ((Kind.MOMENTUM, momentum_name(f.name)), (Kind.FIELD, f.name)):
            raw = variation(action, kind, name, f.indices(), with_time=True)
            eq = raw
            if drop_extra:
                for c, ub in extra:
                    eq = substitute(eq, Kind.MULTIPLIER, ub, Expr.zero(), slots=idx(c.rank))
            solved = _solve_for_velocity(eq)
            out.append(EomEntry(name, solved or Equation(eq, Expr.zero()), raw))
    for c, ub in extra:
        raw = variation(action, Kind.MULTIPLIER, ub, idx(c.rank))
        out.append(EomEntry(ub, Equation(-raw, Expr.zero()), raw))
    return out


# -- brackets on the irreducible second-class set --------------------------------

def _component_offsets(cons: list) -> dict:
    out = {}
    n = 0
    for c in cons:
        out[c.label] = n
        n += c.components
    return out


def transverse_projector(constraints: list, second: list, relations: list) -> sympy.Matrix:
    """Orthogonal projector (in Fourier space) removing the relation directions
    from the second-class constraint components."""
    offsets = _component_offsets(second)
    size = sum(c.components for c in second)
    labels = {c.label for c in second}
    rows = []
    for r in relations:
        if not set(r.families) <= labels:
            continue
        free = sorted(r.expr.free_indices())
        for v in index_values(len(free)):
            comp = component(r.expr, free, v)
            row = sympy.zeros(1, size)
            for val, mono, atoms in comp.terms:
                if len(atoms) != 1 or atoms[0].kind != Kind.CONSTRAINT:
                    raise Unsupported("relation is not linear in constraint components")
                a = atoms[0]
                c = next(c for c in second if c.label == a.name)
                pos = offsets[c.label] + index_values(c.rank).index(tuple(a.indices))
                k = mono_to_sympy(val, mono)
                for d in a.derivs:
                    k *= sympy.Symbol(f"K{d}")
                row[0, pos] += k
            rows.append(row)
    if not rows:
        return sympy.eye(size)
    R = sympy.Matrix.vstack(*rows)
    G = (R * R.T).applyfunc(sympy.expand)
    proj = sympy.eye(size) - R.T * linalg.inverse(G) * R
    return proj.applyfunc(sympy.cancel)


def _kernel_symbol(ker: Expr, rows, cols, pts) -> sympy.Matrix:
    rv = index_values(len(rows))
    cv = index_values(len(cols))
    M = sympy.zeros(len(rv), len(cv))
    for i, a in enumerate(rv):
        for j, b in enumerate(cv):
            comp = component(ker, tuple(rows) + tuple(cols), a + b)
            if not comp.is_zero():
                M[i, j] = to_sympy(comp, kernel=pts)
    return M


def reduced_dirac_symbol(F: Expr, G: Expr, second: list, W: KernelMatrix, model: LagrangianModel,
                         proj: sympy.Matrix) -> sympy.Matrix:
    """Fourier symbol of {F, G} corrected with the projected inverse P C P."""
    fields = field_list(model)
    ff = sorted(F.free_indices())
    gf = sorted(G.free_indices())
    base = _kernel_symbol(poisson_bracket(F, G, fields), ff, gf, ("x", "y"))
    pos = _component_offsets(W.constraints)
    sel = []
    for c in second:
        sel.extend(range(pos[c.label], pos[c.label] + c.components))
    Wsec = W.symbol.extract(sel, sel)
    if (proj * Wsec - Wsec * proj).applyfunc(sympy.cancel) != sympy.zeros(*Wsec.shape):
        raise Unsupported("projector does not commute with the second-class matrix")
    C = linalg.inverse(Wsec)
    Cp = (proj * C * proj).applyfunc(sympy.cancel)
    used = F.all_symbols() | G.all_symbols()
    u = fresh_point(F.points() | G.points())
    A_blocks, B_blocks = [], []
    for c in second:
        names = tuple(fresh_names(c.rank, used))
        A_blocks.append(_kernel_symbol(poisson_bracket(F, c.at(names, u), fields), ff, names, ("x", u)))
        B_blocks.append(_kernel_symbol(poisson_bracket(c.at(names, u), G, fields), names, gf, (u, "y")))
    A = sympy.Matrix.hstack(*A_blocks)
    B = sympy.Matrix.vstack(*B_blocks)
    return (base - A * Cp * B).applyfunc(sympy.factor)


def _partial_pairings(slots: tuple):
    """All ways to split ``slots`` into delta pairs and leftover K slots."""
    if not slots:
        yield (), ()
        return
    first, rest = slots[0], slots[1:]
    for pairs, singles in _partial_pairings(rest):
        yield pairs, (first,) + singles
    for n, other in enumerate(rest):
        for pairs, singles in _partial_pairings(rest[:n] + rest[n + 1:]):
            yield ((first, other),) + pairs, singles


def isotropic_fit(M: sympy.Matrix, rank_rows: int, rank_cols: int):
    """Write a symbol matrix as a sum of products of deltas and unit wave
    vectors ``K[i]/|K|`` with scalar coefficients; None if it does not fit."""
    K = [sympy.Symbol(f"K{n}") for n in range(1, DIM + 1)]
    k2 = sum(k ** 2 for k in K)
    n = rank_rows + rank_cols
    structures = list(_partial_pairings(tuple(range(n))))
    unknowns = sympy.symbols(f"a0:{len(structures)}")
    rv, cv = index_values(rank_rows), index_values(rank_cols)
    eqs = []
    for r, a in enumerate(rv):
        for c, b in enumerate(cv):
            vals = a + b
            total = 0
            for u, (pairs, singles) in zip(unknowns, structures):
                term = u
                for p, q in pairs:
                    term *= 1 if vals[p] == vals[q] else 0
                for s_ in singles:
                    term *= K[vals[s_] - 1]
                total += term / k2 ** sympy.Rational(len(singles), 2)
            eqs.append(sympy.together(total - M[r, c]))
    numerators = [sympy.numer(e) for e in eqs]
    poly_eqs = []
    for e in numerators:
        e = sympy.expand(e)
        if e == 0:
            continue
        poly_eqs.extend(sympy.Poly(e, *K).coeffs())
    sol = sympy.solve(poly_eqs, unknowns, dict=True) if poly_eqs else [{}]
    if not sol:
        return None
    out = []
    for u, st in zip(unknowns, structures):
        v = sympy.factor(sol[0].get(u, 0))
        if v.free_symbols & (set(unknowns) | set(K)):
            return None
        if v != 0:
            out.append((v, st))
    return out


def reduced_dirac_symbol_text(F, G, second, W, model, proj) -> str:
    M = reduced_dirac_symbol(F, G, second, W, model, proj)
    rows = sorted(F.free_indices())
    cols = sorted(G.free_indices())
    if all(v == 0 for v in M):
        return "0"
    fit = isotropic_fit(M, len(rows), len(cols))
    if fit is None:
        return str(M.tolist())
    names = list(rows) + list(cols)
    parts = []
    for v, (pairs, singles) in sorted(fit, key=lambda t: len(t[1][1])):
        factors = [f"delta[{names[p]},{names[q]}]" for p, q in pairs]
        factors += [f"K[{names[k]}]" for k in singles]
        text = "*".join(factors)
        if singles:
            text += "/K" if len(singles) == 1 else f"/K^{len(singles)}"
        coeff = "" if v == 1 else f"({v})"
        parts.append("*".join(x for x in (coeff, text) if x) or "1")
    return " + ".join(parts)
