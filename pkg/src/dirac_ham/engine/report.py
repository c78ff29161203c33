"""End-to-end analysis and its serializable report."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import sympy

from ..frontend.model import LagrangianModel, check_discrete_symmetry, euler_lagrange
from ..frontend.parser import parse_expr
from ..symcore import Expr
from ..symcore.names import momentum_name
from . import pipeline as P


def number(q):
    q = Fraction(q)
    return q.numerator if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


@dataclass
class BracketResult:
    left: str
    right: str
    value: Expr
    reduced: str = None

    def to_dict(self) -> dict:
        out = {"left": self.left, "right": self.right, "value": self.value.to_text()}
        if self.reduced is not None:
            out["transverseValue"] = self.reduced
        return out


@dataclass
class AnalysisReport:
    model: LagrangianModel
    momenta: list
    hessian: P.HessianResult
    constraints: list
    jacobian: P.JacobianResult
    canonicalH: Expr
    primaryH: Expr
    W: P.KernelMatrix
    consistency: P.ConsistencyResult
    counts: dict
    reducibility: P.ReducibilityResult
    dof: P.DofCount
    diracBrackets: list
    extendedAction: Expr
    extendedH: Expr
    firstClassAudit: list
    eom: list
    eulerLagrange: list
    parity: object
    surfaceTermLog: list
    notes: list = field(default_factory=list)
    vacuum: dict = None
    oracle: dict = None
    audit: list = None

    @property
    def multipliers(self) -> list:
        return self.consistency.multipliers

    @property
    def secondary(self) -> list:
        return [c for c in self.constraints if c.stage == "secondary"]

    @property
    def second_class(self) -> list:
        return [c for c in self.constraints if c.cls == "second"]

    def to_dict(self) -> dict:
        m = self.model
        return {
            "model": {
                "name": m.name,
                "fields": [{"name": f.name, "rank": f.rank, "parity": f.parity} for f in m.fields],
                "constants": list(m.constants),
                "density": m.density.to_text(),
                "auxiliary": [a.to_text() for a in m.auxiliary],
            },
            "hessian": {
                "rank": self.hessian.rank,
                "size": len(self.hessian.labels),
                "labels": self.hessian.labels,
                "nullVectors": [[str(x) for x in v] for v in self.hessian.null_vectors],
            },
            "momenta": [{"momentum": p.momentum, "field": p.field, "expr": p.expr.to_text()} for p in self.momenta],
            "constraints": [
                {"label": c.label, "expr": c.expr.to_text(), "stage": c.stage, "class": c.cls, "rank": c.rank}
                for c in self.constraints
            ],
            "jacobian": {"rank": self.jacobian.rank, "rows": len(self.jacobian.rows), "cols": len(self.jacobian.cols),
                         "dependent": self.jacobian.dependent},
            "canonicalH": self.canonicalH.to_text(),
            "primaryH": self.primaryH.to_text(),
            "W": {
                "entries": [
                    {"row": self.W.constraints[a].label, "col": self.W.constraints[b].label, "kernel": k.to_text()}
                    for (a, b), k in sorted(self.W.entries.items())
                ],
                "rank": self.W.rank,
                "size": self.W.size,
                "ultralocal": self.W.ultralocal,
                "nullVectors": [[str(x) for x in v] for v in self.W.null_vectors],
            },
            "multipliers": {
                s.multiplier: {"constraint": s.label, "status": s.status, "expr": s.text()} for s in self.multipliers
            },
            "consistencyRounds": self.consistency.rounds,
            "reducibility": [
                {
                    "relation": r.expr.to_text(),
                    "count": r.count,
                    "dependence": "auxiliary" if r.uses_auxiliary else "identical",
                    "expanded": r.expanded.to_text() if r.expanded is not None else None,
                }
                for r in self.reducibility.relations
            ],
            "reducibilitySummary": {
                "order": self.reducibility.order,
                "useAuxiliary": self.reducibility.use_auxiliary,
                "identical": self.reducibility.identical,
                "withAuxiliary": self.reducibility.with_auxiliary,
                "auxiliaryUsed": self.reducibility.auxiliary_used,
            },
            "dof": {
                "phaseDim": self.dof.phaseDim,
                "firstClass": self.dof.firstClass,
                "secondClass": self.dof.secondClass,
                "relations": self.dof.relations,
                "naive": number(self.dof.naive),
                "corrected": number(self.dof.corrected),
                "correctedWithoutAuxiliary": number(
                    P.count_dof(self.dof.phaseDim, self.counts, self.reducibility.identical).corrected),
                "pathology": self.dof.pathology,
            },
            "diracBrackets": [b.to_dict() for b in self.diracBrackets],
            "extendedH": self.extendedH.to_text(),
            "extendedAction": self.extendedAction.to_text(),
            "firstClassAudit": [
                {"label": a.label, "verdict": a.verdict, "bracket": a.bracket.to_text(),
                 "combination": a.combination.to_text()}
                for a in self.firstClassAudit
            ],
            "eom": [{"variation": e.variation, "equation": str(e.equation)} for e in self.eom],
            "eulerLagrange": [str(e) for e in self.eulerLagrange],
            "vacuum": self.vacuum or {},
            "symmetry": {"parity": {"verdict": self.parity.verdict, "residual": self.parity.residual.to_text()}},
            "oracle": self.oracle or {},
            "audit": self.audit or [],
            "surfaceTermLog": list(self.surfaceTermLog),
            "notes": list(self.notes),
        }


def default_pairs(model: LagrangianModel) -> list:
    """Brackets reported by default: field/field, field/own momentum, and
    divergences of fields and momenta against the other fields."""
    pairs = []
    fs = list(model.fields)

    def atom(name, rank, letters, point="x"):
        text = name + (f"[{','.join(letters)}]" if rank else "")
        return text if point == "x" else text + "@" + point

    def div(name, rank):
        letters = ["i"] + list("jk"[: rank - 1])
        return f"d[i]({atom(name, rank, letters)})"

    for n, f in enumerate(fs):
        for g in fs[n + 1:]:
            pairs.append((atom(f.name, f.rank, P.idx(f.rank)), atom(g.name, g.rank, P.idx(g.rank, f.rank), "y")))
    for f in fs:
        pairs.append((atom(f.name, f.rank, P.idx(f.rank)),
                      atom(momentum_name(f.name), f.rank, P.idx(f.rank, f.rank), "y")))
    for f in fs:
        if f.rank == 0:
            continue
        for g in fs:
            if g is f:
                continue
            off = f.rank  # divergence keeps rank-1 free letters after i
            right = atom(g.name, g.rank, P.idx(g.rank, off + 1), "y")
            pairs.append((div(f.name, f.rank), right))
            pairs.append((div(momentum_name(f.name), f.rank), right))
    return pairs


def analyze(model: LagrangianModel, use_auxiliary: bool = None, reducibility_order: int = 1,
            bracket_pairs=None, transverse: bool = True) -> AnalysisReport:
    if use_auxiliary is None:
        use_auxiliary = bool(model.auxiliary)
    log: list = []
    notes: list = []
    momenta = P.compute_momenta(model)
    hess = P.hessian(model, momenta)
    primary = P.primary_constraints(model, momenta, hess)
    jac = P.constraint_jacobian(primary, model) if primary else P.JacobianResult([], [], sympy.zeros(0, 0), 0)
    h_c = P.canonical_hamiltonian(model, momenta)
    h_p = P.primary_hamiltonian(h_c, primary)
    cons = P.run_consistency(primary, h_c, model, log=log) if primary else P.ConsistencyResult([], [], 0, {})
    allc = primary + cons.secondary
    W = P.constraint_matrix(allc, model, log)
    classified, counts = P.classify(allc, W)
    red = P.reducibility(classified, model.auxiliary, reducibility_order, use_auxiliary)
    rel_first = sum(r.count for r in red.relations
                    if all(c.cls == "first" for c in classified if c.label in r.families))
    counted = red.counted
    dof = P.count_dof(model, counts, counted, rel_first if counted else 0, red.identical)
    second = [c for c in classified if c.cls == "second"]
    brackets = []
    if second and counts["second"] == sum(c.components for c in second):
        try:
            cinv = P.inverse_blocks(W, second)
        except P.SingularW as exc:
            notes.append(f"Dirac brackets skipped: {exc}")
            cinv = None
        if cinv is not None:
            pairs = default_pairs(model) if bracket_pairs is None else bracket_pairs
            proj = None
            if transverse and red.relations:
                try:
                    proj = P.transverse_projector(classified, second, red.relations)
                except P.Unsupported as exc:
                    notes.append(f"transverse Dirac brackets skipped: {exc}")
            for left, right in pairs:
                F, G = parse_expr(left), parse_expr(right)
                value = P.dirac_bracket(F, G, second, W, model, cinv)
                reduced = None
                if proj is not None:
                    reduced = P.reduced_dirac_symbol_text(F, G, second, W, model, proj)
                brackets.append(BracketResult(left, right, value, reduced))
    action, h_e = P.extended_structures(model, h_c, classified, cons.multipliers)
    audit = P.first_class_audit(h_e, classified, model, log)
    eom = P.extended_eom(action, model, classified)
    el = euler_lagrange(model)
    parity = check_discrete_symmetry(model)
    if any(f.rank == 2 for f in model.fields):
        notes.append("rank-2 fields are treated as general tensors: no symmetry or trace condition is imposed")
    if red.relations and counts["second"]:
        notes.append("the Dirac bracket inverts the full second-class matrix although the reducibility "
                     "relations leave fewer independent second-class constraints; transverseValue shows "
                     "the bracket built from the irreducible (transverse) part")
    if dof.pathology:
        notes.append("negative degree-of-freedom count: model pathology")
    return AnalysisReport(model, momenta, hess, classified, jac, h_c, h_p, W, cons, counts, red, dof,
                          brackets, action, h_e, audit, eom, el, parity, log, notes)
