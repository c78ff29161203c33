import json
from fractions import Fraction

import pytest
from hypothesis import given, settings

from dirac_ham.engine import pipeline as P
from dirac_ham.engine.brackets import poisson_bracket
from dirac_ham.engine.report import analyze
from dirac_ham.frontend import euler_lagrange, load_preset, parse_expr, parse_model
from dirac_ham.symcore import Functional, Kind, substitute

from strategies import functionals

E = parse_expr
FIELDS = [("E", 1), ("B", 1)]


def model(body, name="m"):
    return parse_model(f"model {name} {{ {body} }}")


FREE = "field q rank 0 parity +; density = 1/2*dt(q)^2;"
POTENTIAL = "constant m; field q rank 0 parity +; density = 1/2*dt(q)^2 - 1/2*m^2*q^2;"
NULL = "field q rank 0 parity +; density = 0*dt(q);"


class TestPoissonBracket:
    def test_fundamental_bracket(self):
        assert poisson_bracket(E("E[i]"), E("Pi_E[j]@y"), FIELDS) == E("delta[i,j]*ddelta(x,y)")

    def test_constraint_brackets(self):
        phi_e = E("Pi_E[i] - 1/8*c^-1*pi^-1*B[i]")
        psi = E("(Pi_B[j] + 1/8*c^-1*pi^-1*E[j])@y")
        assert poisson_bracket(phi_e, psi, FIELDS) == E("-1/4*c^-1*pi^-1*delta[i,j]*ddelta(x,y)")
        assert poisson_bracket(phi_e, phi_e.rename_indices({"i": "j"}).at("y"), FIELDS).is_zero()

    def test_derivative_of_delta(self):
        value = poisson_bracket(E("d[i](E[i])"), E("Pi_E[k]@y"), FIELDS)
        assert value == E("d[k](ddelta(x,y))")

    def test_shared_free_index_is_rejected(self):
        with pytest.raises(ValueError):
            poisson_bracket(E("E[i]"), E("Pi_E[i]@y"), FIELDS)

    def test_functionals_give_functional(self):
        F = Functional(E("E[i]*E[i]"))
        G = Functional(E("Pi_E[i]*B[i]"))
        assert poisson_bracket(F, G, FIELDS).density == E("2*E[i]*B[i]")

    def test_surface_moves_are_logged(self):
        log = []
        poisson_bracket(Functional(E("E[i]*eps[i,j,k]*d[j](E[k])")), Functional(E("Pi_E[i]*Pi_E[i]")), FIELDS, log)
        assert log and "moved off E" in log[0]


@settings(max_examples=60, deadline=None)
@given(functionals(), functionals())
def test_local_bracket_antisymmetry_under_point_swap(F, G):
    fg = poisson_bracket(F, G, FIELDS)
    gf = poisson_bracket(G, F, FIELDS)
    assert (fg + gf).is_null()


class TestStages:
    def test_hessian_of_free_scalar(self):
        m = model(FREE)
        h = P.hessian(m)
        assert h.rank == 1 and h.null_vectors == []
        assert P.primary_constraints(m, P.compute_momenta(m)) == []

    def test_momentum_of_free_scalar(self):
        (p,) = P.compute_momenta(model(FREE))
        assert p.momentum == "Pi_q" and p.expr == E("dt(q)")

    def test_canonical_hamiltonian_with_potential(self):
        m = model(POTENTIAL)
        expected = parse_expr("1/2*Pi_q*Pi_q + 1/2*m^2*q*q", constants=("m",))
        assert P.canonical_hamiltonian(m, P.compute_momenta(m)) == expected

    def test_maxwell_a_hessian(self, potential):
        assert potential.hessian.rank == 3
        assert len(potential.hessian.null_vectors) == 1
        assert [c.expr for c in potential.constraints if c.stage == "primary"] == [E("Pi_A0")]

    def test_duplicate_constraint_is_dependent(self, maxwell):
        phi = maxwell.constraints[0]
        twin = P.Constraint("twin", phi.expr, "primary", phi.rank)
        jac = P.constraint_jacobian([phi, twin], maxwell.model)
        assert jac.rank == 3 and jac.dependent

    def test_w_antisymmetry(self, maxwell, gravity):
        for r in (maxwell, gravity):
            for (a, b), k in r.W.entries.items():
                ca, cb = r.W.constraints[a], r.W.constraints[b]
                swapped = r.W.entries[b, a]
                names = dict(zip(P.idx(cb.rank) + P.idx(ca.rank, cb.rank),
                                 P.idx(cb.rank, ca.rank) + P.idx(ca.rank)))
                back = swapped.rename_indices(names).at({"x": "y", "y": "x"})
                assert k == -back

    def test_ultralocal_flag(self, maxwell, potential):
        assert maxwell.W.ultralocal and potential.W.ultralocal

    def test_maxwell_a_gauss_law(self, potential):
        (chi,) = potential.secondary
        assert chi.expr in (E("d[i](Pi_A[i])"), E("-d[i](Pi_A[i])"))
        assert potential.W.rank == 0
        assert {c.cls for c in potential.constraints} == {"first"}

    def test_maxwell_a_multiplier_is_gauge_freedom(self, potential):
        (u,) = potential.multipliers
        assert u.status == "UNDETERMINED"

    def test_null_lagrangian(self):
        r = analyze(model(NULL))
        assert [m.status for m in r.multipliers] == ["UNDETERMINED"]
        assert r.counts == {"first": 1, "second": 0}
        assert r.dof.corrected == 0

    def test_chain_of_secondary_constraints(self):
        r = analyze(model("field q rank 0 parity +; field a rank 0 parity +; density = 1/2*dt(q)^2 - a*q;"))
        assert [c.expr for c in r.secondary] == [E("q"), E("Pi_q"), E("a")]
        assert r.counts == {"first": 0, "second": 4}
        assert r.dof.corrected == 0

    def test_inconsistent_theory(self):
        with pytest.raises(P.InconsistentTheory):
            analyze(model("field q rank 0 parity +; field a rank 0 parity +; density = 1/2*dt(q)^2 + a;"))

    def test_empty_constraint_set_classifies_to_zero(self):
        r = analyze(model(FREE))
        assert r.constraints == [] and r.counts == {"first": 0, "second": 0}
        assert r.dof.corrected == 1
        assert r.extendedH == r.canonicalH

    def test_singular_second_class_block(self, maxwell):
        W = P.KernelMatrix(maxwell.W.constraints, {}, maxwell.W.symbol * 0, 0, True)
        with pytest.raises(P.SingularW):
            P.inverse_blocks(W, maxwell.second_class)


class TestReducibility:
    def test_relations_need_auxiliary_conditions(self, maxwell):
        red = P.reducibility(maxwell.constraints, maxwell.model.auxiliary, 1, use_auxiliary=False)
        assert red.relations == [] and red.identical == 0
        assert red.with_auxiliary == 2

    def test_relations_are_auxiliary_dependent(self, maxwell):
        assert all(r.uses_auxiliary for r in maxwell.reducibility.relations)
        assert maxwell.reducibility.relations[0].expanded == E("d[i](Pi_E[i]) - 1/8*c^-1*pi^-1*d[i](B[i])")

    def test_mechanics_constraint_has_no_relations(self):
        r = analyze(model(NULL))
        assert r.reducibility.relations == []

    def test_gravity_relations(self, gravity):
        assert gravity.reducibility.counted == 6
        assert [x.expr for x in gravity.reducibility.relations] == [E("d[i](phi_E[i,j])"), E("d[i](phi_B[i,j])")]

    def test_higher_order_search_adds_nothing_new(self, maxwell):
        red = P.reducibility(maxwell.constraints, maxwell.model.auxiliary, 2, True)
        assert red.counted == 2


class TestDofCount:
    @pytest.mark.parametrize("phase,first,second,rel", [(12, 0, 6, 2), (8, 2, 0, 0), (36, 0, 18, 6), (2, 0, 0, 0)])
    def test_invariant_equations(self, phase, first, second, rel):
        d = P.count_dof(phase, {"first": first, "second": second}, rel)
        assert d.naive == Fraction(phase - 2 * first - second, 2)
        assert d.corrected == Fraction(phase - 2 * first - (second - rel), 2)

    def test_no_constraints_gives_one(self):
        assert P.count_dof(2, {}, 0).corrected == 1

    def test_pathology_flag(self):
        assert P.count_dof(2, {"first": 2}, 0).pathology

    @pytest.mark.parametrize("fixture", ["maxwell", "potential", "gravity"])
    def test_reports_satisfy_invariants(self, fixture, request):
        r = request.getfixturevalue(fixture)
        d = r.dof
        assert d.naive == Fraction(d.phaseDim - 2 * d.firstClass - d.secondClass, 2)
        assert d.corrected == Fraction(d.phaseDim - 2 * d.firstClass - (d.secondClass - d.relations), 2)


class TestExtended:
    def test_extended_eom_reduce_to_euler_lagrange(self, maxwell):
        el = {str(q) for q in euler_lagrange(maxwell.model)}
        field_eqs = {str(e.equation) for e in maxwell.eom if e.variation in ("Pi_E", "Pi_B")}
        assert field_eqs == el

    def test_momentum_eom_match_field_eom_on_shell(self, maxwell):
        eqs = {e.variation: e.equation for e in maxwell.eom}
        momenta = {p.momentum: p.expr for p in maxwell.momenta}
        field_eqs = {eqs[n].lhs - eqs[n].rhs for n in momenta}
        for name in ("E", "B"):
            residual = eqs[name].lhs - eqs[name].rhs
            for mom, value in momenta.items():
                residual = substitute(residual, Kind.MOMENTUM, mom, value, slots=("i",))
            residual = residual * E("8*pi*c")
            assert residual in field_eqs or -residual in field_eqs

    def test_constraint_recovery_from_multiplier_variation(self, maxwell):
        rec = {e.variation: e.equation for e in maxwell.eom if e.variation.startswith("ub_")}
        assert {str(eq.lhs) for eq in rec.values()} == {c.expr.to_text() for c in maxwell.constraints}

    def test_gravity_extended_hamiltonian(self, gravity):
        assert gravity.extendedH == E("c*Pi_E[i,j]*eps[i,k,l]*d[k](B[l,j]) - c*Pi_B[i,j]*eps[i,k,l]*d[k](E[l,j])")

    def test_first_class_audit_of_zero(self, maxwell):
        assert all(a.verdict == "WEAKLY_ZERO" for a in P.first_class_audit(E("0"), maxwell.constraints,
                                                                            maxwell.model))


class TestTransverseBracket:
    def test_isotropic_symbols(self, maxwell):
        t = {(b.left, b.right): b.reduced for b in maxwell.diracBrackets}
        assert t["E[i]", "Pi_E[j]@y"] == "(1/2)*delta[i,j] + (1/2)*K[i]*K[j]/K^2"
        assert t["E[i]", "B[j]@y"] == "(4*c*pi)*delta[i,j] + (-4*c*pi)*K[i]*K[j]/K^2"
        assert t["d[i](E[i])", "B[k]@y"] == "0"

    def test_projector_is_idempotent(self, maxwell):
        proj = P.transverse_projector(maxwell.constraints, maxwell.second_class, maxwell.reducibility.relations)
        assert (proj * proj - proj).applyfunc(lambda x: x.simplify()).is_zero_matrix


class TestReport:
    def test_json_is_deterministic(self, maxwell):
        a = json.dumps(maxwell.to_dict(), indent=2)
        b = json.dumps(analyze(load_preset("eb-maxwell")).to_dict(), indent=2)
        assert a == b

    def test_required_keys(self, maxwell):
        d = maxwell.to_dict()
        for key in ("model", "hessian", "momenta", "constraints", "W", "multipliers", "reducibility", "dof",
                    "diracBrackets", "extendedH", "eom", "vacuum", "symmetry", "oracle", "audit", "surfaceTermLog"):
            assert key in d
        assert set(d["dof"]) >= {"phaseDim", "firstClass", "secondClass", "relations", "naive", "corrected"}
        assert {"label", "expr", "stage", "class"} <= set(d["constraints"][0])

    def test_notes_explain_transverse_value(self, maxwell, gravity):
        assert any("transverse" in n for n in maxwell.notes)
        assert any("rank-2" in n for n in gravity.notes)

    def test_custom_bracket_pairs(self, maxwell):
        r = analyze(maxwell.model, bracket_pairs=[("B[k]", "E[l]@y")], transverse=False)
        (b,) = r.diracBrackets
        assert b.value == E("-4*pi*c*delta[k,l]*ddelta(x,y)")
        assert b.reduced is None
