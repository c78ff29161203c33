import pytest
from hypothesis import given, settings

from dirac_ham.frontend import (
    PRESETS,
    DSLSyntaxError,
    ValidationError,
    check_discrete_symmetry,
    euler_lagrange,
    load_model,
    load_preset,
    parity_transform,
    parse_expr,
    parse_model,
    preset_source,
)
from dirac_ham.symcore import canonicalize

from strategies import raw_expressions

E = parse_expr


def model(body, name="m"):
    return parse_model(f"model {name} {{ {body} }}")


class TestParser:
    def test_presets_are_bundled(self):
        assert set(PRESETS) >= {"eb-maxwell", "maxwell-a", "eb-gravity"}

    def test_eb_maxwell_preset(self):
        m = load_preset("eb-maxwell")
        assert [(f.name, f.rank, f.parity) for f in m.fields] == [("E", 1, -1), ("B", 1, 1)]
        assert m.density == E(
            "1/8*pi^-1*(B[i]*(1/c*dt(E[i]) - eps[i,j,k]*d[j](B[k])) - E[i]*(1/c*dt(B[i]) + eps[i,j,k]*d[j](E[k])))"
        )
        assert list(m.auxiliary) == [E("d[i](E[i])"), E("d[i](B[i])")]

    def test_eb_gravity_preset_has_rank_two_fields(self):
        m = load_preset("eb-gravity")
        assert [f.rank for f in m.fields] == [2, 2]

    @pytest.mark.parametrize("name", ["eb-maxwell", "maxwell-a", "eb-gravity"])
    def test_source_round_trip(self, name):
        m = load_preset(name)
        again = parse_model(m.to_source())
        assert again == m
        assert again.to_source() == m.to_source()

    def test_load_model_accepts_path(self, tmp_path):
        path = tmp_path / "x.lag"
        path.write_text(preset_source("maxwell-a"))
        assert load_model(str(path)) == load_preset("maxwell-a")

    def test_load_model_rejects_unknown_name(self):
        with pytest.raises(ValidationError, match="neither a preset"):
            load_model("no-such-model")

    def test_syntax_error_carries_position(self):
        with pytest.raises(DSLSyntaxError) as info:
            parse_model("model m {\n  field E rank 1 parity +;\n  density = (E[i]*E[i];\n}")
        assert info.value.line == 3
        assert info.value.column > 0

    def test_parity_is_required(self):
        with pytest.raises(DSLSyntaxError, match="parity"):
            model("field E rank 1; density = E[i]*E[i];")

    def test_rank_limited_to_two(self):
        with pytest.raises(DSLSyntaxError):
            model("field E rank 3 parity +; density = 0;")

    def test_free_index_in_density(self):
        with pytest.raises(ValidationError):
            model("field E rank 1 parity +; density = E[i]*dt(E[j]);")

    def test_unknown_field(self):
        with pytest.raises(ValidationError, match="unknown field"):
            model("field E rank 1 parity +; density = F[i]*E[i];")

    def test_wrong_number_of_indices(self):
        with pytest.raises(ValidationError, match="rank 1"):
            model("field E rank 1 parity +; density = E*E;")

    def test_second_order_time_derivative(self):
        with pytest.raises(ValidationError):
            model("field q rank 0 parity +; density = q*dt(dt(q));")

    def test_declared_constant(self):
        m = model("constant m; field q rank 0 parity +; density = 1/2*dt(q)^2 - 1/2*m^2*q^2;")
        assert "m" in m.constants

    def test_undeclared_constant_is_unknown_field(self):
        with pytest.raises(ValidationError):
            model("field q rank 0 parity +; density = 1/2*dt(q)^2 - g*q;")

    def test_power_of_sum_expands(self):
        assert E("(E[i] + B[i])^2") == E("E[i]*E[i] + 2*E[i]*B[i] + B[i]*B[i]")

    def test_eps_needs_three_indices(self):
        with pytest.raises(DSLSyntaxError):
            E("eps[i,j]")


@settings(max_examples=150, deadline=None)
@given(raw_expressions())
def test_parse_serialize_parse(e):
    once = E(canonicalize(e).to_text())
    assert E(once.to_text()) == once


class TestEulerLagrange:
    def test_first_order_maxwell(self):
        eqs = {str(q) for q in euler_lagrange(load_preset("eb-maxwell"))}
        assert eqs == {"dt(E[i]) = c*eps[i,j,k]*d[j](B[k])", "dt(B[i]) = -c*eps[i,j,k]*d[j](E[k])"}

    def test_free_scalar_is_implicit(self):
        (eq,) = euler_lagrange(model("field q rank 0 parity +; density = 1/2*dt(q)^2;"))
        assert eq.residual() in (E("dt(dt(q))"), E("-dt(dt(q))"))

    def test_gravity_curl_acts_on_first_slot(self):
        eqs = {str(q) for q in euler_lagrange(load_preset("eb-gravity"))}
        assert eqs == {"dt(E[i,j]) = c*eps[i,k,l]*d[k](B[l,j])", "dt(B[i,j]) = -c*eps[i,k,l]*d[k](E[l,j])"}


class TestParity:
    def test_eb_maxwell_is_not_parity_invariant(self):
        v = check_discrete_symmetry(load_preset("eb-maxwell"))
        assert v.verdict == "NOT_INVARIANT"

    def test_quadratic_scalar_is_invariant(self):
        v = check_discrete_symmetry(load_preset("eb-maxwell"), density=E("E[i]*E[i]"))
        assert v.verdict == "INVARIANT"
        assert v.residual.is_zero()

    def test_curl_term_residual_is_minus_twice_density(self):
        density = E("eps[i,j,k]*E[i]*d[j](E[k])")
        v = check_discrete_symmetry(load_preset("eb-maxwell"), density=density)
        assert v.verdict == "NOT_INVARIANT"
        assert v.residual == density.scale(-2)

    def test_potential_formulation_is_invariant(self):
        assert check_discrete_symmetry(load_preset("maxwell-a")).verdict == "INVARIANT"

    def test_total_derivative_residual_counts_as_invariant(self):
        # odd part is a pure divergence
        v = check_discrete_symmetry(load_preset("eb-maxwell"), density=E("E[i]*E[i] + d[i](B[i])"))
        assert v.verdict == "INVARIANT"

    def test_unknown_transform(self):
        with pytest.raises(ValueError):
            check_discrete_symmetry(load_preset("eb-maxwell"), "time-reversal")

    @pytest.mark.parametrize("name", ["eb-maxwell", "maxwell-a", "eb-gravity"])
    def test_parity_is_an_involution(self, name):
        m = load_preset(name)
        twice = parity_transform(m, parity_transform(m, m.density))
        assert twice == m.density
        assert check_discrete_symmetry(m, density=m.density).residual == \
            parity_transform(m, m.density) - m.density
