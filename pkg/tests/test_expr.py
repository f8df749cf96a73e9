import math
import pickle

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from charpde.expr import (
    Binary,
    Call,
    Const,
    ExprDomainError,
    ExprSyntaxError,
    Neg,
    UnboundVariable,
    UnknownFunction,
    UnknownVariable,
    Var,
    compile_expr,
    eval_expr,
    free_vars,
    parse_expr,
    substitute,
    to_str,
)

ENV = {"x": 0.7, "t": 0.3, "u": 1.3, "s": 0.2}


@pytest.mark.parametrize(
    "src, expected",
    [
        ("1 + 2 * 3", 7.0),
        ("(1 + 2) * 3", 9.0),
        ("2^3^2", 512.0),
        ("-2^2", -4.0),
        ("-t^2", -0.09),
        ("8 / 4 / 2", 1.0),
        ("10 - 4 - 3", 3.0),
        ("1e-3 * 2", 0.002),
        (".5 + 0.25", 0.75),
        ("exp(0) + log(1) + sqrt(4) + abs(-3)", 6.0),
        ("atan(1) * 4", math.pi),
        ("x*t + u - s", 0.7 * 0.3 + 1.3 - 0.2),
        ("--x", 0.7),
    ],
)
def test_evaluates(src, expected):
    assert eval_expr(src, ENV) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("src", ["", "1 +", "(x", "x)", "2 3", "*x", "sin x", "1..2"])
def test_syntax_errors(src):
    with pytest.raises(ExprSyntaxError):
        parse_expr(src)


def test_syntax_error_reports_offset():
    with pytest.raises(ExprSyntaxError) as info:
        parse_expr("x + * t")
    assert info.value.offset == 4


def test_unknown_names():
    with pytest.raises(UnknownFunction):
        parse_expr("sinh(x)")
    with pytest.raises(UnknownVariable):
        parse_expr("y + 1")


def test_unbound_variable():
    with pytest.raises(UnboundVariable):
        eval_expr("x + u", {"x": 1.0})
    with pytest.raises(UnboundVariable):
        compile_expr("x + u", ("x",))


@pytest.mark.parametrize(
    "src, env",
    [("log(x)", {"x": 0.0}), ("sqrt(x)", {"x": -1.0}), ("x^0.5", {"x": -4.0}), ("1/x", {"x": 0.0})],
)
def test_domain_errors_are_located(src, env):
    with pytest.raises(ExprDomainError) as info:
        eval_expr(src, env)
    assert info.value.offset is not None
    fn = compile_expr(src, ("x",))
    with pytest.raises(ExprDomainError):
        fn(env["x"])


def test_negative_base_integer_power_is_fine():
    assert eval_expr("x^3", {"x": -2.0}) == -8.0
    assert compile_expr("x^(-2)", ("x",))(-2.0) == 0.25


def test_structure():
    e = parse_expr("2*x + sin(t)")
    assert e == Binary("+", Binary("*", Const(2.0), Var("x")), Call("sin", Var("t")))
    assert free_vars(e) == {"x", "t"}
    assert parse_expr("-x") == Neg(Var("x"))


def test_substitute_zero_time():
    e = substitute("t + x*t", "t", 0.0)
    assert free_vars(e) == {"x"}
    assert eval_expr(e, {"x": 5.0}) == 0.0


def test_compiled_pickles():
    fn = compile_expr("x*exp(-t)", ("x", "t"))
    clone = pickle.loads(pickle.dumps(fn))
    assert clone(2.0, 1.0) == fn(2.0, 1.0)


# -- properties -------------------------------------------------------------

leaves = st.one_of(
    st.sampled_from([Var(v) for v in "xtus"]),
    st.floats(min_value=0.0, max_value=50.0, allow_nan=False).map(Const),
    st.integers(min_value=0, max_value=9).map(lambda n: Const(float(n))),
)


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda a: Binary(*a)),
        children.map(Neg),
        st.tuples(st.sampled_from(["exp", "sin", "cos", "atan", "abs"]), children).map(
            lambda a: Call(*a)
        ),
    )


exprs = st.recursive(leaves, _extend, max_leaves=12)


@given(exprs)
def test_print_parse_round_trip(e):
    assert parse_expr(to_str(e)) == e


def _value(e, env):
    try:
        v = eval_expr(e, env)
    except (ExprDomainError, OverflowError):
        return None
    return v if isinstance(v, float) and math.isfinite(v) else None


@given(exprs)
def test_compiled_matches_tree_evaluation_bitwise(e):
    expected = _value(e, ENV)
    assume(expected is not None)
    got = compile_expr(e, ("x", "t", "u", "s"))(*(ENV[v] for v in "xtus"))
    assert got == expected or (math.isnan(got) and math.isnan(expected))


@given(exprs, exprs, st.sampled_from("xtus"))
def test_substitution_commutes_with_evaluation(e, r, var):
    rv = _value(r, ENV)
    assume(rv is not None)
    direct = _value(e, {**ENV, var: rv})
    substituted = _value(substitute(e, var, r), ENV)
    assume(direct is not None)
    assert substituted == direct
