import pytest

from charpde.expr import Var
from charpde.problem import Family, NodeStatus, ProblemSpec, SolutionGrid, SpecError, make_spec


def linear(**kw):
    fields = dict(family="linear", a="x", alpha="1", b_xt="x+t", phi="x^2")
    fields.update(kw)
    return ProblemSpec(**fields)


def test_fields_are_parsed():
    spec = linear()
    assert spec.family is Family.LINEAR
    assert spec.a == Var("x")
    assert spec.compiled("phi")(3.0) == 9.0


def test_unknown_family_names_the_field():
    with pytest.raises(SpecError) as info:
        linear(family="lineer")
    assert info.value.field == "family"


@pytest.mark.parametrize(
    "changes, field",
    [
        ({"phi": None}, "phi"),
        ({"phi": "x + t"}, "phi"),
        ({"a": "u"}, "a"),
        ({"psi": "x"}, "psi"),
        ({"x_max": 0.0}, "domain"),
        ({"t_max": 0.0}, "domain"),
        ({"nx": 1}, "grid"),
        ({"tol": 0.0}, "solver.tol"),
        ({"phi": "x +"}, "phi"),
    ],
)
def test_invalid_specs(changes, field):
    with pytest.raises(SpecError) as info:
        linear(**changes)
    assert info.value.field == field


def test_bernoulli_exponent_must_differ_from_one():
    with pytest.raises(SpecError):
        make_spec("bernoulli", a="x", b_xt="1", alpha="t", n=1, phi="x")


def test_ftype_requires_monotone_f():
    fields = dict(a="1", B_xt="1", A_u="0", f_domain=(-1.0, 1.0), phi="x", psi="0")
    make_spec("ftype", f="u^3+u", **fields)
    with pytest.raises(SpecError) as info:
        make_spec("ftype", f="u^2", **fields)
    assert info.value.field == "f"


def test_with_grid_requires_whole_steps():
    spec = linear(x_min=0.5, x_max=1.5, t_max=1.0)
    fine = spec.with_grid(0.04)
    assert (fine.nx, fine.nt) == (26, 26)
    with pytest.raises(SpecError):
        spec.with_grid(0.3)


def test_solution_grid_bookkeeping():
    grid = SolutionGrid.empty([0.0, 1.0], [0.0, 0.5, 1.0])
    grid.u[:] = 1.0
    grid.mark(1, 2, NodeStatus.BLOW_UP, "too big")
    assert grid.status_counts()["blow_up"] == 1
    assert grid.fail_fraction() == pytest.approx(1 / 6)
    assert grid.reasons[(1, 2)] == "too big"
