"""Characteristic-curve solvers for first- and second-order PDE families."""

from .characteristics import Tracer, trace_backward, trace_forward
from .expr import compile_expr, parse_expr, substitute, to_str
from .ode import integrate, quadrature, rk4_fixed
from .problem import Family, NodeStatus, ProblemSpec, SolutionGrid, SpecError, make_spec
from .reducers import (
    AnsatzInconsistent,
    ReducedODE,
    closed_form_power_law,
    integrate_reduced_in_t,
    integrate_reduced_in_x,
    invert_f,
    reduce,
    reduce_ftype,
    reduce_general_bu,
    reduce_mixed_tt,
    reduce_mixed_xt,
    riccati_to_bernoulli,
    solve,
    solve_bernoulli,
    solve_linear_first_order,
    solve_riccati,
    solve_separable,
)
from .specfile import load_spec
from .verify import (
    ORACLES,
    convergence_order,
    oracle_eval,
    residual_first_order,
    residual_second_order,
)

__all__ = [
    "AnsatzInconsistent",
    "Family",
    "NodeStatus",
    "ORACLES",
    "ProblemSpec",
    "ReducedODE",
    "SolutionGrid",
    "SpecError",
    "Tracer",
    "closed_form_power_law",
    "compile_expr",
    "convergence_order",
    "integrate",
    "integrate_reduced_in_t",
    "integrate_reduced_in_x",
    "invert_f",
    "load_spec",
    "make_spec",
    "oracle_eval",
    "parse_expr",
    "quadrature",
    "reduce",
    "reduce_ftype",
    "reduce_general_bu",
    "reduce_mixed_tt",
    "reduce_mixed_xt",
    "residual_first_order",
    "residual_second_order",
    "riccati_to_bernoulli",
    "rk4_fixed",
    "solve",
    "solve_bernoulli",
    "solve_linear_first_order",
    "solve_riccati",
    "solve_separable",
    "substitute",
    "to_str",
    "trace_backward",
    "trace_forward",
]
