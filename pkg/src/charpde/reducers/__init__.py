"""Solution procedures for the eight PDE families."""

from __future__ import annotations

from typing import Optional

from ..problem import Family, ProblemSpec, SolutionGrid
from .first_order import (
    riccati_to_bernoulli,
    solve_bernoulli,
    solve_linear_first_order,
    solve_riccati,
    solve_separable,
)
from .second_order import (
    AnsatzInconsistent,
    NotMonotone,
    OutOfRange,
    ReducedODE,
    check_monotone,
    closed_form_power_law,
    integrate_reduced_in_t,
    integrate_reduced_in_x,
    invert_f,
    reduce,
    reduce_ftype,
    reduce_general_bu,
    reduce_mixed_tt,
    reduce_mixed_xt,
)

_FIRST_ORDER = {
    Family.LINEAR: solve_linear_first_order,
    Family.SEPARABLE: solve_separable,
    Family.BERNOULLI: solve_bernoulli,
    Family.RICCATI: solve_riccati,
}


def solve(
    spec: ProblemSpec, threads: int = 1
) -> tuple[SolutionGrid, Optional[ReducedODE]]:
    """Solve any family on its grid; second-order families also return their reduction."""
    if spec.family in _FIRST_ORDER:
        return _FIRST_ORDER[spec.family](spec, threads), None
    red = reduce(spec)
    if red.direction == "x":
        return integrate_reduced_in_x(red, spec, threads), red
    return integrate_reduced_in_t(red, spec, threads), red


__all__ = [
    "AnsatzInconsistent",
    "NotMonotone",
    "OutOfRange",
    "ReducedODE",
    "check_monotone",
    "closed_form_power_law",
    "integrate_reduced_in_t",
    "integrate_reduced_in_x",
    "invert_f",
    "reduce",
    "reduce_ftype",
    "reduce_general_bu",
    "reduce_mixed_tt",
    "reduce_mixed_xt",
    "riccati_to_bernoulli",
    "solve",
    "solve_bernoulli",
    "solve_linear_first_order",
    "solve_riccati",
    "solve_separable",
]
