"""Problem definitions and solution grids for the eight PDE families."""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .characteristics import Tracer
from .expr import ZERO, CompiledExpr, Expr, ExprLike, as_expr, compile_expr, free_vars


class SpecError(ValueError):
    """Invalid problem definition; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class Family(str, enum.Enum):
    LINEAR = "linear"
    SEPARABLE = "separable"
    BERNOULLI = "bernoulli"
    RICCATI = "riccati"
    MIXED_TT = "mixed_tt"
    MIXED_XT = "mixed_xt"
    FTYPE = "ftype"
    GENERAL_BU = "general_bu"


FIRST_ORDER = frozenset(
    {Family.LINEAR, Family.SEPARABLE, Family.BERNOULLI, Family.RICCATI}
)

# expression fields and the variables each may use
EXPR_FIELDS: dict[str, frozenset[str]] = {
    "a": frozenset("xt"),
    "alpha": frozenset("xt"),
    "b_xt": frozenset("xt"),
    "beta": frozenset("xt"),
    "u1": frozenset("xt"),
    "B_xt": frozenset("xt"),
    "f": frozenset("u"),
    "A_u": frozenset("u"),
    "G": frozenset("u"),
    "bigB": frozenset("u"),
    "b_u": frozenset("u"),
    "phi": frozenset("x"),
    "psi": frozenset("x"),
    "h_anchor": frozenset("x"),
    "g": frozenset("t"),
    "h": frozenset("t"),
}

REQUIRED: dict[Family, tuple[str, ...]] = {
    Family.LINEAR: ("a", "alpha", "b_xt", "phi"),
    Family.SEPARABLE: ("a", "f", "b_xt", "phi"),
    Family.BERNOULLI: ("a", "b_xt", "alpha", "n", "phi"),
    Family.RICCATI: ("a", "b_xt", "alpha", "beta", "u1", "phi"),
    Family.MIXED_TT: ("a", "b_xt", "f", "phi", "psi"),
    Family.MIXED_XT: ("a", "b_xt", "f", "g", "h"),
    Family.FTYPE: ("a", "B_xt", "A_u", "f", "f_domain", "phi", "psi"),
    Family.GENERAL_BU: ("a", "alpha", "G", "bigB", "phi", "psi"),
}

OPTIONAL: dict[Family, tuple[str, ...]] = {
    Family.MIXED_TT: ("h_anchor",),
    Family.MIXED_XT: ("h_anchor",),
    Family.FTYPE: ("h_anchor",),
    Family.GENERAL_BU: ("h_anchor", "b_u"),
}


@dataclass(frozen=True)
class ProblemSpec:
    """One PDE problem: family, coefficients, data, domain and solver settings.

    ``h_anchor`` fixes the free constant in the accumulated source integral of
    the second-order families, ``H(x, 0) = h_anchor(x)``; zero by default.
    ``b_u`` optionally gives ``b(u)`` for the general family's residual; when
    absent it is obtained by differencing ``bigB``.
    """

    family: Family
    a: Optional[Expr] = None
    alpha: Optional[Expr] = None
    b_xt: Optional[Expr] = None
    beta: Optional[Expr] = None
    u1: Optional[Expr] = None
    B_xt: Optional[Expr] = None
    f: Optional[Expr] = None
    A_u: Optional[Expr] = None
    G: Optional[Expr] = None
    bigB: Optional[Expr] = None
    b_u: Optional[Expr] = None
    n: Optional[float] = None
    f_domain: Optional[tuple[float, float]] = None
    phi: Optional[Expr] = None
    psi: Optional[Expr] = None
    g: Optional[Expr] = None
    h: Optional[Expr] = None
    h_anchor: Expr = ZERO
    x_min: float = 0.0
    x_max: float = 1.0
    t_max: float = 1.0
    nx: int = 41
    nt: int = 41
    tol: float = 1e-10
    blow_up_cap: float = 1e12
    consistency_tol: Optional[float] = None
    u_ref: Optional[float] = None
    bounds_margin: float = 10.0
    max_fail_fraction: float = 0.1
    name: str = field(default="", compare=False)

    def __post_init__(self):
        set_ = object.__setattr__
        try:
            set_(self, "family", Family(self.family))
        except ValueError:
            raise SpecError(
                "family",
                f"unknown family {self.family!r}; expected one of "
                f"{[f.value for f in Family]}",
            ) from None
        for name, allowed in EXPR_FIELDS.items():
            value = getattr(self, name)
            if value is None:
                continue
            try:
                expr = as_expr(value)
            except (ValueError, TypeError) as exc:
                raise SpecError(name, str(exc)) from None
            extra = free_vars(expr) - allowed
            if extra:
                raise SpecError(
                    name,
                    f"uses variables {sorted(extra)}; only {sorted(allowed)} allowed",
                )
            set_(self, name, expr)
        for name in REQUIRED[self.family]:
            if getattr(self, name) is None:
                raise SpecError(name, f"required for family {self.family.value!r}")
        allowed = set(REQUIRED[self.family]) | set(OPTIONAL.get(self.family, ()))
        for name in EXPR_FIELDS.keys() | {"n", "f_domain"}:
            if name == "h_anchor":
                if self.h_anchor != ZERO and name not in allowed:
                    raise SpecError(name, f"not used by family {self.family.value!r}")
                continue
            if getattr(self, name) is not None and name not in allowed:
                raise SpecError(name, f"not used by family {self.family.value!r}")
        if self.n is not None:
            set_(self, "n", float(self.n))
            if self.n == 1.0:
                raise SpecError("n", "Bernoulli exponent must differ from 1")
        if self.f_domain is not None:
            lo, hi = (float(v) for v in self.f_domain)
            if not lo < hi:
                raise SpecError("f_domain", "needs p_lo < p_hi")
            set_(self, "f_domain", (lo, hi))
        if not self.x_min < self.x_max:
            raise SpecError("domain", "needs x_min < x_max")
        if not self.t_max > 0:
            raise SpecError("domain", "t_max must be positive")
        if self.nx < 2 or self.nt < 2:
            raise SpecError("grid", "nx and nt must be at least 2")
        if not self.tol > 0:
            raise SpecError("solver.tol", "must be positive")
        if not 0.0 <= self.max_fail_fraction <= 1.0:
            raise SpecError("solver.max_fail_fraction", "must lie in [0, 1]")
        if self.family is Family.FTYPE:
            from .reducers.second_order import NotMonotone, check_monotone

            try:
                check_monotone(self.f, self.f_domain)
            except (NotMonotone, ArithmeticError, ValueError) as exc:
                raise SpecError("f", str(exc)) from None

    # -- convenience ----------------------------------------------------------

    def replace(self, **changes) -> "ProblemSpec":
        return dataclasses.replace(self, **changes)

    def with_grid(self, h: float) -> "ProblemSpec":
        """Same problem on a uniform grid of spacing ``h`` in both x and t.

        Both the x width and ``t_max`` must be whole multiples of ``h``.
        """
        counts = []
        for label, width in (("x", self.x_max - self.x_min), ("t", self.t_max)):
            steps = round(width / h)
            if steps < 2 or abs(steps * h - width) > 1e-9 * width:
                raise SpecError("grid", f"{label} extent {width:g} is not a multiple of h = {h:g}")
            counts.append(steps + 1)
        return self.replace(nx=counts[0], nt=counts[1])

    def x_nodes(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    def t_nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.nt)

    @property
    def bounds(self) -> tuple[float, float]:
        width = self.x_max - self.x_min
        margin = self.bounds_margin * width
        return (self.x_min - margin, self.x_max + margin)

    def tracer(self) -> Tracer:
        return Tracer(self.a, self.tol, self.bounds, self.blow_up_cap)

    def compiled(self, name: str) -> CompiledExpr:
        args = tuple(sorted(EXPR_FIELDS[name], key="xtu".index))
        return compile_expr(getattr(self, name), args)


def make_spec(family: str | Family, **fields: ExprLike) -> ProblemSpec:
    return ProblemSpec(family=Family(family), **fields)


class NodeStatus(str, enum.Enum):
    OK = "ok"
    BLOW_UP = "blow_up"
    TRACE_FAILED = "trace_failed"
    DOMAIN_ERROR = "domain_error"


@dataclass
class SolutionGrid:
    """``u[i, j]`` is the solution at ``(x[i], t[j])``; failed nodes hold NaN."""

    x: np.ndarray
    t: np.ndarray
    u: np.ndarray
    status: np.ndarray
    reasons: dict[tuple[int, int], str] = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    @classmethod
    def empty(cls, x: np.ndarray, t: np.ndarray) -> "SolutionGrid":
        shape = (len(x), len(t))
        return cls(
            x=np.asarray(x, dtype=float),
            t=np.asarray(t, dtype=float),
            u=np.full(shape, np.nan),
            status=np.full(shape, NodeStatus.OK.value, dtype=object),
        )

    @property
    def ok(self) -> np.ndarray:
        return self.status == NodeStatus.OK.value

    def mark(self, i: int, j: int, status: NodeStatus, reason: str) -> None:
        self.u[i, j] = np.nan
        self.status[i, j] = status.value
        self.reasons[(i, j)] = reason

    def status_counts(self) -> dict[str, int]:
        counts = {s.value: 0 for s in NodeStatus}
        for value in self.status.ravel():
            counts[value] += 1
        return counts

    def fail_fraction(self) -> float:
        return 1.0 - float(np.mean(self.ok))
