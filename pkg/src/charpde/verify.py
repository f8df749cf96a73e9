"""Closed-form oracles, finite-difference PDE residuals and convergence studies.

Oracles are exact solutions of specific problems; each is bound to the
:class:`ProblemSpec` it solves and declares where it may be evaluated.
Residuals substitute a grid function into the PDE with second-order central
differences at interior nodes, so they check any solution (numeric or
closed-form) without knowing the answer.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .ode import BlowUpError, quadrature
from .problem import (
    EXPR_FIELDS,
    FIRST_ORDER,
    Family,
    NodeStatus,
    ProblemSpec,
    SolutionGrid,
)
from .reducers import closed_form_power_law, solve

# smallest |v| (v = u^(1-n)) treated as away from blow-up
V_MARGIN = 0.05


class OutsideValidity(ValueError):
    """Oracle evaluated outside its declared validity region."""


class OracleMismatch(ValueError):
    """A problem definition does not match the oracle's bound problem."""


class ResidualError(ValueError):
    """Residual cannot be formed (grid too small or no complete stencils)."""


# -- oracles ------------------------------------------------------------------

@functools.lru_cache(maxsize=4096)
def _int_exp_s_plus_half_s2(t: float) -> float:
    return quadrature(lambda s: math.exp(s + 0.5 * s * s), 0.0, t, 1e-12)


@functools.lru_cache(maxsize=4096)
def _int_exp_half_s2(t: float) -> float:
    return quadrature(lambda s: math.exp(0.5 * s * s), 0.0, t, 1e-12)


def _eq4(x, t):
    x0 = x * math.exp(-t)
    return math.exp(t) * x0 * x0 + x * t - t - 1.0 + math.exp(t)


def _eq7(x, t):
    return 1.0 / (-t + math.exp(t) / x)


def _eq8_arg(x, t):
    return math.atan(x * math.exp(-t)) + x * (1.0 - math.exp(-t)) + t ** 3 / 3.0


def _eq8(x, t):
    return math.tan(_eq8_arg(x, t))


def _eq10_v(x, t):
    e = math.exp(-0.5 * t * t)
    x0 = x * math.exp(-t)
    return e / x0 - x * math.exp(-t) * e * _int_exp_s_plus_half_s2(t) - 1.0 + e


def _eq11_v(x, t):
    x0 = x * math.exp(-t)
    return -t + 1.0 - math.exp(-t) + math.exp(-t) / (x0 * x0)


def _eq12_v(x, t):
    e = math.exp(-0.5 * t * t)
    x0 = x - t
    return -1.0 + e - x0 * e * _int_exp_half_s2(t) + e / (x0 * x0)


def _reciprocal(v_fn):
    def evaluate(x, t):
        return 1.0 / v_fn(x, t)

    return evaluate


def _v_valid(v_fn):
    def valid(x, t):
        try:
            return v_fn(x, t) >= V_MARGIN
        except ZeroDivisionError:
            return False

    return valid


def power_law_evaluator(n: int, lam: float, u0: float) -> Callable[[float, float], float]:
    """Exact ``u`` for ``u_t = (x + t^2/2) u + lam u^(n+1)`` at fixed x, ``u(x, 0) = u0(x)``.

    ``u0`` may be a constant or ``None`` for ``u0(x) = x``.
    """

    def evaluate(x, t):
        start = x if u0 is None else u0
        return closed_form_power_law(
            lambda s: x * s + s ** 3 / 6.0, n, start ** (-n), t, 1e-12, lam
        )

    return evaluate


def _power_law_valid(evaluate, n):
    u_max = V_MARGIN ** (-1.0 / n)

    def valid(x, t):
        try:
            return evaluate(x, t) <= u_max
        except BlowUpError:
            return False

    return valid


@dataclass(frozen=True)
class Oracle:
    """A closed-form solution bound to the problem it solves.

    ``region`` is an ``(x_min, x_max, t_max)`` box inside the validity region,
    used for convergence studies.
    """

    id: str
    description: str
    spec: ProblemSpec
    evaluate: Callable[[float, float], float] = field(repr=False)
    valid: Callable[[float, float], bool] = field(repr=False)
    region: tuple[float, float, float]

    def __call__(self, x: float, t: float) -> float:
        if not self.valid(x, t):
            raise OutsideValidity(f"{self.id}: ({x!r}, {t!r}) is outside the validity region")
        return self.evaluate(x, t)

    def region_spec(self, h: Optional[float] = None) -> ProblemSpec:
        x_min, x_max, t_max = self.region
        spec = self.spec.replace(x_min=x_min, x_max=x_max, t_max=t_max)
        return spec if h is None else spec.with_grid(h)


def power_law_oracle(
    n: int,
    u0: float,
    *,
    x_min: float = 0.5,
    x_max: float = 1.0,
    t_max: float = 0.5,
    nx: int = 11,
    nt: int = 21,
) -> Oracle:
    """Problem with ``b(u) = -1/u``, ``G = u^n``, ``a = x``, ``alpha = x + t``.

    Constant data ``u(x, 0) = u0`` and ``u_t(x, 0) = (x + u0^n / n) u0`` make
    the reduced equation ``u_t = (x + t^2/2 + u^n/n) u``.
    """
    spec = ProblemSpec(
        family=Family.GENERAL_BU,
        a="x",
        alpha="x+t",
        G=f"u^{n}",
        bigB="-log(u)",
        phi=repr(float(u0)),
        psi=f"(x+{float(u0) ** n / n!r})*{float(u0)!r}",
        h_anchor="x",
        x_min=x_min,
        x_max=x_max,
        t_max=t_max,
        nx=nx,
        nt=nt,
        name=f"power law n={n} u0={u0:g}",
    )
    evaluate = power_law_evaluator(n, 1.0 / n, float(u0))
    return Oracle(
        id="prop92",
        description=f"u_t = (x + t^2/2 + u^{n}/{n}) u, u(x,0) = {u0:g}",
        spec=spec,
        evaluate=evaluate,
        valid=_power_law_valid(evaluate, n),
        region=(x_min, x_max, t_max),
    )


def _build_oracles() -> dict[str, Oracle]:
    grid = dict(x_min=0.5, x_max=2.0, t_max=1.0, nx=41, nt=41)
    oracles = [
        Oracle(
            "eq4",
            "u_t + x u_x - u = x + t, u(x,0) = x^2",
            ProblemSpec(family=Family.LINEAR, a="x", alpha="1", b_xt="x+t", phi="x^2", name="eq4", **grid),
            _eq4,
            lambda x, t: True,
            (0.5, 1.5, 1.0),
        ),
        Oracle(
            "eq7",
            "u_t + x u_x = u^2, u(x,0) = x",
            ProblemSpec(
                family=Family.SEPARABLE, a="x", f="u^2", b_xt="1", phi="x", name="eq7",
                **{**grid, "x_max": 3.0},
            ),
            _eq7,
            lambda x, t: t * x * math.exp(-t) <= 0.9,
            (0.5, 1.5, 1.0),
        ),
        Oracle(
            "eq8",
            "u_t + x u_x = (u^2 + 1)(x + t^2), u(x,0) = x",
            ProblemSpec(family=Family.SEPARABLE, a="x", f="u^2+1", b_xt="x+t^2", phi="x", name="eq8", **grid),
            _eq8,
            lambda x, t: abs(_eq8_arg(x, t)) <= math.pi / 2 - 0.2,
            (0.2, 1.0, 0.6),
        ),
        Oracle(
            "eq10",
            "u_t + x u_x = t u + (x + t) u^2, u(x,0) = x",
            ProblemSpec(
                family=Family.BERNOULLI, a="x", b_xt="t", alpha="x+t", n=2, phi="x", name="eq10",
                **{**grid, "x_max": 1.5},
            ),
            _reciprocal(_eq10_v),
            _v_valid(_eq10_v),
            (0.2, 1.0, 1.0),
        ),
        Oracle(
            "eq11",
            "u_t + x u_x = u + t u^2, u(x,0) = x^2",
            ProblemSpec(family=Family.BERNOULLI, a="x", b_xt="1", alpha="t", n=2, phi="x^2", name="eq11", **grid),
            _reciprocal(_eq11_v),
            _v_valid(_eq11_v),
            (0.5, 1.5, 1.0),
        ),
        Oracle(
            "eq12",
            "u_t + u_x = t u + x u^2, u(x,0) = x^2",
            ProblemSpec(
                family=Family.BERNOULLI, a="1", b_xt="t", alpha="x", n=2, phi="x^2", name="eq12",
                **{**grid, "x_max": 1.5, "t_max": 0.5},
            ),
            _reciprocal(_eq12_v),
            _v_valid(_eq12_v),
            (0.6, 1.0, 0.2),
        ),
    ]
    eq20_eval = power_law_evaluator(2, 1.0, None)
    oracles.append(
        Oracle(
            "eq20_reduced",
            "u_tt + x u_xt - (u_t/u)(u_t + x u_x) = (x + t) u + 2u^2 (u_t + x u_x), "
            "u(x,0) = x, u_t(x,0) = x^2 + x^3",
            ProblemSpec(
                family=Family.GENERAL_BU,
                a="x",
                alpha="x+t",
                G="2*u^2",
                bigB="-log(u)",
                b_u="-1/u",
                phi="x",
                psi="x^2+x^3",
                h_anchor="x",
                x_min=0.5,
                x_max=1.5,
                t_max=0.4,
                nx=101,
                nt=41,
                name="eq20",
            ),
            eq20_eval,
            _power_law_valid(eq20_eval, 2),
            (0.5, 0.9, 0.2),
        )
    )
    prop92 = power_law_oracle(2, 0.5, x_min=0.5, x_max=1.5, t_max=0.4, nx=26, nt=11)
    oracles.append(prop92)
    return {o.id: o for o in oracles}


ORACLES: dict[str, Oracle] = _build_oracles()
ORACLE_IDS = tuple(ORACLES)


def get_oracle(oracle_id: str) -> Oracle:
    try:
        return ORACLES[oracle_id]
    except KeyError:
        raise KeyError(
            f"unknown oracle {oracle_id!r}; expected one of {list(ORACLE_IDS)}"
        ) from None


def oracle_eval(oracle_id: str, x: float, t: float) -> float:
    """Closed-form value; raises :class:`OutsideValidity` off the validity region."""
    return get_oracle(oracle_id)(x, t)


# problem fields compared when matching a spec to an oracle
_PROBLEM_FIELDS = ("family", "n", "f_domain") + tuple(EXPR_FIELDS)


def _field_samples(name: str, spec: ProblemSpec) -> list[tuple[float, ...]]:
    args = [v for v in "xtu" if v in EXPR_FIELDS[name]]
    xs = np.linspace(spec.x_min, spec.x_max, 5)
    ts = np.linspace(0.0, spec.t_max, 5)
    us = np.linspace(0.3, 1.7, 5)
    axes = {"x": xs, "t": ts, "u": us}
    points = [()]
    for v in args:
        points = [p + (float(c),) for p in points for c in axes[v]]
    return points


def mismatch(spec: ProblemSpec, oracle: Oracle) -> Optional[str]:
    """Name the first problem field where ``spec`` differs from the oracle's, if any.

    Expressions are compared by value at sample points, so equivalent
    spellings (``x^2`` and ``x*x``) match.
    """
    ref = oracle.spec
    for name in _PROBLEM_FIELDS:
        mine, theirs = getattr(spec, name), getattr(ref, name)
        if name not in EXPR_FIELDS:
            if mine != theirs:
                shown = getattr(mine, "value", mine), getattr(theirs, "value", theirs)
                return f"{name}: spec has {shown[0]!r}, oracle {oracle.id} needs {shown[1]!r}"
            continue
        if (mine is None) != (theirs is None):
            return f"{name}: present in only one of spec and oracle {oracle.id}"
        if mine is None or name == "b_u":
            continue
        f_mine, f_ref = spec.compiled(name), ref.compiled(name)
        for point in _field_samples(name, ref):
            a = _safe(f_mine, point)
            b = _safe(f_ref, point)
            if a is None and b is None:
                continue
            if a is None or b is None or abs(a - b) > 1e-12 * (1.0 + abs(b)):
                return (
                    f"{name}: spec and oracle {oracle.id} differ at {point} "
                    f"({a!r} vs {b!r})"
                )
    return None


def _safe(fn, point):
    try:
        return fn(*point)
    except (ArithmeticError, ValueError):
        return None


def check_match(spec: ProblemSpec, oracle: Oracle) -> None:
    problem = mismatch(spec, oracle)
    if problem is not None:
        raise OracleMismatch(problem)


def sample_oracle(oracle: Oracle, spec: ProblemSpec) -> SolutionGrid:
    """Oracle values on the grid of ``spec``; nodes outside validity are marked."""
    grid = SolutionGrid.empty(spec.x_nodes(), spec.t_nodes())
    for i, x in enumerate(grid.x):
        for j, t in enumerate(grid.t):
            x, t = float(x), float(t)
            try:
                if not oracle.valid(x, t):
                    raise OutsideValidity("outside oracle validity region")
                grid.u[i, j] = oracle.evaluate(x, t)
            except (OutsideValidity, ArithmeticError) as exc:
                grid.mark(i, j, NodeStatus.DOMAIN_ERROR, str(exc))
    return grid


@dataclass
class ErrorReport:
    max_error: float
    mean_error: float
    worst: Optional[tuple[float, float]]
    n_compared: int
    n_outside: int
    n_failed: int

    def as_dict(self) -> dict:
        return {
            "max_error": self.max_error,
            "mean_error": self.mean_error,
            "worst": list(self.worst) if self.worst else None,
            "n_compared": self.n_compared,
            "n_outside_validity": self.n_outside,
            "n_failed_in_validity": self.n_failed,
        }


def oracle_error(grid: SolutionGrid, oracle: Oracle) -> ErrorReport:
    """Solver vs oracle on the valid nodes of ``grid``.

    Solver failures inside the validity region count as infinite error.
    """
    errors, where = [], []
    outside = failed = 0
    for i, x in enumerate(grid.x):
        for j, t in enumerate(grid.t):
            x, t = float(x), float(t)
            if not oracle.valid(x, t):
                outside += 1
                continue
            if grid.status[i, j] != NodeStatus.OK.value:
                failed += 1
                errors.append(math.inf)
            else:
                errors.append(abs(grid.u[i, j] - oracle.evaluate(x, t)))
            where.append((x, t))
    if not errors:
        return ErrorReport(math.nan, math.nan, None, 0, outside, failed)
    k = int(np.argmax(errors))
    return ErrorReport(
        float(errors[k]), float(np.mean(errors)), where[k], len(errors), outside, failed
    )


# -- residuals ----------------------------------------------------------------

@dataclass
class ResidualReport:
    """Residual statistics over interior nodes with complete stencils."""

    h_x: float
    h_t: float
    max_abs: float
    mean_abs: float
    worst: tuple[float, float]
    n_nodes: int
    n_skipped: int
    order: int = 2
    values: Optional[np.ndarray] = field(default=None, repr=False)

    def as_dict(self) -> dict:
        return {
            "h_x": self.h_x,
            "h_t": self.h_t,
            "max_abs": self.max_abs,
            "mean_abs": self.mean_abs,
            "worst": list(self.worst),
            "n_nodes": self.n_nodes,
            "n_skipped": self.n_skipped,
            "stencil_order": self.order,
        }


def _spacing(nodes: np.ndarray, axis: str) -> float:
    if len(nodes) < 3:
        raise ResidualError(f"need at least 3 nodes along {axis}, got {len(nodes)}")
    steps = np.diff(nodes)
    h = float(np.mean(steps))
    if np.max(np.abs(steps - h)) > 1e-9 * max(1.0, abs(h)):
        raise ResidualError(f"grid is not uniform along {axis}")
    return h


def _usable(grid: SolutionGrid, mask: Optional[np.ndarray]) -> np.ndarray:
    good = grid.ok & np.isfinite(grid.u)
    if mask is not None:
        good &= mask
    return good


class _Stencils:
    """Central differences of ``u`` at node ``(i, j)``."""

    def __init__(self, grid: SolutionGrid):
        self.u = grid.u
        self.hx = _spacing(grid.x, "x")
        self.ht = _spacing(grid.t, "t")

    def first(self, i, j):
        u = self.u
        return (
            (u[i + 1, j] - u[i - 1, j]) / (2 * self.hx),
            (u[i, j + 1] - u[i, j - 1]) / (2 * self.ht),
        )

    def second(self, i, j):
        u, hx, ht = self.u, self.hx, self.ht
        uxx = (u[i + 1, j] - 2 * u[i, j] + u[i - 1, j]) / (hx * hx)
        utt = (u[i, j + 1] - 2 * u[i, j] + u[i, j - 1]) / (ht * ht)
        uxt = (u[i + 1, j + 1] - u[i + 1, j - 1] - u[i - 1, j + 1] + u[i - 1, j - 1]) / (
            4 * hx * ht
        )
        return uxx, utt, uxt


def _first_order_rhs(spec: ProblemSpec) -> Callable[[float, float, float], float]:
    family = spec.family
    if family is Family.LINEAR:
        alpha, b = spec.compiled("alpha"), spec.compiled("b_xt")
        return lambda x, t, u: alpha(x, t) * u + b(x, t)
    if family is Family.SEPARABLE:
        f, b = spec.compiled("f"), spec.compiled("b_xt")
        return lambda x, t, u: f(u) * b(x, t)
    if family is Family.BERNOULLI:
        alpha, b, n = spec.compiled("alpha"), spec.compiled("b_xt"), spec.n
        return lambda x, t, u: b(x, t) * u + alpha(x, t) * u ** n
    if family is Family.RICCATI:
        alpha, b, beta = (spec.compiled(k) for k in ("alpha", "b_xt", "beta"))
        return lambda x, t, u: b(x, t) * u + alpha(x, t) + beta(x, t) * u * u
    raise ValueError(f"{family.value!r} is not a first-order family")


def _collect(grid, mask, diagonal, point_residual) -> ResidualReport:
    st = _Stencils(grid)
    good = _usable(grid, mask)
    nx, nt = grid.u.shape
    values = np.full(grid.u.shape, np.nan)
    skipped = 0
    for i in range(1, nx - 1):
        for j in range(1, nt - 1):
            block = good[i - 1:i + 2, j - 1:j + 2]
            complete = block.all() if diagonal else block[1, :].all() and block[:, 1].all()
            if not complete:
                skipped += 1
                continue
            try:
                r = point_residual(st, i, j, float(grid.x[i]), float(grid.t[j]), grid.u[i, j])
            except (ArithmeticError, ValueError):
                skipped += 1
                continue
            if isinstance(r, complex) or not math.isfinite(r):
                skipped += 1
                continue
            values[i, j] = r
    finite = np.isfinite(values)
    if not finite.any():
        raise ResidualError("no interior node has a complete stencil of ok neighbours")
    absv = np.where(finite, np.abs(values), -1.0)
    i, j = np.unravel_index(int(np.argmax(absv)), absv.shape)
    return ResidualReport(
        h_x=st.hx,
        h_t=st.ht,
        max_abs=float(absv[i, j]),
        mean_abs=float(np.mean(np.abs(values[finite]))),
        worst=(float(grid.x[i]), float(grid.t[j])),
        n_nodes=int(finite.sum()),
        n_skipped=skipped,
        values=values,
    )


def residual_first_order(
    grid: SolutionGrid, spec: ProblemSpec, mask: Optional[np.ndarray] = None
) -> ResidualReport:
    """``D_t u + a D_x u - RHS(x, t, u)`` with central differences.

    ``mask`` optionally restricts the nodes allowed in stencils.
    """
    if spec.family not in FIRST_ORDER:
        raise ValueError(f"{spec.family.value!r} is not a first-order family")
    a = spec.compiled("a")
    rhs = _first_order_rhs(spec)

    def point(st, i, j, x, t, u):
        ux, ut = st.first(i, j)
        return ut + a(x, t) * ux - rhs(x, t, u)

    return _collect(grid, mask, False, point)


def _b_of_u(spec: ProblemSpec) -> Callable[[float], float]:
    if spec.b_u is not None:
        return spec.compiled("b_u")
    bigB = spec.compiled("bigB")

    def b(u):
        d = 1e-5 * (1.0 + abs(u))
        return (bigB(u + d) - bigB(u - d)) / (2 * d)

    return b


def _second_order_point(spec: ProblemSpec):
    a = spec.compiled("a")
    family = spec.family
    if family is Family.MIXED_TT:
        b, f = spec.compiled("b_xt"), spec.compiled("f")

        def point(x, t, u, ux, ut, uxx, utt, uxt):
            return utt + a(x, t) * uxt - b(x, t) - (ut + a(x, t) * ux) * f(u)

    elif family is Family.MIXED_XT:
        b, f = spec.compiled("b_xt"), spec.compiled("f")

        def point(x, t, u, ux, ut, uxx, utt, uxt):
            return uxt + a(x, t) * uxx - b(x, t) - (a(x, t) * ux + ut) * f(u)

    elif family is Family.FTYPE:
        B, A, f = spec.compiled("B_xt"), spec.compiled("A_u"), spec.compiled("f")

        def point(x, t, u, ux, ut, uxx, utt, uxt):
            d = 1e-5 * (1.0 + abs(ut))
            fprime = (f(ut + d) - f(ut - d)) / (2 * d)
            return fprime * (utt + a(x, t) * uxt) - B(x, t) - A(u) * (ut + a(x, t) * ux)

    elif family is Family.GENERAL_BU:
        alpha, G, bigB = spec.compiled("alpha"), spec.compiled("G"), spec.compiled("bigB")
        b = _b_of_u(spec)

        def point(x, t, u, ux, ut, uxx, utt, uxt):
            ax = a(x, t)
            material = ut + ax * ux
            return (
                utt + ax * uxt + b(u) * ut * material
                - alpha(x, t) * math.exp(-bigB(u)) - G(u) * material
            )

    else:
        raise ValueError(f"{family.value!r} is not a second-order family")
    return point


def residual_second_order(
    grid: SolutionGrid, spec: ProblemSpec, mask: Optional[np.ndarray] = None
) -> ResidualReport:
    """Residual of the second-order PDE with 9-point central stencils."""
    point = _second_order_point(spec)

    def at(st, i, j, x, t, u):
        ux, ut = st.first(i, j)
        uxx, utt, uxt = st.second(i, j)
        return point(x, t, u, ux, ut, uxx, utt, uxt)

    return _collect(grid, mask, True, at)


def residual(
    grid: SolutionGrid, spec: ProblemSpec, mask: Optional[np.ndarray] = None
) -> ResidualReport:
    if spec.family in FIRST_ORDER:
        return residual_first_order(grid, spec, mask)
    return residual_second_order(grid, spec, mask)


# -- convergence --------------------------------------------------------------

QUANTITIES = ("oracle_residual", "solver_residual", "solver_error")


@dataclass
class ConvergenceStudy:
    quantity: str
    h: list[float]
    values: list[float]
    ratios: list[float]
    slope: float
    monotone: bool
    note: str = ""

    def as_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "h": self.h,
            "values": self.values,
            "ratios": self.ratios,
            "slope": self.slope,
            "monotone": self.monotone,
            "note": self.note,
        }


def fitted_slope(h: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of ``log(value)`` against ``log(h)``."""
    h = np.asarray(h, dtype=float)
    v = np.asarray(values, dtype=float)
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        return math.nan
    return float(np.polyfit(np.log(h), np.log(v), 1)[0])


def _common_node_maxima(fields: list[np.ndarray]) -> list[float]:
    """Max |residual| per grid over the coarse-grid nodes evaluated on every grid.

    Comparing at fixed physical points keeps the ratio free of the O(h)
    drift of an interior-only maximum that sits next to the boundary.
    """
    shape = fields[0].shape
    samples = []
    for k, values in enumerate(fields):
        stride = 2 ** k
        sub = values[::stride, ::stride]
        if sub.shape != shape:
            raise ValueError("grids do not nest; domain must be a multiple of the coarsest h")
        samples.append(sub)
    common = np.all([np.isfinite(s) for s in samples], axis=0)
    if not common.any():
        raise ResidualError("no node is evaluated on every grid")
    return [float(np.max(np.abs(s[common]))) for s in samples]


def convergence_order(
    spec: ProblemSpec,
    h_list: Sequence[float],
    *,
    quantity: str = "oracle_residual",
    oracle: Optional[Oracle] = None,
    threads: int = 1,
) -> ConvergenceStudy:
    """Measure how a quantity scales with grid spacing.

    ``oracle_residual`` is the residual of the oracle sampled on each grid;
    ``solver_residual`` the residual of the solver output; ``solver_error``
    the max solver-vs-oracle error.  ``spec`` supplies the domain.
    """
    h_list = [float(h) for h in h_list]
    if len(h_list) < 3:
        raise ValueError("need at least three spacings")
    for coarse, fine in zip(h_list, h_list[1:]):
        if not math.isclose(fine, coarse / 2, rel_tol=1e-9):
            raise ValueError("each spacing must be half the previous one")
    if quantity not in QUANTITIES:
        raise ValueError(f"quantity must be one of {QUANTITIES}")
    if quantity != "solver_residual" and oracle is None:
        raise ValueError(f"{quantity} needs an oracle")
    values = []
    residual_fields = []
    for h in h_list:
        sub = spec.with_grid(h)
        if quantity == "oracle_residual":
            residual_fields.append(residual(sample_oracle(oracle, sub), sub).values)
            continue
        grid, _ = solve(sub, threads)
        if quantity == "solver_residual":
            mask = None if oracle is None else sample_oracle(oracle, sub).ok
            residual_fields.append(residual(grid, sub, mask).values)
        else:
            values.append(oracle_error(grid, oracle).max_error)
    if residual_fields:
        values = _common_node_maxima(residual_fields)
    ratios = [
        a / b if b > 0 else math.inf for a, b in zip(values, values[1:])
    ]
    monotone = all(b < a for a, b in zip(values, values[1:]))
    note = "" if monotone else "error did not decrease with h; tolerance floor reached"
    return ConvergenceStudy(
        quantity, h_list, values, ratios, fitted_slope(h_list, values), monotone, note
    )
