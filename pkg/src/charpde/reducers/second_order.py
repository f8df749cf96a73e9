"""Second-order families reduced to first-order ODEs.

Each family has an exact first integral along the characteristics of
``a(x, t)``.  Writing ``D = d/dt + a d/dx`` for the derivative along them:

* mixed_tt   ``u_tt + a u_xt = b + f(u) D u``        gives ``u_t = H + K(u) + C``
* mixed_xt   ``u_xt + a u_xx = b + f(u) D u``        gives ``u_x = H + K(u) + C``
* ftype      ``f'(u_t) D u_t = B + A(u) D u``        gives ``f(u_t) = H + K(u) + C``
* general_bu ``D u_t + b(u) u_t D u = alpha e^-Bb(u) + G(u) D u``
  gives ``u_t = (H + K(u) + C) e^-Bb(u)`` with ``Bb`` the antiderivative of ``b``

Here ``H(x, t)`` is the source (``b``, ``B`` or ``alpha``) integrated along the
characteristic through ``(x, t)`` from ``t = 0``, plus the anchor
``h_anchor(x0)``; ``K`` is the antiderivative of ``f``, ``A`` or
``G e^Bb`` from ``u_ref``.  The single constant ``C`` is fitted from the data
on ``t = 0`` (on ``x = x_min`` for mixed_xt); its spread across the data line
measures how well the data fit a single-constant reduction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..expr import CompiledExpr, ExprLike, compile_expr, is_zero
from ..ode import BlowUpError, IntegrationError, StepSizeUnderflow, integrate, quadrature
from ..problem import Family, NodeStatus, ProblemSpec, SolutionGrid
from ._grid import classify, solve_lines

SECOND_ORDER_T = frozenset({Family.MIXED_TT, Family.FTYPE, Family.GENERAL_BU})


class AnsatzInconsistent(Exception):
    """The data do not admit a single reduction constant ``C``."""

    def __init__(self, message: str, reduced: "ReducedODE | None" = None):
        super().__init__(message)
        self.reduced = reduced


class NotMonotone(ValueError):
    pass


class OutOfRange(ValueError):
    pass


# -- inverting f --------------------------------------------------------------

def check_monotone(
    f: ExprLike | CompiledExpr, bracket: tuple[float, float], samples: int = 64
) -> int:
    """Return +1 or -1 if ``f`` is strictly monotone at ``samples`` points."""
    fn = f if isinstance(f, CompiledExpr) else compile_expr(f, ("u",))
    lo, hi = bracket
    values = [fn(p) for p in np.linspace(lo, hi, samples)]
    diffs = np.diff(values)
    if np.all(diffs > 0):
        return 1
    if np.all(diffs < 0):
        return -1
    raise NotMonotone(f"f is not strictly monotone on [{lo:g}, {hi:g}]")


def invert_f(
    f: ExprLike | CompiledExpr,
    y: float,
    bracket: tuple[float, float],
    *,
    check: bool = True,
) -> float:
    """Solve ``f(p) = y`` for ``p`` in ``bracket``.

    Bisection narrows the bracket, then Newton steps with a central-difference
    derivative polish the root, falling back to bisection whenever a step
    leaves the bracket.
    """
    fn = f if isinstance(f, CompiledExpr) else compile_expr(f, ("u",))
    if check:
        check_monotone(fn, bracket)
    lo, hi = bracket
    flo, fhi = fn(lo) - y, fn(hi) - y
    target = 1e-12 * (1.0 + abs(y))
    if abs(flo) <= target:
        return lo
    if abs(fhi) <= target:
        return hi
    if flo * fhi > 0:
        raise OutOfRange(
            f"y = {y!r} outside the range of f on [{lo:g}, {hi:g}]"
        )
    increasing = fhi > flo
    width0 = hi - lo
    while hi - lo > 1e-3 * width0:
        mid = 0.5 * (lo + hi)
        fm = fn(mid) - y
        if (fm > 0) == increasing:
            hi = mid
        else:
            lo = mid
    p = 0.5 * (lo + hi)
    for _ in range(200):
        fp = fn(p) - y
        if abs(fp) <= target:
            return p
        if (fp > 0) == increasing:
            hi = p
        else:
            lo = p
        if not lo < hi or hi - lo <= 4 * math.ulp(max(abs(lo), abs(hi), 1e-300)):
            return p
        step = 1e-7 * (1.0 + abs(p))
        slope = (fn(p + step) - fn(p - step)) / (2 * step)
        candidate = p - fp / slope if slope != 0 else math.nan
        p = candidate if lo < candidate < hi else 0.5 * (lo + hi)
    return p


# -- reduced equation ---------------------------------------------------------

def _default_u_ref(spec: ProblemSpec) -> float:
    if spec.u_ref is not None:
        return float(spec.u_ref)
    if spec.family is Family.GENERAL_BU:
        try:
            if math.isfinite(spec.compiled("bigB")(0.0)):
                return 0.0
        except (ArithmeticError, ValueError):
            pass
        return 1.0
    return 0.0


class ReducedFunctions:
    """Numeric ``H``, ``K`` and reduced right-hand side for one problem."""

    def __init__(self, spec: ProblemSpec, u_ref: float, C: float = 0.0):
        self.spec = spec
        self.u_ref = u_ref
        self.C = C
        self.tracer = spec.tracer()
        family = spec.family
        source = {Family.GENERAL_BU: "alpha", Family.FTYPE: "B_xt"}.get(family, "b_xt")
        self.source = spec.compiled(source)
        self.anchor = None if is_zero(spec.h_anchor) else spec.compiled("h_anchor")
        if family is Family.GENERAL_BU:
            G, bigB = spec.compiled("G"), spec.compiled("bigB")
            self.k_integrand = lambda w: G(w) * math.exp(bigB(w))
            self.bigB = bigB
        elif family is Family.FTYPE:
            self.k_integrand = spec.compiled("A_u")
            self.f = spec.compiled("f")
        else:
            self.k_integrand = spec.compiled("f")

    def hat_h(self, x: float, t: float) -> float:
        x0, integral = self.tracer.foot_and_integral(self.source, x, t)
        if self.anchor is not None:
            integral += self.anchor(x0)
        return integral

    def k(self, u: float) -> float:
        return quadrature(self.k_integrand, self.u_ref, u, 1e-13, rtol=1e-13)

    def level(self, x: float, t: float, u: float) -> float:
        return self.hat_h(x, t) + self.k(u) + self.C

    def derivative(self, x: float, t: float, u: float) -> float:
        """``u_t`` (``u_x`` for mixed_xt) from the reduced relation."""
        return self.derivative_given_h(self.hat_h(x, t), u)

    def derivative_given_h(self, h_value: float, u: float) -> float:
        level = h_value + self.k(u) + self.C
        family = self.spec.family
        if family is Family.FTYPE:
            return invert_f(self.f, level, self.spec.f_domain, check=False)
        if family is Family.GENERAL_BU:
            return level * math.exp(-self.bigB(u))
        return level

    def hat_h_on_line(self, direction: str, fixed: float) -> Callable[[float], float]:
        """``H`` restricted to one grid line, as a function of the free coordinate.

        A Chebyshev interpolant replaces the per-call characteristic trace
        when it reproduces direct traces at check points to within the
        solver tolerance; otherwise the direct evaluation is returned.
        """
        spec = self.spec
        if direction == "t":
            lo, hi = 0.0, spec.t_max
            direct = lambda t: self.hat_h(fixed, t)  # noqa: E731
        else:
            lo, hi = spec.x_min, spec.x_max
            direct = lambda x: self.hat_h(x, fixed)  # noqa: E731
        try:
            interpolant = chebyshev_fit(direct, lo, hi, spec.tol)
        except (IntegrationError, ArithmeticError, ValueError):
            interpolant = None
        return interpolant or direct


def _clenshaw(coeffs: list[float], lo: float, hi: float) -> Callable[[float], float]:
    scale = 2.0 / (hi - lo)
    shift = (hi + lo) / (hi - lo)
    rev = coeffs[:0:-1]
    c0 = coeffs[0]

    def evaluate(s: float) -> float:
        z = s * scale - shift
        two_z = 2.0 * z
        b1 = b2 = 0.0
        for c in rev:
            b1, b2 = c + two_z * b1 - b2, b1
        return c0 + z * b1 - b2

    return evaluate


def chebyshev_fit(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float,
    degrees: tuple[int, ...] = (16, 32, 64),
) -> Optional[Callable[[float], float]]:
    """Interpolate ``fn`` on [lo, hi] at Chebyshev points of growing degree.

    Returns the first interpolant that matches ``fn`` at the midpoints
    between interpolation nodes to ``tol * (1 + max|fn|)``, or ``None``.
    """
    cheb = np.polynomial.chebyshev
    for deg in degrees:
        n = deg + 1
        z = np.cos(np.pi * (np.arange(n) + 0.5) / n)
        nodes = 0.5 * (hi + lo) + 0.5 * (hi - lo) * z
        values = np.array([fn(float(v)) for v in nodes])
        coeffs = cheb.chebfit(z, values, deg)
        evaluate = _clenshaw([float(c) for c in coeffs], lo, hi)
        zc = np.cos(np.pi * np.arange(1, n) / n)
        checks = 0.5 * (hi + lo) + 0.5 * (hi - lo) * zc
        scale = 1.0 + float(np.max(np.abs(values)))
        worst = max(abs(evaluate(float(c)) - fn(float(c))) for c in checks)
        if worst <= tol * scale:
            return evaluate
    return None


@dataclass
class ReducedODE:
    """A reduction with its fitted constant.

    ``c_samples[k]`` is the constant implied by the data at
    ``sample_nodes[k]`` (grid x for reductions in t, grid t for mixed_xt);
    ``C`` is their mean and ``delta_c`` their spread.
    """

    family: Family
    spec: ProblemSpec
    C: float
    delta_c: float
    c_samples: np.ndarray
    sample_nodes: np.ndarray
    u_ref: float
    consistency_tol: float
    direction: str
    inconsistency: Optional[str] = None

    @property
    def consistent(self) -> bool:
        return self.inconsistency is None

    def check(self) -> "ReducedODE":
        if self.inconsistency is not None:
            raise AnsatzInconsistent(self.inconsistency, self)
        return self

    def functions(self) -> ReducedFunctions:
        return ReducedFunctions(self.spec, self.u_ref, self.C)

    def summary(self, n_samples: int = 5) -> dict:
        fns = self.functions()
        spec = self.spec
        xs = np.linspace(spec.x_min, spec.x_max, n_samples)
        ts = np.linspace(0.0, spec.t_max, n_samples)
        data = spec.compiled("g" if self.direction == "x" else "phi")
        lo_hi = [data(float(v)) for v in (ts if self.direction == "x" else xs)]
        u_lo, u_hi = min(lo_hi), max(lo_hi)
        if u_hi - u_lo < 1e-12:
            u_lo, u_hi = u_lo - 1.0, u_hi + 1.0
        k_table = []
        for u in np.linspace(u_lo, u_hi, 2 * n_samples - 1):
            try:
                k_table.append([float(u), fns.k(float(u))])
            except (ArithmeticError, ValueError, RuntimeError):
                k_table.append([float(u), None])
        h_table = []
        for x in xs:
            for t in ts:
                try:
                    value = fns.hat_h(float(x), float(t))
                except (ArithmeticError, ValueError, RuntimeError):
                    value = None
                h_table.append([float(x), float(t), value])
        return {
            "family": self.family.value,
            "direction": self.direction,
            "C": self.C,
            "delta_C": self.delta_c,
            "consistency_tol": self.consistency_tol,
            "consistent": self.consistent,
            "u_ref": self.u_ref,
            "C_table": [
                [float(n), float(c)] for n, c in zip(self.sample_nodes, self.c_samples)
            ],
            "K_table": k_table,
            "H_table": h_table,
        }


def _finish(spec, c_samples, nodes, u_ref, direction) -> ReducedODE:
    c_samples = np.asarray(c_samples, dtype=float)
    C = float(np.mean(c_samples))
    delta_c = float(np.max(c_samples) - np.min(c_samples))
    tol = spec.consistency_tol
    if tol is None:
        tol = 1e-6 * (1.0 + abs(C))
    inconsistency = None
    if not delta_c <= tol:
        worst = int(np.argmax(np.abs(c_samples - C)))
        inconsistency = (
            f"reduction constant varies by {delta_c:.3e} (> {tol:.3e}) over the "
            f"data line; worst node {float(nodes[worst]):g} has C = {c_samples[worst]:.12g}"
        )
    return ReducedODE(
        family=spec.family,
        spec=spec,
        C=C,
        delta_c=delta_c,
        c_samples=c_samples,
        sample_nodes=np.asarray(nodes, dtype=float),
        u_ref=u_ref,
        consistency_tol=tol,
        direction=direction,
        inconsistency=inconsistency,
    )


def _reduce_in_t(spec: ProblemSpec, data_level: Callable) -> ReducedODE:
    u_ref = _default_u_ref(spec)
    fns = ReducedFunctions(spec, u_ref)
    phi, psi = spec.compiled("phi"), spec.compiled("psi")
    xs = spec.x_nodes()
    c = []
    for x in xs:
        x = float(x)
        u0 = phi(x)
        c.append(data_level(fns, u0, psi(x)) - fns.hat_h(x, 0.0) - fns.k(u0))
    return _finish(spec, c, xs, u_ref, "t")


def _require(spec: ProblemSpec, family: Family) -> None:
    if spec.family is not family:
        raise ValueError(f"expected a {family.value!r} problem, got {spec.family.value!r}")


def reduce_mixed_tt(spec: ProblemSpec) -> ReducedODE:
    """``u_tt + a u_xt = b + (u_t + a u_x) f(u)`` to ``u_t = H + K(u) + C``."""
    _require(spec, Family.MIXED_TT)
    return _reduce_in_t(spec, lambda fns, u0, p0: p0)


def reduce_ftype(spec: ProblemSpec) -> ReducedODE:
    """``f'(u_t)(u_tt + a u_xt) = B + A(u)(u_t + a u_x)`` to ``f(u_t) = H + K(u) + C``."""
    _require(spec, Family.FTYPE)
    return _reduce_in_t(spec, lambda fns, u0, p0: fns.f(p0))


def reduce_general_bu(spec: ProblemSpec) -> ReducedODE:
    """Reduce the ``b(u)`` family to ``u_t = (H + K(u) + C) e^{-bigB(u)}``."""
    _require(spec, Family.GENERAL_BU)
    return _reduce_in_t(spec, lambda fns, u0, p0: p0 * math.exp(fns.bigB(u0)))


def reduce_mixed_xt(spec: ProblemSpec) -> ReducedODE:
    """``u_xt + a u_xx = b + (a u_x + u_t) f(u)`` to ``u_x = H + K(u) + C``,
    with ``C`` fitted from ``u(x_min, t) = g(t)`` and ``u_x(x_min, t) = h(t)``."""
    _require(spec, Family.MIXED_XT)
    u_ref = _default_u_ref(spec)
    fns = ReducedFunctions(spec, u_ref)
    g, h = spec.compiled("g"), spec.compiled("h")
    ts = spec.t_nodes()
    c = []
    for t in ts:
        t = float(t)
        u0 = g(t)
        c.append(h(t) - fns.hat_h(spec.x_min, t) - fns.k(u0))
    return _finish(spec, c, ts, u_ref, "x")


def reduce(spec: ProblemSpec) -> ReducedODE:
    reducers = {
        Family.MIXED_TT: reduce_mixed_tt,
        Family.MIXED_XT: reduce_mixed_xt,
        Family.FTYPE: reduce_ftype,
        Family.GENERAL_BU: reduce_general_bu,
    }
    try:
        return reducers[spec.family](spec)
    except KeyError:
        raise ValueError(f"family {spec.family.value!r} has no reduction") from None


# -- integrating the reduced equation ----------------------------------------

def _line_status(exc: BaseException) -> NodeStatus:
    if isinstance(exc, StepSizeUnderflow) and isinstance(
        exc.__cause__, (ArithmeticError, ValueError)
    ):
        return NodeStatus.DOMAIN_ERROR
    return classify(exc)


class _LineSolver:
    """Integrates the reduced ODE along one grid line.

    Lines are columns (fixed x, integrating in t) or, for mixed_xt, rows
    (fixed t, integrating in x).
    """

    def __init__(self, spec: ProblemSpec):
        self.spec = spec

    def line(self, red: ReducedODE, k: int):
        spec = self.spec
        fns = red.functions()
        if red.direction == "t":
            fixed = float(spec.x_nodes()[k])
            u0 = spec.compiled("phi")(fixed)
            nodes = spec.t_nodes()
            start, end = 0.0, spec.t_max
        else:
            fixed = float(spec.t_nodes()[k])
            u0 = spec.compiled("g")(fixed)
            nodes = spec.x_nodes()
            start, end = spec.x_min, spec.x_max
        hat_h = fns.hat_h_on_line(red.direction, fixed)
        derivative = fns.derivative_given_h

        def rhs(s, y):
            return (derivative(hat_h(s), y[0]),)

        values = [math.nan] * len(nodes)
        statuses = [NodeStatus.OK] * len(nodes)
        reason, failed = None, NodeStatus.OK
        try:
            res = integrate(
                rhs, [u0], start, end, spec.tol, [float(v) for v in nodes],
                blow_up_cap=spec.blow_up_cap,
            )
        except (IntegrationError, ArithmeticError, ValueError) as exc:
            res = getattr(exc, "partial", None)
            failed = _line_status(exc)
            reason = f"{type(exc).__name__}: {exc}"
        reached = 0 if res is None else len(res.y_samples)
        for m in range(reached):
            values[m] = res.y_samples[m][0]
        for m in range(reached, len(nodes)):
            statuses[m] = failed
        return values, statuses, reason


def _assemble(spec, lines, direction) -> SolutionGrid:
    grid = SolutionGrid.empty(spec.x_nodes(), spec.t_nodes())
    for k, (values, statuses, reason) in enumerate(lines):
        for m, (value, status) in enumerate(zip(values, statuses)):
            i, j = (k, m) if direction == "t" else (m, k)
            grid.u[i, j] = value
            grid.status[i, j] = status.value
            if status is not NodeStatus.OK:
                grid.reasons[(i, j)] = reason or status.value
    return grid


def integrate_reduced_in_t(
    red: ReducedODE, spec: Optional[ProblemSpec] = None, threads: int = 1
) -> SolutionGrid:
    """Integrate the reduced relation in t on every grid column from ``phi``."""
    spec = spec or red.spec
    if red.direction != "t" or spec.family not in SECOND_ORDER_T:
        raise ValueError("integrate_reduced_in_t needs a mixed_tt, ftype or general_bu reduction")
    lines = solve_lines(_LineSolver, spec, red, spec.nx, threads)
    grid = _assemble(spec, lines, "t")
    grid.u[:, 0] = [spec.compiled("phi")(float(x)) for x in grid.x]
    return grid


def integrate_reduced_in_x(
    red: ReducedODE, spec: Optional[ProblemSpec] = None, threads: int = 1
) -> SolutionGrid:
    """Integrate ``u_x = H + K(u) + C`` in x on every grid row from ``g(t)``."""
    spec = spec or red.spec
    if red.direction != "x" or spec.family is not Family.MIXED_XT:
        raise ValueError("integrate_reduced_in_x needs a mixed_xt reduction")
    lines = solve_lines(_LineSolver, spec, red, spec.nt, threads)
    return _assemble(spec, lines, "x")


# -- closed form for the power-law case ---------------------------------------

def closed_form_power_law(
    H_int: Callable[[float], float],
    n: int,
    v0: float,
    t: float,
    tol: float = 1e-12,
    lam: Optional[float] = None,
) -> float:
    """Solution of ``u_t = H(t) u + lam u^(n+1)`` through ``v = u^-n``.

    ``H_int(t)`` is ``int_0^t H``; ``v0 = u(0)^-n``.  Then
    ``v(t) = e^{-n H_int(t)} (v0 - n lam int_0^t e^{n H_int(s)} ds)`` and
    ``u = v^(-1/n)`` (the positive root).  ``lam`` defaults to ``1/n``.
    """
    if n < 1 or int(n) != n:
        raise ValueError("n must be a positive integer")
    if not math.isfinite(v0):
        raise ValueError("v0 must be finite")
    lam = 1.0 / n if lam is None else lam
    integral = quadrature(lambda s: math.exp(n * H_int(s)), 0.0, t, tol)
    v = math.exp(-n * H_int(t)) * (v0 - n * lam * integral)
    if v <= 0:
        raise BlowUpError("v = u^-n reached zero before t", t)
    return v ** (-1.0 / n)
