"""First-order families: linear, separable, Bernoulli and Riccati.

Every grid node ``(x, t)`` is solved independently: one backward trace finds
the foot point ``x0``, then one forward solve from ``(x0, 0)`` integrates the
characteristic together with the reduced ODE for the solution.
"""

from __future__ import annotations

import math

from ..expr import Binary, Const, substitute
from ..ode import BlowUpError, IntegrationError, integrate
from ..problem import Family, NodeStatus, ProblemSpec, SolutionGrid
from ._grid import NodeFailure, solve_nodes


def _require(spec: ProblemSpec, family: Family) -> None:
    if spec.family is not family:
        raise ValueError(f"expected a {family.value!r} problem, got {spec.family.value!r}")


class _NodeSolver:
    def __init__(self, spec: ProblemSpec):
        self.spec = spec
        self.tracer = spec.tracer()
        self.a = self.tracer.a
        self.phi = spec.compiled("phi")

    def initial(self, x: float) -> float:
        return self.phi(x)

    def foot(self, x: float, t: float) -> float:
        try:
            return self.tracer.foot(x, t)
        except IntegrationError as exc:
            raise NodeFailure(NodeStatus.TRACE_FAILED, str(exc)) from exc

    def _run(self, rhs, y0, t, step_callback=None, blow_up_cap=None):
        guard = self.tracer._guard

        def callback(s, y):
            guard(s, y)
            if step_callback is not None:
                step_callback(s, y)

        cap = self.spec.blow_up_cap if blow_up_cap is None else blow_up_cap
        return integrate(
            rhs, y0, 0.0, t, self.spec.tol, blow_up_cap=cap, step_callback=callback,
        ).y


class LinearSolver(_NodeSolver):
    def __init__(self, spec):
        super().__init__(spec)
        self.alpha = spec.compiled("alpha")
        self.b = spec.compiled("b_xt")

    def __call__(self, x, t):
        x0 = self.foot(x, t)
        _, int_alpha, int_source, _ = self.tracer.forward(
            x0, t, self.alpha, self.b
        ).y
        return math.exp(int_alpha) * (self.phi(x0) + int_source)


class SeparableSolver(_NodeSolver):
    def __init__(self, spec):
        super().__init__(spec)
        self.f = spec.compiled("f")
        self.b = spec.compiled("b_xt")

    def __call__(self, x, t):
        x0 = self.foot(x, t)
        a, f, b = self.a, self.f, self.b

        def rhs(s, y):
            xs, u = y
            return (a(xs, s), f(u) * b(xs, s))

        return self._run(rhs, [x0, self.phi(x0)], t)[1]


def _is_integer(p: float) -> bool:
    return float(p).is_integer()


class BernoulliSolver(_NodeSolver):
    """Integrates ``v = u^(1-n)``, which obeys the linear ODE
    ``v' = (1 - n) (b v + alpha)`` along the characteristic."""

    def __init__(self, spec):
        super().__init__(spec)
        self.alpha = spec.compiled("alpha")
        self.b = spec.compiled("b_xt")
        self.m = 1.0 - spec.n
        self.p = 1.0 / self.m

    def __call__(self, x, t):
        x0 = self.foot(x, t)
        m, p = self.m, self.p
        phi0 = self.phi(x0)
        if phi0 == 0.0 and m < 0:
            # n > 1: u = 0 is an equilibrium and the unique solution from zero data
            return 0.0
        if phi0 < 0.0 and not _is_integer(m):
            raise NodeFailure(
                NodeStatus.DOMAIN_ERROR, f"phi(x0) < 0 with non-integer power {m:g}"
            )
        v0 = phi0 ** m
        a, alpha, b = self.a, self.alpha, self.b

        def rhs(s, y):
            xs, v = y
            return (a(xs, s), m * (b(xs, s) * v + alpha(xs, s)))

        def sign_guard(s, y):
            if y[1] * v0 < 0:
                if p < 0:
                    raise BlowUpError("v = u^(1-n) crossed zero", s)
                if not _is_integer(p):
                    raise NodeFailure(
                        NodeStatus.DOMAIN_ERROR,
                        f"v crossed zero at t = {s!r}; u = v^{p:g} undefined",
                    )

        # v solves a linear ODE, so a large v only means small u when n > 1;
        # the cap is applied to u below
        v = self._run(rhs, [x0, v0], t, sign_guard, blow_up_cap=math.inf)[1]
        sign_guard(t, [x0, v])
        if v == 0.0 and p < 0:
            raise BlowUpError("v = 0 at the target node", t)
        if v < 0 and not _is_integer(p):
            raise NodeFailure(NodeStatus.DOMAIN_ERROR, f"v = {v!r} < 0")
        u = v ** p
        if abs(u) > self.spec.blow_up_cap:
            raise BlowUpError(f"|u| exceeded blow-up cap {self.spec.blow_up_cap:g}", t)
        return u


class RiccatiSolver(BernoulliSolver):
    """Solves the Bernoulli problem for ``w = u - u1`` and adds ``u1`` back."""

    def __init__(self, spec):
        super().__init__(riccati_to_bernoulli(spec))
        self.phi_u = spec.compiled("phi")
        self.u1 = spec.compiled("u1")

    def initial(self, x):
        return self.phi_u(x)

    def __call__(self, x, t):
        return self.u1(x, t) + super().__call__(x, t)


def solve_linear_first_order(spec: ProblemSpec, threads: int = 1) -> SolutionGrid:
    """``u_t + a u_x - alpha u = b`` with ``u(x, 0) = phi(x)``.

    Per node ``u = exp(I) (phi(x0) + J)`` where ``I`` integrates ``alpha``
    and ``J`` integrates ``b exp(-I)`` along the characteristic.
    """
    _require(spec, Family.LINEAR)
    return solve_nodes(LinearSolver, spec, threads)


def solve_separable(spec: ProblemSpec, threads: int = 1) -> SolutionGrid:
    """``u_t + a u_x = f(u) b`` by integrating ``(x, u)' = (a, f(u) b)``."""
    _require(spec, Family.SEPARABLE)
    return solve_nodes(SeparableSolver, spec, threads)


def solve_bernoulli(spec: ProblemSpec, threads: int = 1) -> SolutionGrid:
    """``u_t + a u_x = b u + alpha u^n`` through ``v = u^(1-n)``."""
    _require(spec, Family.BERNOULLI)
    return solve_nodes(BernoulliSolver, spec, threads)


def riccati_to_bernoulli(spec: ProblemSpec) -> ProblemSpec:
    """Shift by the particular solution ``u1``: ``w = u - u1`` solves
    ``w_t + a w_x = (b + 2 beta u1) w + beta w^2``."""
    _require(spec, Family.RICCATI)
    gamma = Binary("+", spec.b_xt, Binary("*", Binary("*", Const(2.0), spec.beta), spec.u1))
    phi_w = Binary("-", spec.phi, substitute(spec.u1, "t", Const(0.0)))
    return ProblemSpec(
        family=Family.BERNOULLI,
        a=spec.a,
        b_xt=gamma,
        alpha=spec.beta,
        n=2.0,
        phi=phi_w,
        x_min=spec.x_min,
        x_max=spec.x_max,
        t_max=spec.t_max,
        nx=spec.nx,
        nt=spec.nt,
        tol=spec.tol,
        blow_up_cap=spec.blow_up_cap,
        bounds_margin=spec.bounds_margin,
        max_fail_fraction=spec.max_fail_fraction,
        name=spec.name,
    )


def solve_riccati(spec: ProblemSpec, threads: int = 1) -> SolutionGrid:
    """``u_t + a u_x = b u + alpha + beta u^2`` given a particular solution ``u1``."""
    _require(spec, Family.RICCATI)
    return solve_nodes(RiccatiSolver, spec, threads)
