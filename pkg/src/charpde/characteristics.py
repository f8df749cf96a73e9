"""Characteristic curves ``dx/dt = a(x, t)`` and path integrals along them.

Forward traces carry three accumulated integrals as extra ODE state:

* ``int_alpha(t) = int_0^t alpha(x(s), s) ds``
* ``int_source(t) = int_0^t b(x(r), r) exp(-int_alpha(r)) dr``
* ``int_b(t) = int_0^t b(x(s), s) ds``
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .expr import ZERO, CompiledExpr, ExprLike, compile_expr
from .ode import IntegrationError, integrate

DEFAULT_TOL = 1e-10


class TraceError(IntegrationError):
    """A characteristic left the configured spatial bounds."""


@dataclass
class CharacteristicPath:
    x0: float
    t: np.ndarray
    x: np.ndarray
    int_alpha: np.ndarray
    int_source: np.ndarray
    int_b: np.ndarray


def _compiled(e: ExprLike | CompiledExpr, args=("x", "t")) -> CompiledExpr:
    return e if isinstance(e, CompiledExpr) else compile_expr(e, args)


class Tracer:
    """Characteristic tracing for one velocity field ``a(x, t)``.

    ``bounds`` is an optional ``(x_lo, x_hi)`` window; a trace that leaves it
    raises :class:`TraceError`.
    """

    def __init__(
        self,
        a: ExprLike | CompiledExpr,
        tol: float = DEFAULT_TOL,
        bounds: Optional[tuple[float, float]] = None,
        blow_up_cap: float = 1e12,
    ):
        self.a = _compiled(a)
        self.tol = tol
        self.bounds = bounds
        self.blow_up_cap = blow_up_cap

    def _guard(self, t, y):
        lo, hi = self.bounds
        if not lo <= y[0] <= hi:
            raise TraceError(
                f"characteristic left [{lo:g}, {hi:g}] at x = {y[0]!r}", t
            )

    def _run(self, rhs, y0, t0, t1, sample_at=()):
        return integrate(
            rhs,
            y0,
            t0,
            t1,
            self.tol,
            sample_at,
            blow_up_cap=self.blow_up_cap,
            step_callback=self._guard if self.bounds is not None else None,
        )

    def foot(self, x: float, t: float) -> float:
        """Foot point ``x0`` of the characteristic through ``(x, t)``."""
        if t < 0:
            raise ValueError("t must be non-negative")
        if t == 0:
            return x
        a = self.a
        return self._run(lambda s, y: (a(y[0], s),), [x], t, 0.0).y[0]

    def foot_and_integral(
        self, integrand: CompiledExpr, x: float, t: float
    ) -> tuple[float, float]:
        """``(x0, int_0^t integrand(x(s), s) ds)`` from one backward solve."""
        if t == 0:
            return x, 0.0
        a = self.a

        def rhs(s, y):
            xs = y[0]
            return (a(xs, s), integrand(xs, s))

        y = self._run(rhs, [x, 0.0], t, 0.0).y
        return y[0], -y[1]

    def forward(
        self,
        x0: float,
        t_end: float,
        alpha: CompiledExpr,
        b: CompiledExpr,
        sample_at: Sequence[float] = (),
    ):
        a = self.a

        def rhs(s, y):
            xs = y[0]
            bv = b(xs, s)
            return (a(xs, s), alpha(xs, s), bv * math.exp(-y[1]), bv)

        return self._run(rhs, [x0, 0.0, 0.0, 0.0], 0.0, t_end, sample_at)


def trace_forward(
    a: ExprLike,
    x0: float,
    t_end: float,
    tol: float = DEFAULT_TOL,
    sample_at: Sequence[float] = (),
    *,
    alpha: ExprLike = ZERO,
    b: ExprLike = ZERO,
    bounds: Optional[tuple[float, float]] = None,
    blow_up_cap: float = 1e12,
) -> CharacteristicPath:
    """Trace the characteristic from ``(x0, 0)`` to ``t_end``.

    The returned path starts with the sample at ``t = 0`` and always ends at
    ``t_end``.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    tracer = Tracer(a, tol, bounds, blow_up_cap)
    res = tracer.forward(
        x0, t_end, _compiled(alpha), _compiled(b), [0.0, *sample_at]
    )
    ys = np.array(res.y_samples)
    return CharacteristicPath(
        x0=float(x0),
        t=np.array(res.t_samples),
        x=ys[:, 0],
        int_alpha=ys[:, 1],
        int_source=ys[:, 2],
        int_b=ys[:, 3],
    )


def trace_backward(
    a: ExprLike,
    x: float,
    t: float,
    tol: float = DEFAULT_TOL,
    *,
    bounds: Optional[tuple[float, float]] = None,
    blow_up_cap: float = 1e12,
) -> float:
    """Return the foot point ``x0`` of the characteristic through ``(x, t)``."""
    return Tracer(a, tol, bounds, blow_up_cap).foot(x, t)
