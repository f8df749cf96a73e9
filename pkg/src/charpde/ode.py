"""Explicit ODE integration and adaptive quadrature for small systems.

The adaptive integrator is the Dormand-Prince 5(4) pair with PI step-size
control and its native 4th-order continuous extension for dense output.
States are plain Python lists: the systems solved here have at most a handful
of components, where per-call numpy overhead would dominate.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

Rhs = Callable[[float, Sequence[float]], Sequence[float]]

MAX_DIM = 8


class IntegrationError(RuntimeError):
    """Integration stopped early; ``t_last`` is the last time reached.

    ``partial`` holds the :class:`IntegrationResult` accumulated up to the
    failure when raised from :func:`integrate`.
    """

    def __init__(self, message: str, t_last: float):
        super().__init__(f"{message} (last reachable t = {t_last!r})")
        self.t_last = t_last
        self.partial = None


class StepSizeUnderflow(IntegrationError):
    pass


class BlowUpError(IntegrationError):
    pass


class NonFiniteError(IntegrationError):
    pass


class QuadratureError(ArithmeticError):
    pass


@dataclass(frozen=True)
class OdeSystem:
    """Right-hand side ``rhs(t, y)`` of a ``dim``-dimensional system."""

    dim: int
    rhs: Rhs

    def __post_init__(self):
        if not 1 <= self.dim <= MAX_DIM:
            raise ValueError(f"dimension must be in [1, {MAX_DIM}], got {self.dim}")


@dataclass
class IntegrationResult:
    y: list[float]
    t_samples: list[float]
    y_samples: list[list[float]]
    n_steps: int = 0
    n_rejected: int = 0
    max_error: float = 0.0


# Dormand-Prince 5(4) tableau.
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = _A[6]
# b - b_hat, including the FSAL stage
_E = (-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40)
# Continuous extension: y(t + th*h) = y + h * sum_k K_k * sum_j P[k][j] th^(j+1)
_P = (
    (1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432),
    (0.0, 0.0, 0.0, 0.0),
    (0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799),
    (0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072),
    (0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632),
    (0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844),
    (0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423),
)

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 10.0
_BETA = 0.04
_ALPHA = 0.2 - 0.75 * _BETA


def _finite(v: Sequence[float]) -> bool:
    return all(math.isfinite(c) for c in v)


def _dense(y: Sequence[float], ks, h: float, theta: float) -> list[float]:
    powers = (theta, theta * theta, theta ** 3, theta ** 4)
    weights = [sum(p * q for p, q in zip(row, powers)) for row in _P]
    return [
        yi + h * sum(w * k[i] for w, k in zip(weights, ks))
        for i, yi in enumerate(y)
    ]


def _initial_step(rhs: Rhs, t0, y0, f0, direction, tol, span) -> float:
    sc = [tol * (1.0 + abs(v)) for v in y0]
    d0 = max(abs(v) / s for v, s in zip(y0, sc))
    d1 = max(abs(v) / s for v, s in zip(f0, sc))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = [v + direction * h0 * f for v, f in zip(y0, f0)]
    try:
        f1 = rhs(t0 + direction * h0, y1)
        d2 = max(abs(a - b) / s for a, b, s in zip(f1, f0, sc)) / h0
    except (ArithmeticError, ValueError):
        return h0 * 1e-3
    if not math.isfinite(d2):
        return h0 * 1e-3
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)


def integrate(
    sys: OdeSystem | Rhs,
    y0: Sequence[float],
    t0: float,
    t1: float,
    tol: float = 1e-10,
    sample_at: Sequence[float] = (),
    *,
    blow_up_cap: float = 1e12,
    max_steps: int = 200_000,
    step_callback: Optional[Callable[[float, list[float]], None]] = None,
) -> IntegrationResult:
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t1`` (either direction).

    The error test is mixed: a step is accepted when every component of the
    local error estimate is below ``tol * (1 + |y|)``.  Dense samples are
    returned at ``sample_at`` (ordered in the direction of integration) and
    ``t1`` is always the last sample.

    ``step_callback(t, y)`` runs after every accepted step and may raise to
    abort the integration.
    """
    rhs = sys.rhs if isinstance(sys, OdeSystem) else sys
    if not tol > 0:
        raise ValueError("tol must be positive")
    y = [float(v) for v in y0]
    if isinstance(sys, OdeSystem) and len(y) != sys.dim:
        raise ValueError(f"expected {sys.dim} initial values, got {len(y)}")
    direction = 1.0 if t1 >= t0 else -1.0
    lo, hi = min(t0, t1), max(t0, t1)
    samples = sorted({float(s) for s in sample_at}, reverse=direction < 0)
    for s in samples:
        if not lo <= s <= hi:
            raise ValueError(f"sample time {s!r} outside [{lo!r}, {hi!r}]")
    if not samples or samples[-1] != t1:
        samples.append(float(t1))

    result = IntegrationResult(y=list(y), t_samples=[], y_samples=[])
    try:
        return _dopri(rhs, y, t0, t1, tol, samples, direction, result,
                      blow_up_cap, max_steps, step_callback)
    except IntegrationError as exc:
        # samples reached before the failure stay usable
        exc.partial = result
        raise


def _dopri(rhs, y, t0, t1, tol, samples, direction, result,
           blow_up_cap, max_steps, step_callback):
    lo, hi = min(t0, t1), max(t0, t1)
    t = float(t0)
    next_sample = 0
    while next_sample < len(samples) and samples[next_sample] == t:
        result.t_samples.append(t)
        result.y_samples.append(list(y))
        next_sample += 1
    if t0 == t1:
        return result

    f0 = list(rhs(t, y))
    if not _finite(f0):
        raise NonFiniteError("right-hand side is not finite", t)
    span = hi - lo
    h = _initial_step(rhs, t, y, f0, direction, tol, span)
    err_old = 1e-4
    last_exc: BaseException | None = None

    while next_sample < len(samples):
        if result.n_steps + result.n_rejected >= max_steps:
            raise IntegrationError(f"more than {max_steps} steps", t)
        min_step = 16 * math.ulp(max(abs(t), 1.0))
        if h < min_step:
            raise StepSizeUnderflow("step size underflow", t) from last_exc
        remaining = direction * (t1 - t)
        final_step = h >= remaining
        if final_step:
            h = remaining
        dt = direction * h
        try:
            ks = [f0]
            for stage in range(1, 7):
                row = _A[stage]
                ys = [
                    yi + dt * sum(a * k[i] for a, k in zip(row, ks))
                    for i, yi in enumerate(y)
                ]
                ks.append(list(rhs(t + _C[stage] * dt, ys)))
            y_new = ys  # the last stage is evaluated at the 5th-order solution
            ok = _finite(ks[-1])
        except (ArithmeticError, ValueError) as exc:
            last_exc = exc
            ok = False
        if not ok:
            h *= 0.25
            result.n_rejected += 1
            continue

        err_abs = [
            abs(dt * sum(e * k[i] for e, k in zip(_E, ks))) for i in range(len(y))
        ]
        err = max(
            ea / (tol * (1.0 + max(abs(a), abs(b))))
            for ea, a, b in zip(err_abs, y, y_new)
        )
        if err > 1.0 or not math.isfinite(err):
            fac = _SAFETY * err ** -_ALPHA if math.isfinite(err) else _FAC_MIN
            h *= max(_FAC_MIN, min(1.0, fac))
            result.n_rejected += 1
            continue

        t_new = t1 if final_step else t + dt
        while next_sample < len(samples) and (
            direction * (samples[next_sample] - t_new) <= 0
        ):
            ts = samples[next_sample]
            if ts == t_new:
                ysmp = list(y_new)
            else:
                ysmp = _dense(y, ks, dt, (ts - t) / dt)
            result.t_samples.append(ts)
            result.y_samples.append(ysmp)
            next_sample += 1

        result.n_steps += 1
        result.max_error = max(result.max_error, max(err_abs))
        t, y, f0 = t_new, y_new, ks[-1]
        last_exc = None
        if max(abs(v) for v in y) > blow_up_cap:
            raise BlowUpError(f"|y| exceeded blow-up cap {blow_up_cap:g}", t)
        if step_callback is not None:
            step_callback(t, y)
        fac = _SAFETY * max(err, 1e-10) ** -_ALPHA * err_old ** _BETA
        h *= max(_FAC_MIN, min(_FAC_MAX, fac))
        err_old = max(err, 1e-4)

    result.y = list(result.y_samples[-1])
    return result


def rk4_fixed(
    sys: OdeSystem | Rhs,
    y0: Sequence[float],
    t0: float,
    t1: float,
    n_steps: int,
) -> list[float]:
    """Classical fixed-step RK4; the independent reference integrator."""
    rhs = sys.rhs if isinstance(sys, OdeSystem) else sys
    h = (t1 - t0) / n_steps
    y = [float(v) for v in y0]
    for i in range(n_steps):
        t = t0 + i * h
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, [a + h / 2 * b for a, b in zip(y, k1)])
        k3 = rhs(t + h / 2, [a + h / 2 * b for a, b in zip(y, k2)])
        k4 = rhs(t + h, [a + h * b for a, b in zip(y, k3)])
        y = [
            a + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
            for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)
        ]
    return y


# -- quadrature ---------------------------------------------------------------

# 15-point Kronrod nodes (non-negative half) and weights; every second node
# from index 1 is a 7-point Gauss node.
_XK = (
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
)
_WK = (
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
)
_WG = (
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
)


def _gk15(f: Callable[[float], float], a: float, b: float) -> tuple[float, float]:
    center = 0.5 * (a + b)
    half = 0.5 * (b - a)
    fc = f(center)
    kronrod = _WK[7] * fc
    gauss = _WG[3] * fc
    for j in range(7):
        dx = half * _XK[j]
        pair = f(center - dx) + f(center + dx)
        kronrod += _WK[j] * pair
        if j % 2 == 1:
            gauss += _WG[j // 2] * pair
    kronrod *= half
    gauss *= half
    if not math.isfinite(kronrod):
        raise QuadratureError(f"non-finite integrand on [{a!r}, {b!r}]")
    return kronrod, abs(kronrod - gauss)


def quadrature(
    f: Callable[[float], float],
    s0: float,
    s1: float,
    tol: float = 1e-12,
    limit: int = 2000,
    rtol: float = 0.0,
) -> float:
    """Globally adaptive Gauss-Kronrod (G7/K15) quadrature of ``f`` on [s0, s1].

    Panels are bisected worst-first until the summed error estimate
    ``|K15 - G7|`` is at most ``max(tol, rtol * |result|)``.
    """
    return quadrature_with_error(f, s0, s1, tol, limit, rtol)[0]


def quadrature_with_error(
    f, s0, s1, tol=1e-12, limit=2000, rtol=0.0
) -> tuple[float, float]:
    if not tol > 0:
        raise ValueError("tol must be positive")
    if s0 == s1:
        return 0.0, 0.0
    value, err = _gk15(f, s0, s1)
    heap = [(-err, s0, s1, value)]
    total, total_err = value, err
    n = 1
    while total_err > max(tol, rtol * abs(total)):
        if n >= limit:
            raise QuadratureError(
                f"subdivision limit {limit} reached, error estimate {total_err:.3e}"
            )
        neg_err, a, b, v = heapq.heappop(heap)
        m = 0.5 * (a + b)
        if not a < m < b:
            raise QuadratureError(f"panel [{a!r}, {b!r}] cannot be subdivided")
        v1, e1 = _gk15(f, a, m)
        v2, e2 = _gk15(f, m, b)
        heapq.heappush(heap, (-e1, a, m, v1))
        heapq.heappush(heap, (-e2, m, b, v2))
        n += 1
        # re-sum to avoid drift from repeated subtraction
        total = math.fsum(item[3] for item in heap)
        total_err = math.fsum(-item[0] for item in heap)
    return total, total_err


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-10,
    max_depth: int = 50,
) -> float:
    """Recursive adaptive Simpson rule with Richardson correction."""
    if a == b:
        return 0.0

    def simpson(fa, fm, fb, h):
        return h / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, m - a)
        right = simpson(fm, frm, fb, b - m)
        delta = left + right - whole
        if depth >= max_depth:
            raise QuadratureError("adaptive Simpson recursion limit reached")
        if abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return recurse(a, m, fa, flm, fm, left, tol / 2, depth + 1) + recurse(
            m, b, fm, frm, fb, right, tol / 2, depth + 1
        )

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    return recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, b - a), tol, 0)
