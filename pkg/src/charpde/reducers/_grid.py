"""Node- and line-parallel drivers shared by the family solvers."""

from __future__ import annotations

import functools
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

from ..characteristics import TraceError
from ..ode import IntegrationError, QuadratureError
from ..problem import NodeStatus, ProblemSpec, SolutionGrid


class NodeFailure(Exception):
    """A node (or line segment) that could not be solved."""

    def __init__(self, status: NodeStatus, reason: str):
        super().__init__(reason)
        self.status = status


def classify(exc: BaseException) -> NodeStatus:
    if isinstance(exc, NodeFailure):
        return exc.status
    if isinstance(exc, TraceError):
        return NodeStatus.TRACE_FAILED
    if isinstance(exc, IntegrationError):
        return NodeStatus.BLOW_UP
    return NodeStatus.DOMAIN_ERROR


FAILURES = (NodeFailure, IntegrationError, QuadratureError, ArithmeticError, ValueError)


@functools.lru_cache(maxsize=16)
def _solver(cls, spec: ProblemSpec):
    return cls(spec)


def _node_row(cls, spec: ProblemSpec, i: int):
    """Solve every node of grid row ``i`` (fixed x)."""
    solver = _solver(cls, spec)
    x = float(spec.x_nodes()[i])
    values, statuses, reasons = [], [], {}
    for j, t in enumerate(spec.t_nodes()):
        try:
            values.append(solver.initial(x) if j == 0 else solver(x, float(t)))
            statuses.append(NodeStatus.OK)
        except FAILURES as exc:
            values.append(math.nan)
            statuses.append(classify(exc))
            reasons[j] = f"{type(exc).__name__}: {exc}"
    return values, statuses, reasons


def _line(cls, spec: ProblemSpec, red, k: int):
    return _solver(cls, spec).line(red, k)


def parallel_map(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """Ordered map, optionally over a process pool; results never depend on it."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    chunk = max(1, len(items) // (4 * threads))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def solve_nodes(cls, spec: ProblemSpec, threads: int = 1) -> SolutionGrid:
    """Per-node solve: ``cls(spec)`` must provide ``initial(x)`` and ``(x, t)``."""
    grid = SolutionGrid.empty(spec.x_nodes(), spec.t_nodes())
    rows = parallel_map(
        functools.partial(_node_row, cls, spec), range(spec.nx), threads
    )
    for i, (values, statuses, reasons) in enumerate(rows):
        grid.u[i, :] = values
        grid.status[i, :] = [s.value for s in statuses]
        for j, reason in reasons.items():
            grid.reasons[(i, j)] = reason
    return grid


def solve_lines(cls, spec: ProblemSpec, red, n_lines: int, threads: int = 1):
    """Per-line solve: ``cls(spec).line(red, k)`` returns one line's results."""
    return parallel_map(
        functools.partial(_line, cls, spec, red), range(n_lines), threads
    )
