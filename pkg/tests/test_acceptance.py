"""Acceptance criteria A1-A10.

Each test prints one ``PASS A<n>: ...`` or ``FAIL A<n>: ...`` line; the
lines are also collected into the terminal summary.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from charpde.cli import main
from charpde.expr import compile_expr
from charpde.problem import ProblemSpec
from charpde.reducers import reduce, solve
from charpde.specfile import load_spec
from charpde.verify import (
    ORACLE_IDS,
    convergence_order,
    get_oracle,
    oracle_error,
    power_law_oracle,
    residual,
    sample_oracle,
)

SPECS = Path(__file__).resolve().parent.parent / "specs"
ACCEPTANCE_SPECS = [
    "eq4.json", "eq7.json", "eq8.json", "eq10.json", "eq11.json", "eq12.json",
    "abel.json", "eq20.json", "prop92.json",
]


@pytest.fixture
def verdict(record_property):
    def record(tag, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} {tag}: {detail}"
        print(line)
        record_property("acceptance", line)
        assert ok, line

    return record


def solver_vs_oracle(name):
    spec, settings = load_spec(SPECS / name)
    oracle = get_oracle(settings.oracle)
    start = time.perf_counter()
    grid, _ = solve(spec)
    elapsed = time.perf_counter() - start
    return oracle_error(grid, oracle), elapsed


def test_a1_linear(verdict):
    err, elapsed = solver_vs_oracle("eq4.json")
    ok = err.n_failed == 0 and err.max_error <= 1e-6 and elapsed <= 10.0
    verdict("A1", ok, f"linear max|err| = {err.max_error:.2e} on {err.n_compared} nodes, {elapsed:.2f} s")


def test_a2_separable_quadratic(verdict):
    err, _ = solver_vs_oracle("eq7.json")
    verdict(
        "A2", err.max_error <= 1e-6,
        f"max|err| = {err.max_error:.2e} on {err.n_compared} nodes with t x e^-t <= 0.9 "
        f"({err.n_outside} outside)",
    )


def test_a3_separable_tangent(verdict):
    err, _ = solver_vs_oracle("eq8.json")
    verdict(
        "A3", err.max_error <= 1e-6,
        f"max|err| = {err.max_error:.2e} on {err.n_compared} nodes 0.2 away from the pole "
        f"({err.n_outside} outside)",
    )


def test_a4_bernoulli(verdict):
    parts, ok = [], True
    for name in ("eq10.json", "eq11.json", "eq12.json"):
        err, _ = solver_vs_oracle(name)
        ok &= err.n_compared > 0 and err.max_error <= 1e-6
        parts.append(f"{name[:-5]} {err.max_error:.2e} ({err.n_compared} nodes)")
    verdict("A4", ok, "max|err| " + ", ".join(parts))


def test_a5_abel_reduction(verdict):
    spec, _ = load_spec(SPECS / "abel.json")
    fns = reduce(spec).functions()
    h_err = 0.0
    for x in spec.x_nodes():
        for t in spec.t_nodes():
            x0 = x * math.exp(-t)
            exact = x0 * math.expm1(t) + t * t / 2
            h_err = max(h_err, abs(fns.hat_h(float(x), float(t)) - exact))
    k_err = max(abs(fns.k(float(u)) - u ** 3 / 3) for u in np.linspace(-2.0, 2.0, 81))
    verdict(
        "A5", h_err <= 1e-8 and k_err <= 1e-8,
        f"max|H - x0(e^t-1) - t^2/2| = {h_err:.2e}, max|K - u^3/3| = {k_err:.2e}",
    )


def test_a6_power_reduction(verdict):
    spec, settings = load_spec(SPECS / "eq20.json")
    grid, red = solve(spec)
    res = residual(grid, spec)
    # the exact solution's own residual away from blow-up separates truncation from solver error
    exact = sample_oracle(get_oracle(settings.oracle), spec)
    exact_res = residual(exact, spec)
    c_ok = abs(red.C - 1.0) <= 1e-8 and red.delta_c <= 1e-8
    verdict(
        "A6", c_ok and res.max_abs <= 1e-2,
        f"C = {red.C:.15f}, delta_C = {red.delta_c:.1e}; residual max = {res.max_abs:.3e} "
        f"at {res.worst} (h = {res.h_x:g}, {res.n_nodes} nodes, "
        f"{grid.status_counts()['blow_up']} blown-up nodes excluded); "
        f"exact solution's residual {exact_res.max_abs:.3e} on its {exact_res.n_nodes} valid nodes",
    )


def test_a7_power_law_closed_form(verdict):
    worst, ok = 0.0, True
    for n in (1, 2, 3):
        for u0 in (0.3, 0.5, 0.7):
            oracle = power_law_oracle(n, u0)
            grid, red = solve(oracle.spec)
            err = oracle_error(grid, oracle)
            ok &= red.consistent and err.n_compared > 0 and err.max_error <= 1e-7
            worst = max(worst, err.max_error)
    verdict("A7", ok, f"max|err| = {worst:.2e} over n in {{1,2,3}}, u0 in {{0.3,0.5,0.7}}")


def _lattice():
    first = dict(x_min=0.5, x_max=2.0, t_max=1.0, nx=41, nt=41)
    eq4_solution = "x^2*exp(-t)+x*t-t-1+exp(t)"
    second = dict(phi="0.5*x", psi="(0.5*x)^3/3+0.25", x_min=0.0, x_max=1.0, t_max=0.5, nx=26, nt=26)
    abel = ProblemSpec(family="mixed_tt", a="x", b_xt="x+t", f="u^2", **second)
    return [
        (
            "bernoulli",
            ProblemSpec(family="bernoulli", a="x", b_xt="1", alpha="0", n=2, phi="x^2", **first),
            ProblemSpec(family="linear", a="x", alpha="1", b_xt="0", phi="x^2", **first),
        ),
        (
            "separable",
            ProblemSpec(family="separable", a="x", f="u", b_xt="x+t", phi="x", **first),
            ProblemSpec(family="linear", a="x", alpha="x+t", b_xt="0", phi="x", **first),
        ),
        (
            "riccati",
            ProblemSpec(
                family="riccati", a="x", b_xt="1", alpha="x+t", beta="0", u1=eq4_solution,
                phi="x^2+0.1", **first,
            ),
            ProblemSpec(family="linear", a="x", alpha="1", b_xt="x+t", phi="x^2+0.1", **first),
        ),
        (
            "ftype",
            ProblemSpec(family="ftype", a="x", B_xt="x+t", A_u="u^2", f="u", f_domain=(-50.0, 50.0), **second),
            abel,
        ),
        (
            "general_bu",
            ProblemSpec(family="general_bu", a="x", alpha="x+t", G="u^2", bigB="0", **second),
            abel,
        ),
    ]


def test_a8_properties(verdict):
    zero = compile_expr("0", ("x", "t"))
    round_trip, nodes = 0.0, 0
    for name in ACCEPTANCE_SPECS:
        spec, _ = load_spec(SPECS / name)
        tracer = spec.tracer()
        for x in spec.x_nodes():
            for t in spec.t_nodes()[1:]:
                x0 = tracer.foot(float(x), float(t))
                back = tracer.forward(x0, float(t), zero, zero).y[0]
                round_trip = max(round_trip, abs(back - x))
                nodes += 1
    gaps = {}
    for label, special, general in _lattice():
        a, _ = solve(special)
        b, _ = solve(general)
        gaps[label] = float(np.max(np.abs(a.u - b.u)))
    ok = round_trip <= 1e-8 and all(g <= 1e-8 for g in gaps.values())
    shown = ", ".join(f"{k} {v:.1e}" for k, v in gaps.items())
    verdict("A8", ok, f"round trip {round_trip:.1e} over {nodes} nodes; lattice {shown}")


def test_a9_residual_convergence(verdict):
    parts, ok = [], True
    for oracle_id in ORACLE_IDS:
        oracle = get_oracle(oracle_id)
        study = convergence_order(oracle.region_spec(), [0.04, 0.02, 0.01], oracle=oracle)
        ok &= all(3.5 <= r <= 4.5 for r in study.ratios)
        parts.append(f"{oracle_id} " + "/".join(f"{r:.2f}" for r in study.ratios))
    verdict("A9", ok, "ratios " + ", ".join(parts))


def test_a10_determinism(verdict, tmp_path):
    differing = []
    for name in ACCEPTANCE_SPECS:
        outputs = []
        for threads in (1, 2):
            out = tmp_path / f"{name[:-5]}-{threads}" / "solution.csv"
            out.parent.mkdir()
            main(["solve", str(SPECS / name), "-o", str(out), "--threads", str(threads)])
            outputs.append((out.read_bytes(), out.with_suffix(".json").read_bytes()))
        if outputs[0] != outputs[1]:
            differing.append(name)
    verdict(
        "A10", not differing,
        f"{len(ACCEPTANCE_SPECS) - len(differing)}/{len(ACCEPTANCE_SPECS)} problem files "
        "byte-identical at 1 and 2 workers",
    )
