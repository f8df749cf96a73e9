"""Command-line front end.

``charpde solve|reduce|verify|convergence <spec.json> [-o OUT] [--threads N] [--tol X]``

Exit codes: 0 success, 1 invalid input (bad problem file, oracle mismatch),
2 solver failure on too many nodes, 3 inconsistent reduction constant,
4 a verification check failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .expr import ExprError
from .problem import FIRST_ORDER, ProblemSpec, SolutionGrid, SpecError
from .reducers import reduce, solve
from .specfile import VerifySettings, load_spec
from .verify import (
    OracleMismatch,
    ResidualError,
    check_match,
    convergence_order,
    get_oracle,
    oracle_error,
    residual,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_SOLVER = 2
EXIT_INCONSISTENT = 3
EXIT_CHECK_FAILED = 4

SLOPE_RANGE = (1.7, 2.3)
RATIO_RANGE = (3.5, 4.5)


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# -- output -------------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_csv(grid: SolutionGrid, path: Path) -> None:
    lines = ["x,t,u,status"]
    for i, x in enumerate(grid.x):
        for j, t in enumerate(grid.t):
            lines.append(
                "%.12e,%.12e,%.12e,%s" % (x, t, grid.u[i, j], grid.status[i, j])
            )
    path.write_text("\n".join(lines) + "\n")


# -- shared steps -------------------------------------------------------------

def _load(args) -> tuple[ProblemSpec, VerifySettings]:
    spec, settings = load_spec(args.spec)
    if getattr(args, "tol", None) is not None:
        spec = spec.replace(tol=args.tol)
    return spec, settings


def _oracle(args, settings: VerifySettings, spec: ProblemSpec):
    oracle_id = getattr(args, "oracle", None) or settings.oracle
    if oracle_id is None:
        return None
    try:
        oracle = get_oracle(oracle_id)
    except KeyError as exc:
        raise CliError(str(exc.args[0]), EXIT_INVALID) from None
    try:
        check_match(spec, oracle)
    except OracleMismatch as exc:
        raise CliError(f"oracle/spec mismatch: {exc}", EXIT_INVALID) from None
    return oracle


def _grid_summary(grid: SolutionGrid) -> dict:
    return {
        "nx": len(grid.x),
        "nt": len(grid.t),
        "status_counts": grid.status_counts(),
        "fail_fraction": grid.fail_fraction(),
    }


def _residual_summary(grid: SolutionGrid, spec: ProblemSpec) -> Optional[dict]:
    try:
        return residual(grid, spec).as_dict()
    except ResidualError as exc:
        return {"unavailable": str(exc)}


def _inconsistent(red) -> CliError:
    table = "\n".join(f"  {node:.6g}  C = {c:.12g}" for node, c in zip(red.sample_nodes, red.c_samples))
    return CliError(f"ansatz inconsistent: {red.inconsistency}\nper-node constants:\n{table}", EXIT_INCONSISTENT)


# -- commands -----------------------------------------------------------------

def cmd_solve(args) -> int:
    spec, _ = _load(args)
    start = time.perf_counter()
    if spec.family not in FIRST_ORDER:
        red = reduce(spec)
        if not red.consistent:
            raise _inconsistent(red)
    grid, red = solve(spec, args.threads)
    elapsed = time.perf_counter() - start
    out = Path(args.output) if args.output else Path(Path(args.spec).stem + ".csv")
    write_csv(grid, out)
    report = {
        "command": "solve",
        "family": spec.family.value,
        "name": spec.name,
        "tol": spec.tol,
        "grid": _grid_summary(grid),
        "reduction": None if red is None else red.summary(),
        "residual": _residual_summary(grid, spec),
        "csv": out.name,
    }
    if args.timing:
        report["timing_s"] = elapsed
    out.with_suffix(".json").write_text(dumps(report))
    counts = grid.status_counts()
    print(f"wrote {out} ({len(grid.x)}x{len(grid.t)} nodes, {counts['ok']} ok) in {elapsed:.2f} s")
    fraction = grid.fail_fraction()
    if fraction > spec.max_fail_fraction:
        print(
            f"error: {fraction:.1%} of nodes failed (limit {spec.max_fail_fraction:.1%}): {counts}",
            file=sys.stderr,
        )
        return EXIT_SOLVER
    return EXIT_OK


def cmd_reduce(args) -> int:
    spec, _ = _load(args)
    if spec.family in FIRST_ORDER:
        raise CliError(f"family {spec.family.value!r} has no reduction; use solve", EXIT_INVALID)
    red = reduce(spec)
    text = dumps(red.summary())
    if args.output:
        Path(args.output).write_text(text)
    sys.stdout.write(text)
    if not red.consistent:
        raise _inconsistent(red)
    return EXIT_OK


def _line(ok: bool, name: str, detail: str) -> bool:
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return ok


def cmd_verify(args) -> int:
    spec, settings = _load(args)
    oracle = _oracle(args, settings, spec)
    red = None
    results = []
    report: dict = {"command": "verify", "family": spec.family.value, "name": spec.name}
    if spec.family not in FIRST_ORDER:
        red = reduce(spec)
        tol = red.consistency_tol
        results.append(_line(
            red.consistent, "consistency", f"delta_C = {red.delta_c:.3e} (tol {tol:.3e})"
        ))
        report["reduction"] = red.summary()
        if settings.C_expected is not None:
            gap = abs(red.C - settings.C_expected)
            results.append(_line(
                gap <= settings.C_tol, "constant",
                f"C = {red.C:.12g}, expected {settings.C_expected:g} +- {settings.C_tol:g}",
            ))
    grid, _ = solve(spec, args.threads)
    fraction = grid.fail_fraction()
    results.append(_line(
        fraction <= spec.max_fail_fraction, "nodes",
        f"{fraction:.1%} failed (limit {spec.max_fail_fraction:.1%}) {grid.status_counts()}",
    ))
    report["grid"] = _grid_summary(grid)
    if oracle is not None:
        err = oracle_error(grid, oracle)
        ok = err.n_compared > 0 and err.max_error <= settings.error_tol
        results.append(_line(
            ok, f"oracle {oracle.id}",
            f"max |error| = {err.max_error:.3e} over {err.n_compared} nodes "
            f"(tol {settings.error_tol:g}), worst at {err.worst}",
        ))
        report["oracle"] = {"id": oracle.id, **err.as_dict()}
    res = _residual_summary(grid, spec)
    report["residual"] = res
    if settings.residual_tol is not None:
        if "max_abs" in res:
            results.append(_line(
                res["max_abs"] <= settings.residual_tol, "residual",
                f"max |R| = {res['max_abs']:.3e} at {tuple(res['worst'])} "
                f"(tol {settings.residual_tol:g}, h = {res['h_x']:g}, {res['h_t']:g})",
            ))
        else:
            results.append(_line(False, "residual", res["unavailable"]))
    elif "max_abs" in res:
        print(f"INFO residual: max |R| = {res['max_abs']:.3e} at {tuple(res['worst'])}")
    report["passed"] = all(results)
    if args.output:
        Path(args.output).write_text(dumps(report))
    return EXIT_OK if all(results) else EXIT_CHECK_FAILED


def cmd_convergence(args) -> int:
    spec, settings = _load(args)
    oracle = _oracle(args, settings, spec)
    box = settings.convergence_domain
    if box is None and oracle is not None:
        box = dict(zip(("x_min", "x_max", "t_max"), oracle.region))
    if box:
        spec = spec.replace(**box)
    quantity = args.quantity or ("oracle_residual" if oracle is not None else "solver_residual")
    study = convergence_order(
        spec, settings.h_list, quantity=quantity, oracle=oracle, threads=args.threads
    )
    for h, value in zip(study.h, study.values):
        print(f"h = {h:g}: {quantity} = {value:.6e}")
    results = []
    if quantity == "solver_error":
        ok = max(study.values) <= settings.error_tol
        results.append(_line(ok, "error", f"max over h = {max(study.values):.3e} (tol {settings.error_tol:g})"))
    else:
        lo, hi = SLOPE_RANGE
        results.append(_line(lo <= study.slope <= hi, "slope", f"{study.slope:.3f} (need [{lo}, {hi}])"))
        lo, hi = RATIO_RANGE
        ok = all(lo <= r <= hi for r in study.ratios)
        shown = ", ".join(f"{r:.3f}" for r in study.ratios)
        results.append(_line(ok, "ratios", f"{shown} (need [{lo}, {hi}])"))
    if not study.monotone:
        print(f"NOTE {study.note}")
    if args.output:
        Path(args.output).write_text(dumps({"command": "convergence", **study.as_dict()}))
    return EXIT_OK if all(results) else EXIT_CHECK_FAILED


COMMANDS = {
    "solve": cmd_solve,
    "reduce": cmd_reduce,
    "verify": cmd_verify,
    "convergence": cmd_convergence,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="charpde",
        description="Solve first- and second-order PDE families along characteristics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("solve", "solve on the grid; write CSV and a JSON report next to it"),
        ("reduce", "print the reduced-equation summary of a second-order problem"),
        ("verify", "solve and check against oracle, residual and consistency"),
        ("convergence", "residual or error convergence over halving grid spacings"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("spec", help="problem file (JSON)")
        p.add_argument("-o", "--output", help="output file (CSV for solve, JSON otherwise)")
        p.add_argument("--threads", type=int, default=1, help="worker processes")
        p.add_argument("--tol", type=float, help="override the solver tolerance")
        if name in ("verify", "convergence"):
            p.add_argument("--oracle", help="oracle id (overrides the file's verify.oracle)")
        if name == "solve":
            p.add_argument("--timing", action="store_true", help="add wall time to the report")
        if name == "convergence":
            p.add_argument(
                "--quantity",
                choices=("oracle_residual", "solver_residual", "solver_error"),
            )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return COMMANDS[args.command](args)
    except SpecError as exc:
        print(f"error: invalid problem: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ExprError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
