"""JSON problem files.

Layout::

    {
      "family": "linear",
      "name": "optional label",
      "coefficients": {"a": "x", "alpha": "1", "b_xt": "x+t"},
      "data": {"phi": "x^2"},
      "domain": {"x_min": 0.5, "x_max": 2.0, "t_max": 1.0},
      "grid": {"nx": 41, "nt": 41},
      "solver": {"tol": 1e-10, "blow_up_cap": 1e12},
      "verify": {"oracle": "eq4"}
    }

Expressions are strings (plain numbers are accepted too).  Unknown keys at
any level are rejected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .expr import ExprError, to_str
from .problem import ProblemSpec, SpecError

COEFFICIENTS = {
    "a", "alpha", "b_xt", "beta", "u1", "B_xt", "f", "A_u", "G", "bigB", "b_u",
    "n", "f_domain",
}
COEFFICIENT_ALIASES = {"alpha_xt": "alpha"}
# data key -> ProblemSpec field
DATA = {"phi": "phi", "psi": "psi", "g": "g", "h": "h", "H0": "h_anchor"}
DOMAIN = {"x_min", "x_max", "t_max"}
GRID = {"nx", "nt"}
SOLVER = {
    "tol", "blow_up_cap", "consistency_tol", "u_ref", "max_fail_fraction",
    "bounds_margin",
}
VERIFY = {
    "oracle", "error_tol", "residual_tol", "C_expected", "C_tol", "h_list",
    "convergence_domain",
}
TOP = {"family", "name", "coefficients", "data", "domain", "grid", "solver", "verify"}


@dataclass
class VerifySettings:
    """Checks requested by a problem file for the ``verify`` and ``convergence`` commands."""

    oracle: Optional[str] = None
    error_tol: float = 1e-6
    residual_tol: Optional[float] = None
    C_expected: Optional[float] = None
    C_tol: float = 1e-8
    h_list: list[float] = field(default_factory=lambda: [0.04, 0.02, 0.01])
    convergence_domain: Optional[dict[str, float]] = None


def _section(doc: dict, key: str, allowed: set[str], required: bool = False) -> dict:
    value = doc.get(key)
    if value is None:
        if required:
            raise SpecError(key, "missing")
        return {}
    if not isinstance(value, dict):
        raise SpecError(key, "must be an object")
    unknown = sorted(set(value) - allowed)
    if unknown:
        raise SpecError(f"{key}.{unknown[0]}", f"unknown key; allowed: {sorted(allowed)}")
    return value


def _number(path: str, value: Any, integer: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecError(path, f"expected a number, got {value!r}")
    if integer:
        if int(value) != value:
            raise SpecError(path, f"expected an integer, got {value!r}")
        return int(value)
    if not math.isfinite(value):
        raise SpecError(path, "must be finite")
    return float(value)


def spec_from_dict(doc: dict) -> tuple[ProblemSpec, VerifySettings]:
    """Validate a parsed problem document."""
    if not isinstance(doc, dict):
        raise SpecError("(root)", "problem file must hold a JSON object")
    unknown = sorted(set(doc) - TOP)
    if unknown:
        raise SpecError(unknown[0], f"unknown key; allowed: {sorted(TOP)}")
    if "family" not in doc:
        raise SpecError("family", "missing")
    fields: dict[str, Any] = {"family": doc["family"]}
    if "name" in doc:
        fields["name"] = str(doc["name"])

    allowed = COEFFICIENTS | set(COEFFICIENT_ALIASES)
    for key, value in _section(doc, "coefficients", allowed).items():
        name = COEFFICIENT_ALIASES.get(key, key)
        path = f"coefficients.{key}"
        if name == "n":
            fields["n"] = _number(path, value)
        elif name == "f_domain":
            if not isinstance(value, list) or len(value) != 2:
                raise SpecError(path, "expected [p_lo, p_hi]")
            fields["f_domain"] = tuple(_number(path, v) for v in value)
        else:
            if name in fields:
                raise SpecError(path, f"duplicate of {name!r}")
            fields[name] = _expression(path, value)
    for key, value in _section(doc, "data", set(DATA)).items():
        fields[DATA[key]] = _expression(f"data.{key}", value)
    for key, value in _section(doc, "domain", DOMAIN).items():
        fields[key] = _number(f"domain.{key}", value)
    for key, value in _section(doc, "grid", GRID).items():
        fields[key] = _number(f"grid.{key}", value, integer=True)
    for key, value in _section(doc, "solver", SOLVER).items():
        if value is None and key in ("consistency_tol", "u_ref"):
            continue
        fields[key] = _number(f"solver.{key}", value)

    verify = VerifySettings()
    for key, value in _section(doc, "verify", VERIFY).items():
        path = f"verify.{key}"
        if key == "oracle":
            if not isinstance(value, str):
                raise SpecError(path, "expected an oracle id string")
            verify.oracle = value
        elif key == "h_list":
            if not isinstance(value, list):
                raise SpecError(path, "expected a list of spacings")
            verify.h_list = [_number(path, v) for v in value]
        elif key == "convergence_domain":
            box = _section(doc["verify"], "convergence_domain", DOMAIN)
            verify.convergence_domain = {
                k: _number(f"{path}.{k}", v) for k, v in box.items()
            }
        elif value is not None:
            setattr(verify, key, _number(path, value))

    try:
        spec = ProblemSpec(**fields)
    except ExprError as exc:
        raise SpecError("expression", str(exc)) from None
    return spec, verify


def _expression(path: str, value: Any) -> str:
    if isinstance(value, bool):
        raise SpecError(path, f"expected an expression, got {value!r}")
    if isinstance(value, (int, float)):
        return repr(float(value))
    if not isinstance(value, str):
        raise SpecError(path, f"expected an expression string, got {value!r}")
    return value


def load_spec(path: str | Path) -> tuple[ProblemSpec, VerifySettings]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SpecError("(file)", f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError("(file)", f"invalid JSON in {path}: {exc}") from None
    spec, verify = spec_from_dict(doc)
    if not spec.name:
        spec = spec.replace(name=path.stem)
    return spec, verify


def spec_to_dict(spec: ProblemSpec, verify: Optional[VerifySettings] = None) -> dict:
    """Inverse of :func:`spec_from_dict` (defaults are written out explicitly)."""
    coefficients, data = {}, {}
    for name in sorted(COEFFICIENTS):
        value = getattr(spec, name)
        if value is None:
            continue
        if name == "n":
            coefficients[name] = value
        elif name == "f_domain":
            coefficients[name] = list(value)
        else:
            coefficients[name] = to_str(value)
    for key, name in DATA.items():
        value = getattr(spec, name)
        if value is None or (name == "h_anchor" and to_str(value) == "0"):
            continue
        data[key] = to_str(value)
    solver = {
        "tol": spec.tol,
        "blow_up_cap": spec.blow_up_cap,
        "max_fail_fraction": spec.max_fail_fraction,
    }
    if spec.consistency_tol is not None:
        solver["consistency_tol"] = spec.consistency_tol
    if spec.u_ref is not None:
        solver["u_ref"] = spec.u_ref
    if spec.bounds_margin != ProblemSpec.bounds_margin:
        solver["bounds_margin"] = spec.bounds_margin
    doc = {
        "family": spec.family.value,
        "coefficients": coefficients,
        "data": data,
        "domain": {"x_min": spec.x_min, "x_max": spec.x_max, "t_max": spec.t_max},
        "grid": {"nx": spec.nx, "nt": spec.nt},
        "solver": solver,
    }
    if spec.name:
        doc["name"] = spec.name
    if verify is not None:
        v = {"oracle": verify.oracle, "error_tol": verify.error_tol}
        for key in ("residual_tol", "C_expected", "convergence_domain"):
            if getattr(verify, key) is not None:
                v[key] = getattr(verify, key)
        defaults = VerifySettings()
        for key in ("C_tol", "h_list"):
            if getattr(verify, key) != getattr(defaults, key):
                v[key] = getattr(verify, key)
        doc["verify"] = {k: val for k, val in v.items() if val is not None}
    return doc
