"""Built-in problem registry and the JSON problem loader.

Built-ins cover the four demonstration potentials plus a few constant
coefficient problems used as analytic anchors.  User problems arrive as JSON
with either a builtin reference or tabulated coefficient samples (interpolated
with cubic splines); closed-form expression parsing is deliberately not
supported.
"""
from __future__ import annotations

import json
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline

from .pencil import BoundaryData, CoefficientField, PencilProblem, linear_boundary


class ConfigError(ValueError):
    """Malformed or unsupported problem configuration."""


def _const_field(n, V, f1, f2, delta, decay_scale=1.0, two_sided=True):
    V = np.asarray(V, dtype=float).reshape(n, n)
    f1 = np.asarray(f1, dtype=float).reshape(n, n)
    f2 = np.asarray(f2, dtype=float).reshape(n, n)
    lim = (V, f1, f2)
    return CoefficientField(
        n=n, evaluate=lambda x: lim, limits_minus=lim,
        limits_plus=lim if two_sided else None,
        delta=delta, decay_scale=decay_scale,
    )


def _example1_field() -> CoefficientField:
    one = np.array([[1.0]])
    two = np.array([[2.0]])
    v_inf = np.array([[-1.0]])

    def evaluate(x: float):
        v = -1.0 - (815.0 + 219.0 * np.cos(1.8 * x)) * np.exp(0.1 * x)
        return np.array([[v]]), one, two

    return CoefficientField(n=1, evaluate=evaluate, limits_minus=(v_inf, one, two),
                            limits_plus=None, delta=2.0, decay_scale=10.0)


def _example2_field() -> CoefficientField:
    one = np.array([[1.0]])
    two = np.array([[2.0]])
    v_inf = np.array([[-1.0]])

    def evaluate(x: float):
        v = -1.0 + 1.8 * np.exp(-0.06 * abs(x))
        return np.array([[v]]), one, two

    lim = (v_inf, one, two)
    return CoefficientField(n=1, evaluate=evaluate, limits_minus=lim,
                            limits_plus=lim, delta=2.0, decay_scale=1.0 / 0.06)


def _example3_field() -> CoefficientField:
    I2 = np.eye(2)
    f2 = 2.0 * I2
    v_inf = -I2

    def evaluate(x: float):
        v11 = -1.0 - (815.0 + 219.0 * np.cos(1.8 * x)) * np.exp(0.1 * x)
        v22 = -1.0 - (255.0 + 0.1 * np.cos(0.5 * x)) * np.exp(0.15 * x)
        return np.diag([v11, v22]), I2, f2

    return CoefficientField(n=2, evaluate=evaluate, limits_minus=(v_inf, I2, f2),
                            limits_plus=None, delta=2.0, decay_scale=10.0)


def _example4_field() -> CoefficientField:
    I2 = np.eye(2)
    f2 = 2.0 * I2
    off = np.array([[0.0, 0.5], [0.5, 0.0]])
    v_inf = -I2 + off

    def evaluate(x: float):
        d = -1.0 + 1.93 * np.exp(-0.141 * abs(x))
        return d * I2 + off, I2, f2

    lim = (v_inf, I2, f2)
    return CoefficientField(n=2, evaluate=evaluate, limits_minus=lim,
                            limits_plus=lim, delta=2.0, decay_scale=1.0 / 0.141)


def _builtin_example1() -> PencilProblem:
    return PencilProblem(
        coeffs=_example1_field(), domain="half",
        boundary=linear_boundary([[18.0]], [[-9.0]]), name="example1",
    )


def _builtin_example2() -> PencilProblem:
    return PencilProblem(coeffs=_example2_field(), domain="whole", name="example2")


def _builtin_example3() -> PencilProblem:
    return PencilProblem(
        coeffs=_example3_field(), domain="half",
        boundary=linear_boundary([[18.0, 2.0], [2.0, 25.0]], -9.0 * np.eye(2)),
        name="example3",
    )


def _builtin_example4() -> PencilProblem:
    return PencilProblem(coeffs=_example4_field(), domain="whole", name="example4")


def _builtin_constant() -> PencilProblem:
    return PencilProblem(
        coeffs=_const_field(1, [[-1.0]], [[1.0]], [[1.0]], delta=1.0),
        domain="whole", name="constant",
    )


def _builtin_robin_constant() -> PencilProblem:
    """Constant coefficients with one eigenvalue at (73 - sqrt(589))/158.

    On the half line with V = -1, f1 = 1, f2 = 2 and boundary
    (4 - 9 lam) y(0) - y'(0) = 0, the decaying solution e^{mu x} with
    mu^2 = 2 lam^2 + lam + 1 satisfies the boundary condition exactly when
    79 lam^2 - 73 lam + 15 = 0 and 4 - 9 lam > 0: a single root near 0.3084.
    """
    return PencilProblem(
        coeffs=_const_field(1, [[-1.0]], [[1.0]], [[2.0]], delta=2.0, two_sided=False),
        domain="half", boundary=linear_boundary([[4.0]], [[-9.0]]),
        name="robin_constant",
    )


def _builtin_custom_phi() -> PencilProblem:
    """Same constant problem with a quadratic boundary family (not linear in
    lambda), exercising the code paths that must flag reduced support."""
    coeffs = _const_field(1, [[-1.0]], [[1.0]], [[2.0]], delta=2.0, two_sided=False)
    bd = BoundaryData(
        c=np.array([[4.0]]),
        phi=lambda lam: np.array([[-9.0 * lam - 0.5 * lam * lam]]),
        phi_kind="custom",
    )
    return PencilProblem(coeffs=coeffs, domain="half", boundary=bd, name="custom_phi")


BUILTINS: Dict[str, Callable[[], PencilProblem]] = {
    "example1": _builtin_example1,
    "example2": _builtin_example2,
    "example3": _builtin_example3,
    "example4": _builtin_example4,
    "constant": _builtin_constant,
    "robin_constant": _builtin_robin_constant,
    "custom_phi": _builtin_custom_phi,
}

ROBIN_CONSTANT_EIGENVALUE = (73.0 - np.sqrt(589.0)) / 158.0


def builtin_problem(name: str) -> PencilProblem:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise ConfigError(
            f"unknown builtin problem {name!r}; available: {sorted(BUILTINS)}"
        ) from None


def _as_matrix(value, n: int, what: str) -> np.ndarray:
    M = np.asarray(value, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.shape != (n, n):
        raise ConfigError(f"{what} must be {n}x{n}, got shape {M.shape}")
    return M


def _table_field(spec: dict, limits: dict, n: int, delta: float) -> CoefficientField:
    try:
        xs = np.asarray(spec["x"], dtype=float)
        V_tab = np.asarray(spec["V"], dtype=float).reshape(len(xs), n, n)
        f1_tab = np.asarray(spec["f1"], dtype=float).reshape(len(xs), n, n)
        f2_tab = np.asarray(spec["f2"], dtype=float).reshape(len(xs), n, n)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad coefficient table: {exc}") from exc
    if xs.size < 4 or np.any(np.diff(xs) <= 0):
        raise ConfigError("table needs at least 4 strictly increasing x samples")
    spl_V = CubicSpline(xs, V_tab, axis=0)
    spl_f1 = CubicSpline(xs, f1_tab, axis=0)
    spl_f2 = CubicSpline(xs, f2_tab, axis=0)
    lo, hi = float(xs[0]), float(xs[-1])
    lim_minus = tuple(_as_matrix(limits[k], n, k) for k in ("Vminus", "f1minus", "f2minus"))
    if "Vplus" in limits:
        lim_plus = tuple(_as_matrix(limits[k], n, k) for k in ("Vplus", "f1plus", "f2plus"))
    else:
        lim_plus = None

    def evaluate(x: float):
        if x <= lo:
            return lim_minus
        if x >= hi and lim_plus is not None:
            return lim_plus
        xc = min(max(x, lo), hi)
        return (np.asarray(spl_V(xc)), np.asarray(spl_f1(xc)), np.asarray(spl_f2(xc)))

    return CoefficientField(
        n=n, evaluate=evaluate, limits_minus=lim_minus, limits_plus=lim_plus,
        delta=delta, decay_scale=float(spec.get("decay_scale", max(1.0, abs(lo)))),
    )


def load_problem(source: Union[str, dict]) -> PencilProblem:
    """Build a problem from a JSON file path or an already parsed dict."""
    if isinstance(source, str):
        try:
            with open(source) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read problem file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    else:
        data = source
    if not isinstance(data, dict):
        raise ConfigError("problem description must be a JSON object")

    coeffs_spec = data.get("coefficients", {})
    kind = coeffs_spec.get("kind")
    if kind == "builtin":
        return builtin_problem(coeffs_spec.get("name", ""))
    if kind == "expr":
        raise ConfigError("expression coefficients are not supported; use a table")
    if kind != "table":
        raise ConfigError(f"unknown coefficients kind {kind!r}")

    try:
        n = int(data["n"])
        delta = float(data["delta"])
        domain_spec = data["domain"]
        domain = domain_spec["kind"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"missing or malformed field: {exc}") from exc
    if delta <= 0:
        raise ConfigError("delta must be positive")

    coeffs = _table_field(coeffs_spec, data.get("limits", {}), n, delta)
    if domain == "half":
        try:
            c = _as_matrix(domain_spec["c"], n, "c")
            C2 = _as_matrix(domain_spec["C2"], n, "C2")
        except KeyError as exc:
            raise ConfigError(f"half-line problems need boundary data: {exc}") from exc
        return PencilProblem(coeffs=coeffs, domain="half",
                             boundary=linear_boundary(c, C2), name="user")
    if domain == "whole":
        return PencilProblem(coeffs=coeffs, domain="whole", name="user")
    if domain == "truncated":
        try:
            L = float(domain_spec["L"])
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"truncated problems need L: {exc}") from exc
        return PencilProblem(coeffs=coeffs, domain="truncated", L=L, name="user")
    raise ConfigError(f"unknown domain kind {domain!r}")
