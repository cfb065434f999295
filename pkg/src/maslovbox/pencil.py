"""Problem model for the quadratic pencil y'' + V y = lam f1 y + lam^2 f2 y.

Holds the coefficient field with its asymptotic limits, boundary data for the
half-line variant, validation of the structural assumptions (hyperbolic limits
and a monotone-decreasing Robin coefficient), the a-priori upper bound on real
eigenvalues, and the asymptotic unstable Lagrangian plane used to seed
propagation "at -infinity".
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from . import lagrangian
from .linalg import NotPositiveDefiniteError, as_hermitian, herm_eig

LIMIT_TOL = 1e-8
GAP_TOL = 1e-3


class HyperbolicityLostError(ArithmeticError):
    """The asymptotic pencil has a nonpositive eigenvalue at this lambda."""


@dataclass(frozen=True)
class CoefficientField:
    """Coefficients V, f1, f2 with limits at -infinity (and optionally +infinity).

    ``evaluate`` maps x to the triple (V, f1, f2) of Hermitian matrices.
    ``delta`` is a lower bound with f2 >= delta * I; ``decay_scale`` sets the
    length scale on which the coefficients approach their limits.
    """

    n: int
    evaluate: Callable[[float], Tuple[np.ndarray, np.ndarray, np.ndarray]]
    limits_minus: Tuple[np.ndarray, np.ndarray, np.ndarray]
    limits_plus: Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]]
    delta: float
    decay_scale: float

    def S(self, x: float, lam: float) -> np.ndarray:
        """lam f1(x) + lam^2 f2(x) - V(x), the second-order coefficient block."""
        V, f1, f2 = self.evaluate(x)
        return lam * f1 + lam * lam * f2 - V

    def S_limit(self, side: str, lam: float) -> np.ndarray:
        V, f1, f2 = self.limit(side)
        return lam * f1 + lam * lam * f2 - V

    def limit(self, side: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        if side == "minus":
            return self.limits_minus
        if side == "plus":
            if self.limits_plus is None:
                raise ValueError("no limits at +infinity for this problem")
            return self.limits_plus
        raise ValueError(f"side must be 'minus' or 'plus', got {side!r}")

    def deviation(self, x: float, side: str) -> float:
        """||V(x)-V_lim|| + sum_j ||f_j(x)-f_j_lim|| against the chosen limit."""
        V, f1, f2 = self.evaluate(x)
        Vl, f1l, f2l = self.limit(side)
        return float(
            np.linalg.norm(V - Vl) + np.linalg.norm(f1 - f1l) + np.linalg.norm(f2 - f2l)
        )


@dataclass(frozen=True)
class BoundaryData:
    """Robin boundary data (c + phi(lam)) y(0) - y'(0) = 0.

    ``phi_kind`` is "linear" (phi = lam * C2, with C2 Hermitian negative
    definite) or "custom" (arbitrary callable; the sign condition on Im phi is
    then reported as unverified rather than checked).
    """

    c: np.ndarray
    phi: Callable[[complex], np.ndarray]
    phi_kind: str = "linear"
    C2: Optional[np.ndarray] = None

    def c_plus_phi(self, lam: float) -> np.ndarray:
        return np.asarray(self.c, dtype=complex) + np.asarray(self.phi(lam), dtype=complex)


def linear_boundary(c, C2) -> BoundaryData:
    c = as_hermitian(c)
    C2 = as_hermitian(C2)
    return BoundaryData(c=c, phi=lambda lam: lam * C2, phi_kind="linear", C2=C2)


@dataclass(frozen=True)
class PencilProblem:
    """A quadratic-pencil eigenvalue problem on the half line, whole line,
    or a left half-line truncated at L."""

    coeffs: CoefficientField
    domain: str  # "half" | "whole" | "truncated"
    boundary: Optional[BoundaryData] = None
    L: Optional[float] = None
    name: str = ""

    def __post_init__(self):
        if self.domain not in ("half", "whole", "truncated"):
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.domain == "half" and self.boundary is None:
            raise ValueError("half-line problems need boundary data")
        if self.domain == "whole" and self.coeffs.limits_plus is None:
            raise ValueError("whole-line problems need limits at +infinity")
        if self.domain == "truncated" and self.L is None:
            raise ValueError("truncated problems need the right endpoint L")

    @property
    def n(self) -> int:
        return self.coeffs.n

    def right_endpoint(self, limit_tol: float = LIMIT_TOL) -> float:
        """Right end of the computational window: 0, L, or the +inf truncation."""
        if self.domain == "half":
            return 0.0
        if self.domain == "truncated":
            return float(self.L)
        return self.x_cut("plus", limit_tol)

    def x_cut(self, side: str, limit_tol: float = LIMIT_TOL) -> float:
        """Truncation point standing in for -inf (or +inf), by doubling probe.

        Returns the first x = -+ decay_scale * 2^k at which the coefficient
        deviation from the limit drops below ``limit_tol``.
        """
        sgn = -1.0 if side == "minus" else 1.0
        x = sgn * max(self.coeffs.decay_scale, 1.0)
        for _ in range(60):
            if self.coeffs.deviation(x, side) <= limit_tol:
                return x
            x *= 2.0
        raise ValueError(f"coefficients do not reach their {side} limit (limit_tol={limit_tol})")

    def x_min(self, limit_tol: float = LIMIT_TOL) -> float:
        return self.x_cut("minus", limit_tol)

    def reference_frame(self, lam: float) -> lagrangian.LagrangianFrame:
        """The boundary plane crossings are counted against: Phi(lam) on the
        half line, the Dirichlet plane otherwise."""
        if self.domain == "half":
            return lagrangian.phi_frame(self.boundary, lam)
        return lagrangian.dirichlet_frame(self.n)


@dataclass(frozen=True)
class AsymptoticDecomposition:
    """Spectral data of the asymptotic pencil lam f1 + lam^2 f2 - V at a limit."""

    lam: float
    nus: np.ndarray
    mus: np.ndarray
    r_vectors: np.ndarray  # columns are the orthonormal eigenvectors


@dataclass
class AssumptionReport:
    """Per-assumption verdicts, the spectral-gap estimate, and any violations."""

    ok: dict
    gamma_estimate: Optional[float] = None
    details: List[str] = field(default_factory=list)

    @property
    def all_ok(self) -> bool:
        return all(v is not False for v in self.ok.values())


def _pencil_roots(f2, f1, K) -> np.ndarray:
    """All 2n roots lam of det(lam^2 f2 + lam f1 + K) = 0.

    The determinant is a polynomial of degree 2n in lam; we recover its
    coefficients by sampling at 2n+1 points and solving the Vandermonde
    system, then take companion roots.
    """
    n = K.shape[0]
    deg = 2 * n
    pts = np.linspace(-1.0, 1.0, deg + 1)
    vals = np.array([np.linalg.det(t * t * f2 + t * f1 + K) for t in pts])
    coeffs = np.polynomial.polynomial.polyfit(pts, vals, deg)
    # np.roots wants highest degree first
    return np.roots(coeffs[::-1])


def check_hyperbolicity(
    limits: Tuple[np.ndarray, np.ndarray, np.ndarray],
    mu_grid,
    gap_tol: float = GAP_TOL,
) -> AssumptionReport:
    """Verify the spectral gap of the constant-coefficient limit.

    For each mu on the grid, all roots lam of
    det(lam^2 f2 + lam f1 + (mu^2 I - V)) = 0 must satisfy
    Re lam <= -gap_tol.  Returns the largest real part seen as
    ``gamma_estimate``.
    """
    V, f1, f2 = (as_hermitian(M) for M in limits)
    n = V.shape[0]
    worst = -np.inf
    details: List[str] = []
    for mu in np.asarray(mu_grid, dtype=float):
        K = mu * mu * np.eye(n) - V
        try:
            roots = _pencil_roots(f2, f1, K)
        except np.linalg.LinAlgError:
            details.append(f"root finding failed at mu={mu:g}")
            return AssumptionReport(ok={"hyperbolic": False}, details=details)
        re_max = float(np.max(roots.real))
        if re_max > worst:
            worst = re_max
        if re_max > -gap_tol:
            details.append(f"root with Re lambda = {re_max:.6g} at mu={mu:g}")
    ok = worst <= -gap_tol
    return AssumptionReport(ok={"hyperbolic": ok}, gamma_estimate=worst, details=details)


def default_mu_grid(limits, lam_max: float, points: int = 200) -> np.ndarray:
    """[0, mu_max] grid; beyond mu_max the -mu^2 term dominates and roots move left."""
    V, f1, f2 = (np.asarray(M) for M in limits)
    mu_max = 2.0 * np.sqrt(
        np.linalg.norm(V) + lam_max * np.linalg.norm(f1) + lam_max ** 2 * np.linalg.norm(f2)
    )
    return np.linspace(0.0, mu_max, points)


def check_boundary_assumptions(
    b: BoundaryData, lambda_grid, hermitian_tol: float = 1e-10
) -> AssumptionReport:
    """Check phi(0) = 0, phi' < 0 on the real grid, and the Im-phi sign condition.

    For the linear family phi = lam C2 the sign condition is certified by
    C2 < 0; for custom phi it is reported as unverified (None), not failed.
    """
    ok = {}
    details: List[str] = []
    phi0 = np.asarray(b.phi(0.0))
    if np.linalg.norm(phi0) > 1e-10:
        ok["phi_zero"] = False
        details.append(f"phi(0) has norm {np.linalg.norm(phi0):.3e}")
    else:
        ok["phi_zero"] = True

    grid = np.asarray(lambda_grid, dtype=float)
    deriv_ok = True
    for lo, hi in zip(grid[:-1], grid[1:]):
        dphi = (np.asarray(b.phi(hi)) - np.asarray(b.phi(lo))) / (hi - lo)
        vals = herm_eig(as_hermitian(dphi, tol=1e-6)).values
        if vals[-1] >= 0:
            deriv_ok = False
            details.append(f"phi' not negative definite on [{lo:g}, {hi:g}]")
            break
    ok["phi_decreasing"] = deriv_ok

    if b.phi_kind == "linear":
        c2_vals = herm_eig(b.C2).values
        ok["im_phi_sign"] = bool(c2_vals[-1] < 0)
        if not ok["im_phi_sign"]:
            details.append("C2 is not negative definite")
    else:
        ok["im_phi_sign"] = None
        details.append("Im-phi sign condition unverified for custom phi")
    return AssumptionReport(ok=ok, details=details)


def lambda_max(p: PencilProblem, sample_grid=None, safety: float = 1.25) -> float:
    """Strict upper bound on the real eigenvalues, with a safety factor.

    Half line: lam <= sqrt(||f2||_inf |nu|)/delta with
    nu = -||V||_inf - ||c|| beta(eps), eps = 1/(2(||c||+1)), beta = 1/eps,
    maximized with the same bound built from the constant-coefficient limit.
    Whole line: lam <= sqrt(||f2||_inf ||V||_inf)/delta.
    """
    if sample_grid is None:
        lo = p.x_min()
        hi = p.right_endpoint() if p.domain != "whole" else p.x_cut("plus")
        sample_grid = np.linspace(lo, hi, 2001)
    grid = np.asarray(sample_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty sampling grid")
    v_norm = 0.0
    f2_norm = 0.0
    for x in grid:
        V, _, f2 = p.coeffs.evaluate(x)
        v_norm = max(v_norm, float(np.linalg.norm(V, 2)))
        f2_norm = max(f2_norm, float(np.linalg.norm(f2, 2)))
    delta = p.coeffs.delta
    if p.domain == "half":
        c_norm = float(np.linalg.norm(p.boundary.c, 2))
        beta_term = 2.0 * c_norm * (c_norm + 1.0)  # ||c|| * beta(eps) with beta = 1/eps
        nu = v_norm + beta_term
        bound = np.sqrt(f2_norm * nu) / delta
        Vm, _, f2m = p.coeffs.limits_minus
        nu_cc = float(np.linalg.norm(Vm, 2)) + beta_term
        bound_cc = np.sqrt(float(np.linalg.norm(f2m, 2)) * nu_cc) / delta
        bound = max(bound, bound_cc)
    else:
        bound = np.sqrt(f2_norm * v_norm) / delta
    return safety * float(bound)


def asymptotic_decomposition(
    p: PencilProblem, side: str, lam: float, pd_tol: float = 1e-10
) -> AsymptoticDecomposition:
    """Eigen-data (nu_j, r_j) of the asymptotic pencil at the chosen limit.

    All nu_j must be positive (hyperbolicity at this lambda); mu_j = +sqrt(nu_j)
    are the growth rates of the unstable directions.
    """
    S = as_hermitian(p.coeffs.S_limit(side, lam))
    dec = herm_eig(S)
    if dec.values[0] <= pd_tol:
        raise HyperbolicityLostError(
            f"asymptotic pencil eigenvalue {dec.values[0]:.3e} <= 0 at lambda={lam:g}"
        )
    return AsymptoticDecomposition(
        lam=lam, nus=dec.values, mus=np.sqrt(dec.values), r_vectors=dec.vectors
    )


def unstable_frame_at_minus_infinity(
    p: PencilProblem, lam: float
) -> lagrangian.LagrangianFrame:
    """Frame with columns (r_j; mu_j r_j): the plane of solutions decaying
    as x -> -infinity."""
    dec = asymptotic_decomposition(p, "minus", lam)
    X = dec.r_vectors.astype(complex)
    Y = X * dec.mus
    return lagrangian.LagrangianFrame(X=X, Y=Y)
