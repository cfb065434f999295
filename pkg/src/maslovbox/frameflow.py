"""Propagation of the unstable Lagrangian frame and crossing detection.

Frames are advanced in x at fixed lambda (or re-seeded and advanced for each
lambda at a fixed x) with an adaptive Runge-Kutta 5(4) stepper.  Exponential
growth is removed by a scalar rate shift plus thin-QR renormalization; both
act by right or scalar multiplication, so the Lagrangian plane, and hence the
unitary detector W~, is untouched.  Each path carries a continuously tracked
set of eigenphases of W~ relative to a reference plane; conjugate points are
the parameter values where a phase strand passes an odd multiple of pi.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import RK45
from scipy.optimize import linear_sum_assignment

from .lagrangian import (
    ANGLE_TOL,
    UNITARY_TOL,
    LagrangianFrame,
    UnitaryTrace,
    dirichlet_frame,
    orthonormalized,
    unitarity_defect,
    w_of,
    w_relative,
)
from .pencil import PencilProblem, asymptotic_decomposition, unstable_frame_at_minus_infinity

PARAM_TOL = 1e-8
MAX_PHASE_JUMP = 0.45 * np.pi
FRAME_NORM_CAP = 1e6
LAG_DEFECT_CAP = 1e-8


class IntegrationError(RuntimeError):
    """Step-size underflow or loss of the Lagrangian invariant along a path."""


class NonTransversalCrossingError(RuntimeError):
    """A phase strand stalls at the crossing level over a parameter interval."""


@dataclass(frozen=True)
class IntegratorOptions:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = np.inf
    renorm_every: int = 5

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("integrator tolerances must be positive")

    def halved(self) -> "IntegratorOptions":
        return IntegratorOptions(
            rel_tol=0.5 * self.rel_tol,
            abs_tol=0.5 * self.abs_tol,
            max_step=self.max_step,
            renorm_every=self.renorm_every,
        )


@dataclass(frozen=True)
class ConjugatePoint:
    """A detected intersection: where, how many strands, which way."""

    param: float
    multiplicity: int
    direction: int
    kind: str  # "in_x" or "in_lambda"


@dataclass
class FramePath:
    """A sampled path of Lagrangian frames with a continuous phase trace.

    ``frame_at`` evaluates the frame at an arbitrary parameter inside the
    range (dense interpolation for x-paths, re-propagation for lambda-paths);
    ``reference_at`` gives the plane that W~ is measured against.
    """

    direction: str  # "in_x" | "in_lambda"
    fixed: float  # the frozen coordinate: lambda for in_x paths, x for in_lambda
    params: List[float]
    frames: List[LagrangianFrame]
    traces: List[UnitaryTrace]
    frame_at: Callable[[float], LagrangianFrame]
    reference_at: Callable[[float], LagrangianFrame]
    problem: Optional[PencilProblem] = None

    @property
    def n(self) -> int:
        return self.frames[0].n

    def max_lagrangian_defect(self) -> float:
        return max(f.lagrangian_defect() for f in self.frames)

    def max_unitarity_defect(self) -> float:
        return max(unitarity_defect(tr.W) for tr in self.traces)

    def write_csv(self, fileobj) -> None:
        """Columns: param, phase_1..phase_n, lagrangian_defect."""
        writer = csv.writer(fileobj)
        n = self.n
        writer.writerow(["param"] + [f"phase_{j + 1}" for j in range(n)] + ["lagrangian_defect"])
        for frame, tr in zip(self.frames, self.traces):
            writer.writerow(
                [f"{tr.param:.12g}"]
                + [f"{ph:.12g}" for ph in tr.phases]
                + [f"{frame.lagrangian_defect():.3e}"]
            )


def _wrap(t):
    """Map angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(t), 2.0 * np.pi)


def _pack(Z: np.ndarray) -> np.ndarray:
    return np.concatenate([Z.real.ravel(), Z.imag.ravel()])


def _unpack(y: np.ndarray, n: int) -> np.ndarray:
    half = y.size // 2
    return (y[:half] + 1j * y[half:]).reshape(2 * n, n)


def _growth_shift(p: PencilProblem, lam: float) -> float:
    """Mean unstable growth rate; subtracting it rescales every frame column
    by the same scalar factor, leaving the plane unchanged."""
    try:
        dec = asymptotic_decomposition(p, "minus", lam)
    except Exception:
        return 0.0
    return float(np.mean(dec.mus))


def _lagrangian_projected(frame: LagrangianFrame) -> LagrangianFrame:
    """Snap a slightly drifted frame back onto the Lagrangian manifold.

    The plane is Lagrangian exactly when (X+iY)(X-iY)^{-1} is unitary, so
    replacing that matrix by its nearest unitary (polar factor) removes the
    drift while moving the plane by no more than the drift itself.
    """
    B = frame.X - 1j * frame.Y
    A = np.linalg.solve(B.conj().T, (frame.X + 1j * frame.Y).conj().T).conj().T
    U, _, Vh = np.linalg.svd(A)
    What = (U @ Vh) @ B
    return LagrangianFrame(X=0.5 * (What + B), Y=0.5j * (B - What))


def _checked_frame(Z: np.ndarray, n: int, where: str) -> LagrangianFrame:
    frame = orthonormalized(LagrangianFrame(X=Z[:n], Y=Z[n:]))
    defect = frame.lagrangian_defect()
    if not np.isfinite(defect) or defect > 100.0 * LAG_DEFECT_CAP:
        raise IntegrationError(f"Lagrangian defect {defect:.3e} at {where}")
    if defect > 1e-11:
        frame = orthonormalized(_lagrangian_projected(frame))
        defect = frame.lagrangian_defect()
        if defect > LAG_DEFECT_CAP:
            raise IntegrationError(f"Lagrangian defect {defect:.3e} at {where}")
    return frame


def propagate_in_x(
    p: PencilProblem,
    lam: float,
    x_from: float,
    x_to: float,
    seed: LagrangianFrame,
    opts: Optional[IntegratorOptions] = None,
    reference: Optional[LagrangianFrame] = None,
) -> FramePath:
    """Advance the frame from x_from to x_to at fixed lambda.

    The columns follow y' = (A(x, lam) - shift I) y with
    A = [[0, I], [lam f1 + lam^2 f2 - V, 0]]; a thin-QR renormalization is
    applied every ``renorm_every`` accepted steps (and whenever the state norm
    exceeds 1e6).  Dense per-step interpolants back ``frame_at`` so crossing
    locations can be refined without re-integrating.
    """
    opts = opts or IntegratorOptions()
    n = p.n
    if reference is None:
        reference = p.reference_frame(lam)
    shift = _growth_shift(p, lam)
    frame0 = _checked_frame(seed.stacked(), n, f"x={x_from:g}")

    if x_from == x_to:
        return _finish_path(
            "in_x", lam, [x_from], [frame0], lambda t: frame0, lambda t: reference, p
        )

    def rhs(x, y):
        Z = _unpack(y, n)
        S = p.coeffs.S(x, lam)
        out = np.empty_like(Z)
        out[:n] = Z[n:] - shift * Z[:n]
        out[n:] = S @ Z[:n] - shift * Z[n:]
        return _pack(out)

    segments: List[Tuple[float, float, object]] = []
    params = [x_from]
    frames = [frame0]

    rk = RK45(rhs, x_from, _pack(frame0.stacked()), x_to,
              rtol=opts.rel_tol, atol=opts.abs_tol, max_step=opts.max_step)
    since_renorm = 0
    while rk.status == "running":
        rk.step()
        if rk.status == "failed":
            raise IntegrationError(f"step-size underflow near x={rk.t:g} (lambda={lam:g})")
        segments.append((rk.t_old, rk.t, rk.dense_output()))
        since_renorm += 1
        Z = _unpack(rk.y, n)
        norm = float(np.linalg.norm(Z))
        done = rk.status == "finished"
        if done or since_renorm >= opts.renorm_every or norm > FRAME_NORM_CAP:
            frame = _checked_frame(Z, n, f"x={rk.t:g}")
            params.append(rk.t)
            frames.append(frame)
            if not done:
                # allow the restart step to grow: reusing the last accepted h
                # verbatim would freeze the step size at frequent cadences
                last_h = abs(rk.t - rk.t_old)
                first_step = min(10.0 * last_h, abs(x_to - rk.t)) or None
                rk = RK45(rhs, rk.t, _pack(frame.stacked()), x_to,
                          rtol=opts.rel_tol, atol=opts.abs_tol,
                          max_step=opts.max_step, first_step=first_step)
            since_renorm = 0

    lo, hi = min(x_from, x_to), max(x_from, x_to)

    def frame_at(t: float) -> LagrangianFrame:
        if not (lo <= t <= hi):
            raise ValueError(f"x={t:g} outside [{lo:g}, {hi:g}]")
        for a, b, dense in segments:
            if min(a, b) - 1e-12 <= t <= max(a, b) + 1e-12:
                return _checked_frame(_unpack(dense(t), n), n, f"x={t:g}")
        return frame0

    return _finish_path("in_x", lam, params, frames, frame_at, lambda t: reference, p)


def propagate_in_lambda(
    p: PencilProblem,
    x_fixed: float,
    lambda_from: float,
    lambda_to: float,
    opts: Optional[IntegratorOptions] = None,
    initial_samples: int = 9,
) -> FramePath:
    """Path of frames E^u(x_fixed, lambda) over a lambda interval.

    Each sample re-seeds the asymptotic unstable frame at x_min and
    propagates to x_fixed; the lambda grid starts uniform and is refined
    wherever the phase-continuity contract fails.
    """
    opts = opts or IntegratorOptions()
    x_start = p.x_min()
    cache = {}

    def frame_at(lam: float) -> LagrangianFrame:
        if lam not in cache:
            seed = unstable_frame_at_minus_infinity(p, lam)
            if x_fixed == x_start:
                cache[lam] = seed
            else:
                sub = propagate_in_x(p, lam, x_start, x_fixed, seed, opts)
                cache[lam] = sub.frames[-1]
        return cache[lam]

    def reference_at(lam: float) -> LagrangianFrame:
        return p.reference_frame(lam)

    if lambda_from == lambda_to:
        grid = [lambda_from]
    else:
        grid = list(np.linspace(lambda_from, lambda_to, max(2, initial_samples)))
    frames = [frame_at(lam) for lam in grid]
    return _finish_path("in_lambda", x_fixed, grid, frames, frame_at, reference_at, p)


def _matched_phases(prev: np.ndarray, W: np.ndarray, monotone: bool = False) -> np.ndarray:
    """Continue the unwrapped phase vector ``prev`` through the unitary ``W``.

    Eigenphases of W are assigned to strands by minimal circular distance
    (Hungarian matching), then unwrapped onto the previous values.  With
    ``monotone`` the increments are forced into [-0.75, 2 pi - 0.75): used
    for phases known to increase, where a seemingly backward step actually
    hides a forward winding.
    """
    angles = np.angle(np.linalg.eigvals(W))
    diff = _wrap(prev[:, None] - angles[None, :])
    _, cols = linear_sum_assignment(np.abs(diff))
    step = -diff[np.arange(prev.size), cols]
    if monotone:
        step = np.where(step < -0.75, step + 2.0 * np.pi, step)
    return prev + step


def _dense_reference_phases(reference_at, t_lo, t_hi, points=4097):
    """Unwrapped eigenphases of the reference plane on a dense grid.

    The reference is algebraic, so this costs no ODE work, and a grid this
    fine cannot skip a winding: it is the ground truth for how fast the
    reference rotates between two path samples.
    """
    grid = np.linspace(t_lo, t_hi, points)
    th = None
    rows = []
    for t in grid:
        Wt = w_of(reference_at(t))
        if th is None:
            th = np.sort(np.angle(np.linalg.eigvals(Wt)))
        else:
            th = _matched_phases(th, Wt)
        rows.append(th.copy())
    return grid, np.vstack(rows)


def _ref_lookup(grid, table, t):
    """Interpolated unwrapped reference phases at parameter t."""
    j = int(np.clip(np.searchsorted(grid, t), 1, len(grid) - 1))
    w = (t - grid[j - 1]) / (grid[j] - grid[j - 1])
    return (1.0 - w) * table[j - 1] + w * table[j]


def _finish_path(direction, fixed, params, frames, frame_at, reference_at, problem) -> FramePath:
    """Build the continuous phase trace, refining the sampling where needed.

    For x-paths the samples come from the integrator and are already dense;
    the only criterion is that relative phases move by less than pi/2 per
    interval.  Lambda-paths are harder: both the frame-vs-Dirichlet phases
    (strictly increasing in lambda) and the reference phases can sweep
    through full turns between coarse samples, leaving the relative phases
    looking almost still.  So lambda-paths additionally track those two
    families, take the reference's true winding from a dense algebraic
    table, unwrap the monotone family with a one-sided rule, and cross-check
    the relative increments against the determinant identity
    sum(rel) = sum(frame) - sum(ref) + const.
    """
    params = list(params)
    frames = list(frames)
    increasing = len(params) < 2 or params[-1] >= params[0]
    span = abs(params[-1] - params[0]) if len(params) > 1 else 1.0
    min_sep = max(1e-12, 1e-10 * span)
    guarded = direction == "in_lambda" and len(params) > 1

    ref_grid = ref_table = None
    if guarded:
        ref_grid, ref_table = _dense_reference_phases(reference_at, params[0], params[-1])

    W0 = w_relative(frames[0], reference_at(params[0]))
    _check_unitary(W0, params[0])
    traces = [UnitaryTrace(param=params[0], W=W0,
                           phases=np.sort(np.angle(np.linalg.eigvals(W0))))]
    if guarded:
        th1 = [np.sort(np.angle(np.linalg.eigvals(w_of(frames[0]))))]
        th2 = [_ref_lookup(ref_grid, ref_table, params[0])]

    i = 0
    while i < len(params) - 1:
        t_next = params[i + 1]
        W = w_relative(frames[i + 1], reference_at(t_next))
        _check_unitary(W, t_next)
        phases = _matched_phases(traces[i].phases, W)
        rel_jump = float(np.max(np.abs(phases - traces[i].phases)))
        ok = rel_jump < MAX_PHASE_JUMP
        if guarded:
            th1_next = _matched_phases(th1[i], w_of(frames[i + 1]), monotone=True)
            th2_next = _ref_lookup(ref_grid, ref_table, t_next)
            ok = ok and float(np.max(np.abs(th1_next - th1[i]))) < MAX_PHASE_JUMP
            ok = ok and float(np.max(np.abs(th2_next - th2[i]))) < MAX_PHASE_JUMP
            if ok:
                # determinant consistency: collective winding must agree
                mismatch = (np.sum(phases - traces[i].phases)
                            - (np.sum(th1_next - th1[i]) - np.sum(th2_next - th2[i])))
                ok = abs(mismatch) < np.pi
        gap = abs(t_next - params[i])
        if ok or gap <= min_sep:
            traces.append(UnitaryTrace(param=t_next, W=W, phases=phases))
            if guarded:
                th1.append(th1_next)
                th2.append(th2_next)
            i += 1
        else:
            t_mid = 0.5 * (params[i] + t_next)
            params.insert(i + 1, t_mid)
            frames.insert(i + 1, frame_at(t_mid))

    if len(params) > 1:
        deltas = np.diff(params)
        if not (np.all(deltas > 0) if increasing else np.all(deltas < 0)):
            raise IntegrationError("path parameters are not strictly monotone")
    return FramePath(
        direction=direction, fixed=fixed, params=params, frames=frames,
        traces=traces, frame_at=frame_at, reference_at=reference_at, problem=problem,
    )


def _check_unitary(W: np.ndarray, where: float) -> None:
    d = unitarity_defect(W)
    if not np.isfinite(d) or d > UNITARY_TOL:
        raise IntegrationError(f"detector not unitary (defect {d:.3e}) at param {where:g}")


def crossing_form(
    frame: LagrangianFrame,
    frame_rate: np.ndarray,
    w: np.ndarray,
    reference: Optional[LagrangianFrame] = None,
    kernel_tol: float = 1e-6,
) -> float:
    """Quadratic form whose sign is the rotation sense at a conjugate point.

    Q(w) = 2 Re < (X-iY)^{-*} (X*Y' - Y*X') (X-iY)^{-1} w, w >; positive
    means counterclockwise.  ``w`` must lie in ker(W~ + I) of the detector
    against ``reference`` (Dirichlet when omitted).
    """
    n = frame.n
    if reference is None:
        reference = dirichlet_frame(n)
    w = np.asarray(w, dtype=complex).reshape(n)
    nw = np.linalg.norm(w)
    if nw == 0:
        raise ValueError("kernel vector is zero")
    W = w_relative(frame, reference)
    resid = np.linalg.norm((W + np.eye(n)) @ w) / nw
    if resid > kernel_tol:
        raise ValueError(f"w is not in ker(W~ + I): residual {resid:.3e}")
    rate = np.asarray(frame_rate, dtype=complex).reshape(2 * n, n)
    Xd, Yd = rate[:n], rate[n:]
    M = frame.X.conj().T @ Yd - frame.Y.conj().T @ Xd
    v = np.linalg.solve(frame.X - 1j * frame.Y, w)
    return float(2.0 * np.real(v.conj() @ (M @ v)))


def _nearest_level(u: float) -> float:
    """Closest odd multiple of pi."""
    return np.pi + 2.0 * np.pi * np.round((u - np.pi) / (2.0 * np.pi))


def detect_crossings(
    path: FramePath,
    angle_tol: float = ANGLE_TOL,
    param_tol: float = PARAM_TOL,
) -> List[ConjugatePoint]:
    """Conjugate points of a traced path: strand phases passing pi mod 2pi.

    Interior sign changes are refined by bisection on the offending strand
    (using the path's dense frame evaluator); strands resting at the level at
    either endpoint are reported as zero-width points at that endpoint, so
    index assembly can apply its arrival/departure bookkeeping.  A strand
    that stays at the level across an extended interval raises
    :class:`NonTransversalCrossingError`.
    """
    m = len(path.params)
    n = path.n
    if m < 2:
        return []
    U = np.vstack([tr.phases for tr in path.traces])  # shape (m, n)
    t = np.asarray(path.params)
    span = abs(t[-1] - t[0])
    stall_gap = max(1e-4 * span, 1000.0 * param_tol)

    raw: List[Tuple[float, int, bool]] = []  # (param, direction, at_endpoint)
    for strand in range(n):
        u = U[:, strand]
        lo = np.floor((u.min() - np.pi) / (2 * np.pi))
        hi = np.ceil((u.max() - np.pi) / (2 * np.pi))
        for k in np.arange(lo, hi + 1):
            level = np.pi + 2.0 * np.pi * k
            s = u - level
            z = np.where(np.abs(s) <= angle_tol, 0, np.sign(s)).astype(int)
            for a in range(m - 1):
                if z[a] == 0 and z[a + 1] == 0 and abs(t[a + 1] - t[a]) > stall_gap:
                    raise NonTransversalCrossingError(
                        f"strand {strand} rests at the crossing level over "
                        f"[{t[a]:g}, {t[a + 1]:g}]"
                    )
            # endpoint residences
            if z[0] == 0:
                nz = np.nonzero(z)[0]
                if nz.size:
                    raw.append((t[0], int(z[nz[0]]), True))
            if z[-1] == 0:
                nz = np.nonzero(z)[0]
                if nz.size:
                    raw.append((t[-1], int(-z[nz[-1]]), True))
            # interior touches sitting exactly on the level at one sample
            for a in range(1, m - 1):
                if z[a] == 0 and z[a - 1] != 0 and z[a + 1] != 0 and z[a - 1] != z[a + 1]:
                    raw.append((t[a], int(z[a + 1]), False))
            # transversal sign changes between samples
            for a in range(m - 1):
                if z[a] != 0 and z[a + 1] != 0 and z[a] != z[a + 1]:
                    t_star = _refine_crossing(
                        path, a, strand, level, angle_tol, param_tol
                    )
                    raw.append((t_star, int(z[a + 1]), False))

    return _cluster(raw, path, param_tol, span)


def _refine_crossing(path, a, strand, level, angle_tol, param_tol) -> float:
    """Bisect the bracketing interval on the strand phase minus level."""
    t_lo, t_hi = path.params[a], path.params[a + 1]
    anchor = path.traces[a].phases

    def phase_at(t: float) -> float:
        frame = path.frame_at(t)
        W = w_relative(frame, path.reference_at(t))
        return _matched_phases(anchor, W)[strand]

    s_lo = path.traces[a].phases[strand] - level
    for _ in range(200):
        if abs(t_hi - t_lo) <= param_tol * max(1.0, abs(t_lo)):
            break
        t_mid = 0.5 * (t_lo + t_hi)
        s_mid = phase_at(t_mid) - level
        if s_mid == 0.0:
            return t_mid
        if np.sign(s_mid) == np.sign(s_lo):
            t_lo, s_lo = t_mid, s_mid
        else:
            t_hi = t_mid
    return 0.5 * (t_lo + t_hi)


def _cluster(raw, path, param_tol, span) -> List[ConjugatePoint]:
    """Merge per-strand crossings that coincide in parameter and direction."""
    if not raw:
        return []
    window = max(100.0 * param_tol, 1e-7 * max(span, 1.0))
    out: List[ConjugatePoint] = []
    for endpointish in (False, True):
        items = sorted((r for r in raw if r[2] == endpointish), key=lambda r: (r[0], r[1]))
        group: List[Tuple[float, int, bool]] = []
        for item in items + [(np.inf, 0, endpointish)]:
            if group and (abs(item[0] - group[0][0]) > window or item[1] != group[0][1]):
                out.append(
                    ConjugatePoint(
                        param=float(np.mean([g[0] for g in group])),
                        multiplicity=len(group),
                        direction=group[0][1],
                        kind=path.direction,
                    )
                )
                group = []
            if np.isfinite(item[0]):
                group.append(item)
    return sorted(out, key=lambda cp: cp.param)
