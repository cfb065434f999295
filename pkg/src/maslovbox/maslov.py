"""Shelf indices, the Maslov box, and the spectral-count formulas.

The closed rectangular contour in the (x, lambda) plane has four shelves:
left and right are x-paths at the two lambda endpoints, the top is a
lambda-path at the right end of the x-window, and the bottom reduces to
algebra because the frame at the left end of the x-window is the known
asymptotic plane.  Homotopy invariance forces the signed crossing counts
around the contour to cancel, which is both a consistency check and the
mechanism that converts boundary data into an eigenvalue count.
"""
from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .frameflow import (
    ConjugatePoint,
    FramePath,
    IntegratorOptions,
    PARAM_TOL,
    detect_crossings,
    propagate_in_lambda,
    propagate_in_x,
)
from .lagrangian import ANGLE_TOL, intersection_dim
from .linalg import morse_index, sqrt_pd
from .pencil import PencilProblem, unstable_frame_at_minus_infinity


class InconsistentBoxError(RuntimeError):
    """Shelf indices fail to cancel; carries the offending report."""

    def __init__(self, message: str, report: "SpectralCountReport"):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class ShelfResult:
    shelf: str  # "top" | "right" | "bottom" | "left"
    maslov: int
    crossings: List[ConjugatePoint]


@dataclass(frozen=True)
class SpectralCountReport:
    """Everything a count run produced, including the box diagnostic."""

    lam: float
    N: int
    shelf_results: List[ShelfResult]
    morse_correction: Tuple[int, int]
    kernel_dim_at_lambda: int
    box_sum: Optional[int]
    oracle_count: Optional[int] = None
    notes: List[str] = field(default_factory=list)

    def shelf(self, name: str) -> Optional[ShelfResult]:
        for s in self.shelf_results:
            if s.shelf == name:
                return s
        return None


def shelf_index(
    path: FramePath,
    angle_tol: float = ANGLE_TOL,
    param_tol: float = PARAM_TOL,
    shelf: str = "left",
) -> ShelfResult:
    """Signed crossing count of a traced path under the arrival/departure rule.

    An interior transversal crossing contributes direction * multiplicity.
    A strand resting at the level at the start of the path counts only if it
    departs clockwise (negative); one resting at the end counts only if it
    arrived counterclockwise (positive).  Catenated shelves therefore never
    count a shared corner twice.
    """
    crossings = detect_crossings(path, angle_tol=angle_tol, param_tol=param_tol)
    t0, t1 = path.params[0], path.params[-1]
    near = 10.0 * max(param_tol, 1e-12 * abs(t1 - t0))
    total = 0
    for cp in crossings:
        if abs(cp.param - t0) <= near:
            if cp.direction < 0:
                total += cp.direction * cp.multiplicity
        elif abs(cp.param - t1) <= near:
            if cp.direction > 0:
                total += cp.direction * cp.multiplicity
        else:
            total += cp.direction * cp.multiplicity
    return ShelfResult(shelf=shelf, maslov=total, crossings=crossings)


def bottom_shelf_correction(p: PencilProblem, lam: float) -> Tuple[int, int]:
    """(negative, zero) eigenvalue counts of sqrt(lam f1- + lam^2 f2- - V-) - c - phi(lam)."""
    if p.domain != "half":
        raise ValueError("the algebraic bottom correction applies to half-line problems")
    root = sqrt_pd(p.coeffs.S_limit("minus", lam))
    M = root - p.boundary.c_plus_phi(lam)
    return morse_index(M)


def _left_path(
    p: PencilProblem, lam: float, opts: IntegratorOptions,
    x_to: Optional[float] = None, x_scale: float = 1.0,
) -> FramePath:
    seed = unstable_frame_at_minus_infinity(p, lam)
    if x_to is None:
        x_to = p.right_endpoint()
        if p.domain == "whole":
            x_to = x_to * x_scale
    return propagate_in_x(p, lam, p.x_min() * x_scale, x_to, seed, opts)


def spectral_count_halfline(
    p: PencilProblem, lam: float, opts: Optional[IntegratorOptions] = None,
    x_scale: float = 1.0,
) -> SpectralCountReport:
    """Count of real eigenvalues above ``lam`` for a half-line problem.

    N = -(x-path index against the Robin plane) - dim of the intersection at
    x = 0, plus the negative and zero counts of the algebraic boundary
    comparison at the asymptotic limit.
    """
    if p.domain != "half":
        raise ValueError("problem is not on the half line")
    opts = opts or IntegratorOptions()
    path = _left_path(p, lam, opts, x_scale=x_scale)
    left = shelf_index(path, shelf="left")
    ker = intersection_dim(path.frames[-1], p.reference_frame(lam))
    n_neg, n_zero = bottom_shelf_correction(p, lam)
    N = -left.maslov - ker + n_neg + n_zero
    return SpectralCountReport(
        lam=lam, N=N, shelf_results=[left], morse_correction=(n_neg, n_zero),
        kernel_dim_at_lambda=ker, box_sum=None,
    )


def _interior_multiplicity(path: FramePath, include_right_end: bool = False) -> int:
    """Total multiplicity of conjugate points, endpoints excluded by default."""
    t0, t1 = path.params[0], path.params[-1]
    near = 10.0 * max(PARAM_TOL, 1e-12 * abs(t1 - t0))
    total = 0
    for cp in detect_crossings(path):
        at_start = abs(cp.param - t0) <= near
        at_end = abs(cp.param - t1) <= near
        if at_start or (at_end and not include_right_end):
            continue
        total += cp.multiplicity
    return total


def spectral_count_wholeline(
    p: PencilProblem, lam: float, opts: Optional[IntegratorOptions] = None,
    x_scale: float = 1.0,
) -> SpectralCountReport:
    """Whole-line count: total multiplicity of Dirichlet conjugate points.

    The report notes whether doubling the right truncation leaves the count
    unchanged (it must, once the coefficients have reached their limit).
    """
    if p.domain != "whole":
        raise ValueError("problem is not on the whole line")
    opts = opts or IntegratorOptions()
    path = _left_path(p, lam, opts, x_scale=x_scale)
    left = shelf_index(path, shelf="left")
    N = _interior_multiplicity(path)
    notes = []
    x_max = p.right_endpoint() * x_scale
    tail = propagate_in_x(p, lam, x_max, 2.0 * x_max, path.frames[-1], opts)
    extra = _interior_multiplicity(tail, include_right_end=True)
    if extra:
        notes.append(f"count changed by {extra} when doubling the right truncation")
    return SpectralCountReport(
        lam=lam, N=N, shelf_results=[left], morse_correction=(0, 0),
        kernel_dim_at_lambda=intersection_dim(path.frames[-1], p.reference_frame(lam)),
        box_sum=None, notes=notes,
    )


def spectral_count_truncated(
    p: PencilProblem, lam: float, opts: Optional[IntegratorOptions] = None,
    x_scale: float = 1.0,
) -> SpectralCountReport:
    """Count on (-inf, L] with a Dirichlet condition at L; the sum is open at L."""
    if p.domain != "truncated":
        raise ValueError("problem is not truncated")
    opts = opts or IntegratorOptions()
    path = _left_path(p, lam, opts, x_scale=x_scale)
    left = shelf_index(path, shelf="left")
    N = _interior_multiplicity(path)
    return SpectralCountReport(
        lam=lam, N=N, shelf_results=[left], morse_correction=(0, 0),
        kernel_dim_at_lambda=intersection_dim(path.frames[-1], p.reference_frame(lam)),
        box_sum=None,
    )


def spectral_count(
    p: PencilProblem, lam: float, opts: Optional[IntegratorOptions] = None,
    x_scale: float = 1.0,
) -> SpectralCountReport:
    if p.domain == "half":
        return spectral_count_halfline(p, lam, opts, x_scale)
    if p.domain == "whole":
        return spectral_count_wholeline(p, lam, opts, x_scale)
    return spectral_count_truncated(p, lam, opts, x_scale)


def _bottom_forward(p: PencilProblem, lambda_lo: float, lambda_hi: float) -> int:
    """Signed bottom-shelf index for increasing lambda.

    On the half line the asymptotic plane meets the Robin plane where the
    comparison matrix M(lambda) is singular; its eigenvalue curves increase
    strictly, so the signed count is the drop in the negative index.  On the
    whole line the asymptotic plane never meets the Dirichlet plane.
    """
    if p.domain != "half":
        return 0
    lo_neg, _ = bottom_shelf_correction(p, lambda_lo)
    hi_neg, _ = bottom_shelf_correction(p, lambda_hi)
    return lo_neg - hi_neg


def maslov_box(
    p: PencilProblem,
    lambda_lo: float,
    lambda_hi: float,
    opts: Optional[IntegratorOptions] = None,
    initial_samples: int = 17,
    _retry: bool = True,
) -> SpectralCountReport:
    """All four shelves plus the zero-sum diagnostic.

    Traversal: left shelf forward in x at lambda_lo, top forward in lambda,
    then right and bottom entered with reversed orientation, so
    box_sum = left + top - right - bottom.  A nonzero sum means crossings
    were missed; tolerances are halved once before giving up.
    """
    if not lambda_lo <= lambda_hi:
        raise ValueError("need lambda_lo <= lambda_hi")
    opts = opts or IntegratorOptions()
    # On the whole line the rectangle's right edge sits at x = 0, inside the
    # support of the potential: the lambda-window over which a top-shelf
    # phase sweeps through the crossing level shrinks like exp(-2 mu d) with
    # d the distance from the edge to the support, so placing the edge at
    # the truncation point would hide every winding between samples.  The
    # zero-sum identity holds for any rectangle, so this loses nothing.
    x_right = 0.0 if p.domain == "whole" else p.right_endpoint()

    left_path = _left_path(p, lambda_lo, opts, x_to=x_right)
    left = shelf_index(left_path, shelf="left")
    if lambda_hi == lambda_lo:
        right = ShelfResult(shelf="right", maslov=left.maslov, crossings=left.crossings)
    else:
        right = shelf_index(_left_path(p, lambda_hi, opts, x_to=x_right), shelf="right")
    top = shelf_index(
        propagate_in_lambda(p, x_right, lambda_lo, lambda_hi, opts,
                            initial_samples=initial_samples),
        shelf="top",
    )
    bottom = ShelfResult(shelf="bottom", maslov=_bottom_forward(p, lambda_lo, lambda_hi),
                         crossings=[])
    box_sum = left.maslov + top.maslov - right.maslov - bottom.maslov

    ker = intersection_dim(left_path.frames[-1], p.reference_frame(lambda_lo))
    if p.domain == "half":
        n_neg, n_zero = bottom_shelf_correction(p, lambda_lo)
        N = -left.maslov - ker + n_neg + n_zero
    else:
        n_neg, n_zero = 0, 0
        N = _interior_multiplicity(left_path)
        if x_right < p.right_endpoint():
            ext = propagate_in_x(p, lambda_lo, x_right, p.right_endpoint(),
                                 left_path.frames[-1], opts)
            N += _interior_multiplicity(ext) + ker  # ker covers a hit at the seam
    report = SpectralCountReport(
        lam=lambda_lo, N=N, shelf_results=[top, right, bottom, left],
        morse_correction=(n_neg, n_zero), kernel_dim_at_lambda=ker, box_sum=box_sum,
    )
    if box_sum != 0:
        if _retry:
            return maslov_box(p, lambda_lo, lambda_hi, opts.halved(),
                              initial_samples=2 * initial_samples, _retry=False)
        raise InconsistentBoxError(
            f"box sum {box_sum} != 0 (top={top.maslov}, right={right.maslov}, "
            f"bottom={bottom.maslov}, left={left.maslov})",
            report,
        )
    return report


def _curve_points(p: PencilProblem, lam: float, opts: IntegratorOptions):
    """Sorted conjugate-point locations of the x-path at one lambda."""
    path = _left_path(p, lam, opts)
    t0, t1 = path.params[0], path.params[-1]
    near = 10.0 * max(PARAM_TOL, 1e-12 * abs(t1 - t0))
    xs: List[float] = []
    for cp in detect_crossings(path):
        if abs(cp.param - t0) <= near or abs(cp.param - t1) <= near:
            continue
        xs.extend([cp.param] * cp.multiplicity)
    return sorted(xs)


def eigenvalue_curves(
    p: PencilProblem,
    lambda_grid: Sequence[float],
    opts: Optional[IntegratorOptions] = None,
    refine_levels: int = 0,
) -> List[Tuple[float, int, float]]:
    """Conjugate-point loci x*(lambda): rows (lambda, strand_index, x_star).

    Per-lambda failures leave a gap rather than aborting the sweep.  With
    ``refine_levels`` > 0, midpoints are inserted wherever the point count
    changes between neighbouring grid values (strand births).  Sweeps run
    concurrently over lambda; set MASLOVBOX_THREADS to cap the pool.
    """
    opts = opts or IntegratorOptions()
    grid = sorted(float(v) for v in lambda_grid)
    results = {}

    def work(lam: float):
        try:
            return lam, _curve_points(p, lam, opts)
        except Exception as exc:  # recorded as a gap
            return lam, exc

    threads = int(os.environ.get("MASLOVBOX_THREADS", "4") or "1")
    for level in range(refine_levels + 1):
        todo = [lam for lam in grid if lam not in results]
        if threads > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                for lam, pts in pool.map(work, todo):
                    results[lam] = pts
        else:
            for lam in todo:
                results[lam] = work(lam)[1]
        if level == refine_levels:
            break
        good = [lam for lam in grid if not isinstance(results[lam], Exception)]
        inserts = [
            0.5 * (a + b)
            for a, b in zip(good[:-1], good[1:])
            if len(results[a]) != len(results[b])
        ]
        if not inserts:
            break
        grid = sorted(set(grid) | set(inserts))

    rows: List[Tuple[float, int, float]] = []
    for lam in grid:
        pts = results[lam]
        if isinstance(pts, Exception):
            continue
        for idx, x_star in enumerate(pts):
            rows.append((lam, idx, x_star))
    return rows


def curves_to_csv(rows: Sequence[Tuple[float, int, float]], fileobj) -> None:
    writer = csv.writer(fileobj)
    writer.writerow(["lambda", "strand_index", "x_star"])
    for lam, idx, x_star in rows:
        writer.writerow([f"{lam:.12g}", idx, f"{x_star:.12g}"])
