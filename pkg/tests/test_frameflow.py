import io

import numpy as np
import pytest

from maslovbox.frameflow import (
    IntegratorOptions,
    crossing_form,
    detect_crossings,
    propagate_in_lambda,
    propagate_in_x,
)
from maslovbox.lagrangian import (
    LagrangianFrame,
    dirichlet_frame,
    intersection_dim,
    w_relative,
)
from maslovbox.pencil import unstable_frame_at_minus_infinity
from maslovbox.problems import ROBIN_CONSTANT_EIGENVALUE, builtin_problem


def test_constant_problem_frame_is_invariant():
    """For constant coefficients the asymptotic plane solves the flow, so the
    path never crosses the Dirichlet plane and the detector sits still."""
    p = builtin_problem("constant")
    seed = unstable_frame_at_minus_infinity(p, 0.0)
    path = propagate_in_x(p, 0.0, -8.0, 8.0, seed)
    assert detect_crossings(path) == []
    ph0 = path.traces[0].phases
    for tr in path.traces:
        assert np.max(np.abs(tr.phases - ph0)) < 1e-6
    assert path.max_lagrangian_defect() <= 1e-8
    assert path.max_unitarity_defect() <= 1e-9


def test_renormalization_does_not_move_the_plane():
    p = builtin_problem("robin_constant")
    seed = unstable_frame_at_minus_infinity(p, 0.0)
    a = propagate_in_x(p, 0.0, -20.0, 0.0, seed,
                       IntegratorOptions(rel_tol=1e-12, abs_tol=1e-13, renorm_every=1))
    b = propagate_in_x(p, 0.0, -20.0, 0.0, seed,
                       IntegratorOptions(rel_tol=1e-12, abs_tol=1e-13, renorm_every=50))
    W = w_relative(a.frames[-1], b.frames[-1])
    assert np.max(np.abs(W + np.eye(p.n))) < 1e-10


def test_frame_at_interpolates_the_path():
    p = builtin_problem("example2")
    seed = unstable_frame_at_minus_infinity(p, 0.0)
    path = propagate_in_x(p, 0.0, p.x_min(), 0.0, seed)
    mid = 0.5 * (path.params[3] + path.params[4])
    fr = path.frame_at(mid)
    assert fr.lagrangian_defect() <= 1e-8
    with pytest.raises(ValueError):
        path.frame_at(1.0)


def test_halfline_frame_hits_boundary_plane_at_eigenvalue():
    p = builtin_problem("robin_constant")
    lam = ROBIN_CONSTANT_EIGENVALUE
    seed = unstable_frame_at_minus_infinity(p, lam)
    path = propagate_in_x(p, lam, p.x_min(), 0.0, seed)
    assert intersection_dim(path.frames[-1], p.reference_frame(lam)) == 1
    # slightly off the eigenvalue the planes separate
    path2 = propagate_in_x(p, lam + 0.01, p.x_min(), 0.0,
                           unstable_frame_at_minus_infinity(p, lam + 0.01))
    assert intersection_dim(path2.frames[-1], p.reference_frame(lam + 0.01)) == 0


def test_example2_conjugate_points():
    p = builtin_problem("example2")
    seed = unstable_frame_at_minus_infinity(p, 0.0)
    path = propagate_in_x(p, 0.0, p.x_min(), p.right_endpoint(), seed)
    cps = detect_crossings(path)
    interior = [cp for cp in cps if abs(cp.param - path.params[0]) > 1e-3]
    assert sum(cp.multiplicity for cp in interior) == 3
    xs = sorted(cp.param for cp in interior)
    assert xs[0] == pytest.approx(-xs[2], abs=0.2)  # even potential, symmetric pair
    assert abs(xs[1]) < 0.2


def test_tolerance_halving_moves_crossings_by_less_than_param_tol_budget():
    p = builtin_problem("example2")
    opts = IntegratorOptions()

    def locate(o):
        seed = unstable_frame_at_minus_infinity(p, 0.0)
        path = propagate_in_x(p, 0.0, p.x_min(), p.right_endpoint(), seed, o)
        return sorted(cp.param for cp in detect_crossings(path)
                      if abs(cp.param - path.params[0]) > 1e-3)

    xs = locate(opts)
    ys = locate(opts.halved())
    assert len(xs) == len(ys)
    for a, b in zip(xs, ys):
        assert abs(a - b) < 1e-7


def test_lambda_path_finds_eigenvalue_with_positive_direction():
    p = builtin_problem("robin_constant")
    path = propagate_in_lambda(p, 0.0, 0.0, 0.6)
    cps = detect_crossings(path)
    assert len(cps) == 1
    assert cps[0].param == pytest.approx(ROBIN_CONSTANT_EIGENVALUE, abs=1e-6)
    assert cps[0].direction == 1
    assert cps[0].kind == "in_lambda"


def test_crossing_form_scalar_sign_and_scaling():
    # frame [0; 1] sits on the Dirichlet plane; rate (a, b) gives Q = -2a|w|^2
    frame = LagrangianFrame(X=np.array([[0.0 + 0j]]), Y=np.array([[1.0 + 0j]]))
    rate = np.array([[-3.0], [7.0]], dtype=complex)
    q1 = crossing_form(frame, rate, np.array([1.0]))
    assert q1 == pytest.approx(6.0)
    q2 = crossing_form(frame, rate, np.array([2.0]))
    assert q2 == pytest.approx(4.0 * q1)
    assert crossing_form(frame, -rate, np.array([1.0])) == pytest.approx(-q1)


def test_crossing_form_rejects_vector_outside_kernel():
    frame = LagrangianFrame(X=np.array([[1.0 + 0j]]), Y=np.array([[0.0 + 0j]]))
    with pytest.raises(ValueError):
        crossing_form(frame, np.array([[1.0], [0.0]], dtype=complex), np.array([1.0]))


def test_crossing_form_matches_observed_rotation():
    """At the example2 conjugate points the phase moves clockwise in x, so the
    form against the Dirichlet plane must be negative there."""
    p = builtin_problem("example2")
    seed = unstable_frame_at_minus_infinity(p, 0.0)
    path = propagate_in_x(p, 0.0, p.x_min(), p.right_endpoint(), seed)
    cps = [cp for cp in detect_crossings(path)
           if abs(cp.param - path.params[0]) > 1e-3]
    cp = cps[0]
    frame = path.frame_at(cp.param)
    W = w_relative(frame, dirichlet_frame(1))
    vals, vecs = np.linalg.eig(W)
    w = vecs[:, np.argmin(np.abs(vals + 1.0))]
    S = p.coeffs.S(cp.param, 0.0)
    rate = np.vstack([frame.Y, S @ frame.X])
    assert crossing_form(frame, rate, w) < 0
    assert np.sign(crossing_form(frame, rate, w)) == cp.direction


def test_path_csv_columns():
    p = builtin_problem("constant")
    seed = unstable_frame_at_minus_infinity(p, 0.0)
    path = propagate_in_x(p, 0.0, -2.0, 2.0, seed)
    buf = io.StringIO()
    path.write_csv(buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "param,phase_1,lagrangian_defect"
    assert len(lines) == len(path.params) + 1


def test_integrator_options_validate():
    with pytest.raises(ValueError):
        IntegratorOptions(rel_tol=0.0)
    o = IntegratorOptions().halved()
    assert o.rel_tol == pytest.approx(0.5e-8)
