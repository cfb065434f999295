import numpy as np
import pytest

from conftest import random_problem
from maslovbox.pencil import (
    HyperbolicityLostError,
    PencilProblem,
    asymptotic_decomposition,
    check_boundary_assumptions,
    check_hyperbolicity,
    default_mu_grid,
    lambda_max,
    linear_boundary,
    unstable_frame_at_minus_infinity,
)
from maslovbox.problems import (
    ROBIN_CONSTANT_EIGENVALUE,
    builtin_problem,
)


def test_x_cut_doubling_probe():
    p = builtin_problem("example2")
    xm = p.x_min()
    assert xm < 0
    assert p.coeffs.deviation(xm, "minus") <= 1e-8
    # one halving back the deviation is above tolerance: the probe is tight
    assert p.coeffs.deviation(xm / 2.0, "minus") > 1e-8


def test_right_endpoint_by_domain():
    assert builtin_problem("example1").right_endpoint() == 0.0
    p2 = builtin_problem("example2")
    assert p2.right_endpoint() > 0
    coeffs = p2.coeffs
    trunc = PencilProblem(coeffs=coeffs, domain="truncated", L=7.5)
    assert trunc.right_endpoint() == 7.5


def test_hyperbolicity_of_builtin_limits():
    for name in ("example1", "example2", "example3", "example4", "robin_constant"):
        p = builtin_problem(name)
        lims = p.coeffs.limits_minus
        rep = check_hyperbolicity(lims, default_mu_grid(lims, 2.0))
        assert rep.ok["hyperbolic"], name
        assert rep.gamma_estimate < 0


def test_hyperbolicity_fails_for_positive_limit():
    # V_- = +1 puts a root at lam with Re lam > 0 for small mu
    lims = (np.array([[1.0]]), np.array([[1.0]]), np.array([[2.0]]))
    rep = check_hyperbolicity(lims, default_mu_grid(lims, 1.0))
    assert rep.ok["hyperbolic"] is False or rep.gamma_estimate > -1e-3
    assert not rep.all_ok or rep.gamma_estimate > -1e-3


def test_boundary_assumptions_linear_pass():
    bd = linear_boundary([[4.0]], [[-9.0]])
    rep = check_boundary_assumptions(bd, np.linspace(0.0, 1.0, 10))
    assert rep.ok == {"phi_zero": True, "phi_decreasing": True, "im_phi_sign": True}
    assert rep.all_ok


def test_boundary_assumptions_detect_violations():
    bad = linear_boundary([[4.0]], [[9.0]])  # increasing phi
    rep = check_boundary_assumptions(bad, np.linspace(0.0, 1.0, 10))
    assert rep.ok["phi_decreasing"] is False
    assert rep.ok["im_phi_sign"] is False
    assert not rep.all_ok


def test_boundary_assumptions_custom_phi_unverified():
    p = builtin_problem("custom_phi")
    rep = check_boundary_assumptions(p.boundary, np.linspace(0.0, 1.0, 10))
    assert rep.ok["im_phi_sign"] is None
    assert rep.all_ok  # unverified is not a failure


def test_lambda_max_dominates_known_eigenvalue():
    p = builtin_problem("robin_constant")
    bound = lambda_max(p)
    assert bound > ROBIN_CONSTANT_EIGENVALUE


def test_lambda_max_respects_safety_factor():
    p = builtin_problem("constant")
    assert lambda_max(p, safety=1.25) == pytest.approx(1.25 * lambda_max(p, safety=1.0))


def test_asymptotic_decomposition_positive_rates():
    p = builtin_problem("example4")
    dec = asymptotic_decomposition(p, "minus", 0.0)
    assert np.all(dec.nus > 0)
    assert np.allclose(dec.mus, np.sqrt(dec.nus))
    # eigenvectors diagonalize the asymptotic block
    S = p.coeffs.S_limit("minus", 0.0)
    R = dec.r_vectors
    assert np.allclose(R.conj().T @ S @ R, np.diag(dec.nus), atol=1e-10)


def test_asymptotic_decomposition_raises_when_gap_lost():
    lims = (np.array([[1.0]]), np.array([[1.0]]), np.array([[2.0]]))
    from maslovbox.pencil import CoefficientField

    p = PencilProblem(
        coeffs=CoefficientField(
            n=1, evaluate=lambda x: lims, limits_minus=lims, limits_plus=lims,
            delta=2.0, decay_scale=1.0,
        ),
        domain="whole",
    )
    with pytest.raises(HyperbolicityLostError):
        asymptotic_decomposition(p, "minus", 0.0)


def test_unstable_frame_is_lagrangian_and_growing(rng):
    for _ in range(10):
        p = random_problem(rng)
        fr = unstable_frame_at_minus_infinity(p, 0.0)
        assert fr.lagrangian_defect() <= 1e-10
        # Y = X * diag(mu) with mu > 0: columns grow as x increases
        dec = asymptotic_decomposition(p, "minus", 0.0)
        assert np.allclose(fr.Y, fr.X * dec.mus)


def test_random_problems_satisfy_hyperbolicity(rng):
    for _ in range(10):
        p = random_problem(rng)
        lims = p.coeffs.limits_minus
        rep = check_hyperbolicity(lims, default_mu_grid(lims, lambda_max(p)))
        assert rep.ok["hyperbolic"], p.name
