import numpy as np
import pytest

from maslovbox.linalg import (
    SQRT,
    NotHermitianError,
    NotPositiveDefiniteError,
    as_hermitian,
    cauchy_det_check,
    det_complex,
    herm_eig,
    loewner,
    matfun_derivative,
    morse_index,
    power_pair,
    sqrt_pd,
)


def random_hermitian(rng, n, scale=1.0):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (A + A.conj().T)


def random_hpd(rng, n, shift=0.5):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return A @ A.conj().T + shift * np.eye(n)


def test_as_hermitian_accepts_and_symmetrizes(rng):
    H = random_hermitian(rng, 4)
    out = as_hermitian(H + 1e-13 * 1j * np.eye(4))
    assert np.allclose(out, out.conj().T)


def test_as_hermitian_rejects(rng):
    with pytest.raises(NotHermitianError):
        as_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_herm_eig_reconstructs(rng):
    H = random_hermitian(rng, 5)
    dec = herm_eig(H)
    assert np.all(np.diff(dec.values) >= 0)
    R = dec.vectors
    assert np.allclose(R @ np.diag(dec.values) @ R.conj().T, H, atol=1e-10)


def test_sqrt_pd_squares_back(rng):
    H = random_hpd(rng, 4)
    R = sqrt_pd(H)
    assert np.allclose(R @ R, H, atol=1e-9)
    assert np.all(np.linalg.eigvalsh(R) > 0)


def test_sqrt_pd_rejects_indefinite():
    with pytest.raises(NotPositiveDefiniteError):
        sqrt_pd(np.diag([1.0, -0.5]))


def test_morse_index_counts():
    assert morse_index(np.diag([-2.0, -1e-12, 0.5])) == (1, 1)
    assert morse_index(np.diag([1.0, 2.0])) == (0, 0)
    assert morse_index(np.diag([-1.0, -2.0, -3.0])) == (3, 0)


def test_loewner_sqrt_is_psd(rng):
    """The divided-difference matrix of sqrt is positive semidefinite on any
    positive node set (operator monotonicity witness)."""
    f, fp = SQRT
    for _ in range(100):
        m = int(rng.integers(2, 7))
        nodes = rng.uniform(0.05, 50.0, m)
        L = loewner(f, fp, nodes).matrix
        vals = np.linalg.eigvalsh(0.5 * (L + L.T))
        assert vals[0] >= -1e-12


def test_loewner_coincident_nodes_use_derivative():
    f, fp = SQRT
    L = loewner(f, fp, [4.0, 4.0]).matrix
    assert np.allclose(L, 0.25 * np.ones((2, 2)))


@pytest.mark.parametrize("pair", [SQRT, power_pair(0.3), power_pair(2.0)])
def test_matfun_derivative_matches_central_difference(rng, pair):
    f, fp = pair
    for _ in range(20):
        n = int(rng.integers(2, 5))
        A = random_hpd(rng, n, shift=1.0)
        Adot = random_hermitian(rng, n)
        D = matfun_derivative(f, fp, A, Adot)

        def f_of(M):
            dec = herm_eig(M)
            return (dec.vectors * f(dec.values)) @ dec.vectors.conj().T

        h = 1e-6
        D_fd = (f_of(A + h * Adot) - f_of(A - h * Adot)) / (2.0 * h)
        assert np.linalg.norm(D - D_fd) <= 1e-6 * max(1.0, np.linalg.norm(D))


def test_sqrt_derivative_positive_on_positive_rate(rng):
    """d/dt sqrt(A + t B) at t=0 is positive definite whenever B is."""
    f, fp = SQRT
    for _ in range(100):
        n = int(rng.integers(1, 5))
        A = random_hpd(rng, n)
        B = random_hpd(rng, n, shift=0.1)
        D = matfun_derivative(f, fp, A, B)
        assert np.linalg.eigvalsh(D)[0] > 0


@pytest.mark.parametrize("m", [1, 2, 3, 4, 5, 6])
def test_cauchy_determinant_identity(rng, m):
    nodes = rng.uniform(0.1, 20.0, m)
    lhs, rhs = cauchy_det_check(nodes)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))


def test_det_complex_against_closed_forms(rng):
    assert det_complex([[2.0]]) == pytest.approx(2.0)
    M = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=complex)
    assert det_complex(M) == pytest.approx(-2.0)
    for _ in range(20):
        n = int(rng.integers(1, 7))
        A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        assert det_complex(A) == pytest.approx(np.linalg.det(A), rel=1e-9, abs=1e-9)


def test_det_complex_singular():
    assert det_complex(np.zeros((3, 3))) == 0.0
