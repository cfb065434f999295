import numpy as np
import pytest

from maslovbox.pencil import CoefficientField, PencilProblem, linear_boundary


def _random_symmetric(rng, n, scale=1.0):
    A = rng.normal(0.0, scale, (n, n))
    return 0.5 * (A + A.T)


def random_problem(rng, n=None, domain=None):
    """A random valid pencil problem: negative definite V, Gaussian bump.

    V(x) = B + G exp(-(x/s)^2) with B pushed below -||G|| I, so V stays
    negative definite everywhere.  With f1 = a I and f2 = b I constant, the
    asymptotic roots satisfy lam = (-a +- sqrt(a^2 - 4 b (mu^2 + |v|)))/(2b),
    so either both are real negative or Re lam = -a/(2b) < 0: hyperbolicity
    holds by construction.
    """
    if n is None:
        n = int(rng.choice([1, 1, 2, 2, 3]))
    if domain is None:
        domain = str(rng.choice(["half", "whole"]))
    a = rng.uniform(0.6, 1.8)
    b = rng.uniform(0.6, 1.8)
    d = rng.uniform(0.3, 2.0, n)
    G = _random_symmetric(rng, n, 0.8)
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    B = -(Q * d) @ Q.T
    B = 0.5 * (B + B.T) - float(np.linalg.norm(G, 2)) * np.eye(n)
    s = rng.uniform(1.0, 2.5)
    f1 = a * np.eye(n)
    f2 = b * np.eye(n)

    def evaluate(x, B=B, G=G, s=s, f1=f1, f2=f2):
        return B + G * np.exp(-((x / s) ** 2)), f1, f2

    two_sided = domain == "whole"
    coeffs = CoefficientField(
        n=n, evaluate=evaluate, limits_minus=(B, f1, f2),
        limits_plus=(B, f1, f2) if two_sided else None,
        delta=b, decay_scale=s,
    )
    if domain == "half":
        c = _random_symmetric(rng, n, 0.6) + np.eye(n) * rng.uniform(0.0, 2.5)
        W = rng.normal(size=(n, n))
        C2 = -(np.eye(n) + W @ W.T / n)
        return PencilProblem(coeffs=coeffs, domain="half",
                             boundary=linear_boundary(c, C2), name="random-half")
    return PencilProblem(coeffs=coeffs, domain="whole", name="random-whole")


@pytest.fixture
def rng():
    return np.random.default_rng(20260826)
