import numpy as np
import pytest
from scipy.special import gamma, gammainc

from fracsad.errors import DomainError
from fracsad.quadrature import (QuadratureSpec, gauss_jacobi_left, gauss_legendre, graded_mesh,
                                integrate_left_singular, uniform_mesh)


@pytest.mark.parametrize("beta", [-0.8, -0.4, 0.0, 0.7])
@pytest.mark.parametrize("k", [0, 3, 9])
def test_gauss_jacobi_exact_on_polynomials(beta, k):
    x, w = gauss_jacobi_left(8, beta)
    assert np.dot(w, x**k) == pytest.approx(1 / (k + beta + 1), rel=1e-13)


def test_gauss_legendre_on_unit_interval():
    x, w = gauss_legendre(10)
    assert w.sum() == pytest.approx(1.0)
    assert np.dot(w, x**19) == pytest.approx(1 / 20, rel=1e-13)


@pytest.mark.parametrize("beta", [-0.6, -0.4, 0.2, 1.6])
@pytest.mark.parametrize("t", [0.3, 2.0])
def test_left_singular_against_incomplete_gamma(beta, t):
    # int_0^t s^beta e^{-s} ds = Gamma(beta + 1) P(beta + 1, t)
    exact = gamma(beta + 1) * gammainc(beta + 1, t)
    assert integrate_left_singular(lambda s: np.exp(-s), t, beta) == pytest.approx(exact, rel=1e-12)


def test_left_singular_zero_length():
    assert integrate_left_singular(np.exp, 0.0, -0.5) == 0.0


def test_graded_mesh_keeps_breakpoints():
    nodes = graded_mesh([0.0, 0.3, 1.0], 20)
    assert nodes[0] == 0.0 and nodes[-1] == 1.0
    assert np.any(np.isclose(nodes, 0.3, rtol=0, atol=1e-15))
    assert np.all(np.diff(nodes) > 0)
    # grading makes the first cell smaller than a uniform one
    assert nodes[1] < 0.3 / 6
    u = uniform_mesh([0.0, 0.5, 1.0], 4)
    assert np.allclose(np.diff(u), 0.125)


def test_spec_validation_and_refinement():
    with pytest.raises(DomainError):
        QuadratureSpec(cells_per_axis=4)
    with pytest.raises(DomainError):
        QuadratureSpec(rel_tol=0)
    with pytest.raises(DomainError):
        QuadratureSpec(grading=0.5)
    assert QuadratureSpec(cells_per_axis=16).refined().cells_per_axis == 32


def test_graded_mesh_merges_nearly_coincident_breakpoints():
    nodes = graded_mesh([0.0, 5e-324, 0.5, 1.0 - 1e-15, 1.0], 16)
    assert np.all(np.diff(nodes) > 0)
    assert nodes[0] == 0.0 and nodes[-1] == 1.0
