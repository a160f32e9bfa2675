import numpy as np
import pytest
import sympy as sp

from peakonlab import QForm, apply_Q, build_grid, conv_phi, conv_phi_prime, dphi, hs_norm_squared, l2_norm, phi, sgn
from peakonlab.grid import GridFunction
from peakonlab.kernels import (
    antiderivative_from_zero,
    antiderivative_matrix,
    convolution_identity_residuals,
    convolution_matrix,
    dense_convolution_matrix,
    stationary_residual,
)

from conftest import gaussian


def _symbolic_convolution(kernel_sign):
    """Exact ``K * phi`` for xi > 0 by sympy, with ``K = s(d) exp(-|d|)``; returns a callable."""
    x = sp.Symbol("x", positive=True)
    e = sp.Symbol("e", real=True)
    left_sign, right_sign = kernel_sign
    expr = (
        sp.integrate(left_sign * sp.exp(-(x - e)) * sp.exp(e), (e, -sp.oo, 0))
        + sp.integrate(left_sign * sp.exp(-(x - e)) * sp.exp(-e), (e, 0, x))
        + sp.integrate(right_sign * sp.exp(x - e) * sp.exp(-e), (e, x, sp.oo))
    )
    return sp.lambdify(x, sp.simplify(expr), "numpy")


@pytest.fixture(scope="module")
def oracle():
    # conv_phi has kernel exp(-|d|); conv_phi_prime has -sgn(d) exp(-|d|), d = xi - eta
    return {"even": _symbolic_convolution((1, 1)), "odd": _symbolic_convolution((-1, 1))}


def test_conv_of_zero(grid):
    assert np.all(conv_phi(grid.zeros()).values == 0)
    assert np.all(conv_phi_prime(grid.zeros()).values == 0)


def test_conv_phi_of_phi_matches_symbolic(grid, oracle):
    x = grid.nodes
    exact = oracle["even"](np.abs(x))
    assert np.allclose(exact, (1 + np.abs(x)) * np.exp(-np.abs(x)), atol=1e-15)
    assert np.max(np.abs(conv_phi(phi(grid)).values - exact)) < 1e-9


def test_conv_phi_of_dphi(grid, oracle):
    x = grid.nodes
    # phi * phi' = (phi * phi)', the odd-kernel convolution of phi
    exact = np.sign(x) * oracle["odd"](np.abs(x))
    assert np.max(np.abs(conv_phi(dphi(grid)).values - exact)) < 1e-9


def test_conv_phi_prime_of_phi(grid, oracle):
    x = grid.nodes
    exact = np.sign(x) * oracle["odd"](np.abs(x))
    assert np.allclose(exact, -x * np.exp(-np.abs(x)), atol=1e-15)
    assert np.max(np.abs(conv_phi_prime(phi(grid)).values - exact)) < 1e-9


def test_derivative_of_convolution_is_prime_convolution(grid):
    f = gaussian(grid, 1.0, 1.5)
    d = np.gradient(conv_phi(f).values, grid.nodes)
    m = (np.abs(grid.nodes) > 0.2) & (np.abs(grid.nodes) < 10)
    assert np.max(np.abs(d[m] - conv_phi_prime(f).values[m])) < 1e-3


@pytest.mark.parametrize("weight", [None, "phi", "dphi", "phi2"])
@pytest.mark.parametrize("prime", [False, True])
def test_prefix_scan_matches_dense_quadrature_oracle(weight, prime):
    g = build_grid(6.0, 60, 2.0)
    f = GridFunction(g, np.random.default_rng(1).normal(size=g.size))
    fast = (conv_phi_prime if prime else conv_phi)(f, weight).values
    dense = dense_convolution_matrix(g, weight, prime) @ f.values
    assert np.max(np.abs(dense - fast)) <= 1e-12 * np.max(np.abs(fast))
    explicit = convolution_matrix(g, weight, prime) @ f.values
    assert np.max(np.abs(explicit - fast)) <= 1e-12 * np.max(np.abs(fast))


def test_weighted_convolution_folds_weight_exactly(grid):
    one = grid.sample(lambda s: np.ones_like(s))
    a = conv_phi(one, "phi").values
    b = conv_phi(phi(grid)).values
    assert np.max(np.abs(a - b)) < 1e-9


def test_antiderivative_examples(grid):
    x = grid.nodes
    assert np.all(antiderivative_from_zero(grid.zeros()).values == 0)
    assert np.max(np.abs(antiderivative_from_zero(phi(grid)).values - np.sign(x) * (1 - np.exp(-np.abs(x))))) < 1e-9
    assert np.max(np.abs(antiderivative_from_zero(dphi(grid)).values - (np.exp(-np.abs(x)) - 1))) < 1e-8


def test_antiderivative_matrix_agrees(small_grid):
    f = gaussian(small_grid, -0.7)
    assert np.allclose(antiderivative_matrix(small_grid) @ f.values, antiderivative_from_zero(f).values, atol=1e-13)


@pytest.mark.parametrize("b", [0.0, 1.0, 2.0, 2.5, 3.3, 5.0])
def test_q_of_phi_and_dphi(grid, b):
    ph, dp = phi(grid), dphi(grid)
    for form in QForm:
        assert l2_norm(apply_Q(ph, b, form) - (1 - b) * (dp - ph * dp)) < 1e-7
        assert l2_norm(apply_Q(dp, b, form) - (-ph + (b - 1) * ph * ph)) < 1e-7
    assert np.all(apply_Q(grid.zeros(), b).values == 0)


def test_q_of_real_input_is_real(grid):
    assert np.isrealobj(apply_Q(gaussian(grid), 2.7).values)


def test_hs_norms(grid):
    assert hs_norm_squared("K1", grid) == pytest.approx(1.0, abs=1e-4)
    assert hs_norm_squared("K2", grid) == pytest.approx(0.5, abs=1e-4)


def test_hs_norms_decrease_on_shorter_domain():
    g40, g1 = build_grid(40, 400, 3), build_grid(1, 400, 3)
    for k in ("K1", "K2"):
        assert hs_norm_squared(k, g1) < hs_norm_squared(k, g40)


def test_hs_norm_rejects_unknown_kernel(small_grid):
    with pytest.raises(ValueError):
        hs_norm_squared("K3", small_grid)


@pytest.mark.parametrize("b", [2.0, 3.0, 4.0])
def test_stationary_residual(grid, b):
    assert np.max(np.abs(stationary_residual(b, grid).values)) <= 1e-6


def test_stationary_residual_detects_wrong_amplitude(grid):
    assert np.max(np.abs(stationary_residual(2.0, grid, amplitude=1.1).values)) >= 0.05


def test_convolution_identities(grid):
    assert convolution_identity_residuals(phi(grid), 2) <= 1e-6
    assert convolution_identity_residuals(gaussian(grid), 1) <= 1e-5
    assert convolution_identity_residuals(grid.zeros(), 2) == 0.0
    with pytest.raises(ValueError):
        convolution_identity_residuals(phi(grid), 3)


def test_q_sup_bound_stable_under_refinement():
    ratios = []
    for n in (250, 500, 1000):
        g = build_grid(40, n, 3)
        f = gaussian(g, -0.5, 0.7) + sgn(g) * phi(g)
        ratios.append(np.max(np.abs(apply_Q(f, 3.0).values)) / l2_norm(f))
    assert max(ratios) / min(ratios) < 1.01
