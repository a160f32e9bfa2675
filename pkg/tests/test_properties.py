"""Property-based checks of the structural invariants."""
import math

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from peakonlab import (
    IvpSpec,
    QForm,
    apply_Q,
    apply_operator,
    build_grid,
    characteristic_map,
    conv_phi,
    conv_phi_prime,
    growth_rate_fit,
    indicial_roots,
    inner_product,
    l2_norm,
    phi,
    truncated_norms,
)
from peakonlab.cli import parse_config
from peakonlab.evolution import characteristic_preimage
from peakonlab.export import dumps
from peakonlab.grid import GridFunction, derivative_upwind
from peakonlab.kernels import dense_convolution_matrix

finite = dict(allow_nan=False, allow_infinity=False)
grids = st.builds(
    build_grid,
    st.floats(0.5, 60, **finite),
    st.integers(8, 300),
    st.floats(1.0, 4.0, **finite),
)


def _gauss(g, c, w):
    return GridFunction(g, np.exp(-(((g.nodes - c) / w) ** 2)))


@given(grids)
def test_grid_invariants(g):
    x = g.nodes
    assert np.all(np.diff(x) > 0)
    assert x.size == 2 * g.n_half
    assert np.array_equal(x, -x[::-1])
    assert np.min(np.abs(x)) == g.xi_min > 0
    assert np.max(np.abs(x)) == g.R
    assert np.all(g.weights > 0)
    assert abs(g.weights.sum() - 2 * g.R) <= 1e-12 * 2 * g.R


@given(grids, st.floats(0.1, 3, **finite), st.floats(0.1, 3, **finite))
def test_even_odd_orthogonality(g, a, w):
    f = GridFunction(g, np.exp(-a * g.nodes**2))
    h = GridFunction(g, g.nodes * np.exp(-((g.nodes / w) ** 2)))
    assert abs(inner_product(f, h)) <= 1e-12 * l2_norm(f) * l2_norm(h)


@given(grids, st.floats(-1, 1, **finite), st.floats(-1, 1, **finite), st.floats(-1, 1, **finite))
def test_one_sided_quadratics_differentiated_exactly_on_uniform_grid(g, a, b, c):
    g = build_grid(g.R, g.n_half, 1.0)
    x = g.nodes
    f = GridFunction(g, a + b * x + c * x * x)
    scale = 1 + abs(a) + abs(b) * g.R + abs(c) * g.R**2
    tol = 1e-10 * scale / (g.R / g.n_half)
    for direction in ("right", "left"):
        d = derivative_upwind(f, direction)
        assert np.max(np.abs(d.values - (b + 2 * c * x))) <= tol


@settings(max_examples=1000)
@given(st.complex_numbers(max_magnitude=5, **finite), st.floats(-5, 5, **finite))
def test_indicial_sum_and_product(lam, b):
    r = indicial_roots(lam, b)
    c = lam + b
    scale = 1 + abs(2 * c - 5) + abs((c - 2) * (c - 1))
    assert abs(r.sigma1 + r.sigma2 + (2 * c - 5)) <= 1e-12 * scale
    assert abs(r.sigma1 * r.sigma2 - (c - 2) * (c - 1)) <= 1e-12 * scale**2
    assert r.zero_is_root == (abs(c - 1) <= 1e-12 or abs(c - 2) <= 1e-12)


@given(st.floats(0, 30, **finite), st.floats(0, 30, **finite), st.floats(-20, 20, **finite))
def test_characteristic_semigroup_and_inverse(t1, t2, s):
    assume(abs(s) > 1e-6)
    x1 = characteristic_map(t1, s)
    assume(x1 != 0)
    both = characteristic_map(t2, x1)
    assume(both != 0 and abs(both) < 600)
    assert math.isclose(both, characteristic_map(t1 + t2, s), rel_tol=1e-9, abs_tol=1e-300)
    assert math.copysign(1, x1) == math.copysign(1, s)
    if abs(x1) > 1e-12:
        assert math.isclose(characteristic_preimage(t1, x1), s, rel_tol=1e-9)


@given(st.integers(10, 80), st.floats(1.0, 3.0, **finite), st.integers(0, 2**32 - 1))
def test_prefix_scans_match_dense_oracle(n, gamma, seed):
    g = build_grid(8.0, n, gamma)
    f = GridFunction(g, np.random.default_rng(seed).normal(size=g.size))
    for prime, fn in ((False, conv_phi), (True, conv_phi_prime)):
        fast = fn(f).values
        dense = dense_convolution_matrix(g, None, prime) @ f.values
        assert np.max(np.abs(fast - dense)) <= 1e-12 * np.max(np.abs(fast))


@given(st.floats(-6, 6, **finite), st.floats(0.3, 2, **finite), st.floats(-1, 5, **finite))
def test_q_forms_agree(c, w, b):
    g = build_grid(40.0, 500, 3.0)
    f = _gauss(g, c, w)
    qs = [apply_Q(f, b, form) for form in QForm]
    scale = max(l2_norm(q) for q in qs) + 1e-300
    for q in qs[1:]:
        assert l2_norm(q - qs[0]) <= 1e-7 * max(scale, l2_norm(f) * 1e-3)
    assert np.isrealobj(qs[0].values)


@given(
    st.sampled_from(["L", "L0", "Lstar", "L0star"]),
    st.floats(-3, 6, **finite),
    st.complex_numbers(max_magnitude=3, **finite),
    st.floats(-5, 5, **finite),
)
def test_operator_linearity(kind, b, alpha, c):
    g = build_grid(20.0, 100, 3.0)
    f, h = _gauss(g, c, 1.0), _gauss(g, -c / 2, 2.0)
    lhs = apply_operator(kind, alpha * f + h, b)
    rhs = alpha * apply_operator(kind, f, b) + apply_operator(kind, h, b)
    assert l2_norm(lhs - rhs) <= 1e-12 * (l2_norm(lhs) + l2_norm(rhs) + 1)


@given(st.floats(0, 10, **finite), st.floats(-5, 5, **finite), st.floats(0.3, 3, **finite))
def test_critical_b_preserves_both_half_norms(t, c, w):
    spec = IvpSpec(2.5, "gaussian", params={"center": c, "width": w}, grid=build_grid(40.0, 300, 3.0))
    r0, l0 = truncated_norms(spec, 0.0)
    r, l = truncated_norms(spec, t)
    assert abs(r - r0) <= 1e-12 * max(r0, 1e-300) + 1e-300 and abs(l - l0) <= 1e-12 * max(l0, 1e-300) + 1e-300


@given(st.floats(2.6, 5, **finite), st.floats(0.1, 2.4, **finite), st.floats(-4, 4, **finite))
def test_half_norm_monotonicity(b_hi, b_lo, c):
    g = build_grid(40.0, 300, 3.0)
    times = [0.0, 0.3, 1.0, 2.5, 5.0]
    left = [truncated_norms(IvpSpec(b_hi, "gaussian", params={"center": c}, grid=g), t)[1] for t in times]
    right = [truncated_norms(IvpSpec(b_lo, "gaussian", params={"center": c}, grid=g), t)[0] for t in times]
    assert all(np.diff(left) <= 1e-14) and all(np.diff(right) <= 1e-14)


@given(st.floats(-3, 3, **finite), st.floats(-5, 5, **finite))
def test_growth_rate_fit_recovers_exponentials(rate, shift):
    t = np.linspace(0, 4, 41)
    assert abs(growth_rate_fit((t, np.exp(rate * t + shift)), "q", (0.5, 3.5)) - rate) <= 1e-10


@given(st.dictionaries(st.text(min_size=1, max_size=8), st.floats(allow_nan=True) | st.integers(-10**6, 10**6), max_size=8))
def test_json_rendering_is_deterministic(d):
    assert dumps(d) == dumps(dict(d))


@given(
    st.lists(st.floats(-10, 10, **finite), min_size=1, max_size=5),
    st.integers(8, 5000),
    st.floats(0.1, 100, **finite),
)
def test_config_round_trip(bs, n, R):
    text = f"scenario = identities\nb = {', '.join(repr(b) for b in bs)}\nn_half = {n}\nR = {R!r}"
    cfg = parse_config(text)
    assert cfg.b == bs and cfg.n_half == n and cfg.R == R


@given(grids, st.integers(0, 2**32 - 1))
def test_quadrature_exact_for_piecewise_linear(g, seed):
    v = np.random.default_rng(seed).normal(size=g.size)
    assert math.isclose(float(g.weights @ v), float(np.trapezoid(v, g.nodes)), rel_tol=1e-12, abs_tol=1e-12 * g.R)
