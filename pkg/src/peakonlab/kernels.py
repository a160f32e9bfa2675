"""Peakon profile, exponential-kernel convolutions and the compact part Q.

Convolutions with ``exp(-|x|)`` and its derivative are evaluated by product
integration: the data is replaced by its piecewise-cubic interpolant on each
side of the origin (linear across the gap ``[-xi_min, xi_min]``), optionally
multiplied by an exactly known factor ``phi``, ``phi'`` or ``phi**2``, and the
kernel is integrated exactly cell by cell.  The cell integrals are combined
with two decaying prefix scans, so one application costs O(n).

Because the running antiderivative integrates the same interpolant, the
convolution identities that relate the forms of Q hold to rounding error.
"""
from __future__ import annotations

import enum

import numpy as np
import scipy.sparse as sp

from .grid import Grid, GridFunction, derivative_upwind, l2_norm

__all__ = [
    "phi",
    "dphi",
    "sgn",
    "PeakonProfile",
    "QForm",
    "conv_phi",
    "conv_phi_prime",
    "antiderivative_from_zero",
    "apply_Q",
    "hs_norm_squared",
    "stationary_residual",
    "convolution_identity_residuals",
    "dense_convolution_matrix",
    "convolution_matrix",
    "antiderivative_matrix",
]


def _on(x, fn):
    if isinstance(x, Grid):
        return GridFunction(x, fn(x.nodes))
    return fn(np.asarray(x, dtype=float))


def phi(x):
    """``exp(-|x|)``; pass a :class:`Grid` to get a GridFunction."""
    return _on(x, lambda s: np.exp(-np.abs(s)))


def dphi(x):
    """``-sgn(x) exp(-|x|)``, the derivative of :func:`phi` away from 0."""
    return _on(x, lambda s: -np.sign(s) * np.exp(-np.abs(s)))


def sgn(x):
    return _on(x, lambda s: np.sign(s).astype(float))


class PeakonProfile:
    """Namespace bundling the peakon ``phi``, its derivative and ``sgn``."""

    phi = staticmethod(phi)
    dphi = staticmethod(dphi)
    sgn = staticmethod(sgn)


class QForm(str, enum.Enum):
    """The three algebraically equivalent expressions of Q."""

    FORM1 = "form1"
    FORM2A = "form2a"
    FORM2B = "form2b"


# weight name -> (coefficient, decay rate mu, parity of the sign factor)
_WEIGHTS = {
    None: (1.0, 0.0, 0),
    "phi": (1.0, 1.0, 0),
    "dphi": (-1.0, 1.0, 1),
    "phi2": (1.0, 2.0, 0),
}


def _exp_moments(a, jmax=3):
    """``M_j(a) = int_0^1 exp(a t) t**j dt`` for j = 0..jmax, elementwise in a."""
    a = np.asarray(a, dtype=float)
    out = np.empty(a.shape + (jmax + 1,))
    small = np.abs(a) <= 1.0
    if np.any(small):
        s = a[small]
        term = np.ones_like(s)
        acc = np.zeros(s.shape + (jmax + 1,))
        for k in range(30):
            if k:
                term = term * s / k
            acc += term[:, None] / (k + 1 + np.arange(jmax + 1))
        out[small] = acc
    big = ~small
    if np.any(big):
        s = a[big]
        ea = np.exp(s)
        m = np.expm1(s) / s
        out[big, 0] = m
        for j in range(1, jmax + 1):
            m = (ea - j * m) / s
            out[big, j] = m
    return out


def _cell_layout(grid: Grid):
    """Breakpoints, cell stencils and cell sides.

    Cells are the intervals between consecutive nodes, with the gap around the
    origin split at 0 into two half cells.  Interior cells use a four-node
    stencil confined to their side; the half cells interpolate linearly
    between the two innermost nodes.
    """
    key = ("cells",)
    if key in grid._cache:
        return grid._cache[key]
    n = grid.n_half
    x = grid.nodes
    bx = np.concatenate([x[:n], [0.0], x[n:]])
    ncell = 2 * n
    stencil = np.zeros((ncell, 4), dtype=np.intp)
    active = np.zeros((ncell, 4), dtype=bool)
    j = np.arange(n - 1)
    start = np.clip(j - 1, 0, n - 4)
    neg_st = start[:, None] + np.arange(4)
    stencil[: n - 1] = neg_st
    stencil[n + 1 :] = neg_st + n
    active[: n - 1] = True
    active[n + 1 :] = True
    for c in (n - 1, n):
        stencil[c, :2] = (n - 1, n)
        active[c, :2] = True
    negative = np.arange(ncell) < n
    layout = (bx, stencil, active, negative)
    grid._cache[key] = layout
    return layout


def _cell_weights(grid: Grid, mu: float, odd: int, kernel: str):
    """Per-cell quadrature weights acting on the stencil values.

    ``kernel`` selects the exponential factor inside the cell integral:
    ``"left"`` integrates ``exp(-(x_r - eta)) w(eta) p(eta)`` (referenced at the
    right end x_r), ``"right"`` integrates ``exp(-(eta - x_l)) w(eta) p(eta)``
    and ``"none"`` integrates ``w(eta) p(eta)``; ``w = (sgn)**odd exp(-mu|eta|)``.
    """
    key = ("cellw", float(mu), int(odd), kernel)
    if key in grid._cache:
        return grid._cache[key]
    bx, stencil, active, negative = _cell_layout(grid)
    x = grid.nodes
    xl, xr = bx[:-1], bx[1:]
    h = xr - xl
    rho = np.where(negative, mu, -mu)
    sigma = np.where(negative & (odd % 2 == 1), -1.0, 1.0)
    if kernel == "left":
        xref = xr
        a = -h * (1.0 + rho)
        t_nodes = (xr[:, None] - x[stencil]) / h[:, None]
    elif kernel == "right":
        xref = xl
        a = h * (rho - 1.0)
        t_nodes = (x[stencil] - xl[:, None]) / h[:, None]
    else:
        xref = xl
        a = h * rho
        t_nodes = (x[stencil] - xl[:, None]) / h[:, None]
    moments = _exp_moments(a)
    ncell = h.size
    wts = np.zeros((ncell, 4))
    full = active.all(axis=1)
    # four-point cells: solve V^T w = M with V[i, j] = t_i**j
    if np.any(full):
        V = t_nodes[full][:, :, None] ** np.arange(4)[None, None, :]
        wts[full] = np.linalg.solve(np.transpose(V, (0, 2, 1)), moments[full][:, :, None])[:, :, 0]
    lin = ~full
    if np.any(lin):
        t0, t1 = t_nodes[lin, 0], t_nodes[lin, 1]
        m0, m1 = moments[lin, 0], moments[lin, 1]
        # p(t) = f0 (t1 - t)/(t1 - t0) + f1 (t - t0)/(t1 - t0)
        wts[lin, 0] = (t1 * m0 - m1) / (t1 - t0)
        wts[lin, 1] = (m1 - t0 * m0) / (t1 - t0)
    scale = h * sigma * np.exp(rho * xref)
    wts *= scale[:, None]
    grid._cache[key] = (stencil, wts)
    return stencil, wts


def _decay_scan(x, inc):
    """``A_0 = 0``, ``A_i = exp(-(x_i - x_{i-1})) A_{i-1} + inc_{i-1}``.

    Vectorized by chunks over which ``x`` spans at most 30 so that the
    rescaled cumulative sums stay well inside floating-point range.
    """
    N = inc.shape[0]
    out = np.zeros((N + 1,) + inc.shape[1:], dtype=inc.dtype)
    s = 0
    carry = np.zeros(inc.shape[1:], dtype=inc.dtype)
    while s < N:
        e = int(np.searchsorted(x, x[s] + 30.0, side="right")) - 1
        e = min(max(e, s + 1), N)
        rel = x[s + 1 : e + 1] - x[s]
        grow = np.exp(rel).reshape((-1,) + (1,) * (inc.ndim - 1))
        decay = np.exp(-rel).reshape(grow.shape)
        partial = np.cumsum(grow * inc[s:e], axis=0)
        out[s + 1 : e + 1] = decay * (carry + partial)
        carry = out[e]
        s = e
    return out


def _node_breakpoints(grid: Grid):
    n = grid.n_half
    k = np.arange(2 * n)
    return np.where(k < n, k, k + 1)


def _scan_parts(values, grid: Grid, weight):
    coef, mu, odd = _WEIGHTS[weight]
    bx, _, _, _ = _cell_layout(grid)
    st_l, w_l = _cell_weights(grid, mu, odd, "left")
    st_r, w_r = _cell_weights(grid, mu, odd, "right")
    if values.ndim == 1:
        inc_l = np.sum(w_l * values[st_l], axis=1)
        inc_r = np.sum(w_r * values[st_r], axis=1)
    else:
        inc_l = np.einsum("ck,ckm->cm", w_l, values[st_l])
        inc_r = np.einsum("ck,ckm->cm", w_r, values[st_r])
    left = _decay_scan(bx, inc_l)
    right = _decay_scan(-bx[::-1], inc_r[::-1])[::-1]
    bp = _node_breakpoints(grid)
    return coef * left[bp], coef * right[bp]


def _values(f):
    if isinstance(f, GridFunction):
        return f.grid, f.values
    raise TypeError("expected a GridFunction")


def conv_phi(f: GridFunction, weight: str | None = None) -> GridFunction:
    """``phi * (w f)`` at the nodes, with ``w`` one of None, "phi", "dphi", "phi2".

    The weight is folded into the exact cell integrals rather than sampled.
    Data outside ``[-R, R]`` is taken to be zero.
    """
    grid, v = _values(f)
    left, right = _scan_parts(v, grid, weight)
    return GridFunction(grid, left + right)


def conv_phi_prime(f: GridFunction, weight: str | None = None) -> GridFunction:
    """``phi' * (w f)``; the kernel is ``-sgn(x) exp(-|x|)``."""
    grid, v = _values(f)
    left, right = _scan_parts(v, grid, weight)
    return GridFunction(grid, right - left)


def antiderivative_from_zero(f: GridFunction) -> GridFunction:
    """``int_0^xi f``, running outward from the origin in both directions.

    Integrates the same interpolant as the convolutions; across the gap the
    interpolant is linear, so the value at the origin is the mean of the two
    innermost samples.
    """
    grid, v = _values(f)
    n = grid.n_half
    stencil, w = _cell_weights(grid, 0.0, 0, "none")
    cell = np.sum(w * v[stencil], axis=1)
    out = np.empty_like(cell)
    # positive side: cells n .. 2n-1 end at nodes n .. 2n-1
    out[n:] = np.cumsum(cell[n:])
    # negative side: cells n-1 down to 0 end (leftward) at nodes n-1 .. 0
    out[:n] = -np.cumsum(cell[:n][::-1])[::-1]
    return GridFunction(grid, out)


def apply_Q(f: GridFunction, b: float, form: QForm | str = QForm.FORM1) -> GridFunction:
    """The compact nonlocal part of the linearized operator."""
    form = QForm(form)
    grid = f.grid
    ph = phi(grid)
    if form is QForm.FORM1:
        return 0.5 * (b - 3) * conv_phi(f, "dphi") - 0.5 * (2 * b - 3) * conv_phi_prime(f, "phi")
    v_m1 = antiderivative_from_zero(f)
    if form is QForm.FORM2A:
        return 1.5 * (b - 2) * conv_phi(f, "dphi") + (2 * b - 3) * ph * v_m1
    return -1.5 * (b - 2) * conv_phi_prime(f, "phi") + (3 - b) * ph * v_m1


def hs_norm_squared(kernel_id: str, grid: Grid, block: int = 512) -> float:
    """Trapezoid double quadrature of ``|K|**2`` over the grid square.

    ``K1(xi, eta) = -sgn(eta) exp(-|xi - eta| - |eta|)`` is the kernel of
    ``phi * (phi' v)``; ``K2(xi, eta) = sgn(xi) exp(-|xi|)`` for ``eta``
    between 0 and ``xi`` is the kernel of ``phi v_{-1}``.  On the jump of K2
    at ``|eta| = |xi|`` the mean of the one-sided values is used.
    """
    x = grid.nodes
    w = grid.weights
    total = 0.0
    for s in range(0, x.size, block):
        xi = x[s : s + block, None]
        wi = w[s : s + block, None]
        if kernel_id == "K1":
            k2 = np.exp(-2 * np.abs(xi - x[None, :]) - 2 * np.abs(x[None, :]))
        elif kernel_id == "K2":
            inside = (np.sign(x[None, :]) == np.sign(xi)) & (np.abs(x[None, :]) < np.abs(xi))
            edge = x[None, :] == xi
            k2 = np.exp(-2 * np.abs(xi)) * (inside + 0.5 * edge)
        else:
            raise ValueError(f"unknown kernel {kernel_id!r}; expected 'K1' or 'K2'")
        total += float(np.sum(wi * k2 * w[None, :]))
    return total


def stationary_residual(b: float, grid: Grid, amplitude: float = 1.0) -> GridFunction:
    """Left side of the stationary integral equation for the profile ``amplitude * phi``.

    ``u**2`` and ``(u')**2`` are both ``amplitude**2 * phi**2`` away from the
    peak, so the convolution is taken with the exact ``phi**2`` weight.
    """
    u = amplitude * phi(grid)
    one = grid.sample(lambda s: np.ones_like(s))
    a2 = amplitude * amplitude
    conv = conv_phi(b * a2 * one, "phi2") + conv_phi((3 - b) * a2 * one, "phi2")
    return -u + 0.5 * u * u + 0.25 * conv


def _smooth_derivative(f: GridFunction) -> GridFunction:
    """Fourth-order derivative from five-point stencils confined to each side."""
    grid = f.grid
    n = grid.n_half
    out = np.empty_like(f.values)
    for side in (grid.negative, grid.positive):
        xs = grid.nodes[side]
        vs = f.values[side]
        i = np.arange(n)
        start = np.clip(i - 2, 0, n - 5)
        idx = start[:, None] + np.arange(5)
        dx = xs[idx] - xs[:, None]
        # derivative weights: solve sum_j w_j dx_j**p = [p == 1] for p = 0..4
        V = np.transpose(dx[:, :, None] ** np.arange(5)[None, None, :], (0, 2, 1))
        rhs = np.zeros((n, 5, 1))
        rhs[:, 1, 0] = 1.0
        w = np.linalg.solve(V, rhs)[:, :, 0]
        out[side] = np.sum(w * vs[idx], axis=1)
    return GridFunction(grid, out)


def convolution_identity_residuals(f: GridFunction, which: int) -> float:
    """L2 norm of the residual of one of the two convolution identities.

    1: ``phi' * (phi' v') - phi * (phi' v) + phi' * (phi v) - 2 (v0 - v) phi'``
    2: ``phi * (phi' v) + phi' * (phi v) + 2 phi v_{-1}``
    """
    grid = f.grid
    ph = phi(grid)
    if which == 1:
        dv = _smooth_derivative(f)
        v0 = f.origin_value()
        res = (
            conv_phi_prime(dv, "dphi")
            - conv_phi(f, "dphi")
            + conv_phi_prime(f, "phi")
            - 2 * (v0 - f) * dphi(grid)
        )
    elif which == 2:
        res = conv_phi(f, "dphi") + conv_phi_prime(f, "phi") + 2 * ph * antiderivative_from_zero(f)
    else:
        raise ValueError(f"which must be 1 or 2, got {which!r}")
    return l2_norm(res)


def dense_convolution_matrix(
    grid: Grid, weight: str | None = None, prime: bool = False, order: int = 16
) -> np.ndarray:
    """Dense matrix of the same product-integration rule, built by brute force.

    Every cell integral is evaluated with Gauss-Legendre quadrature against the
    Lagrange basis of the cell's stencil, for every target node: O(n**2) work,
    sharing only the interpolation stencils with the fast path.  Used as an
    independent check of the prefix-scan evaluation.
    """
    coef, mu, odd = _WEIGHTS[weight]
    bx, stencil, active, _ = _cell_layout(grid)
    x = grid.nodes
    gx, gw = np.polynomial.legendre.leggauss(order)
    xl, xr = bx[:-1], bx[1:]
    h = xr - xl
    eta = xl[:, None] + 0.5 * h[:, None] * (gx[None, :] + 1.0)
    qw = 0.5 * h[:, None] * gw[None, :]
    wfun = np.exp(-mu * np.abs(eta)) * np.sign(eta) ** odd
    # Lagrange basis of each cell's stencil evaluated at its quadrature points
    nodes = x[stencil]
    basis = np.ones(stencil.shape + (order,))
    for i in range(4):
        for j in range(4):
            if i == j:
                continue
            ok = active[:, i] & active[:, j]
            num = eta - nodes[:, j, None]
            den = (nodes[:, i] - nodes[:, j])[:, None]
            basis[:, i, :] *= np.where(ok[:, None], num / np.where(ok[:, None], den, 1.0), 1.0)
    basis *= active[:, :, None]
    ncell = h.size
    contrib = np.zeros((ncell * order, x.size))
    rows = np.arange(ncell * order).reshape(ncell, order)
    for i in range(4):
        np.add.at(
            contrib,
            (rows, np.broadcast_to(stencil[:, i, None], rows.shape)),
            basis[:, i, :] * qw * wfun,
        )
    d = x[:, None] - eta.reshape(1, -1)
    kern = np.exp(-np.abs(d))
    if prime:
        kern = -np.sign(d) * kern
    return coef * kern @ contrib


def _cell_matrix(grid: Grid, mu: float, odd: int, kernel: str):
    stencil, wts = _cell_weights(grid, mu, odd, kernel)
    rows = np.repeat(np.arange(stencil.shape[0]), 4)
    return sp.csr_matrix((wts.ravel(), (rows, stencil.ravel())), shape=(stencil.shape[0], grid.size))


def convolution_matrix(grid: Grid, weight: str | None = None, prime: bool = False) -> np.ndarray:
    """Dense matrix of :func:`conv_phi` (or :func:`conv_phi_prime` with ``prime``).

    The decay between cells is written out with explicit exponentials rather
    than accumulated by the scan, giving a second evaluation of the same rule.
    """
    coef, mu, odd = _WEIGHTS[weight]
    bx, _, _, _ = _cell_layout(grid)
    bp = bx[_node_breakpoints(grid)]
    # cell c contributes to the left part of node xi when its right end bx[c+1] <= xi
    gap_l = bp[:, None] - bx[None, 1:]
    dec_l = np.where(gap_l >= 0, np.exp(-np.abs(gap_l)), 0.0)
    gap_r = bx[None, :-1] - bp[:, None]
    dec_r = np.where(gap_r >= 0, np.exp(-np.abs(gap_r)), 0.0)
    left = (_cell_matrix(grid, mu, odd, "left").T @ dec_l.T).T
    right = (_cell_matrix(grid, mu, odd, "right").T @ dec_r.T).T
    return coef * (right - left if prime else right + left)


def antiderivative_matrix(grid: Grid) -> np.ndarray:
    """Dense matrix of :func:`antiderivative_from_zero`."""
    n = grid.n_half
    cells = _cell_matrix(grid, 0.0, 0, "none").toarray()
    out = np.empty_like(cells)
    out[n:] = np.cumsum(cells[n:], axis=0)
    out[:n] = -np.cumsum(cells[:n][::-1], axis=0)[::-1]
    return out
