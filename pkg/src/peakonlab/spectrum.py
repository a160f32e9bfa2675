"""Eigenfunctions, dense discretizations, eigenvalues and pseudospectra."""
from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from .errors import DomainError, NumericalError, ParameterError, UnsupportedCaseError
from .grid import Grid, GridFunction, derivative_matrix, inner_product, l2_norm
from .kernels import QForm, antiderivative_matrix, convolution_matrix, dphi, phi
from .operator import LOG_ZONE, BParam, OperatorKind, apply_operator

__all__ = [
    "SpectralPoint",
    "IndicialRoots",
    "indicial_roots",
    "l0_eigenfunction",
    "l0_adjoint_eigenfunction",
    "ch_exact_eigenfunction",
    "m_profile",
    "point_eigenfunction",
    "OperatorMatrix",
    "discretize",
    "eigenvalues",
    "LambdaRect",
    "SpectralScan",
    "ResolventNorm",
    "pseudospectral_scan",
]


@dataclass(frozen=True)
class SpectralPoint:
    lam: complex
    b: float

    def __post_init__(self):
        lam = complex(self.lam)
        if not (math.isfinite(lam.real) and math.isfinite(lam.imag)):
            raise ParameterError(f"lambda must be finite, got {self.lam!r}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "b", BParam(self.b))


@dataclass(frozen=True)
class IndicialRoots:
    sigma1: complex
    sigma2: complex
    degenerate: bool
    zero_is_root: bool


def indicial_roots(lam, b) -> IndicialRoots:
    """Roots of ``s**2 + (2c - 5) s + (c - 2)(c - 1) = 0`` with ``c = lam + b``."""
    c = complex(lam) + BParam(b)
    p = 2 * c - 5
    q = (c - 2) * (c - 1)
    disc = p * p - 4 * q  # equals 17 - 8c
    root = cmath.sqrt(disc)
    # the larger-magnitude root first, the other from the product (no cancellation)
    big = -(p + root) / 2 if abs(-(p + root)) >= abs(-(p - root)) else -(p - root) / 2
    small = q / big if big != 0 else 0.0 + 0.0j
    s1, s2 = sorted((complex(small), complex(big)), key=lambda z: (z.real, z.imag))
    scale = max(1.0, abs(p) ** 2, abs(q))
    degenerate = abs(disc) <= 1e-12 * scale
    if degenerate:
        s1 = s2 = complex(-p / 2)
    zero = abs(c - 1) <= 1e-12 or abs(c - 2) <= 1e-12
    if zero:
        other = -p
        s1, s2 = sorted((0j, complex(other)), key=lambda z: (z.real, z.imag))
    return IndicialRoots(s1, s2, bool(degenerate), bool(zero))


def _log1mexp(x):
    """``log(1 - exp(x))`` for ``x < 0``."""
    return np.log(-np.expm1(x))


def l0_eigenfunction(lam, b, grid: Grid) -> GridFunction:
    """Square-integrable eigenfunction of L0 for ``0 < |Re lam| < 5/2 - b``.

    For ``Re lam > 0`` it lives on ``xi < 0`` and equals
    ``(exp(-xi) - 1)**(-lam) (1 - exp(xi))**(2 - b)``; for ``Re lam < 0`` it is the
    mirror image of the ``-lam`` eigenfunction.
    """
    lam = complex(lam)
    b = BParam(b)
    half = 2.5 - b
    if not (0 < abs(lam.real) < half):
        raise DomainError(
            f"L0 has an L2 eigenfunction only for 0 < |Re lambda| < 5/2 - b = {half:g}; got lambda = {lam}"
        )
    x = grid.nodes
    out = np.zeros(x.size, dtype=complex)
    if lam.real > 0:
        m = x < 0
        s = x[m]
        out[m] = np.exp(-lam * _log1mexp(s) - lam * (-s) + (2 - b) * _log1mexp(s))
    else:
        m = x > 0
        s = x[m]
        out[m] = np.exp(lam * (s + _log1mexp(-s)) - (b - 2) * _log1mexp(-s))
    return GridFunction(grid, out)


def l0_adjoint_eigenfunction(lam, b, grid: Grid) -> GridFunction:
    """Square-integrable eigenfunction of the adjoint of L0, for ``0 < |Re lam| < b - 5/2``.

    For ``Re lam > 0`` it lives on ``xi > 0`` as
    ``(exp(xi) - 1)**(-lam) / (1 - exp(-xi))**(3 - b)``; for ``Re lam < 0`` on
    ``xi < 0`` as ``(exp(-xi) - 1)**lam / (1 - exp(xi))**(3 - b)``.
    """
    lam = complex(lam)
    b = BParam(b)
    half = b - 2.5
    if not (half > 0 and 0 < abs(lam.real) < half):
        raise DomainError(
            "the adjoint of L0 has L2 eigenfunctions only if b > 5/2 and "
            f"0 < |Re lambda| < b - 5/2; got b = {b}, lambda = {lam}"
        )
    x = grid.nodes
    out = np.zeros(x.size, dtype=complex)
    if lam.real > 0:
        m = x > 0
        s = x[m]
        out[m] = np.exp(-lam * (s + _log1mexp(-s)) - (3 - b) * _log1mexp(-s))
    else:
        m = x < 0
        s = x[m]
        out[m] = np.exp(lam * (-s + _log1mexp(s)) - (3 - b) * _log1mexp(s))
    return GridFunction(grid, out)


def ch_exact_eigenfunction(lam, grid: Grid, m_minus=1.0, m_plus=0.0) -> GridFunction:
    """Closed-form solution of the eigenvalue problem for ``b = 2``, ``lam not in {-1, 0, 1}``."""
    lam = complex(lam)
    for bad in (-1.0, 0.0, 1.0):
        if abs(lam - bad) < 1e-14:
            raise DomainError(f"the closed form requires lambda != {{-1, 0, 1}}; got {lam}")
    x = grid.nodes
    out = np.zeros(x.size, dtype=complex)
    neg = x < 0
    s = x[neg]
    # (exp(-s) - 1)**(-lam) = exp(-lam (-s + log(1 - exp(s))))
    out[neg] = complex(m_minus) * (lam - np.exp(s)) * np.exp(-lam * (-s + _log1mexp(s)))
    pos = x > 0
    s = x[pos]
    out[pos] = complex(m_plus) * (lam + np.exp(-s)) * np.exp(lam * (s + _log1mexp(-s)))
    return GridFunction(grid, out / (lam * (1 - lam * lam)))


def m_profile(lam, b, m_minus, m_plus, grid: Grid) -> GridFunction:
    """``m = v - v''`` for an eigenfunction: ``m_+ e^{lam xi}(1 - e^{-xi})^{lam - b}`` and mirror."""
    lam = complex(lam)
    b = BParam(b)
    x = grid.nodes
    out = np.zeros(x.size, dtype=complex)
    if m_minus != 0:
        m = x < 0
        s = x[m]
        out[m] = complex(m_minus) * np.exp(lam * s - (lam + b) * _log1mexp(s))
    if m_plus != 0:
        m = x > 0
        s = x[m]
        out[m] = complex(m_plus) * np.exp(lam * s + (lam - b) * _log1mexp(-s))
    return GridFunction(grid, out)


def _outer_series(lam: complex, b: float, y: np.ndarray, kmax: int = 400, tol: float = 1e-17):
    """Decaying particular solution in powers of ``y = exp(xi)``, and ``xi``-derivative.

    Coefficients follow ``d_k ((k + lam)**2 - 1) = (2 P(k-1) + S(k-1)) d_{k-1}
    - P(k-2) d_{k-2} - [k == 0]``.
    """
    c = lam + b

    def P(k):
        return k * k + 2 * (2 - b) * k + (b - 1) * (b - 3)

    def S(k):
        return (c - 2) * (2 * k + 3 - 2 * b)

    ymax = float(np.max(y))
    d_prev2, d_prev = 0j, 0j
    f = np.zeros(y.shape, dtype=complex)
    df = np.zeros(y.shape, dtype=complex)
    yk = np.ones(y.shape)
    for k in range(kmax):
        rhs = (2 * P(k - 1) + S(k - 1)) * d_prev - P(k - 2) * d_prev2 - (1.0 if k == 0 else 0.0)
        d = rhs / ((k + lam) ** 2 - 1)
        f += d * yk
        df += k * d * yk
        if k > 10 and abs(d) * ymax**k * (k + 1) < tol * max(1.0, float(np.max(np.abs(f)))):
            return f, df
        d_prev2, d_prev = d_prev, d
        yk = yk * y
    raise NumericalError("outer series did not converge", lam=lam, b=b, ymax=ymax)


def _inner_solution(lam: complex, b: float, f0: complex, df0: complex, xi: np.ndarray):
    """Integrate the f-equation from ``xi = -1`` to the (negative, increasing) nodes ``xi``.

    Uses ``tau = log(-xi)`` and the state ``(f, xi f')``, in which the
    singular point at the origin becomes an asymptotically constant-coefficient
    system.
    """
    c = lam + b
    C = (c - 2) * (c - 1)

    def rhs(tau, u):
        x = -math.exp(tau)
        f, F = u
        E = -math.expm1(x)
        r = x / E
        xi2_f2 = (
            r * r * (-1.0 - C * f)
            - (c - 2) * r * (2 * F + (3 - 2 * b) * x * f)
            - 2 * (2 - b) * x * F
            - (b - 1) * (b - 3) * x * x * f
        )
        return [F, F + xi2_f2]

    taus = np.log(-xi)
    sol = solve_ivp(
        rhs,
        (0.0, float(taus[-1])),
        [complex(f0), complex(-df0)],
        method="DOP853",
        t_eval=taus,
        rtol=1e-12,
        atol=1e-14,
    )
    if not sol.success:
        raise NumericalError("integration of the f-equation failed", message=sol.message, lam=lam, b=b)
    return sol.y[0]


def point_eigenfunction(lam, b, grid: Grid) -> GridFunction:
    """Eigenfunction of L with ``0 < Re lam < 5/2 - b``, built from the ``m``-equation.

    On ``xi < 0`` the function is ``exp(lam xi) f(xi) (1 - exp(xi))**(2 - lam - b)``.
    ``f`` is the particular solution that stays bounded as ``xi -> -inf``: a
    power series in ``exp(xi)`` for ``xi <= -1``, continued toward the peak by
    integrating its second-order equation.  The homogeneous pieces
    ``exp(xi)`` (left) and ``exp(-xi)`` (right) are then added with amplitudes
    that minimize ``||L v - lam v||``.
    """
    lam = complex(lam)
    b = BParam(b)
    c = lam + b
    if abs(c - 1) < 1e-12 or abs(c - 2) < 1e-12:
        raise UnsupportedCaseError(
            f"lambda + b = {c} gives the logarithmic Frobenius branch, which is not constructed"
        )
    if not (0 < lam.real < 2.5 - b):
        raise DomainError(f"point spectrum requires 0 < Re lambda < 5/2 - b = {2.5 - b:g}; got {lam}")
    if abs(lam * lam - 1) < 1e-12:
        raise UnsupportedCaseError("lambda = 1 makes the outer series resonant")
    x = grid.nodes
    neg = np.nonzero(x < 0)[0]
    xs = x[neg]
    far = xs <= -1.0
    f = np.empty(xs.size, dtype=complex)
    f[far], _ = _outer_series(lam, b, np.exp(xs[far]))
    near = ~far
    if np.any(near):
        f1, df1 = _outer_series(lam, b, np.array([math.exp(-1.0)]))
        f[near] = _inner_solution(lam, b, f1[0], df1[0], xs[near])
    vp = np.zeros(x.size, dtype=complex)
    vp[neg] = np.exp(lam * xs + (2 - c) * _log1mexp(xs)) * f
    v_part = GridFunction(grid, vp)
    left = GridFunction(grid, np.where(x < 0, np.exp(np.minimum(x, 0.0)), 0.0))
    right = GridFunction(grid, np.where(x > 0, np.exp(-np.maximum(x, 0.0)), 0.0))
    sw = np.sqrt(grid.weights)
    cols = [(apply_operator(OperatorKind.L, u, b) - lam * u).values * sw for u in (left, right)]
    target = -(apply_operator(OperatorKind.L, v_part, b) - lam * v_part).values * sw
    coef, *_ = np.linalg.lstsq(np.stack(cols, axis=1).astype(complex), target, rcond=None)
    v = v_part + coef[0] * left + coef[1] * right
    if not v.is_finite():
        raise NumericalError("eigenfunction construction produced non-finite values", lam=lam, b=b)
    return v


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense matrix acting on nodal values, tied to its grid and parameters."""

    matrix: np.ndarray = field(repr=False)
    kind: OperatorKind
    b: float
    grid: Grid = field(repr=False)

    def apply(self, f: GridFunction) -> GridFunction:
        return GridFunction(self.grid, self.matrix @ f.values)

    @property
    def shape(self):
        return self.matrix.shape


def discretize(kind, b, grid: Grid, q_form=QForm.FORM1) -> OperatorMatrix:
    """Assemble the matrix of :func:`apply_operator` from its stencil and kernel parts."""
    kind = OperatorKind(kind)
    b = BParam(b)
    q_form = QForm(q_form)
    ph = phi(grid.nodes)
    dp = dphi(grid.nodes)
    if kind in (OperatorKind.L, OperatorKind.L0):
        D = derivative_matrix(grid, "right", inflow_zero=True, log_zone=LOG_ZONE, peak_inflow=True)
        M = (1 - ph)[:, None] * D
        M[np.diag_indices_from(M)] += (2 - b) * dp
        if kind is OperatorKind.L:
            M += _q_matrix(grid, b, q_form)
    else:
        D = derivative_matrix(grid, "left", inflow_zero=False, log_zone=LOG_ZONE, peak_inflow=True)
        M = (ph - 1)[:, None] * D
        M[np.diag_indices_from(M)] += (3 - b) * dp
        if kind is OperatorKind.LSTAR:
            M += 0.5 * (b - 3) * dp[:, None] * convolution_matrix(grid)
            M += 0.5 * (2 * b - 3) * ph[:, None] * convolution_matrix(grid, prime=True)
    return OperatorMatrix(M, kind, b, grid)


def _q_matrix(grid: Grid, b: float, form: QForm) -> np.ndarray:
    ph = phi(grid.nodes)
    if form is QForm.FORM1:
        return 0.5 * (b - 3) * convolution_matrix(grid, "dphi") - 0.5 * (2 * b - 3) * convolution_matrix(
            grid, "phi", prime=True
        )
    anti = ph[:, None] * antiderivative_matrix(grid)
    if form is QForm.FORM2A:
        return 1.5 * (b - 2) * convolution_matrix(grid, "dphi") + (2 * b - 3) * anti
    return -1.5 * (b - 2) * convolution_matrix(grid, "phi", prime=True) + (3 - b) * anti


def eigenvalues(M, check_backward_error: bool = False, tol: float = 1e-8) -> np.ndarray:
    """All eigenvalues of a dense square matrix (LAPACK Hessenberg QR).

    With ``check_backward_error`` the eigenvectors are computed as well and
    every pair must satisfy ``||A v - lam v|| <= tol ||A|| ||v||``.
    """
    A = M.matrix if isinstance(M, OperatorMatrix) else np.asarray(M)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ParameterError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ParameterError("matrix has non-finite entries")
    try:
        if not check_backward_error:
            return sla.eigvals(A, check_finite=False)
        w, V = sla.eig(A, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigenvalue iteration did not converge", detail=str(exc), n=A.shape[0]) from exc
    norm = np.linalg.norm(A, 2) if A.size else 0.0
    res = np.linalg.norm(A @ V - V * w, axis=0) / np.maximum(np.linalg.norm(V, axis=0), 1e-300)
    worst = float(np.max(res)) / max(norm, 1e-300) if res.size else 0.0
    if worst > tol:
        raise NumericalError("backward error above tolerance", backward_error=worst, tol=tol)
    return w


@dataclass(frozen=True)
class LambdaRect:
    """Rectangle of spectral parameters sampled on a tensor grid."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float
    n_re: int
    n_im: int

    def __post_init__(self):
        vals = (self.re_min, self.re_max, self.im_min, self.im_max)
        if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in vals):
            raise ParameterError(f"lambda rectangle bounds must be finite reals, got {vals}")
        for n in (self.n_re, self.n_im):
            if int(n) != n or n < 1:
                raise ParameterError(f"lambda rectangle counts must be positive integers, got {n!r}")
        if self.re_min > self.re_max or self.im_min > self.im_max:
            raise ParameterError("lambda rectangle needs re_min <= re_max and im_min <= im_max")
        if (self.n_re > 1) != (self.re_max > self.re_min) or (self.n_im > 1) != (self.im_max > self.im_min):
            raise ParameterError("a degenerate side of the lambda rectangle must have exactly one sample")

    @property
    def re_values(self) -> np.ndarray:
        return np.linspace(self.re_min, self.re_max, int(self.n_re))

    @property
    def im_values(self) -> np.ndarray:
        return np.linspace(self.im_min, self.im_max, int(self.n_im))


@dataclass(frozen=True, eq=False)
class SpectralScan:
    """``sigma_min`` of ``M - lam I`` on a rectangle; ``sigma_min[j, i]`` is at ``re[i] + 1j im[j]``."""

    re_values: np.ndarray
    im_values: np.ndarray
    sigma_min: np.ndarray
    kind: OperatorKind
    b: float
    grid_key: tuple
    failures: dict = field(default_factory=dict)

    def rows(self):
        """``(re, im, sigma_min)`` triples, real part varying fastest."""
        for j, im in enumerate(self.im_values):
            for i, re in enumerate(self.re_values):
                yield float(re), float(im), float(self.sigma_min[j, i])

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "b": self.b,
            "grid": list(self.grid_key),
            "re_values": self.re_values,
            "im_values": self.im_values,
            "sigma_min": self.sigma_min,
            "failures": {f"{k[0]!r}{k[1]:+}j": v for k, v in self.failures.items()},
        }

    def to_csv(self, path) -> None:
        from .export import write_csv

        write_csv(path, ["re_lambda", "im_lambda", "sigma_min"], self.rows())

    def to_svg(self, path) -> None:
        from .export import heatmap_svg

        heatmap_svg(
            path,
            self.re_values,
            self.im_values,
            np.log10(np.maximum(self.sigma_min, 1e-300)),
            title=f"log10 sigma_min, {self.kind.value}, b = {self.b:g}",
        )


class ResolventNorm:
    """``sigma_min(M - lam I)`` in the quadrature-weighted norm, for many ``lam``.

    The weighted matrix ``W^{1/2} M W^{-1/2}`` is reduced once to complex Schur
    form ``Z T Z^*``; for each ``lam`` the largest eigenvalue of
    ``(T - lam)^{-*} (T - lam)^{-1}`` is found by Lanczos with full
    reorthogonalization, each step costing two triangular solves.
    """

    def __init__(self, M: OperatorMatrix, seed: int = 12345):
        sw = np.sqrt(M.grid.weights)
        B = sw[:, None] * M.matrix / sw[None, :]
        self.T, _ = sla.schur(B.astype(complex), output="complex")
        self.n = self.T.shape[0]
        rng = np.random.default_rng(seed)
        self._start = rng.standard_normal(self.n) + 1j * rng.standard_normal(self.n)
        self._start /= np.linalg.norm(self._start)

    def __call__(self, lam, maxiter: int = 80, rtol: float = 1e-10) -> float:
        R = self.T - complex(lam) * np.eye(self.n)
        diag = np.abs(np.diag(R))
        if np.min(diag) == 0.0:
            return 0.0
        Q = np.zeros((self.n, maxiter + 1), dtype=complex)
        alpha = np.zeros(maxiter)
        beta = np.zeros(maxiter)
        Q[:, 0] = self._start
        mu_old = None
        for k in range(maxiter):
            y = sla.solve_triangular(R, Q[:, k], check_finite=False)
            z = sla.solve_triangular(R, y, trans="C", check_finite=False)
            if not np.all(np.isfinite(z)):
                return 0.0
            alpha[k] = float(np.real(np.vdot(Q[:, k], z)))
            z = z - Q[:, : k + 1] @ (Q[:, : k + 1].conj().T @ z)
            z = z - Q[:, : k + 1] @ (Q[:, : k + 1].conj().T @ z)
            beta[k] = float(np.linalg.norm(z))
            mu = float(sla.eigvalsh_tridiagonal(alpha[: k + 1], beta[:k], select="i", select_range=(k, k))[0])
            if mu_old is not None and abs(mu - mu_old) <= rtol * abs(mu):
                return 1.0 / math.sqrt(mu)
            mu_old = mu
            if beta[k] <= 1e-300 * max(mu, 1.0):
                return 1.0 / math.sqrt(mu)
            Q[:, k + 1] = z / beta[k]
        raise NumericalError("inverse Lanczos did not converge", lam=complex(lam), last=mu_old)

    def dense(self, lam) -> float:
        """Reference value from a full SVD of ``T - lam I``."""
        R = self.T - complex(lam) * np.eye(self.n)
        return float(sla.svdvals(R)[-1])


def pseudospectral_scan(kind, b, grid: Grid, rect: LambdaRect, threads: int = 1) -> SpectralScan:
    """Smallest weighted singular value of ``M - lam I`` over a rectangle of ``lam``.

    Points are independent; with ``threads > 1`` they are evaluated
    concurrently, the output order being fixed by the rectangle.  A point
    whose Lanczos iteration fails falls back to a dense SVD; the failure is
    recorded in ``failures`` either way.
    """
    if not isinstance(rect, LambdaRect):
        raise ParameterError("rect must be a LambdaRect")
    M = discretize(kind, b, grid)
    res = ResolventNorm(M)
    lams = [complex(re, im) for im in rect.im_values for re in rect.re_values]
    failures = {}

    def one(lam):
        try:
            return res(lam)
        except NumericalError as exc:
            failures[(lam.real, lam.imag)] = str(exc)
            return res.dense(lam)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            vals = list(pool.map(one, lams))
    else:
        vals = [one(lam) for lam in lams]
    sig = np.asarray(vals, dtype=float).reshape(int(rect.n_im), int(rect.n_re))
    return SpectralScan(rect.re_values, rect.im_values, sig, M.kind, M.b, grid.key, dict(sorted(failures.items())))
