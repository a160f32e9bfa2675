"""Exact characteristics for the truncated problem and time stepping of the full one."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ContractError, DomainError, NumericalError, ParameterError
from .grid import Grid, GridFunction, build_grid, inner_product, l2_norm
from .kernels import apply_Q, dphi, phi, sgn
from .operator import BParam, OperatorKind, adjoint_null_vector, apply_operator

__all__ = [
    "characteristic_map",
    "characteristic_preimage",
    "IvpSpec",
    "truncated_solution",
    "truncated_norms",
    "NormSeries",
    "truncated_norm_series",
    "LimitIntegral",
    "limit_integral_diagnostic",
    "l0_unstable_mode",
    "reformulate_tilde",
    "System",
    "EvolutionTrace",
    "evolve_full",
    "Decomposition",
    "decompose_secondary",
    "AlphaBetaTrace",
    "alpha_beta_ode",
    "growth_rate_fit",
]


def characteristic_map(t, s):
    """Position at time t of the characteristic that starts at ``s != 0``."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr == 0):
        raise DomainError("the characteristic map needs s != 0: the peak is a fixed point reached only as t -> inf")
    a = np.abs(s_arr)
    # right side: |X| = log(1 + (e^|s| - 1) e^-t) falls toward the peak; the left side runs with +t
    tt = np.where(s_arr > 0, -float(t), float(t))
    with np.errstate(over="ignore"):
        e = np.expm1(a) * np.exp(tt)
        mag = np.where(e > 1e300, a + tt, np.log1p(np.minimum(e, 1e300)))
    out = np.sign(s_arr) * mag
    return float(out) if out.ndim == 0 else out


def characteristic_preimage(t, xi):
    """Inverse of :func:`characteristic_map` in ``s`` at fixed ``t``."""
    xi_arr = np.asarray(xi, dtype=float)
    if np.any(xi_arr == 0):
        raise DomainError("the characteristic preimage needs xi != 0")
    a = np.abs(xi_arr)
    # |s| = log(1 + (e^|xi| - 1) e^t) on the right; the left side runs with -t
    tt = np.where(xi_arr > 0, float(t), -float(t))
    with np.errstate(over="ignore"):
        e = np.expm1(a) * np.exp(tt)
        mag = np.where(e > 1e300, a + tt, np.log1p(np.minimum(e, 1e300)))
    out = np.sign(xi_arr) * mag
    return float(out) if out.ndim == 0 else out


def _bump(s, center, width):
    z = (np.asarray(s, dtype=float) - center) / width
    inside = np.abs(z) < 1
    out = np.zeros_like(z)
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - z[inside] ** 2))
    return out


_FAMILIES = {
    # name -> (parameter names with defaults, callable(s, **params))
    "bump": ({"center": -2.0, "width": 1.0, "amplitude": 1.0}, lambda s, center, width, amplitude: amplitude * _bump(s, center, width)),
    "gaussian": (
        {"center": 0.0, "width": 1.0, "amplitude": 1.0},
        lambda s, center, width, amplitude: amplitude * np.exp(-(((np.asarray(s) - center) / width) ** 2)),
    ),
    "plateau": (
        {"left": 0.0, "right": 2.0, "edge": 0.2, "amplitude": 1.0},
        lambda s, left, right, edge, amplitude: amplitude * _plateau(s, left, right, edge),
    ),
    "l0_mode": ({"lambda0": 0.25}, None),
}


def _plateau(s, left, right, edge):
    """Smooth indicator of ``(left, right)`` with transition layers of width ``edge`` inside it."""
    s = np.asarray(s, dtype=float)

    def step(u):
        u = np.clip(u, 0.0, 1.0)
        a = np.where(u > 0, np.exp(-1.0 / np.maximum(u, 1e-300)), 0.0)
        b = np.where(u < 1, np.exp(-1.0 / np.maximum(1 - u, 1e-300)), 0.0)
        return a / (a + b)

    return step((s - left) / edge) * step((right - s) / edge)


@dataclass(frozen=True, eq=False)
class IvpSpec:
    """Initial-value problem for the truncated operator L0.

    ``initial`` is either a family name (``"bump"``, ``"gaussian"``,
    ``"plateau"``, ``"l0_mode"``) with ``params``, or a GridFunction.  ``grid``
    serves as the ``s``-grid for norm quadratures; it defaults to the grid of
    a GridFunction, otherwise to the default desk-scale grid.
    """

    b: float
    initial: object
    T: float = 1.0
    cadence: float = 0.1
    params: dict = field(default_factory=dict)
    grid: Grid | None = None

    def __post_init__(self):
        object.__setattr__(self, "b", BParam(self.b))
        if not (math.isfinite(self.T) and self.T > 0):
            raise ParameterError(f"T must be positive, got {self.T!r}")
        if not (math.isfinite(self.cadence) and self.cadence > 0):
            raise ParameterError(f"cadence must be positive, got {self.cadence!r}")
        if isinstance(self.initial, GridFunction):
            if not self.initial.is_finite():
                raise ParameterError("initial data must be finite")
            if self.grid is None:
                object.__setattr__(self, "grid", self.initial.grid)
        else:
            if self.initial not in _FAMILIES:
                raise ParameterError(f"unknown initial-data family {self.initial!r}; choose from {sorted(_FAMILIES)}")
            defaults, _ = _FAMILIES[self.initial]
            unknown = set(self.params) - set(defaults)
            if unknown:
                raise ParameterError(f"unknown parameters {sorted(unknown)} for family {self.initial!r}")
            merged = {**defaults, **self.params}
            object.__setattr__(self, "params", merged)
            if self.initial == "l0_mode":
                _check_mode(merged["lambda0"], self.b)
            if self.grid is None:
                object.__setattr__(self, "grid", build_grid(40.0, 2000, 3.0))

    def v0(self, s) -> np.ndarray:
        """Initial data at arbitrary points ``s`` (zero outside ``[-R, R]``)."""
        s = np.asarray(s, dtype=float)
        if isinstance(self.initial, GridFunction):
            return _interpolate(self.initial, s)
        if self.initial == "l0_mode":
            return _mode_values(self.params["lambda0"], self.b, s)
        _, fn = _FAMILIES[self.initial]
        out = fn(s, **self.params)
        R = self.grid.R
        return np.where(np.abs(s) <= R, out, 0.0)


def _interpolate(f: GridFunction, s: np.ndarray) -> np.ndarray:
    grid = f.grid
    vals = f.values
    out = np.zeros(s.shape, dtype=vals.dtype)
    for side, mask in ((grid.negative, s < 0), (grid.positive, s > 0)):
        xs = grid.nodes[side]
        inside = mask & (s >= xs[0]) & (s <= xs[-1])
        if np.any(inside):
            out[inside] = CubicSpline(xs, vals[side])(s[inside])
        # between the innermost node and the origin: hold the innermost value
        gap = mask & (np.abs(s) < grid.xi_min)
        out[gap] = vals[side][-1 if side == grid.negative else 0]
    return out


def _check_mode(lam0, b):
    if not (b < 2.5 and 0 < lam0 < 2.5 - b):
        raise DomainError(f"the unstable L0 mode needs b < 5/2 and lambda0 in (0, 5/2 - b); got b = {b}, lambda0 = {lam0}")


def _mode_values(lam0, b, s):
    out = np.zeros(s.shape)
    m = s < 0
    sm = s[m]
    out[m] = np.exp(lam0 * sm - (lam0 + b - 2) * np.log(-np.expm1(sm)))
    return out


def l0_unstable_mode(lambda0, b, grid: Grid) -> GridFunction:
    """``exp(lambda0 s) / (1 - exp(s))**(lambda0 + b - 2)`` on ``s < 0``, zero on ``s > 0``."""
    b = BParam(b)
    lam0 = float(lambda0)
    _check_mode(lam0, b)
    return GridFunction(grid, _mode_values(lam0, b, grid.nodes))


def truncated_solution(spec: IvpSpec, t, grid: Grid | None = None) -> GridFunction:
    """Exact solution of ``v_t = (1 - phi) v_xi + (2 - b) phi' v`` at time t."""
    t = float(t)
    if t < 0:
        raise ParameterError(f"t must be >= 0, got {t}")
    grid = grid or spec.grid
    xi = grid.nodes
    if t == 0:
        return GridFunction(grid, spec.v0(xi))
    s = characteristic_preimage(t, xi)
    with np.errstate(over="ignore"):
        amp = np.where(
            s > 0,
            1.0 + math.expm1(t) * np.exp(-np.abs(s)),
            1.0 + math.expm1(-t) * np.exp(-np.abs(s)),
        )
    factor = amp ** (spec.b - 2)
    v0 = spec.v0(s)
    out = np.where(v0 == 0, 0.0, v0 * factor)
    return GridFunction(grid, out)


def _norm_factor(b, t, s):
    e = np.exp(-np.abs(s))
    amp = np.where(s > 0, 1.0 + math.expm1(t) * e, 1.0 + math.expm1(-t) * e)
    return amp ** (2 * b - 5)


def truncated_norms(spec: IvpSpec, t) -> tuple:
    """``(l2_right, l2_left)`` at time t by quadrature over the initial positions ``s``."""
    t = float(t)
    if t < 0:
        raise ParameterError(f"t must be >= 0, got {t}")
    grid = spec.grid
    s = grid.nodes
    dens = grid.weights * np.abs(spec.v0(s)) ** 2 * _norm_factor(spec.b, t, s)
    right = float(np.sum(dens[grid.positive]))
    left = float(np.sum(dens[grid.negative]))
    return math.sqrt(right), math.sqrt(left)


@dataclass(frozen=True, eq=False)
class NormSeries:
    t: np.ndarray
    l2_right: np.ndarray
    l2_left: np.ndarray

    @property
    def l2_total(self) -> np.ndarray:
        return np.hypot(self.l2_left, self.l2_right)


def truncated_norm_series(spec: IvpSpec, times=None) -> NormSeries:
    """:func:`truncated_norms` on ``times`` (default: multiples of the cadence up to T)."""
    if times is None:
        n = int(round(spec.T / spec.cadence))
        times = np.linspace(0.0, n * spec.cadence, n + 1)
    times = np.asarray(times, dtype=float)
    vals = np.array([truncated_norms(spec, t) for t in times])
    return NormSeries(times, vals[:, 0], vals[:, 1])


@dataclass(frozen=True)
class LimitIntegral:
    """Refinement study of ``int_{s<0} |v0|^2 (1 - e^s)^(2b - 5) ds``.

    ``value`` is None when the sequence keeps growing under refinement.
    """

    n_halfs: tuple
    values: tuple
    diverges: bool
    value: float | None


def limit_integral_diagnostic(spec: IvpSpec, n_halfs=(500, 1000, 2000, 4000)) -> LimitIntegral:
    """Evaluate the long-time limit of the squared left norm on refined grids.

    The sequence is declared divergent when it is still increasing at the
    finest level and the last increment has not shrunk to below half of the
    previous one (convergent trapezoid sums shrink by about 4x per doubling).
    """
    if len(n_halfs) < 3:
        raise ParameterError("need at least three refinement levels")
    g0 = spec.grid
    vals = []
    for n in n_halfs:
        g = build_grid(g0.R, int(n), g0.gamma)
        s = g.nodes[g.negative]
        w = g.weights[g.negative]
        vals.append(float(np.sum(w * np.abs(spec.v0(s)) ** 2 * (-np.expm1(s)) ** (2 * spec.b - 5))))
    d_prev = vals[-2] - vals[-3]
    d_last = vals[-1] - vals[-2]
    tol = 1e-9 * max(abs(vals[-1]), 1e-300)
    diverges = d_last > tol and abs(d_last) >= 0.5 * abs(d_prev)
    return LimitIntegral(tuple(int(n) for n in n_halfs), tuple(vals), bool(diverges), None if diverges else vals[-1])


def reformulate_tilde(v: GridFunction, jump_tol: float = 1e-6) -> GridFunction:
    """``v - v0 phi`` with ``v0`` the mean of the innermost samples.

    Continuity at the peak is checked by extrapolating each side linearly to
    0; a mismatch above ``jump_tol * max(1, sup|v|)`` raises ContractError.
    """
    grid = v.grid
    n = grid.n_half
    x = grid.nodes
    y = v.values
    left = y[n - 1] + (y[n - 1] - y[n - 2]) * (0 - x[n - 1]) / (x[n - 1] - x[n - 2])
    right = y[n] + (y[n + 1] - y[n]) * (0 - x[n]) / (x[n + 1] - x[n])
    scale = max(1.0, float(np.max(np.abs(y))))
    if abs(left - right) > jump_tol * scale:
        raise ContractError(f"v jumps across the peak (one-sided limits {left!r} and {right!r})")
    return v - v.origin_value() * phi(grid)


class System(str, enum.Enum):
    EIGP2 = "eigp2"
    EIGP3 = "eigp3"
    EIGP4 = "eigp4"


@dataclass(frozen=True, eq=False)
class EvolutionTrace:
    """Recorded diagnostics of a time-stepped evolution.

    ``alpha`` and ``beta`` are recorded only when the projection dynamics
    is integrated alongside (``eigp4`` with ``alpha0``/``beta0``); otherwise
    they are zero and ``decomposition_active`` is False.
    """

    t: np.ndarray
    l2_total: np.ndarray
    l2_left: np.ndarray
    l2_right: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    inv_one: np.ndarray
    inv_sgn: np.ndarray
    balance_residual: np.ndarray
    system: System
    b: float
    dt: float
    decomposition_active: bool = False
    snapshots: tuple = ()
    final: GridFunction | None = None

    COLUMNS = ("t", "l2_total", "l2_left", "l2_right", "alpha", "beta", "inv_one", "inv_sgn", "balance_residual")

    def __post_init__(self):
        if np.any(np.diff(self.t) <= 0):
            raise ContractError("trace times must be strictly increasing")
        for name in self.COLUMNS:
            if not np.all(np.isfinite(getattr(self, name))):
                raise NumericalError(f"non-finite values in trace column {name}")

    @property
    def alpha_beta_norm(self) -> np.ndarray:
        return np.hypot(self.alpha, self.beta)

    def to_dict(self) -> dict:
        out = {"system": self.system.value, "b": self.b, "dt": self.dt, "decomposition_active": self.decomposition_active}
        for c in self.COLUMNS:
            out[c] = getattr(self, c)
        return out

    def rows(self):
        cols = [getattr(self, c) for c in self.COLUMNS]
        for i in range(self.t.size):
            yield tuple(float(c[i]) for c in cols)

    def to_csv(self, path) -> None:
        from .export import write_csv

        write_csv(path, list(self.COLUMNS), self.rows())

    def to_svg(self, path) -> None:
        from .export import lines_svg

        series = {c: getattr(self, c) for c in self.COLUMNS[1:]}
        lines_svg(path, self.t, series, title=f"{self.system.value}, b = {self.b:g}")


def _five_point_derivative(y: np.ndarray, dt: float) -> np.ndarray:
    n = y.size
    if n < 5:
        raise ParameterError("need at least four time steps to evaluate the balance residual")
    d = np.empty(n)
    d[2:-2] = (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * dt)
    d[0] = (-25 * y[0] + 48 * y[1] - 36 * y[2] + 16 * y[3] - 3 * y[4]) / (12 * dt)
    d[1] = (-3 * y[0] - 10 * y[1] + 18 * y[2] - 6 * y[3] + y[4]) / (12 * dt)
    d[-1] = (25 * y[-1] - 48 * y[-2] + 36 * y[-3] - 16 * y[-4] + 3 * y[-5]) / (12 * dt)
    d[-2] = (3 * y[-1] + 10 * y[-2] - 18 * y[-3] + 6 * y[-4] - y[-5]) / (12 * dt)
    return d


def _rhs_factory(system: System, b: float, grid: Grid):
    ph = phi(grid)
    dp = dphi(grid)
    pdp = ph * dp
    n = grid.n_half
    c = 1.5 * (b - 2)

    if system is System.EIGP4:
        return lambda w: apply_operator(OperatorKind.L, w, b)
    if system is System.EIGP3:

        def rhs(w):
            proj = inner_product(pdp, w)
            out = apply_operator(OperatorKind.L, w, b) - c * proj * ph
            vals = np.array(out.values)
            # the exact right-hand side tends to c <phi phi', w> (1 - phi) -> 0 at the peak
            vals[n - 1 : n + 1] = c * proj * (1 - ph.values[n - 1 : n + 1])
            return GridFunction(grid, vals)

        return rhs

    from .grid import derivative_upwind
    from .operator import LOG_ZONE

    def rhs2(v):
        v0 = v.origin_value()
        transport = (1 - ph) * derivative_upwind(v, "right", inflow_zero=True, log_zone=LOG_ZONE, peak_inflow=True)
        return transport + (b - 2) * (v0 - v) * dp + apply_Q(v, b)

    return rhs2


def evolve_full(
    system,
    v_init: GridFunction,
    b,
    T: float,
    dt: float | None = None,
    record_dt: float | None = None,
    alpha0: float | None = None,
    beta0: float | None = None,
    keep_snapshots: bool = False,
) -> EvolutionTrace:
    """Classical fourth-order Runge-Kutta integration of one linearized system.

    The time step must satisfy ``dt <= 0.5 h_eff``, where ``h_eff`` is the
    smallest node spacing divided by the local transport speed ``1 - phi``;
    the default is ``0.25 h_eff``.  With ``alpha0`` and ``beta0`` (eigp4
    only) the projection dynamics is integrated alongside and recorded.
    The balance residual ``|d/dt ||w||^2 / 2 - Re <F(w), w>|`` uses the
    system's own right-hand side F and a five-point difference of the per-step
    squared norms.
    """
    system = System(system)
    b = BParam(b)
    grid = v_init.grid
    T = float(T)
    if not (math.isfinite(T) and T > 0):
        raise ParameterError(f"T must be positive, got {T!r}")
    h_eff = grid.effective_spacing()
    if dt is None:
        dt = 0.25 * h_eff
    dt = float(dt)
    if not (dt > 0 and dt <= 0.5 * h_eff * (1 + 1e-12)):
        raise ParameterError(f"dt = {dt:g} violates the transport stability bound dt <= 0.5 h_eff = {0.5 * h_eff:g}")
    coupled = alpha0 is not None or beta0 is not None
    if coupled and system is not System.EIGP4:
        raise ParameterError("the projection dynamics is only coupled to eigp4")
    nsteps = max(int(math.ceil(T / dt - 1e-9)), 4)
    dt = T / nsteps
    if record_dt is None:
        record_dt = T / 100
    every = max(1, int(round(record_dt / dt)))
    rec = sorted(set(list(range(0, nsteps + 1, every)) + [nsteps]))

    rhs = _rhs_factory(system, b, grid)
    ph = phi(grid)
    pdp = ph * dphi(grid)
    one = grid.sample(lambda s: np.ones_like(s))
    sg = sgn(grid)
    k = 2 - b

    def full(state):
        w, a, be = state
        fw = rhs(w)
        if not coupled:
            return fw, 0.0, 0.0
        proj = inner_product(pdp, w)
        return fw, k * be + 1.5 * k * proj, k * a

    w = v_init
    a = float(alpha0 or 0.0)
    be = float(beta0 or 0.0)
    n2 = np.empty(nsteps + 1)
    power = np.empty(nsteps + 1)
    recs = {}
    snaps = []
    rec_set = set(rec)
    t = 0.0
    for j in range(nsteps + 1):
        k1 = full((w, a, be))
        n2[j] = l2_norm(w) ** 2
        power[j] = float(np.real(inner_product(k1[0], w)))
        if j in rec_set:
            recs[j] = (
                t,
                l2_norm(GridFunction(grid, np.where(grid.nodes < 0, w.values, 0))),
                l2_norm(GridFunction(grid, np.where(grid.nodes > 0, w.values, 0))),
                a,
                be,
                inner_product(one, w),
                inner_product(sg, w),
            )
            if keep_snapshots:
                snaps.append(w)
        if j == nsteps:
            break
        k2 = full((w + 0.5 * dt * k1[0], a + 0.5 * dt * k1[1], be + 0.5 * dt * k1[2]))
        k3 = full((w + 0.5 * dt * k2[0], a + 0.5 * dt * k2[1], be + 0.5 * dt * k2[2]))
        k4 = full((w + dt * k3[0], a + dt * k3[1], be + dt * k3[2]))
        w = w + (dt / 6) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        a = a + (dt / 6) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        be = be + (dt / 6) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        t = (j + 1) * dt
        if not w.is_finite() or not math.isfinite(a) or not math.isfinite(be):
            raise NumericalError(f"non-finite state at t = {t:g}", t=t, step=j + 1)

    dn2 = _five_point_derivative(n2, dt)
    idx = np.array(rec)
    cols = np.array([recs[j] for j in rec], dtype=complex)
    left, right = cols[:, 1].real, cols[:, 2].real
    inv_one, inv_sgn = cols[:, 5], cols[:, 6]
    if np.all(inv_one.imag == 0) and np.all(inv_sgn.imag == 0):
        inv_one, inv_sgn = inv_one.real, inv_sgn.real
    return EvolutionTrace(
        t=cols[:, 0].real,
        l2_total=np.hypot(left, right),
        l2_left=left,
        l2_right=right,
        alpha=cols[:, 3].real,
        beta=cols[:, 4].real,
        inv_one=inv_one,
        inv_sgn=inv_sgn,
        balance_residual=np.abs(0.5 * dn2[idx] - power[idx]),
        system=system,
        b=b,
        dt=dt,
        decomposition_active=coupled,
        snapshots=tuple(snaps),
        final=w,
    )


class Decomposition(NamedTuple):
    alpha: float
    beta: float
    w: GridFunction
    unique: bool


def _scalar(z):
    z = complex(z)
    return z.real if z.imag == 0 else z


def decompose_secondary(v_tilde: GridFunction, b) -> Decomposition:
    """Split ``v_tilde = alpha phi + beta phi' + w``.

    For b = 2 the conserved pairings give the unique split
    ``alpha = <1, v>/2``, ``beta = -<sgn, v>/2``.  For b = 3 and b > 3 the
    orthogonality conditions against the adjoint kernel pin down ``alpha``
    only (every element ``g`` of that kernel satisfies ``<g, phi'> = 0``), so
    ``beta`` is the least-squares coefficient of ``phi'`` and the split is
    flagged non-unique.  Other b use the least-squares projection onto
    ``span{phi, phi'}``.
    """
    b = BParam(b)
    grid = v_tilde.grid
    ph = phi(grid)
    dp = dphi(grid)
    one = grid.sample(lambda s: np.ones_like(s))
    beta_ls = inner_product(dp, v_tilde) / inner_product(dp, dp)
    if b == 2:
        alpha = 0.5 * inner_product(one, v_tilde)
        beta = -0.5 * inner_product(sgn(grid), v_tilde)
        unique = True
    elif b == 3:
        g = ph * ph
        alpha = inner_product(g, v_tilde) / inner_product(g, ph)
        beta, unique = beta_ls, False
    elif b > 3:
        alpha = inner_product(one, v_tilde) / inner_product(one, ph)
        beta, unique = beta_ls, False
    else:
        alpha = inner_product(ph, v_tilde) / inner_product(ph, ph)
        beta, unique = beta_ls, False
    w = v_tilde - alpha * ph - beta * dp
    return Decomposition(_scalar(alpha), _scalar(beta), w, unique)


@dataclass(frozen=True, eq=False)
class AlphaBetaTrace:
    t: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    b: float
    exact_alpha: np.ndarray | None = None
    exact_beta: np.ndarray | None = None

    @property
    def alpha_beta_norm(self) -> np.ndarray:
        return np.hypot(self.alpha, self.beta)


def alpha_beta_ode(alpha0, beta0, b, w_coupling=None, T: float = 1.0, dt: float = 1e-3) -> AlphaBetaTrace:
    """RK4 solution of ``a' = (2 - b)(beta + 3/2 c(t))``, ``beta' = (2 - b) a``.

    ``w_coupling`` gives ``c(t) = <phi phi', w>``: None for zero forcing, a
    callable, or a pair ``(times, values)`` interpolated linearly.  With zero
    forcing the closed form ``alpha0 cosh(kt) + beta0 sinh(kt)`` (and its
    partner) is attached for cross-checking.
    """
    b = BParam(b)
    T = float(T)
    if not (math.isfinite(T) and T > 0):
        raise ParameterError(f"T must be positive, got {T!r}")
    if w_coupling is None:
        c: Callable = lambda t: 0.0
    elif callable(w_coupling):
        c = w_coupling
    else:
        ts, cs = (np.asarray(x, dtype=float) for x in w_coupling)
        if ts[0] > 1e-12 or ts[-1] < T - 1e-9:
            raise ParameterError("the coupling series must cover [0, T]")
        c = lambda t: float(np.interp(t, ts, cs))
    n = max(1, int(math.ceil(T / dt - 1e-9)))
    h = T / n
    k = 2 - b
    t = np.linspace(0.0, T, n + 1)
    a = np.empty(n + 1)
    be = np.empty(n + 1)
    a[0], be[0] = float(alpha0), float(beta0)

    def f(tt, x, y):
        return k * y + 1.5 * k * c(tt), k * x

    for j in range(n):
        x, y, tt = a[j], be[j], t[j]
        k1 = f(tt, x, y)
        k2 = f(tt + h / 2, x + h / 2 * k1[0], y + h / 2 * k1[1])
        k3 = f(tt + h / 2, x + h / 2 * k2[0], y + h / 2 * k2[1])
        k4 = f(tt + h, x + h * k3[0], y + h * k3[1])
        a[j + 1] = x + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        be[j + 1] = y + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    ea = eb = None
    if w_coupling is None:
        ea = float(alpha0) * np.cosh(k * t) + float(beta0) * np.sinh(k * t)
        eb = float(beta0) * np.cosh(k * t) + float(alpha0) * np.sinh(k * t)
    return AlphaBetaTrace(t, a, be, b, ea, eb)


def growth_rate_fit(trace, quantity: str, window) -> float:
    """Least-squares slope of ``log(quantity)`` against t over ``window``.

    ``trace`` is any object with a ``t`` array and the named attribute, or a
    pair ``(t, values)`` (then ``quantity`` is only a label).
    """
    if isinstance(trace, tuple):
        t, q = (np.asarray(x, dtype=float) for x in trace)
    else:
        t = np.asarray(trace.t, dtype=float)
        q = np.asarray(getattr(trace, quantity), dtype=float)
    t1, t2 = (float(x) for x in window)
    if not (t1 < t2) or t1 < t[0] - 1e-12 or t2 > t[-1] + 1e-12:
        raise ParameterError(f"window {window} is not inside the trace span [{t[0]}, {t[-1]}]")
    m = (t >= t1 - 1e-12) & (t <= t2 + 1e-12)
    if m.sum() < 2:
        raise ParameterError("fewer than two samples inside the window")
    if np.any(~(q[m] > 0)):
        raise ContractError(f"{quantity} must be positive over the fit window")
    slope, _ = np.polyfit(t[m], np.log(q[m]), 1)
    return float(slope)
