"""Built-in acceptance suite: twelve numbered criteria, each a list of checks.

Every criterion function takes no arguments and returns a list of
:class:`Check` records; :func:`run_all` times them and adds a budget check.
"""
from __future__ import annotations

import itertools
import math
import time

import numpy as np

from .evolution import (
    IvpSpec,
    alpha_beta_ode,
    evolve_full,
    growth_rate_fit,
    truncated_norm_series,
)
from .grid import GridFunction, build_grid, inner_product, l2_norm
from .kernels import QForm, apply_Q, dphi, hs_norm_squared, phi, stationary_residual
from .operator import OperatorKind, adjoint_identity_residuals, adjoint_null_vector, apply_operator
from .report import Check, RunReport
from .spectrum import (
    LambdaRect,
    ResolventNorm,
    ch_exact_eigenfunction,
    discretize,
    point_eigenfunction,
    pseudospectral_scan,
)

__all__ = ["CRITERIA", "BUDGETS", "default_grid", "random_smooth", "smooth_bump", "run_criterion", "run_all"]


def default_grid():
    return build_grid(40.0, 2000, 3.0)


def random_smooth(grid, rng, terms: int = 3) -> GridFunction:
    """Sum of a few random Gaussians centred inside ``[-8, 8]``."""
    x = grid.nodes
    out = np.zeros_like(x)
    for _ in range(terms):
        c = rng.uniform(-8, 8)
        w = rng.uniform(0.3, 2.0)
        out += rng.normal() * np.exp(-(((x - c) / w) ** 2))
    return GridFunction(grid, out)


def smooth_bump(grid, center: float, width: float) -> GridFunction:
    z = (grid.nodes - center) / width
    inside = np.abs(z) < 1
    out = np.zeros_like(z)
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - z[inside] ** 2))
    return GridFunction(grid, out)


def criterion_1():
    g = default_grid()
    return [
        Check("K1 squared Hilbert-Schmidt norm", hs_norm_squared("K1", g), 1.0, 1e-4),
        Check("K2 squared Hilbert-Schmidt norm", hs_norm_squared("K2", g), 0.5, 1e-4),
    ]


def criterion_2():
    g = default_grid()
    ph, dp = phi(g), dphi(g)
    out = []
    for b in (1.0, 2.0, 2.5, 3.0, 4.0):
        out.append(Check(f"||L phi - (2-b) phi'||, b={b:g}", l2_norm(apply_operator("L", ph, b) - (2 - b) * dp), 0.0, 1e-5, "<="))
        out.append(Check(f"||L phi'||, b={b:g}", l2_norm(apply_operator("L", dp, b)), 0.0, 1e-5, "<="))
    return out


def criterion_3():
    g = default_grid()
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for _ in range(50):
        f = random_smooth(g, rng)
        b = rng.uniform(0.0, 5.0)
        qs = [apply_Q(f, b, form) for form in QForm]
        scale = max(l2_norm(q) for q in qs)
        for p, q in itertools.combinations(qs, 2):
            worst = max(worst, l2_norm(p - q) / scale)
    return [Check("max pairwise Q-form residual (relative), 50 functions", worst, 0.0, 1e-7, "<=")]


def criterion_4():
    g = default_grid()
    return [
        Check(f"stationary residual sup norm, b={b:g}", float(np.max(np.abs(stationary_residual(b, g).values))), 0.0, 1e-6, "<=")
        for b in (2.0, 3.0, 4.0)
    ]


def criterion_5():
    g = default_grid()
    out = []
    names = ("1", "sgn", "phi^2", "phi phi'")
    for b in (2.0, 3.0, 4.0):
        for name, r in zip(names, adjoint_identity_residuals(b, g)):
            out.append(Check(f"adjoint identity for {name}, b={b:g}", r, 0.0, 1e-5, "<="))
    for b in (4.0, 5.0):
        v = adjoint_null_vector(b, g)
        out.append(Check(f"||L* v_b|| / ||v_b||, b={b:g}", l2_norm(apply_operator("Lstar", v, b)) / l2_norm(v), 0.0, 1e-5, "<="))
    return out


def _eig_residual(v, lam, b):
    return l2_norm(apply_operator("L", v, b) - lam * v) / l2_norm(v)


def criterion_6():
    res = {n: _eig_residual(ch_exact_eigenfunction(0.25, build_grid(40.0, n, 3.0)), 0.25, 2.0) for n in (1000, 2000, 4000)}
    return [
        Check("closed-form eigenfunction residual, n_half=2000", res[2000], 0.0, 1e-2, "<="),
        Check("residual ratio n_half 4000 / 1000 (must decrease)", res[4000] / res[1000], 1.0, 0.0, "<=",
              note=f"residuals {res[1000]:.3e}, {res[2000]:.3e}, {res[4000]:.3e}"),
    ]


SCAN_RECT = LambdaRect(0.0, 2.0, -1.0, 1.0, 41, 21)


def _scan_value(scan, lam):
    i = int(np.argmin(np.abs(scan.re_values - lam.real)))
    j = int(np.argmin(np.abs(scan.im_values - lam.imag)))
    return float(scan.sigma_min[j, i])


def criterion_7():
    g = build_grid(40.0, 500, 3.0)
    s2 = pseudospectral_scan("L", 2.0, g, SCAN_RECT)
    in500, out500 = _scan_value(s2, 0.25 + 0j), _scan_value(s2, 1.0 + 0j)
    fine = ResolventNorm(discretize("L", 2.0, build_grid(40.0, 1000, 3.0)))
    in1000, out1000 = fine(0.25), fine(1.0)
    s35 = pseudospectral_scan("L", 3.5, g, SCAN_RECT)
    return [
        Check("b=2: sigma_min(0.25) / sigma_min(1.0)", in500 / out500, 0.0, 0.05, "<="),
        Check("b=2: sigma_min(0.25) decrease factor, n_half 500 -> 1000", in500 / in1000, 2.0, 0.0, ">="),
        Check("b=2: relative change of sigma_min(1.0), n_half 500 -> 1000", abs(out1000 / out500 - 1), 0.0, 0.2, "<="),
        Check("b=3.5: sigma_min(2.0)", _scan_value(s35, 2.0 + 0j), 0.8, 0.0, ">="),
    ]


def criterion_8():
    g = default_grid()
    times = np.linspace(0.0, 6.0, 61)
    flat = truncated_norm_series(IvpSpec(2.5, "gaussian", T=6.0, params={"center": 1.0}, grid=g), times)
    drift = max(np.max(np.abs(flat.l2_right - flat.l2_right[0])), np.max(np.abs(flat.l2_left - flat.l2_left[0])))
    grow = truncated_norm_series(IvpSpec(3.5, "plateau", T=6.0, params={"left": 0.0, "right": 2.0}, grid=g), times)
    mode = truncated_norm_series(IvpSpec(2.0, "l0_mode", T=6.0, params={"lambda0": 0.25}, grid=g), times)
    return [
        Check("b=2.5 norm drift over t in [0, 6]", float(drift), 0.0, 1e-10, "<="),
        Check("b=3.5 right-side growth rate over [2, 6]", growth_rate_fit(grow, "l2_right", (2.0, 6.0)), 1.0, 0.05),
        Check("b=2 unstable mode left-side growth rate over [2, 6]", growth_rate_fit(mode, "l2_left", (2.0, 6.0)), 0.25, 0.01),
    ]


def criterion_9():
    out = []
    for b in (1.0, 3.5):
        tr = alpha_beta_ode(1.0, 0.3, b, None, T=12.0, dt=1e-3)
        out.append(Check(f"(alpha, beta) growth rate over [6, 12], b={b:g}", growth_rate_fit(tr, "alpha_beta_norm", (6.0, 12.0)), abs(2 - b), 1e-3))
    tr = alpha_beta_ode(1.0, 0.3, 2.0, None, T=12.0, dt=1e-3)
    dev = max(np.max(np.abs(tr.alpha - 1.0)), np.max(np.abs(tr.beta - 0.3)))
    out.append(Check("b=2: deviation of (alpha, beta) from the initial values", float(dev), 0.0, 0.0, "<="))
    return out


def criterion_10():
    g = default_grid()
    tr = evolve_full("eigp4", phi(g), 3.0, 1.0, dt=0.25 * g.effective_spacing())
    err = l2_norm(tr.final - (phi(g) - dphi(g)))
    return [Check("eigp4, b=3: ||w(1) - (phi - phi')||", err, 0.0, 1e-3, "<=")]


def criterion_11():
    g = default_grid()
    tr = evolve_full("eigp4", smooth_bump(g, -2.0, 1.0), 2.0, 5.0)
    return [
        Check("b=2: drift of <1, w> over [0, 5]", float(np.max(np.abs(tr.inv_one - tr.inv_one[0]))), 0.0, 1e-6, "<="),
        Check("b=2: drift of <sgn, w> over [0, 5]", float(np.max(np.abs(tr.inv_sgn - tr.inv_sgn[0]))), 0.0, 1e-6, "<="),
        Check("b=2: max balance residual / ||w||^2", float(np.max(tr.balance_residual / tr.l2_total**2)), 0.0, 1e-6, "<="),
    ]


def criterion_12():
    g = default_grid()
    v = point_eigenfunction(0.25, 2.0, g)
    w = ch_exact_eigenfunction(0.25, g)
    cos = min(1.0, abs(inner_product(v, w)) / (l2_norm(v) * l2_norm(w)))
    angle = math.acos(cos)
    return [
        Check("b=2, lambda=0.25: angle to the closed form", angle, 0.0, 1e-2, "<="),
        Check("b=2.4, lambda=0.05: relative residual", _eig_residual(point_eigenfunction(0.05, 2.4, g), 0.05, 2.4), 0.0, 5e-2, "<="),
    ]


CRITERIA = {
    1: ("Hilbert-Schmidt norms", criterion_1),
    2: ("operator identities", criterion_2),
    3: ("Q-form equivalence", criterion_3),
    4: ("stationary peakon", criterion_4),
    5: ("adjoint identities and odd null vector", criterion_5),
    6: ("closed-form eigenfunction", criterion_6),
    7: ("spectral strip", criterion_7),
    8: ("exact IVP rates", criterion_8),
    9: ("projection dynamics", criterion_9),
    10: ("exact time-stepper solution", criterion_10),
    11: ("conservation and balance", criterion_11),
    12: ("Frobenius construction", criterion_12),
}

# seconds
BUDGETS = {1: 10, 2: 5, 3: 10, 4: 5, 5: 5, 6: 30, 7: 600, 8: 30, 9: 1, 10: 60, 11: 120, 12: 30}


def run_criterion(k: int):
    """``(checks, seconds)`` for criterion ``k``."""
    _, fn = CRITERIA[k]
    t0 = time.perf_counter()
    checks = fn()
    return checks, time.perf_counter() - t0


def run_all(which=None, budgets: bool = True) -> RunReport:
    report = RunReport("check", {"criteria": list(which or CRITERIA)})
    for k in which or CRITERIA:
        checks, sec = run_criterion(k)
        name = CRITERIA[k][0]
        report.add(*[Check(f"[{k}] {c.name}", c.measured, c.expected, c.tolerance, c.relation, c.note) for c in checks])
        report.timings[f"{k} {name}"] = sec
        if budgets:
            report.add(Check(f"[{k}] wall time (s)", sec, BUDGETS[k], 0.0, "<="))
    return report
