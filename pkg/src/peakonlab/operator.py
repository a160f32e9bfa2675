"""The linearized operator L, its local part L0 and the formal adjoint L*."""
from __future__ import annotations

import enum

import numpy as np

from .errors import DomainError, ParameterError
from .grid import Grid, GridFunction, derivative_upwind, inner_product, l2_norm
from .kernels import QForm, apply_Q, conv_phi, conv_phi_prime, dphi, phi, sgn

__all__ = [
    "OperatorKind",
    "BParam",
    "apply_operator",
    "adjoint_identity_residuals",
    "adjoint_null_vector",
    "adjointness_residual",
]


# radius around the peak inside which the transport derivative works in log|xi|
LOG_ZONE = 0.1


class OperatorKind(str, enum.Enum):
    """``L = L0 + Q``, ``L0 = (1 - phi) d + (2 - b) phi'``, their adjoints."""

    L = "L"
    L0 = "L0"
    LSTAR = "Lstar"
    L0STAR = "L0star"


def BParam(b) -> float:
    """Validate the family parameter: any finite real."""
    try:
        val = float(b)
    except (TypeError, ValueError) as exc:
        raise ParameterError(f"b must be a real number, got {b!r}") from exc
    if not np.isfinite(val):
        raise ParameterError(f"b must be finite, got {b!r}")
    return val


def apply_operator(kind, f: GridFunction, b, q_form=QForm.FORM1, inflow_zero=None) -> GridFunction:
    """Apply one of the operators to a grid function.

    The transport term uses upwind-biased stencils: from the right for L and
    L0, from the left for the adjoints.  ``inflow_zero`` (default: on for L and
    L0, off for the adjoints) continues ``f`` by zero beyond the inflow end of
    the domain; the adjoints are routinely applied to bounded functions that
    do not decay, such as 1 and sgn, where that continuation would be wrong.
    At the peak, the one node fed from across it gets no transport term (see
    :func:`derivative_upwind`).
    """
    kind = OperatorKind(kind)
    b = BParam(b)
    if inflow_zero is None:
        inflow_zero = kind in (OperatorKind.L, OperatorKind.L0)
    grid = f.grid
    ph = phi(grid)
    dp = dphi(grid)
    if kind in (OperatorKind.L, OperatorKind.L0):
        out = (1 - ph) * derivative_upwind(f, "right", inflow_zero=inflow_zero, log_zone=LOG_ZONE, peak_inflow=True) + (2 - b) * dp * f
        if kind is OperatorKind.L:
            out = out + apply_Q(f, b, q_form)
        return out
    out = (ph - 1) * derivative_upwind(f, "left", inflow_zero=inflow_zero, log_zone=LOG_ZONE, peak_inflow=True) + (3 - b) * dp * f
    if kind is OperatorKind.LSTAR:
        out = out + 0.5 * (b - 3) * dp * conv_phi(f) + 0.5 * (2 * b - 3) * ph * conv_phi_prime(f)
    return out


def _adjoint_cases(grid: Grid, b: float):
    ph = phi(grid)
    dp = dphi(grid)
    one = grid.sample(lambda s: np.ones_like(s))
    return [
        ("one", one, 0.0 * one),
        ("sgn", sgn(grid), 3 * (b - 2) * ph * ph),
        ("phi2", ph * ph, 2 * (b - 3) * ph * dp + 8.0 / 3.0 * (3 - b) * ph * ph * dp),
        ("phi_dphi", ph * dp, (b - 4) * ph * ph + 8.0 / 3.0 * (3 - b) * ph**3),
    ]


def adjoint_identity_residuals(b, grid: Grid) -> list:
    """``||L* g - rhs(g)||`` for ``g`` in ``(1, sgn, phi**2, phi phi')``, in that order."""
    b = BParam(b)
    return [
        l2_norm(apply_operator(OperatorKind.LSTAR, g, b) - rhs) for _, g, rhs in _adjoint_cases(grid, b)
    ]


def adjoint_null_vector(b, grid: Grid) -> GridFunction:
    """Bounded odd solution of ``L* v = 0``, available for ``b > 3``."""
    b = BParam(b)
    if not b > 3:
        raise DomainError(f"the odd null vector of L* exists (is satisfied) only if b > 3; got b = {b}")
    x = grid.nodes
    a = np.abs(x)
    p = np.exp(-a)
    even = (-np.expm1(-a)) ** (b - 3) * (b * (b - 2) * p * p + (3 - b) * p - 1)
    return GridFunction(grid, np.sign(x) * even)


def adjointness_residual(f: GridFunction, g: GridFunction, b) -> float:
    """``|<L f, g> - <f, L* g>|`` with both sides assembled independently."""
    b = BParam(b)
    lhs = inner_product(apply_operator(OperatorKind.L, f, b), g)
    rhs = inner_product(f, apply_operator(OperatorKind.LSTAR, g, b))
    return float(abs(lhs - rhs))
