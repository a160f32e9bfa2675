"""Numerical laboratory for the linearized stability of the peakon in the b-family."""

from .errors import (
    ContractError,
    DomainError,
    NumericalError,
    ParameterError,
    PeakonLabError,
    UnsupportedCaseError,
)
from .grid import Grid, GridFunction, build_grid, derivative_upwind, inner_product, l2_norm
from .kernels import PeakonProfile, QForm, apply_Q, conv_phi, conv_phi_prime, dphi, hs_norm_squared, phi, sgn
from .operator import OperatorKind, BParam, apply_operator, adjoint_null_vector, adjointness_residual
from .spectrum import (
    LambdaRect,
    SpectralScan,
    discretize,
    eigenvalues,
    indicial_roots,
    point_eigenfunction,
    pseudospectral_scan,
)
from .evolution import (
    EvolutionTrace,
    IvpSpec,
    alpha_beta_ode,
    characteristic_map,
    decompose_secondary,
    evolve_full,
    growth_rate_fit,
    truncated_norms,
    truncated_solution,
)

__version__ = "0.1.0"

__all__ = [
    "PeakonLabError",
    "ParameterError",
    "ContractError",
    "DomainError",
    "UnsupportedCaseError",
    "NumericalError",
    "Grid",
    "GridFunction",
    "build_grid",
    "derivative_upwind",
    "inner_product",
    "l2_norm",
    "PeakonProfile",
    "QForm",
    "phi",
    "dphi",
    "sgn",
    "conv_phi",
    "conv_phi_prime",
    "apply_Q",
    "hs_norm_squared",
    "OperatorKind",
    "BParam",
    "apply_operator",
    "adjoint_null_vector",
    "adjointness_residual",
    "LambdaRect",
    "SpectralScan",
    "discretize",
    "eigenvalues",
    "indicial_roots",
    "point_eigenfunction",
    "pseudospectral_scan",
    "EvolutionTrace",
    "IvpSpec",
    "alpha_beta_ode",
    "characteristic_map",
    "decompose_secondary",
    "evolve_full",
    "growth_rate_fit",
    "truncated_norms",
    "truncated_solution",
]
