"""Exact finite-volume Gibbs measures, couplings and block dynamics."""
from .couplings import (
    Coupling,
    PathChain,
    SiteMetric,
    compose_path,
    expected_metric,
    identity_coupling,
    independent_coupling,
    mismatch,
    monotone_correlation_check,
    optimal_coupling,
    rho_volume,
    telescope_bound_check,
)
from .diagnostics import (
    boundary_influence,
    contraction_constant,
    influence_decay_curve,
    step_decomposition_check,
    uniqueness_report,
)
from .dynamics import (
    BlockSystem,
    advance_coupling,
    coupled_block_kernel,
    coupled_mixed_kernel,
    heat_bath_kernel,
    mixed_kernel,
    simulate_dynamics,
    stationarity_check,
)
from .errors import GibbsError, ModelError, PartitionFunctionError, StateSpaceTooLarge
from .measures import decompose_over_boundary, mix, project, projected_tv, tv_distance
from .model import (
    PairPotentialModel,
    SpinGraph,
    boundary_hamiltonian,
    condition_specification,
    enumerate_volume,
    hamiltonian,
    specification,
    validate_model,
)
from .spaces import ConfigSpace, Configuration, FiniteDistribution

__version__ = "0.1.0"

__all__ = [
    "advance_coupling",
    "BlockSystem",
    "boundary_hamiltonian",
    "boundary_influence",
    "compose_path",
    "condition_specification",
    "ConfigSpace",
    "Configuration",
    "contraction_constant",
    "coupled_block_kernel",
    "coupled_mixed_kernel",
    "Coupling",
    "decompose_over_boundary",
    "enumerate_volume",
    "expected_metric",
    "FiniteDistribution",
    "GibbsError",
    "hamiltonian",
    "heat_bath_kernel",
    "identity_coupling",
    "independent_coupling",
    "influence_decay_curve",
    "mismatch",
    "mix",
    "mixed_kernel",
    "ModelError",
    "monotone_correlation_check",
    "optimal_coupling",
    "PairPotentialModel",
    "PartitionFunctionError",
    "PathChain",
    "project",
    "projected_tv",
    "rho_volume",
    "simulate_dynamics",
    "SiteMetric",
    "specification",
    "SpinGraph",
    "StateSpaceTooLarge",
    "stationarity_check",
    "step_decomposition_check",
    "telescope_bound_check",
    "tv_distance",
    "uniqueness_report",
    "validate_model",
]
