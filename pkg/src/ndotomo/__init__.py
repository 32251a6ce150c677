"""Mixed-state quantum tomography with RBM-purified neural density operators."""

from .qcore import (
    DensityMatrix,
    DensityCheck,
    NumericalDomainError,
    basis_rotation,
    canonical_state,
    depolarize,
    fidelity,
    kron,
    local_unitary,
    pure_density,
    trace_distance,
    validate_density,
)
from .model import (
    Gradients,
    NdoParams,
    ParamSet,
    init_params,
    log_marginal,
    log_partition,
    materialize,
    mixing_term,
    pair_log_weight,
    partition,
    psi_amplitude,
    rho_unnormalized,
)

__all__ = [
    "DensityMatrix",
    "DensityCheck",
    "NumericalDomainError",
    "basis_rotation",
    "canonical_state",
    "depolarize",
    "fidelity",
    "kron",
    "local_unitary",
    "pure_density",
    "trace_distance",
    "validate_density",
    "Gradients",
    "NdoParams",
    "ParamSet",
    "init_params",
    "log_marginal",
    "log_partition",
    "materialize",
    "mixing_term",
    "pair_log_weight",
    "partition",
    "psi_amplitude",
    "rho_unnormalized",
]

__version__ = "0.1.0"
