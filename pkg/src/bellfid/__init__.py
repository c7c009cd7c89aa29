"""Certified fidelity bounds for bipartite qudit Bell-type states.

The package builds state-verifier operators out of local measurement
statistics, adapts the measurement coefficients to the observed data, and
turns expectation values into certified lower/upper bounds on the fidelity
with a target Bell-type state.
"""

__version__ = "0.1.0"

from .linalg import tensor_product, hermitian_eig, is_psd
from .states import (
    schmidt_vector,
    ramp_schmidt,
    bell_state,
    compatible_schmidt,
    generalized_bell_state,
    white_noise_state,
    crosstalk_state,
    exact_fidelity,
)
from .measurements import (
    chi_vector,
    clock_op,
    shift_op,
    hw_op,
    hw_eigenbasis_state,
    povm_from_basis,
    measurement_config,
    comp_basis_stats,
    config_stats,
    sample_stats,
)
from .verifiers import (
    comp_basis_verifier,
    lemma1_verifier,
    bell_verifier,
    error_operator,
    info_operator,
    mix_verifiers,
    expectation_from_stats,
)
from .estimation import (
    smallest_prime_divisor,
    subclass_partition,
    nonadaptive_bounds,
    lemma2_bounds,
    theorem1_bounds,
    optimize_chi,
    schmidt_from_stats,
    chi_condition_check,
    adaptive_estimate,
    FidelityBounds,
)
