"""Decoding CPC quantum codes with multi-body Ising models."""
from .cpc import (
    CpcCode,
    PauliOperator,
    PropagationModel,
    build_propagation_model,
    code_distance,
    derive_check_sets,
    enumerate_patterns,
    load_code,
    propagate,
)
from .decoders import (
    Correction,
    bp_decode,
    brute_force_posterior,
    exact_boltzmann,
    make_decoder,
    maxent_decode,
    mle_decode,
)
from .error_model import ErrorModel, QubitErrorRates, unprotected_error_rate
from .evaluation import (
    exact_logical_error_rate,
    monte_carlo_logical_error_rate,
    sweep,
    threshold_bisection,
)
from .exceptions import (
    BracketError,
    CapacityError,
    CodeValidationError,
    ConventionError,
    CpcError,
    DomainError,
)
from .ising import (
    IsingModel,
    build_decode_hamiltonian,
    build_error_count_hamiltonian,
    build_time_extended,
    nishimori_temperature,
)
from .samplers import SamplerConfig, gibbs_sample, quadratize, simulated_annealing

__version__ = "0.1.0"
