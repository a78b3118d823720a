"""Amplitude-constrained input design from prime cycles of de Bruijn graphs."""

from .errors import (
    ConfigError,
    InputDesignError,
    ModelError,
    NotConvergedError,
    NumericalError,
    ResourceLimitError,
    SingularDesignError,
)
from .fisher import (
    InfoMatrix,
    basis_info_matrices,
    combine,
    cycle_info_matrix,
    exact_cycle_info_matrix,
    sampled_info_matrix,
)
from .graph import (
    Alphabet,
    CycleBasis,
    ElementaryCycle,
    MemoryGraph,
    PrimeCycle,
    build_memory_graph,
    cycle_signal,
    elementary_cycles,
    lift_prime_cycles,
    prime_cycle_basis,
)
from .models import (
    ExternalModel,
    GradientTrace,
    ModelSpec,
    Signal,
    gradient_trace,
    model_memory,
    predictor_output,
)
from .optimizer import Criterion, DesignResult, criterion_value, fw_gap, optimize
from .synth import (
    StationaryDistribution,
    TransitionMatrix,
    assemble_stationary,
    build_transition_matrix,
    generate_sequence,
)

__version__ = "0.1.0"
