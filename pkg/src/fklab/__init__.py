"""Desk-scale simulator and verifier for the single-step history-state
quantum advantage protocol on ZZ lattices."""

from .lattice import InputSpec, InputType, LatticeGeometry, build_lattice, random_input
from .prover import (
    HistoryStateModel,
    InstructionMode,
    MeasurementInstruction,
    NoiseModel,
    echo_prepare,
    exact_model_parameters,
    ideal_history_state,
    make_degraded_model,
    make_honest_model,
    measure_copy,
)
from .simulator import (
    Distribution,
    MeasurementRecord,
    PureState,
    apply_global_cz,
    apply_single_qubit,
    apply_zz_evolution,
    ideal_output_distribution,
    product_state,
    sample,
    u_value,
    walsh_hadamard,
)
from .verifier import (
    Counters,
    EstimatorReport,
    ProtocolConfig,
    ProtocolTranscript,
    decide,
    run_protocol,
)

__version__ = "0.1.0"

__all__ = [
    "Counters",
    "Distribution",
    "EstimatorReport",
    "HistoryStateModel",
    "InputSpec",
    "InputType",
    "InstructionMode",
    "LatticeGeometry",
    "MeasurementInstruction",
    "MeasurementRecord",
    "NoiseModel",
    "ProtocolConfig",
    "ProtocolTranscript",
    "PureState",
    "apply_global_cz",
    "apply_single_qubit",
    "apply_zz_evolution",
    "build_lattice",
    "decide",
    "echo_prepare",
    "exact_model_parameters",
    "ideal_history_state",
    "ideal_output_distribution",
    "make_degraded_model",
    "make_honest_model",
    "measure_copy",
    "product_state",
    "random_input",
    "run_protocol",
    "sample",
    "u_value",
    "walsh_hadamard",
]
