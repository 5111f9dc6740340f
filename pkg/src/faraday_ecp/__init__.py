"""Exact simulation of single-photon-assisted GHZ entanglement concentration
via photonic Faraday rotation in a low-Q cavity."""

__version__ = "0.1.0"

from .cavity import (
    IDEAL_GATE,
    CavityParams,
    FaradayPhases,
    empty_cavity_coefficient,
    faraday_phases,
    interaction_gate,
    reflection_coefficient,
)
from .protocol import (
    DetectionModel,
    ProtocolConfig,
    ProtocolReport,
    RoundCoefficients,
    RoundOutcome,
    analytic_round_probability,
    build_auxiliary_photon,
    build_initial_state,
    coefficient_recurrence,
    peng_success_probability,
    run_protocol_exact,
    run_round,
    total_success_probability,
)
from .state import (
    PureState,
    Slot,
    SlotLayout,
    apply_1slot_gate,
    apply_joint_phase_gate,
    fidelity,
    largest_schmidt_coefficient,
    make_state,
    measure,
    tensor,
)
from .stochastic import EmpiricalReport, TrialRecord, convergence_check, sample_protocol, sample_trials
