"""kerrecho: echoes of a parametrically kicked Kerr-nonlinear oscillator.

Classical Monte Carlo, Fock-space and Lindblad engines next to the matching
closed-form traces, with echo detection and figure-grade data export.
"""

__version__ = "0.1.0"

from .model import (
    SIGMA_COHERENT,
    CatSpec,
    CoherentSpec,
    EnsembleSpec,
    FockSpaceSpec,
    KickPulse,
    OscillatorParams,
    Scenario,
    ScenarioValidationError,
    TimeGrid,
    default_fock_cutoff,
    nondimensionalize,
    pulse_value,
    validate_config,
)
from .analysis import (
    EchoEvent,
    ExpectedEcho,
    SweepGrid,
    TimeSeries,
    compare_to_prediction,
    detect_echoes,
    envelope,
    sweep_cat_echo_amplitudes,
)
from .classical import (
    EnsembleResult,
    PhaseSpacePoint,
    Trajectory,
    analytic_mean_q_free,
    apply_impulsive_kick_classical,
    classical_echo_series,
    ensemble_mean_q,
    exact_free_trajectory,
    filament_approximation,
    first_echo_amplitude,
    hamilton_rhs,
    integrate_trajectory,
    mean_q_free_quadrature,
    phase_space_density_analytic,
    sample_initial_ensemble,
)
from .quantum import (
    EchoPrediction,
    KerrOperatorSet,
    RevivalDecomposition,
    analytic_mean_a_cat,
    analytic_mean_a_coherent,
    build_operators,
    cat_state_vector,
    coherent_matrix_element,
    coherent_state_vector,
    evolve_free,
    evolve_pulse_window,
    expectation_a,
    expectation_q,
    fractional_revival_decomposition,
    gauss_sum_closed_form,
    impulsive_kick_unitary,
    kicked_echo_prediction,
    kicked_mean_a_superposition,
    revival_times,
    selection_rule,
    squeeze_kick_amplitude,
)
from .lindblad import (
    LindbladResult,
    damped_mean_a_analytic,
    lindblad_rhs,
    propagate_density,
    revival_suppression_factor,
    thermal_nbar,
)
