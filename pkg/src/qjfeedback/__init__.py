"""Simulation and analysis of quantum-jump feedback for single-molecule photostability.

A three-level emitter (ground, excited singlet, triplet) with a
photobleaching hazard from the illuminated triplet is driven by a laser
gate.  A feedback controller watches the detected photon stream and blanks
the laser whenever no photon has arrived for a decision window, so that a
molecule shelved in its triplet state spends less time illuminated.
"""
from .config import ConfigError, RunConfig, format_config, parse_config, preset_config
from .controller import (
    FeedbackConfig, FeedbackConfigError, FeedbackController, FeedbackWarning, GateCommand,
    Level, Phase, advance_to, controller_init, observe_photon, replay,
)
from .ensemble import (
    EnsembleConfig, GainRow, GainTable, LifetimeDistribution, run_ensemble, sweep_tau_d,
)
from .io import bin_trace
from .photophysics import (
    AggregationError, EmitterState, PhotophysicsParams, StalledSimulationError, Trajectory,
    TrialResult, detected_photon_rate, simulate_trajectory_aggregated,
    simulate_trajectory_exact, steady_state_occupancy,
)
from .stats import (
    GainEstimate, KsResult, SurvivalCurve, gain_estimate, ks_two_sample, median,
    predicted_gain, survival_curve,
)

__version__ = "0.1.0"
