"""Missile pitch-plane acceleration autopilot.

Inner loop: feedback linearisation of the acceleration-by-alpha output with a
time-delay adaptive estimate of the model error.  Outer loop: PI on total
normal acceleration.
"""

from .afl import FLTerms, InnerLoopGains, approx_output, fl_terms, inner_control, output_rate
from .errors import (
    AnalysisFault,
    AuthorityFault,
    AutopilotError,
    ConfigError,
    IdentificationFault,
    NumericFault,
    RangeFault,
    SimulationFault,
    SynthesisFault,
)
from .linear import LinearModel, Trim, linearize, transmission_zeros, trim
from .outer_loop import OuterLoopConfig, PIController, identify_inner_model, synthesize_gains
from .signal_chain import ActuatorConfig, ActuatorState, CommandFilter, CommandFilterConfig, LagFilter, actuator_step
from .sim import (
    ScenarioConfig,
    SimTrace,
    StepMetrics,
    compute_metrics,
    integrate_rk4,
    load_scenario,
    resolve_scenario,
    run_ideal_inner_loop,
    run_scenario,
)
from .tdal import AdaptiveConfig, BackwardDifference, TimeDelayEstimator
from .vehicle import (
    AeroModel,
    PlantState,
    UncertaintyConfig,
    VehicleConfig,
    accel_output,
    benchmark_aero,
    eval_coeffs,
    plant_deriv,
)

__version__ = "0.1.0"
