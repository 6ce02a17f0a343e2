"""Scenario-approach Value-at-Risk bounds and black-box verification of robot teams."""
from .distributions import (
    BIMODAL,
    Chi,
    ChiSquared,
    Gaussian,
    Mixture,
    PointMass,
    Uniform,
    empirical_var,
    sample,
    var_gap_trial,
)
from .metrics import MetricParams, h_f, h_g, rho
from .risk_core import (
    RiskSpec,
    SampleSet,
    ScenarioBound,
    ScenarioError,
    confidence_bound,
    epsilon_for,
    required_samples,
    scenario_var_upper_bound,
)
from .robot_sim import DomainSpec, SimConfig, Trajectory, WorldState, simulate_trajectory
from .seeding import RngSeed
from .verification import (
    FunctionSystem,
    RobotTeamSystem,
    VerificationReport,
    estimate_failure_mass,
    holdout_violation_fraction,
    robust_lower_bound,
    sample_robustness,
    verify,
)

__version__ = "0.1.0"
