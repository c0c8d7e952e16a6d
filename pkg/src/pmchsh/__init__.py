"""Semi-device-independent min-entropy certification for prepare-and-measure CHSH tests."""

from .attacks import (
    AttackParams,
    attack_for_chsh,
    bb84_counterexample,
    optimal_attack,
    optimal_bob_observables,
    optimize_attack,
    perturbed_scenario,
    random_qubit_scenario,
    random_violating_scenario,
)
from .entropy import (
    chsh_min_entropy_bound,
    eve_marginals,
    min_entropy_from_distance,
    qubit_deviation,
    robust_min_entropy_bound,
    secrecy_report,
    trace_distance,
)
from .jordan import aggregate_distance_bound, check_block_inequalities, joint_block_diagonalize
from .report import AnalysisReport, analyze
from .scenario import (
    QubitAssumptionViolated,
    Scenario,
    chsh_from_observables,
    chsh_value,
    source_geometry,
    support_dimension,
    validate,
)
from .verify import CampaignConfig, equality_audit, mixture_check, run_campaign

__version__ = "0.1.0"
