"""Interventional and conditioning counterfactual hazards in discrete time."""

from ._validation import InvariantError, ValidationError
from .data import Cohort, CohortFormatError, RiskTable, SubjectRecord, build_risk_table, load_cohort, write_cohort
from .dgp import (
    DGPConfig,
    Frailty,
    PRESETS,
    generate_lattice,
    observe,
    preset,
    scenario_noncollapsible,
    scenario_selection_bias,
    simulate,
)
from .estimators import (
    CounterfactualHazard,
    EstimationWarning,
    HazardCurve,
    SummaryMeasures,
    actual_risk,
    cct_hazard,
    collapsibility_gap,
    conditional_hazard,
    icp_hazard,
    marginal_nelson_aalen,
    summarize,
)
from .multiverse import (
    MultiverseReport,
    PossibleWorld,
    PotentialOutcomeLattice,
    estimator_oracle_check,
    multiverse_summary,
    read_lattice,
    verify_bounds,
    world,
    write_lattice,
)

__version__ = "0.1.0"

__all__ = [
    "InvariantError",
    "ValidationError",
    "Cohort",
    "CohortFormatError",
    "RiskTable",
    "SubjectRecord",
    "build_risk_table",
    "load_cohort",
    "write_cohort",
    "DGPConfig",
    "Frailty",
    "PRESETS",
    "generate_lattice",
    "observe",
    "preset",
    "scenario_noncollapsible",
    "scenario_selection_bias",
    "simulate",
    "CounterfactualHazard",
    "EstimationWarning",
    "HazardCurve",
    "SummaryMeasures",
    "actual_risk",
    "cct_hazard",
    "collapsibility_gap",
    "conditional_hazard",
    "icp_hazard",
    "marginal_nelson_aalen",
    "summarize",
    "MultiverseReport",
    "PossibleWorld",
    "PotentialOutcomeLattice",
    "estimator_oracle_check",
    "multiverse_summary",
    "read_lattice",
    "verify_bounds",
    "world",
    "write_lattice",
    "__version__",
]
