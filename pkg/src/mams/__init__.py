"""Queue length analysis and simulation for Markov-modulated single-server queues."""

from .bounds import (
    AnalyzedChain,
    MamsSystem,
    QueueLengthBounds,
    analyze_chain,
    bounds,
    build_system,
    drift_self_check,
    drift_terms_from_definition,
)
from .chain import ChainAnalysis, MarkedChain, Transition, ValidationReport, analyze, validate
from .relative import (
    RelativeValues,
    default_oracle_horizon,
    drift_residuals,
    solve_relative,
    transient_oracle,
)
from .simulator import (
    SimConfig,
    SimEstimate,
    SimReport,
    derive_run_seed,
    estimate_empty_conditional,
    simulate,
)
from .two_level import (
    EmptyProbBounds,
    TwoLevelAnalysis,
    TwoLevelParams,
    TwoLevelQueueBounds,
    analyze_two_level,
    e_q_bounds,
    empty_prob_bounds,
    mean_q_given_empty_prob,
    to_mams,
)

__version__ = "0.1.0"

__all__ = [
    "AnalyzedChain",
    "ChainAnalysis",
    "EmptyProbBounds",
    "MamsSystem",
    "MarkedChain",
    "QueueLengthBounds",
    "RelativeValues",
    "SimConfig",
    "SimEstimate",
    "SimReport",
    "Transition",
    "TwoLevelAnalysis",
    "TwoLevelParams",
    "TwoLevelQueueBounds",
    "ValidationReport",
    "analyze",
    "analyze_chain",
    "analyze_two_level",
    "bounds",
    "build_system",
    "default_oracle_horizon",
    "derive_run_seed",
    "drift_residuals",
    "drift_self_check",
    "drift_terms_from_definition",
    "e_q_bounds",
    "empty_prob_bounds",
    "estimate_empty_conditional",
    "mean_q_given_empty_prob",
    "simulate",
    "solve_relative",
    "to_mams",
    "transient_oracle",
    "validate",
]
