"""Interactive instance-search refinement.

Confidence-weighted graph ranking with active feedback suggestion: refine
an initial retrieval list round by round from a handful of human (or
simulated) relevance judgments, asking about the least confidently ranked
samples first.
"""

from .affinity import cosine_affinity, temporal_affinity, validate_affinity
from .datasets import (
    Dataset,
    DatasetError,
    FeatureSet,
    GroundTruth,
    averaged_probe,
    generate_synthetic,
    initial_ranking,
    load_dataset,
    save_dataset,
)
from .engine import (
    IRRELEVANT,
    RELEVANT,
    UNSURE,
    OracleError,
    RankingState,
    RoundResult,
    SessionParams,
    SessionRun,
    apply_feedback,
    init_state,
    merge_topk,
    pairwise_loss,
    ranking_step_approx,
    ranking_step_qp,
    run_round,
    run_session,
    select_candidates,
    suggestion_step_approx,
    suggestion_step_qp,
)
from .evaluation import Strategy, run_experiment, simulated_oracle, write_report
from .metrics import (
    average_precision,
    interpolated_pr_11pt,
    manifold_smoothing_loss,
    mean_ap,
)
from .sessions import ProbeSession, run_probe_session

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "DatasetError",
    "FeatureSet",
    "GroundTruth",
    "IRRELEVANT",
    "OracleError",
    "ProbeSession",
    "RELEVANT",
    "RankingState",
    "RoundResult",
    "SessionParams",
    "SessionRun",
    "Strategy",
    "UNSURE",
    "apply_feedback",
    "average_precision",
    "averaged_probe",
    "cosine_affinity",
    "generate_synthetic",
    "init_state",
    "initial_ranking",
    "interpolated_pr_11pt",
    "load_dataset",
    "manifold_smoothing_loss",
    "mean_ap",
    "merge_topk",
    "pairwise_loss",
    "ranking_step_approx",
    "ranking_step_qp",
    "run_experiment",
    "run_probe_session",
    "run_round",
    "run_session",
    "save_dataset",
    "select_candidates",
    "simulated_oracle",
    "suggestion_step_approx",
    "suggestion_step_qp",
    "temporal_affinity",
    "validate_affinity",
    "write_report",
]
