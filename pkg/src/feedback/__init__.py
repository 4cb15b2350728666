from src.feedback.attention import (
    AttentionParams,
    AttentionSystem,
    attention_drive,
    attention_field,
    default_attention_adjacency,
    hill_derivative,
    hill_eval,
)
from src.feedback.cascades import (
    CascadeThreshold,
    cascade_frequency_grid,
    cascade_outcomes,
    estimate_cascade_threshold,
    is_cascade,
    is_nondecreasing,
    sample_aligned_inputs,
)
from src.feedback.coupling import (
    CouplingDrive,
    CouplingFeedbackParams,
    TransitionSystem,
    coupling_field,
    inter_cluster_weights,
)

__all__ = [
    "AttentionParams",
    "AttentionSystem",
    "CascadeThreshold",
    "CouplingDrive",
    "CouplingFeedbackParams",
    "TransitionSystem",
    "attention_drive",
    "attention_field",
    "cascade_frequency_grid",
    "cascade_outcomes",
    "coupling_field",
    "default_attention_adjacency",
    "estimate_cascade_threshold",
    "hill_derivative",
    "hill_eval",
    "inter_cluster_weights",
    "is_cascade",
    "is_nondecreasing",
    "sample_aligned_inputs",
]
