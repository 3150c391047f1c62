"""Graph-embedding toolkit: propagation encoders, contrastive and ranking
losses, loss-bound audits, influence analysis, and synthetic data generators.

The heavy lifting lives in the compiled extension; this package re-exports
its public surface.
"""

from ._grcl import (
    InteractionGraph,
    LinearClassifier,
    PlainGraph,
    TrainedModel,
    TrainingBatch,
    __version__,
    accuracy,
    audit_batch,
    bound_constants,
    bpr_loss,
    coles_loss,
    encode,
    evaluate_ranking,
    fit_linear_classifier,
    gen_csbm,
    gen_planted_bipartite,
    gr_coles_loss,
    influence_closed_form,
    load_edge_list,
    load_interactions,
    load_node_dataset,
    pipeline_fd_error,
    predict,
    relative_influence,
    sample_edge_batch,
    split_interactions,
    theorem_bounds,
    train_gcl,
    train_gr,
)

__all__ = [
    "InteractionGraph",
    "LinearClassifier",
    "PlainGraph",
    "TrainedModel",
    "TrainingBatch",
    "__version__",
    "accuracy",
    "audit_batch",
    "bound_constants",
    "bpr_loss",
    "coles_loss",
    "encode",
    "evaluate_ranking",
    "fit_linear_classifier",
    "gen_csbm",
    "gen_planted_bipartite",
    "gr_coles_loss",
    "influence_closed_form",
    "load_edge_list",
    "load_interactions",
    "load_node_dataset",
    "pipeline_fd_error",
    "predict",
    "relative_influence",
    "sample_edge_batch",
    "split_interactions",
    "theorem_bounds",
    "train_gcl",
    "train_gr",
]
