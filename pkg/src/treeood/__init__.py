"""Hierarchical out-of-distribution classification engine.

Predicts every sample to a node of a class hierarchy: known classes land on
leaves, unknown classes on the internal node grouping their known siblings.
Built from per-depth classifier probability stacks via tree-factorized
predictive distributions and expected-distance decision rules.
"""

from .conditionals import (
    ConditionalTable,
    ProbabilityStack,
    ScoreModel,
    build_conditional_table,
    comp_prob_score,
    conditional_for,
    entcompprob_score,
    entropy_score,
    maxprob_score,
    root_ood_score,
)
from .engine import (
    BatchResult,
    FlatTree,
    StackBatch,
    conditionals_batch,
    infer_batch,
    leaf_masses_batch,
    marginalized_batch,
    tables_from_cond,
)
from .hierarchy import (
    AugmentedHierarchy,
    DepthClassIndex,
    Hierarchy,
    LabeledDataset,
    Sample,
    SplitSpec,
    augment,
    build_hierarchy,
    depth_class_index,
    split_id_ood,
)
from .inference import (
    DecisionRule,
    Prediction,
    PredictiveDistribution,
    marginalized_prediction,
    predict_argmax,
    predict_depth_oracle,
    predict_leaf_model,
    predict_min_expected_dist,
    predictive_distribution,
)
from .metrics import (
    EvalReport,
    LcaDecomposition,
    LcaKind,
    NodeLocalMetrics,
    balanced_accuracy,
    bmhd,
    evaluate,
    lca_decompose,
    node_local_metrics,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentedHierarchy",
    "BatchResult",
    "ConditionalTable",
    "DecisionRule",
    "DepthClassIndex",
    "EvalReport",
    "FlatTree",
    "Hierarchy",
    "LabeledDataset",
    "LcaDecomposition",
    "LcaKind",
    "NodeLocalMetrics",
    "Prediction",
    "PredictiveDistribution",
    "ProbabilityStack",
    "Sample",
    "ScoreModel",
    "SplitSpec",
    "StackBatch",
    "augment",
    "balanced_accuracy",
    "bmhd",
    "build_conditional_table",
    "build_hierarchy",
    "comp_prob_score",
    "conditional_for",
    "conditionals_batch",
    "depth_class_index",
    "entcompprob_score",
    "entropy_score",
    "evaluate",
    "infer_batch",
    "lca_decompose",
    "leaf_masses_batch",
    "marginalized_batch",
    "marginalized_prediction",
    "maxprob_score",
    "node_local_metrics",
    "predict_argmax",
    "predict_depth_oracle",
    "predict_leaf_model",
    "predict_min_expected_dist",
    "predictive_distribution",
    "root_ood_score",
    "split_id_ood",
    "tables_from_cond",
]
