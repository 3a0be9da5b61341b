"""Random-forest pollution-level classification for river water-quality data."""

from .data import (
    FEATURE_NAMES,
    Dataset,
    LabeledSample,
    PollutionLevel,
    QualityStandards,
    WaterSample,
    generate_synthetic,
    parse_csv,
    rule_label,
    split_chronological,
    split_random,
    violation_count,
    write_csv,
)
from .evaluation import (
    Agreement,
    ClassMetrics,
    ConfusionMatrix,
    EvaluationReport,
    accuracy,
    agreement_level,
    build_confusion,
    cohen_kappa,
    cross_validation_folds,
    evaluate,
    evaluate_matrix,
    f_measure,
    fp_rate,
    k_fold_cross_validate,
    precision,
    recall,
    weighted_average,
)
from .forest import (
    ForestConfig,
    ForestModel,
    derive_seed,
    deserialize_model,
    forest_predict,
    forest_predict_proba,
    serialize_model,
    train_forest,
)
from .tree import (
    Internal,
    Leaf,
    SplitCandidate,
    TreeConfig,
    best_split,
    bootstrap_sample,
    candidate_thresholds,
    gini_impurity,
    grow_tree,
    tree_predict,
)

__version__ = "0.1.0"

__all__ = [
    "FEATURE_NAMES",
    "Dataset",
    "LabeledSample",
    "PollutionLevel",
    "QualityStandards",
    "WaterSample",
    "generate_synthetic",
    "parse_csv",
    "rule_label",
    "split_chronological",
    "split_random",
    "violation_count",
    "write_csv",
    "Agreement",
    "ClassMetrics",
    "ConfusionMatrix",
    "EvaluationReport",
    "accuracy",
    "agreement_level",
    "build_confusion",
    "cohen_kappa",
    "cross_validation_folds",
    "evaluate",
    "evaluate_matrix",
    "f_measure",
    "fp_rate",
    "k_fold_cross_validate",
    "precision",
    "recall",
    "weighted_average",
    "ForestConfig",
    "ForestModel",
    "derive_seed",
    "deserialize_model",
    "forest_predict",
    "forest_predict_proba",
    "serialize_model",
    "train_forest",
    "Internal",
    "Leaf",
    "SplitCandidate",
    "TreeConfig",
    "best_split",
    "bootstrap_sample",
    "candidate_thresholds",
    "gini_impurity",
    "grow_tree",
    "tree_predict",
    "__version__",
]
