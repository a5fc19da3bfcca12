"""Error detection for contrastive vision-language classifiers.

Fits per-class multivariate Gaussians over PCA-projected image features
and fuses their normalized log-likelihood with the inter-modal softmax
confidence into a single uncertainty score for flagging likely
misclassifications.
"""

from .errors import VlmUncertError
from .gaussians import (
    ClassGaussian,
    GaussianDictionary,
    build_dictionary,
    fit_class_gaussian,
    load_dictionary,
    log_pdf,
    log_pdf_rows,
    save_dictionary,
)
from .label_shift import (
    SuperclassMap,
    build_superclass_dictionary,
    build_superclass_map,
    load_superclass_map,
    save_superclass_map,
    select_k,
)
from .metrics import (
    EvaluationReport,
    ScoredSample,
    accuracy,
    aupr,
    auroc,
    evaluate_method,
    f1_sweep,
    fpr_at_tpr,
    render_report_table,
)
from .projection import (
    ConditionReport,
    PcaModel,
    condition_report,
    fit_pca,
    load_pca,
    project,
    save_pca,
)
from .scoring import (
    Prediction,
    RejectionPolicy,
    SampleScore,
    ScoreRun,
    ScoringConfig,
    SimilarityProfile,
    UncertaintyScore,
    baseline_scores,
    calibrate_temperature,
    classify,
    fused_uncertainty,
    intra_class_score,
    score_dataset,
)
from .store import (
    ClassPartition,
    EmbeddingMatrix,
    LabeledDataset,
    l2_normalize,
    load_dataset,
    partition_by_class,
    save_dataset,
)
from .synthetic import SyntheticSpec, make_benchmark, make_spectrum_dataset

__version__ = "0.1.0"

__all__ = [
    "VlmUncertError",
    "EmbeddingMatrix",
    "LabeledDataset",
    "ClassPartition",
    "load_dataset",
    "save_dataset",
    "partition_by_class",
    "l2_normalize",
    "PcaModel",
    "ConditionReport",
    "fit_pca",
    "project",
    "condition_report",
    "save_pca",
    "load_pca",
    "ClassGaussian",
    "GaussianDictionary",
    "fit_class_gaussian",
    "log_pdf",
    "log_pdf_rows",
    "build_dictionary",
    "save_dictionary",
    "load_dictionary",
    "SimilarityProfile",
    "Prediction",
    "UncertaintyScore",
    "RejectionPolicy",
    "ScoringConfig",
    "SampleScore",
    "ScoreRun",
    "classify",
    "intra_class_score",
    "fused_uncertainty",
    "baseline_scores",
    "calibrate_temperature",
    "score_dataset",
    "SuperclassMap",
    "select_k",
    "build_superclass_map",
    "build_superclass_dictionary",
    "save_superclass_map",
    "load_superclass_map",
    "ScoredSample",
    "EvaluationReport",
    "auroc",
    "aupr",
    "fpr_at_tpr",
    "f1_sweep",
    "accuracy",
    "evaluate_method",
    "render_report_table",
    "SyntheticSpec",
    "make_benchmark",
    "make_spectrum_dataset",
]
