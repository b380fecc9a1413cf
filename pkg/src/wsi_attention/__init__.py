"""Toolkit for reconstructing, evaluating and predicting pathologist
visual attention from whole-slide-image navigation logs."""

from .heatmap import (
    AttentionHeatmap,
    Grid2D,
    accumulate_viewports,
    average_heatmaps,
    build_attention_heatmap,
    gaussian_smooth,
    min_max_normalize,
)
from .ingest import (
    Grade,
    Group,
    MagnificationStats,
    NavigationSession,
    SlideManifest,
    TumorAnnotation,
    ViewportEvent,
    magnification_stats,
    parse_annotation,
    parse_session_log,
    validate_and_clip,
)
from .metrics import (
    CaseReport,
    TumorProbabilityMap,
    cross_correlation,
    evaluate_case,
    histogram_match,
    rasterize_annotation,
    tumor_probability_map,
    welch_t_test,
)
from .prediction import (
    BinSpec,
    PatchClassifier,
    PatchRecord,
    discretize_intensity,
    extract_patch_grid,
    import_predictions,
    patch_features,
    patch_label,
    predict_and_reassemble,
    train_patch_classifier,
)
from .scanpath import (
    AlignmentScoring,
    Scanpath,
    align_score,
    build_scanpath,
    grade_string,
    mean_pairwise_sss,
    semantic_sequence_score,
    viewport_center,
)

__version__ = "0.1.0"
