"""Multi-path grounded video QA: span algebra, fusion, metrics and the
synthetic pipeline, backed by the C++ core."""

from ._gvqa import (
    DomainError,
    build_answer_augmented_query,
    build_ground_query,
    consistency_score,
    default_config,
    evaluate,
    extend_span,
    fuse,
    fuse_replay,
    iop,
    iou,
    nms,
    rescore,
    run,
    score_sample,
    simulate,
    synthetic_dataset,
    weighted_kmeans,
)

__all__ = [
    "DomainError",
    "build_answer_augmented_query",
    "build_ground_query",
    "consistency_score",
    "default_config",
    "evaluate",
    "extend_span",
    "fuse",
    "fuse_replay",
    "iop",
    "iou",
    "nms",
    "rescore",
    "run",
    "score_sample",
    "simulate",
    "synthetic_dataset",
    "weighted_kmeans",
]
