"""Background-suppression weakly supervised localization, C++ core bindings."""

from ._core import (
    build_mask_family,
    dilate,
    erode,
    evaluate_checkpoint,
    extract_box,
    fuse_topk,
    generate_synthetic,
    iou,
    loss_area,
    loss_bas,
    loss_cls,
    loss_frg,
    minmax01,
    peak_metrics,
    spearman,
    train_run,
)

__all__ = [
    "build_mask_family",
    "dilate",
    "erode",
    "evaluate_checkpoint",
    "extract_box",
    "fuse_topk",
    "generate_synthetic",
    "iou",
    "loss_area",
    "loss_bas",
    "loss_cls",
    "loss_frg",
    "minmax01",
    "peak_metrics",
    "spearman",
    "train_run",
]
