from .fusion import (
    DEFAULT_ALPHA,
    AttentionMap,
    CaptionNouns,
    MaskFusionConfig,
    SegmentationMap,
    aggregate_attention,
    extract_object_masks,
    filter_anp,
    resize_bilinear,
    select_segment_class,
)

__all__ = [
    "DEFAULT_ALPHA",
    "AttentionMap",
    "CaptionNouns",
    "MaskFusionConfig",
    "SegmentationMap",
    "aggregate_attention",
    "extract_object_masks",
    "filter_anp",
    "resize_bilinear",
    "select_segment_class",
]
