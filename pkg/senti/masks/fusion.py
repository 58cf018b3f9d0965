"""Object masks from caption attention fused with a segmentation map.

Each noun's attention maps are averaged, resized onto the segmentation grid,
and the noun takes the segmentation class maximizing

    score(c) = (Σ attention over class c) ** alpha / (pixel count of class c)

so small alpha favors classes with dense attention and large alpha favors
the class holding the most attention overall.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import deal
import numpy as np

from ..errors import ContractError, ShapeError

DEFAULT_ALPHA = 1.4


@dataclass(frozen=True)
class AttentionMap:
    """Non-negative attention grid.

    Maps read from captions must carry some attention. Resampled maps set
    `allow_zero`, since shrinking a grid can miss every nonzero cell.
    """

    grid: np.ndarray
    allow_zero: bool = field(default=False, compare=False, repr=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=np.float32)
        if grid.ndim != 2 or grid.size == 0:
            raise ShapeError(f"attention map must be a non-empty 2-D grid, got shape {grid.shape}")
        if not np.all(np.isfinite(grid)) or np.any(grid < 0):
            raise ContractError("attention values must be finite and non-negative")
        if not self.allow_zero and not np.any(grid > 0):
            raise ContractError("attention map is zero everywhere")
        object.__setattr__(self, "grid", grid)

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape


@dataclass(frozen=True)
class SegmentationMap:
    grid: np.ndarray
    class_set: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        grid = np.asarray(self.grid)
        if grid.ndim != 2 or grid.size == 0:
            raise ShapeError(f"segmentation map must be a non-empty 2-D grid, got shape {grid.shape}")
        grid = grid.astype(np.int64)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "class_set", tuple(int(c) for c in np.unique(grid)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape


@dataclass(frozen=True)
class CaptionNouns:
    """Nouns from the top captions with the attention map of every occurrence."""

    entries: tuple[tuple[str, tuple[AttentionMap, ...]], ...]

    def __post_init__(self):
        for noun, occurrences in self.entries:
            if not occurrences:
                raise ContractError(f"noun '{noun}' has no attention maps")

    @classmethod
    def from_occurrences(cls, pairs: Iterable[tuple[str, AttentionMap]]) -> "CaptionNouns":
        """Group (noun, map) pairs by noun, keeping first-appearance order."""
        grouped: dict[str, list[AttentionMap]] = {}
        for noun, attention in pairs:
            grouped.setdefault(noun, []).append(attention)
        return cls(tuple((noun, tuple(maps)) for noun, maps in grouped.items()))

    @property
    def nouns(self) -> list[str]:
        return [noun for noun, _ in self.entries]


@dataclass(frozen=True)
class MaskFusionConfig:
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha <= 0:
            raise ContractError(f"alpha must be finite and positive, got {self.alpha}")


@deal.has()
@deal.raises(ContractError, ShapeError)
def aggregate_attention(occurrences: Sequence[AttentionMap]) -> AttentionMap:
    """Elementwise mean of one noun's attention maps, without renormalizing."""
    if not occurrences:
        raise ContractError("cannot aggregate an empty list of attention maps")
    shape = occurrences[0].shape
    for attention in occurrences:
        if attention.shape != shape:
            raise ShapeError(f"attention maps differ in shape: {shape} vs {attention.shape}")
    if len(occurrences) == 1:
        return occurrences[0]
    # float64 accumulation keeps the mean independent of list order
    stacked = np.stack([a.grid for a in occurrences]).astype(np.float64)
    return AttentionMap(np.sort(stacked, axis=0).sum(axis=0) / len(occurrences))


@deal.has()
@deal.raises(ContractError)
def resize_bilinear(attention: AttentionMap, height: int, width: int) -> AttentionMap:
    """Corner-aligned bilinear resampling onto a height×width grid."""
    if height < 1 or width < 1:
        raise ContractError(f"target size must be positive, got {height}×{width}")
    source = attention.grid
    src_h, src_w = source.shape
    if (src_h, src_w) == (height, width):
        return AttentionMap(source.copy(), allow_zero=True)

    def sample_points(src: int, dst: int) -> np.ndarray:
        if dst == 1:
            return np.full(1, (src - 1) / 2.0)
        return np.arange(dst) * ((src - 1) / (dst - 1))

    ys, xs = sample_points(src_h, height), sample_points(src_w, width)
    y0 = np.clip(np.floor(ys).astype(int), 0, src_h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, src_w - 1)
    y1, x1 = np.minimum(y0 + 1, src_h - 1), np.minimum(x0 + 1, src_w - 1)
    wy, wx = (ys - y0)[:, None], (xs - x0)[None, :]

    grid = source.astype(np.float64)
    top = grid[y0][:, x0] * (1 - wx) + grid[y0][:, x1] * wx
    bottom = grid[y1][:, x0] * (1 - wx) + grid[y1][:, x1] * wx
    return AttentionMap(top * (1 - wy) + bottom * wy, allow_zero=True)


def class_scores(attention: AttentionMap, segmentation: SegmentationMap, alpha: float) -> dict[int, float]:
    """Score of every class that covers at least one pixel."""
    if attention.shape != segmentation.shape:
        raise ShapeError(f"attention {attention.shape} does not match segmentation {segmentation.shape}")
    values = attention.grid.astype(np.float64)
    scores = {}
    for label in segmentation.class_set:
        region = segmentation.grid == label
        count = int(region.sum())
        if count == 0:
            continue
        total = float(values[region].sum())
        scores[label] = total**alpha / count
    return scores


@deal.has()
@deal.raises(ContractError, ShapeError)
def select_segment_class(
    attention: AttentionMap, segmentation: SegmentationMap, cfg: MaskFusionConfig
) -> int:
    """Class with the highest fused score; ties go to the smallest label.

    All-zero attention scores every class 0, which selects the smallest label.
    """
    if not segmentation.class_set:
        raise ContractError("segmentation map has no classes")
    scores = class_scores(attention, segmentation, cfg.alpha)
    best = max(scores.values())
    return min(label for label, score in scores.items() if score == best)


@deal.has()
@deal.raises(ContractError, ShapeError)
def extract_object_masks(
    captions: CaptionNouns, segmentation: SegmentationMap, cfg: MaskFusionConfig
) -> dict[str, np.ndarray]:
    """noun -> {0, 1} float32 mask of the segmentation class the noun selects."""
    height, width = segmentation.shape
    masks = {}
    for noun, occurrences in captions.entries:
        attention = resize_bilinear(aggregate_attention(occurrences), height, width)
        label = select_segment_class(attention, segmentation, cfg)
        masks[noun] = (segmentation.grid == label).astype(np.float32)
    return masks


@deal.pure
def filter_anp(anp_noun: str, caption_nouns: Iterable[str]) -> bool:
    """Keep a sample only when its ANP noun is among the caption nouns."""
    return anp_noun.lower() in {noun.lower() for noun in caption_nouns}
