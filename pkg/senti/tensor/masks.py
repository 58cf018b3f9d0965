"""Helpers that turn object masks into constant weight arrays for tensor ops."""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateMaskError, ShapeError


def as_mask_batch(mask, batch: int, height: int, width: int, dtype=np.float32) -> np.ndarray:
    """Return `mask` as an (N, 1, H, W) array; None means every position counts.

    Accepts H×W, N×H×W or N×1×H×W input. A single H×W mask is shared by the
    whole batch.
    """
    if mask is None:
        return np.ones((batch, 1, height, width), dtype=dtype)

    array = np.asarray(getattr(mask, "data", mask), dtype=dtype)
    if array.ndim == 2:
        array = np.broadcast_to(array, (batch, 1) + array.shape)
    elif array.ndim == 3:
        array = array[:, None]
    if array.ndim != 4 or array.shape[1] != 1:
        raise ShapeError(f"mask must be H×W, N×H×W or N×1×H×W, got shape {array.shape}")
    if array.shape[2:] != (height, width):
        raise ShapeError(f"mask is {array.shape[2:]} but the tensor is {(height, width)}")
    if array.shape[0] != batch:
        raise ShapeError(f"mask batch {array.shape[0]} does not match tensor batch {batch}")
    return np.ascontiguousarray(array)


def require_weight(mask_batch: np.ndarray) -> np.ndarray:
    """Per-sample mask sums, raising when any sample's mask is empty."""
    weight = mask_batch.sum(axis=(1, 2, 3))
    if np.any(weight <= 0):
        empty = [int(i) for i in np.flatnonzero(weight <= 0)]
        raise DegenerateMaskError(f"mask has no weight for batch entries {empty}")
    return weight


def downsample_mask(mask_batch: np.ndarray, size: tuple[int, int], mode: str = "area") -> np.ndarray:
    """Shrink an (N, 1, H, W) mask by an integer factor.

    "area" averages each block (soft, never loses a covered block);
    "nearest" samples each block at its center.
    """
    n, _, height, width = mask_batch.shape
    out_h, out_w = size
    if (out_h, out_w) == (height, width):
        return mask_batch
    if height % out_h or width % out_w:
        raise ShapeError(f"cannot shrink a {height}×{width} mask to {out_h}×{out_w}")
    fy, fx = height // out_h, width // out_w

    if mode == "area":
        blocks = mask_batch.reshape(n, 1, out_h, fy, out_w, fx)
        return blocks.mean(axis=(3, 5)).astype(mask_batch.dtype)
    if mode == "nearest":
        return np.ascontiguousarray(mask_batch[:, :, fy // 2 :: fy, fx // 2 :: fx])
    raise ValueError(f"unknown downsampling mode '{mode}'")
