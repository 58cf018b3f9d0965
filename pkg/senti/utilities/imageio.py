"""PNG rasters in and out.

Images are H×W×3 float32 in [-1, 1], mapped linearly from 8-bit RGB.
Masks are H×W float32 in [0, 1], stored as 8-bit single-channel PNG.
Segmentation maps are 8-bit single-channel PNG whose pixel value is the
class label.
"""

import io
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..errors import FormatError
from .atomic import atomic_write


def _open(path) -> Image.Image:
    path = Path(path)
    with open(path, "rb") as fp:  # missing files stay OSErrors
        data = fp.read()
    try:
        image = Image.open(io.BytesIO(data))
        image.load()
        return image
    except (UnidentifiedImageError, SyntaxError, ValueError, OSError) as error:
        raise FormatError(f"{path}: not a readable image ({error})") from None


def to_unit(pixels: np.ndarray) -> np.ndarray:
    return (pixels.astype(np.float32) / np.float32(127.5) - np.float32(1.0)).astype(np.float32)


def to_bytes(image: np.ndarray) -> np.ndarray:
    scaled = (np.asarray(image, dtype=np.float32) + np.float32(1.0)) * np.float32(127.5)
    return np.clip(np.rint(scaled), 0, 255).astype(np.uint8)


def read_image(path) -> np.ndarray:
    return to_unit(np.asarray(_open(path).convert("RGB")))


def write_image(path, image: np.ndarray) -> None:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise FormatError(f"expected an H×W×3 image, got shape {image.shape}")
    with atomic_write(path) as fp:
        Image.fromarray(to_bytes(image)).save(fp, format="PNG")


def read_mask(path) -> np.ndarray:
    image = _open(path)
    if image.mode not in ("L", "1", "P"):
        raise FormatError(f"{path}: masks must be single-channel, got mode {image.mode}")
    return (np.asarray(image.convert("L"), dtype=np.float32) / np.float32(255.0)).astype(np.float32)


def write_mask(path, mask: np.ndarray) -> None:
    mask = np.asarray(mask, dtype=np.float32)
    if mask.ndim != 2:
        raise FormatError(f"expected an H×W mask, got shape {mask.shape}")
    pixels = np.clip(np.rint(mask * 255.0), 0, 255).astype(np.uint8)
    with atomic_write(path) as fp:
        Image.fromarray(pixels).save(fp, format="PNG")


def read_labels(path) -> np.ndarray:
    image = _open(path)
    if image.mode not in ("L", "P"):
        raise FormatError(f"{path}: segmentation maps must be 8-bit single-channel, got mode {image.mode}")
    return np.asarray(image).astype(np.int64)


def write_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels)
    if labels.ndim != 2 or labels.min() < 0 or labels.max() > 255:
        raise FormatError("segmentation labels must be an H×W grid of values in 0..255")
    with atomic_write(path) as fp:
        Image.fromarray(labels.astype(np.uint8)).save(fp, format="PNG")


def image_size(path) -> tuple[int, int]:
    """(height, width) of any readable image."""
    width, height = _open(Path(path)).size
    return height, width
