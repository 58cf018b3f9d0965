"""Hue measurement and the warm/cold palettes used as a sentiment proxy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from matplotlib.colors import hsv_to_rgb, rgb_to_hsv

from .errors import ConfigError, ContractError, DegenerateMaskError


@dataclass(frozen=True)
class Palette:
    """A sentiment label and the hue range (degrees, inclusive) its objects take."""

    name: str
    adjective: str
    hue_low: float
    hue_high: float

    def __post_init__(self):
        if not 0 <= self.hue_low <= self.hue_high <= 360:
            raise ConfigError(f"palette '{self.name}': hue range must satisfy 0 <= low <= high <= 360")

    @property
    def center(self) -> float:
        return (self.hue_low + self.hue_high) / 2

    def contains(self, hue: float) -> bool:
        return self.hue_low <= hue % 360 <= self.hue_high

    def distance(self, hue: float) -> float:
        """Circular distance from `hue` to the nearest hue in the range."""
        if self.contains(hue):
            return 0.0
        return min(hue_distance(hue, self.hue_low), hue_distance(hue, self.hue_high))


def palettes_from_dict(values: Mapping[str, Mapping]) -> dict[str, Palette]:
    palettes = {}
    for name, entry in values.items():
        keys = {"adjective", "hue_low", "hue_high"}
        if set(entry) != keys:
            raise ConfigError(f"palette '{name}': expected keys {sorted(keys)}, got {sorted(entry)}")
        palettes[name] = Palette(name, entry["adjective"], float(entry["hue_low"]), float(entry["hue_high"]))
    ranges = sorted(palettes.values(), key=lambda p: p.hue_low)
    for first, second in zip(ranges, ranges[1:]):
        if second.hue_low <= first.hue_high:
            raise ConfigError(f"palettes '{first.name}' and '{second.name}' have overlapping hue ranges")
    return palettes


def hue_distance(a: float, b: float) -> float:
    """Shortest angular distance between two hues, in [0, 180]."""
    delta = abs(a - b) % 360.0
    return float(min(delta, 360.0 - delta))


def hsv_pixels(hue_deg, saturation, value) -> np.ndarray:
    """HSV (hue in degrees, S and V in [0, 1]) to RGB in [-1, 1]."""
    hsv = np.stack(np.broadcast_arrays(np.asarray(hue_deg, dtype=np.float64) % 360 / 360, saturation, value), axis=-1)
    return (hsv_to_rgb(hsv) * 2.0 - 1.0).astype(np.float32)


def masked_hue(image: np.ndarray, mask: np.ndarray) -> float:
    """Circular mean hue (degrees) of the masked pixels of an H×W×3 image.

    Hue angles are averaged as vectors weighted by mask × saturation, so
    gray pixels carry no vote. An all-gray region falls back to mask weights.
    """
    image = np.asarray(image, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    if image.shape[:2] != mask.shape:
        raise ContractError(f"mask shape {mask.shape} does not match image shape {image.shape[:2]}")
    if mask.sum() <= 0:
        raise DegenerateMaskError("cannot measure hue under an empty mask")
    hsv = rgb_to_hsv(np.clip((image + 1.0) / 2.0, 0.0, 1.0))
    angles = hsv[..., 0] * 2 * np.pi
    weights = mask * hsv[..., 1]
    if weights.sum() <= 0:
        weights = mask
    x, y = np.sum(weights * np.cos(angles)), np.sum(weights * np.sin(angles))
    return float(np.degrees(np.arctan2(y, x)) % 360.0)


def classify_polarity(hue: float, palettes: Mapping[str, Palette] | Sequence[Palette]) -> str:
    """Name of the palette whose hue range is nearest to `hue`."""
    entries = list(palettes.values()) if isinstance(palettes, Mapping) else list(palettes)
    if not entries:
        raise ContractError("no palettes to classify against")
    return min(entries, key=lambda p: (p.distance(hue), p.name)).name
