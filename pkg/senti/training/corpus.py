"""Synthetic two-palette corpus standing in for a sentiment-tagged photo set.

Every image is a gray background with smooth noise texture holding one to
three flat-colored shapes. Each shape takes its hue from a sentiment palette
(warm or cold by default), so an image's "sentiment" is the hue of its objects
and the shape name plays the noun of its adjective-noun label.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..color import Palette, hsv_pixels, palettes_from_dict
from ..errors import ConfigError, FormatError
from ..tensor import RngState
from ..utilities import imageio
from ..utilities.atomic import atomic_write
from ..utilities.perf_timer import perf_timer
from ..utilities.tomlconfig import TomlConfig

log = logging.getLogger(__name__)

SHAPE_KINDS = ("disc", "rectangle")
MANIFEST_NAME = "corpus.tsv"
_PLACEMENT_ATTEMPTS = 50


@dataclass(frozen=True)
class SyntheticCorpusSpec:
    count: int = 64
    image_size: int = 32
    min_objects: int = 1
    max_objects: int = 3
    shape_kinds: tuple[str, ...] = SHAPE_KINDS
    palettes: Mapping[str, Palette] = field(default_factory=dict)
    texture_amplitude: float = 0.08
    # texture noise is drawn on a lattice this many pixels apart; 1 gives per-pixel noise
    texture_scale: int = 4
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "shape_kinds", tuple(self.shape_kinds))
        if self.count < 2:
            raise ConfigError(f"a corpus needs at least 2 images, got count={self.count}")
        if self.image_size < 8:
            raise ConfigError(f"image_size must be at least 8, got {self.image_size}")
        if not 1 <= self.min_objects <= self.max_objects:
            raise ConfigError("objects per image must satisfy 1 <= min_objects <= max_objects")
        unknown = set(self.shape_kinds) - set(SHAPE_KINDS)
        if not self.shape_kinds or unknown:
            raise ConfigError(f"shape_kinds must be drawn from {SHAPE_KINDS}, got {list(self.shape_kinds)}")
        if not self.palettes:
            raise ConfigError("at least one palette is required")
        if self.texture_amplitude < 0:
            raise ConfigError("texture_amplitude must be non-negative")
        if self.texture_scale < 1:
            raise ConfigError(f"texture_scale must be at least 1, got {self.texture_scale}")

    @classmethod
    def from_dict(cls, values: Mapping) -> "SyntheticCorpusSpec":
        values = dict(values)
        palettes = palettes_from_dict(values.pop("palettes", {}))
        try:
            return cls(palettes=palettes, **values)
        except TypeError as error:
            raise ConfigError(f"corpus config: {error}") from None

    @classmethod
    def load(cls, override=None, use_user_config: bool = True, **overrides) -> "SyntheticCorpusSpec":
        """Bundled corpus defaults, layered with user/explicit files and keyword overrides."""
        values = TomlConfig("corpus", override, use_user_config).as_dict()
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls.from_dict(values)


@dataclass(frozen=True)
class CorpusObject:
    """One shape: its noun, its {0,1} mask and, for generated corpora, its palette."""

    noun: str
    mask: np.ndarray
    sentiment: str | None = None


@dataclass(frozen=True)
class CorpusSample:
    image: np.ndarray
    objects: tuple[CorpusObject, ...]
    anp: tuple[str, str]

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        if not self.objects:
            raise FormatError("a corpus sample needs at least one object")


def _shape_mask(kind: str, size: int, gen: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    low, high = 0.15 * size, 0.28 * size
    if kind == "disc":
        radius = gen.uniform(low, high)
        cy, cx = gen.uniform(radius, size - radius, size=2)
        mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2
    else:
        half_h, half_w = gen.uniform(low, high, size=2)
        cy = gen.uniform(half_h, size - half_h)
        cx = gen.uniform(half_w, size - half_w)
        mask = (np.abs(yy - cy) <= half_h) & (np.abs(xx - cx) <= half_w)
    return mask


def _value_noise(size: int, amplitude: float, scale: int, gen: np.random.Generator) -> np.ndarray:
    """Normal samples on a lattice `scale` pixels apart, bilinearly interpolated."""
    points = np.arange(size) / scale
    lattice = np.arange(int(points[-1]) + 2)
    coarse = gen.normal(0.0, amplitude, size=(lattice.size, lattice.size))
    columns = np.stack([np.interp(points, lattice, column) for column in coarse.T], axis=1)
    return np.stack([np.interp(points, lattice, row) for row in columns])


def _generate_sample(spec: SyntheticCorpusSpec, index: int) -> CorpusSample:
    gen = RngState(spec.seed).fork(index).generator()
    size = spec.image_size
    names = sorted(spec.palettes)

    gray = gen.uniform(-0.2, 0.2)
    texture = _value_noise(size, spec.texture_amplitude, spec.texture_scale, gen)
    image = np.repeat((gray + texture)[..., None], 3, axis=2)

    occupied = np.zeros((size, size), dtype=bool)
    objects = []
    wanted = int(gen.integers(spec.min_objects, spec.max_objects + 1))
    for _ in range(_PLACEMENT_ATTEMPTS):
        if len(objects) == wanted:
            break
        kind = spec.shape_kinds[int(gen.integers(len(spec.shape_kinds)))]
        mask = _shape_mask(kind, size, gen)
        if not mask.any() or (mask & occupied).any():
            continue
        palette = spec.palettes[names[int(gen.integers(len(names)))]]
        hue = gen.uniform(palette.hue_low, palette.hue_high)
        saturation, value = gen.uniform(0.55, 0.85, size=2)
        shading = np.clip(1.0 + _value_noise(size, spec.texture_amplitude, spec.texture_scale, gen), 0.85, 1.15)
        fill = hsv_pixels(np.full((size, size), hue), saturation, np.clip(value * shading, 0.0, 1.0))
        image[mask] = fill[mask]
        occupied |= mask
        objects.append(CorpusObject(kind, mask.astype(np.float32), palette.name))

    image = np.clip(image, -1.0, 1.0).astype(np.float32)
    first = objects[0]
    return CorpusSample(image, tuple(objects), (spec.palettes[first.sentiment].adjective, first.noun))


@perf_timer()
def generate_corpus(spec: SyntheticCorpusSpec, workers: int = 1) -> list[CorpusSample]:
    """`spec.count` samples; sample i depends only on (seed, i)."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            samples = list(pool.map(lambda i: _generate_sample(spec, i), range(spec.count)))
    else:
        samples = [_generate_sample(spec, i) for i in range(spec.count)]
    log.info(f"generated {len(samples)} corpus images at {spec.image_size}×{spec.image_size}")
    return samples


def save_corpus(samples: Sequence[CorpusSample], out_dir: str | Path) -> Path:
    """Write images, masks and the manifest under `out_dir`; returns the manifest path.

    Manifest line: "image-path<TAB>noun=mask-path[,noun=mask-path...]<TAB>adjective_noun",
    paths relative to the manifest.
    """
    out_dir = Path(out_dir)
    lines = []
    for i, sample in enumerate(samples):
        image_path = Path("images") / f"{i:04d}.png"
        imageio.write_image(out_dir / image_path, sample.image)
        entries = []
        for j, obj in enumerate(sample.objects):
            mask_path = Path("masks") / f"{i:04d}_{j}_{obj.noun}.png"
            imageio.write_mask(out_dir / mask_path, obj.mask)
            entries.append(f"{obj.noun}={mask_path.as_posix()}")
        adjective, noun = sample.anp
        lines.append(f"{image_path.as_posix()}\t{','.join(entries)}\t{adjective}_{noun}\n")

    manifest = out_dir / MANIFEST_NAME
    with atomic_write(manifest, "w") as fp:
        fp.writelines(lines)
    log.info(f"wrote {len(samples)} samples to {manifest}")
    return manifest


def load_corpus(manifest: str | Path) -> list[CorpusSample]:
    """Read a corpus manifest; a directory means its corpus.tsv."""
    manifest = Path(manifest)
    if manifest.is_dir():
        manifest = manifest / MANIFEST_NAME
    base = manifest.parent
    with open(manifest, "r", encoding="utf-8") as fp:
        lines = fp.read().splitlines()

    samples = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3 or "_" not in fields[2]:
            raise FormatError(f"{manifest}:{number}: expected 'image<TAB>noun=mask,...<TAB>adjective_noun'")
        image = imageio.read_image(base / fields[0])
        objects = []
        for entry in fields[1].split(","):
            noun, sep, mask_path = entry.partition("=")
            if not sep or not noun or not mask_path:
                raise FormatError(f"{manifest}:{number}: bad object entry '{entry}'")
            mask = imageio.read_mask(base / mask_path)
            if mask.shape != image.shape[:2]:
                raise FormatError(f"{manifest}:{number}: mask {mask_path} is {mask.shape}, image is {image.shape[:2]}")
            objects.append(CorpusObject(noun, mask))
        adjective, _, noun = fields[2].partition("_")
        samples.append(CorpusSample(image, tuple(objects), (adjective, noun)))

    if len(samples) < 2:
        raise FormatError(f"{manifest}: a corpus needs at least 2 samples, found {len(samples)}")
    log.info(f"loaded {len(samples)} samples from {manifest}")
    return samples
