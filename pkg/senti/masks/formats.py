"""File formats around mask extraction.

Attention map: text header "ATTN Ha Wa" followed by Ha·Wa whitespace
separated decimal floats, row-major.
Caption manifest: one occurrence per line, "noun<TAB>path-to-attention-file";
relative paths resolve against the manifest's directory.
"""

from __future__ import annotations

import logging
import os
import shutil
import tempfile
from pathlib import Path

import numpy as np

from ..errors import ContractError, FormatError
from ..utilities import imageio
from ..utilities.atomic import atomic_write
from .fusion import AttentionMap, CaptionNouns, SegmentationMap

log = logging.getLogger(__name__)

_ATTENTION_MAGIC = "ATTN"


def read_attention(path: str | Path) -> AttentionMap:
    path = Path(path)
    tokens = path.read_text(encoding="utf-8").split()
    if len(tokens) < 3 or tokens[0] != _ATTENTION_MAGIC:
        raise FormatError(f"{path}: expected header '{_ATTENTION_MAGIC} Ha Wa'")
    try:
        height, width = int(tokens[1]), int(tokens[2])
        values = np.array([float(t) for t in tokens[3:]], dtype=np.float32)
    except ValueError as error:
        raise FormatError(f"{path}: {error}") from None
    if height < 1 or width < 1 or values.size != height * width:
        raise FormatError(f"{path}: header says {height}×{width} but found {values.size} values")
    try:
        return AttentionMap(values.reshape(height, width))
    except ContractError as error:
        raise FormatError(f"{path}: {error}") from None


def write_attention(path: str | Path, attention: AttentionMap) -> None:
    height, width = attention.shape
    rows = "\n".join(" ".join(repr(float(v)) for v in row) for row in attention.grid)
    with atomic_write(path, "w") as fp:
        fp.write(f"{_ATTENTION_MAGIC} {height} {width}\n{rows}\n")


def read_caption_manifest(path: str | Path) -> CaptionNouns:
    path = Path(path)
    pairs = []
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 2 or not fields[0].strip():
            raise FormatError(f"{path}:{number}: expected 'noun<TAB>attention-path'")
        noun, attention_path = fields[0].strip(), Path(fields[1].strip())
        if not attention_path.is_absolute():
            attention_path = path.parent / attention_path
        pairs.append((noun, read_attention(attention_path)))
    if not pairs:
        raise FormatError(f"{path}: manifest lists no nouns")
    log.debug(f"read {len(pairs)} attention occurrences from {path}")
    return CaptionNouns.from_occurrences(pairs)


def read_segmentation(path: str | Path) -> SegmentationMap:
    return SegmentationMap(imageio.read_labels(path))


def _mask_file_name(noun: str) -> str:
    if noun in ("", ".", "..") or any(ch in noun for ch in ("/", "\\", "\0")):
        raise FormatError(f"noun {noun!r} cannot name a mask file")
    return f"{noun}.png"


def write_object_masks(out_dir: str | Path, masks: dict[str, np.ndarray]) -> list[Path]:
    """One 8-bit PNG per noun, named after the noun.

    Every mask is written into a hidden staging directory under `out_dir`
    first, and none is moved into place unless all of them were written.
    """
    out_dir = Path(out_dir)
    names = {noun: _mask_file_name(noun) for noun in masks}
    out_dir.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(dir=out_dir, prefix=".masks."))
    try:
        for noun, mask in masks.items():
            imageio.write_mask(staging / names[noun], mask)
        written = []
        for noun in masks:
            target = out_dir / names[noun]
            os.replace(staging / names[noun], target)
            written.append(target)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    log.debug(f"wrote {len(written)} object masks to {out_dir}")
    return written
