"""Hue-based evaluation of a trained model.

Object polarity is read off the measured hue of each object and classified
against the corpus palettes, so generated and loaded corpora are treated alike.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..color import Palette, classify_polarity, hue_distance, masked_hue
from ..errors import ContractError
from ..losses import content_grid_mask
from ..nets import ModelParams, encode_content
from ..tensor import RngState
from ..transfer import transfer_object
from .corpus import CorpusSample

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObjectRef:
    sample: int
    obj: int
    hue: float


@dataclass(frozen=True)
class PolarityReport:
    """Share of transfers whose output object lands in the reference palette."""

    rates: dict[str, float]

    @property
    def average(self) -> float:
        return float(np.mean(list(self.rates.values())))


def objects_by_polarity(corpus: Sequence[CorpusSample], palettes: Mapping[str, Palette]) -> dict[str, list[ObjectRef]]:
    groups: dict[str, list[ObjectRef]] = {name: [] for name in palettes}
    for i, sample in enumerate(corpus):
        for j, obj in enumerate(sample.objects):
            hue = masked_hue(sample.image, obj.mask)
            groups[classify_polarity(hue, palettes)].append(ObjectRef(i, j, hue))
    return groups


def _require(groups: dict[str, list[ObjectRef]], names: Sequence[str]):
    for name in names:
        if not groups.get(name):
            raise ContractError(f"the corpus holds no objects of the '{name}' palette")


def _pick(groups, name: str, gen: np.random.Generator) -> ObjectRef:
    candidates = groups[name]
    return candidates[int(gen.integers(len(candidates)))]


def _transfer(params, corpus, source: ObjectRef, reference: ObjectRef) -> tuple[np.ndarray, np.ndarray]:
    image = corpus[source.sample].image
    mask = corpus[source.sample].objects[source.obj].mask
    ref = corpus[reference.sample]
    output = transfer_object(image, mask, ref.image, ref.objects[reference.obj].mask, params, strength=1.0, align_t=1.0)
    return output, mask


def hue_gap_closure(hue_in: float, hue_ref: float, hue_out: float) -> float:
    """(|in − ref| − |out − ref|) / |in − ref| on the hue circle."""
    gap = hue_distance(hue_in, hue_ref)
    if gap == 0:
        raise ContractError("input and reference hues coincide")
    return (gap - hue_distance(hue_out, hue_ref)) / gap


def eval_hue_shift(
    params: ModelParams,
    corpus: Sequence[CorpusSample],
    trials: int,
    rng: RngState,
    palettes: Mapping[str, Palette],
) -> float:
    """Mean hue gap-closure ratio over `trials` transfers, alternating the
    direction between the first two palettes (by name)."""
    names = sorted(palettes)
    if len(names) < 2:
        raise ContractError("hue-shift evaluation needs two palettes")
    groups = objects_by_polarity(corpus, palettes)
    _require(groups, names[:2])
    gen = rng.generator()

    ratios = []
    for trial in range(trials):
        src_name, ref_name = (names[0], names[1]) if trial % 2 == 0 else (names[1], names[0])
        source, reference = _pick(groups, src_name, gen), _pick(groups, ref_name, gen)
        output, mask = _transfer(params, corpus, source, reference)
        ratio = hue_gap_closure(source.hue, reference.hue, masked_hue(output, mask))
        log.debug(f"trial {trial}: {src_name} -> {ref_name}, gap closure {ratio:.3f}")
        ratios.append(ratio)
    return float(np.mean(ratios))


def eval_polarity(
    params: ModelParams,
    corpus: Sequence[CorpusSample],
    trials: int,
    rng: RngState,
    palettes: Mapping[str, Palette],
) -> PolarityReport:
    """Transfer random objects toward each palette and count how often the
    output is classified as that palette."""
    groups = objects_by_polarity(corpus, palettes)
    names = sorted(palettes)
    _require(groups, names)
    every = [ref for name in names for ref in groups[name]]
    gen = rng.generator()

    hits = {name: 0 for name in names}
    for _ in range(trials):
        source = every[int(gen.integers(len(every)))]
        for name in names:
            output, mask = _transfer(params, corpus, source, _pick(groups, name, gen))
            if classify_polarity(masked_hue(output, mask), palettes) == name:
                hits[name] += 1
    return PolarityReport({name: hits[name] / trials for name in names})


def _masked_code_stats(code: np.ndarray, cells: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and std of a (1, C, h, w) code over weighted cells."""
    code, cells = code[0].astype(np.float64), cells[0].astype(np.float64)
    total = cells.sum()
    mean = (code * cells).sum(axis=(-2, -1)) / total
    var = (cells * (code - mean[:, None, None]) ** 2).sum(axis=(-2, -1)) / total
    return mean, np.sqrt(var)


def _stats_distance(a: tuple[np.ndarray, np.ndarray], b: tuple[np.ndarray, np.ndarray]) -> float:
    return float(np.mean(np.abs(a[0] - b[0])) + np.mean(np.abs(a[1] - b[1])))


def alignment_distances(
    params: ModelParams, corpus: Sequence[CorpusSample], source: ObjectRef, reference: ObjectRef
) -> tuple[float, float]:
    """Distances from the transferred object's re-encoded content statistics
    to the reference object's and to the input object's.

    Statistics are taken over the object's content-grid cells, so the
    untouched background does not count toward either side.
    """
    output, in_mask = _transfer(params, corpus, source, reference)
    ref = corpus[reference.sample]
    in_cells = content_grid_mask(in_mask, 1, params)
    ref_cells = content_grid_mask(ref.objects[reference.obj].mask, 1, params)

    out_stats = _masked_code_stats(encode_content(output, params).data, in_cells)
    ref_stats = _masked_code_stats(encode_content(ref.image, params).data, ref_cells)
    in_stats = _masked_code_stats(encode_content(corpus[source.sample].image, params).data, in_cells)
    return _stats_distance(out_stats, ref_stats), _stats_distance(out_stats, in_stats)


def eval_alignment(params: ModelParams, corpus: Sequence[CorpusSample], pairs: int, rng: RngState) -> float:
    """Fraction of random object pairs whose transferred object re-encodes to
    content statistics nearer the reference object's than the input object's."""
    gen = rng.generator()
    closer = 0
    for _ in range(pairs):
        i, j = gen.choice(len(corpus), size=2, replace=False)
        source = ObjectRef(int(i), int(gen.integers(len(corpus[i].objects))), 0.0)
        reference = ObjectRef(int(j), int(gen.integers(len(corpus[j].objects))), 0.0)
        to_reference, to_input = alignment_distances(params, corpus, source, reference)
        log.debug(f"distance to reference {to_reference:.4f}, to input {to_input:.4f}")
        closer += int(to_reference < to_input)
    return closer / pairs
