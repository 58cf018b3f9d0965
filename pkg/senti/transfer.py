"""Object-by-object sentiment transfer.

Each job decodes the input's (aligned) content code with the style of a
reference object, restricted to the input object's mask, blends the result
with the input by `strength`, and the jobs are composited in request order.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .color import masked_hue
from .errors import ContractError, ShapeError, TransferError
from .losses import content_grid_mask
from .nets import ModelParams, decode, encode_content, encode_style, pool_content, to_images
from .tensor.masks import as_mask_batch, require_weight
from .utilities.perf_timer import perf_timer

log = logging.getLogger(__name__)

ALIGNMENTS = ("content", "pixel", "none")


def _unit_interval(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ContractError(f"{name} must lie in [0, 1], got {value}")
    return value


def _image(image) -> np.ndarray:
    image = np.asarray(image, dtype=np.float32)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ShapeError(f"expected an H×W×3 image, got shape {image.shape}")
    return image


def _mask_for(mask, image: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask, dtype=np.float32)
    if mask.shape != image.shape[:2]:
        raise ShapeError(f"mask shape {mask.shape} does not match image shape {image.shape[:2]}")
    require_weight(as_mask_batch(mask, 1, *mask.shape))
    return mask


@dataclass(frozen=True)
class TransferJob:
    mask: np.ndarray
    reference: np.ndarray
    reference_mask: np.ndarray
    strength: float = 1.0
    align_t: float = 1.0

    def __post_init__(self):
        reference = _image(self.reference)
        object.__setattr__(self, "reference", reference)
        object.__setattr__(self, "mask", np.asarray(self.mask, dtype=np.float32))
        object.__setattr__(self, "reference_mask", _mask_for(self.reference_mask, reference))
        object.__setattr__(self, "strength", _unit_interval("strength", self.strength))
        object.__setattr__(self, "align_t", _unit_interval("align_t", self.align_t))


@dataclass(frozen=True)
class TransferRequest:
    image: np.ndarray
    jobs: tuple[TransferJob, ...] = ()
    alignment: str = "content"

    def __post_init__(self):
        image = _image(self.image)
        object.__setattr__(self, "image", image)
        object.__setattr__(self, "jobs", tuple(self.jobs))
        if self.alignment not in ALIGNMENTS:
            raise ContractError(f"alignment must be one of {ALIGNMENTS}, got '{self.alignment}'")
        for index, job in enumerate(self.jobs):
            if job.mask.shape != image.shape[:2]:
                raise ShapeError(f"job {index}: mask shape {job.mask.shape} does not match image shape {image.shape[:2]}")


@dataclass(frozen=True)
class JobDiagnostics:
    """Per-channel stats of the aligned content code over the object's cells,
    plus masked hues (degrees)."""

    aligned_mean: np.ndarray
    aligned_std: np.ndarray
    input_hue: float
    reference_hue: float
    output_hue: float


@dataclass(frozen=True)
class TransferResult:
    image: np.ndarray
    diagnostics: tuple[JobDiagnostics, ...] = field(default_factory=tuple)


def _channel_moments(code: np.ndarray, cells=None) -> tuple[np.ndarray, np.ndarray]:
    """Population mean and std over the spatial axes, kept broadcastable.

    `cells` weights the positions; None weights them all equally.
    """
    if cells is None:
        return code.mean(axis=(-2, -1), keepdims=True), code.std(axis=(-2, -1), keepdims=True)
    cells = np.broadcast_to(np.asarray(cells, dtype=np.float64), code.shape)
    total = cells.sum(axis=(-2, -1), keepdims=True)
    if np.any(total <= 0):
        raise ShapeError("alignment cells cover no content position")
    mean = (cells * code).sum(axis=(-2, -1), keepdims=True) / total
    var = (cells * (code - mean) ** 2).sum(axis=(-2, -1), keepdims=True) / total
    return mean, np.sqrt(var)


def align_content(content_in, content_ref, t: float = 1.0, in_cells=None, ref_cells=None) -> np.ndarray:
    """Move each channel's mean and std of `content_in` a fraction `t` of the
    way toward those of `content_ref`, keeping its normalized layout.

    At t = 1 the output carries the reference statistics; a constant input
    channel becomes the target mean. `in_cells` and `ref_cells` restrict the
    statistics to weighted content positions (an object's cells); the remap
    itself is applied everywhere.
    """
    t = _unit_interval("align_t", t)
    content_in = np.asarray(getattr(content_in, "data", content_in))
    content_ref = np.asarray(getattr(content_ref, "data", content_ref))
    if content_in.shape != content_ref.shape or content_in.ndim < 3:
        raise ShapeError(f"cannot align content codes of shape {content_in.shape} and {content_ref.shape}")

    source = content_in.astype(np.float64)
    mean_in, std_in = _channel_moments(source, in_cells)
    mean_ref, std_ref = _channel_moments(content_ref.astype(np.float64), ref_cells)
    target_mean = (1 - t) * mean_in + t * mean_ref
    target_std = (1 - t) * std_in + t * std_ref
    safe_std = np.where(std_in > 0, std_in, 1.0)
    normalized = np.where(std_in > 0, (source - mean_in) / safe_std, 0.0)
    return (target_std * normalized + target_mean).astype(content_in.dtype)


def align_pixels(image, mask, reference, reference_mask, t: float = 1.0) -> np.ndarray:
    """Per-RGB-channel mean/std remapping of the masked pixels of `image`
    toward the masked pixels of `reference`; unmasked pixels are kept."""
    t = _unit_interval("align_t", t)
    image, reference = _image(image), _image(reference)
    mask, reference_mask = _mask_for(mask, image), _mask_for(reference_mask, reference)

    def moments(pixels, weights):
        w = weights[..., None].astype(np.float64)
        mean = (w * pixels).sum(axis=(0, 1)) / w.sum()
        var = (w * (pixels - mean) ** 2).sum(axis=(0, 1)) / w.sum()
        return mean, np.sqrt(var)

    mean_in, std_in = moments(image.astype(np.float64), mask)
    mean_ref, std_ref = moments(reference.astype(np.float64), reference_mask)
    target_mean = (1 - t) * mean_in + t * mean_ref
    target_std = (1 - t) * std_in + t * std_ref
    normalized = np.where(std_in > 0, (image - mean_in) / np.where(std_in > 0, std_in, 1.0), 0.0)
    remapped = np.clip(target_std * normalized + target_mean, -1.0, 1.0)
    weight = mask[..., None]
    return (weight * remapped + (1 - weight) * image).astype(np.float32)


def _transfer(image, mask, reference, reference_mask, params: ModelParams, strength, align_t, alignment):
    """Blended output plus the content code that was decoded."""
    content_in = encode_content(image, params)
    content_ref = encode_content(reference, params)
    style_ref = encode_style(reference, params, reference_mask)

    if alignment == "content":
        in_cells, ref_cells = content_grid_mask(mask, 1, params), content_grid_mask(reference_mask, 1, params)
        aligned = align_content(content_in, content_ref, align_t, in_cells, ref_cells)
    else:
        aligned = content_in.data
    decoded = decode(
        aligned,
        style_ref,
        params,
        pooled_in=pool_content(content_in),
        pooled_rand=pool_content(content_ref),
        mask=mask,
    )
    output = to_images(decoded)[0]
    if alignment == "pixel":
        output = align_pixels(output, mask, reference, reference_mask, align_t)

    blended = np.clip(strength * output + (1 - strength) * image, -1.0, 1.0).astype(np.float32)
    return blended, aligned[0]


def transfer_object(
    image,
    mask,
    reference,
    reference_mask,
    params: ModelParams,
    strength: float = 1.0,
    align_t: float = 1.0,
    alignment: str = "content",
) -> np.ndarray:
    """Transfer the style of the reference object onto the masked input object.

    Returns the whole frame: strength·transferred + (1 − strength)·input.
    Strength 0 returns the input unchanged.
    """
    image, reference = _image(image), _image(reference)
    mask, reference_mask = _mask_for(mask, image), _mask_for(reference_mask, reference)
    strength, align_t = _unit_interval("strength", strength), _unit_interval("align_t", align_t)
    if alignment not in ALIGNMENTS:
        raise ContractError(f"alignment must be one of {ALIGNMENTS}, got '{alignment}'")
    if strength == 0.0:
        return image.copy()
    output, _ = _transfer(image, mask, reference, reference_mask, params, strength, align_t, alignment)
    return output


def composite(image, layers) -> np.ndarray:
    """Paint (mask, transferred image) layers over `image` in order.

    Later layers win where masks overlap; pixels outside every mask keep the
    input values exactly.
    """
    output = _image(image).copy()
    for mask, layer in layers:
        layer = _image(layer)
        if layer.shape != output.shape:
            raise ShapeError(f"layer shape {layer.shape} does not match image shape {output.shape}")
        weight = np.asarray(mask, dtype=np.float32)[..., None]
        painted = weight * layer + (1 - weight) * output
        output = np.where(weight > 0, painted, output).astype(np.float32)
    return output


def _run_job(request: TransferRequest, job: TransferJob, params: ModelParams):
    image = request.image
    mask = _mask_for(job.mask, image)
    if job.strength == 0.0:
        output, aligned = image.copy(), encode_content(image, params).data[0]
    else:
        output, aligned = _transfer(
            image, mask, job.reference, job.reference_mask, params, job.strength, job.align_t, request.alignment
        )
    mean, std = _channel_moments(aligned.astype(np.float64), content_grid_mask(mask, 1, params)[0])
    diagnostics = JobDiagnostics(
        aligned_mean=mean.reshape(-1),
        aligned_std=std.reshape(-1),
        input_hue=masked_hue(image, mask),
        reference_hue=masked_hue(job.reference, job.reference_mask),
        output_hue=masked_hue(output, mask),
    )
    return output, diagnostics


@perf_timer()
def run_transfer(request: TransferRequest, params: ModelParams, workers: int = 1) -> TransferResult:
    """Run every job of `request` and composite the results in job order.

    Jobs may run on `workers` threads; failures are collected and raised
    together as a TransferError naming each failed job.
    """
    def attempt(indexed):
        index, job = indexed
        try:
            return _run_job(request, job, params), None
        except Exception as error:  # reported with its job index below
            return None, (index, error)

    indexed = list(enumerate(request.jobs))
    if workers > 1 and len(indexed) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(attempt, indexed))
    else:
        outcomes = [attempt(item) for item in indexed]

    failures = [failure for _, failure in outcomes if failure is not None]
    if failures:
        raise TransferError(failures)

    layers, diagnostics = [], []
    for (index, job), (result, _) in zip(indexed, outcomes):
        output, job_diagnostics = result
        log.debug(
            f"job {index}: hue {job_diagnostics.input_hue:.1f} -> {job_diagnostics.output_hue:.1f} "
            f"(reference {job_diagnostics.reference_hue:.1f}, strength {job.strength})"
        )
        diagnostics.append(job_diagnostics)
        if job.strength > 0:
            layers.append((job.mask, output))
    return TransferResult(image=composite(request.image, layers), diagnostics=tuple(diagnostics))
