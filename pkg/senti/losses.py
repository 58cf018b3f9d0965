"""The eight weighted terms of the training objective plus the discriminator loss.

Term names, in objective order:

    gan   generator adversarial loss
    g_m   image reconstruction                 o_m   object reconstruction
    g_c   content-code reconstruction          o_c   object content-code reconstruction
    g_s   style-code reconstruction            o_s   object style-code reconstruction
    g_cd  content disentanglement
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import ConfigError, ShapeError
from .nets import ModelParams, decode, encode_content, encode_style, pool_content
from .tensor import Tensor, as_tensor
from .tensor import functional as F
from .tensor.masks import as_mask_batch, downsample_mask, require_weight

LOSS_TERMS = ("gan", "g_m", "g_c", "g_s", "o_m", "o_c", "o_s", "g_cd")


@dataclass(frozen=True)
class LossWeights:
    """Objective weights; the defaults switch the object latent terms off."""

    gan: float = 1.0
    g_m: float = 10.0
    g_c: float = 1.0
    g_s: float = 10.0
    o_m: float = 10.0
    o_c: float = 0.0
    o_s: float = 0.0
    g_cd: float = 1.0

    def __post_init__(self):
        for name in LOSS_TERMS:
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0:
                raise ConfigError(f"loss weight '{name}' must be finite and non-negative, got {value}")
            object.__setattr__(self, name, value)

    @classmethod
    def from_dict(cls, values: Mapping[str, float]) -> "LossWeights":
        unknown = set(values) - set(LOSS_TERMS)
        if unknown:
            raise ConfigError(f"unknown loss weights: {sorted(unknown)}")
        return cls(**values)

    def to_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class LossReport:
    """Unweighted term values, their weighted total and the discriminator loss."""

    gan: float
    g_m: float
    g_c: float
    g_s: float
    o_m: float
    o_c: float
    o_s: float
    g_cd: float
    total: float
    disc: float = 0.0

    @classmethod
    def from_terms(cls, terms: Mapping[str, float], weights: LossWeights, disc: float = 0.0) -> "LossReport":
        values = {name: float(terms.get(name, 0.0)) for name in LOSS_TERMS}
        return cls(**values, total=total_loss(values, weights), disc=float(disc))

    def terms(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in LOSS_TERMS}

    def as_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)


def _masked_l1(a: Tensor, b: Tensor, weights: np.ndarray) -> Tensor:
    """Σ m·|a − b| / (C·Σ m) for (N, C, H, W) tensors and an (N, 1, H, W) mask."""
    if a.shape != b.shape:
        raise ShapeError(f"cannot compare tensors of shape {a.shape} and {b.shape}")
    require_weight(weights)
    weights = Tensor(weights.astype(a.dtype, copy=False), op="mask")
    total = F.sum(F.mul(F.abs(F.sub(a, b)), weights))
    return F.div(total, float(a.shape[1]) * float(weights.data.sum()))


def image_recon_loss(reconstruction, target, mask=None) -> Tensor:
    """Mean absolute error, weighted by `mask` when given (L_g^m / L_o^m)."""
    reconstruction, target = as_tensor(reconstruction), as_tensor(target)
    if reconstruction.ndim != 4:
        raise ShapeError(f"expected NCHW images, got shape {reconstruction.shape}")
    n, _, h, w = reconstruction.shape
    return _masked_l1(reconstruction, target, as_mask_batch(mask, n, h, w, dtype=reconstruction.dtype))


def content_grid_mask(mask, batch: int, params: ModelParams) -> np.ndarray:
    """Nearest-sampled content-grid mask; a sample whose object slips between
    the sample points keeps its area-downsampled cells instead."""
    config = params.config
    size = (config.content_size, config.content_size)
    pixels = as_mask_batch(mask, batch, config.image_size, config.image_size)
    nearest = downsample_mask(pixels, size, "nearest")
    empty = nearest.sum(axis=(1, 2, 3)) <= 0
    if np.any(empty):
        nearest = nearest.copy()
        nearest[empty] = downsample_mask(pixels, size, "area")[empty]
    return nearest


def latent_recon_losses(content, style, regenerated, params: ModelParams, mask=None) -> tuple[Tensor, Tensor]:
    """(L_c, L_s) for codes that produced `regenerated`.

    With a mask: L_c only counts content cells covered by the object and the
    style code is re-encoded from the object alone.
    """
    content, style = as_tensor(content), as_tensor(style)
    content_rec = encode_content(regenerated, params)
    style_rec = encode_style(regenerated, params, mask)

    n = content.shape[0]
    weights = as_mask_batch(None, n, *content.shape[2:]) if mask is None else content_grid_mask(mask, n, params)
    content_loss = _masked_l1(content_rec, content, weights)
    if style_rec.shape != style.shape:
        raise ShapeError(f"style code shape {style.shape} does not match the encoder's {style_rec.shape}")
    style_loss = F.mean(F.abs(F.sub(style_rec, style)))
    return content_loss, style_loss


def discriminator_loss(d_real, d_fake) -> Tensor:
    """−mean log σ(real) − mean log(1 − σ(fake)), in logit space."""
    return F.add(F.mean(F.softplus(F.neg(d_real))), F.mean(F.softplus(d_fake)))


def generator_adversarial_loss(d_fake) -> Tensor:
    """Non-saturating −mean log σ(fake)."""
    return F.mean(F.softplus(F.neg(d_fake)))


def adversarial_loss(d_real, d_fake) -> tuple[Tensor, Tensor]:
    return discriminator_loss(d_real, d_fake), generator_adversarial_loss(d_fake)


def disentanglement_distance(
    content_rec, content, content_rand, eps: float = F.DEFAULT_EPS, mask=None, rand_mask=None
) -> Tensor:
    """|μ(c_rec) − μ(c_rand)| + |σ(c_rec) − σ(c_rand)| + |norm(c_rec) − norm(c)|,
    each a mean absolute difference over channels (and positions).

    `mask` restricts the statistics of c_rec and c and the layout term to an
    object; `rand_mask` does the same for c_rand.
    """
    content_rec, content, content_rand = as_tensor(content_rec), as_tensor(content), as_tensor(content_rand)
    if not content_rec.shape == content.shape == content_rand.shape:
        raise ShapeError(f"content codes differ in shape: {content_rec.shape}, {content.shape}, {content_rand.shape}")
    rec = F.channel_stats(content_rec, mask, eps=eps)
    rand = F.channel_stats(content_rand, rand_mask, eps=eps)
    ref = F.channel_stats(content, mask, eps=eps)

    mean_term = F.mean(F.abs(F.sub(rec.mean, rand.mean)))
    std_term = F.mean(F.abs(F.sub(rec.std, rand.std)))
    layout_rec = F.div(F.sub(content_rec, rec.mean), rec.std)
    layout = F.div(F.sub(content, ref.mean), ref.std)
    if mask is None:
        layout_term = F.mean(F.abs(F.sub(layout_rec, layout)))
    else:
        n, _, h, w = content.shape
        layout_term = _masked_l1(layout_rec, layout, as_mask_batch(mask, n, h, w, dtype=content.dtype))
    return F.add(F.add(mean_term, std_term), layout_term)


def content_disentanglement_loss(content, style, content_rand, params: ModelParams) -> Tensor:
    """L_g^cd for c decoded with the pooled statistics of c_rand.

    Without content pooling the MLP never sees c_rand and the term is 0.
    """
    content = as_tensor(content)
    if not params.config.content_pooling:
        return Tensor(np.zeros((), dtype=content.dtype), op="const")
    content_rand = as_tensor(content_rand)
    generated = decode(content, style, params, pooled_in=pool_content(content), pooled_rand=pool_content(content_rand))
    return disentanglement_distance(encode_content(generated, params), content, content_rand, params.config.eps)


def pixel_disentanglement_loss(
    images, content, style, content_rand, rand_images, params: ModelParams, mask, rand_mask
) -> Tensor:
    """L_g^cd measured on the decoded object's pixels instead of its content code.

    c is decoded with the pooled statistics of c_rand. The object's masked RGB
    statistics are pulled toward the object of `rand_images` (the images
    c_rand was encoded from) and its normalized RGB layout toward the input's.
    """
    content = as_tensor(content)
    if not params.config.content_pooling:
        return Tensor(np.zeros((), dtype=content.dtype), op="const")
    content_rand = as_tensor(content_rand)
    generated = decode(content, style, params, pooled_in=pool_content(content), pooled_rand=pool_content(content_rand))
    return disentanglement_distance(generated, images, rand_images, params.config.eps, mask=mask, rand_mask=rand_mask)


def total_loss(terms: Mapping, weights: LossWeights):
    """Σ λ·term over the terms with a nonzero weight.

    Works on floats as well as Tensors; zero-weighted terms never enter the
    sum, so they cannot reach the gradient.
    """
    total = 0.0
    for name in LOSS_TERMS:
        weight = getattr(weights, name)
        if weight == 0:
            continue
        total = total + weight * terms[name]
    return total
