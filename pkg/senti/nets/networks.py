"""The five networks: content encoder, style encoder, AdaIN-parameter MLP,
decoder and patch discriminator.

All networks work on NCHW batches. Passing a mask to `encode_style` or
`decode` gives the object-level variants: style pooling and AdaIN statistics
then only see the masked positions. Passing no mask is the same computation
with a mask of ones.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from ..tensor import Tensor, as_tensor
from ..tensor import functional as F
from ..tensor.masks import as_mask_batch, downsample_mask
from .config import NetConfig
from .params import ModelParams


def to_batch(images) -> Tensor:
    """H×W×3 or N×H×W×3 rasters (or an NCHW Tensor) as an NCHW Tensor."""
    if isinstance(images, Tensor):
        if images.ndim != 4:
            raise ShapeError(f"expected an NCHW tensor, got shape {images.shape}")
        return images
    array = np.asarray(images)
    if array.ndim == 3:
        array = array[None]
    if array.ndim != 4 or array.shape[-1] != 3:
        raise ShapeError(f"expected H×W×3 or N×H×W×3 images, got shape {array.shape}")
    if array.dtype != np.float64:
        array = array.astype(np.float32)
    return Tensor(np.ascontiguousarray(array.transpose(0, 3, 1, 2)), op="images")


def to_images(batch: Tensor) -> np.ndarray:
    """NCHW Tensor back to N×H×W×3 rasters."""
    return np.ascontiguousarray(batch.data.transpose(0, 2, 3, 1))


def _checked_images(images, config: NetConfig) -> Tensor:
    x = to_batch(images)
    expected = (3, config.image_size, config.image_size)
    if x.shape[1:] != expected:
        raise ShapeError(f"expected images of shape {expected} (CHW), got {x.shape[1:]}")
    return x


def content_mask(mask, batch: int, config: NetConfig, mode: str = "area") -> np.ndarray | None:
    """A pixel-grid (or content-grid) mask brought onto the content grid."""
    if mask is None:
        return None
    array = np.asarray(getattr(mask, "data", mask), dtype=np.float32)
    size = array.shape[-1]
    if size == config.content_size and array.shape[-2] == config.content_size:
        return as_mask_batch(array, batch, size, size)
    pixels = as_mask_batch(array, batch, config.image_size, config.image_size)
    return downsample_mask(pixels, (config.content_size, config.content_size), mode)


def _conv(params: ModelParams, name: str, x: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    bias = params.get(f"{name}.bias")
    return F.conv2d(x, params[f"{name}.weight"], bias, stride=stride, padding=padding)


def _linear(params: ModelParams, name: str, x: Tensor) -> Tensor:
    return F.linear(x, params[f"{name}.weight"], params[f"{name}.bias"])


def encode_content(images, params: ModelParams) -> Tensor:
    """E_c: two stride-2 convolutions and residual blocks, instance normalized."""
    config = params.config
    eps = config.eps
    x = _checked_images(images, params.config)

    h = F.relu(F.instance_norm(_conv(params, "enc_c.down0", x, stride=2, padding=1), eps=eps))
    h = F.relu(F.instance_norm(_conv(params, "enc_c.down1", h, stride=2, padding=1), eps=eps))
    for r in range(config.res_blocks):
        y = F.relu(F.instance_norm(_conv(params, f"enc_c.res{r}.conv0", h, padding=1), eps=eps))
        y = F.instance_norm(_conv(params, f"enc_c.res{r}.conv1", y, padding=1), eps=eps)
        h = F.add(h, y)
    return h


def encode_style(images, params: ModelParams, mask=None) -> Tensor:
    """E_s, or E_s^o when `mask` is given: pooling only covers the object."""
    config = params.config
    x = _checked_images(images, config)

    h = F.relu(_conv(params, "enc_s.down0", x, stride=2, padding=1))
    h = F.relu(_conv(params, "enc_s.down1", h, stride=2, padding=1))
    pooled = F.global_avg_pool(h, content_mask(mask, x.shape[0], config))
    return _linear(params, "enc_s.fc", pooled)


def pool_content(content) -> Tensor:
    """P: global average pooling of a content code, (N, C, H, W) -> (N, C)."""
    return F.global_avg_pool(as_tensor(content))


def mlp_adain_params(style, pooled_in, pooled_rand, params: ModelParams) -> list[tuple[Tensor, Tensor]]:
    """(gamma, beta) for every AdaIN layer of the decoder, in layer order.

    The MLP sees [style ‖ P(c_in) ‖ P(c_rand)]; with content pooling
    switched off it sees the style code alone. gamma is 1 + raw output so an
    all-zero head leaves the normalized features unscaled.
    """
    config = params.config
    style = as_tensor(style)
    if style.ndim != 2 or style.shape[1] != config.style_dim:
        raise ShapeError(f"expected style codes of shape (N, {config.style_dim}), got {style.shape}")
    inputs = [style]
    if config.content_pooling:
        for pooled in (pooled_in, pooled_rand):
            pooled = as_tensor(pooled)
            if pooled.shape != (style.shape[0], config.content_channels):
                raise ShapeError(f"expected pooled content of shape {(style.shape[0], config.content_channels)}, got {pooled.shape}")
            inputs.append(pooled)

    h = F.relu(_linear(params, "mlp.fc0", F.concat(inputs, axis=1)))
    h = F.relu(_linear(params, "mlp.fc1", h))
    raw = _linear(params, "mlp.out", h)
    chunks = F.split(raw, [config.content_channels] * (2 * config.adain_layers), axis=1)
    return [(F.add(chunks[2 * i], 1.0), chunks[2 * i + 1]) for i in range(config.adain_layers)]


def decode(content, style, params: ModelParams, pooled_in=None, pooled_rand=None, mask=None) -> Tensor:
    """G, or G^o when `mask` is given.

    pooled_in defaults to P(content) and pooled_rand to pooled_in, which is
    plain reconstruction. With a mask, the AdaIN statistics come from the
    object's positions on the content grid; other layers are unmasked.
    """
    config = params.config
    content = as_tensor(content)
    if content.shape[1:] != config.content_shape:
        raise ShapeError(f"expected content codes of shape {config.content_shape}, got {content.shape[1:]}")
    if pooled_in is None:
        pooled_in = pool_content(content)
    if pooled_rand is None:
        pooled_rand = pooled_in
    adain_params = mlp_adain_params(style, pooled_in, pooled_rand, params)
    object_mask = content_mask(mask, content.shape[0], config)

    h = content
    for r in range(config.res_blocks):
        (g0, b0), (g1, b1) = adain_params[2 * r], adain_params[2 * r + 1]
        y = _conv(params, f"dec.res{r}.conv0", h, padding=1)
        y = F.relu(F.adain(y, g0, b0, object_mask, config.eps))
        y = _conv(params, f"dec.res{r}.conv1", y, padding=1)
        y = F.adain(y, g1, b1, object_mask, config.eps)
        h = F.add(h, y)

    h = F.relu(_conv(params, "dec.up0", F.upsample2x(h), padding=1))
    h = F.relu(_conv(params, "dec.up1", F.upsample2x(h), padding=1))
    return F.tanh(_conv(params, "dec.head", h, padding=1))


def discriminate(images, params: ModelParams) -> Tensor:
    """Patch logits of shape (N, 1, image_size/8, image_size/8)."""
    h = _checked_images(images, params.config)
    for i in range(3):
        h = F.leaky_relu(_conv(params, f"disc.down{i}", h, stride=2, padding=1))
    return _conv(params, "disc.head", h)
