from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from ..errors import ConfigError

CONTENT_DOWNSAMPLING = 4  # two stride-2 convolutions
DISC_DOWNSAMPLING = 8  # three stride-2 convolutions


@dataclass(frozen=True)
class NetConfig:
    """Network dimensions.

    Desk scale: 32×32 images, a 32×8×8 content code and an 8-d style code.
    Full-size runs use 256×256 images with a 256×64×64 content code; every
    dimension is configurable.
    """

    image_size: int = 32
    content_channels: int = 32
    style_dim: int = 8
    mlp_hidden: int = 64
    res_blocks: int = 1
    encoder_width: int = 16
    style_widths: tuple[int, ...] = (16, 32)
    decoder_widths: tuple[int, ...] = (24, 12)
    disc_widths: tuple[int, ...] = (16, 32, 64)
    content_pooling: bool = True
    eps: float = 1e-5

    def __post_init__(self):
        for name in ("style_widths", "decoder_widths", "disc_widths"):
            object.__setattr__(self, name, tuple(int(w) for w in getattr(self, name)))
        sizes = [self.image_size, self.content_channels, self.style_dim, self.mlp_hidden, self.res_blocks]
        widths = [self.encoder_width, *self.style_widths, *self.decoder_widths, *self.disc_widths]
        if min(sizes + widths) < 1:
            raise ConfigError("network dimensions must all be at least 1")
        if self.image_size % DISC_DOWNSAMPLING:
            raise ConfigError(f"image_size must be divisible by {DISC_DOWNSAMPLING}, got {self.image_size}")
        if len(self.style_widths) != 2 or len(self.decoder_widths) != 2 or len(self.disc_widths) != 3:
            raise ConfigError("expected 2 style widths, 2 decoder widths and 3 discriminator widths")
        if self.eps <= 0:
            raise ConfigError("eps must be positive")

    @property
    def content_size(self) -> int:
        return self.image_size // CONTENT_DOWNSAMPLING

    @property
    def content_shape(self) -> tuple[int, int, int]:
        return (self.content_channels, self.content_size, self.content_size)

    @property
    def adain_layers(self) -> int:
        return 2 * self.res_blocks

    @property
    def mlp_input(self) -> int:
        pooled = 2 * self.content_channels if self.content_pooling else 0
        return self.style_dim + pooled

    @property
    def disc_size(self) -> int:
        return self.image_size // DISC_DOWNSAMPLING

    @classmethod
    def from_dict(cls, values: dict) -> "NetConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown network keys: {sorted(unknown)}")
        return cls(**values)

    def to_dict(self) -> dict:
        values = dataclasses.asdict(self)
        for name in ("style_widths", "decoder_widths", "disc_widths"):
            values[name] = list(values[name])
        return values
