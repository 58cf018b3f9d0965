"""Named parameter tensors for the five networks.

The image-level and object-level variants of the style encoder and of the
decoder are the same functions called with or without a mask, so they read
the very same tensors from one `ModelParams`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from ..errors import ShapeError
from ..tensor import RngState, Tensor
from .config import NetConfig

NETWORKS = ("enc_c", "enc_s", "mlp", "dec", "disc")
GENERATOR_NETWORKS = ("enc_c", "enc_s", "mlp", "dec")


@dataclass(frozen=True)
class ParamSpec:
    name: str
    shape: tuple[int, ...]
    fan_in: int
    gain: float = math.sqrt(2.0)  # layers feeding a rectifier


def _conv(name, out_ch, in_ch, kernel, bias=True, gain=math.sqrt(2.0)) -> list[ParamSpec]:
    fan_in = in_ch * kernel * kernel
    specs = [ParamSpec(f"{name}.weight", (out_ch, in_ch, kernel, kernel), fan_in, gain)]
    if bias:
        specs.append(ParamSpec(f"{name}.bias", (out_ch,), fan_in, gain))
    return specs


def _linear(name, out_dim, in_dim, gain=math.sqrt(2.0)) -> list[ParamSpec]:
    return [
        ParamSpec(f"{name}.weight", (out_dim, in_dim), in_dim, gain),
        ParamSpec(f"{name}.bias", (out_dim,), in_dim, gain),
    ]


def architecture(config: NetConfig) -> list[ParamSpec]:
    """Every parameter tensor the networks declare, in a fixed order."""
    cc = config.content_channels
    specs: list[ParamSpec] = []

    # content encoder: convolutions right before instance norm carry no bias
    specs += _conv("enc_c.down0", config.encoder_width, 3, 4, bias=False)
    specs += _conv("enc_c.down1", cc, config.encoder_width, 4, bias=False)
    for r in range(config.res_blocks):
        specs += _conv(f"enc_c.res{r}.conv0", cc, cc, 3, bias=False)
        specs += _conv(f"enc_c.res{r}.conv1", cc, cc, 3, bias=False)

    s0, s1 = config.style_widths
    specs += _conv("enc_s.down0", s0, 3, 4)
    specs += _conv("enc_s.down1", s1, s0, 4)
    specs += _linear("enc_s.fc", config.style_dim, s1, gain=1.0)

    specs += _linear("mlp.fc0", config.mlp_hidden, config.mlp_input)
    specs += _linear("mlp.fc1", config.mlp_hidden, config.mlp_hidden)
    specs += _linear("mlp.out", 2 * config.adain_layers * cc, config.mlp_hidden, gain=1.0)

    for r in range(config.res_blocks):
        specs += _conv(f"dec.res{r}.conv0", cc, cc, 3, bias=False)
        specs += _conv(f"dec.res{r}.conv1", cc, cc, 3, bias=False)
    d0, d1 = config.decoder_widths
    specs += _conv("dec.up0", d0, cc, 3)
    specs += _conv("dec.up1", d1, d0, 3)
    specs += _conv("dec.head", 3, d1, 3, gain=1.0)

    widths = (3, *config.disc_widths)
    for i in range(3):
        specs += _conv(f"disc.down{i}", widths[i + 1], widths[i], 4)
    specs += _conv("disc.head", 1, widths[-1], 1, gain=1.0)
    return specs


class ModelParams(Mapping[str, Tensor]):
    """Immutable name -> Tensor collection tied to the NetConfig that shaped it."""

    def __init__(self, config: NetConfig, tensors: Mapping[str, Tensor]):
        self.config = config
        self._tensors = dict(tensors)

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def __repr__(self):
        return f"ModelParams({len(self)} tensors, image_size={self.config.image_size})"

    def group(self, *networks: str) -> dict[str, Tensor]:
        """Tensors belonging to the named networks, e.g. group("disc")."""
        prefixes = tuple(f"{n}." for n in networks)
        return {name: t for name, t in self._tensors.items() if name.startswith(prefixes)}

    def replace(self, updates: Mapping[str, np.ndarray]) -> "ModelParams":
        tensors = dict(self._tensors)
        for name, value in updates.items():
            if name not in tensors:
                raise ShapeError(f"unknown parameter '{name}'")
            if np.shape(value) != tensors[name].shape:
                raise ShapeError(f"{name}: expected shape {tensors[name].shape}, got {np.shape(value)}")
            tensors[name] = Tensor.param(np.asarray(value, dtype=tensors[name].dtype))
        return ModelParams(self.config, tensors)

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(self.config, {name: t.astype(dtype) for name, t in self._tensors.items()})

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data for name, t in self._tensors.items()}

    @classmethod
    def from_arrays(cls, config: NetConfig, arrays: Mapping[str, np.ndarray]) -> "ModelParams":
        expected = {spec.name: spec.shape for spec in architecture(config)}
        if set(arrays) != set(expected):
            missing, extra = set(expected) - set(arrays), set(arrays) - set(expected)
            raise ShapeError(f"parameter names do not match the architecture (missing {sorted(missing)}, extra {sorted(extra)})")
        for name, shape in expected.items():
            if tuple(np.shape(arrays[name])) != shape:
                raise ShapeError(f"{name}: expected shape {shape}, got {np.shape(arrays[name])}")
        return cls(config, {name: Tensor.param(arrays[name]) for name in expected})


def init_params(config: NetConfig, rng: RngState) -> ModelParams:
    """Uniform fan-in scaled weights, zero biases; deterministic in `rng`."""
    generator = rng.generator()
    tensors = {}
    for spec in architecture(config):
        if spec.name.endswith(".bias"):
            value = np.zeros(spec.shape, dtype=np.float32)
        else:
            bound = spec.gain * math.sqrt(3.0 / spec.fan_in)
            value = generator.uniform(-bound, bound, size=spec.shape).astype(np.float32)
        tensors[spec.name] = Tensor.param(value)
    return ModelParams(config, tensors)
