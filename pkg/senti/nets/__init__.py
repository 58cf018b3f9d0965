from .config import NetConfig
from .networks import (
    decode,
    discriminate,
    encode_content,
    encode_style,
    mlp_adain_params,
    pool_content,
    to_batch,
    to_images,
)
from .params import ModelParams, architecture, init_params

__all__ = [
    "ModelParams",
    "NetConfig",
    "architecture",
    "decode",
    "discriminate",
    "encode_content",
    "encode_style",
    "init_params",
    "mlp_adain_params",
    "pool_content",
    "to_batch",
    "to_images",
]
