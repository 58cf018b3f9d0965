"""Binary checkpoint files.

Layout, little-endian throughout:

    b"SGN1"  u32 version  u32 tensor-count
    per tensor: u16 name-length, UTF-8 name, u8 rank, rank × u32 dims, f32 payload
    u32 CRC-32 of every preceding byte

Tensors are "param/<name>", "adam/<gen|disc>/<m|v>/<name>" and "meta/json",
which holds one JSON document (network config, iteration, RNG state, Adam
step counts), one byte per element.
"""

from __future__ import annotations

import json
import logging
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import BadMagicError, CorruptFileError, SentiError, VersionMismatchError
from ..nets import ModelParams, NetConfig
from ..nets.params import GENERATOR_NETWORKS
from ..tensor import RngState
from ..utilities.atomic import atomic_write
from .adam import AdamState

log = logging.getLogger(__name__)

MAGIC = b"SGN1"
VERSION = 1
_HEADER = struct.Struct("<4sII")
_CRC = struct.Struct("<I")
_META = "meta/json"
_NETS = ("gen", "disc")


@dataclass(frozen=True)
class Checkpoint:
    params: ModelParams
    gen_state: AdamState
    disc_state: AdamState
    iteration: int
    rng: RngState

    @property
    def net_config(self) -> NetConfig:
        return self.params.config


def _encode_tensor(name: str, array: np.ndarray) -> bytes:
    encoded = name.encode("utf-8")
    array = np.ascontiguousarray(array, dtype="<f4")
    parts = [struct.pack("<H", len(encoded)), encoded, struct.pack("<B", array.ndim)]
    parts.append(struct.pack(f"<{array.ndim}I", *array.shape))
    parts.append(array.tobytes())
    return b"".join(parts)


def _tensors(ckpt: Checkpoint) -> list[tuple[str, np.ndarray]]:
    meta = {
        "net": ckpt.params.config.to_dict(),
        "iteration": ckpt.iteration,
        "rng": {"seed": ckpt.rng.seed, "counter": ckpt.rng.counter},
        "adam_steps": {"gen": ckpt.gen_state.step, "disc": ckpt.disc_state.step},
    }
    meta_bytes = np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    tensors = [(_META, meta_bytes.astype(np.float32))]
    tensors += [(f"param/{name}", array) for name, array in ckpt.params.arrays().items()]
    for net, state in zip(_NETS, (ckpt.gen_state, ckpt.disc_state)):
        tensors += [(f"adam/{net}/m/{name}", array) for name, array in state.m.items()]
        tensors += [(f"adam/{net}/v/{name}", array) for name, array in state.v.items()]
    return tensors


def checkpoint_bytes(ckpt: Checkpoint) -> bytes:
    tensors = _tensors(ckpt)
    body = _HEADER.pack(MAGIC, VERSION, len(tensors)) + b"".join(_encode_tensor(n, a) for n, a in tensors)
    return body + _CRC.pack(zlib.crc32(body))


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    data = checkpoint_bytes(ckpt)
    with atomic_write(path) as fp:
        fp.write(data)
    log.info(f"saved checkpoint at iteration {ckpt.iteration} to {path} ({len(data)} bytes)")


class _Reader:
    def __init__(self, data: bytes, path):
        self.data, self.offset, self.path = data, 0, path

    def take(self, fmt: str) -> tuple:
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.data):
            raise CorruptFileError(f"{self.path}: unexpected end of checkpoint data")
        values = struct.unpack_from(fmt, self.data, self.offset)
        self.offset += size
        return values

    def raw(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise CorruptFileError(f"{self.path}: unexpected end of checkpoint data")
        chunk = self.data[self.offset : self.offset + size]
        self.offset += size
        return chunk


def _parse(data: bytes, path) -> dict[str, np.ndarray]:
    if len(data) < _HEADER.size + _CRC.size:
        raise CorruptFileError(f"{path}: too short to be a checkpoint ({len(data)} bytes)")
    magic, version, count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: not a checkpoint (expected magic {MAGIC.decode()}, found {magic!r})")
    (stored_crc,) = _CRC.unpack_from(data, len(data) - _CRC.size)
    body = data[: -_CRC.size]
    if zlib.crc32(body) != stored_crc:
        raise CorruptFileError(f"{path}: checksum mismatch")
    if version != VERSION:
        raise VersionMismatchError(f"{path}: checkpoint version {version}, this build reads version {VERSION}")

    reader = _Reader(body, path)
    reader.offset = _HEADER.size
    tensors = {}
    for _ in range(count):
        (name_length,) = reader.take("<H")
        try:
            name = reader.raw(name_length).decode("utf-8")
        except UnicodeDecodeError:
            raise CorruptFileError(f"{path}: tensor name is not UTF-8") from None
        (rank,) = reader.take("<B")
        shape = reader.take(f"<{rank}I")
        payload = reader.raw(4 * int(np.prod(shape, dtype=np.int64)))
        if name in tensors:
            raise CorruptFileError(f"{path}: duplicate tensor '{name}'")
        tensors[name] = np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(shape)
    if reader.offset != len(body):
        raise CorruptFileError(f"{path}: {len(body) - reader.offset} trailing bytes")
    return tensors


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Read and fully validate a checkpoint; nothing is returned on any mismatch."""
    path = Path(path)
    with open(path, "rb") as fp:
        data = fp.read()
    tensors = _parse(data, path)

    if _META not in tensors:
        raise CorruptFileError(f"{path}: missing {_META}")
    try:
        meta = json.loads(tensors.pop(_META).astype(np.uint8).tobytes().decode("utf-8"))
        net = NetConfig.from_dict(meta["net"])
        steps = meta["adam_steps"]
        groups = {"param": {}, **{f"{net_name}/{k}": {} for net_name in _NETS for k in "mv"}}
        for name, array in tensors.items():
            kind, _, rest = name.partition("/")
            if kind == "param":
                groups["param"][rest] = array
            elif kind == "adam":
                net_name, _, rest = rest.partition("/")
                moment, _, param_name = rest.partition("/")
                groups[f"{net_name}/{moment}"][param_name] = array
            else:
                raise CorruptFileError(f"{path}: unexpected tensor '{name}'")
        params = ModelParams.from_arrays(net, groups["param"])
        for net_name, networks in (("gen", GENERATOR_NETWORKS), ("disc", ("disc",))):
            expected = {name: t.shape for name, t in params.group(*networks).items()}
            for moment in "mv":
                found = {name: a.shape for name, a in groups[f"{net_name}/{moment}"].items()}
                if found != expected:
                    raise CorruptFileError(f"{path}: optimizer moments adam/{net_name}/{moment} do not match the parameters")
        gen_state = AdamState(groups["gen/m"], groups["gen/v"], int(steps["gen"]))
        disc_state = AdamState(groups["disc/m"], groups["disc/v"], int(steps["disc"]))
        rng = RngState(int(meta["rng"]["seed"]), int(meta["rng"]["counter"]))
        iteration = int(meta["iteration"])
    except CorruptFileError:
        raise
    except (KeyError, TypeError, ValueError, SentiError) as error:
        raise CorruptFileError(f"{path}: inconsistent checkpoint contents ({error})") from None

    log.info(f"loaded checkpoint at iteration {iteration} from {path}")
    return Checkpoint(params, gen_state, disc_state, iteration, rng)
