"""Binary model checkpoints.

Layout (all integers little-endian):

    magic    8 bytes   b"DLGCKPT\\0"
    version  u32       currently 1
    kind     u16 len + utf-8 bytes
    D, H, A  u32 each
    count    u32       number of named tensors, sorted by name
    per tensor:
        name   u16 len + utf-8 bytes
        rank   u8
        dims   u32 each
        data   rank-major float64, little-endian

Round-trips are bitwise exact: load(save(p)) reproduces every byte of
every tensor.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .model import KINDS, ModelParams

MAGIC = b"DLGCKPT\x00"
VERSION = 1


class CheckpointError(Exception):
    pass


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def save_checkpoint(params: ModelParams, path: str | Path) -> None:
    chunks = [
        MAGIC,
        struct.pack("<I", VERSION),
        _pack_str(params.kind),
        struct.pack("<III", params.input_dim, params.hidden, params.n_actions),
        struct.pack("<I", len(params.tensors)),
    ]
    for name in params.tensor_names():
        arr = np.ascontiguousarray(params.tensors[name], dtype="<f8")
        chunks.append(_pack_str(name))
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    Path(path).write_bytes(b"".join(chunks))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError("truncated checkpoint")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def take_str(self) -> str:
        (n,) = self.unpack("<H")
        return self.take(n).decode("utf-8")


def load_checkpoint(path: str | Path) -> ModelParams:
    r = _Reader(Path(path).read_bytes())
    if r.take(len(MAGIC)) != MAGIC:
        raise CheckpointError("bad magic: not a model checkpoint")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    kind = r.take_str()
    if kind not in KINDS:
        raise CheckpointError(f"unknown model kind {kind!r}")
    d, h, a = r.unpack("<III")
    (count,) = r.unpack("<I")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        name = r.take_str()
        (rank,) = r.unpack("<B")
        shape = r.unpack(f"<{rank}I") if rank else ()
        n_values = int(np.prod(shape)) if shape else 1
        raw = r.take(8 * n_values)
        arr = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
        if not np.all(np.isfinite(arr)):
            raise CheckpointError(f"non-finite values in tensor {name!r}")
        tensors[name] = arr
    if r.pos != len(r.data):
        raise CheckpointError("trailing bytes after last tensor")
    return ModelParams(kind=kind, input_dim=d, hidden=h, n_actions=a, tensors=tensors)
