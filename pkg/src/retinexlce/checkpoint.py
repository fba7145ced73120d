"""Binary checkpoint format.

Layout, all integers little-endian ``uint32``::

    b"KLCE" | version | len(stage) | stage utf-8 | n_tensors
    then per tensor, in sorted name order:
    len(name) | name utf-8 | rank | extents[rank] | float32 LE payload
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .errors import IoError, ParseError, UnsupportedVersion

MAGIC = b"KLCE"
VERSION = 1
STAGES = ("decom", "restore", "illum")
_U32 = struct.Struct("<I")


@dataclass
class Checkpoint:
    stage: str
    tensors: dict = field(default_factory=dict)  # name -> float32 ndarray
    version: int = VERSION

    @classmethod
    def from_params(cls, stage: str, params: dict) -> "Checkpoint":
        return cls(stage, {k: np.array(v.data, dtype="<f4") for k, v in params.items()})

    def to_params(self, dtype=np.float32, requires_grad: bool = False) -> dict:
        return {k: Tensor(v, requires_grad=requires_grad, dtype=dtype) for k, v in self.tensors.items()}


def encode_checkpoint(c: Checkpoint) -> bytes:
    out = bytearray(MAGIC)
    stage = c.stage.encode()
    out += _U32.pack(c.version) + _U32.pack(len(stage)) + stage + _U32.pack(len(c.tensors))
    for name in sorted(c.tensors):
        arr = np.asarray(c.tensors[name], dtype="<f4", order="C")
        key = name.encode()
        out += _U32.pack(len(key)) + key + _U32.pack(arr.ndim)
        out += b"".join(_U32.pack(n) for n in arr.shape)
        out += arr.tobytes()
    return bytes(out)


def decode_checkpoint(buf: bytes) -> Checkpoint:
    if buf[:4] != MAGIC:
        raise ParseError(f"bad checkpoint magic {buf[:4]!r}")
    pos = 4

    def u32():
        nonlocal pos
        if pos + 4 > len(buf):
            raise ParseError("truncated checkpoint")
        (v,) = _U32.unpack_from(buf, pos)
        pos += 4
        return v

    def raw(n):
        nonlocal pos
        if pos + n > len(buf):
            raise ParseError("truncated checkpoint")
        b = buf[pos:pos + n]
        pos += n
        return b

    version = u32()
    if version != VERSION:
        raise UnsupportedVersion(f"checkpoint version {version}, reader supports {VERSION}")
    stage = raw(u32()).decode()
    tensors = {}
    for _ in range(u32()):
        name = raw(u32()).decode()
        shape = tuple(u32() for _ in range(u32()))
        count = int(np.prod(shape)) if shape else 1
        tensors[name] = np.frombuffer(raw(4 * count), dtype="<f4").reshape(shape).copy()
    if pos != len(buf):
        raise ParseError(f"{len(buf) - pos} trailing bytes in checkpoint")
    return Checkpoint(stage=stage, tensors=tensors, version=version)


def save_checkpoint(c: Checkpoint, path) -> None:
    try:
        with open(path, "wb") as f:
            f.write(encode_checkpoint(c))
    except OSError as exc:
        raise IoError(str(exc)) from exc


def load_checkpoint(path) -> Checkpoint:
    try:
        with open(path, "rb") as f:
            buf = f.read()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return decode_checkpoint(buf)
