"""Binary checkpoints.

Layout (little endian)::

    b"PARD" | u32 version | u32 header length | header JSON (utf-8)
    u32 record count
    per record: u16 name length | name | u8 ndim | u64 dims... | u64 payload bytes
                | float64 payload | u32 crc32 of payload

Every tensor is stored as float64, so float32 parameters round-trip exactly.
"""

from __future__ import annotations

import io
import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

MAGIC = b"PARD"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    header: dict
    tensors: dict[str, np.ndarray]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Checkpoint):
            return NotImplemented
        return (
            self.header == other.header
            and list(self.tensors) == list(other.tensors)
            and all(
                a.shape == b.shape and a.tobytes() == b.tobytes()
                for a, b in zip(self.tensors.values(), other.tensors.values())
            )
        )


def encode(ckpt: Checkpoint) -> bytes:
    buf = io.BytesIO()
    header = json.dumps(ckpt.header, sort_keys=True).encode("utf-8")
    buf.write(MAGIC + struct.pack("<II", VERSION, len(header)) + header)
    buf.write(struct.pack("<I", len(ckpt.tensors)))
    for name, arr in ckpt.tensors.items():
        arr = np.asarray(arr, dtype="<f8")  # tobytes() writes C order; keeps 0-d shapes intact
        raw = name.encode("utf-8")
        payload = arr.tobytes()
        buf.write(struct.pack("<H", len(raw)) + raw + struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        buf.write(struct.pack("<Q", len(payload)) + payload + struct.pack("<I", zlib.crc32(payload)))
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(f"truncated checkpoint while reading {what} (need {n} bytes at offset {self.pos})")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode(data: bytes) -> Checkpoint:
    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise CheckpointError("not a checkpoint: bad magic")
    version, hlen = r.unpack("<II", "header size")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    try:
        header = json.loads(r.take(hlen, "header").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from exc
    (count,) = r.unpack("<I", "record count")
    tensors = {}
    for k in range(count):
        (nlen,) = r.unpack("<H", f"record {k} name length")
        name = r.take(nlen, f"record {k} name").decode("utf-8", errors="replace")
        (ndim,) = r.unpack("<B", f"{name} rank")
        shape = r.unpack(f"<{ndim}Q", f"{name} shape")
        (plen,) = r.unpack("<Q", f"{name} payload length")
        expected = 8 * int(np.prod(shape, dtype=np.int64))
        if plen != expected:
            raise CheckpointError(f"{name}: payload has {plen} bytes but shape {tuple(shape)} needs {expected}")
        payload = r.take(plen, f"{name} payload")
        (crc,) = r.unpack("<I", f"{name} checksum")
        if zlib.crc32(payload) != crc:
            raise CheckpointError(f"{name}: payload checksum mismatch (corrupt file)")
        tensors[name] = np.frombuffer(payload, dtype="<f8").reshape(shape).copy()
    if r.pos != len(data):
        raise CheckpointError(f"{len(data) - r.pos} trailing bytes after last record")
    return Checkpoint(header, tensors)


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    tmp = Path(str(path) + ".tmp")
    tmp.write_bytes(encode(ckpt))
    tmp.replace(path)


def load_checkpoint(path: str | Path) -> Checkpoint:
    return decode(Path(path).read_bytes())


def module_tensors(prefix: str, module: torch.nn.Module) -> dict[str, np.ndarray]:
    return {f"{prefix}.{n}": p.detach().to(torch.float64).cpu().numpy() for n, p in module.state_dict().items()}


def load_module(prefix: str, module: torch.nn.Module, tensors: dict[str, np.ndarray]) -> None:
    state = module.state_dict()
    for name, ref in state.items():
        key = f"{prefix}.{name}"
        if key not in tensors:
            raise CheckpointError(f"checkpoint lacks tensor {key}")
        arr = tensors[key]
        if tuple(arr.shape) != tuple(ref.shape):
            raise CheckpointError(f"{key}: checkpoint shape {tuple(arr.shape)} != model shape {tuple(ref.shape)}")
        state[name] = torch.from_numpy(arr).to(ref.dtype)
    module.load_state_dict(state)
