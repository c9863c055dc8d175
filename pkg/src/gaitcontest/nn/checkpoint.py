"""Binary checkpoint format for trained networks.

Layout, all little-endian:

    magic  "M2MC" (4 bytes)
    u16    format version (currently 1)
    u16    layer count
    per layer:
        u8   kind code (conv1d=1, relu=2, maxpool1d=3, flatten=4, dense=5, dropout=6)
        u32* kind-specific geometry fields (see _FIELDS)
    per parameterized layer, in network order:
        f32 arrays, row-major (conv: weight then bias; dense: weight then bias)
    u32    CRC32 over everything between the magic and this checksum

Parameters are stored as f32 although the engine computes in f64, so one
save/load round trip quantizes; a second round trip is bit-identical.
The dropout rate rides in the geometry fields as round(rate * 1e6).
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path
from typing import IO

import numpy as np

from .layers import (
    KIND_CONV1D,
    KIND_DENSE,
    KIND_DROPOUT,
    KIND_FLATTEN,
    KIND_MAXPOOL1D,
    KIND_RELU,
    LayerSpec,
)
from .network import Network

MAGIC = b"M2MC"
FORMAT_VERSION = 1

_KIND_CODES = {
    KIND_CONV1D: 1,
    KIND_RELU: 2,
    KIND_MAXPOOL1D: 3,
    KIND_FLATTEN: 4,
    KIND_DENSE: 5,
    KIND_DROPOUT: 6,
}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}

# geometry fields serialized per kind, in order
_FIELDS = {
    KIND_CONV1D: ("in_channels", "out_channels", "kernel_size", "stride", "padding"),
    KIND_RELU: (),
    KIND_MAXPOOL1D: ("pool_size",),
    KIND_FLATTEN: (),
    KIND_DENSE: ("in_features", "out_features"),
    KIND_DROPOUT: ("rate_micro",),
}

_RATE_SCALE = 1_000_000


class CheckpointError(Exception):
    pass


class BadMagic(CheckpointError):
    pass


class VersionMismatch(CheckpointError):
    pass


class TruncatedFile(CheckpointError):
    pass


class ChecksumMismatch(CheckpointError):
    pass


def _spec_fields(spec: LayerSpec) -> tuple[int, ...]:
    if spec.kind == KIND_DROPOUT:
        return (int(round(spec.rate * _RATE_SCALE)),)
    return tuple(getattr(spec, name) for name in _FIELDS[spec.kind])


def _spec_from_fields(kind: str, values: tuple[int, ...]) -> LayerSpec:
    if kind == KIND_DROPOUT:
        return LayerSpec(kind, rate=values[0] / _RATE_SCALE)
    return LayerSpec(kind, **dict(zip(_FIELDS[kind], values)))


def _param_order(spec: LayerSpec) -> tuple[str, ...]:
    if spec.kind in (KIND_CONV1D, KIND_DENSE):
        return ("weight", "bias")
    return ()


def save_checkpoint(net: Network, dest: str | Path | IO[bytes] | None = None) -> bytes:
    """Serialize the network; returns the bytes and writes `dest` if given."""
    body = bytearray()
    body += struct.pack("<HH", FORMAT_VERSION, len(net.layers))
    for spec in net.specs:
        body += struct.pack("<B", _KIND_CODES[spec.kind])
        for value in _spec_fields(spec):
            body += struct.pack("<I", value)
    for layer in net.layers:
        for name in _param_order(layer.spec):
            body += np.ascontiguousarray(layer.params[name], dtype="<f4").tobytes()
    blob = MAGIC + bytes(body) + struct.pack("<I", zlib.crc32(bytes(body)))
    if dest is not None:
        if isinstance(dest, (str, Path)):
            Path(dest).write_bytes(blob)
        else:
            dest.write(blob)
    return blob


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFile(f"needed {n} bytes at offset {self.pos}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def load_checkpoint(src: str | Path | IO[bytes] | bytes) -> Network:
    """Rebuild a network from checkpoint bytes, verifying magic and CRC.

    The loaded network validates layer composition lazily on first forward,
    since the format does not record the input length.
    """
    if isinstance(src, (str, Path)):
        data = Path(src).read_bytes()
    elif isinstance(src, (bytes, bytearray)):
        data = bytes(src)
    else:
        data = src.read()

    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagic("not a checkpoint: bad magic")
    if len(data) < 8 + 4:
        raise TruncatedFile("shorter than the fixed header")
    payload, crc_bytes = data[4:-4], data[-4:]
    (stored_crc,) = struct.unpack("<I", crc_bytes)
    if zlib.crc32(payload) != stored_crc:
        raise ChecksumMismatch("checksum does not match payload")

    reader = _Reader(payload)
    version = reader.u16()
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"format version {version}, expected {FORMAT_VERSION}")
    n_layers = reader.u16()
    specs = []
    for _ in range(n_layers):
        code = reader.u8()
        if code not in _CODE_KINDS:
            raise CheckpointError(f"unknown layer kind code {code}")
        kind = _CODE_KINDS[code]
        values = tuple(reader.u32() for _ in _FIELDS[kind])
        specs.append(_spec_from_fields(kind, values))

    net = Network(specs, input_shape=None, init=False)
    for layer in net.layers:
        spec = layer.spec
        if spec.kind == KIND_CONV1D:
            shapes = {"weight": (spec.out_channels, spec.in_channels, spec.kernel_size),
                      "bias": (spec.out_channels,)}
        elif spec.kind == KIND_DENSE:
            shapes = {"weight": (spec.out_features, spec.in_features),
                      "bias": (spec.out_features,)}
        else:
            continue
        for name in _param_order(spec):
            shape = shapes[name]
            count = int(np.prod(shape))
            raw = reader.take(4 * count)
            layer.params[name] = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)
    if reader.pos != len(payload):
        raise CheckpointError(f"{len(payload) - reader.pos} trailing bytes after parameters")
    return net
