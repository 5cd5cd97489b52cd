"""Versioned little-endian binary checkpoints.

Layout: magic ``b"TRLNET\\x00\\x01"``, uint32 format version, uint8 variant tag
(0 single, 1 multi), uint32 H, uint32 C, uint32 kernel, uint8 shared-trunk
flag, uint32 tensor count, then per tensor in canonical order: uint32 ndim,
ndim x uint32 extents, float64 values.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from trafficrl.errors import FormatError
from trafficrl.nn.network import PolicyValueNet

MAGIC = b"TRLNET\x00\x01"
FORMAT_VERSION = 1
_VARIANT_TAGS = {"single": 0, "multi": 1}


def dumps(net: PolicyValueNet) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<IBIIIBI", FORMAT_VERSION, _VARIANT_TAGS[net.variant], net.hidden,
                          net.channels, net.kernel, int(net.shared_trunk), len(net.shapes)))
    for name in net.param_names:
        arr = net.params[name]
        buf.write(struct.pack("<I", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return buf.getvalue()


def loads(data: bytes) -> PolicyValueNet:
    view = memoryview(data)
    if bytes(view[: len(MAGIC)]) != MAGIC:
        raise FormatError("not a trafficrl checkpoint (bad magic)")
    pos = len(MAGIC)
    header = struct.Struct("<IBIIIBI")
    try:
        version, tag, hidden, channels, kernel, shared, count = header.unpack_from(view, pos)
    except struct.error:
        raise FormatError("truncated checkpoint header") from None
    pos += header.size
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported checkpoint format version {version}")
    variants = {v: k for k, v in _VARIANT_TAGS.items()}
    if tag not in variants:
        raise FormatError(f"unknown variant tag {tag}")
    net = PolicyValueNet(variants[tag], hidden, channels, kernel, bool(shared), zero=True)
    if count != len(net.shapes):
        raise FormatError(f"checkpoint has {count} tensors, network expects {len(net.shapes)}")
    params = {}
    try:
        for name, shape in net.shapes.items():
            (ndim,) = struct.unpack_from("<I", view, pos)
            pos += 4
            dims = struct.unpack_from(f"<{ndim}I", view, pos)
            pos += 4 * ndim
            if tuple(dims) != tuple(shape):
                raise FormatError(f"tensor {name}: stored shape {dims}, expected {shape}")
            n = int(np.prod(dims))
            if pos + 8 * n > len(view):
                raise FormatError(f"tensor {name} truncated")
            params[name] = np.frombuffer(view[pos : pos + 8 * n], dtype="<f8").reshape(dims).astype(float)
            pos += 8 * n
    except struct.error:
        raise FormatError("truncated checkpoint") from None
    if pos != len(view):
        raise FormatError(f"{len(view) - pos} trailing bytes after last tensor")
    net.set_params(params)
    return net


def save(net: PolicyValueNet, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps(net))
    return path


def load(path: str | Path) -> PolicyValueNet:
    return loads(Path(path).read_bytes())
