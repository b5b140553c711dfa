"""Binary checkpoint format for ParameterSets.

Layout: 8-byte magic "EGMCKPT1", an 8-byte little-endian header length, a
JSON header (format version, dtype, names, shapes, payload byte offsets,
trainability flags, mode, plus caller metadata), then raw little-endian
tensor payloads in header order. Loading validates the total length and
every shape product, so truncated or mislabeled files fail loudly.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ValidationError
from .params import ParameterSet

CHECKPOINT_MAGIC = b"EGMCKPT1"
FORMAT_VERSION = 1

_DTYPE_CODES = {"float32": "<f4", "float64": "<f8"}


def save_checkpoint(path, params: ParameterSet, extra: dict | None = None) -> str:
    """Write the parameter set plus metadata; returns the file's sha256 hex."""
    names = params.names()
    shapes = {}
    offsets = {}
    trainable = {}
    payloads = []
    pos = 0
    code = _DTYPE_CODES[params.dtype.name]
    for name in names:
        t = params[name]
        raw = np.ascontiguousarray(t.data).astype(code).tobytes()
        shapes[name] = list(t.data.shape)
        offsets[name] = pos
        trainable[name] = bool(t.requires_grad)
        payloads.append(raw)
        pos += len(raw)

    header = {
        "format_version": FORMAT_VERSION,
        "dtype": params.dtype.name,
        "names": names,
        "shapes": shapes,
        "offsets": offsets,
        "trainable": trainable,
        "mode": params.mode,
        "payload_bytes": pos,
    }
    if extra:
        for key, value in extra.items():
            if key in header:
                raise ValidationError(f"extra header field {key!r} collides with a reserved field")
            header[key] = value

    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    blob = CHECKPOINT_MAGIC + struct.pack("<Q", len(header_bytes)) + header_bytes + b"".join(payloads)
    Path(path).write_bytes(blob)
    return hashlib.sha256(blob).hexdigest()


def load_checkpoint(path) -> tuple[ParameterSet, dict]:
    """Read a checkpoint; returns (params, header)."""
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:8] != CHECKPOINT_MAGIC:
        raise ValidationError(f"{path} is not a checkpoint (bad magic)")
    (header_len,) = struct.unpack("<Q", raw[8:16])
    header_end = 16 + header_len
    if len(raw) < header_end:
        raise ValidationError(f"{path} is truncated inside the header")
    header = json.loads(raw[16:header_end].decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise ValidationError(f"unsupported checkpoint format version {header.get('format_version')}")
    dtype = header["dtype"]
    if dtype not in _DTYPE_CODES:
        raise ValidationError(f"unsupported checkpoint dtype {dtype!r}")
    code = _DTYPE_CODES[dtype]
    itemsize = np.dtype(code).itemsize

    payload = raw[header_end:]
    if len(payload) != header["payload_bytes"]:
        raise ValidationError(
            f"payload length mismatch: header says {header['payload_bytes']}, file has {len(payload)}"
        )

    params = ParameterSet(dtype=dtype)
    params.mode = header.get("mode", "train")
    for name in header["names"]:
        shape = tuple(header["shapes"][name])
        count = int(np.prod(shape)) if shape else 1
        start = header["offsets"][name]
        end = start + count * itemsize
        if end > len(payload):
            raise ValidationError(f"tensor {name!r} extends past the payload")
        arr = np.frombuffer(payload[start:end], dtype=code).reshape(shape).astype(dtype)
        params.add(name, arr, trainable=header["trainable"][name])
    return params, header


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
