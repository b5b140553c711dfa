"""Minimal RIFF WAV reader/writer: mono PCM16 or float32.

16-bit samples are normalized to [-1, 1] by dividing by 32768 on read.
Resampling and multi-channel audio are out of scope; anything else in the
file is an error, not a silent conversion.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import AudioIOError, ValidationError
from .waveform import Waveform

_FORMAT_PCM = 1
_FORMAT_FLOAT = 3


def write_wav(path, w: Waveform, encoding: str = "float32") -> None:
    """Write a mono waveform as PCM16 or IEEE float32 WAV."""
    path = Path(path)
    if encoding == "pcm16":
        data = np.clip(np.round(w.samples * 32768.0), -32768, 32767).astype("<i2").tobytes()
        fmt_tag, bits = _FORMAT_PCM, 16
    elif encoding == "float32":
        data = w.samples.astype("<f4").tobytes()
        fmt_tag, bits = _FORMAT_FLOAT, 32
    else:
        raise ValidationError(f"unsupported encoding {encoding!r}; use 'pcm16' or 'float32'")

    byte_rate = w.sample_rate * bits // 8
    block_align = bits // 8
    fmt = struct.pack("<HHIIHH", fmt_tag, 1, w.sample_rate, byte_rate, block_align, bits)
    chunks = [(b"fmt ", fmt)]
    if fmt_tag == _FORMAT_FLOAT:
        chunks.append((b"fact", struct.pack("<I", w.num_samples)))
    chunks.append((b"data", data))

    body = b"WAVE"
    for tag, payload in chunks:
        body += tag + struct.pack("<I", len(payload)) + payload
        if len(payload) % 2:
            body += b"\x00"
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", len(body)) + body)


def read_wav(path) -> Waveform:
    """Read a mono PCM16 or float32 WAV file."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise AudioIOError(f"cannot read {path}: {exc}") from exc
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise AudioIOError(f"{path} is not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        tag = raw[pos : pos + 4]
        (size,) = struct.unpack("<I", raw[pos + 4 : pos + 8])
        payload = raw[pos + 8 : pos + 8 + size]
        if tag == b"fmt ":
            fmt = payload
        elif tag == b"data":
            data = payload
        pos += 8 + size + (size % 2)

    if fmt is None or data is None:
        raise AudioIOError(f"{path} is missing fmt or data chunk")
    fmt_tag, channels, sample_rate, _, _, bits = struct.unpack("<HHIIHH", fmt[:16])
    if channels != 1:
        raise AudioIOError(f"{path} has {channels} channels; only mono is supported")

    if fmt_tag == _FORMAT_PCM and bits == 16:
        samples = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    elif fmt_tag == _FORMAT_FLOAT and bits == 32:
        samples = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        raise AudioIOError(
            f"{path}: unsupported format (tag {fmt_tag}, {bits}-bit); "
            "only 16-bit PCM and 32-bit float are supported"
        )
    return Waveform(samples, sample_rate)
