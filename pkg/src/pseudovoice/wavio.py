"""Mono PCM16 WAV files with an optional metadata chunk.

The standard ``wave`` module cannot carry extra chunks, so files are written
here directly; a small JSON chunk (``pvmd``) records frame padding.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import BadInputFormat

META_ID = b"pvmd"


def write_wav(path, samples, rate: int, meta: dict | None = None) -> None:
    x = np.asarray(samples)
    if x.dtype != np.int16:
        x = np.clip(np.rint(x), -32768, 32767).astype(np.int16)
    data = x.astype("<i2").tobytes()
    fmt = struct.pack("<HHIIHH", 1, 1, rate, rate * 2, 2, 16)
    chunks = [b"fmt " + struct.pack("<I", len(fmt)) + fmt]
    if meta:
        body = json.dumps(meta, sort_keys=True).encode()
        if len(body) % 2:
            body += b" "
        chunks.append(META_ID + struct.pack("<I", len(body)) + body)
    pad = b"\x00" if len(data) % 2 else b""
    chunks.append(b"data" + struct.pack("<I", len(data)) + data + pad)
    payload = b"WAVE" + b"".join(chunks)
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(payload)) + payload)


def read_wav(path, with_meta: bool = False):
    """Return ``(samples, rate)`` or ``(samples, rate, meta)``.

    Only uncompressed mono 16-bit files are accepted.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise BadInputFormat(f"{path}: not a RIFF/WAVE file")
    pos, fmt, data, meta = 12, None, None, {}
    while pos + 8 <= len(raw):
        cid = raw[pos : pos + 4]
        (size,) = struct.unpack("<I", raw[pos + 4 : pos + 8])
        body = raw[pos + 8 : pos + 8 + size]
        if cid == b"fmt ":
            fmt = struct.unpack("<HHIIHH", body[:16])
        elif cid == b"data":
            data = body
        elif cid == META_ID:
            try:
                meta = json.loads(body.decode())
            except ValueError as exc:
                raise BadInputFormat(f"{path}: corrupt metadata chunk") from exc
        pos += 8 + size + (size % 2)
    if fmt is None or data is None:
        raise BadInputFormat(f"{path}: missing fmt or data chunk")
    tag, channels, rate, _, _, bits = fmt
    if tag != 1 or channels != 1 or bits != 16:
        raise BadInputFormat(f"{path}: need mono 16-bit PCM, got format {tag}, {channels} ch, {bits} bit")
    samples = np.frombuffer(data[: len(data) // 2 * 2], dtype="<i2").astype(np.int16)
    if with_meta:
        return samples, rate, meta
    return samples, rate
