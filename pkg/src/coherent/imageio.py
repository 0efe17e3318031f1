"""16-bit PGM (P5) and single-channel PFM (Pf) raster I/O."""

from __future__ import annotations

import os
import re

import numpy as np

from .errors import ImageFormatError

_HEADER_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _read_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    pos = 0
    tokens = []
    for _ in range(count):
        m = _HEADER_TOKEN.match(data, pos)
        if m is None:
            raise ImageFormatError("truncated header")
        tokens.append(m.group(1))
        pos = m.end()
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def write_pgm16(path: str | os.PathLike, data: np.ndarray) -> None:
    arr = np.asarray(data)
    if arr.ndim != 2:
        raise ImageFormatError("PGM raster must be 2-D")
    if arr.size and (arr.min() < 0 or arr.max() > 65535):
        raise ImageFormatError("PGM values must fit in 16 bits")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(arr.astype(">u2").tobytes())


def read_pgm16(path: str | os.PathLike) -> np.ndarray:
    """Read a binary PGM; samples are big-endian when maxval > 255."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, offset = _read_tokens(data, 4)
    if tokens[0] != b"P5":
        raise ImageFormatError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ImageFormatError(f"{path}: malformed PGM header") from None
    if maxval != 65535:
        raise ImageFormatError(f"{path}: expected maxval 65535, got {maxval}")
    need = w * h * 2
    raster = data[offset:offset + need]
    if len(raster) != need:
        raise ImageFormatError(f"{path}: raster truncated ({len(raster)} of {need} bytes)")
    return np.frombuffer(raster, dtype=">u2").reshape(h, w).astype(np.int64)


def write_pfm(path: str | os.PathLike, data: np.ndarray) -> None:
    """Little-endian grayscale PFM; rows are stored bottom-to-top."""
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim != 2:
        raise ImageFormatError("PFM raster must be 2-D")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(np.ascontiguousarray(arr[::-1]).astype("<f4").tobytes())


def read_pfm(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, offset = _read_tokens(data, 4)
    if tokens[0] != b"Pf":
        raise ImageFormatError(f"{path}: not a grayscale PFM (magic {tokens[0]!r})")
    w, h = int(tokens[1]), int(tokens[2])
    scale = float(tokens[3])
    dtype = "<f4" if scale < 0 else ">f4"
    need = w * h * 4
    raster = data[offset:offset + need]
    if len(raster) != need:
        raise ImageFormatError(f"{path}: raster truncated")
    return np.frombuffer(raster, dtype=dtype).reshape(h, w)[::-1].astype(np.float32)
