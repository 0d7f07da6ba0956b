"""Binary PPM (P6) and PGM (P5) reading and writing, maxval 255 only."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .core import FormatError

_CHANNELS = {b"P6": 3, b"P5": 1}


def _header(data: bytes, path) -> tuple[bytes, int, int, int]:
    magic = data[:2]
    if magic in (b"P3", b"P2", b"P1", b"P4"):
        raise FormatError(f"{path}: unsupported PNM variant {magic.decode()} at byte 0 (only P5/P6)")
    if magic not in _CHANNELS:
        raise FormatError(f"{path}: bad magic number at byte 0")
    pos = 2
    fields = []
    while len(fields) < 3:
        if pos >= len(data):
            raise FormatError(f"{path}: truncated header at byte {pos}")
        c = data[pos:pos + 1]
        if c == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
        elif c.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(data) and data[pos:pos + 1].isdigit():
                pos += 1
            if start == pos:
                raise FormatError(f"{path}: unexpected byte {c!r} in header at byte {start}")
            fields.append((int(data[start:pos]), start))
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise FormatError(f"{path}: missing whitespace after maxval at byte {pos}")
    (width, _), (height, _), (maxval, moff) = fields
    if maxval != 255:
        raise FormatError(f"{path}: maxval {maxval} at byte {moff} is not 255")
    if width < 1 or height < 1:
        raise FormatError(f"{path}: empty image declared in header")
    return magic, width, height, pos + 1


def _read(path, magic_wanted: bytes) -> np.ndarray:
    data = Path(path).read_bytes()
    magic, width, height, offset = _header(data, path)
    if magic != magic_wanted:
        raise FormatError(f"{path}: expected {magic_wanted.decode()} but found {magic.decode()} at byte 0")
    ch = _CHANNELS[magic]
    need = width * height * ch
    if len(data) - offset < need:
        raise FormatError(
            f"{path}: truncated payload at byte {len(data)}, expected {need} bytes from byte {offset}"
        )
    pix = np.frombuffer(data, dtype=np.uint8, count=need, offset=offset)
    return pix.reshape((height, width, ch) if ch == 3 else (height, width)).copy()


def read_ppm(path) -> np.ndarray:
    """Return an ``(height, width, 3)`` uint8 array."""
    return _read(path, b"P6")


def read_pgm(path) -> np.ndarray:
    """Return an ``(height, width)`` uint8 array."""
    return _read(path, b"P5")


def _write(img: np.ndarray, path, magic: bytes) -> None:
    img = np.asarray(img)
    if img.dtype != np.uint8:
        if img.min() < 0 or img.max() > 255:
            raise ValueError("pixel values must lie in [0, 255]")
        img = img.astype(np.uint8)
    h, w = img.shape[:2]
    Path(path).write_bytes(magic + f"\n{w} {h}\n255\n".encode() + np.ascontiguousarray(img).tobytes())


def write_ppm(img, path) -> None:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("PPM images must have shape (height, width, 3)")
    _write(img, path, b"P6")


def write_pgm(img, path) -> None:
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError("PGM images must have shape (height, width)")
    _write(img, path, b"P5")
