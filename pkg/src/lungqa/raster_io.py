"""Grayscale raster containers, PGM/PNG I/O, binarization and resizing.

Rasters are thin immutable wrappers around ``(height, width)`` uint8 numpy
arrays. Colour PNGs are reduced to gray with the fixed-point luma
``(77 R + 150 G + 29 B) >> 8`` so results do not depend on the imaging
library's own conversion.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

__all__ = [
    "Raster",
    "BitMask",
    "RasterIOError",
    "load_gray",
    "save_gray",
    "binarize",
    "resize",
    "DEFAULT_THRESHOLD",
]

DEFAULT_THRESHOLD = 128


class RasterIOError(ValueError):
    """Raised when an image file cannot be read or written."""

    def __init__(self, path, cause):
        self.path = str(path)
        self.cause = cause
        super().__init__(f"{self.path}: {cause}")


def _frozen(arr, dtype):
    arr = np.ascontiguousarray(arr, dtype=dtype)
    if arr.flags.writeable:
        arr = arr.copy()
        arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Raster:
    """8-bit grayscale image stored row-major as a ``(height, width)`` array."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2:
            raise ValueError(f"raster must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"raster dimensions must be >= 1, got {arr.shape}")
        if arr.dtype != np.uint8:
            if np.issubdtype(arr.dtype, np.integer) and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("raster values must lie in 0..255")
        object.__setattr__(self, "pixels", _frozen(arr, np.uint8))

    @classmethod
    def from_buffer(cls, width: int, height: int, data) -> "Raster":
        buf = np.asarray(bytearray(data) if isinstance(data, (bytes, bytearray)) else data)
        if buf.size != width * height:
            raise ValueError(
                f"pixel buffer has {buf.size} values, expected {width}x{height}={width * height}"
            )
        return cls(buf.reshape(height, width))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self):
        return self.pixels.shape

    def __eq__(self, other):
        if not isinstance(other, Raster):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.pixels, other.pixels))

    def __repr__(self):
        return f"Raster(width={self.width}, height={self.height})"


@dataclass(frozen=True, eq=False)
class BitMask:
    """Boolean foreground mask stored as a ``(height, width)`` array."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
        object.__setattr__(self, "bits", _frozen(arr != 0, bool))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def shape(self):
        return self.bits.shape

    def count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def __eq__(self, other):
        if not isinstance(other, BitMask):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.bits, other.bits))

    def __repr__(self):
        return f"BitMask(width={self.width}, height={self.height}, foreground={self.count()})"


# --- PGM -------------------------------------------------------------------

def _pgm_tokens(data: bytes, count: int):
    """Split the first ``count`` header tokens off a PGM byte string."""
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    if pos >= n or not data[pos : pos + 1].isspace():
        raise ValueError("missing whitespace after PGM header")
    return tokens, pos + 1


def _decode_pgm(data: bytes) -> np.ndarray:
    tokens, offset = _pgm_tokens(data, 4)
    if tokens[0] != b"P5":
        raise ValueError(f"unsupported PGM magic {tokens[0]!r}, only P5 is read")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ValueError("non-integer PGM header field") from None
    if width < 1 or height < 1:
        raise ValueError(f"invalid PGM dimensions {width}x{height}")
    if maxval != 255:
        raise ValueError(f"unsupported PGM maxval {maxval}, expected 255")
    payload = data[offset : offset + width * height]
    if len(payload) != width * height:
        raise ValueError(
            f"PGM payload has {len(payload)} bytes, expected {width * height}"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width)


def _encode_pgm(raster: Raster) -> bytes:
    header = f"P5\n{raster.width} {raster.height}\n255\n".encode("ascii")
    return header + raster.pixels.tobytes()


# --- PNG -------------------------------------------------------------------

def luma(rgb: np.ndarray) -> np.ndarray:
    """Integer luma of an ``(..., 3)`` uint8 array."""
    rgb = rgb.astype(np.uint32)
    return ((77 * rgb[..., 0] + 150 * rgb[..., 1] + 29 * rgb[..., 2]) >> 8).astype(np.uint8)


def _png_to_gray(img: Image.Image) -> np.ndarray:
    mode = img.mode
    if mode == "L":
        return np.asarray(img, dtype=np.uint8)
    if mode == "1":
        return np.asarray(img.convert("L"), dtype=np.uint8)
    if mode == "LA":
        return np.asarray(img, dtype=np.uint8)[..., 0]
    if mode in ("I", "I;16", "I;16B", "I;16L"):
        # 16-bit gray: keep the high byte
        arr = np.asarray(img).astype(np.int64)
        return (np.clip(arr, 0, 65535) >> 8).astype(np.uint8)
    return luma(np.asarray(img.convert("RGB"), dtype=np.uint8))


def load_gray(path) -> Raster:
    """Load a PNG (any standard variant) or binary PGM (P5) as a gray raster.

    Raises
    ------
    RasterIOError
        If the file is missing, malformed or of an unsupported format.
    """
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise RasterIOError(path, exc.strerror or str(exc)) from exc

    if data[:2] == b"P5":
        try:
            return Raster(_decode_pgm(data))
        except ValueError as exc:
            raise RasterIOError(path, f"malformed PGM: {exc}") from exc
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        try:
            with Image.open(path) as img:
                img.load()
                arr = _png_to_gray(img)
        except (OSError, SyntaxError, ValueError) as exc:
            raise RasterIOError(path, f"malformed PNG: {exc}") from exc
        return Raster(arr)
    if data[:1] == b"P" and data[1:2] in b"1234567":
        raise RasterIOError(path, f"unsupported PNM variant {data[:2].decode()!r}")
    raise RasterIOError(path, "unsupported format (expected PNG or PGM P5)")


def save_gray(raster: Raster, path) -> None:
    """Write ``raster`` as PGM P5 (``.pgm``) or 8-bit gray PNG (anything else)."""
    path = os.fspath(path)
    try:
        if path.lower().endswith(".pgm"):
            with open(path, "wb") as fh:
                fh.write(_encode_pgm(raster))
        else:
            Image.fromarray(np.array(raster.pixels), mode="L").save(path, format="PNG")
    except OSError as exc:
        raise RasterIOError(path, exc.strerror or str(exc)) from exc


def binarize(mask: Raster, threshold: int = DEFAULT_THRESHOLD) -> BitMask:
    """Foreground wherever the pixel value is ``>= threshold``."""
    if not 0 <= threshold <= 255:
        raise ValueError(f"threshold must be in 0..255, got {threshold}")
    return BitMask(mask.pixels >= threshold)


def _bilinear_axis(n_in: int, n_out: int):
    # half-pixel centre alignment, edge clamped
    scale = n_in / n_out
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    return lo, hi, frac


def _nearest_axis(n_in: int, n_out: int):
    idx = np.floor((np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out)).astype(np.intp)
    return np.clip(idx, 0, n_in - 1)


def resize(img: Raster, new_w: int, new_h: int, mode: str = "bilinear") -> Raster:
    """Resample ``img`` to ``new_w`` x ``new_h``.

    ``nearest`` is meant for masks, ``bilinear`` for images. Bilinear output
    is rounded half-up, so a 2x2 ``[[0, 255], [0, 255]]`` shrinks to ``128``.
    """
    if new_w < 1 or new_h < 1:
        raise ValueError(f"target dimensions must be >= 1, got {new_w}x{new_h}")
    src = img.pixels
    if (new_h, new_w) == src.shape:
        return img
    if mode == "nearest":
        rows = _nearest_axis(img.height, new_h)
        cols = _nearest_axis(img.width, new_w)
        return Raster(src[np.ix_(rows, cols)])
    if mode != "bilinear":
        raise ValueError(f"unknown resize mode {mode!r}")

    y0, y1, fy = _bilinear_axis(img.height, new_h)
    x0, x1, fx = _bilinear_axis(img.width, new_w)
    a = src.astype(np.float64)
    top = a[np.ix_(y0, x0)] * (1 - fx) + a[np.ix_(y0, x1)] * fx
    bottom = a[np.ix_(y1, x0)] * (1 - fx) + a[np.ix_(y1, x1)] * fx
    out = top * (1 - fy)[:, None] + bottom * fy[:, None]
    return Raster(np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8))
