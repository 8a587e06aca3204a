"""Grayscale image container, file I/O and quality metrics.

Two interchange formats are supported:

* binary PGM ("P5", 8-bit) for visualization; values are clamped to [0, 1]
  on export and quantized to 255 levels,
* the lossless float container ``.limg``: magic ``LPIMG001``, height and
  width as little-endian uint32, then height*width IEEE-754 float32 samples
  in row-major order. Bit-exact; the canonical format for fixtures, since
  decomposition components may leave [0, 1].
"""

from __future__ import annotations

import math
import os
import struct

import numpy as np

LIMG_MAGIC = b"LPIMG001"


def _as_grid(data, name):
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} data must be a non-empty 2-D grid, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite samples")
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


class Image:
    """Immutable H x W grid of finite real samples."""

    __slots__ = ("data",)

    def __init__(self, data):
        object.__setattr__(self, "data", _as_grid(data, "Image"))

    def __setattr__(self, name, value):
        raise AttributeError("Image is immutable")

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Image({self.height}x{self.width})"


class Mask:
    """Immutable binary mask; 1 = observed pixel, 0 = missing."""

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.asarray(data)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"Mask data must be a non-empty 2-D grid, got shape {arr.shape}")
        vals = np.unique(arr)
        if not np.isin(vals, (0, 1)).all():
            raise ValueError("Mask values must be exactly 0 or 1")
        arr = np.ascontiguousarray(arr.astype(np.uint8))
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Mask is immutable")

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape

    @classmethod
    def ones(cls, height, width):
        return cls(np.ones((height, width), dtype=np.uint8))

    def __repr__(self):
        return f"Mask({self.height}x{self.width}, observed={int(self.data.sum())})"


def _check_same_shape(*images):
    shapes = {im.shape for im in images}
    if len(shapes) != 1:
        raise ValueError(f"image dimensions differ: {sorted(shapes)}")


def psnr(a: Image, b: Image, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio 10*log10(peak^2 / MSE) in dB.

    MSE is the mean over all pixels; identical images give +inf.
    """
    if peak <= 0:
        raise ValueError("peak must be positive")
    _check_same_shape(a, b)
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def psnr_joint(u: Image, v: Image, u_gt: Image, v_gt: Image, peak: float = 1.0) -> float:
    """PSNR of the concatenated (u, v) vector against (u_gt, v_gt)."""
    if peak <= 0:
        raise ValueError("peak must be positive")
    _check_same_shape(u, v, u_gt, v_gt)
    mse = 0.5 * (np.mean((u.data - u_gt.data) ** 2) + np.mean((v.data - v_gt.data) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def write_limg(path, image: Image) -> None:
    """Write the lossless float container (float32, bit-exact)."""
    h, w = image.shape
    payload = image.data.astype("<f4").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(LIMG_MAGIC)
        fh.write(struct.pack("<II", h, w))
        fh.write(payload)


def read_limg(path) -> Image:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16 or blob[:8] != LIMG_MAGIC:
        raise ValueError(f"not a LPIMG001 file: {path}")
    h, w = struct.unpack("<II", blob[8:16])
    if h < 1 or w < 1:
        raise ValueError(f"invalid dimensions {h}x{w} in {path}")
    expected = 16 + 4 * h * w
    if len(blob) != expected:
        raise ValueError(f"truncated or oversized LPIMG001 file: {path} ({len(blob)} bytes, expected {expected})")
    data = np.frombuffer(blob, dtype="<f4", offset=16).reshape(h, w)
    return Image(data.astype(np.float64))


def write_pgm(path, image: Image) -> None:
    """Write 8-bit binary PGM; samples are clamped to [0, 1] then quantized."""
    q = np.rint(np.clip(image.data, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(q.tobytes(order="C"))


def read_pgm(path) -> Image:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 2 or blob[:2] != b"P5":
        raise ValueError(f"not a binary PGM (P5) file: {path}")
    # header: magic, width, height, maxval; '#' comments allowed between tokens
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"malformed PGM header: {path}")
        fields.append(blob[start:pos])
    try:
        w, h, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise ValueError(f"malformed PGM header: {path}") from exc
    if maxval != 255:
        raise ValueError(f"unsupported PGM maxval {maxval} (only 8-bit supported): {path}")
    pos += 1  # single whitespace after maxval
    if len(blob) - pos != h * w:
        raise ValueError(f"PGM payload size mismatch: {path}")
    data = np.frombuffer(blob, dtype=np.uint8, offset=pos).reshape(h, w)
    return Image(data.astype(np.float64) / 255.0)


def write_image(path, image: Image) -> None:
    """Write an image; format chosen by extension (.pgm or .limg)."""
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".pgm":
        write_pgm(path, image)
    elif ext == ".limg":
        write_limg(path, image)
    else:
        raise ValueError(f"unsupported image format {ext!r} (use .pgm or .limg)")


def read_image(path) -> Image:
    """Read an image; format sniffed from the magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head[:8] == LIMG_MAGIC:
        return read_limg(path)
    if head[:2] == b"P5":
        return read_pgm(path)
    raise ValueError(f"unrecognized image format: {path}")
