"""Linear operators and adjoints: discrete gradient, 2x2 convolutions and
the overlapping-patch operator mapping an image to a p^2 x N_patches matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .image import Image


class GradientField:
    """Immutable 2-channel field (dx, dy) over an H x W grid.

    When produced by :func:`grad`, the last column of dx and the last row of
    dy are zero (replicate boundary).
    """

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[0] != 2:
            raise ValueError(f"GradientField expects (2, H, W) data, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("GradientField contains non-finite samples")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("GradientField is immutable")

    @property
    def dx(self):
        return self.data[0]

    @property
    def dy(self):
        return self.data[1]

    @property
    def height(self):
        return self.data.shape[1]

    @property
    def width(self):
        return self.data.shape[2]

    @classmethod
    def zeros(cls, height, width):
        return cls(np.zeros((2, height, width)))


@dataclass(frozen=True)
class PatchConfig:
    """Patch side length p and overlap o between adjacent patches."""

    p: int = 4
    o: int = 2

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("patch size p must be >= 1")
        if not 0 <= self.o < self.p:
            raise ValueError(f"overlap must satisfy 0 <= o < p, got o={self.o}, p={self.p}")

    @property
    def stride(self) -> int:
        return self.p - self.o

    def check_admissible(self, height: int, width: int) -> None:
        """Raise unless the patch grid tiles an H x W image exactly."""
        p, st = self.p, self.stride
        if height < p or width < p:
            raise ValueError(f"image {height}x{width} smaller than patch size p={p}")
        if (height - p) % st != 0:
            raise ValueError(
                f"inadmissible patch grid: (H - p) % (p - o) = ({height} - {p}) % {st} != 0"
            )
        if (width - p) % st != 0:
            raise ValueError(
                f"inadmissible patch grid: (W - p) % (p - o) = ({width} - {p}) % {st} != 0"
            )

    def grid_shape(self, height: int, width: int) -> tuple[int, int]:
        self.check_admissible(height, width)
        return (height - self.p) // self.stride + 1, (width - self.p) // self.stride + 1

    def n_patches(self, height: int, width: int) -> int:
        gh, gw = self.grid_shape(height, width)
        return gh * gw


class PatchMatrix:
    """p^2 x N_patches matrix of vectorized patches plus its provenance."""

    __slots__ = ("data", "config", "src_shape")

    def __init__(self, data, config: PatchConfig, src_shape):
        arr = np.ascontiguousarray(np.asarray(data, dtype=np.float64))
        h, w = src_shape
        expected = (config.p * config.p, config.n_patches(h, w))
        if arr.shape != expected:
            raise ValueError(f"PatchMatrix shape {arr.shape} does not match {expected}")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "config", config)
        object.__setattr__(self, "src_shape", (h, w))

    def __setattr__(self, name, value):
        raise AttributeError("PatchMatrix is immutable")

    @property
    def n_patches(self):
        return self.data.shape[1]


class ConvKernel2x2:
    """2x2 cross-correlation taps, out x in x 2 x 2, channels in {1, 2}."""

    __slots__ = ("taps",)

    def __init__(self, taps):
        arr = np.ascontiguousarray(np.asarray(taps, dtype=np.float64))
        if arr.ndim != 4 or arr.shape[2:] != (2, 2):
            raise ValueError(f"taps must be (out, in, 2, 2), got {arr.shape}")
        if arr.shape[0] not in (1, 2) or arr.shape[1] not in (1, 2):
            raise ValueError(f"channel counts must be 1 or 2, got {arr.shape[:2]}")
        if not np.isfinite(arr).all():
            raise ValueError("kernel taps contain non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "taps", arr)

    def __setattr__(self, name, value):
        raise AttributeError("ConvKernel2x2 is immutable")

    @property
    def out_channels(self):
        return self.taps.shape[0]

    @property
    def in_channels(self):
        return self.taps.shape[1]


# Forward-difference taps: conv2x2 with these equals grad exactly.
GRAD_TAPS = np.zeros((2, 1, 2, 2))
GRAD_TAPS[0, 0, 0, 0] = -1.0
GRAD_TAPS[0, 0, 0, 1] = 1.0
GRAD_TAPS[1, 0, 0, 0] = -1.0
GRAD_TAPS[1, 0, 1, 0] = 1.0
GRAD_TAPS.flags.writeable = False


def grad_kernel() -> ConvKernel2x2:
    """The discrete-gradient initialization of a (2 out, 1 in) kernel."""
    return ConvKernel2x2(GRAD_TAPS)


def grad(u: Image) -> GradientField:
    """Forward differences with replicate (Neumann) boundary."""
    return GradientField(_kernels.grad(u.data))


def grad_adjoint(g: GradientField) -> Image:
    """Exact adjoint of :func:`grad` under the Euclidean inner products."""
    return Image(_kernels.conv2x2_adjoint(GRAD_TAPS, g.data)[0])


def _field_of(x):
    if isinstance(x, Image):
        return x.data[np.newaxis], 1
    if isinstance(x, GradientField):
        return x.data, 2
    raise TypeError(f"expected Image or GradientField, got {type(x).__name__}")


def _wrap_channels(arr):
    return Image(arr[0]) if arr.shape[0] == 1 else GradientField(arr)


def conv2x2(kernel: ConvKernel2x2, x):
    """Apply a 2x2 kernel: top-left anchor, replicate pad bottom/right.

    output(o, i, j) = sum over c, di, dj of taps[o, c, di, dj] *
    input(c, min(i+di, H-1), min(j+dj, W-1)). Returns an Image for a
    1-output-channel kernel, a GradientField for 2.
    """
    data, ch = _field_of(x)
    if ch != kernel.in_channels:
        raise ValueError(f"kernel expects {kernel.in_channels} input channels, got {ch}")
    return _wrap_channels(_kernels.conv2x2(kernel.taps, data))


def conv2x2_adjoint(kernel: ConvKernel2x2, x):
    """Apply the exact adjoint of ``conv2x2(kernel, .)``.

    Input has the kernel's *output* channel count; the result has its input
    channel count. With the forward-difference taps this is exactly
    :func:`grad_adjoint`.
    """
    data, ch = _field_of(x)
    if ch != kernel.out_channels:
        raise ValueError(f"adjoint expects {kernel.out_channels} input channels, got {ch}")
    return _wrap_channels(_kernels.conv2x2_adjoint(kernel.taps, data))


def patch_extract(u: Image, cfg: PatchConfig) -> PatchMatrix:
    """Extract all p x p patches as columns.

    Column k (patch grid traversed row-major) holds the patch anchored at
    (gi*stride, gj*stride), vectorized column-major.
    """
    cfg.check_admissible(u.height, u.width)
    pm = _kernels.patch_extract(u.data, cfg.p, cfg.stride)
    return PatchMatrix(pm, cfg, u.shape)


def _check_patch_dims(pm_data, cfg, height, width):
    expected = (cfg.p * cfg.p, cfg.n_patches(height, width))
    if pm_data.shape != expected:
        raise ValueError(f"patch matrix shape {pm_data.shape} inconsistent with {expected}")


def patch_adjoint(pm: PatchMatrix, cfg: PatchConfig, height: int, width: int) -> Image:
    """Exact adjoint of :func:`patch_extract`; overlaps accumulate."""
    _check_patch_dims(pm.data, cfg, height, width)
    return Image(_kernels.patch_adjoint(pm.data, cfg.p, cfg.stride, height, width))


def overlap_counts(cfg: PatchConfig, height: int, width: int):
    """Per-pixel number of covering patches (the diagonal of P^T P)."""
    ones = np.ones((cfg.p * cfg.p, cfg.n_patches(height, width)))
    return _kernels.patch_adjoint(ones, cfg.p, cfg.stride, height, width)


def patch_reconstruct(pm: PatchMatrix, cfg: PatchConfig, height: int, width: int) -> Image:
    """Left inverse of patch_extract: adjoint divided by overlap counts."""
    _check_patch_dims(pm.data, cfg, height, width)
    acc = _kernels.patch_adjoint(pm.data, cfg.p, cfg.stride, height, width)
    return Image(acc / overlap_counts(cfg, height, width))
