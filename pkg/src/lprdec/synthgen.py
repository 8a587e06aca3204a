"""Synthetic dataset generation.

Structure images are piecewise constant: a random background overpainted by
random blobs whose outlines are closed polygons smoothed with the
Lane-Riesenfeld subdivision scheme (degree 2, 3 refinement rounds) and
filled by even-odd scanline rasterization. Textures are sparse sums of 2-D
sinusoids, so their patch matrices have numerical rank at most two per
sinusoid. Masks remove either an exact count of random pixels or random
rectangles/discs.

All generators are pure functions of (seed, params); randomness comes from
numpy's PCG64 generator, with per-sample streams derived through
``numpy.random.SeedSequence([seed, index, tag])``. Datasets are therefore
reproducible across runs of this implementation; fixtures are exchanged as
files rather than by cross-implementation bit-equality.

Ground-truth components are rounded to float32 before assembling a sample,
so f = mask * (u_gt + v_gt) holds bit-exactly both in memory and for a
float32 reader of the on-disk dataset.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .image import Image, Mask, read_limg, write_limg


@dataclass(frozen=True)
class MaskKind:
    """Degradation choice: 'none', 'random_pixels' or 'random_shapes'."""

    kind: str = "none"
    ratio: float = 0.0
    count: int = 0
    size_range: tuple = (4, 16)

    def __post_init__(self):
        if self.kind not in ("none", "random_pixels", "random_shapes"):
            raise ValueError(f"unknown mask kind {self.kind!r}")
        if self.kind == "random_pixels" and not 0.0 <= self.ratio <= 1.0:
            raise ValueError("ratio must lie in [0, 1]")
        if self.kind == "random_shapes":
            lo, hi = self.size_range
            if not (0 < lo <= hi):
                raise ValueError("size_range must satisfy 0 < min <= max")

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def random_pixels(cls, ratio):
        return cls("random_pixels", ratio=ratio)

    @classmethod
    def random_shapes(cls, count, size_range=(4, 16)):
        return cls("random_shapes", count=count, size_range=tuple(size_range))

    def to_json(self):
        if self.kind == "random_pixels":
            return {"kind": self.kind, "ratio": self.ratio}
        if self.kind == "random_shapes":
            return {"kind": self.kind, "count": self.count,
                    "size_range": list(self.size_range)}
        return {"kind": "none"}

    @classmethod
    def from_json(cls, obj):
        kind = obj["kind"]
        if kind == "random_pixels":
            return cls.random_pixels(obj["ratio"])
        if kind == "random_shapes":
            return cls.random_shapes(obj["count"], tuple(obj["size_range"]))
        return cls.none()


@dataclass(frozen=True)
class GenParams:
    """Dataset hyperparameters; defaults match the 64 x 64 protocol."""

    height: int = 64
    width: int = 64
    n_shapes: int = 5
    n_freqs: int = 3
    texture_amplitude: float = 0.15
    freq_range: tuple = (8.0, 24.0)
    mask_kind: MaskKind = field(default_factory=MaskKind.none)

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError("height and width must be positive")
        if self.n_shapes < 0 or self.n_freqs < 0:
            raise ValueError("counts must be nonnegative")
        lo, hi = self.freq_range
        nyquist = min(self.height, self.width) / 2.0
        if not (0 < lo <= hi <= nyquist):
            raise ValueError(f"freq_range must satisfy 0 < min <= max <= Nyquist ({nyquist})")

    def to_json(self):
        return {
            "height": self.height, "width": self.width,
            "n_shapes": self.n_shapes, "n_freqs": self.n_freqs,
            "texture_amplitude": self.texture_amplitude,
            "freq_range": list(self.freq_range),
            "mask_kind": self.mask_kind.to_json(),
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            height=obj["height"], width=obj["width"],
            n_shapes=obj["n_shapes"], n_freqs=obj["n_freqs"],
            texture_amplitude=obj["texture_amplitude"],
            freq_range=tuple(obj["freq_range"]),
            mask_kind=MaskKind.from_json(obj["mask_kind"]),
        )


@dataclass(frozen=True)
class Sample:
    """One dataset entry; satisfies f = mask * (u_gt + v_gt) exactly."""

    f: Image
    u_gt: Image
    v_gt: Image
    mask: Mask
    seed: int


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(seed: int, *tags: int) -> int:
    """Deterministic child seed from a parent seed and integer tags."""
    ss = np.random.SeedSequence([int(seed), *[int(t) for t in tags]])
    return int(ss.generate_state(1, np.uint64)[0])


def lane_riesenfeld_closed(vertices, degree: int = 2, rounds: int = 3):
    """Smooth a closed polygon by Lane-Riesenfeld subdivision.

    Each round duplicates every vertex then applies ``degree`` passes of
    cyclic midpoint averaging (degree 2 is Chaikin corner cutting).
    """
    pts = np.asarray(vertices, dtype=np.float64)
    for _ in range(rounds):
        pts = np.repeat(pts, 2, axis=0)
        for _ in range(degree):
            pts = 0.5 * (pts + np.roll(pts, -1, axis=0))
    return pts


def _fill_polygon(canvas, pts, value):
    """Paint the even-odd interior of a closed polygon onto the canvas.

    Pixel centers are at integer coordinates (row, col).
    """
    h, w = canvas.shape
    ys = pts[:, 0]
    y_lo = max(0, int(math.ceil(ys.min())))
    y_hi = min(h - 1, int(math.floor(ys.max())))
    y1 = pts[:, 0]
    x1 = pts[:, 1]
    y2 = np.roll(y1, -1)
    x2 = np.roll(x1, -1)
    for i in range(y_lo, y_hi + 1):
        hit = ((y1 <= i) & (i < y2)) | ((y2 <= i) & (i < y1))
        if not hit.any():
            continue
        tt = (i - y1[hit]) / (y2[hit] - y1[hit])
        xs = np.sort(x1[hit] + tt * (x2[hit] - x1[hit]))
        for a, b in zip(xs[0::2], xs[1::2]):
            j0 = max(0, int(math.ceil(a)))
            j1 = min(w - 1, int(math.floor(b)))
            if j0 <= j1:
                canvas[i, j0 : j1 + 1] = value


def gen_structure(seed: int, params: GenParams) -> Image:
    """Piecewise-constant image: background plus smoothed random blobs."""
    rng = _rng(seed)
    h, w = params.height, params.width
    canvas = np.full((h, w), rng.uniform(0.0, 1.0))
    r_scale = 0.35 * min(h, w)
    for _ in range(params.n_shapes):
        center = rng.uniform((0.0, 0.0), (h - 1.0, w - 1.0))
        radius = rng.uniform(0.25, 1.0) * r_scale
        nv = int(rng.integers(6, 13))
        angles = np.sort(rng.uniform(0.0, 2.0 * math.pi, nv))
        radii = radius * rng.uniform(0.35, 1.0, nv)
        verts = np.stack(
            [center[0] + radii * np.sin(angles), center[1] + radii * np.cos(angles)],
            axis=1,
        )
        outline = lane_riesenfeld_closed(verts)
        _fill_polygon(canvas, outline, rng.uniform(0.0, 1.0))
    return Image(canvas)


def gen_texture(seed: int, params: GenParams) -> Image:
    """Sparse-Fourier texture: sum of n_freqs oriented sinusoids.

    v(i, j) = sum_q A_q cos(2 pi (a_q i / H + b_q j / W) + phi_q), with the
    radial frequency drawn from freq_range and a random orientation; the sum
    is rescaled so max |v| equals texture_amplitude.
    """
    rng = _rng(seed)
    h, w = params.height, params.width
    v = np.zeros((h, w))
    if params.n_freqs == 0:
        return Image(v)
    ii = np.arange(h)[:, None]
    jj = np.arange(w)[None, :]
    for _ in range(params.n_freqs):
        freq = rng.uniform(*params.freq_range)
        theta = rng.uniform(0.0, 2.0 * math.pi)
        a_q = freq * math.cos(theta)
        b_q = freq * math.sin(theta)
        phi = rng.uniform(0.0, 2.0 * math.pi)
        amp = rng.uniform(0.5, 1.0)
        v = v + amp * np.cos(2.0 * math.pi * (a_q * ii / h + b_q * jj / w) + phi)
    peak = np.abs(v).max()
    if peak > 0:
        v *= params.texture_amplitude / peak
    return Image(v)


def gen_mask(seed: int, params: GenParams) -> Mask:
    """Degradation mask; the random-pixel variant zeroes an exact count."""
    rng = _rng(seed)
    h, w = params.height, params.width
    kind = params.mask_kind
    m = np.ones((h, w), dtype=np.uint8)
    if kind.kind == "random_pixels":
        n_zero = int(round(kind.ratio * h * w))
        idx = rng.permutation(h * w)[:n_zero]
        m.flat[idx] = 0
    elif kind.kind == "random_shapes":
        lo, hi = kind.size_range
        for _ in range(kind.count):
            ci = rng.uniform(0, h - 1)
            cj = rng.uniform(0, w - 1)
            size = rng.uniform(lo, hi)
            if rng.uniform() < 0.5:
                i0 = max(0, int(round(ci - size / 2)))
                i1 = min(h, int(round(ci + size / 2)) + 1)
                j0 = max(0, int(round(cj - size / 2)))
                j1 = min(w, int(round(cj + size / 2)) + 1)
                m[i0:i1, j0:j1] = 0
            else:
                ii = np.arange(h)[:, None]
                jj = np.arange(w)[None, :]
                m[(ii - ci) ** 2 + (jj - cj) ** 2 <= (size / 2) ** 2] = 0
    return Mask(m)


def gen_sample(seed: int, params: GenParams) -> Sample:
    """One (f, u_gt, v_gt, mask) tuple from three derived sub-streams."""
    u = gen_structure(derive_seed(seed, 0), params)
    v = gen_texture(derive_seed(seed, 1), params)
    mask = gen_mask(derive_seed(seed, 2), params)
    u32 = Image(u.data.astype(np.float32).astype(np.float64))
    v32 = Image(v.data.astype(np.float32).astype(np.float64))
    f = Image(mask.data * (u32.data + v32.data))
    return Sample(f=f, u_gt=u32, v_gt=v32, mask=mask, seed=seed)


def gen_dataset(seed: int, count: int, params: GenParams) -> list[Sample]:
    """``count`` independent samples with per-index derived seeds."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    return [gen_sample(derive_seed(seed, index), params) for index in range(count)]


def save_dataset(path, samples, seed: int, params: GenParams) -> None:
    """Write the dataset directory layout: sample_{i:05d}/*.limg + manifest."""
    os.makedirs(path, exist_ok=True)
    for i, s in enumerate(samples):
        d = os.path.join(path, f"sample_{i:05d}")
        os.makedirs(d, exist_ok=True)
        write_limg(os.path.join(d, "f.limg"), s.f)
        write_limg(os.path.join(d, "u.limg"), s.u_gt)
        write_limg(os.path.join(d, "v.limg"), s.v_gt)
        write_limg(os.path.join(d, "mask.limg"), Image(s.mask.data.astype(np.float64)))
    manifest = {"seed": seed, "count": len(samples), "params": params.to_json(),
                "sample_seeds": [s.seed for s in samples]}
    with open(os.path.join(path, "dataset.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)


def load_dataset(path):
    """Read a dataset directory; returns (samples, manifest dict)."""
    mpath = os.path.join(path, "dataset.json")
    if not os.path.exists(mpath):
        raise FileNotFoundError(f"not a dataset directory (no dataset.json): {path}")
    with open(mpath) as fh:
        manifest = json.load(fh)
    seeds = manifest.get("sample_seeds", [0] * manifest["count"])
    samples = []
    for i in range(manifest["count"]):
        d = os.path.join(path, f"sample_{i:05d}")
        try:
            f = read_limg(os.path.join(d, "f.limg"))
            u = read_limg(os.path.join(d, "u.limg"))
            v = read_limg(os.path.join(d, "v.limg"))
            mask = Mask(read_limg(os.path.join(d, "mask.limg")).data.astype(np.uint8))
        except (OSError, ValueError) as exc:
            raise ValueError(f"unreadable sample {i} in {path}: {exc}") from exc
        samples.append(Sample(f=f, u_gt=u, v_gt=v, mask=mask, seed=int(seeds[i])))
    return samples, manifest
