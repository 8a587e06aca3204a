"""Unrolled network forward pass with loadable learned weights.

A network is K blocks, each mirroring one solver iteration with learned
2x2 kernels in place of the discrete gradient. Four configurations:

* 1: convex shrinkage (a = 0), one learned mu per block,
* 2: non-convex shrinkage via a per-block b > 1, learned mu per block,
* 3: convex shrinkage, mu predicted by a small CNN from the block input,
* 4: non-convex shrinkage with the mu-predicting CNN.

The adjoint-like kernel of the x sub-block is applied in exact-adjoint
(transposed convolution) form; at the discrete-gradient initialization the
whole network reproduces the classical solver to floating-point accuracy.

Weight file format (bit-exact): 8-byte magic ``LPRNETW1``, uint32-LE
manifest length, a UTF-8 JSON manifest carrying K, n, config_id, patch
parameters and the tensor table (name, shape, offset), then one contiguous
blob of little-endian float32 values, row-major, offsets relative to the
blob start.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .admm import AdmmState, GradOps, s_step_raw, t_step_raw, x_step_raw, y_step_raw, _overlap_counts
from .image import Image, Mask
from .operators import GRAD_TAPS, GradientField, PatchConfig

WEIGHTS_MAGIC = b"LPRNETW1"
FORMAT_VERSION = 1

CONFIG_IDS = (1, 2, 3, 4)
_HAS_B = (2, 4)
_HAS_MU_CNN = (3, 4)


class WeightFormatError(ValueError):
    """Base class for weight-file problems."""


class BadMagicError(WeightFormatError):
    pass


class FormatVersionError(WeightFormatError):
    pass


class MissingTensorError(WeightFormatError):
    pass


class UnknownTensorError(WeightFormatError):
    pass


class TensorShapeError(WeightFormatError):
    pass


class BlobLengthError(WeightFormatError):
    pass


@dataclass(frozen=True)
class NetConfig:
    """Block count K, inner PGD count n, configuration id and patch grid."""

    K: int
    n: int
    config_id: int
    patch: PatchConfig = field(default_factory=PatchConfig)

    def __post_init__(self):
        if self.K < 0 or self.n < 0:
            raise ValueError("K and n must be nonnegative")
        if self.config_id not in CONFIG_IDS:
            raise ValueError(f"config_id must be one of {CONFIG_IDS}")

    @property
    def has_b(self) -> bool:
        return self.config_id in _HAS_B

    @property
    def has_mu_cnn(self) -> bool:
        return self.config_id in _HAS_MU_CNN


_MU_CNN_SHAPES = {
    "conv1.weight": (4, 2, 3, 3),
    "conv1.bias": (4,),
    "conv2.weight": (8, 4, 3, 3),
    "conv2.bias": (8,),
    "conv3.weight": (16, 8, 3, 3),
    "conv3.bias": (16,),
    "fc.weight": (1, 16),
    "fc.bias": (1,),
}


def _f32(arr, shape, name):
    out = np.ascontiguousarray(np.asarray(arr, dtype=np.float32))
    if out.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {out.shape}")
    if not np.isfinite(out).all():
        raise ValueError(f"{name} contains non-finite values")
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class MuCnnWeights:
    """Three 3x3 conv layers (4, 8, 16 channels) + global pool + fc + softplus."""

    conv1_w: np.ndarray
    conv1_b: np.ndarray
    conv2_w: np.ndarray
    conv2_b: np.ndarray
    conv3_w: np.ndarray
    conv3_b: np.ndarray
    fc_w: np.ndarray
    fc_b: np.ndarray

    def __post_init__(self):
        for attr, key in (("conv1_w", "conv1.weight"), ("conv1_b", "conv1.bias"),
                          ("conv2_w", "conv2.weight"), ("conv2_b", "conv2.bias"),
                          ("conv3_w", "conv3.weight"), ("conv3_b", "conv3.bias"),
                          ("fc_w", "fc.weight"), ("fc_b", "fc.bias")):
            object.__setattr__(self, attr, _f32(getattr(self, attr), _MU_CNN_SHAPES[key], key))

    @classmethod
    def initial(cls, mu0: float = 0.05) -> "MuCnnWeights":
        """All zeros except the fc bias, chosen so the output equals mu0."""
        return cls(
            conv1_w=np.zeros((4, 2, 3, 3)), conv1_b=np.zeros(4),
            conv2_w=np.zeros((8, 4, 3, 3)), conv2_b=np.zeros(8),
            conv3_w=np.zeros((16, 8, 3, 3)), conv3_b=np.zeros(16),
            fc_w=np.zeros((1, 16)), fc_b=np.array([math.log(math.expm1(mu0))]),
        )

    def named_tensors(self):
        return [("conv1.weight", self.conv1_w), ("conv1.bias", self.conv1_b),
                ("conv2.weight", self.conv2_w), ("conv2.bias", self.conv2_b),
                ("conv3.weight", self.conv3_w), ("conv3.bias", self.conv3_b),
                ("fc.weight", self.fc_w), ("fc.bias", self.fc_b)]


@dataclass(frozen=True)
class BlockWeights:
    """Learned tensors of one unrolled block."""

    d_t: np.ndarray
    d_x: np.ndarray
    d_x_tilde: np.ndarray
    d_y: np.ndarray
    mu: float | None = None
    mu_cnn: MuCnnWeights | None = None
    b: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "d_t", _f32(self.d_t, (2, 1, 2, 2), "D_T.weight"))
        object.__setattr__(self, "d_x", _f32(self.d_x, (2, 1, 2, 2), "D_X.weight"))
        object.__setattr__(self, "d_x_tilde", _f32(self.d_x_tilde, (1, 2, 2, 2), "D_X_tilde.weight"))
        object.__setattr__(self, "d_y", _f32(self.d_y, (2, 1, 2, 2), "D_Y.weight"))
        if self.mu is not None and self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.b is not None and self.b <= 1:
            raise ValueError("b must be larger than 1")

    @classmethod
    def initial(cls, config: NetConfig, mu0: float = 0.05, b0: float = 1.1) -> "BlockWeights":
        """Discrete-gradient kernels; D_X_tilde at the gradient's transpose."""
        return cls(
            d_t=GRAD_TAPS, d_x=GRAD_TAPS,
            d_x_tilde=GRAD_TAPS.transpose(1, 0, 2, 3), d_y=GRAD_TAPS,
            mu=None if config.has_mu_cnn else float(np.float32(mu0)),
            mu_cnn=MuCnnWeights.initial(mu0) if config.has_mu_cnn else None,
            b=float(np.float32(b0)) if config.has_b else None,
        )


@dataclass(frozen=True)
class NetWeights:
    """Shared scalars plus per-block tensors for all K blocks."""

    net_config: NetConfig
    rho_t: float
    rho_s: float
    tau: float
    blocks: list

    def __post_init__(self):
        if self.rho_t <= 0 or self.rho_s <= 0 or self.tau <= 0:
            raise ValueError("rho_t, rho_s, tau must be positive")
        if len(self.blocks) != self.net_config.K:
            raise ValueError(f"expected {self.net_config.K} blocks, got {len(self.blocks)}")
        cfg = self.net_config
        for k, bw in enumerate(self.blocks):
            if cfg.has_mu_cnn:
                if bw.mu_cnn is None:
                    raise ValueError(f"block {k}: config {cfg.config_id} requires a mu CNN")
            elif bw.mu is None:
                raise ValueError(f"block {k}: config {cfg.config_id} requires a scalar mu")
            if cfg.has_b and bw.b is None:
                raise ValueError(f"block {k}: config {cfg.config_id} requires b")

    @classmethod
    def initial(cls, config: NetConfig, rho_t: float = 1.0, rho_s: float = 1.0,
                tau: float = 0.1, mu0: float = 0.05, b0: float = 1.1) -> "NetWeights":
        return cls(
            net_config=config,
            rho_t=float(np.float32(rho_t)), rho_s=float(np.float32(rho_s)),
            tau=float(np.float32(tau)),
            blocks=[BlockWeights.initial(config, mu0, b0) for _ in range(config.K)],
        )


def a_from_b(rho_t: float, mu: float, b: float) -> float:
    """Concavity a = (rho_t/mu) (1 - 1/b); satisfies a < rho_t/mu for b > 1."""
    if rho_t <= 0 or mu <= 0:
        raise ValueError("rho_t and mu must be positive")
    if b < 1:
        raise ValueError("b must be >= 1")
    return (rho_t / mu) * (1.0 - 1.0 / b)


def _conv3x3_replicate(x, w, b):
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)), mode="edge")
    win = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(1, 2))
    return np.einsum("ockl,chwkl->ohw", w, win, optimize=True) + b[:, None, None]


def _mu_cnn_raw(u, v, w: MuCnnWeights, dtype):
    x = np.stack([u, v]).astype(dtype, copy=False)
    for cw, cb in ((w.conv1_w, w.conv1_b), (w.conv2_w, w.conv2_b), (w.conv3_w, w.conv3_b)):
        x = _conv3x3_replicate(x, cw.astype(dtype), cb.astype(dtype))
        x = np.maximum(x, 0.0)
    pooled = x.mean(axis=(1, 2))
    pre = float(w.fc_w.astype(dtype)[0] @ pooled + w.fc_b.astype(dtype)[0])
    return float(np.logaddexp(0.0, pre))


def mu_cnn_forward(u: Image, v: Image, w: MuCnnWeights) -> float:
    """Predict a strictly positive mu from the 2-channel (u, v) stack."""
    if u.shape != v.shape:
        raise ValueError(f"u and v dimensions differ: {u.shape} vs {v.shape}")
    if u.height < 3 or u.width < 3:
        raise ValueError(f"mu CNN requires at least 3x3 images, got {u.shape}")
    return _mu_cnn_raw(u.data, v.data, w, np.float64)


def _block_ops(bw: BlockWeights):
    t_ops = GradOps(taps_fwd=bw.d_t.astype(np.float64))
    x_ops = GradOps(taps_fwd=bw.d_x.astype(np.float64),
                    taps_adj=bw.d_x_tilde.astype(np.float64).transpose(1, 0, 2, 3).copy())
    y_ops = GradOps(taps_fwd=bw.d_y.astype(np.float64))
    return t_ops, x_ops, y_ops


def _forward_block_raw(u, v, y_t, y_s, fd, md, bw: BlockWeights, nw: NetWeights,
                       counts, dtype):
    cfg = nw.net_config
    mu_eff = float(bw.mu) if not cfg.has_mu_cnn else _mu_cnn_raw(u, v, bw.mu_cnn, dtype)
    a_eff = a_from_b(nw.rho_t, mu_eff, bw.b) if cfg.has_b else 0.0
    t_ops, x_ops, y_ops = _block_ops(bw)
    t = t_step_raw(u, y_t, t_ops, mu_eff, nw.rho_t, a_eff)
    s = s_step_raw(v, y_s, nw.rho_s, cfg.patch, counts)
    u, v = x_step_raw(u, v, t, s, y_t, y_s, fd, md, x_ops,
                      nw.rho_t, nw.rho_s, nw.tau, cfg.n)
    y_t, y_s, _, _ = y_step_raw(y_t, y_s, u, v, t, s, y_ops, nw.rho_t, nw.rho_s)
    return u, v, t, s, y_t, y_s


def forward_block(state: AdmmState, f: Image, mask: Mask, bw: BlockWeights,
                  nw: NetWeights) -> AdmmState:
    """Apply one block (T, S, X, Y in order) to the incoming state."""
    h, w = f.shape
    counts = _overlap_counts(nw.net_config.patch, h, w, np.float64)
    u, v, t, s, y_t, y_s = _forward_block_raw(
        state.u.data, state.v.data, state.y_t.data, state.y_s.data,
        f.data, mask.data, bw, nw, counts, np.float64,
    )
    return AdmmState(u=Image(u), v=Image(v), t=GradientField(t), s=Image(s),
                     y_t=GradientField(y_t), y_s=Image(y_s))


def forward(f: Image, mask: Mask | None, nw: NetWeights, dtype=np.float64,
            record_trace: bool = False):
    """Run all K blocks from (u, v, y) = (f, 0, 0).

    Returns (u, v, trace); the trace holds per-block (u, v) snapshots when
    requested, else it is empty.
    """
    h, w = f.shape
    if mask is None:
        mask = Mask.ones(h, w)
    if mask.shape != f.shape:
        raise ValueError(f"mask shape {mask.shape} does not match image {f.shape}")
    cfg = nw.net_config
    cfg.patch.check_admissible(h, w)
    if cfg.has_mu_cnn and (h < 3 or w < 3):
        raise ValueError(f"mu CNN requires at least 3x3 images, got {f.shape}")

    fd = f.data.astype(dtype)
    md = mask.data
    u = fd.copy()
    v = np.zeros_like(fd)
    y_t = np.zeros((2, h, w), dtype=dtype)
    y_s = np.zeros_like(fd)
    counts = _overlap_counts(cfg.patch, h, w, dtype)

    trace = []
    for bw in nw.blocks:
        u, v, _, _, y_t, y_s = _forward_block_raw(u, v, y_t, y_s, fd, md, bw, nw,
                                                  counts, dtype)
        if record_trace:
            trace.append((Image(u.astype(np.float64)), Image(v.astype(np.float64))))
    return Image(u.astype(np.float64)), Image(v.astype(np.float64)), trace


# ---------------------------------------------------------------------------
# weight file serialization


def _expected_tensors(cfg: NetConfig):
    names = [("shared.rho_t", (1,)), ("shared.rho_s", (1,)), ("shared.tau", (1,))]
    for k in range(cfg.K):
        pre = f"block.{k}."
        names.append((pre + "D_T.weight", (2, 1, 2, 2)))
        names.append((pre + "D_X.weight", (2, 1, 2, 2)))
        names.append((pre + "D_X_tilde.weight", (1, 2, 2, 2)))
        names.append((pre + "D_Y.weight", (2, 1, 2, 2)))
        if not cfg.has_mu_cnn:
            names.append((pre + "mu", (1,)))
        if cfg.has_b:
            names.append((pre + "b", (1,)))
        if cfg.has_mu_cnn:
            for suffix, shape in _MU_CNN_SHAPES.items():
                names.append((pre + "mucnn." + suffix, shape))
    return names


def _collect_tensors(nw: NetWeights):
    cfg = nw.net_config
    out = [("shared.rho_t", np.array([nw.rho_t], dtype=np.float32)),
           ("shared.rho_s", np.array([nw.rho_s], dtype=np.float32)),
           ("shared.tau", np.array([nw.tau], dtype=np.float32))]
    for k, bw in enumerate(nw.blocks):
        pre = f"block.{k}."
        out.append((pre + "D_T.weight", bw.d_t))
        out.append((pre + "D_X.weight", bw.d_x))
        out.append((pre + "D_X_tilde.weight", bw.d_x_tilde))
        out.append((pre + "D_Y.weight", bw.d_y))
        if not cfg.has_mu_cnn:
            out.append((pre + "mu", np.array([bw.mu], dtype=np.float32)))
        if cfg.has_b:
            out.append((pre + "b", np.array([bw.b], dtype=np.float32)))
        if cfg.has_mu_cnn:
            for suffix, tensor in bw.mu_cnn.named_tensors():
                out.append((pre + "mucnn." + suffix, tensor))
    return out


def save_weights(path, nw: NetWeights) -> None:
    """Write the bit-exact weight file; tensors in manifest order."""
    cfg = nw.net_config
    tensors = _collect_tensors(nw)
    manifest_tensors = []
    offset = 0
    chunks = []
    for name, arr in tensors:
        data = np.ascontiguousarray(arr, dtype="<f4")
        manifest_tensors.append(
            {"name": name, "shape": list(arr.shape), "offset_bytes": offset}
        )
        chunks.append(data.tobytes(order="C"))
        offset += data.nbytes
    manifest = {
        "format_version": FORMAT_VERSION,
        "K": cfg.K, "n": cfg.n, "config_id": cfg.config_id,
        "p": cfg.patch.p, "o": cfg.patch.o,
        "tensors": manifest_tensors,
    }
    mbytes = json.dumps(manifest).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(WEIGHTS_MAGIC)
        fh.write(struct.pack("<I", len(mbytes)))
        fh.write(mbytes)
        for chunk in chunks:
            fh.write(chunk)


def read_manifest(path):
    """Parse and validate the header; returns (manifest dict, blob bytes)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:8] != WEIGHTS_MAGIC:
        raise BadMagicError(f"bad magic: not a LPRNETW1 weight file: {path}")
    (mlen,) = struct.unpack("<I", blob[8:12])
    if len(blob) < 12 + mlen:
        raise BlobLengthError(f"manifest extends past end of file: {path}")
    try:
        manifest = json.loads(blob[12 : 12 + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WeightFormatError(f"unreadable manifest: {path}: {exc}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise FormatVersionError(
            f"unsupported format_version {manifest.get('format_version')!r}: {path}"
        )
    return manifest, blob[12 + mlen :]


def load_weights(path) -> NetWeights:
    """Read, validate and assemble a weight file into NetWeights."""
    manifest, blob = read_manifest(path)
    try:
        cfg = NetConfig(K=int(manifest["K"]), n=int(manifest["n"]),
                        config_id=int(manifest["config_id"]),
                        patch=PatchConfig(p=int(manifest["p"]), o=int(manifest["o"])))
    except (KeyError, TypeError, ValueError) as exc:
        raise WeightFormatError(f"invalid manifest header fields: {exc}") from exc

    entries = {}
    for ent in manifest.get("tensors", []):
        entries[ent["name"]] = (tuple(int(x) for x in ent["shape"]), int(ent["offset_bytes"]))

    expected = _expected_tensors(cfg)
    expected_names = {name for name, _ in expected}
    for name in entries:
        if name not in expected_names:
            raise UnknownTensorError(f"unexpected tensor {name!r} for config {cfg.config_id}")

    total = 0
    arrays = {}
    for name, shape in expected:
        if name not in entries:
            raise MissingTensorError(f"missing tensor {name!r} for config {cfg.config_id}")
        got_shape, off = entries[name]
        if got_shape != shape:
            raise TensorShapeError(f"tensor {name!r} has shape {got_shape}, expected {shape}")
        size = 4 * int(np.prod(shape))
        if off < 0 or off + size > len(blob):
            raise BlobLengthError(
                f"manifest/blob length mismatch: tensor {name!r} spans "
                f"[{off}, {off + size}) of a {len(blob)}-byte blob"
            )
        arrays[name] = np.frombuffer(blob, dtype="<f4", offset=off,
                                     count=int(np.prod(shape))).reshape(shape)
        total += size
    if total != len(blob):
        raise BlobLengthError(
            f"manifest/blob length mismatch: tensors cover {total} bytes, blob has {len(blob)}"
        )

    blocks = []
    for k in range(cfg.K):
        pre = f"block.{k}."
        mu_cnn = None
        if cfg.has_mu_cnn:
            mu_cnn = MuCnnWeights(
                conv1_w=arrays[pre + "mucnn.conv1.weight"], conv1_b=arrays[pre + "mucnn.conv1.bias"],
                conv2_w=arrays[pre + "mucnn.conv2.weight"], conv2_b=arrays[pre + "mucnn.conv2.bias"],
                conv3_w=arrays[pre + "mucnn.conv3.weight"], conv3_b=arrays[pre + "mucnn.conv3.bias"],
                fc_w=arrays[pre + "mucnn.fc.weight"], fc_b=arrays[pre + "mucnn.fc.bias"],
            )
        blocks.append(BlockWeights(
            d_t=arrays[pre + "D_T.weight"], d_x=arrays[pre + "D_X.weight"],
            d_x_tilde=arrays[pre + "D_X_tilde.weight"], d_y=arrays[pre + "D_Y.weight"],
            mu=None if cfg.has_mu_cnn else float(arrays[pre + "mu"][0]),
            mu_cnn=mu_cnn,
            b=float(arrays[pre + "b"][0]) if cfg.has_b else None,
        ))
    try:
        return NetWeights(
            net_config=cfg,
            rho_t=float(arrays["shared.rho_t"][0]),
            rho_s=float(arrays["shared.rho_s"][0]),
            tau=float(arrays["shared.tau"][0]),
            blocks=blocks,
        )
    except ValueError as exc:
        raise WeightFormatError(str(exc)) from exc
