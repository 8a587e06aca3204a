"""Classical iterative solver for the low-patch-rank decomposition model.

One outer iteration performs four updates:

* t: MCP-shrink the shifted gradient field,
* s: singular value thresholding in the patch domain,
* x = (u, v): n projected-gradient steps on the constrained quadratic,
* y: multiplier ascent on both split constraints.

The gradient-like operator pair is pluggable so the same loop runs with the
hand-coded discrete gradient or with learned 2x2 kernels.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .image import Image, Mask
from .operators import GRAD_TAPS, GradientField, PatchConfig
from .proxops import McpParams


class GradOps:
    """A D-like operator and its adjoint-like partner.

    With no taps this is the discrete gradient and its exact adjoint; with
    taps it is a 2x2 convolution (forward) and the exact adjoint of a 2x2
    convolution (backward), each parameterized independently.
    """

    __slots__ = ("taps_fwd", "taps_adj")

    def __init__(self, taps_fwd=None, taps_adj=None):
        self.taps_fwd = None if taps_fwd is None else np.ascontiguousarray(taps_fwd)
        self.taps_adj = None if taps_adj is None else np.ascontiguousarray(taps_adj)

    def fwd(self, u):
        if self.taps_fwd is None:
            return _kernels.grad(u)
        taps = self.taps_fwd.astype(u.dtype, copy=False)
        return _kernels.conv2x2(taps, u[np.newaxis])

    def adj(self, g):
        taps = GRAD_TAPS if self.taps_adj is None else self.taps_adj
        taps = taps.astype(g.dtype, copy=False)
        return _kernels.conv2x2_adjoint(taps, g)[0]


CLASSICAL_OPS = GradOps()


@dataclass(frozen=True)
class AdmmConfig:
    """Model and algorithm parameters of the classical solver."""

    mu: float = 0.05
    a: float = 0.0
    rho_t: float = 1.0
    rho_s: float = 1.0
    tau: float = 0.1
    outer_iters: int = 100
    pgd_iters: int = 20
    patch: PatchConfig = field(default_factory=PatchConfig)
    tol: float = 0.0

    def __post_init__(self):
        if self.mu <= 0 or self.rho_t <= 0 or self.rho_s <= 0 or self.tau <= 0:
            raise ValueError("mu, rho_t, rho_s, tau must be positive")
        if self.a < 0:
            raise ValueError("a must be nonnegative")
        if self.a * self.mu > self.rho_t:
            raise ValueError(f"a={self.a} violates a <= rho_t/mu = {self.rho_t / self.mu}")
        if self.outer_iters < 0 or self.pgd_iters < 0:
            raise ValueError("iteration counts must be nonnegative")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")

    @property
    def tau_stable(self) -> bool:
        """PGD step bound for the discrete gradient (||D||^2 <= 8)."""
        return self.tau < 2.0 / (8.0 * self.rho_t + self.rho_s)

    def mcp_params(self) -> McpParams:
        return McpParams(mu=self.mu, rho_t=self.rho_t, a=self.a)


@dataclass(frozen=True)
class AdmmState:
    """Full iterate: primal (u, v), auxiliaries (t, s), multipliers (y_t, y_s)."""

    u: Image
    v: Image
    t: GradientField
    s: Image
    y_t: GradientField
    y_s: Image

    def __post_init__(self):
        shapes = {self.u.shape, self.v.shape, self.s.shape, self.y_s.shape,
                  (self.t.height, self.t.width), (self.y_t.height, self.y_t.width)}
        if len(shapes) != 1:
            raise ValueError(f"inconsistent state dimensions: {sorted(shapes)}")

    @classmethod
    def initial(cls, f: Image) -> "AdmmState":
        """Start of the iteration: u = f, everything else zero."""
        h, w = f.shape
        zero = Image(np.zeros((h, w)))
        zfield = GradientField.zeros(h, w)
        return cls(u=f, v=zero, t=zfield, s=zero, y_t=zfield, y_s=zero)


@dataclass
class Diagnostics:
    """Per-iteration residuals and timings of one solve call."""

    res_t: list = field(default_factory=list)
    res_s: list = field(default_factory=list)
    res_constraint: list = field(default_factory=list)
    ms: list = field(default_factory=list)
    tau_stable: bool = True
    stopped_early: bool = False

    @property
    def iterations(self) -> int:
        return len(self.res_t)

    def write_csv(self, path_or_file) -> None:
        close = False
        if hasattr(path_or_file, "write"):
            fh = path_or_file
        else:
            fh = open(path_or_file, "w", newline="")
            close = True
        try:
            writer = csv.writer(fh)
            writer.writerow(["iter", "res_t", "res_s", "res_constraint", "ms"])
            for i in range(self.iterations):
                writer.writerow(
                    [i, repr(self.res_t[i]), repr(self.res_s[i]),
                     repr(self.res_constraint[i]), repr(self.ms[i])]
                )
        finally:
            if close:
                fh.close()


# raw-array step implementations shared by solve and the unrolled network


def t_step_raw(u, y_t, ops: GradOps, mu, rho_t, a):
    return _kernels.prox_mcp_field(ops.fwd(u) + y_t / rho_t, mu / rho_t, a)


def svt_raw(m, beta):
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    return (u * np.maximum(s - beta, 0.0)) @ vt


def s_step_raw(v, y_s, rho_s, patch: PatchConfig, counts):
    w = v + y_s / rho_s
    pm = _kernels.patch_extract(w, patch.p, patch.stride)
    pm = svt_raw(pm, 1.0 / rho_s)
    acc = _kernels.patch_adjoint(pm, patch.p, patch.stride, w.shape[0], w.shape[1])
    return acc / counts


def x_step_raw(u, v, t, s, y_t, y_s, f, mask, ops: GradOps, rho_t, rho_s, tau, n):
    z_t = t - y_t / rho_t
    z_s = s - y_s / rho_s
    for _ in range(n):
        gu = rho_t * ops.adj(ops.fwd(u) - z_t)
        gv = rho_s * (v - z_s)
        u, v = _kernels.project_c(u - tau * gu, v - tau * gv, f, mask)
    return u, v


def y_step_raw(y_t, y_s, u_new, v_new, t_new, s_new, ops: GradOps, rho_t, rho_s):
    rt = ops.fwd(u_new) - t_new
    rs = v_new - s_new
    return y_t + rho_t * rt, y_s + rho_s * rs, rt, rs


def _overlap_counts(patch: PatchConfig, h, w, dtype):
    ones = np.ones((patch.p * patch.p, patch.n_patches(h, w)), dtype=dtype)
    return _kernels.patch_adjoint(ones, patch.p, patch.stride, h, w)


# typed single-step API


def t_step(state: AdmmState, cfg: AdmmConfig, ops: GradOps = CLASSICAL_OPS) -> GradientField:
    return GradientField(
        t_step_raw(state.u.data, state.y_t.data, ops, cfg.mu, cfg.rho_t, cfg.a)
    )


def s_step(state: AdmmState, cfg: AdmmConfig) -> Image:
    h, w = state.v.shape
    cfg.patch.check_admissible(h, w)
    counts = _overlap_counts(cfg.patch, h, w, np.float64)
    return Image(s_step_raw(state.v.data, state.y_s.data, cfg.rho_s, cfg.patch, counts))


def x_step(state: AdmmState, t_new: GradientField, s_new: Image, f: Image, mask: Mask,
           cfg: AdmmConfig, ops: GradOps = CLASSICAL_OPS) -> tuple[Image, Image]:
    u, v = x_step_raw(
        state.u.data, state.v.data, t_new.data, s_new.data, state.y_t.data,
        state.y_s.data, f.data, mask.data, ops, cfg.rho_t, cfg.rho_s, cfg.tau,
        cfg.pgd_iters,
    )
    return Image(u), Image(v)


def y_step(state: AdmmState, t_new: GradientField, s_new: Image, u_new: Image,
           v_new: Image, cfg: AdmmConfig,
           ops: GradOps = CLASSICAL_OPS) -> tuple[GradientField, Image]:
    y_t, y_s, _, _ = y_step_raw(
        state.y_t.data, state.y_s.data, u_new.data, v_new.data, t_new.data,
        s_new.data, ops, cfg.rho_t, cfg.rho_s,
    )
    return GradientField(y_t), Image(y_s)


def iterate(state: AdmmState, f: Image, mask: Mask, cfg: AdmmConfig,
            ops: GradOps = CLASSICAL_OPS) -> AdmmState:
    """One full outer iteration (t, s, x, y) as a pure state transition."""
    t_new = t_step(state, cfg, ops)
    s_new = s_step(state, cfg)
    u_new, v_new = x_step(state, t_new, s_new, f, mask, cfg, ops)
    y_t, y_s = y_step(state, t_new, s_new, u_new, v_new, cfg, ops)
    return AdmmState(u=u_new, v=v_new, t=t_new, s=s_new, y_t=y_t, y_s=y_s)


def solve(f: Image, mask: Mask | None, cfg: AdmmConfig,
          ops: GradOps = CLASSICAL_OPS, dtype=np.float64) -> tuple[Image, Image, Diagnostics]:
    """Run the full ADMM loop from u = f, v = 0, y = 0.

    Stops after ``cfg.outer_iters`` iterations, or earlier once both primal
    residuals fall below ``cfg.tol`` relative to ||f||. The returned (u, v)
    satisfies the constraint on observed pixels exactly whenever
    ``cfg.pgd_iters`` >= 1 (the last operation applied is the projection).
    """
    h, w = f.shape
    if mask is None:
        mask = Mask.ones(h, w)
    if mask.shape != f.shape:
        raise ValueError(f"mask shape {mask.shape} does not match image {f.shape}")
    cfg.patch.check_admissible(h, w)

    fd = f.data.astype(dtype)
    md = mask.data
    u = fd.copy()
    v = np.zeros_like(fd)
    y_t = np.zeros((2, h, w), dtype=dtype)
    y_s = np.zeros_like(fd)
    counts = _overlap_counts(cfg.patch, h, w, dtype)

    diag = Diagnostics(tau_stable=cfg.tau_stable)
    norm_f = float(np.linalg.norm(fd))
    scale = norm_f if norm_f > 0 else 1.0

    for _ in range(cfg.outer_iters):
        tic = time.perf_counter()
        t = t_step_raw(u, y_t, ops, cfg.mu, cfg.rho_t, cfg.a)
        s = s_step_raw(v, y_s, cfg.rho_s, cfg.patch, counts)
        u, v = x_step_raw(u, v, t, s, y_t, y_s, fd, md, ops,
                          cfg.rho_t, cfg.rho_s, cfg.tau, cfg.pgd_iters)
        y_t, y_s, rt, rs = y_step_raw(y_t, y_s, u, v, t, s, ops, cfg.rho_t, cfg.rho_s)

        res_t = float(np.linalg.norm(rt))
        res_s = float(np.linalg.norm(rs))
        res_c = float(np.max(np.abs((fd - (u + v)) * md))) if md.any() else 0.0
        diag.res_t.append(res_t)
        diag.res_s.append(res_s)
        diag.res_constraint.append(res_c)
        diag.ms.append((time.perf_counter() - tic) * 1e3)

        if cfg.tol > 0 and max(res_t, res_s) < cfg.tol * scale:
            diag.stopped_early = True
            break

    return Image(u.astype(np.float64)), Image(v.astype(np.float64)), diag
