"""Pure-NumPy implementations of the hot kernels.

These are the reference semantics; the compiled extension in ``_native.pyx``
reproduces the same accumulation order so both backends agree bit-for-bit.
All functions operate on raw ndarrays: images are (H, W), gradient-like
fields are channel-first (C, H, W), 2x2 kernels are (c_out, c_in, 2, 2).
"""

import numpy as np

BACKEND_NAME = "python"


def grad(u):
    """Forward-difference gradient with replicate boundary.

    dx(i,j) = u(i,j+1) - u(i,j) for j < W-1, else 0; dy analogous in i.
    Returns a (2, H, W) array (dx, dy).
    """
    h, w = u.shape
    g = np.zeros((2, h, w), dtype=u.dtype)
    g[0, :, : w - 1] = u[:, 1:] - u[:, : w - 1]
    g[1, : h - 1, :] = u[1:, :] - u[: h - 1, :]
    return g


def conv2x2(taps, x):
    """2x2 cross-correlation, top-left anchor, replicate pad bottom/right.

    out(o,i,j) = sum_{c,di,dj} taps[o,c,di,dj] * x(c, min(i+di,H-1), min(j+dj,W-1))
    """
    co, ci, _, _ = taps.shape
    _, h, w = x.shape
    xp = np.empty((ci, h + 1, w + 1), dtype=x.dtype)
    xp[:, :h, :w] = x
    xp[:, h, :w] = x[:, h - 1, :]
    xp[:, :h, w] = x[:, :, w - 1]
    xp[:, h, w] = x[:, h - 1, w - 1]
    out = np.zeros((co, h, w), dtype=x.dtype)
    for o in range(co):
        for c in range(ci):
            for di in range(2):
                for dj in range(2):
                    out[o] += taps[o, c, di, dj] * xp[c, di : di + h, dj : dj + w]
    return out


def conv2x2_adjoint(taps, g):
    """Exact adjoint of :func:`conv2x2` for the same taps.

    Maps a (c_out, H, W) field back to (c_in, H, W): transposed 2x2
    correlation with the replicate-pad contributions folded back into the
    last row/column.
    """
    co, ci, _, _ = taps.shape
    _, h, w = g.shape
    buf = np.zeros((ci, h + 1, w + 1), dtype=g.dtype)
    for o in range(co):
        for c in range(ci):
            for di in range(2):
                for dj in range(2):
                    buf[c, di : di + h, dj : dj + w] += taps[o, c, di, dj] * g[o]
    out = buf[:, :h, :w].copy()
    out[:, h - 1, :] += buf[:, h, :w]
    out[:, :, w - 1] += buf[:, :h, w]
    out[:, h - 1, w - 1] += buf[:, h, w]
    return out


def prox_mcp_field(g, lam, a):
    """Pixelwise MCP proximal shrinkage of a (2, H, W) field.

    lam is the shrinkage parameter mu/rho_t; requires a*lam <= 1.
    The zero-vector branch falls out of the arithmetic: lam/0 = +inf makes
    the shrinkage factor 0.
    """
    norm = np.sqrt(g[0] * g[0] + g[1] * g[1])
    with np.errstate(divide="ignore", invalid="ignore"):
        m = 1.0 - lam / norm
        denom = 1.0 - a * lam
        if denom > 0.0:
            scale = np.where(m > 0.0, np.minimum(m / denom, 1.0), 0.0)
        else:
            scale = np.where(m > 0.0, 1.0, 0.0)
    scale = scale.astype(g.dtype, copy=False)
    out = np.empty_like(g)
    out[0] = scale * g[0]
    out[1] = scale * g[1]
    return out


def project_c(u, v, f, mask):
    """Orthogonal projection onto {(u,v) : f = u+v on observed pixels}.

    The residual split is symmetric; v' is assigned as f - u' so the
    constraint holds bit-exactly and the projection is bitwise idempotent.
    """
    s = f - u - v
    un_full = u + 0.5 * s
    observed = mask != 0
    un = np.where(observed, un_full, u)
    vn = np.where(observed, f - un, v)
    return un, vn


def patch_extract(u, p, stride):
    """Stack all p x p patches as columns (column-major within a patch).

    Patch grid is traversed row-major; column k = gi*gw + gj holds the patch
    anchored at (gi*stride, gj*stride).
    """
    h, w = u.shape
    gh = (h - p) // stride + 1
    gw = (w - p) // stride + 1
    sw = np.lib.stride_tricks.sliding_window_view(u, (p, p))[::stride, ::stride]
    # axes to (dj, di, gi, gj): ravel index r = di + p*dj, k = gi*gw + gj
    return np.ascontiguousarray(sw.transpose(3, 2, 0, 1).reshape(p * p, gh * gw))


def patch_adjoint(pm, p, stride, h, w):
    """Adjoint of :func:`patch_extract`: scatter-add patches back."""
    gh = (h - p) // stride + 1
    gw = (w - p) // stride + 1
    out = np.zeros((h, w), dtype=pm.dtype)
    for r in range(p * p):
        di = r % p
        dj = r // p
        out[di : di + gh * stride : stride, dj : dj + gw * stride : stride] += pm[
            r
        ].reshape(gh, gw)
    return out
