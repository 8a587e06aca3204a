"""Closed-form proximal maps and the data-constraint projection.

Covers the minimax-concave-penalty shrinkage of gradient magnitudes,
singular value thresholding of patch matrices, and the Euclidean projection
onto {(u, v) : f = M(u + v)} for a 0/1 diagonal measurement mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .image import Image, Mask
from .operators import GradientField


@dataclass(frozen=True)
class McpParams:
    """Shrinkage parameters: weight mu, penalty rho_t, concavity a.

    The closed-form minimizer is valid only under a <= rho_t / mu; the
    boundary case a = rho_t / mu is admitted (the capped factor stays 1).
    """

    mu: float
    rho_t: float
    a: float = 0.0

    def __post_init__(self):
        if self.mu <= 0 or self.rho_t <= 0:
            raise ValueError("mu and rho_t must be positive")
        if self.a < 0:
            raise ValueError("a must be nonnegative")
        if self.a * self.mu > self.rho_t:
            raise ValueError(
                f"a={self.a} violates a <= rho_t/mu = {self.rho_t / self.mu}; "
                "the shrinkage subproblem is not convex"
            )

    @property
    def lam(self) -> float:
        return self.mu / self.rho_t


def mcp_value(t: float, a: float) -> float:
    """Minimax concave penalty: |t| - (a/2) t^2 capped at 1/(2a); |t| for a=0."""
    if a < 0:
        raise ValueError("a must be nonnegative")
    at = abs(t)
    if a == 0.0:
        return at
    if at <= 1.0 / a:
        return at - 0.5 * a * t * t
    return 0.5 / a


def prox_mcp_2d(w, params: McpParams):
    """Shrink one 2-vector: the unique minimizer of
    (mu/rho_t) * phi(||t||; a) + 0.5 * ||t - w||^2.

    Factor min(1, (1 - lam/||w||)_+ / (1 - a*lam)) applied to w; zero vector
    maps to zero. At a*lam = 1 the capped factor is 1 whenever the inner
    part is positive.
    """
    w = np.asarray(w, dtype=np.float64)
    lam = params.lam
    norm = float(np.hypot(w[0], w[1]))
    if norm == 0.0:
        return np.zeros(2)
    m = 1.0 - lam / norm
    if m <= 0.0:
        return np.zeros(2)
    denom = 1.0 - params.a * lam
    scale = 1.0 if denom <= 0.0 else min(m / denom, 1.0)
    return scale * w


def prox_mcp_field(g: GradientField, params: McpParams) -> GradientField:
    """Apply :func:`prox_mcp_2d` independently at every pixel."""
    return GradientField(_kernels.prox_mcp_field(g.data, params.lam, params.a))


def svt(m, beta: float):
    """Singular value thresholding: U max(S - beta, 0) V^T via full thin SVD."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    m = np.asarray(m)
    if not np.isfinite(m).all():
        raise ValueError("svt input contains non-finite values")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    s_shrunk = np.maximum(s - beta, 0.0)
    return (u * s_shrunk) @ vt


def project_c(u: Image, v: Image, f: Image, mask: Mask) -> tuple[Image, Image]:
    """Euclidean projection onto C = {(u, v) : f = M(u + v)}.

    At observed pixels the residual f - u - v is split equally; unobserved
    pixels pass through. The output satisfies the constraint bit-exactly and
    re-projection is the identity.
    """
    shapes = {u.shape, v.shape, f.shape, mask.shape}
    if len(shapes) != 1:
        raise ValueError(f"dimension mismatch among u, v, f, mask: {sorted(shapes)}")
    un, vn = _kernels.project_c(u.data, v.data, f.data, mask.data)
    return Image(un), Image(vn)
