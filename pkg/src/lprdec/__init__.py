"""Structure-texture image decomposition with a low patch rank prior.

The package provides a classical ADMM solver with non-convex (MCP) total
variation and a nuclear-norm penalty on overlapping patches, the unrolled
network forward pass with loadable learned weights, a synthetic dataset
generator, an evaluation harness and a CLI. The hot kernels run through a
compiled extension when available, with a pure-NumPy fallback selected at
import (see ``lprdec._kernels.BACKEND``).
"""

from ._kernels import BACKEND
from .admm import AdmmConfig, AdmmState, Diagnostics, GradOps, solve
from .image import Image, Mask, psnr, psnr_joint, read_image, write_image
from .lprnet import (
    BlockWeights,
    MuCnnWeights,
    NetConfig,
    NetWeights,
    a_from_b,
    forward,
    load_weights,
    mu_cnn_forward,
    save_weights,
)
from .operators import (
    ConvKernel2x2,
    GradientField,
    PatchConfig,
    PatchMatrix,
    conv2x2,
    conv2x2_adjoint,
    grad,
    grad_adjoint,
    patch_adjoint,
    patch_extract,
    patch_reconstruct,
)
from .proxops import McpParams, mcp_value, project_c, prox_mcp_2d, prox_mcp_field, svt
from .synthgen import (
    GenParams,
    MaskKind,
    Sample,
    gen_dataset,
    gen_mask,
    gen_sample,
    gen_structure,
    gen_texture,
)

__version__ = "0.1.0"

__all__ = [
    "AdmmConfig", "AdmmState", "BACKEND", "BlockWeights", "ConvKernel2x2",
    "Diagnostics", "GenParams", "GradOps", "GradientField", "Image", "Mask",
    "MaskKind", "McpParams", "MuCnnWeights", "NetConfig", "NetWeights",
    "PatchConfig", "PatchMatrix", "Sample", "a_from_b", "conv2x2",
    "conv2x2_adjoint", "forward", "gen_dataset", "gen_mask", "gen_sample",
    "gen_structure", "gen_texture", "grad", "grad_adjoint", "load_weights",
    "mcp_value", "mu_cnn_forward", "patch_adjoint", "patch_extract",
    "patch_reconstruct", "project_c", "prox_mcp_2d", "prox_mcp_field", "psnr",
    "psnr_joint", "read_image", "save_weights", "solve", "svt", "write_image",
]
