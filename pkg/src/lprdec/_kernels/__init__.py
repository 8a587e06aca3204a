"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; the pure-NumPy
fallback is used otherwise. Both produce bit-identical results. Set
``LPRDEC_BACKEND=python`` or ``LPRDEC_BACKEND=native`` to force a choice
(``native`` raises if the extension is unavailable).
"""

import os

from . import _fallback

_requested = os.environ.get("LPRDEC_BACKEND", "auto")
if _requested not in ("auto", "native", "python"):
    raise RuntimeError(f"unknown LPRDEC_BACKEND value: {_requested!r}")

_impl = _fallback
if _requested in ("auto", "native"):
    try:
        from . import _native as _impl  # type: ignore[no-redef]
    except ImportError:
        if _requested == "native":
            raise RuntimeError(
                "LPRDEC_BACKEND=native but the compiled extension is not built"
            ) from None

BACKEND = _impl.BACKEND_NAME

grad = _impl.grad
conv2x2 = _impl.conv2x2
conv2x2_adjoint = _impl.conv2x2_adjoint
prox_mcp_field = _impl.prox_mcp_field
project_c = _impl.project_c
patch_extract = _impl.patch_extract
patch_adjoint = _impl.patch_adjoint


def available_backends():
    """Name -> module for every importable backend (used by tests/benchmarks)."""
    impls = {"python": _fallback}
    try:
        from . import _native

        impls["native"] = _native
    except ImportError:
        pass
    return impls
