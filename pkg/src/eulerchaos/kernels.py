"""Backend selection for the hot field kernel.

The compiled extension is used when importable; set ``EULERCHAOS_PURE=1`` to force
the numpy fallback.
"""
from __future__ import annotations

import os

from . import _fallback

BACKENDS = {"python": _fallback.block_field}

try:
    from ._kernels import block_field as _compiled_block_field
except ImportError:  # extension not built
    _compiled_block_field = None
else:
    BACKENDS["compiled"] = _compiled_block_field

if _compiled_block_field is not None and os.environ.get("EULERCHAOS_PURE", "") in ("", "0"):
    BACKEND = "compiled"
else:
    BACKEND = "python"

block_field = BACKENDS[BACKEND]


def get_kernel(name: str | None = None):
    """Return the ``block_field`` implementation for ``name`` (default: active backend)."""
    return BACKENDS[name or BACKEND]
