"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy implementation in ``_fallback`` takes over. Set ``TRUSS_AGENTS_PURE=1``
to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("TRUSS_AGENTS_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback

draw_segment = _impl.draw_segment
draw_disc = _impl.draw_disc
ssim_map = _impl.ssim_map
label4 = _impl.label4

__all__ = ["BACKEND", "draw_segment", "draw_disc", "ssim_map", "label4"]
