"""Hot-kernel backend selection.

Prefers the compiled Cython extension; falls back to the numpy
implementation when the extension is missing or when the environment
variable ``MURALSIM_PURE`` is set (useful for the backend-comparison
benchmark and for debugging).
"""

import os

if os.environ.get("MURALSIM_PURE"):
    from muralsim._kernels import _fallback as _impl
else:
    try:
        from muralsim._kernels import _speedups as _impl  # type: ignore[no-redef]
    except ImportError:
        from muralsim._kernels import _fallback as _impl  # type: ignore[no-redef]

BACKEND = _impl.BACKEND
splat_gaussian = _impl.splat_gaussian
ransac_consensus = _impl.ransac_consensus
line_inliers = _impl.line_inliers
project_polyline = _impl.project_polyline

__all__ = [
    "BACKEND",
    "splat_gaussian",
    "ransac_consensus",
    "line_inliers",
    "project_polyline",
]
