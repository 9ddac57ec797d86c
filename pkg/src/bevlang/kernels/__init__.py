"""Hot numeric kernels with switchable backends.

The default backend is numba (JIT-compiled on first use, cached on disk).
Set BEVLANG_NO_NUMBA=1 to force the pure-numpy fallback; the fallback is
also selected automatically when numba cannot be imported.

Public functions:
  label_components(mask, connectivity)  -> normalized int32 labels
  k_nearest_planar(xs, ys, tx, ty, k)   -> indices by (distance, index)
  project_points(points, rot, trans, fx, fy, cx, cy, eps)
                                        -> (uv, depth, visible)

`benchmarks/kernel_bench.py` compares the two backends head to head.
"""

from __future__ import annotations

import os

import numpy as np

from . import numpy_impl

_DISABLED = os.environ.get("BEVLANG_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

if _DISABLED:
    _impl = numpy_impl
    BACKEND = "numpy"
else:
    try:
        from . import numba_impl as _impl

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - depends on environment
        _impl = numpy_impl
        BACKEND = "numpy"


def backend_name() -> str:
    return BACKEND


def normalize_labels(raw: np.ndarray) -> np.ndarray:
    """Relabel components as 1..N in raster order of first occurrence.

    Backend-independent canonical form: whatever raw ids a backend
    assigns, the component whose first cell comes earliest in row-major
    order gets label 1, and so on.
    """
    flat = raw.ravel()
    values, first = np.unique(flat, return_index=True)
    keep = values != 0
    values, first = values[keep], first[keep]
    order = np.argsort(first, kind="stable")
    remap = np.zeros(int(values.max()) + 1 if values.size else 1, dtype=np.int32)
    remap[values[order]] = np.arange(1, values.size + 1, dtype=np.int32)
    return remap[flat].reshape(raw.shape)


def label_components(mask: np.ndarray, connectivity: int = 8) -> np.ndarray:
    """Connected components of a boolean grid, labels normalized 1..N."""
    return normalize_labels(_impl.label_components(mask, connectivity))


def k_nearest_planar(xs: np.ndarray, ys: np.ndarray, tx: float, ty: float, k: int) -> np.ndarray:
    return _impl.k_nearest_planar(xs, ys, tx, ty, k)


def project_points(points, rot, trans, fx, fy, cx, cy, depth_eps):
    return _impl.project_points(points, rot, trans, fx, fy, cx, cy, depth_eps)
