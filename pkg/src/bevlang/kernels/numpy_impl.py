"""Pure-numpy implementations of the hot kernels.

These are the fallback path used when numba is unavailable or disabled
via BEVLANG_NO_NUMBA=1. Each function must produce outputs identical to
its counterpart in numba_impl (integer outputs bit-exact, float outputs
within a few ulp).
"""

from __future__ import annotations

import numpy as np


def label_components(mask: np.ndarray, connectivity: int = 8) -> np.ndarray:
    """Label connected components of a boolean grid.

    Returns an int32 array of raw labels, 0 for background. Label values
    are arbitrary but constant per component; callers normalize ordering.

    Uses iterative min-label propagation: every foreground cell starts
    with its own flat index + 1 and repeatedly takes the minimum over its
    neighborhood until a fixpoint. Converges in O(component diameter)
    vectorized sweeps.
    """
    mask = np.ascontiguousarray(mask, dtype=bool)
    rows, cols = mask.shape
    labels = np.zeros((rows, cols), dtype=np.int64)
    labels[mask] = np.flatnonzero(mask.ravel()) + 1

    if connectivity == 8:
        shifts = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    elif connectivity == 4:
        shifts = [(-1, 0), (0, -1), (0, 1), (1, 0)]
    else:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")

    while True:
        lowest = labels.copy()
        for dr, dc in shifts:
            shifted = np.zeros_like(labels)
            src_r = slice(max(0, -dr), rows - max(0, dr))
            dst_r = slice(max(0, dr), rows - max(0, -dr))
            src_c = slice(max(0, -dc), cols - max(0, dc))
            dst_c = slice(max(0, dc), cols - max(0, -dc))
            shifted[dst_r, dst_c] = labels[src_r, src_c]
            np.minimum(lowest, np.where((shifted > 0) & mask, shifted, lowest), out=lowest)
        lowest[~mask] = 0
        if np.array_equal(lowest, labels):
            break
        labels = lowest

    return labels.astype(np.int32)


def k_nearest_planar(
    xs: np.ndarray, ys: np.ndarray, tx: float, ty: float, k: int
) -> np.ndarray:
    """Indices of the k points nearest to (tx, ty) in the XY plane.

    Sorted by squared distance, ties broken by ascending index. Returns
    all indices when k exceeds the point count.
    """
    d2 = (xs - tx) ** 2 + (ys - ty) ** 2
    order = np.lexsort((np.arange(d2.shape[0]), d2))
    return order[: min(k, d2.shape[0])].astype(np.int64)


def project_points(
    points: np.ndarray,
    rot: np.ndarray,
    trans: np.ndarray,
    fx: float,
    fy: float,
    cx: float,
    cy: float,
    depth_eps: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rigid transform + pinhole projection for an (N, 3) point array.

    Returns (uv (N, 2), depth (N,), visible (N,) bool). uv rows for
    non-visible points (depth <= depth_eps) are left at 0 and must be
    ignored by callers.
    """
    n = points.shape[0]
    uv = np.zeros((n, 2), dtype=np.float64)
    cam = np.empty((n, 3), dtype=np.float64)
    for axis in range(3):
        cam[:, axis] = (
            rot[axis, 0] * points[:, 0]
            + rot[axis, 1] * points[:, 1]
            + rot[axis, 2] * points[:, 2]
            + trans[axis]
        )
    depth = cam[:, 2].copy()
    visible = depth > depth_eps
    safe = np.where(visible, depth, 1.0)
    uv[:, 0] = np.where(visible, fx * (cam[:, 0] / safe) + cx, 0.0)
    uv[:, 1] = np.where(visible, fy * (cam[:, 1] / safe) + cy, 0.0)
    return uv, depth, visible
