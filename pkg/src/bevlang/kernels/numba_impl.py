"""Numba-jitted implementations of the hot kernels.

Same contracts as numpy_impl; arithmetic is written so both backends
agree bit-for-bit on integer outputs and to within float round-off on
projections (the summation order matches numpy_impl exactly).
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _label_pass(mask, labels, parent):  # pragma: no cover - jitted
    rows, cols = mask.shape
    nxt = 1
    for r in range(rows):
        for c in range(cols):
            if not mask[r, c]:
                continue
            best = 0
            # scan the already-visited half of the 8-neighborhood
            for dr, dc in ((-1, -1), (-1, 0), (-1, 1), (0, -1)):
                rr = r + dr
                cc = c + dc
                if rr < 0 or cc < 0 or cc >= cols:
                    continue
                lab = labels[rr, cc]
                if lab == 0:
                    continue
                root = lab
                while parent[root] != root:
                    root = parent[root]
                if best == 0 or root < best:
                    if best != 0:
                        parent[best] = root
                    best = root
                elif root != best:
                    parent[root] = best
            if best == 0:
                best = nxt
                parent[nxt] = nxt
                nxt += 1
            labels[r, c] = best
    return nxt


@njit(cache=True)
def _label_pass_4(mask, labels, parent):  # pragma: no cover - jitted
    rows, cols = mask.shape
    nxt = 1
    for r in range(rows):
        for c in range(cols):
            if not mask[r, c]:
                continue
            best = 0
            for dr, dc in ((-1, 0), (0, -1)):
                rr = r + dr
                cc = c + dc
                if rr < 0 or cc < 0:
                    continue
                lab = labels[rr, cc]
                if lab == 0:
                    continue
                root = lab
                while parent[root] != root:
                    root = parent[root]
                if best == 0 or root < best:
                    if best != 0:
                        parent[best] = root
                    best = root
                elif root != best:
                    parent[root] = best
            if best == 0:
                best = nxt
                parent[nxt] = nxt
                nxt += 1
            labels[r, c] = best
    return nxt


@njit(cache=True)
def _resolve_labels(labels, parent):  # pragma: no cover - jitted
    rows, cols = labels.shape
    for r in range(rows):
        for c in range(cols):
            lab = labels[r, c]
            if lab == 0:
                continue
            root = lab
            while parent[root] != root:
                root = parent[root]
            labels[r, c] = root


def label_components(mask: np.ndarray, connectivity: int = 8) -> np.ndarray:
    """Two-pass union-find connected-component labeling."""
    mask = np.ascontiguousarray(mask, dtype=bool)
    labels = np.zeros(mask.shape, dtype=np.int32)
    parent = np.zeros(mask.size + 1, dtype=np.int32)
    if connectivity == 8:
        _label_pass(mask, labels, parent)
    elif connectivity == 4:
        _label_pass_4(mask, labels, parent)
    else:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    _resolve_labels(labels, parent)
    return labels


@njit(cache=True)
def _k_nearest(xs, ys, tx, ty, k):  # pragma: no cover - jitted
    n = xs.shape[0]
    m = min(k, n)
    d2 = np.empty(n, dtype=np.float64)
    for i in range(n):
        d2[i] = (xs[i] - tx) ** 2 + (ys[i] - ty) ** 2
    taken = np.zeros(n, dtype=np.bool_)
    out = np.empty(m, dtype=np.int64)
    for j in range(m):
        best = -1
        for i in range(n):
            if taken[i]:
                continue
            if best < 0 or d2[i] < d2[best]:
                best = i
        taken[best] = True
        out[j] = best
    return out


def k_nearest_planar(
    xs: np.ndarray, ys: np.ndarray, tx: float, ty: float, k: int
) -> np.ndarray:
    return _k_nearest(
        np.ascontiguousarray(xs, dtype=np.float64),
        np.ascontiguousarray(ys, dtype=np.float64),
        float(tx),
        float(ty),
        int(k),
    )


@njit(cache=True)
def _project(points, rot, trans, fx, fy, cx, cy, depth_eps):  # pragma: no cover
    n = points.shape[0]
    uv = np.zeros((n, 2), dtype=np.float64)
    depth = np.empty(n, dtype=np.float64)
    visible = np.empty(n, dtype=np.bool_)
    for i in range(n):
        x = points[i, 0]
        y = points[i, 1]
        z = points[i, 2]
        cz = rot[2, 0] * x + rot[2, 1] * y + rot[2, 2] * z + trans[2]
        depth[i] = cz
        if cz > depth_eps:
            visible[i] = True
            cx_ = rot[0, 0] * x + rot[0, 1] * y + rot[0, 2] * z + trans[0]
            cy_ = rot[1, 0] * x + rot[1, 1] * y + rot[1, 2] * z + trans[1]
            uv[i, 0] = fx * (cx_ / cz) + cx
            uv[i, 1] = fy * (cy_ / cz) + cy
        else:
            visible[i] = False
    return uv, depth, visible


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
    return _project(
        np.ascontiguousarray(points, dtype=np.float64),
        np.ascontiguousarray(rot, dtype=np.float64),
        np.ascontiguousarray(trans, dtype=np.float64),
        float(fx),
        float(fy),
        float(cx),
        float(cy),
        float(depth_eps),
    )
