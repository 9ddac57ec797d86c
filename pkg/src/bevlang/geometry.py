"""BEV-to-image correspondence: LiDAR neighbors, projection, crops.

Cameras follow the usual optical convention (z forward, x right, y
down); extrinsics map ego-frame points into the camera frame as
p_cam = R p + t. Points at or behind the image plane (depth below
DEPTH_EPS) are never projected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import EmptyCropError, NoPointsError, NotVisibleError

DEPTH_EPS = 1e-3


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Pinhole camera with rigid ego->camera extrinsics."""

    name: str
    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray
    translation: np.ndarray
    image_w: int
    image_h: int

    def __post_init__(self):
        rot = np.ascontiguousarray(self.rotation, dtype=np.float64)
        tr = np.ascontiguousarray(self.translation, dtype=np.float64).reshape(3)
        if rot.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {rot.shape}")
        if not np.allclose(rot.T @ rot, np.eye(3), atol=1e-6):
            raise ValueError(f"rotation for camera {self.name!r} is not orthonormal")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.image_w <= 0 or self.image_h <= 0:
            raise ValueError("image dimensions must be positive")
        rot.setflags(write=False)
        tr.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tr)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CameraModel):
            return NotImplemented
        return (
            self.name == other.name
            and (self.fx, self.fy, self.cx, self.cy) == (other.fx, other.fy, other.cx, other.cy)
            and (self.image_w, self.image_h) == (other.image_w, other.image_h)
            and np.array_equal(self.rotation, other.rotation)
            and np.array_equal(self.translation, other.translation)
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "rotation": [[float(v) for v in row] for row in self.rotation],
            "translation": [float(v) for v in self.translation],
            "image_w": self.image_w,
            "image_h": self.image_h,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        return cls(
            name=d["name"],
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            rotation=np.array(d["rotation"], dtype=np.float64),
            translation=np.array(d["translation"], dtype=np.float64),
            image_w=int(d["image_w"]),
            image_h=int(d["image_h"]),
        )


@dataclass(frozen=True)
class CorrespondenceConfig:
    """Tunables for object-to-image matching."""

    k: int = 8
    bbox_pad_frac: float = 0.2
    min_visible_points: int = 3

    def __post_init__(self):
        if not self.k >= self.min_visible_points >= 1:
            raise ValueError(
                f"need k >= min_visible_points >= 1, got k={self.k}, "
                f"min_visible_points={self.min_visible_points}"
            )
        if not 0.0 <= self.bbox_pad_frac <= 1.0:
            raise ValueError(f"bbox_pad_frac must be in [0, 1], got {self.bbox_pad_frac}")


@dataclass(frozen=True)
class ObjectCrop:
    """A camera crop for one object: padded bbox plus the points in it."""

    object_id: int
    camera_name: str
    bbox_px: tuple[float, float, float, float]
    projected_points_px: tuple[tuple[float, float], ...] = ()

    def validate(self, image_w: int, image_h: int) -> None:
        u_min, v_min, u_max, v_max = self.bbox_px
        if not (0 <= u_min < u_max <= image_w):
            raise ValueError(f"bbox u range ({u_min}, {u_max}) invalid for width {image_w}")
        if not (0 <= v_min < v_max <= image_h):
            raise ValueError(f"bbox v range ({v_min}, {v_max}) invalid for height {image_h}")
        for u, v in self.projected_points_px:
            if not (u_min <= u <= u_max and v_min <= v <= v_max):
                raise ValueError(f"projected point ({u}, {v}) outside bbox {self.bbox_px}")


def k_closest_lidar_points(scan: np.ndarray, object_position: tuple[float, float], k: int) -> np.ndarray:
    """The k scan points nearest to the object in the XY plane.

    Ties break toward the lower point index; fewer than k points in the
    scan returns the whole scan (sorted by distance).
    """
    scan = np.asarray(scan, dtype=np.float64).reshape(-1, 3)
    if scan.shape[0] == 0:
        raise NoPointsError("LiDAR scan is empty")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    idx = kernels.k_nearest_planar(
        np.ascontiguousarray(scan[:, 0]),
        np.ascontiguousarray(scan[:, 1]),
        float(object_position[0]),
        float(object_position[1]),
        int(k),
    )
    return scan[idx]


def project_full(points: np.ndarray, cam: CameraModel, depth_eps: float = DEPTH_EPS):
    """Project all points; returns (uv, depth, visible) over the full input."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return kernels.project_points(
        points, cam.rotation, cam.translation, cam.fx, cam.fy, cam.cx, cam.cy, depth_eps
    )


def project_to_camera(
    points: np.ndarray, cam: CameraModel, depth_eps: float = DEPTH_EPS
) -> list[tuple[float, float, float]]:
    """(u, v, depth) for every point in front of the image plane."""
    uv, depth, visible = project_full(points, cam, depth_eps)
    return [
        (float(uv[i, 0]), float(uv[i, 1]), float(depth[i]))
        for i in np.flatnonzero(visible)
    ]


def _count_in_view(points: np.ndarray, cam: CameraModel, depth_eps: float) -> int:
    uv, _, visible = project_full(points, cam, depth_eps)
    ok = (
        visible
        & (uv[:, 0] >= 0)
        & (uv[:, 0] <= cam.image_w)
        & (uv[:, 1] >= 0)
        & (uv[:, 1] <= cam.image_h)
    )
    return int(ok.sum())


def select_best_camera(
    points: np.ndarray,
    rig: list[CameraModel],
    min_visible_points: int = 3,
    depth_eps: float = DEPTH_EPS,
) -> str:
    """Camera seeing the most points in front of it and inside the image.

    Ties go to the camera listed first in the rig. Raises NotVisibleError
    when no camera reaches min_visible_points.
    """
    if not rig:
        raise ValueError("rig must not be empty")
    best_name, best_count = None, -1
    for cam in rig:
        count = _count_in_view(np.asarray(points), cam, depth_eps)
        if count > best_count:
            best_name, best_count = cam.name, count
    if best_count < min_visible_points:
        raise NotVisibleError(
            f"best camera sees {best_count} points, need {min_visible_points}"
        )
    return best_name  # type: ignore[return-value]


def compute_crop_bbox(
    projected_points_px,
    pad_frac: float,
    image_dims: tuple[int, int],
) -> tuple[float, float, float, float]:
    """Padded, clamped axis-aligned bbox around in-image points.

    Padding is pad_frac times the larger AABB side, applied on every
    side before clamping; the result is at least 2 px in each dimension.
    """
    w, h = image_dims
    pts = np.asarray(projected_points_px, dtype=np.float64).reshape(-1, 2)
    inside = (
        (pts[:, 0] >= 0) & (pts[:, 0] <= w) & (pts[:, 1] >= 0) & (pts[:, 1] <= h)
    )
    pts = pts[inside]
    if pts.shape[0] == 0:
        raise EmptyCropError("no projected point lies inside the image")
    u_min, v_min = pts[:, 0].min(), pts[:, 1].min()
    u_max, v_max = pts[:, 0].max(), pts[:, 1].max()
    pad = pad_frac * max(u_max - u_min, v_max - v_min)
    u_min, u_max = max(0.0, u_min - pad), min(float(w), u_max + pad)
    v_min, v_max = max(0.0, v_min - pad), min(float(h), v_max + pad)
    # enforce a usable minimum crop size
    if u_max - u_min < 2.0:
        u_max = min(float(w), max(u_max, u_min + 2.0))
        u_min = max(0.0, min(u_min, u_max - 2.0))
    if v_max - v_min < 2.0:
        v_max = min(float(h), max(v_max, v_min + 2.0))
        v_min = max(0.0, min(v_min, v_max - 2.0))
    return (float(u_min), float(v_min), float(u_max), float(v_max))
